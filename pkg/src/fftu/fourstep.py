"""Sequential four-step FFT: local transforms, twiddling, transposition, local transforms.

For ``x`` of length ``n`` and a split factor ``p`` with ``p**2 | n``:

0. ``z[s] = F_{n/p}(x[s::p])`` for every ``s < p``
1. ``z[s][k] *= w_n^(k s)``
2. ``w[k][s] = z[s][k]``
3. ``y[k::n/p] = F_p(w[k])``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .distribution import ConfigurationError
from .kernel import fft_1d, fft_strided, omega_powers

__all__ = ["SplitPlan", "four_step", "four_step_inplace"]


@dataclass(frozen=True)
class SplitPlan:
    n: int
    p: int

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigurationError(f"need n >= 1 and p >= 1, got n={self.n}, p={self.p}")
        if self.n % (self.p * self.p):
            raise ConfigurationError(f"p^2 = {self.p * self.p} does not divide n = {self.n}")


def _plan(x: np.ndarray, plan: Union[SplitPlan, int]) -> SplitPlan:
    if not isinstance(plan, SplitPlan):
        plan = SplitPlan(x.size, int(plan))
    if plan.n != x.size:
        raise ConfigurationError(f"plan is for n={plan.n}, signal has length {x.size}")
    return plan


def _twiddles(n: int, p: int, s: int) -> np.ndarray:
    return omega_powers(n, np.arange(n // p) * s)


def four_step(x, plan: Union[SplitPlan, int],
              on_step: Optional[Callable[[int, object], None]] = None) -> np.ndarray:
    """Return ``F_n(x)`` computed with the four-step factorization.

    ``on_step(step, state)`` is called after each step with the intermediate
    values (``z`` after steps 0 and 1, ``w`` after step 2, ``y`` after step 3);
    it exists so tests can inspect the individual steps.
    """
    x = np.asarray(x, dtype=np.complex128)
    plan = _plan(x, plan)
    n, p = plan.n, plan.p
    m = n // p

    z = [fft_1d(x[s::p]) for s in range(p)]
    if on_step:
        on_step(0, [zs.copy() for zs in z])

    for s in range(p):
        z[s] *= _twiddles(n, p, s)
    if on_step:
        on_step(1, [zs.copy() for zs in z])

    w = [np.array([z[s][k] for s in range(p)]) for k in range(m)]
    if on_step:
        on_step(2, [wk.copy() for wk in w])

    y = np.empty(n, dtype=np.complex128)
    for k in range(m):
        y[k::m] = fft_1d(w[k])
    if on_step:
        on_step(3, y.copy())
    return y


def four_step_inplace(x: np.ndarray, plan: Union[SplitPlan, int],
                      scratch: Optional[np.ndarray] = None) -> None:
    """Overwrite ``x`` with ``F_n(x)``.

    The only O(n) temporary is ``scratch`` (allocated if not given), used for
    the step-2 permutation. It is not touched when ``p == 1``.
    """
    if x.dtype != np.complex128 or x.ndim != 1:
        raise TypeError("four_step_inplace needs a 1D complex128 array")
    plan = _plan(x, plan)
    n, p = plan.n, plan.p
    m = n // p

    for s in range(p):
        fft_strided(x, s, p, m)
    if p == 1:
        return

    for s in range(p):
        x[s::p] *= _twiddles(n, p, s)

    if scratch is None:
        scratch = np.empty(n, dtype=np.complex128)
    elif scratch.shape != (n,):
        raise ValueError(f"scratch buffer must have shape ({n},)")
    scratch[:] = x
    # w[k] occupies the output slots y[k::m]: y[k + s*m] = z[s][k] = x[k*p + s]
    x.reshape(p, m)[...] = scratch.reshape(m, p).T

    for k in range(m):
        fft_strided(x, k, m, p)
