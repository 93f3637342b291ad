"""Parallel multidimensional FFT in the cyclic distribution with a single all-to-all."""

from .bsp import CostModel, SuperstepTrace, cost_report, run_spmd
from .distribution import ConfigurationError, CyclicMap, PencilMap, ProcGrid, SlabMap, gather, max_processors, scatter
from .engine import FftuPlan, fftu_global, fftu_inverse, fftu_transform, make_plan, pack_and_twiddle
from .fourstep import SplitPlan, four_step, four_step_inplace
from .kernel import dft_naive, dft_naive_md, fft_1d, fft_md, fft_strided, omega

__version__ = "0.1.0"
