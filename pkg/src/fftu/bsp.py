"""A small in-process BSP runtime.

``run_spmd(p, program)`` runs ``program(bsp)`` once per virtual processor.
Inside the program, ``bsp.put`` buffers a one-sided write into a named buffer
of some destination processor and ``bsp.sync`` ends the superstep: all puts of
the superstep are applied at the barrier and become visible in the next
superstep. Puts are applied in (source rank, issue order), so the final state
does not depend on thread scheduling.

Every superstep is recorded in a :class:`SuperstepTrace` with per-rank flop,
sent-word and received-word counts. Following the usual BSP accounting for
Put-only programs, only supersteps that communicate are charged a
synchronization.

Two execution modes exist: ``parallel`` (one thread per processor, meeting at
a barrier) and ``serial`` (the same threads, but run one at a time in rank
order). Setting ``FFTU_SERIAL=1`` selects the serial mode by default and
``FFTU_CHECK=1`` turns on overlap detection for puts.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "BSP",
    "BSPError",
    "OverlapError",
    "CostModel",
    "Superstep",
    "SuperstepTrace",
    "cost_report",
    "run_spmd",
    "serial_default",
]


class BSPError(RuntimeError):
    pass


class OverlapError(BSPError):
    """Two puts in one superstep wrote the same destination element."""


class _Aborted(Exception):
    pass


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def serial_default() -> bool:
    return _env_flag("FFTU_SERIAL")


@dataclass
class Superstep:
    kind: str
    flops: List[float]
    words_sent: List[int]
    words_received: List[int]

    @property
    def max_flops(self) -> float:
        return max(self.flops)

    @property
    def max_words_sent(self) -> int:
        return max(self.words_sent)

    @property
    def max_words_received(self) -> int:
        return max(self.words_received)

    @property
    def sync_charged(self) -> int:
        return 1 if self.kind == "communicate" else 0

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d.update(max_flops=self.max_flops, max_words_sent=self.max_words_sent,
                 max_words_received=self.max_words_received, sync_charged=self.sync_charged)
        return d


@dataclass
class SuperstepTrace:
    nprocs: int
    supersteps: List[Superstep] = field(default_factory=list)

    def __len__(self):
        return len(self.supersteps)

    def __iter__(self):
        return iter(self.supersteps)

    @property
    def communicate_count(self) -> int:
        return sum(1 for s in self.supersteps if s.kind == "communicate")

    @property
    def sync_count(self) -> int:
        return sum(s.sync_charged for s in self.supersteps)

    def flops_per_rank(self) -> List[float]:
        return [sum(s.flops[r] for s in self.supersteps) for r in range(self.nprocs)]

    def words_sent_per_rank(self) -> List[int]:
        return [sum(s.words_sent[r] for s in self.supersteps) for r in range(self.nprocs)]

    def words_received_per_rank(self) -> List[int]:
        return [sum(s.words_received[r] for s in self.supersteps) for r in range(self.nprocs)]

    def summary(self) -> Dict[str, Any]:
        return {
            "nprocs": self.nprocs,
            "supersteps": len(self.supersteps),
            "communicate_supersteps": self.communicate_count,
            "syncs_charged": self.sync_count,
            "max_flops_per_rank": max(self.flops_per_rank(), default=0.0),
            "max_words_sent": max(self.words_sent_per_rank(), default=0),
            "max_words_received": max(self.words_received_per_rank(), default=0),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {"nprocs": self.nprocs, "supersteps": [s.to_dict() for s in self.supersteps]}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class CostModel:
    g: float = 1.0
    l: float = 0.0

    def __post_init__(self):
        if self.g < 0 or self.l < 0:
            raise ValueError("g and l must be non-negative")


def cost_report(trace: SuperstepTrace, model: CostModel) -> float:
    """Total BSP cost: per superstep, max flops + g * max(h_send, h_recv) + l if charged."""
    total = 0.0
    for step in trace:
        h = max(step.max_words_sent, step.max_words_received)
        total += step.max_flops + model.g * h + model.l * step.sync_charged
    return total


def _region(buffer: np.ndarray, start, count, stride) -> Tuple[slice, ...]:
    nd = buffer.ndim
    start = (start,) if np.isscalar(start) else tuple(start)
    count = (count,) if np.isscalar(count) else tuple(count)
    stride = (1,) * nd if stride is None else ((stride,) if np.isscalar(stride) else tuple(stride))
    if not (len(start) == len(count) == len(stride) == nd):
        raise BSPError(f"descriptor rank mismatch for a {nd}-dimensional buffer")
    slices = []
    for a, c, st, n in zip(start, count, stride, buffer.shape):
        a, c, st = int(a), int(c), int(st)
        if c < 1 or st < 1 or a < 0 or a + (c - 1) * st >= n:
            raise BSPError(f"put region start={start} count={count} stride={stride} outside buffer {buffer.shape}")
        slices.append(slice(a, a + (c - 1) * st + 1, st))
    return tuple(slices)


class BSP:
    """Per-processor handle passed to SPMD programs."""

    def __init__(self, runtime: "_Runtime", pid: int):
        self._rt = runtime
        self.pid = pid
        self.nprocs = runtime.p
        self._buffers: Dict[str, np.ndarray] = {}
        self._flops = 0.0
        self._sent = 0

    def register(self, name: str, buffer: np.ndarray) -> None:
        """Expose ``buffer`` as a put target called ``name`` on this processor."""
        self._buffers[name] = buffer

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def add_flops(self, n: float) -> None:
        self._flops += n

    def put(self, dest: int, payload, name: str, start=0, count=None, stride=None) -> None:
        """Write ``payload`` into ``dest``'s buffer ``name`` at the strided box
        ``start:start+count*stride:stride``, effective after the next sync.

        The payload is copied immediately, so the caller may reuse it.
        """
        if not 0 <= dest < self.nprocs:
            raise BSPError(f"put to nonexistent processor {dest}")
        target = self._rt.handles[dest]._buffers.get(name)
        if target is None:
            raise BSPError(f"processor {dest} has no registered buffer {name!r}")
        payload = np.array(payload, dtype=target.dtype, copy=True)
        if count is None:
            count = payload.shape if payload.ndim == target.ndim else (payload.size,)
        region = _region(target, start, count, stride)
        if payload.size != int(np.prod([len(range(*s.indices(n))) for s, n in zip(region, target.shape)])):
            raise BSPError(f"payload of {payload.size} words does not fit region {count}")
        self._rt.outbox[self.pid].append((dest, name, region, payload))
        self._sent += payload.size

    def sync(self) -> None:
        self._rt.sync(self.pid)


class _Runtime:
    def __init__(self, p: int, serial: bool, check: bool):
        self.p = p
        self.serial = serial
        self.check = check
        self.handles = [BSP(self, pid) for pid in range(p)]
        self.outbox: List[list] = [[] for _ in range(p)]
        self.inbox: List[list] = [[] for _ in range(p)]
        self.finished = [False] * p
        self.trace = SuperstepTrace(p)
        self.errors: Dict[int, BaseException] = {}
        self.barrier = threading.Barrier(p, action=self._exchange)
        self.cv = threading.Condition()
        self.turn = 0
        self.generation = 0
        self.aborted = False

    # superstep boundary, executed once while every processor waits
    def _exchange(self) -> None:
        if any(self.finished) and not all(self.finished):
            done = [pid for pid, f in enumerate(self.finished) if f]
            raise BSPError(f"processors {done} finished while others are still in a superstep")
        received = [0] * self.p
        for src in range(self.p):
            for item in self.outbox[src]:
                received[item[0]] += item[3].size
                self.inbox[item[0]].append(item)
            self.outbox[src] = []
        flops = [h._flops for h in self.handles]
        sent = [h._sent for h in self.handles]
        for h in self.handles:
            h._flops, h._sent = 0.0, 0
        if any(sent) or any(flops):
            kind = "communicate" if any(sent) else "compute"
            self.trace.supersteps.append(Superstep(kind, flops, sent, received))

    def _deliver(self, pid: int) -> None:
        items, self.inbox[pid] = self.inbox[pid], []
        if not items:
            return
        handle = self.handles[pid]
        masks: Dict[str, np.ndarray] = {}
        for dest, name, region, payload in items:
            target = handle._buffers[name]
            view = target[region]
            if self.check:
                mask = masks.setdefault(name, np.zeros(target.shape, dtype=bool))
                if mask[region].any():
                    raise OverlapError(f"overlapping puts into buffer {name!r} of processor {pid}")
                mask[region] = True
            view[...] = payload.reshape(view.shape)

    def sync(self, pid: int) -> None:
        if self.serial:
            with self.cv:
                generation = self.generation
                self.turn += 1
                if self.turn == self.p:
                    try:
                        self._exchange()
                    except BaseException:
                        self.aborted = True
                        self.cv.notify_all()
                        raise
                    self.turn = 0
                    self.generation += 1
                self.cv.notify_all()
                if self.finished[pid]:
                    # nobody runs after the closing sync; only wait for the exchange
                    while self.generation == generation and not self.aborted:
                        self.cv.wait()
                    if self.aborted:
                        raise _Aborted()
                else:
                    self._wait_turn(pid)
        else:
            try:
                self.barrier.wait()
            except threading.BrokenBarrierError:
                raise _Aborted() from None
        self._deliver(pid)

    def _wait_turn(self, pid: int) -> None:
        while self.turn != pid and not self.aborted:
            self.cv.wait()
        if self.aborted:
            raise _Aborted()

    def abort(self) -> None:
        self.barrier.abort()
        with self.cv:
            self.aborted = True
            self.cv.notify_all()

    def run_rank(self, pid: int, program: Callable[[BSP], Any], results: list) -> None:
        try:
            if self.serial:
                with self.cv:
                    self._wait_turn(pid)
            handle = self.handles[pid]
            results[pid] = program(handle)
            self.finished[pid] = True
            handle.sync()
        except _Aborted:
            pass
        except BaseException as exc:
            self.errors[pid] = exc
            self.abort()


def run_spmd(p: int, program: Callable[[BSP], Any], serial: Optional[bool] = None,
             check: Optional[bool] = None) -> Tuple[List[Any], SuperstepTrace]:
    """Run ``program`` on ``p`` virtual processors.

    Returns the list of per-processor return values and the superstep trace.
    A final sync is implied when the program returns. If any processor raises,
    the run is aborted and the exception of the lowest failing rank is re-raised.
    """
    if p < 1:
        raise ValueError(f"need at least one processor, got {p}")
    if serial is None:
        serial = serial_default()
    if check is None:
        check = _env_flag("FFTU_CHECK")
    rt = _Runtime(p, serial, check)
    results: List[Any] = [None] * p
    threads = [threading.Thread(target=rt.run_rank, args=(pid, program, results), name=f"bsp-{pid}", daemon=True)
               for pid in range(p)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if rt.errors:
        pid = min(rt.errors)
        raise rt.errors[pid]
    return results, rt.trace
