"""Propagation loops: adaptive / equidistant CFM and an adaptive DOPRI5 baseline.

Every loop returns ``(psi_end, trace)``. The trace lists each attempted step
(accepted or rejected) and each observable sample, with cumulative matvec
counts taken from the generator's own counter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .cfm import CFMScheme, cfm_step, step_with_estimate
from .krylov import KrylovBreakdown, KrylovConfig
from .pulse import Generator


class PropagationError(RuntimeError):
    """Unrecoverable failure; ``trace`` holds everything up to the failure."""

    def __init__(self, message: str, trace: "PropagationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ControllerConfig:
    tol: float = 1e-7
    safety: float = 0.9
    fac_min: float = 0.2
    fac_max: float = 5.0
    tau_min: float = 1e-12
    tau_max: float = math.inf
    tau_init: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if not 0 < self.fac_min < 1 < self.fac_max:
            raise ValueError("need 0 < fac_min < 1 < fac_max")
        if not 0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.tau_init is not None and not self.tau_min <= self.tau_init <= self.tau_max:
            raise ValueError("tau_init must lie in [tau_min, tau_max]")


def next_step_size(cfg: ControllerConfig, tau: float, est: float, p: int):
    """Classical controller: ``tau * safety * (tol / est)**(1/(p+1))``, clamped.

    Returns ``(tau_new, accept)`` with ``accept = est <= tol``.
    """
    accept = est <= cfg.tol
    if est == 0.0:
        fac = cfg.fac_max
    else:
        fac = cfg.safety * (cfg.tol / est) ** (1.0 / (p + 1))
        fac = min(cfg.fac_max, max(cfg.fac_min, fac))
    tau_new = min(cfg.tau_max, max(cfg.tau_min, tau * fac))
    return tau_new, accept


def default_tau_init(gen: Generator, t_start: float, t_end: float) -> float:
    """``1e-2 * width`` if a drive is switching at ``t_start``, else 1% of the span."""
    for p, _ in gen.drives:
        if abs(t_start - p.t_switch) <= 40 * p.width:
            return 1e-2 * p.width
    return (t_end - t_start) / 100


# -- trace -------------------------------------------------------------------


class StepEvent(NamedTuple):
    t: float
    t_next: float
    tau: float
    est: float
    accepted: bool
    matvecs: int
    note: str = ""


class Sample(NamedTuple):
    t: float
    g: float
    matvecs: int
    values: tuple


_BASE_COLUMNS = ["kind", "t", "t_next", "tau", "est", "accepted", "matvecs", "note", "g"]


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


@dataclass
class PropagationTrace:
    """Step and sample records of one propagation.

    ``events`` keeps the chronological interleaving of steps and samples,
    which is the row order of the CSV form.
    """

    method: str = ""
    observable_names: List[str] = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def steps(self) -> List[StepEvent]:
        return [e for e in self.events if isinstance(e, StepEvent)]

    @property
    def accepted(self) -> List[StepEvent]:
        return [e for e in self.events if isinstance(e, StepEvent) and e.accepted]

    @property
    def rejected(self) -> List[StepEvent]:
        return [e for e in self.events if isinstance(e, StepEvent) and not e.accepted]

    @property
    def samples(self) -> List[Sample]:
        return [e for e in self.events if isinstance(e, Sample)]

    @property
    def matvecs(self) -> int:
        return self.events[-1].matvecs if self.events else 0

    def sample_array(self) -> np.ndarray:
        return np.array([s.values for s in self.samples])

    def accepted_taus(self) -> np.ndarray:
        return np.array([e.tau for e in self.accepted])

    def check(self, t_start: float, t_end: float, output_times: Sequence[float] = ()) -> None:
        """Raise ``ValueError`` unless accepted steps tile ``[t_start, t_end]``
        exactly and land on every output time."""
        acc = self.accepted
        if not acc:
            raise ValueError("trace has no accepted steps")
        if acc[0].t != t_start:
            raise ValueError(f"first step starts at {acc[0].t!r}, not {t_start!r}")
        for prev, nxt in zip(acc, acc[1:]):
            if nxt.t != prev.t_next:
                raise ValueError(f"gap or overlap between {prev.t_next!r} and {nxt.t!r}")
        if acc[-1].t_next != t_end:
            raise ValueError(f"last step ends at {acc[-1].t_next!r}, not {t_end!r}")
        landings = {e.t_next for e in acc} | {t_start}
        for t in output_times:
            if t_start <= t <= t_end and t not in landings:
                raise ValueError(f"no accepted step lands on output time {t!r}")
        sampled = [s.t for s in self.samples]
        wanted = [t for t in output_times if t_start <= t <= t_end]
        if sorted(sampled) != sorted(wanted):
            raise ValueError("samples do not match output times")

    def to_csv(self, path) -> None:
        """Write one row per event, floats with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_BASE_COLUMNS + list(self.observable_names))
            blank = [""] * len(self.observable_names)
            for e in self.events:
                if isinstance(e, StepEvent):
                    w.writerow(["step", _fmt(e.t), _fmt(e.t_next), _fmt(e.tau), _fmt(e.est),
                                int(e.accepted), e.matvecs, e.note, ""] + blank)
                else:
                    w.writerow(["sample", _fmt(e.t), "", "", "", "", e.matvecs, "", _fmt(e.g)]
                               + [_fmt(v) for v in e.values])

    @classmethod
    def from_csv(cls, path, method: str = "") -> "PropagationTrace":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[: len(_BASE_COLUMNS)] != _BASE_COLUMNS:
                raise ValueError(f"unexpected trace header {header!r}")
            trace = cls(method, header[len(_BASE_COLUMNS):])
            for row in r:
                if row[0] == "step":
                    trace.events.append(StepEvent(float(row[1]), float(row[2]), float(row[3]),
                                                  float(row[4]), row[5] == "1", int(row[6]), row[7]))
                elif row[0] == "sample":
                    vals = tuple(float(x) for x in row[len(_BASE_COLUMNS):])
                    trace.events.append(Sample(float(row[1]), float(row[8]), int(row[6]), vals))
                else:
                    raise ValueError(f"unknown row kind {row[0]!r}")
        return trace


Observer = Callable[[np.ndarray], np.ndarray]


class _Recorder:
    def __init__(self, method, gen, t_start, t_end, output_times, observer, breakpoints=()):
        names = list(getattr(observer, "names", [])) if observer is not None else []
        self.trace = PropagationTrace(method, names)
        self.gen = gen
        self.start = gen.matvecs
        self.observer = observer
        outs = sorted({float(t) for t in output_times if t_start <= t <= t_end})
        self.outputs = set(outs)
        # landing targets: output times and breakpoints after t_start, and t_end
        stops = {float(t) for t in breakpoints if t_start < t < t_end}
        self.targets = sorted({t for t in outs if t > t_start} | stops | {float(t_end)})
        self.t_start = t_start

    @property
    def matvecs(self) -> int:
        return self.gen.matvecs - self.start

    def step(self, t, t_next, est, accepted, note=""):
        self.trace.events.append(
            StepEvent(t, t_next, t_next - t, float(est), bool(accepted), self.matvecs, note))

    def sample(self, t, u):
        if t not in self.outputs:
            return
        g = float(self.gen.drive(t)) if self.gen.drives else 0.0
        vals = () if self.observer is None else tuple(float(x) for x in self.observer(u))
        self.trace.events.append(Sample(t, g, self.matvecs, vals))

    def next_target(self, t):
        for x in self.targets:
            if x > t:
                return x
        return self.targets[-1]


def _clip(t, tau, target):
    """End point of a step of nominal size ``tau`` towards ``target``.

    Lands exactly on ``target`` when it is within ``1.01 * tau``; when it is
    less than two steps away the distance is halved, so no sliver steps are
    left before a landing point.
    """
    d = target - t
    if d <= 1.01 * tau:
        return target, True
    if d < 2 * tau:
        return t + 0.5 * d, True
    return t + tau, False


def _check_inputs(psi0, t_start, t_end):
    psi0 = np.asarray(psi0, dtype=complex)
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    if np.linalg.norm(psi0) == 0:
        raise ValueError("initial state is zero")
    return psi0


def drive_breakpoints(gen: Generator):
    """Switch times of the drives.

    Adaptive loops land on these: a step whose start lies before a switch
    but whose quadrature nodes and end point all lie after it would pass
    the defect test without ever sampling the switch.
    """
    return [p.t_switch for p, _ in gen.drives]


def _adaptive_loop(method, order, attempt, gen, psi0, t_start, t_end, cfg, output_times, observer,
                   breakpoints=None):
    """Shared controller loop; ``attempt(t, t_next, u)`` returns ``(u_next, est)``."""
    psi0 = _check_inputs(psi0, t_start, t_end)
    if breakpoints is None:
        breakpoints = drive_breakpoints(gen)
    rec = _Recorder(method, gen, t_start, t_end, output_times, observer, breakpoints)
    t, u = float(t_start), psi0
    tau = cfg.tau_init if cfg.tau_init is not None else default_tau_init(gen, t_start, t_end)
    tau = min(max(tau, cfg.tau_min), cfg.tau_max)
    krylov_cap = math.inf
    last_breakdown = False
    rec.sample(t, u)
    while t < t_end:
        target = rec.next_target(t)
        tau_try = min(tau, krylov_cap)
        t_next, clipped = _clip(t, tau_try, target)
        h = t_next - t
        try:
            u_next, est = attempt(t, t_next, u)
        except KrylovBreakdown as exc:
            rec.step(t, t_next, math.inf, False, "krylov")
            if last_breakdown:
                raise PropagationError(f"repeated Krylov breakdown at t={t!r}: {exc}", rec.trace) from exc
            last_breakdown = True
            krylov_cap = 0.5 * h
            tau = 0.5 * h
            continue
        last_breakdown = False
        tau_new, accept = next_step_size(cfg, h, est, order)
        if not math.isfinite(est):
            accept = False
            tau_new = max(cfg.tau_min, cfg.fac_min * h)
        rec.step(t, t_next, est, accept)
        if accept:
            t, u = t_next, u_next
            rec.sample(t, u)
            tau = max(tau_new, tau_try) if clipped else tau_new
        else:
            if h <= cfg.tau_min:
                raise PropagationError(
                    f"step size underflow at t={t!r}: est {est:.3e} > tol {cfg.tol:.1e} "
                    f"with tau={h:.3e}", rec.trace)
            tau = tau_new
    return u, rec.trace


def propagate_adaptive(
    scheme: CFMScheme,
    gen: Generator,
    psi0: np.ndarray,
    t_start: float,
    t_end: float,
    cfg: ControllerConfig = ControllerConfig(),
    kcfg: KrylovConfig = KrylovConfig(),
    output_times: Sequence[float] = (),
    observer: Optional[Observer] = None,
    k_max: Optional[int] = None,
    breakpoints: Optional[Sequence[float]] = None,
):
    """Adaptive CFM propagation driven by the defect-based estimate.

    Steps are clipped so that accepted steps land exactly on every output
    time, on every breakpoint (default: the drive switch times) and on
    ``t_end``. A Lanczos breakdown rejects the step and halves
    it (and caps later steps at that size); a second breakdown in a row is
    fatal.
    """

    def attempt(t, t_next, u):
        res = step_with_estimate(scheme, gen, t, t_next - t, u, kcfg, k_max)
        return res.u_next, res.est

    return _adaptive_loop(scheme.name, scheme.order, attempt, gen, psi0, t_start, t_end,
                          cfg, output_times, observer, breakpoints)


def propagate_fixed(
    scheme: CFMScheme,
    gen: Generator,
    psi0: np.ndarray,
    t_start: float,
    t_end: float,
    n_steps: int,
    kcfg: KrylovConfig = KrylovConfig(),
    output_times: Sequence[float] = (),
    observer: Optional[Observer] = None,
):
    """Equidistant CFM steps ``tau = (t_end - t_start) / n_steps``.

    Output times that fall inside a step split it in two, so the grid stays
    uniform apart from those splits.
    """
    psi0 = _check_inputs(psi0, t_start, t_end)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rec = _Recorder(scheme.name, gen, t_start, t_end, output_times, observer)
    h = (t_end - t_start) / n_steps
    grid = [t_start + k * h for k in range(n_steps)] + [float(t_end)]
    points = sorted(set(grid) | (rec.outputs - {t_start}))
    u = psi0
    rec.sample(points[0], u)
    for t, t_next in zip(points, points[1:]):
        try:
            u = cfm_step(scheme, gen, t, t_next - t, u, kcfg).u_next
        except KrylovBreakdown as exc:
            rec.step(t, t_next, math.inf, False, "krylov")
            raise PropagationError(f"Krylov breakdown at t={t!r}: {exc}", rec.trace) from exc
        rec.step(t, t_next, math.nan, True)
        rec.sample(t_next, u)
    return u, rec.trace


# -- Dormand-Prince 5(4) -----------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


class DopriStep(NamedTuple):
    u5: np.ndarray
    est: float
    matvecs: int
    k_first: np.ndarray
    k_last: np.ndarray


def dopri45_step(gen: Generator, t_n: float, tau: float, u: np.ndarray,
                 k1: Optional[np.ndarray] = None, t_next: Optional[float] = None) -> DopriStep:
    """One Dormand-Prince 5(4) step for ``u' = A(t) u``.

    ``est = ||u5 - u4||``. Passing the previous step's ``k_last`` as ``k1``
    (first-same-as-last) saves one generator application, leaving six.
    """
    u = np.asarray(u, dtype=complex)
    before = gen.matvecs
    k = [gen.apply(t_n, u) if k1 is None else k1]
    for i in range(1, 6):
        incr = sum(a * kj for a, kj in zip(_DP_A[i], k) if a != 0.0)
        k.append(gen.apply(t_n + _DP_C[i] * tau, u + tau * incr))
    u5 = u + tau * sum(b * kj for b, kj in zip(_DP_B5, k) if b != 0.0)
    k.append(gen.apply(t_n + tau if t_next is None else t_next, u5))
    err = tau * sum(e * kj for e, kj in zip(_DP_E, k) if e != 0.0)
    return DopriStep(u5, float(np.linalg.norm(err)), gen.matvecs - before, k[0], k[-1])


def propagate_dopri45_adaptive(
    gen: Generator,
    psi0: np.ndarray,
    t_start: float,
    t_end: float,
    cfg: ControllerConfig = ControllerConfig(),
    output_times: Sequence[float] = (),
    observer: Optional[Observer] = None,
    breakpoints: Optional[Sequence[float]] = None,
):
    """Adaptive DOPRI5 with the same controller (``p = 4``) and trace format."""
    fsal = {}

    def attempt(t, t_next, u):
        # k1 is f(t, u): reusable on a retry from the same t, or from the
        # previous attempt's last stage once that attempt was accepted
        k1 = None
        if fsal.get("t") == t:
            k1 = fsal["k1"]
        elif fsal.get("t_next") == t:
            k1 = fsal["k_last"]
        res = dopri45_step(gen, t, t_next - t, u, k1, t_next=t_next)
        fsal.update(t=t, k1=res.k_first, t_next=t_next, k_last=res.k_last)
        return res.u5, res.est

    return _adaptive_loop("DoPri45", 4, attempt, gen, psi0, t_start, t_end,
                          cfg, output_times, observer, breakpoints)
