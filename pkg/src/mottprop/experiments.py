"""Experiment drivers behind the command line: simulate, benchmark,
convergence and ground-state runs, each writing plot-ready CSV / key-value
files."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cfm import fit_slope, local_errors, reference_flow, resolve_scheme
from .config import ExperimentConfig
from .hubbard import (FockBasis, HubbardParams, all_occupations, assemble_potential,
                      assemble_static, enumerate_basis, occupation_observer)
from .krylov import GroundState, KrylovConfig, ground_state
from .pulse import DriveProfile, Generator
from .stepper import (ControllerConfig, PropagationError, propagate_adaptive,
                      propagate_dopri45_adaptive, propagate_fixed)

log = logging.getLogger(__name__)

DOPRI = "DoPri45"


@dataclass
class Model:
    basis: FockBasis
    params: HubbardParams
    gen: Generator

    def fresh_generator(self) -> Generator:
        """Same operators, private matvec counter."""
        return Generator(self.gen.h_stat, list(self.gen.drives))


def build_model(cfg: ExperimentConfig, width: Optional[float] = None) -> Model:
    m = cfg.model
    basis = enumerate_basis(m.n_sites, m.sector_tuple())
    pots = m.potentials()
    params = HubbardParams(m.n_sites, m.hopping_matrix(), m.interaction, pots)
    h_stat = assemble_static(params, basis)
    h_pot = assemble_potential(pots, basis)
    drive = DriveProfile(cfg.drive.t_switch, cfg.drive.width if width is None else width)
    return Model(basis, params, Generator.single(h_stat, h_pot, drive))


def initial_state(model: Model, cfg: ExperimentConfig, tol: float = 1e-12) -> GroundState:
    """Ground state of ``H(t_start)``."""
    gen = model.fresh_generator()
    t = cfg.run.t_start
    return ground_state(lambda v: gen.hermitian_apply(t, v), gen.dim, tol=tol, seed=cfg.run.seed)


def krylov_config(cfg: ExperimentConfig) -> KrylovConfig:
    return KrylovConfig(cfg.run.krylov_tol, cfg.run.krylov_m_max)


def controller(cfg: ExperimentConfig, tol: Optional[float] = None) -> ControllerConfig:
    return ControllerConfig(tol=cfg.run.tol if tol is None else tol, tau_max=cfg.run.tau_max)


def propagate(method: str, model: Model, psi0, cfg: ExperimentConfig, *, tol=None, n_steps=None,
              output_times=(), observer=None):
    """Run one propagation with a private matvec counter; returns ``(psi, trace)``."""
    gen = model.fresh_generator()
    r = cfg.run
    if method.lower() == DOPRI.lower():
        if n_steps:
            raise ValueError("DoPri45 runs are adaptive only")
        return propagate_dopri45_adaptive(gen, psi0, r.t_start, r.t_end, controller(cfg, tol),
                                          output_times, observer)
    scheme = resolve_scheme(method)
    if n_steps:
        return propagate_fixed(scheme, gen, psi0, r.t_start, r.t_end, n_steps,
                               krylov_config(cfg), output_times, observer)
    return propagate_adaptive(scheme, gen, psi0, r.t_start, r.t_end, controller(cfg, tol),
                              krylov_config(cfg), output_times, observer)


def _write_kv(path: Path, items: Dict[str, object]) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, float):
                v = format(v, ".17g")
            fh.write(f"{k} = {v}\n")


def read_kv(path) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


# -- simulate ----------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig, out_dir) -> dict:
    """Ground state, then propagation; writes ``trace.csv`` and ``summary.txt``.

    A propagation failure still flushes the partial trace before re-raising.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    model = build_model(cfg)
    gs = initial_state(model, cfg)
    times = cfg.run.output_times()
    method = cfg.run.scheme
    try:
        psi, trace = propagate(method, model, gs.vector, cfg,
                               n_steps=cfg.run.fixed_steps or None,
                               output_times=times, observer=occupation_observer(model.basis))
    except PropagationError as exc:
        exc.trace.to_csv(out / "trace.csv")
        raise
    trace.to_csv(out / "trace.csv")
    taus = trace.accepted_taus()
    summary = {
        "method": method,
        "mode": "fixed" if cfg.run.fixed_steps else "adaptive",
        "dimension": model.basis.dim,
        "ground_energy": gs.energy,
        "ground_residual": gs.residual,
        "final_norm": float(np.linalg.norm(psi)),
        "matvecs": trace.matvecs,
        "accepted_steps": len(trace.accepted),
        "rejected_steps": len(trace.rejected),
        "tau_min": float(taus.min()),
        "tau_max": float(taus.max()),
        "wall_time": time.perf_counter() - start,
    }
    _write_kv(out / "summary.txt", summary)
    return {"summary": summary, "trace": trace, "psi": psi, "ground": gs, "model": model}


# -- benchmark ---------------------------------------------------------------


BENCH_COLUMNS = ["method", "mode", "param", "matvecs", "error", "accepted", "rejected"]


def reference_state(model: Model, psi0, cfg: ExperimentConfig, scheme: Optional[str] = None,
                    tol: Optional[float] = None) -> np.ndarray:
    b = cfg.benchmark
    psi, _ = propagate(scheme or b.reference_scheme, model, psi0, cfg,
                       tol=b.reference_tol if tol is None else tol)
    return psi


def match_budget(method: str, model: Model, psi0, cfg: ExperimentConfig, budget: int,
                 rel: float = 0.1, n_lo: int = 1, n_hi: int = 1 << 20):
    """Equidistant run whose matvec count is within ``rel`` of ``budget``.

    Bisects on the step count (matvecs grow with it); returns
    ``(n_steps, psi, trace)`` or ``None`` if no count lands in the window.
    """
    lo, hi = n_lo, n_hi
    tried = set()
    while hi - lo > 1:
        n = int(round(math.sqrt(lo * hi)))
        n = min(max(n, lo + 1), hi - 1)
        if n in tried:
            break
        tried.add(n)
        try:
            psi, trace = propagate(method, model, psi0, cfg, n_steps=n)
        except PropagationError:
            lo = n  # steps too long for the Krylov space
            continue
        if abs(trace.matvecs - budget) <= rel * budget:
            return n, psi, trace
        if trace.matvecs < budget:
            lo = n
        else:
            hi = n
    return None


def run_benchmark(cfg: ExperimentConfig, out_dir=None) -> List[dict]:
    """Error against matvecs for adaptive and equidistant runs.

    The reference is an adaptive run at ``benchmark.reference_tol`` with
    ``benchmark.reference_scheme``; errors are ``||psi(t_end) - psi_ref||``.
    """
    model = build_model(cfg)
    psi0 = initial_state(model, cfg).vector
    ref = reference_state(model, psi0, cfg)
    b = cfg.benchmark
    rows = []
    for method in b.methods:
        for tol in b.tols:
            try:
                psi, tr = propagate(method, model, psi0, cfg, tol=tol)
                err = float(np.linalg.norm(psi - ref))
            except PropagationError as exc:
                tr, err = exc.trace, math.nan
            rows.append(dict(method=method, mode="adaptive", param=tol, matvecs=tr.matvecs,
                             error=err, accepted=len(tr.accepted), rejected=len(tr.rejected)))
        if method.lower() == DOPRI.lower():
            continue
        for n in b.n_steps:
            try:
                psi, tr = propagate(method, model, psi0, cfg, n_steps=n)
                err = float(np.linalg.norm(psi - ref))
            except PropagationError as exc:
                tr, err = exc.trace, math.nan
            rows.append(dict(method=method, mode="fixed", param=n, matvecs=tr.matvecs,
                             error=err, accepted=len(tr.accepted), rejected=len(tr.rejected)))
    order = {m: i for i, m in enumerate(sorted(b.methods))}
    rows.sort(key=lambda r: (order[r["method"]], r["mode"], -r["param"] if r["mode"] == "adaptive"
                             else r["param"]))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "benchmark.csv", BENCH_COLUMNS, rows)
    return rows


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in columns])


def read_rows(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- convergence -------------------------------------------------------------


ORDER_COLUMNS = ["study", "scheme", "width", "t_n", "tau", "n_steps", "error", "value"]


def local_order_study(model: Model, scheme_name: str, width: float, t_switch: float, offset: float,
                      taus: Sequence[float], psi0, kcfg: KrylovConfig):
    """Local errors at ``t_n = t_switch + offset * width`` and their fitted slope."""
    gen = model.fresh_generator()
    t_n = t_switch + offset * width
    scheme = resolve_scheme(scheme_name)
    errs = local_errors(scheme, gen, t_n, psi0, taus, kcfg)
    return t_n, errs, fit_slope(taus, errs)


def run_convergence(cfg: ExperimentConfig, out_dir=None) -> List[dict]:
    """Local orders, width scaling of the local error and global orders.

    - local: errors of one step from ``t_switch + local_offset * width`` for
      ``local_taus``, slope fitted in log-log (expect ``p + 1``);
    - t_scaling: error at ``tau = scaling_tau_ratio * min(scaling_widths)`` for
      each width at the same scaled offset; ratios between successive
      halvings (expect ``2**p``);
    - global: equidistant runs over ``global_window`` with drive time-scale
      ``global_width`` (expect slope ``-p``, reported as ``p``).

    The reference flow is a tight DOP853 solve.
    """
    c = cfg.convergence
    kcfg = KrylovConfig(min(cfg.run.krylov_tol, 1e-13), cfg.run.krylov_m_max)
    rows = []
    t_switch = cfg.drive.t_switch
    base = build_model(cfg)
    psi0 = initial_state(base, cfg).vector

    for name in c.schemes:
        t_n, errs, slope = local_order_study(base, name, cfg.drive.width, t_switch, c.local_offset,
                                             c.local_taus, psi0, kcfg)
        for tau, e in zip(c.local_taus, errs):
            rows.append(dict(study="local", scheme=name, width=cfg.drive.width, t_n=t_n, tau=tau,
                             n_steps=1, error=float(e), value=math.nan))
        rows.append(dict(study="local_slope", scheme=name, width=cfg.drive.width, t_n=t_n, tau=math.nan,
                         n_steps=0, error=math.nan, value=slope))

    tau_s = c.scaling_tau_ratio * min(c.scaling_widths)
    for name in c.schemes:
        scheme = resolve_scheme(name)
        prev = None
        for width in sorted(c.scaling_widths, reverse=True):
            model = build_model(cfg, width=width)
            gen = model.fresh_generator()
            t_n = t_switch + c.local_offset * width
            err = float(local_errors(scheme, gen, t_n, psi0, [tau_s], kcfg)[0])
            ratio = err / prev if prev else math.nan
            rows.append(dict(study="width_scaling", scheme=name, width=width, t_n=t_n, tau=tau_s, n_steps=1,
                             error=err, value=ratio))
            prev = err

    a, b = c.global_window
    gmodel = build_model(cfg, width=c.global_width)
    ref = reference_flow(gmodel.fresh_generator(), a, b, psi0)
    for name in c.schemes:
        scheme = resolve_scheme(name)
        errs = []
        for n in c.global_steps:
            psi, _ = propagate_fixed(scheme, gmodel.fresh_generator(), psi0, a, b, n, kcfg)
            errs.append(float(np.linalg.norm(psi - ref)))
            rows.append(dict(study="global", scheme=name, width=c.global_width, t_n=a, tau=(b - a) / n,
                             n_steps=n, error=errs[-1], value=math.nan))
        rows.append(dict(study="global_slope", scheme=name, width=c.global_width, t_n=a, tau=math.nan,
                         n_steps=0, error=math.nan, value=-fit_slope(c.global_steps, errs)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "orders.csv", ORDER_COLUMNS, rows)
    return rows


# -- ground state ------------------------------------------------------------


def run_ground_state(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Ground-state energy, residual, sector dimension and occupations."""
    model = build_model(cfg)
    gs = initial_state(model, cfg)
    occ = all_occupations(model.basis, gs.vector)
    report = {
        "dimension": model.basis.dim,
        "sector": "full" if model.basis.sector is None else "%d,%d" % model.basis.sector,
        "energy": gs.energy,
        "residual": gs.residual,
        "gap": gs.gap,
        "degenerate": gs.degenerate,
        "matvecs": gs.matvecs,
    }
    for i in range(model.basis.n_sites):
        report[f"n{i + 1}_up"] = float(occ[i, 0])
        report[f"n{i + 1}_dn"] = float(occ[i, 1])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_kv(out / "summary.txt", report)
    return report
