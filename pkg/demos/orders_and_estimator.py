"""Local orders, width scaling and the defect estimator on a two-site chain.

A single step is taken from a point on the steep flank of the switch and
compared with a tight Runge-Kutta solve. Halving the step should shrink the
error by 2^(p+1); halving the switch width should grow it by 2^p once the
width is small enough; the defect estimate should track the true error.

    python demos/orders_and_estimator.py
"""

import numpy as np

from mottprop import experiments as ex
from mottprop.cfm import builtin_scheme, fit_slope, local_errors, reference_flow, step_with_estimate
from mottprop.config import ExperimentConfig, ModelConfig
from mottprop.krylov import KrylovConfig

cfg = ExperimentConfig(model=ModelConfig(n_sites=2))
kcfg = KrylovConfig(1e-13)
offset = cfg.convergence.local_offset
model = ex.build_model(cfg)
psi = ex.initial_state(model, cfg).vector
t_n = cfg.drive.t_switch + offset * cfg.drive.width
taus = 2.0 ** -np.arange(7, 11)

for name in ("CF2", "CF4"):
    scheme = builtin_scheme(name)
    gen = model.fresh_generator()
    print(f"\n{name} (order {scheme.order})")
    print("   tau        error      estimate   est/err")
    errs = []
    for tau in taus:
        res = step_with_estimate(scheme, gen, t_n, tau, psi, kcfg)
        err = np.linalg.norm(res.u_next - reference_flow(gen, t_n, t_n + tau, psi))
        errs.append(err)
        print(f"  2^{int(np.log2(tau)):3d}   {err:.3e}   {res.est:.3e}   {res.est / err:.4f}")
    print(f"  fitted slope {fit_slope(taus, errs):.3f}")

    print("  width      error at tau=2^-10   growth / 2^p")
    prev = None
    for width in 2.0 ** -np.arange(3, 8):
        wm = ex.build_model(cfg, width=width)
        e = local_errors(scheme, wm.fresh_generator(), cfg.drive.t_switch + offset * width, psi, [2.0**-10], kcfg)[0]
        ratio = "" if prev is None else f"{e / prev / 2**scheme.order:.3f}"
        print(f"  2^{int(np.log2(width)):3d}     {e:.3e}          {ratio}")
        prev = e
