"""Switch a six-site Hubbard chain and watch the charge move.

The chain starts in its ground state with the source and drain potentials
off. Around t = 10 they are ramped on within a few hundredths of a time unit,
and the adaptive fourth-order integrator has to resolve that ramp before it
can coast with large steps again.

    python demos/transistor_switch.py
"""

import numpy as np

from mottprop import experiments as ex
from mottprop.config import ExperimentConfig
from mottprop.hubbard import occupation_observer

cfg = ExperimentConfig()
model = ex.build_model(cfg)
ground = ex.initial_state(model, cfg)
print(f"sector dimension {model.basis.dim}, ground energy {ground.energy:.10f}, gap {ground.gap:.4f}")

psi, trace = ex.propagate("CF4", model, ground.vector, cfg, output_times=cfg.run.output_times(),
                          observer=occupation_observer(model.basis))

# Charge per site is the sum of both spin occupations.
charges = trace.sample_array().reshape(-1, model.basis.n_sites, 2).sum(axis=2)
print("\n   t   " + " ".join(f"  n{i + 1}  " for i in range(model.basis.n_sites)))
for s, row in zip(trace.samples, charges):
    if s.t in (0, 5, 9, 10, 11, 12, 15, 20, 30, 40, 50):
        print(f"{s.t:5.1f} " + " ".join(f"{q:6.3f}" for q in row))

# Where did the controller spend its effort?
taus = trace.accepted_taus()
t = np.array([e.t for e in trace.accepted])
print(f"\n{len(taus)} accepted and {len(trace.rejected)} rejected steps, {trace.matvecs} matvecs")
for lo, hi in [(0, 9.5), (9.5, 10.5), (10.5, 50)]:
    sel = (t >= lo) & (t < hi)
    print(f"  t in [{lo:4.1f}, {hi:4.1f}): {sel.sum():3d} steps, tau from {taus[sel].min():.4f} to {taus[sel].max():.4f}")
print(f"norm drift {abs(np.linalg.norm(psi) - 1):.1e}")
