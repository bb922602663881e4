"""Critical couplings of the mean-field Potts model and the fixpoints of the
deterministic drift F, for a few q.

    python3 demos/thresholds_and_fixpoints.py
"""
import warnings

import numpy as np

from swpotts.analytic import ModelParams, classify_fixpoints, drift_f, thresholds

warnings.simplefilter("ignore", RuntimeWarning)

# %% the three thresholds grow with q and stay ordered
for q in (3, 4, 5, 10):
    t = thresholds(q)
    print(f"q={q:2d}  B_u={t.b_u:.6f}  B_o={t.b_o:.6f}  B_rc={t.b_rc:.1f}")

# %% across the regimes for q = 3 the uniform and majority fixpoints trade stability
q = 3
t = thresholds(q)
for B in (2.0, t.b_u, t.b_o, t.b_rc, 3.5):
    rep = classify_fixpoints(ModelParams(q, B))
    maj = rep.majority
    maj_s = "none" if maj is None else f"a={maj['a']:.4f} ({maj['class']}, F'={maj['jacobian']:.3f})"
    print(f"B={B:.4f} {rep.regime:12s} uniform: {rep.uniform['class']:15s} majority: {maj_s}")

# %% F(z) - z on a coarse grid: below zero means the heavy class shrinks
P = ModelParams(q, t.b_o)
zs = np.linspace(1 / t.b_o + 1e-3, 1.0, 9)
for z in zs:
    print(f"z={z:.3f}  F(z)-z={drift_f(z, P) - z:+.4f}")
