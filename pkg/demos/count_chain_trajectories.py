"""The count-level Swendsen-Wang chain from an all-one-color start: below B_u it
falls to the uniform phase, above B_rc it settles on the majority phase, and in
between it depends on n and the start.

    python3 demos/count_chain_trajectories.py
"""
import numpy as np

from swpotts.analytic import ModelParams, majority_fixpoint, threshold_bu
from swpotts.dynamics import heavy_light_profile, sw_step_counts

q, n = 3, 10 ** 5
rng = np.random.default_rng(2024)

for B in (2.0, threshold_bu(q), 2.9, 3.5):
    P = ModelParams(q, B, n)
    c = np.array([n, 0, 0])
    path = [c.max() / n]
    for _ in range(200):
        c = sw_step_counts(c, P, rng)
        path.append(c.max() / n)
    a = majority_fixpoint(P)
    target = "none" if a is None else f"{a:.4f}"
    print(f"B={B:.3f}  S/n after 1,5,20,200 steps: "
          + " ".join(f"{path[t]:.4f}" for t in (1, 5, 20, 200))
          + f"   majority fixpoint {target}   tags {heavy_light_profile(c, P)}")
