"""Optimizing the threshold distribution for a fixed candidate set.

Run: python demos/optimize_profile.py

The candidates are the thresholds of the reported R = 0.5 profile. We
solve for the fractions that maximize the smallest tunnel gap at 1.6 dB
and compare with the reported fractions on the same SE tables.
"""

import numpy as np

from icsparc.code import derive_params
from icsparc.harness import TABLE1
from icsparc.optimizer import GapProblem, optimize_lambda
from icsparc.se import SEModel, default_grid, phi_table

p = derive_params(64, 2048, 0.5)
row = TABLE1[0.5]
lam_reported = np.asarray(row["lam"]) / sum(row["lam"])
sigma2 = 10 ** (-row["snr_db"] / 10)

model = SEModel.build(row["cr_db"], p.delta, p.B, sigma2, grid=default_grid(1e-5, 80),
                      phi=phi_table(p.B, n_sections=20_000), n_samples=100_000)
sol = optimize_lambda(GapProblem.from_model(model), tol=1e-7)

print(" CR (dB)   reported  optimized")
for c, a, b in zip(row["cr_db"], lam_reported, sol.lam):
    print(f"{c:8.0f}   {a:8.5f}  {b:9.5f}")
print(f"\nmin gap: reported {model.min_gap(lam_reported):+.3e}, optimized {sol.min_gap:+.3e}")
print(f"active grid points: {len(sol.active)}, bisection steps: {sol.bisection_steps}")

# a single threshold can never do better than the best mixture
best_single = max(model.min_gap(e) for e in np.eye(len(lam_reported)))
print(f"best single threshold: {best_single:+.3e}")
