"""Transfer charts for the regular and irregular profiles at R = 0.5.

Run: python demos/transfer_chart.py [snr_db]

The de-clipper curve maps the prior variance v_z of the clipped-domain
estimate to the extrinsic variance v_x it hands to the demodulator. The
second curve is the demodulator's map read backwards. Decoding succeeds
when the first stays below the second on the whole grid, i.e. the tunnel
between them is open.
"""

import sys

import numpy as np

from icsparc.code import derive_params
from icsparc.harness import TABLE1, table1_profile
from icsparc.se import SEModel, default_grid, phi_table

snr_db = float(sys.argv[1]) if len(sys.argv) > 1 else 1.6
p = derive_params(64, 2048, 0.5)
sigma2 = 10 ** (-snr_db / 10)
grid = default_grid(1e-5, 60)

# the demodulator table only depends on B, so build it once
phi = phi_table(p.B, n_sections=20_000)

profiles = {"regular -13 dB": ([-13.0], [1.0]),
            "irregular (reported)": (TABLE1[0.5]["cr_db"], table1_profile(0.5, p.M).lam)}

for name, (cr, lam) in profiles.items():
    m = SEModel.build(cr, p.delta, p.B, sigma2, grid=grid, phi=phi, n_samples=50_000)
    rep = m.analyze(lam)
    print(f"{name:>20}: tunnel {'open' if rep.open else 'closed'}, min gap {rep.min_gap:+.3e} "
          f"at v_z = {rep.argmin_v:.2e}, predicted SER {rep.predicted_ser:.2e}")

# a few rows of the chart for the irregular profile
m = SEModel.build(profiles["irregular (reported)"][0], p.delta, p.B, sigma2, grid=grid, phi=phi, n_samples=50_000)
lam = profiles["irregular (reported)"][1]
print("\n      v_z    declip v_x    demod bound")
for vz, a, b in list(zip(m.grid, m.declip_curve(lam), m.demod_bound()))[::6]:
    print(f"{vz:9.2e}  {a:12.4e}  {b:12.4e}")

# the smallest SNR that opens each tunnel, to 0.05 dB
from icsparc.se import opening_snr

for name, (cr, lam) in profiles.items():
    s = opening_snr(cr, lam, p.delta, p.B, 0.6, 3.0, tol=0.05, grid=grid, phi=phi, n_samples=50_000)
    print(f"{name:>20}: opens at {s:.2f} dB")
