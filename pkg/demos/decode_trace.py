"""One full-size decode next to its state-evolution prediction.

Run: python demos/decode_trace.py [snr_db]

The decoder records, per iteration, the variances it believes its
estimates have. SE predicts the same sequence from the transfer curves
alone. The two should agree closely for a code this long.
"""

import sys

import numpy as np

from icsparc.clipping import regular_profile
from icsparc.code import derive_params, encode_message, random_message, section_error_rate, synthesize_codeword
from icsparc.numerics import rng_stream, slot_rows
from icsparc.oamp import decode
from icsparc.se import SEModel, phi_table

snr_db = float(sys.argv[1]) if len(sys.argv) > 1 else 2.5
p = derive_params(64, 2048, 0.5)
profile = regular_profile(-13, p.M)
sigma2 = 10 ** (-snr_db / 10)

sel = slot_rows(0, p.M, p.N)
msg = random_message(rng_stream(0, "message", 0), p)
y = synthesize_codeword(encode_message(msg, p), sel, profile)
y = y + np.sqrt(sigma2) * rng_stream(0, "noise", 0).standard_normal(p.M)

res = decode(y, sel, profile, p, sigma2)
print(f"{res.iterations} iterations, stopped by {res.termination}, "
      f"SER {section_error_rate(msg, res.message_hat):.2e}")

model = SEModel.build(profile.cr_db, p.delta, p.B, sigma2, phi=phi_table(p.B, n_sections=20_000),
                      n_samples=100_000)
se = model.fixed_point(profile.lam)

print("\niter   decoder v_x     SE v_x    ratio")
for t in range(min(len(se["v_x"]), res.iterations, 15)):
    d, s = res.trace[t, 2], se["v_x"][t]
    print(f"{t + 1:4d}  {d:10.4e}  {s:10.4e}  {d / s:6.3f}")
