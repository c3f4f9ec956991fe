"""Acceptance criteria AC-1 .. AC-8.

Each test prints one ``AC-n PASS|FAIL`` line to the terminal and then
asserts. AC-3 is a long run and only executes with ICSPARC_SLOW=1.
Tolerances are the stated ones; a failing criterion is reported, not relaxed.
"""

import os

import numpy as np
import pytest

from icsparc import cli
from icsparc.clipping import regular_profile, unclipped_profile
from icsparc.code import derive_params, encode_message, random_message, synthesize_codeword
from icsparc.denoisers import declip_moments, demod_moments
from icsparc.harness import TABLE1, SimConfig, run_ser_point, table1_profile
from icsparc.numerics import dct_forward, dct_matrix, rng_stream, slot_rows
from icsparc.oamp import DecodeOptions, decode
from icsparc.optimizer import GapProblem, optimize_lambda
from icsparc.se import SEModel, default_grid, opening_snr, phi_table

from oracles import dct_explicit, declip_grid, declip_quad, demod_enum

SLOW = os.environ.get("ICSPARC_SLOW") == "1"
R05 = derive_params(64, 2048, 0.5)

# SE settings for the threshold criteria: grid down to 1e-5, 200k samples per point
SE_GRID = default_grid(1e-5)
SE_SAMPLES = 200_000


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


@pytest.fixture(scope="module")
def phi64():
    return phi_table(64, n_sections=50_000)


def irregular_r05():
    prof = table1_profile(0.5, R05.M)
    return list(prof.cr_db), prof.lam


def test_ac1_se_thresholds(report, phi64):
    kw = dict(grid=SE_GRID, n_samples=SE_SAMPLES, phi=phi64)
    reg = opening_snr([-13.0], [1.0], R05.delta, R05.B, 1.0, 3.0, tol=0.02, **kw)
    cr, lam = irregular_r05()
    irr = opening_snr(cr, lam, R05.delta, R05.B, 0.6, 2.0, tol=0.02, **kw)
    ok = 1.5 <= reg <= 2.5 and 0.8 <= irr <= 1.6 and reg - irr >= 0.4
    report("AC-1", ok, f"regular opens at {reg:.3f} dB, irregular at {irr:.3f} dB, gain {reg - irr:.3f} dB")


def _ser(profile, snr, max_trials, p=R05, max_iters=120):
    sel = slot_rows(0, p.M, p.N)
    return run_ser_point(p, sel, profile, snr, max_trials=max_trials, target_section_errors=50,
                         opts=DecodeOptions(max_iters=max_iters), threads=1)


def test_ac2_full_scale_ser_ordering(report):
    snr = 2.0
    none = _ser(unclipped_profile(R05.M), snr, 50)
    reg = _ser(regular_profile(-13, R05.M), snr, 400)
    irr = _ser(table1_profile(0.5, R05.M), snr, 400)
    ok = irr.ser < reg.ser < none.ser and reg.ser <= 1e-3 and none.ser >= 1e-1
    report("AC-2", ok, f"at {snr} dB SER irregular {irr.ser:.2e} ({irr.errors}/{irr.sections}), "
                       f"regular {reg.ser:.2e} ({reg.errors}/{reg.sections}), "
                       f"non-clipped {none.ser:.2e} ({none.errors}/{none.sections})")


def _crossing(points, target=1e-4):
    """SNR where log SER crosses ``target``, interpolated between bracketing points."""
    s = np.array([pt.snr_db for pt in points])
    y = np.log10([max(pt.ser, 1e-9) for pt in points])
    i = int(np.nonzero(y < np.log10(target))[0][0])
    return float(np.interp(np.log10(target), [y[i], y[i - 1]], [s[i], s[i - 1]]))


def _waterfall(profile, start, step=0.1, target=1e-4):
    pts, snr = [], start
    while True:
        pts.append(_ser(profile, snr, 2000))
        if pts[-1].ser < target and len(pts) >= 3:
            return pts[-3:]
        snr = round(snr + step, 3)


@pytest.mark.slow
@pytest.mark.skipif(not SLOW, reason="long run; set ICSPARC_SLOW=1")
def test_ac3_headline_gain(report):
    reg = _waterfall(regular_profile(-13, R05.M), 1.7)
    irr = _waterfall(table1_profile(0.5, R05.M), 1.3)
    gap = _crossing(reg) - _crossing(irr)
    detail = ", ".join(f"{pt.snr_db:g}:{pt.ser:.1e}" for pt in reg + irr)
    report("AC-3", abs(gap - 0.4) <= 0.2, f"gain at SER 1e-4 is {gap:.3f} dB ({detail})")


def test_ac4_multi_rate_waterfall(report):
    lines, ok = [], True
    for R in (0.2, 1.0):
        p = derive_params(64, 2048, R)
        prof = table1_profile(R, p.M)
        s0 = TABLE1[R]["snr_db"]
        good = _ser(prof, s0 + 0.3, 40, p=p, max_iters=100)
        bad = _ser(prof, s0 - 1.0, 4, p=p, max_iters=100)
        ok &= good.ser <= 1e-3 and bad.ser >= 1e-1
        lines.append(f"R={R} M={p.M}: SER {good.ser:.1e} at {s0 + 0.3:.1f} dB, {bad.ser:.1e} at {s0 - 1:.1f} dB")
    report("AC-4", ok, "; ".join(lines))


def test_ac5_oracle_equivalence(report):
    worst = dict(declip=0.0, demod=0.0, dct=0.0)
    for y, zp, v, eps, alpha, s2 in declip_grid(500, seed=5):
        m_ref, v_ref = declip_quad(y, zp, v, eps, alpha, s2)
        m, var = declip_moments(np.array([y]), np.array([zp]), v, eps, alpha, s2)
        worst["declip"] = max(worst["declip"], abs(m[0] - m_ref), abs(var[0] - v_ref))
    rng = np.random.default_rng(5)
    for B in (2, 4, 8):
        for _ in range(200):
            v = 10 ** rng.uniform(-2, 1)
            x = rng.normal(size=B) * np.sqrt(v)
            x[rng.integers(B)] += np.sqrt(B)
            _, m_ref, var_ref = demod_enum(x, v, B)
            m, sec = demod_moments(x, v, B)
            worst["demod"] = max(worst["demod"], np.max(np.abs(m - m_ref)), abs(sec[0] - var_ref))
    for n in (8, 16):
        for _ in range(20):
            x = rng.normal(size=n)
            worst["dct"] = max(worst["dct"], np.max(np.abs(dct_forward(x) - dct_explicit(x))),
                               np.max(np.abs(dct_forward(x) - dct_matrix(n) @ x)))
    ok = worst["declip"] <= 1e-8 and worst["demod"] <= 1e-10 and worst["dct"] <= 1e-12
    report("AC-5", ok, ", ".join(f"{k} max err {e:.1e}" for k, e in worst.items()))


def test_ac6_se_decoder_consistency(report, phi64):
    prof = regular_profile(-13, R05.M)
    s2 = 10 ** -0.25
    se = SEModel.build(prof.cr_db, R05.delta, R05.B, s2, phi=phi64, n_samples=SE_SAMPLES).fixed_point(prof.lam)
    sel = slot_rows(0, R05.M, R05.N)
    msg = random_message(rng_stream(0, "message", 0), R05)
    y = synthesize_codeword(encode_message(msg, R05), sel, prof)
    y = y + np.sqrt(s2) * rng_stream(0, "noise", 0).standard_normal(R05.M)
    res = decode(y, sel, prof, R05, s2)
    n = min(10, res.iterations, len(se["v_x"]))
    ratio = res.trace[:n, 2] / se["v_x"][:n]
    ok = n == 10 and np.all(np.abs(ratio - 1) <= 0.2)
    report("AC-6", ok, f"{n} iterations compared, decoder/SE v_x ratio in [{ratio.min():.3f}, {ratio.max():.3f}]")


def test_ac7_optimizer(report, phi64):
    notes, ok = [], True
    # reported R = 0.5 thresholds at 1.6 dB, against the reported fractions
    cr, lam_reported = irregular_r05()
    model = SEModel.build(cr, R05.delta, R05.B, 10 ** -0.16, grid=SE_GRID, phi=phi64, n_samples=SE_SAMPLES)
    prob = GapProblem.from_model(model)
    sol = optimize_lambda(prob, tol=1e-8)
    gaps = model.gaps(lam_reported)
    i = int(np.argmin(gaps))
    floor = gaps[i] - 3 * model.gap_stderr(lam_reported)[i]
    ok &= sol.min_gap >= floor
    notes.append(f"reported set: min gap {sol.min_gap:.3e} vs reported {gaps[i]:.3e} (floor {floor:.3e})")
    # optimum beats random simplex points
    rng = np.random.default_rng(7)
    best_random = max(prob.min_gap(l) for l in rng.dirichlet(np.ones(prob.K), 1000))
    ok &= sol.min_gap >= best_random - 1e-8
    notes.append(f"best of 1000 random {best_random:.3e}")
    # K = 1
    one = optimize_lambda(GapProblem.from_model(SEModel.build([-13], R05.delta, R05.B, 10 ** -0.16, grid=SE_GRID,
                                                              phi=phi64, n_samples=20_000)))
    ok &= np.array_equal(one.lam, [1.0])
    # concavity of the min gap on 100 random pairs
    worst = np.inf
    for l1, l2 in rng.dirichlet(np.ones(prob.K), (100, 2)):
        g1, g2, gm = prob.min_gap(l1), prob.min_gap(l2), prob.min_gap((l1 + l2) / 2)
        worst = min(worst, gm - 0.5 * (g1 + g2))
    ok &= worst >= -1e-12
    notes.append(f"K=1 lambda {one.lam.tolist()}, worst midpoint excess {worst:.1e}")
    report("AC-7", ok, "; ".join(notes))


def test_ac8_cli_determinism(report, tmp_path, capsys):
    cfg = SimConfig(B=16, L=64, R=0.5, profile={"kind": "regular", "cr_db": -13}, snr_db=[2.0, 3.0],
                    max_trials=24, target_section_errors=10, seed=4)
    (tmp_path / "cfg.json").write_text(cfg.to_json())
    small = ["--B", "16", "--L", "64", "--samples", "2000", "--sections", "2000", "--points", "20"]
    commands = {
        "simulate": ["simulate", "--config", str(tmp_path / "cfg.json")],
        "se-chart": ["se-chart", "--snr", "2", *small],
        "optimize": ["optimize", "--snr", "3", "--candidates=-300 -13 -4", *small],
        "decode-demo": ["decode-demo", "--B", "16", "--L", "64", "--snr", "4", "--table1"],
    }
    bad = []
    for name, argv in commands.items():
        outs = []
        for i, threads in enumerate(("1", "8", "1")):
            out = tmp_path / f"{name}{i}.out"
            code = cli.main([*argv, "--seed", "11", "--threads", threads, "--out", str(out)])
            capsys.readouterr()
            mirror = out.with_suffix(".json")
            outs.append((code, out.read_bytes(), mirror.read_bytes() if mirror.exists() else b""))
        if not outs[0] == outs[1] == outs[2] or outs[0][0] != 0:
            bad.append(name)
    report("AC-8", not bad, f"byte-identical at 1 and 8 threads: {', '.join(commands)}"
                            + (f"; differs: {bad}" if bad else ""))
