"""Command line entry point: ``python -m icsparc <command> ...``.

Exit status 0 on success, 2 on configuration errors, 3 when an optimization
cannot open the tunnel with the given candidates.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .clipping import build_profile, regular_profile, unclipped_profile
from .code import derive_params, encode_message, random_message, section_errors, synthesize_codeword
from .harness import (CANDIDATE_CR_PRESET, TABLE1, ConfigError, SimConfig, default_threads,
                      run_ser_sweep, table1_profile, write_outputs)
from .numerics import rng_stream, slot_rows
from .oamp import DecodeOptions, decode
from .optimizer import optimize_profile
from .se import DEFAULT_SAMPLES, DEFAULT_SECTIONS, SEModel, chart_csv, default_grid

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def _floats(text):
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as f:
            f.write(text)


def _code_args(ap):
    ap.add_argument("--B", type=int, default=64)
    ap.add_argument("--L", type=int, default=2048)
    ap.add_argument("--R", type=float, default=0.5)


def _profile_args(ap):
    g = ap.add_mutually_exclusive_group()
    g.add_argument("--cr", type=_floats, help="regular CR (one value) or irregular CR list, dB")
    g.add_argument("--profile", help="JSON file {\"cr_db\": [...], \"lambda\": [...]}")
    g.add_argument("--table1", action="store_true", help="reported optimized profile for --R")
    g.add_argument("--no-clip", action="store_true")
    ap.add_argument("--lam", type=_floats, help="fractions for an irregular --cr list")


def _profile_from_args(args, M):
    if args.no_clip:
        return unclipped_profile(M)
    if args.table1:
        if args.R not in TABLE1:
            raise ConfigError(f"no reported profile for rate {args.R}")
        return table1_profile(args.R, M)
    if args.profile:
        try:
            with open(args.profile) as f:
                d = json.load(f)
            return build_profile(d["cr_db"], d["lambda"], M)
        except (OSError, KeyError, json.JSONDecodeError) as e:
            raise ConfigError(f"bad profile file {args.profile}: {e}") from None
    cr = args.cr or [-13.0]
    if args.lam is None:
        if len(cr) != 1:
            raise ConfigError("--lam is required with several --cr values")
        return regular_profile(cr[0], M)
    return build_profile(cr, args.lam, M)


def cmd_simulate(args) -> int:
    cfg = SimConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    res = run_ser_sweep(cfg, threads=args.threads)
    out = args.out or cfg.output
    if out:
        write_outputs(res, out)
    else:
        sys.stdout.write(res.csv())
    return EXIT_OK


def cmd_se_chart(args) -> int:
    p = derive_params(args.B, args.L, args.R)
    profile = _profile_from_args(args, p.M)
    grid = default_grid(args.v_min, args.points)
    model = SEModel.build(profile.cr_db, p.delta, p.B, 10.0 ** (-args.snr / 10.0), grid=grid,
                          n_samples=args.samples, n_sections=args.sections, seed=args.seed or 0)
    _emit(chart_csv(model, profile.lam), args.out)
    rep = model.analyze(profile.lam)
    print(f"tunnel {'open' if rep.open else 'closed'}: min gap {rep.min_gap:.4g} at v={rep.argmin_v:.3g}",
          file=sys.stderr)
    return EXIT_OK


def cmd_optimize(args) -> int:
    p = derive_params(args.B, args.L, args.R)
    cands = args.candidates if args.candidates else CANDIDATE_CR_PRESET
    sols, infeasible = [], False
    for snr in args.snr:
        sol, _ = optimize_profile(cands, p.delta, p.B, 10.0 ** (-snr / 10.0), tol=args.tol,
                                  grid=default_grid(args.v_min, args.points), n_samples=args.samples,
                                  n_sections=args.sections, seed=args.seed or 0)
        d = sol.to_dict(cands, snr)
        d["feasible"] = sol.feasible
        sols.append(d)
        infeasible |= not sol.feasible
    _emit(json.dumps(sols if len(sols) > 1 else sols[0], indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def _read_message(path, p):
    try:
        with open(path) as f:
            text = f.read()
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            msg = text.split()
        msg = np.asarray(msg, dtype=int)
        encode_message(msg, p)
    except (OSError, ValueError) as e:
        raise ConfigError(f"bad message file {path}: {e}") from None
    return msg


def cmd_decode_demo(args) -> int:
    p = derive_params(args.B, args.L, args.R)
    profile = _profile_from_args(args, p.M)
    seed = args.seed or 0
    sel = slot_rows(seed, p.M, p.N)
    msg = _read_message(args.message, p) if args.message else random_message(rng_stream(seed, "message", 0), p)
    sigma2 = 10.0 ** (-args.snr / 10.0)
    c = synthesize_codeword(encode_message(msg, p), sel, profile)
    y = c + np.sqrt(sigma2) * rng_stream(seed, "noise", 0).standard_normal(p.M)
    res = decode(y, sel, profile, p, sigma2, DecodeOptions(max_iters=args.max_iters))
    out = dict(snr_db=args.snr, seed=seed, profile=profile.to_dict(), iterations=res.iterations,
               termination=res.termination, section_errors=section_errors(msg, res.message_hat),
               trace=[dict(zip(("v_z_pri", "v_z_post", "v_x_pri", "v_x_post"), map(float, r))) for r in res.trace])
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=default_threads())
    common.add_argument("--out", default=None, help="output file (default: standard output)")

    ap = argparse.ArgumentParser(prog="icsparc", description="Irregularly clipped sparse regression codes.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="SER sweep from a JSON config")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=cmd_simulate)

    for name, fn, hlp in (("se-chart", cmd_se_chart, "transfer-chart CSV for one profile and SNR"),
                          ("optimize", cmd_optimize, "optimize the threshold distribution")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        _code_args(s)
        s.add_argument("--v-min", type=float, default=1e-6)
        s.add_argument("--points", type=int, default=100)
        s.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Monte Carlo samples per grid point")
        s.add_argument("--sections", type=int, default=DEFAULT_SECTIONS, help="sections for the demodulator table")
        s.set_defaults(fn=fn)
        if name == "se-chart":
            s.add_argument("--snr", type=float, required=True)
            _profile_args(s)
        else:
            s.add_argument("--snr", type=_floats, required=True, help="one or more SNRs, dB")
            s.add_argument("--candidates", type=_floats, help="candidate CRs, dB (default: preset)")
            s.add_argument("--tol", type=float, default=1e-6)

    s = sub.add_parser("decode-demo", parents=[common], help="one seeded encode/decode with its trace")
    _code_args(s)
    _profile_args(s)
    s.add_argument("--snr", type=float, required=True)
    s.add_argument("--max-iters", type=int, default=120)
    s.add_argument("--message", help="file with L positions (JSON list or whitespace separated)")
    s.set_defaults(fn=cmd_decode_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"icsparc: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
