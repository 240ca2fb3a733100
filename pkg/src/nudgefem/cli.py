"""Command-line entry points.

Exit codes: 0 success, 2 gate failure, 1 runtime error.
"""

import argparse
import os
import sys

from . import harness, timeloop, verify
from .errors import InvalidConfigError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE = 2


def _add_common(parser):
    parser.add_argument("--nu", type=float, default=1e-6)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--mu", type=float, default=0.0)
    parser.add_argument("--n", type=int, default=12, dest="n")
    parser.add_argument("--ratio-k", type=int, default=3)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--t-final", type=float, default=4.0)
    parser.add_argument("--interpolant", choices=("pc", "lagrange"), default="pc")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--config", default=None,
                        help="flat key=value file; CLI flags override")


def _load_config_file(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfigError(f"{path}: bad line {line!r}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


_CONFIG_KEYS = {
    "nu": float, "beta": float, "mu": float, "n": int, "ratio_k": int,
    "dt": float, "t_final": float, "interpolant": str, "out": str,
}


def _merge_config(args, argv):
    """Apply config-file values for flags not given explicitly on the CLI."""
    if args.config is None:
        return args
    file_vals = _load_config_file(args.config)
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, raw in file_vals.items():
        attr = key.replace("-", "_")
        if attr not in _CONFIG_KEYS:
            raise InvalidConfigError(f"unknown config key {key!r}")
        if attr not in given:
            setattr(args, attr, _CONFIG_KEYS[attr](raw))
    return args


def _sim_config(args) -> timeloop.SimulationConfig:
    return timeloop.SimulationConfig(
        nu=args.nu, beta=args.beta, mu=args.mu, N=args.n, k=args.ratio_k,
        T=args.t_final, dt=args.dt, interpolant=args.interpolant)


def cmd_verify(args) -> int:
    results = verify.run_property_suite()
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_GATE


def cmd_run(args) -> int:
    series = harness.run_series(_sim_config(args))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "run.csv")
    harness.emit_decay_csv(series, path)
    final = series.samples[-1]
    print(f"wrote {path}")
    print(f"final t={final.t:g} l2_error={final.l2_error:.6e} "
          f"obs_ratio={final.obs_ratio:.4f}")
    return EXIT_OK


def cmd_decay(args) -> int:
    betas = [float(b) for b in args.betas.split(",")]
    base = _sim_config(args)
    os.makedirs(args.out, exist_ok=True)
    results = harness.run_decay_study(base, betas, out_dir=args.out)
    status = EXIT_OK
    for beta, res in results.items():
        if isinstance(res, Exception):
            print(f"beta={beta:g}: FAILED ({res})")
            status = EXIT_ERROR
        else:
            print(f"beta={beta:g}: final error "
                  f"{res.samples[-1].l2_error:.6e}")
    return status


def _check_slope_gate(slope, lo, hi) -> int:
    if lo is not None and slope < lo:
        print(f"GATE FAIL: slope {slope:.3f} < {lo}")
        return EXIT_GATE
    if hi is not None and slope > hi:
        print(f"GATE FAIL: slope {slope:.3f} > {hi}")
        return EXIT_GATE
    return EXIT_OK


def cmd_convergence(args) -> int:
    n_list = [int(v) for v in args.n_list.split(",")]
    report = harness.run_convergence(args.nu, args.mu, n_list, args.ratio_k,
                                     args.beta, interpolant=args.interpolant,
                                     T=args.t_final)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "convergence.csv")
    harness.emit_convergence_csv(report, path)
    print(f"wrote {path}; slope={report.slope:.3f}")
    return _check_slope_gate(report.slope, args.gate_slope_min,
                             args.gate_slope_max)


def cmd_lagrange(args) -> int:
    n_list = [int(v) for v in args.n_list.split(",")]
    report = harness.run_lagrange_study(args.nu, args.mu, args.beta, args.mode,
                                        N_list=n_list, T=args.t_final)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"lagrange_{args.mode}.csv")
    harness.emit_convergence_csv(report, path)
    print(f"wrote {path}; slope={report.slope:.3f}")
    return _check_slope_gate(report.slope, args.gate_slope_min,
                             args.gate_slope_max)


def cmd_gamma(args) -> int:
    H = args.ratio_k / args.n
    pred = harness.predict_gamma(args.nu, H, args.beta, args.c_i)
    print(f"H={H:g} coarse branch={pred.coarse_branch:.6g} "
          f"beta branch={pred.beta_branch:.6g} gamma={pred.gamma:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nudgefem")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the fast property suite")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("run", help="single simulation, errors to CSV")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("decay", help="error-vs-time study over betas")
    _add_common(p)
    p.add_argument("--betas", default="0,0.1,1,10,100")
    p.set_defaults(fn=cmd_decay)

    p = sub.add_parser("convergence", help="error-vs-h study")
    _add_common(p)
    p.add_argument("--n-list", default="9,18,36")
    p.add_argument("--gate-slope-min", type=float, default=None)
    p.add_argument("--gate-slope-max", type=float, default=None)
    p.set_defaults(fn=cmd_convergence)

    p = sub.add_parser("lagrange", help="Lagrange-observation H/h study")
    _add_common(p)
    p.add_argument("--mode", choices=("H3h", "Hfixed"), default="H3h")
    p.add_argument("--n-list", default="12,24,48")
    p.add_argument("--gate-slope-min", type=float, default=None)
    p.add_argument("--gate-slope-max", type=float, default=None)
    p.set_defaults(fn=cmd_lagrange)

    p = sub.add_parser("gamma", help="predicted decay rate")
    _add_common(p)
    p.add_argument("--c-i", type=float, default=1.0,
                   help="assumed approximation constant")
    p.set_defaults(fn=cmd_gamma)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None) is not None:
            args = _merge_config(args, argv)
        return args.fn(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
