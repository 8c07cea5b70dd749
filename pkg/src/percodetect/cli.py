"""Command-line frontend.

Commands run in-process by default; pass --server URL to route the same
request through a running service instance instead (the output is identical
either way).  Every data output embeds or sits next to the serialized run
configuration, and reruns with the same configuration are byte-identical —
randomness flows exclusively from --seed.

Exit codes: 0 retained, 1 signal detected, 2 bad arguments, 3 I/O failure,
4 unreadable or non-square image.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, _workflows, mctest, pgm
from .lattice import build_lattice
from .noise import NoiseModel, gaussian_model
from .pgm import PgmError

EXIT_RETAIN = 0
EXIT_DETECT = 1
EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_BAD_IMAGE = 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percodetect",
        description="Cluster-based detection of unknown shapes in noisy grayscale images.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, trials_default: int = 20000) -> None:
        p.add_argument("--trials", type=int, default=trials_default, help="Monte Carlo trials")
        p.add_argument("--seed", type=int, default=1, help="master seed; sole source of randomness")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (result-invariant)")
        p.add_argument("--server", default=None, help="route through a service at this base URL")

    cal = sub.add_parser("calibrate", help="critical-value table for a (p_E, alpha) grid")
    cal.add_argument("--n", type=int, required=True, help="lattice side N")
    cal.add_argument("--pe", type=_float_list, required=True, help="noise densities, e.g. 0.1,0.2")
    cal.add_argument("--alpha", type=_float_list, default=[0.05], help="test levels")
    cal.add_argument("--out", default=None, help="CSV path (default: stdout)")
    cal.add_argument("--format", choices=("csv", "json"), default="csv")
    common(cal, trials_default=200000)

    det = sub.add_parser("detect", help="run the test on a PGM image")
    det.add_argument("image", help="PGM file (P2 or P5), square")
    det.add_argument("--tau", type=float, default=0.5, help="threshold on the [0,1] gray scale")
    det.add_argument("--pe", type=_float_list, default=[0.5], help="calibration noise density")
    det.add_argument("--alpha", type=_float_list, default=[0.05], help="test level")
    det.add_argument("--scan", type=_float_list, default=None,
                     help="decreasing threshold schedule; overrides --tau")
    det.add_argument("--tau0", type=float, default=0.0, help="scan floor: stop when tau < tau0")
    det.add_argument("--noise", default="gaussian",
                     help="noise family name or JSON descriptor path (scan calibration)")
    det.add_argument("--p-value", action="store_true", dest="p_value",
                     help="attach the calibrated p-value (disables early stop)")
    det.add_argument("--out", default=None, help="also write the JSON report here")
    det.add_argument("--format", choices=("json",), default="json")
    common(det)

    pow_ = sub.add_parser("power", help="type II error matrix over (p_B, p_E)")
    pow_.add_argument("--n", type=int, required=True)
    pow_.add_argument("--pb", type=_float_list, required=True, help="signal densities (rows)")
    pow_.add_argument("--pe", type=_float_list, required=True, help="noise densities (columns)")
    pow_.add_argument("--alpha", type=_float_list, default=[0.05])
    pow_.add_argument("--out", default=None)
    pow_.add_argument("--format", choices=("csv", "json"), default="csv")
    common(pow_, trials_default=200000)

    dist = sub.add_parser("dist", help="survival-function dumps and quantile summary")
    dist.add_argument("--n", type=int, required=True)
    dist.add_argument("--pe", type=_float_list, default=None,
                      help=f"densities (default {len(_workflows.DIST_DEFAULT_P)} values 0.1..0.9)")
    dist.add_argument("--out", default=".", help="output directory")
    dist.add_argument("--format", choices=("csv",), default="csv")
    common(dist)

    ben = sub.add_parser("bench", help="detection wall-clock scaling over lattice sides")
    ben.add_argument("--n", type=_int_list, default=[128, 256, 512, 1024])
    ben.add_argument("--reps", type=int, default=3)
    ben.add_argument("--seed", type=int, default=1)
    ben.add_argument("--out", default=None)
    ben.add_argument("--format", choices=("json",), default="json")

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    return parser


def _run_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "server"}
    return cfg


def _write_text(path: str | None, text: str, config: dict) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    out = Path(path)
    out.write_text(text)
    Path(f"{out}.config.json").write_text(json.dumps(config, sort_keys=True) + "\n")


def _load_noise(spec: str) -> NoiseModel:
    if spec == "gaussian":
        return gaussian_model()
    p = Path(spec)
    if p.exists():
        return NoiseModel.from_json(p.read_text())
    return NoiseModel(family=spec)


def _post(server: str, endpoint: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(f"{server.rstrip('/')}{endpoint}", json=payload, timeout=600.0)
    resp.raise_for_status()
    return resp.json()


# --------------------------------------------------------------------------- commands


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.server:
        data = _post(args.server, "/calibrate", {
            "n": args.n, "p_e": args.pe, "alpha": args.alpha,
            "trials": args.trials, "seed": args.seed, "jobs": args.jobs,
        })
        csv, rows = data["csv"], data["rows"]
    else:
        table = _workflows.calibration_table(
            args.n, args.pe, args.alpha, args.trials, args.seed, jobs=args.jobs
        )
        csv, rows = table.to_csv(), table.rows
    cfg = _run_config(args)
    if args.format == "json":
        _write_text(args.out, json.dumps({"rows": rows, "config": cfg}, sort_keys=True) + "\n", cfg)
    else:
        _write_text(args.out, csv, cfg)
    return EXIT_RETAIN


def cmd_detect(args: argparse.Namespace) -> int:
    try:
        arr, maxval = pgm.read(args.image)
        fld = _workflows.field_from_image(arr, maxval)
    except (PgmError, ValueError, OSError) as exc:
        print(f"bad image: {exc}", file=sys.stderr)
        return EXIT_BAD_IMAGE
    alpha = args.alpha[0]
    pe = args.pe[0]
    cfg = _run_config(args)

    if args.scan is not None:
        if args.server:
            data = _post(args.server, "/scan", {
                "side": fld.side, "values": fld.values.tolist(),
                "schedule": args.scan, "tau0": args.tau0, "alpha": alpha,
                "trials": args.trials, "seed": args.seed, "jobs": args.jobs,
            })
            rejected = data["stopped"] == "reject"
            payload = dict(data)
        else:
            report = mctest.threshold_scan(
                fld, args.scan, args.tau0, alpha, args.trials, args.seed,
                noise=_load_noise(args.noise), jobs=args.jobs,
            )
            rejected = report.rejected
            payload = json.loads(report.to_json())
        payload["config"] = cfg
        text = json.dumps(payload, sort_keys=True) + "\n"
        sys.stdout.write(text)
        if args.out:
            _write_text(args.out, text, cfg)
        return EXIT_DETECT if rejected else EXIT_RETAIN

    if args.server:
        data = _post(args.server, "/detect", {
            "side": fld.side, "values": fld.values.tolist(), "tau": args.tau,
            "p_e": pe, "alpha": alpha, "trials": args.trials,
            "seed": args.seed, "jobs": args.jobs, "with_p_value": args.p_value,
        })
        rejected = data["decision"] == "reject-H0"
        payload = dict(data)
    else:
        lattice = build_lattice(fld.side)
        c0, _row = mctest.calibrate(fld.side, pe, alpha, args.trials, args.seed, args.jobs)
        dist = None
        if args.p_value:
            micro = mctest.load_or_sweep(fld.side, args.trials, args.seed, jobs=args.jobs)
            dist = micro.canonical(pe)
        report = mctest.run_test(fld, args.tau, c0, lattice, dist=dist)
        rejected = report.rejected
        payload = json.loads(report.to_json())
        payload["pE"] = pe
    payload["config"] = cfg
    text = json.dumps(payload, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text, cfg)
    return EXIT_DETECT if rejected else EXIT_RETAIN


def cmd_power(args: argparse.Namespace) -> int:
    alpha = args.alpha[0]
    if args.server:
        data = _post(args.server, "/power", {
            "n": args.n, "p_b": args.pb, "p_e": args.pe, "alpha": alpha,
            "trials": args.trials, "seed": args.seed, "jobs": args.jobs,
        })
        csv, matrix, c0s = data["csv"], data["beta"], data["c0"]
    else:
        matrix, c0s = _workflows.power_matrix(
            args.n, args.pb, args.pe, alpha, args.trials, args.seed, jobs=args.jobs
        )
        csv = _workflows.power_csv(args.pb, args.pe, matrix, args.trials)
    cfg = _run_config(args)
    if args.format == "json":
        payload = {"c0": list(c0s), "beta": matrix, "config": cfg}
        _write_text(args.out, json.dumps(payload, sort_keys=True) + "\n", cfg)
    else:
        _write_text(args.out, csv, cfg)
    return EXIT_RETAIN


def cmd_dist(args: argparse.Namespace) -> int:
    p_list = args.pe if args.pe else _workflows.DIST_DEFAULT_P
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _run_config(args)
    if args.server:
        data = _post(args.server, "/dist", {
            "n": args.n, "p_e": args.pe, "trials": args.trials,
            "seed": args.seed, "jobs": args.jobs, "include_survival": True,
        })
        for key, csv in data["survival_csv"].items():
            (out_dir / f"dist_p{key}.csv").write_text(csv)
        quantiles_csv = data["quantiles_csv"]
    else:
        dists, quantiles = _workflows.distribution_run(
            args.n, p_list, args.trials, args.seed, jobs=args.jobs
        )
        for p, dist in dists.items():
            (out_dir / f"dist_p{p}.csv").write_text(dist.to_csv())
        quantiles_csv = _workflows.quantiles_csv(quantiles)
    (out_dir / "quantiles.csv").write_text(quantiles_csv)
    (out_dir / "quantiles.csv.config.json").write_text(json.dumps(cfg, sort_keys=True) + "\n")
    return EXIT_RETAIN


def cmd_bench(args: argparse.Namespace) -> int:
    report = _workflows.bench(args.n, seed=args.seed, reps=args.reps)
    cfg = _run_config(args)
    payload = report.to_dict()
    payload["config"] = cfg
    text = json.dumps(payload, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text, cfg)
    else:
        sys.stdout.write(text)
    return EXIT_RETAIN


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_RETAIN


_HANDLERS = {
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "power": cmd_power,
    "dist": cmd_dist,
    "bench": cmd_bench,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports --help as 0, bad flags as 2
        return exc.code if isinstance(exc.code, int) else EXIT_BAD_ARGS
    try:
        return _HANDLERS[args.command](args)
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # httpx transport errors and friends
        if type(exc).__module__.startswith("httpx"):
            print(f"server request failed: {exc}", file=sys.stderr)
            return EXIT_IO
        raise


if __name__ == "__main__":
    sys.exit(main())
