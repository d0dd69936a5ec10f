"""Command-line harness.

Subcommands: simulate, calibrate, monitor, far-study, detect-study,
compare-baseline. Every command is deterministic given its config (the
seed is part of it), prints a provenance header (config echo plus sha256
of each artifact written), and exits 0 on success, 2 on input errors,
3 on numerical failures. --config FILE supplies any of the flag values
as JSON; explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import (BootstrapConfig, Calibration, baseline_split_cl,
                        calibrate)
from .dataset import Dataset
from .datagen import (DEFAULT_STATE0, TRAIN_OSC_PARAMS, OscState, gen_linear,
                      gen_oscillator, LINEAR_NOISE_SD)
from .errors import DriftguardError, InputError
from .monitor import first_signal, monitor_stream, records_to_csv
from .nnmodel import TrainConfig
from .studies import (StudyConfig, detect_study, far_study,
                      write_detect_times_csv, write_far_curve_csv)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance(cmd: str, cfg: dict, artifacts: list[Path]) -> None:
    print(f"# driftguard {cmd} | driftguard {__version__}")
    print(f"# config {json.dumps(cfg, sort_keys=True, default=str)}")
    for path in artifacts:
        print(f"# artifact {path} sha256={_sha256(path)}")


def _merge_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Fill unset flags from --config JSON; explicit flags keep priority."""
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        raise InputError(f"no such config file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"could not parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path} must hold a JSON object of flag values")
    # A dest counts as explicit when one of its option strings appears
    # on the command line; config values never override those.
    explicit = set()
    for action in args.subparser._actions:
        for opt in action.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv):
                explicit.add(action.dest)
    valid = {a.dest for a in args.subparser._actions}
    for key, value in doc.items():
        if key not in valid:
            raise InputError(f"unknown config key {key!r} in {path}")
        if key not in explicit:
            setattr(args, key, value)
    return args


def _bootstrap_config(args) -> BootstrapConfig:
    return BootstrapConfig(
        b_outer=args.b_outer, b_inner=args.b_inner, lam=args.lam,
        alpha=args.alpha, horizon=args.horizon, epsilon=args.epsilon,
        seed=args.seed)


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, step_size=args.step_size,
                       seed=args.train_seed, grad_tol=args.grad_tol,
                       refit_epochs=args.refit_epochs, restarts=args.restarts,
                       scout_epochs=args.scout_epochs)


def _add_bootstrap_flags(sp) -> None:
    sp.add_argument("--b-outer", type=int, default=100)
    sp.add_argument("--b-inner", type=int, default=200)
    sp.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.01)
    sp.add_argument("--alpha", type=float, default=0.001)
    sp.add_argument("--horizon", type=int, default=1000)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)


def _add_train_flags(sp) -> None:
    sp.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    sp.add_argument("--step-size", type=float, default=TrainConfig.step_size)
    sp.add_argument("--refit-epochs", type=int, default=TrainConfig.refit_epochs)
    sp.add_argument("--grad-tol", type=float, default=TrainConfig.grad_tol)
    sp.add_argument("--train-seed", type=int, default=0)
    sp.add_argument("--restarts", type=int, default=TrainConfig.restarts)
    sp.add_argument("--scout-epochs", type=int,
                    default=TrainConfig.scout_epochs)


def cmd_simulate(args) -> int:
    out = Path(args.out)
    meta = {"command": "simulate", "generator": args.generator, "n": args.n,
            "seed": args.seed, "version": __version__}
    if args.generator == "linear":
        data = gen_linear(args.n, args.mode, args.seed, noise_sd=args.noise_sd)
        meta.update(mode=args.mode, noise_sd=args.noise_sd)
    elif args.generator == "oscillator":
        state0 = DEFAULT_STATE0
        if args.state0:
            try:
                vals = [float(v) for v in args.state0.split(",")]
            except ValueError:
                raise InputError("--state0 needs four numbers: p1,v1,p2,v2")
            if len(vals) != 4:
                raise InputError("--state0 needs p1,v1,p2,v2")
            state0 = OscState(*vals)
        data = gen_oscillator(TRAIN_OSC_PARAMS, args.n, args.sigma, state0,
                              args.seed)
        meta.update(sigma=args.sigma,
                    params=vars(TRAIN_OSC_PARAMS).copy(),
                    state0=[state0.p1, state0.v1, state0.p2, state0.v2])
    else:
        raise InputError(f"unknown generator {args.generator!r}")
    data.to_csv(out)
    meta_path = out.with_suffix(out.suffix + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _provenance("simulate", meta, [out, meta_path])
    print(f"wrote {data.n} rows, {data.p} predictors")
    return 0


def cmd_calibrate(args) -> int:
    data = Dataset.from_csv(args.data)
    config = _bootstrap_config(args)
    train_cfg = _train_config(args) if args.model == "mlp" else None
    cal = calibrate(data, args.model, args.gamma, config, train_cfg=train_cfg,
                    with_naive=args.naive, workers=args.workers)
    if args.naive:
        cal = replace(cal, method="nested-bootstrap-naive", cl=cal.cl_naive,
                      cl_naive=None)
    out = Path(args.out)
    cal.save(out)
    cfg_echo = {"command": "calibrate", "data": str(args.data),
                "model": args.model, "gamma": args.gamma,
                "naive": args.naive, **vars(config).copy()}
    _provenance("calibrate", cfg_echo, [out])
    print(f"calibrated {cal.method} CL over horizon {cal.horizon}; "
          f"CL[1]={cal.cl[0]:.6g} CL[{cal.horizon}]={cal.cl[-1]:.6g}")
    return 0


def cmd_monitor(args) -> int:
    cal = Calibration.load(args.calibration)
    stream = Dataset.from_csv(args.stream)
    records = monitor_stream(cal, stream)
    out = Path(args.out)
    records_to_csv(records, out)
    _provenance("monitor", {"command": "monitor",
                            "calibration": str(args.calibration),
                            "stream": str(args.stream)}, [out])
    hit = first_signal(records)
    if hit is None:
        print(f"no signal in {len(records)} observations")
    else:
        print(f"first signal at observation {hit}")
    return 0


def _study_config(args, detect: bool) -> StudyConfig:
    generator = args.generator
    n_train = args.n_train
    if n_train is None:
        n_train = 2000 if generator == "linear" else 3000
    replicates = args.replicates
    if replicates is None:
        replicates = 20 if generator == "linear" else 5
    return StudyConfig(
        generator=generator, replicates=replicates, seed=args.seed,
        gamma=args.gamma, n_train=n_train, stream_len=args.stream_len,
        # far studies never shift, but the config still validates shift_at
        shift_at=args.shift_at if detect else 2, sigma=args.sigma,
        split_fraction=args.split_fraction,
        include_baseline=not args.no_baseline, include_naive=args.naive,
        with_control=detect and not args.no_control,
        with_cv=not args.no_cv,
        bootstrap=_bootstrap_config(args),
        train_cfg=_train_config(args) if generator == "oscillator" else None,
        workers=args.workers)


def _write_study(args, result, name: str) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    far_path = out_dir / "far_curve.csv"
    det_path = out_dir / "detect_times.csv"
    meta_path = out_dir / "study.json"
    write_far_curve_csv(result, far_path)
    write_detect_times_csv(result, det_path)
    meta_path.write_text(json.dumps(result.meta, indent=2, sort_keys=True,
                                    default=str) + "\n")
    _provenance(name, result.meta["config"], [far_path, det_path, meta_path])
    for arm, val in result.meta["mean_far"].items():
        print(f"mean FAR [{arm}]: {val:.6g}")
    if "median_first_signal" in result.meta:
        for arm, val in result.meta["median_first_signal"].items():
            print(f"median first signal [{arm}]: {val}")
    if "cv_r2" in result.meta:
        print(f"cv R^2 per replicate: "
              f"{[round(v, 4) for v in result.meta['cv_r2']]}")
    return 0


def cmd_far_study(args) -> int:
    return _write_study(args, far_study(_study_config(args, detect=False)),
                        "far-study")


def cmd_detect_study(args) -> int:
    return _write_study(args, detect_study(_study_config(args, detect=True)),
                        "detect-study")


def cmd_compare_baseline(args) -> int:
    data = Dataset.from_csv(args.data)
    train_cfg = _train_config(args) if args.model == "mlp" else None
    base = baseline_split_cl(data, args.split_fraction, args.gamma, args.lam,
                             args.alpha, epsilon=args.epsilon,
                             model_kind=args.model, train_cfg=train_cfg)
    cal_art = base.to_calibration()
    out = Path(args.out)
    cal_art.save(out)
    cfg_echo = {"command": "compare-baseline", "data": str(args.data),
                "model": args.model,
                "split_fraction": args.split_fraction, "gamma": args.gamma,
                "lambda": args.lam, "alpha": args.alpha}
    _provenance("compare-baseline", cfg_echo, [out])
    print(f"baseline constant CL = {base.cl:.6g} "
          f"(fit on {int(args.split_fraction * data.n)} rows, "
          f"quantile from {data.n - int(args.split_fraction * data.n)} rows)")
    if args.calibration:
        cal = Calibration.load(args.calibration)
        below = int(np.sum(np.asarray(cal.cl) > base.cl))
        print(f"bootstrap CL range [{cal.cl.min():.6g}, {cal.cl.max():.6g}] "
              f"over horizon {cal.horizon}; baseline CL is below the "
              f"bootstrap CL at {below}/{cal.horizon} indices")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftguard",
        description="Score-based concept drift monitoring with "
                    "nested-bootstrap MEWMA control limits")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a dataset CSV")
    sp.add_argument("--config", default=None)
    sp.add_argument("--generator", choices=["linear", "oscillator"],
                    default="linear")
    sp.add_argument("--mode", choices=["single", "mixture"], default="single")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise-sd", type=float, default=LINEAR_NOISE_SD)
    sp.add_argument("--sigma", type=float, default=0.03)
    sp.add_argument("--state0", default=None, help="p1,v1,p2,v2")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate, subparser=sp)

    sp = sub.add_parser("calibrate", help="nested-bootstrap control limits")
    sp.add_argument("--config", default=None)
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=["ridge", "mlp"], default="ridge")
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--naive", action="store_true",
                    help="skip the sqrt(k) division (ablation)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", required=True)
    _add_bootstrap_flags(sp)
    _add_train_flags(sp)
    sp.set_defaults(func=cmd_calibrate, subparser=sp)

    sp = sub.add_parser("monitor", help="run a stream against a calibration")
    sp.add_argument("--config", default=None)
    sp.add_argument("--calibration", required=True)
    sp.add_argument("--stream", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_monitor, subparser=sp)

    for name, fn, detect in (("far-study", cmd_far_study, False),
                             ("detect-study", cmd_detect_study, True)):
        sp = sub.add_parser(name, help=f"run the {name} simulation study")
        sp.add_argument("--config", default=None)
        sp.add_argument("--generator", choices=["linear", "oscillator"],
                        default="linear")
        sp.add_argument("--replicates", type=int, default=None)
        sp.add_argument("--gamma", type=float, default=0.1)
        sp.add_argument("--n-train", type=int, default=None)
        sp.add_argument("--stream-len", type=int, default=1000)
        if detect:
            sp.add_argument("--shift-at", type=int, default=201)
            sp.add_argument("--no-control", action="store_true")
        sp.add_argument("--sigma", type=float, default=0.03)
        sp.add_argument("--split-fraction", type=float, default=0.5)
        sp.add_argument("--naive", action="store_true")
        sp.add_argument("--no-baseline", action="store_true")
        sp.add_argument("--no-cv", action="store_true")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out-dir", required=True)
        _add_bootstrap_flags(sp)
        _add_train_flags(sp)
        sp.set_defaults(func=fn, no_control=False, subparser=sp)

    sp = sub.add_parser("compare-baseline",
                        help="split-sample constant CL artifact")
    sp.add_argument("--config", default=None)
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=["ridge", "mlp"], default="ridge")
    sp.add_argument("--split-fraction", type=float, default=0.5)
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.01)
    sp.add_argument("--alpha", type=float, default=0.001)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--calibration", default=None,
                    help="existing bootstrap artifact to compare against")
    sp.add_argument("--out", required=True)
    _add_train_flags(sp)
    sp.set_defaults(func=cmd_compare_baseline, subparser=sp)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, argv)
        return args.func(args)
    except DriftguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
