"""Command-line interface.

Every subcommand prints a JSON summary on stdout and exits 0. Failures print
``{"error": <type>, "message": <text>}`` on stderr and exit nonzero (2 for
usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .array import ArrayGeometry
from .cscd_h0 import StopConfigH0, cscd_h0, omp_h0
from .cscd_h1 import StopConfigH1, cscd_h1, gomp_h1
from .glrt import TheoryModel, detect, ideal_detect, pd, pfa, threshold_for_pfa
from .harness import (ExperimentConfig, draw_scene, profile_report, run_pd_experiment, run_pfa_experiment,
                      run_rmse_experiment, write_report)
from .scene import load_scene, load_snapshot_csv, save_scene, save_snapshot_csv, synthesize, trial_rng


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _common(p: argparse.ArgumentParser, estimator_default="cscd") -> None:
    p.add_argument("--config", type=Path, help="experiment config JSON")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--estimator", choices=["cscd", "grid-baseline", "omp-baseline"], default=estimator_default)


def _load_config(args, **overrides) -> ExperimentConfig:
    data = io.read_json(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "ideal_glrt", False):
        data["ideal_glrt"] = True
    if getattr(args, "estimator", None):
        data["estimator"] = args.estimator
    if getattr(args, "n_jobs", None) is not None:
        data["n_jobs"] = args.n_jobs
    data.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "trials", None) is not None:
        data.update(trials_pfa=args.trials, trials_pd=args.trials, trials_rmse=args.trials)
    return ExperimentConfig.from_dict(data)


def _geometry(args, cfg: ExperimentConfig | None = None) -> ArrayGeometry:
    if getattr(args, "geometry", None):
        return io.load_geometry(args.geometry)
    return cfg.geometry if cfg is not None else _load_config(args).geometry


def _out_dir(args) -> Path:
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> dict:
    cfg = _load_config(args)
    geom = _geometry(args, cfg)
    rng = trial_rng(cfg.seed, args.index)
    if args.scene:
        scene = load_scene(args.scene)
    else:
        h1 = args.hypothesis == "h1"
        rho1 = cfg.rho1_db[0] if cfg.rho1_db else -np.inf
        scene, _ = draw_scene(cfg, rng, cfg.rho0_db[0], rho1 if h1 else -np.inf, with_pairs=h1)
    snap = synthesize(geom, scene, rng)
    out = _out_dir(args)
    save_scene(scene, out / "scene.json")
    save_snapshot_csv(snap.z, out / "snapshot.csv")
    io.save_geometry(geom, out / "geometry.json")
    return {"scene": str(out / "scene.json"), "snapshot": str(out / "snapshot.csv"),
            "geometry": str(out / "geometry.json"), "k0": scene.k0, "k1": scene.k1,
            "seed": cfg.seed, "index": args.index}


def _estimate(z, geom, hypothesis: str, estimator: str, grid_step: float, sigma2: float):
    if hypothesis == "h0":
        fn = cscd_h0 if estimator == "cscd" else omp_h0
        return fn(z, geom, StopConfigH0(grid_step=grid_step, sigma2=sigma2))
    fn = cscd_h1 if estimator == "cscd" else gomp_h1
    return fn(z, geom, StopConfigH1(grid_step=grid_step, sigma2=sigma2))


def cmd_estimate(args) -> dict:
    cfg = _load_config(args)
    geom = _geometry(args, cfg)
    z = load_snapshot_csv(args.snapshot)
    est = _estimate(z, geom, args.hypothesis, cfg.estimator, cfg.grid_step, cfg.sigma2)
    result = est.to_dict()
    if args.out:
        io.write_json(result, _out_dir(args) / f"estimate_{args.hypothesis}.json")
    return result


def cmd_detect(args) -> dict:
    cfg = _load_config(args)
    if cfg.ideal_glrt and not args.scene:
        raise UsageError("--ideal-glrt needs --scene with the true angles")
    geom = _geometry(args, cfg)
    z = load_snapshot_csv(args.snapshot)
    if cfg.ideal_glrt:
        truth = load_scene(args.scene)
        pairs = truth.pair_angles
        if args.model_pairs:
            pairs = np.asarray(json.loads(args.model_pairs), dtype=float).reshape(-1, 2)
        out = ideal_detect(geom, z, truth.direct_angles, pairs, cfg.pfa_target)
        k0_hat, k1_hat = truth.k0, len(pairs)
    else:
        e0 = _estimate(z, geom, "h0", cfg.estimator, cfg.grid_step, cfg.sigma2)
        e1 = _estimate(z, geom, "h1", cfg.estimator, cfg.grid_step, cfg.sigma2)
        out = detect(geom, z, e0, e1, cfg.pfa_target)
        k0_hat, k1_hat = e1.k0, e1.k1
    result = {"statistic": out.statistic, "threshold": out.threshold, "decision": out.decision,
              "pfa_target": cfg.pfa_target, "k0_hat": k0_hat, "k1_hat": k1_hat,
              "mode": "ideal" if cfg.ideal_glrt else cfg.estimator}
    if args.out:
        io.write_json(result, _out_dir(args) / "detection.json")
    return result


def cmd_theory(args) -> dict:
    cfg = _load_config(args)
    M = args.M or cfg.geometry.n_virtual
    k0 = cfg.k0 if args.k0 is None else args.k0
    k1 = cfg.k1 if args.k1 is None else args.k1
    model = TheoryModel(M, k0, k1)
    out = _out_dir(args)
    lam = np.linspace(1.0, args.lambda_max, args.points)
    pfa_path = out / "theory_pfa.csv"
    with pfa_path.open("w") as fh:
        fh.write(f"# theory_pfa: false-alarm probability vs threshold (M={M}, K0={k0}, K1={k1})\n")
        fh.write("lambda_g,pfa\n")
        for lg, p in zip(lam, pfa(lam, model)):
            fh.write(f"{lg!r},{float(p)!r}\n")
    lam_g = threshold_for_pfa(cfg.pfa_target, model)
    pd_path = out / "theory_pd.csv"
    rho_db = np.linspace(args.rho_min, args.rho_max, args.points)
    with pd_path.open("w") as fh:
        fh.write(f"# theory_pd: detection probability vs first-order SNR (M={M}, K0={k0}, K1={k1}, "
                 f"pfa={cfg.pfa_target})\n")
        fh.write("rho1_db,pd\n")
        for r in rho_db:
            p = pd(lam_g, TheoryModel(M, k0, k1, 10.0 ** (r / 10.0)))
            fh.write(f"{float(r)!r},{float(p)!r}\n")
    return {"threshold": lam_g, "M": M, "k0": k0, "k1": k1, "pfa_target": cfg.pfa_target,
            "outputs": [str(pfa_path), str(pd_path)]}


def _summary(manifest: dict) -> dict:
    return {"experiment": manifest["experiment"], "rows": manifest["rows"], "outputs": manifest["outputs"]}


def cmd_mc(args) -> dict:
    overrides = {}
    if args.experiment == "pfa" and args.full_scale:
        overrides = {"pfa_target": 1e-3, "trials_pfa": 100_000}
    cfg = _load_config(args, **overrides)
    if args.experiment == "pfa":
        estimators = [args.estimator] if args.estimator else ["cscd", "grid-baseline"]
        report = run_pfa_experiment(cfg, estimators)
    elif args.experiment == "pd":
        report = run_pd_experiment(cfg)
    else:
        report = run_rmse_experiment(cfg)
    return _summary(write_report(report, _out_dir(args), cfg.seed))


def cmd_profile(args) -> dict:
    cfg = _load_config(args)
    geom = _geometry(args, cfg)
    scan = np.arange(-90.0, 90.0 + 1e-9, args.step)
    report = profile_report(geom, args.reference, scan)
    manifest = write_report(report, _out_dir(args), cfg.seed)
    corr = np.array([r["correlation"] for r in report.rows])
    return {"experiment": "profile", "outputs": manifest["outputs"],
            "peak_deg": float(scan[int(np.argmax(corr))]), "peak": float(corr.max())}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghostradar", description="Multipath ghost-target identification for MIMO radar.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="draw a scene and synthesize one snapshot")
    _common(p)
    p.add_argument("--geometry", type=Path, help="geometry JSON (overrides the config)")
    p.add_argument("--scene", type=Path, help="scene JSON with fixed angles and amplitudes")
    p.add_argument("--hypothesis", choices=["h0", "h1"], default="h1")
    p.add_argument("--index", type=int, default=0, help="trial index of the random stream")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate path angles from a snapshot CSV")
    _common(p)
    p.add_argument("--snapshot", type=Path, required=True)
    p.add_argument("--geometry", type=Path)
    p.add_argument("--hypothesis", choices=["h0", "h1"], default="h1")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("detect", help="run the GLRT on a snapshot CSV")
    _common(p)
    p.add_argument("--snapshot", type=Path, required=True)
    p.add_argument("--geometry", type=Path)
    p.add_argument("--ideal-glrt", action="store_true", help="use the true matrices from --scene")
    p.add_argument("--scene", type=Path, help="truth scene JSON for --ideal-glrt")
    p.add_argument("--model-pairs", help="JSON list of [dod, doa] for the H1 model in --ideal-glrt mode")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("theory", help="closed-form Pfa and Pd curves as CSV")
    _common(p)
    p.add_argument("--M", type=int, help="virtual array size (default: from the geometry)")
    p.add_argument("--k0", type=int)
    p.add_argument("--k1", type=int)
    p.add_argument("--lambda-max", type=float, default=3.0)
    p.add_argument("--rho-min", type=float, default=-10.0)
    p.add_argument("--rho-max", type=float, default=20.0)
    p.add_argument("--points", type=_positive_int, default=121)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("mc", help="Monte Carlo experiments")
    mc = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, text in (("pfa", "false-alarm rate on H0 snapshots"), ("pd", "detection rate vs rho1"),
                       ("rmse", "angle RMSE and success rate vs SNR")):
        q = mc.add_parser(name, help=text)
        _common(q, estimator_default=None)
        q.add_argument("--trials", type=_positive_int, help="trials per sweep point")
        q.add_argument("--ideal-glrt", action="store_true", help="detect with the true matrices")
        q.add_argument("--n-jobs", type=int, help="worker processes (-1: all cores)")
        if name == "pfa":
            q.add_argument("--full-scale", action="store_true", help="nominal Pfa 1e-3 with 1e5 trials")
        q.set_defaults(func=cmd_mc)

    p = sub.add_parser("profile", help="steering correlation profile as CSV")
    _common(p)
    p.add_argument("--geometry", type=Path)
    p.add_argument("--reference", type=float, nargs="+", required=True,
                   help="direct angle, or DOD and DOA of a pair (degrees)")
    p.add_argument("--step", type=float, default=0.1)
    p.set_defaults(func=cmd_profile)
    return parser


def _error(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except UsageError as exc:
        return _error(exc, 2)
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as exc:  # noqa: BLE001 - every failure becomes error JSON
        return _error(exc, 1)
    print(io.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
