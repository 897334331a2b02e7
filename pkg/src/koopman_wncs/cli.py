"""Command-line interface: gen-data, train, fit-error, run, sweep.

Outputs land in a run directory under $KOOPMAN_WNCS_RUNS (default ./runs),
each with a resolved config snapshot and a seed/artifact manifest. Exit codes:
0 ok, 1 runtime error, 2 usage error or missing artifact.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .control import UnstabilizableModelError, make_planner, solve_dare, lift_weights
from .errmodel import ErrorPolyCoeffs, collect_samples, fit_polynomial, select_degree
from .harness import (run_experiment, run_sweep, write_run_dir, write_sweep_csv)
from .koopman import (KoopmanModel, TrainingConfig, TrajectoryDataset,
                      generate_dataset, train_model)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _runs_root():
    return Path(os.environ.get("KOOPMAN_WNCS_RUNS", "runs"))


def _load_config(path):
    try:
        return ExperimentConfig.from_toml(path)
    except FileNotFoundError:
        _die(f"config file not found: {path}", USAGE_ERROR)
    except (ConfigError, ValueError) as exc:
        _die(f"bad config: {exc}", USAGE_ERROR)


def _die(msg, code):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _load_model(path):
    if not path:
        _die("no model artifact configured (artifacts.model or --model)", USAGE_ERROR)
    try:
        return KoopmanModel.load(path)
    except FileNotFoundError:
        _die(f"model file not found: {path}", USAGE_ERROR)


def _load_coeffs(path):
    if not path:
        _die("no error-surrogate artifact configured (artifacts.coeffs or --coeffs)",
             USAGE_ERROR)
    try:
        return ErrorPolyCoeffs.load_csv(path)
    except FileNotFoundError:
        _die(f"coefficients file not found: {path}", USAGE_ERROR)


def cmd_gen_data(args):
    cfg = _load_config(args.config)
    raw = cfg.raw
    plant = cfg.plant()
    n_traj = args.traj or raw["train"]["traj"]
    n_steps = args.steps or raw["train"]["steps"]
    seed = raw["train"]["data_seed"] if args.seed is None else args.seed
    dataset = generate_dataset(plant, n_traj=n_traj, n_steps=n_steps,
                               u_max=raw["plant"]["u_max"], seed=seed,
                               noise_cov=cfg.noise_cov())
    out = Path(args.out) if args.out else _runs_root() / \
        f"data-{raw['plant']['kind']}-seed{seed}"
    dataset.save_csv(out)
    print(f"wrote {dataset.n_traj} trajectories to {out} "
          f"({dataset.meta['truncated_trajectories']} truncated)")
    return 0


def cmd_train(args):
    cfg = _load_config(args.config)
    raw = cfg.raw
    try:
        dataset = TrajectoryDataset.load_csv(args.data)
    except FileNotFoundError:
        _die(f"dataset not found: {args.data}", USAGE_ERROR)
    plant = cfg.plant()
    kind = args.kind or raw["controller"]["kind"]
    seed = raw["train"]["seed"] if args.seed is None else args.seed
    model = KoopmanModel.build(
        kind=kind, dim_x=plant.dim_x, dim_u=plant.dim_u,
        latent_extra=raw["train"]["latent_extra"],
        hidden=tuple(raw["train"]["hidden"]), seed=seed,
        meta={"plant": raw["plant"]["kind"], "u_max": raw["plant"]["u_max"],
              "dt": raw["plant"]["dt"], "h_kind": raw["plant"].get("h_kind")})
    tc = TrainingConfig(horizon=args.horizon or raw["train"]["horizon"],
                        batch_size=raw["train"]["batch_size"],
                        lr=raw["train"]["lr"],
                        epochs=args.epochs or raw["train"]["epochs"],
                        seed=seed)
    result = train_model(model, dataset, tc, log=print)
    out = Path(args.out) if args.out else _runs_root() / f"model-{kind}.npz"
    model.save(out)
    print(f"loss: {result.loss_initial:.6g} -> {result.loss_final:.6g}")
    Q, B, _ = cfg.cost_matrices()
    try:
        if kind == "dkac":
            rho = "state-dependent (per-slot DARE)"
        else:
            import numpy as _np
            w = lift_weights(Q, B, model.dim_z)
            s_ = _np.sqrt(raw["controller"]["discount"])
            sol = solve_dare(s_ * model.K_x, s_ * model.K_u, w.Q_hat, w.B_hat)
            rho = f"{sol.spectral_radius:.6f}"
            if args.export_lqr:
                exp = Path(args.export_lqr)
                exp.mkdir(parents=True, exist_ok=True)
                np.savetxt(exp / "gain.csv", sol.K, delimiter=",")
                np.savetxt(exp / "riccati.csv", sol.P, delimiter=",")
        print(f"closed-loop spectral radius: {rho}")
    except UnstabilizableModelError as exc:
        print(f"warning: {exc}", file=sys.stderr)
    print(f"saved model to {out}")
    return 0


def cmd_fit_error(args):
    cfg = _load_config(args.config)
    raw = cfg.raw
    model = _load_model(args.model or raw["artifacts"]["model"])
    plant = cfg.plant()
    Q, B, x0 = cfg.cost_matrices()
    planner = make_planner(model, Q, B, discount=raw["controller"]["discount"])
    n = args.samples or raw["errmodel"]["samples"]
    beta_max = args.beta_max or raw["errmodel"]["beta_max"]
    degrees = [int(d) for d in args.degrees.split(",")] if args.degrees \
        else list(raw["errmodel"]["degrees"])
    samples = collect_samples(model, planner, plant, n=n, beta_max=beta_max,
                              seed=raw["errmodel"]["seed"],
                              noise_cov=cfg.noise_cov(), x0=x0)
    degree, table = select_degree(samples, degrees=degrees)
    coeffs = fit_polynomial(samples, degree=degree)
    out = Path(args.out) if args.out else _runs_root() / "coeffs.csv"
    coeffs.save_csv(out)
    samples.save_csv(out.with_name(out.stem + "-samples.csv"))
    residual_path = out.with_name(out.stem + "-degrees.csv")
    with open(residual_path, "w") as fh:
        fh.write("degree,holdout_mean_abs,train_mean_abs\n")
        for row in table:
            fh.write(f"{row['degree']},{float(row['holdout_mean_abs'])!r},"
                     f"{float(row['train_mean_abs'])!r}\n")
    print(f"selected degree {degree}; wrote {out} "
          f"({samples.discarded} samples discarded)")
    return 0


def cmd_run(args):
    cfg = _load_config(args.config)
    raw = cfg.raw
    if args.seed is not None:
        raw["run"]["seed"] = int(args.seed)
    model = _load_model(args.model or raw["artifacts"]["model"])
    coeffs = _load_coeffs(args.coeffs or raw["artifacts"]["coeffs"])
    episodes = args.episodes or raw["run"]["episodes"]
    try:
        results, summary, table = run_experiment(cfg, model, coeffs,
                                                 episodes=episodes)
    except UnstabilizableModelError as exc:
        _die(str(exc), RUNTIME_ERROR)
    stem = Path(args.config).stem
    out = Path(args.out) if args.out else _runs_root() / \
        f"run-{stem}-seed{raw['run']['seed']}"
    write_run_dir(out, cfg, results, summary, table,
                  artifacts={"model": args.model or raw["artifacts"]["model"],
                             "coeffs": args.coeffs or raw["artifacts"]["coeffs"]})
    print(f"episodes: {summary['episodes']}  "
          f"total cost: {summary['total_cost_mean']:.6g}  "
          f"mean AoI: {summary['aoi_mean_mean']:.4g}  "
          f"transmissions: {summary['transmissions_mean']:.4g}")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args):
    cfg = _load_config(args.config)
    raw = cfg.raw
    model = _load_model(args.model or raw["artifacts"]["model"])
    coeffs = _load_coeffs(args.coeffs or raw["artifacts"]["coeffs"])
    values = [v for v in args.values.split(",") if v != ""]
    if args.axis == "consecutive-CA-failures":
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    stem = Path(args.config).stem
    out = Path(args.out) if args.out else _runs_root() / f"sweep-{args.axis}-{stem}"
    out.mkdir(parents=True, exist_ok=True)
    rows, columns = run_sweep(cfg, args.axis, values, model, coeffs,
                              episodes=args.episodes)
    path = write_sweep_csv(out / "sweep.csv", rows, columns)
    (out / "config.snapshot").write_text(cfg.snapshot_json())
    for row in rows:
        print(f"{args.axis}={row['value']}: total cost "
              f"{row.get('total_cost_mean', float('nan')):.6g}, "
              f"tx {row.get('transmissions_mean', float('nan')):.4g}, "
              f"AoI {row.get('aoi_mean_mean', float('nan')):.4g}")
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="koopman-wncs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a random-action trajectory dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--traj", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a Koopman model on a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--kind", choices=("proposed", "dkuc", "dkac"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--export-lqr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit-error", help="fit the prediction-error surrogate")
    p.add_argument("--config", required=True)
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--samples", type=int)
    p.add_argument("--beta-max", type=int)
    p.add_argument("--degrees")
    p.set_defaults(func=cmd_fit_error)

    p = sub.add_parser("run", help="run closed-loop episodes")
    p.add_argument("--config", required=True)
    p.add_argument("--model")
    p.add_argument("--coeffs")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one experiment axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True,
                   choices=("outage", "snr", "kappa", "delta",
                            "consecutive-CA-failures"))
    p.add_argument("--values", required=True)
    p.add_argument("--model")
    p.add_argument("--coeffs")
    p.add_argument("--episodes", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else RUNTIME_ERROR
    except Exception as exc:   # runtime failures map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
