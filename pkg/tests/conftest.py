"""Shared fixtures: desk-scale trained artifacts, cached on disk so repeated
test runs skip the expensive training steps. Cache keys include every recipe
parameter; deleting tests/_cache forces a full rebuild.

Two kinds of pendulum recipe exist on purpose. "pend_tanh_learning" is the
acceptance suite's pinned learning experiment (200x500 trajectories from the
global box, horizon 10, 30 epochs). The control-grade recipes mix the global
box with a stabilization-envelope box and train a longer horizon, which the
closed-loop criteria need; both halves are exact plant rollouts.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from koopman_wncs.config import ExperimentConfig
from koopman_wncs.control import make_planner
from koopman_wncs.dynamics import CartPole, DoublePendulum, PendulumParams
from koopman_wncs.errmodel import (ErrorPolyCoeffs, ErrorSamples, collect_samples,
                                   fit_polynomial)
from koopman_wncs.koopman import (KoopmanModel, TrainingConfig, TrajectoryDataset,
                                  generate_dataset, train_model)

CACHE = Path(__file__).parent / "_cache"

NOISE_SIGMA2 = 1e-6

PEND_LOCAL_BOX = ([-0.25, -0.5, -0.25, -0.5], [0.25, 0.5, 0.25, 0.5])
PEND_ERR_BOX = ([-0.08, -0.3, -0.08, -0.3], [0.08, 0.3, 0.08, 0.3])
CART_ERR_BOX = ([-0.5, -0.5, -0.1, -0.5], [0.5, 0.5, 0.1, 0.5])

RECIPES = {
    # criterion 5's pinned learning run: 200x500, horizon 10, 30 epochs
    "pend_tanh_learning": {
        "plant": "double_pendulum", "h_kind": "tanh", "u_max": 5.0,
        "data": [{"traj": 200, "steps": 500, "seed": 1}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 30, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "proposed",
    },
    # control-grade tanh model: global + envelope data, longer horizon
    "pend_tanh": {
        "plant": "double_pendulum", "h_kind": "tanh", "u_max": 5.0,
        "data": [{"traj": 60, "steps": 500, "seed": 1},
                 {"traj": 1500, "steps": 60, "seed": 2, "box": PEND_LOCAL_BOX,
                  "u_max": 1.5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 40, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "refit_every": 3,
        "kind": "proposed",
    },
    "pend_cubic": {
        "plant": "double_pendulum", "h_kind": "cubic", "u_max": 5.0,
        "data": [{"traj": 60, "steps": 500, "seed": 3},
                 {"traj": 1500, "steps": 60, "seed": 4, "box": PEND_LOCAL_BOX,
                  "u_max": 1.5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 24, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "refit_every": 3,
        "kind": "proposed",
    },
    "pend_cubic_dkuc": {
        "plant": "double_pendulum", "h_kind": "cubic", "u_max": 5.0,
        "data": [{"traj": 100, "steps": 500, "seed": 3},
                 {"traj": 1250, "steps": 60, "seed": 4, "box": PEND_LOCAL_BOX,
                  "u_max": 1.5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 10, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "dkuc",
    },
    "pend_cubic_dkac": {
        "plant": "double_pendulum", "h_kind": "cubic", "u_max": 5.0,
        "data": [{"traj": 100, "steps": 500, "seed": 3},
                 {"traj": 1250, "steps": 60, "seed": 4, "box": PEND_LOCAL_BOX,
                  "u_max": 1.5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 10, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "dkac",
    },
    "cartpole": {
        "plant": "cartpole", "u_max": 10.0,
        "data": [{"traj": 1200, "steps": 80, "seed": 5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 20, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "proposed",
    },
    "cartpole_dkuc": {
        "plant": "cartpole", "u_max": 10.0,
        "data": [{"traj": 1200, "steps": 80, "seed": 5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 10, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "dkuc",
    },
    "cartpole_dkac": {
        "plant": "cartpole", "u_max": 10.0,
        "data": [{"traj": 1200, "steps": 80, "seed": 5}],
        "hidden": [64, 64], "latent_extra": 20,
        "epochs": 10, "horizon": 10, "batch": 1000, "lr": 1e-3, "seed": 0,
        "kind": "dkac",
    },
}


def build_plant(recipe):
    if recipe["plant"] == "cartpole":
        return CartPole(u_max=recipe["u_max"])
    return DoublePendulum(PendulumParams(h_kind=recipe["h_kind"]), dt=0.02,
                          u_max=recipe["u_max"])


def recipe_dataset(recipe):
    plant = build_plant(recipe)
    parts = []
    for spec in recipe["data"]:
        parts.append(generate_dataset(
            plant, n_traj=spec["traj"], n_steps=spec["steps"],
            u_max=spec.get("u_max", recipe["u_max"]), seed=spec["seed"],
            noise_cov=NOISE_SIGMA2 * np.eye(4), init_box=spec.get("box")))
    if len(parts) == 1:
        return parts[0]
    return TrajectoryDataset(
        states=[x for p in parts for x in p.states],
        actions=[u for p in parts for u in p.actions],
        meta=dict(parts[0].meta))


def _key(payload):
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def trained_model(name):
    """Train (or load from cache) the named recipe; returns (model, info)."""
    recipe = RECIPES[name]
    key = _key(recipe)
    CACHE.mkdir(exist_ok=True)
    model_path = CACHE / f"{name}-{key}.npz"
    info_path = CACHE / f"{name}-{key}.json"
    if model_path.exists() and info_path.exists():
        return KoopmanModel.load(model_path), json.loads(info_path.read_text())
    plant = build_plant(recipe)
    dataset = recipe_dataset(recipe)
    model = KoopmanModel.build(
        kind=recipe["kind"], dim_x=plant.dim_x, dim_u=plant.dim_u,
        latent_extra=recipe["latent_extra"], hidden=tuple(recipe["hidden"]),
        seed=recipe["seed"],
        meta={"plant": recipe["plant"], "u_max": recipe["u_max"], "dt": plant.dt,
              "h_kind": recipe.get("h_kind")})
    tc = TrainingConfig(horizon=recipe["horizon"], batch_size=recipe["batch"],
                        lr=recipe["lr"], epochs=recipe["epochs"],
                        seed=recipe["seed"],
                        refit_every=recipe.get("refit_every", 5))
    result = train_model(model, dataset, tc)
    info = {"loss_initial": result.loss_initial, "loss_final": result.loss_final,
            "epoch_losses": result.epoch_losses, "recipe": recipe}
    model.save(model_path)
    info_path.write_text(json.dumps(info))
    return model, info


def err_box(recipe):
    return PEND_ERR_BOX if recipe["plant"] == "double_pendulum" else CART_ERR_BOX


def collected_samples(name, n_samples=10000, beta_max=30, seed=11):
    recipe = RECIPES[name]
    key = _key({**recipe, "err_n": n_samples, "err_beta": beta_max,
                "err_seed": seed})
    path = CACHE / f"samples-{name}-{key}.csv"
    if path.exists():
        return ErrorSamples.load_csv(path)
    model, _ = trained_model(name)
    plant = build_plant(recipe)
    Q, B, x0 = cost_for(recipe)
    planner = make_planner(model, Q, B)
    samples = collect_samples(model, planner, plant, n=n_samples,
                              beta_max=beta_max, seed=seed,
                              noise_cov=NOISE_SIGMA2 * np.eye(4), x0=x0,
                              init_box=err_box(recipe))
    CACHE.mkdir(exist_ok=True)
    samples.save_csv(path)
    return samples


def fitted_coeffs(name, n_samples=10000, beta_max=30, seed=11):
    recipe = RECIPES[name]
    key = _key({**recipe, "err_n": n_samples, "err_beta": beta_max,
                "err_seed": seed})
    path = CACHE / f"coeffs-{name}-{key}.csv"
    if path.exists():
        return ErrorPolyCoeffs.load_csv(path)
    samples = collected_samples(name, n_samples, beta_max, seed)
    coeffs = fit_polynomial(samples, degree=2)
    coeffs.save_csv(path)
    return coeffs


def cost_for(recipe):
    Q = np.diag([20.0, 0.01, 5.0, 0.01])
    dim_u = 1 if recipe["plant"] == "cartpole" else 2
    return Q, 0.001 * np.eye(dim_u), np.zeros(4)


def base_config(name, **overrides):
    """ExperimentConfig matching a recipe, for closed-loop runs."""
    recipe = RECIPES[name]
    data = {
        "plant": {"kind": recipe["plant"], "u_max": recipe["u_max"]},
        "controller": {"kind": recipe["kind"], "n_c": 10},
        "run": {"T": 1000, "episodes": 10, "seed": 0},
    }
    if recipe["plant"] == "double_pendulum":
        data["plant"]["h_kind"] = recipe["h_kind"]
        data["run"]["x_init"] = [0.0, 0.3, 0.0, -0.3]
    else:
        data["run"]["x_init"] = [0.0, 0.0, 0.05, 0.0]
    for section, vals in overrides.items():
        data.setdefault(section, {}).update(vals)
    return ExperimentConfig.from_dict(data)


@pytest.fixture(scope="session")
def pend_tanh_model():
    return trained_model("pend_tanh")


@pytest.fixture(scope="session")
def pend_tanh_coeffs():
    return fitted_coeffs("pend_tanh")
