"""Closed-loop episode execution wiring plant, channel, scheduler, and
controller together, plus metric aggregation and experiment sweeps.

Per slot: the sensor-side scheduler decides whether to transmit; the
controller forms its state belief (received state or latent prediction) and
plans a horizon of actions; the controller-actuator link delivers a fresh plan
or the actuator falls back (cached entry replay, zero action, or hold); the
plant advances under process noise. The controller belief is a persistent
latent state advanced with the latent counterpart of whatever action was
actually applied, and it resets on every delivered sensor state.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import scheduler as sched
from .channel import required_power, transmit
from .config import ExperimentConfig
from .control import UnstabilizableModelError, make_planner
from .dynamics import NoiseModel, PlantDivergedError, control_cost
from .errmodel import eval_error

EPISODE_COLUMNS = ("t", "a", "gamma", "sc_outage", "ca_success", "beta", "q_a",
                   "battery", "cost", "eps", "starved", "overflow", "plan_failed")


@dataclass
class StepRecord:
    t: int
    a: int
    gamma: float
    sc_outage: bool
    ca_success: bool
    x: np.ndarray            # true plant state
    x_tilde: np.ndarray      # controller-side state used for control
    u_star: np.ndarray       # fresh plan head this slot
    u_tilde: np.ndarray      # action actually applied
    beta: int
    q_a: float
    battery: float
    cost: float
    eps: float
    starved: bool = False
    overflow: bool = False
    plan_failed: bool = False


@dataclass
class EpisodeMetrics:
    control_cost_avg: float
    transmissions: int
    total_cost: float
    aoi_mean: float
    aoi_var: float
    battery_final: float
    battery_min: float
    sc_outages: int
    ca_failures: int
    starved_slots: int
    overflow_slots: int
    plan_failures: int
    diverged: bool
    seed: int


@dataclass
class EpisodeResult:
    records: list
    metrics: EpisodeMetrics


def actuator_fallback(kind, cache, last_head, t, t_cache, n_c):
    """Applied action under a CA failure.

    cache:     the last successfully delivered Plan (or None),
    last_head: the head action of that plan (B2's most recent received action).
    Returns (u, latent_index_or_None, overflow, empty) where latent_index
    points into the cached plan when a cached entry is replayed.
    """
    if kind == "b1-zero":
        return None, None, False, False
    if kind == "b2-hold":
        if last_head is None:
            return None, None, False, True
        return last_head, None, False, False
    if kind != "cache":
        raise ValueError(f"unknown fallback kind {kind!r}")
    if cache is None:
        return None, None, False, True
    offset = t - t_cache
    if offset < n_c:
        return cache.actions[offset], offset, False, False
    return cache.actions[n_c - 1], n_c - 1, True, False


def run_episode(cfg: ExperimentConfig, model, coeffs, seed, planner=None):
    """One closed-loop episode; returns per-slot records plus metrics.

    Plant divergence truncates the episode, flags it, and returns the partial
    records.
    """
    raw = cfg.raw
    plant = cfg.plant()
    Q, B, x0 = cfg.cost_matrices()
    scfg = cfg.scheduler()
    n_c = int(raw["controller"]["n_c"])
    fallback = raw["run"]["fallback"]
    reliable = bool(raw["run"]["reliable_links"])
    burst = int(raw["run"]["ca_failure_burst"])
    T = int(raw["run"]["T"])
    u_max = plant.u_max

    sc_params = cfg.channel("sc")
    ca_params = cfg.channel("ca")
    p_sc = required_power(sc_params).p
    p_ca = required_power(ca_params).p

    if planner is None:
        planner = make_planner(model, Q, B,
                               discount=raw["controller"]["discount"])
    z0 = model.embed_state(x0)

    seq = np.random.SeedSequence((int(raw["run"]["seed"]), int(seed)))
    sc_rng, ca_rng, noise_rng_seed = seq.spawn(3)
    sc_rng = np.random.default_rng(sc_rng)
    ca_rng = np.random.default_rng(ca_rng)
    noise_cov = cfg.noise_cov()
    noise = None
    if noise_cov is not None:
        noise = NoiseModel(noise_cov, seed=noise_rng_seed)

    x = np.asarray(raw["run"]["x_init"], dtype=float).copy()
    x_last = x.copy()
    z_belief = model.embed_state(x)
    beta_prev = 0
    q_a = 0.0
    battery = scfg.battery_init
    cache = None
    cache_t = -1
    last_head = None
    w_applied_prev = None

    plan_len = n_c if fallback == "cache" else 1
    records = []
    diverged = False
    for t in range(T):
        if t > 0:
            z_belief = model.latent_step(z_belief, w_applied_prev)

        state = sched.SchedulerState(x_last=x_last, Q_a=q_a, beta=beta_prev,
                                     battery=battery, t=t)
        decision = sched.decide(state, scfg, coeffs, p_sc)
        a = decision.a

        sc_outage = False
        delivered = 0
        if a == 1:
            ok = reliable or transmit(p_sc, sc_params, sc_rng)
            if ok:
                delivered = 1
                x_last = x.copy()
                z_belief = model.embed_state(x)
            else:
                sc_outage = True
        battery = sched.battery_update(battery, a, p_sc, scfg.p_sense, t,
                                       scfg.recharge_period, scfg.battery_init)
        beta = sched.aoi_update(beta_prev, delivered)
        q_a = sched.queue_update(q_a, a, decision.gamma)

        x_tilde = z_belief[:model.dim_x].copy()
        plan_failed = False
        try:
            plan = planner.plan(z_belief, z0, plan_len)
        except UnstabilizableModelError:
            # controller failed to produce a plan this slot (per-slot Riccati
            # breakdown on a bad model); nothing fresh reaches the actuator
            plan = None
            plan_failed = True

        if plan_failed:
            ca_ok = False
        elif burst > 0:
            ca_ok = (t % (burst + 1)) == 0
        else:
            ca_ok = reliable or transmit(p_ca, ca_params, ca_rng)

        overflow = False
        if ca_ok:
            cache = plan
            cache_t = t
            last_head = plan.actions[0].copy()
            u_applied = plan.actions[0]
            w_applied = plan.latents[0]
        else:
            u_fb, latent_idx, overflow, _empty = actuator_fallback(
                fallback, cache, last_head, t, cache_t, n_c)
            if u_fb is None:
                u_applied = np.zeros(model.dim_u)
                w_applied = model.embed_action(u_applied, x=x_tilde)
            elif latent_idx is not None:
                u_applied = cache.actions[latent_idx]
                w_applied = cache.latents[latent_idx]
            else:
                u_applied = u_fb
                w_applied = model.embed_action(u_fb, x=x_tilde)
        u_applied = np.clip(u_applied, -u_max, u_max)

        cost = control_cost(x_tilde, u_applied, Q, B, x0)
        eps_val = float(eval_error(coeffs, float(np.linalg.norm(x_last)), beta))
        u_star = np.full(model.dim_u, np.nan) if plan is None else plan.actions[0]
        records.append(StepRecord(
            t=t, a=a, gamma=decision.gamma, sc_outage=sc_outage,
            ca_success=ca_ok, x=x.copy(), x_tilde=x_tilde,
            u_star=u_star.copy(), u_tilde=np.asarray(u_applied).copy(),
            beta=beta, q_a=q_a, battery=battery, cost=cost, eps=eps_val,
            starved=decision.starved, overflow=overflow, plan_failed=plan_failed))

        try:
            x = plant.step(x, u_applied, noise)
        except PlantDivergedError:
            diverged = True
            break
        w_applied_prev = w_applied
        beta_prev = beta

    metrics = episode_metrics(records, scfg.lam, diverged, seed)
    check_episode_invariants(records, scfg, coeffs)
    return EpisodeResult(records=records, metrics=metrics)


def total_cost(records, lam):
    """(1/T) [ sum_t J_t + lambda * sum_t a_t ]."""
    if not records:
        raise ValueError("no records")
    T = len(records)
    return (sum(r.cost for r in records) + lam * sum(r.a for r in records)) / T


def episode_metrics(records, lam, diverged, seed):
    betas = np.array([r.beta for r in records], dtype=float)
    costs = np.array([r.cost for r in records])
    batteries = np.array([r.battery for r in records])
    return EpisodeMetrics(
        control_cost_avg=float(np.mean(costs)),
        transmissions=int(sum(r.a for r in records)),
        total_cost=total_cost(records, lam),
        aoi_mean=float(np.mean(betas)),
        aoi_var=float(np.var(betas)),
        battery_final=float(batteries[-1]),
        battery_min=float(batteries.min()),
        sc_outages=int(sum(r.sc_outage for r in records)),
        ca_failures=int(sum(not r.ca_success for r in records)),
        starved_slots=int(sum(r.starved for r in records)),
        overflow_slots=int(sum(r.overflow for r in records)),
        plan_failures=int(sum(r.plan_failed for r in records)),
        diverged=diverged,
        seed=int(seed),
    )


def check_episode_invariants(records, scfg, coeffs):
    """Queue-stability telescoping, error-constraint compliance on skipped
    slots, and battery non-negativity; raises on violation."""
    T = len(records)
    if T == 0:
        return
    a_sum = sum(r.a for r in records)
    gamma_sum = sum(r.gamma for r in records)
    q_final = records[-1].q_a
    if a_sum / T > gamma_sum / T + q_final / T + 1e-9:
        raise RuntimeError("virtual queue stability inequality violated")
    for r in records:
        if r.battery < 0:
            raise RuntimeError(f"negative battery at slot {r.t}")
        if r.a == 0 and not r.starved and r.eps > scfg.delta + 1e-12:
            raise RuntimeError(
                f"error constraint violated on skipped slot {r.t}: "
                f"eps {r.eps:.4g} > delta {scfg.delta:.4g}")


def aggregate_metrics(episodes):
    """Means/variances across episodes plus the per-episode table."""
    if not episodes:
        raise ValueError("need at least one episode")
    table = [m if isinstance(m, EpisodeMetrics) else m.metrics for m in episodes]
    out = {"episodes": len(table)}
    for name in ("control_cost_avg", "transmissions", "total_cost",
                 "aoi_mean", "aoi_var", "battery_final", "battery_min",
                 "sc_outages", "ca_failures", "starved_slots", "overflow_slots",
                 "plan_failures"):
        vals = np.array([getattr(m, name) for m in table], dtype=float)
        out[f"{name}_mean"] = float(np.mean(vals))
        out[f"{name}_var"] = float(np.var(vals))
    out["diverged_episodes"] = int(sum(m.diverged for m in table))
    return out, table


def run_experiment(cfg: ExperimentConfig, model, coeffs, episodes=None,
                   planner=None):
    """Run the configured number of episodes with per-episode seed streams."""
    n_ep = int(cfg.raw["run"]["episodes"] if episodes is None else episodes)
    results = []
    if planner is None:
        Q, B, _ = cfg.cost_matrices()
        planner = make_planner(model, Q, B,
                               discount=cfg.raw["controller"]["discount"])
    for ep in range(n_ep):
        results.append(run_episode(cfg, model, coeffs, seed=ep, planner=planner))
    summary, table = aggregate_metrics(results)
    return results, summary, table


SWEEP_AXES = ("outage", "snr", "kappa", "delta", "consecutive-CA-failures")


def _apply_axis(raw, axis, value):
    raw = json.loads(json.dumps(raw))   # deep copy via plain JSON types
    if axis == "outage":
        raw["channel"]["outage_target"] = float(value)
        for link in ("sc", "ca"):
            raw["channel"].get(link, {}).pop("outage_target", None)
    elif axis == "snr":
        raw["channel"]["gamma0_db"] = float(value)
        for link in ("sc", "ca"):
            raw["channel"].get(link, {}).pop("gamma0_db", None)
    elif axis == "kappa":
        raw["channel"]["kappa"] = float(value)
        for link in ("sc", "ca"):
            raw["channel"].get(link, {}).pop("kappa", None)
    elif axis == "delta":
        raw["scheduler"]["delta"] = float(value)
    elif axis == "consecutive-CA-failures":
        raw["run"]["ca_failure_burst"] = int(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return ExperimentConfig.from_dict(raw)


def run_sweep(cfg: ExperimentConfig, axis, values, model, coeffs, episodes=None):
    """One aggregate row per axis value; returns (rows, column order)."""
    rows = []
    for value in values:
        sub = _apply_axis(cfg.raw, axis, value)
        p_sc = required_power(sub.channel("sc")).p
        _, summary, _ = run_experiment(sub, model, coeffs, episodes=episodes)
        row = {"axis": axis, "value": value, "p_sc_w": p_sc}
        row.update(summary)
        rows.append(row)
    columns = list(rows[0].keys()) if rows else ["axis", "value", "p_sc_w"]
    return rows, columns


# -- run-directory output -----------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def episode_csv_lines(records):
    dim_x = records[0].x.shape[0]
    dim_u = records[0].u_tilde.shape[0]
    cols = list(EPISODE_COLUMNS)
    cols += [f"x{i + 1}" for i in range(dim_x)]
    cols += [f"xt{i + 1}" for i in range(dim_x)]
    cols += [f"us{i + 1}" for i in range(dim_u)]
    cols += [f"ut{i + 1}" for i in range(dim_u)]
    yield ",".join(cols)
    for r in records:
        vals = [r.t, r.a, r.gamma, r.sc_outage, r.ca_success, r.beta, r.q_a,
                r.battery, r.cost, r.eps, r.starved, r.overflow, r.plan_failed]
        vals += [float(v) for v in r.x]
        vals += [float(v) for v in r.x_tilde]
        vals += [float(v) for v in r.u_star]
        vals += [float(v) for v in r.u_tilde]
        yield ",".join(_fmt(v) for v in vals)


def _sha256(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_run_dir(out_dir, cfg: ExperimentConfig, results, summary, table,
                  artifacts=None):
    """Layout: config.snapshot, manifest.json, episodes/ep_k.csv, summary.csv."""
    out = Path(out_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    (out / "config.snapshot").write_text(cfg.snapshot_json())
    manifest = {
        "master_seed": int(cfg.raw["run"]["seed"]),
        "episode_seeds": [m.seed for m in table],
        "artifacts": {},
    }
    for name, path in (artifacts or {}).items():
        if path and Path(path).exists():
            manifest["artifacts"][name] = {"path": str(path), "sha256": _sha256(path)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")
    for i, res in enumerate(results):
        with open(out / "episodes" / f"ep_{i:03d}.csv", "w") as fh:
            for line in episode_csv_lines(res.records):
                fh.write(line + "\n")
    fields = ["episode", "seed", "control_cost_avg", "transmissions",
              "total_cost", "aoi_mean", "aoi_var", "battery_final",
              "battery_min", "sc_outages", "ca_failures", "starved_slots",
              "overflow_slots", "plan_failures", "diverged"]
    with open(out / "summary.csv", "w") as fh:
        fh.write(",".join(fields) + "\n")
        for i, m in enumerate(table):
            vals = [i] + [getattr(m, f) for f in fields[1:]]
            fh.write(",".join(_fmt(v) for v in vals) + "\n")
    return out


def write_sweep_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    return path
