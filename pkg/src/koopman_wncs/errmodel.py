"""Data-driven closed-form surrogate for the state prediction error.

Samples (state norm, age, measured rollout error) come from the trained model
against the noisy plant; a low-degree polynomial in [||x||, beta] is fitted by
least squares and evaluated cheaply inside the scheduler.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import PlantDivergedError

# Feature vectors per degree; ordering is part of the persisted format.
FEATURES = {
    1: ("r", "b"),
    2: ("r", "b", "r2", "b2", "rb"),
    3: ("r", "b", "r2", "b2", "rb", "r3", "b3", "r2b", "rb2"),
}


def _design(x_norm, beta, degree):
    r = np.asarray(x_norm, dtype=float)
    b = np.asarray(beta, dtype=float)
    cols = {"r": r, "b": b, "r2": r * r, "b2": b * b, "rb": r * b,
            "r3": r**3, "b3": b**3, "r2b": r * r * b, "rb2": r * b * b}
    return np.stack([cols[name] for name in FEATURES[degree]], axis=-1)


@dataclass
class ErrorSamples:
    x_norm: np.ndarray
    beta: np.ndarray
    err: np.ndarray
    discarded: int = 0

    @property
    def n(self):
        return self.x_norm.shape[0]

    def save_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write("x_norm,beta,err\n")
            for r, b, e in zip(self.x_norm, self.beta, self.err):
                fh.write(f"{float(r)!r},{int(b)},{float(e)!r}\n")

    @classmethod
    def load_csv(cls, path):
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(x_norm=rows[:, 0], beta=rows[:, 1], err=rows[:, 2])


@dataclass
class ErrorPolyCoeffs:
    alpha: np.ndarray
    degree: int = 2
    fit_info: dict = field(default_factory=dict)

    def save_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write("feature,coefficient\n")
            for name, val in zip(FEATURES[self.degree], self.alpha):
                fh.write(f"{name},{float(val)!r}\n")
            fh.write(f"# fit_info {json.dumps(self.fit_info, sort_keys=True)}\n")

    @classmethod
    def load_csv(cls, path):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(str(path))
        names, vals = [], []
        fit_info = {}
        for line in path.read_text().splitlines()[1:]:
            if line.startswith("# fit_info"):
                fit_info = json.loads(line[len("# fit_info"):])
                continue
            name, val = line.split(",")
            names.append(name)
            vals.append(float(val))
        degree = next(d for d, feats in FEATURES.items() if list(feats) == names)
        return cls(alpha=np.asarray(vals), degree=degree, fit_info=fit_info)


def collect_samples(model, planner, plant, n, beta_max, seed, noise_cov=None,
                    x0=None, init_box=None):
    """Measured rollout errors of the trained model against the plant.

    Each sample: draw a start state and an age beta in [1, beta_max], plan
    beta actions from the embedded start (the controller's planned actions),
    apply them to the noisy plant, and compare the plant state against the
    recursive latent prediction. Diverged rollouts are discarded and counted.
    """
    from .dynamics import NoiseModel
    from .koopman import default_init_box

    if n < 1:
        raise ValueError("need n >= 1 samples")
    lows, highs = init_box if init_box is not None else default_init_box(plant)
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    x0 = np.zeros(plant.dim_x) if x0 is None else np.asarray(x0, dtype=float)
    z0 = model.embed_state(x0)
    rng = np.random.default_rng(seed)
    x_norms = np.empty(n)
    betas = np.empty(n, dtype=int)
    errs = np.empty(n)
    kept = 0
    discarded = 0
    while kept < n:
        x_start = rng.uniform(lows, highs)
        beta = int(rng.integers(1, beta_max + 1))
        noise = None
        if noise_cov is not None:
            noise = NoiseModel(noise_cov, seed=int(rng.integers(2**63)))
        plan = planner.plan(model.embed_state(x_start), z0, beta)
        x_true = x_start
        try:
            for k in range(beta):
                x_true = plant.step(x_true, plan.actions[k], noise)
        except PlantDivergedError:
            discarded += 1
            continue
        x_hat = model.predict_missing_state(x_start, list(plan.actions), beta)
        x_norms[kept] = np.linalg.norm(x_start)
        betas[kept] = beta
        errs[kept] = np.linalg.norm(x_hat - x_true)
        kept += 1
    return ErrorSamples(x_norm=x_norms, beta=betas, err=errs, discarded=discarded)


def fit_polynomial(samples: ErrorSamples, degree=2, ridge=1e-8):
    """Ordinary least squares over the degree's feature vector (no intercept,
    matching the surrogate form); ridge fallback on a near-singular Gram
    matrix."""
    F = _design(samples.x_norm, samples.beta, degree)
    if samples.n <= F.shape[1]:
        raise ValueError("need more samples than features")
    gram = F.T @ F
    rhs = F.T @ samples.err
    if np.linalg.cond(gram) > 1e12:
        gram = gram + ridge * np.trace(gram) / gram.shape[0] * np.eye(gram.shape[0])
    alpha = np.linalg.solve(gram, rhs)
    if not np.all(np.isfinite(alpha)):
        raise np.linalg.LinAlgError("rank-deficient design beyond ridge rescue")
    resid = F @ alpha - samples.err
    info = {"rmse": float(np.sqrt(np.mean(resid**2))),
            "mean_abs": float(np.mean(np.abs(resid))),
            "n": int(samples.n)}
    return ErrorPolyCoeffs(alpha=alpha, degree=degree, fit_info=info)


def select_degree(samples: ErrorSamples, degrees=(1, 2, 3), holdout=0.2, seed=0):
    """Fit each degree on a train split; lowest mean absolute holdout residual
    wins, ties broken toward the lower degree. Returns (degree, table)."""
    degrees = sorted(degrees)
    if len(degrees) < 2:
        raise ValueError("need at least two candidate degrees")
    rng = np.random.default_rng(seed)
    order = rng.permutation(samples.n)
    n_hold = max(1, int(round(holdout * samples.n)))
    hold, train = order[:n_hold], order[n_hold:]
    sub = lambda idx: ErrorSamples(x_norm=samples.x_norm[idx],
                                   beta=samples.beta[idx], err=samples.err[idx])
    train_s, hold_s = sub(train), sub(hold)
    table = []
    for d in degrees:
        coeffs = fit_polynomial(train_s, degree=d)
        pred = eval_error(coeffs, hold_s.x_norm, hold_s.beta)
        table.append({"degree": d,
                      "holdout_mean_abs": float(np.mean(np.abs(pred - hold_s.err))),
                      "train_mean_abs": coeffs.fit_info["mean_abs"]})
    best = min(table, key=lambda row: (row["holdout_mean_abs"], row["degree"]))
    return best["degree"], table


def eval_error(coeffs: ErrorPolyCoeffs, x_norm, beta):
    """Surrogate prediction error, clamped at zero."""
    F = _design(x_norm, beta, coeffs.degree)
    return np.maximum(F @ coeffs.alpha, 0.0)
