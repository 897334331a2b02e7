"""Embedding-space LQR: lifted weights, fixed-point Riccati solution, optimal
action decoding, horizon planning for the actuator cache, and the DKUC/DKAC
baseline controllers.
"""

from dataclasses import dataclass, field

import numpy as np

from .koopman import KoopmanModel


class UnstabilizableModelError(RuntimeError):
    def __init__(self, iterations, update_norm, rho_open):
        super().__init__(
            "Riccati iteration did not converge "
            f"(iters {iterations}, last update {update_norm:.3e}, "
            f"open-loop spectral radius {rho_open:.4f})")
        self.iterations = iterations
        self.update_norm = update_norm
        self.rho_open = rho_open


@dataclass
class LiftedWeights:
    Q_hat: np.ndarray
    B_hat: np.ndarray


@dataclass
class LqrSolution:
    P: np.ndarray
    K: np.ndarray               # feedback gain, (dim_w, dim_z)
    residual: float
    iterations: int
    spectral_radius: float      # of the closed latent loop K_x - K_u K


def lift_weights(Q, B, dim_z):
    """Q_hat = blockdiag(Q, 0), B_hat = B.

    Exact because the state occupies the first D latent coordinates, so
    (z - z0)^T Q_hat (z - z0) equals (x - x0)^T Q (x - x0) whenever both sides
    share the passthrough structure.
    """
    Q = np.asarray(Q, dtype=float)
    B = np.asarray(B, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be square")
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B must be square")
    d = Q.shape[0]
    if dim_z < d:
        raise ValueError("latent dimension smaller than state dimension")
    Q_hat = np.zeros((dim_z, dim_z))
    Q_hat[:d, :d] = Q
    return LiftedWeights(Q_hat=Q_hat, B_hat=B.copy())


def solve_dare(K_x, K_u, Q_hat, B_hat, tol=1e-10, max_iter=10000, P0=None):
    """Fixed-point Riccati iteration with symmetrization each step.

    Stops when the update norm drops below tol relative to ||P||_F; failure to
    converge raises with spectral diagnostics.
    """
    K_x = np.asarray(K_x, dtype=float)
    K_u = np.asarray(K_u, dtype=float)
    Q_hat = np.asarray(Q_hat, dtype=float)
    B_hat = np.asarray(B_hat, dtype=float)
    P = Q_hat.copy() if P0 is None else np.asarray(P0, dtype=float).copy()
    converged = False
    delta = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        PKx = P @ K_x
        PKu = P @ K_u
        S = B_hat + K_u.T @ PKu
        G = np.linalg.solve(S, K_u.T @ PKx)
        P_next = Q_hat + K_x.T @ PKx - (K_u.T @ PKx).T @ G
        P_next = 0.5 * (P_next + P_next.T)
        delta = float(np.linalg.norm(P_next - P))
        P = P_next
        if delta <= tol * max(1.0, float(np.linalg.norm(P))):
            converged = True
            break
    if not converged:
        rho_open = float(np.max(np.abs(np.linalg.eigvals(K_x))))
        raise UnstabilizableModelError(it, delta, rho_open)
    S = B_hat + K_u.T @ P @ K_u
    K = np.linalg.solve(S, K_u.T @ P @ K_x)
    residual = float(np.linalg.norm(
        P - (Q_hat + K_x.T @ P @ K_x - K_x.T @ P @ K_u @ K)))
    rho = float(np.max(np.abs(np.linalg.eigvals(K_x - K_u @ K))))
    return LqrSolution(P=P, K=K, residual=residual, iterations=it,
                       spectral_radius=rho)


def optimal_action(model: KoopmanModel, sol: LqrSolution, z, z0, u_max=None):
    """w* = -K (z - z0); decoded to the original action space and clipped."""
    z = np.asarray(z, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    w = -sol.K @ (z - z0)
    u = model.decode_action(w, x=z[:model.dim_x])
    if u_max is not None:
        u = np.clip(u, -u_max, u_max)
    return w, u


def equilibrium_action(model: KoopmanModel, z0):
    """Least-squares latent action holding z0 stationary: argmin_w
    ||(I - K_x) z0 - K_u w||.

    The regulation target is generally not an equilibrium of the unforced
    plant (the spring-coupled pendulum carries a constant drift), and pure
    proportional feedback then parks at an offset where feedback torque
    balances the drift. This feedforward removes that offset to first order.
    """
    z0 = np.asarray(z0, dtype=float)
    rhs = (np.eye(model.dim_z) - model.K_x) @ z0
    w_eq, *_ = np.linalg.lstsq(model.K_u, rhs, rcond=None)
    return w_eq


@dataclass
class Plan:
    """Cached horizon: decoded actions plus their latent counterparts, so the
    controller belief can advance with whatever entry the actuator replays."""
    actions: np.ndarray      # (n_c, dim_u), clipped
    latents: np.ndarray      # (n_c, dim_w)
    saturated: bool = False


class LqrPlanner:
    """Planner for the proposed and DKUC models: one DARE solve, fixed gain.

    `discount` < 1 solves the discounted regulator (K_x, K_u scaled by
    sqrt(discount)). Identified latent models carry weakly-unstable
    off-manifold modes that no finite dataset pins down; an undiscounted
    cheap-control design spends unbounded gain on them, while a mild discount
    leaves the strongly unstable physical modes controlled and the gain sane.
    """

    def __init__(self, model: KoopmanModel, Q, B, tol=1e-10, max_iter=10000,
                 discount=0.9, feedforward=True):
        self.model = model
        self.weights = lift_weights(Q, B, model.dim_z)
        s = np.sqrt(discount)
        self.sol = solve_dare(s * model.K_x, s * model.K_u,
                              self.weights.Q_hat, self.weights.B_hat,
                              tol=tol, max_iter=max_iter)
        self.u_max = float(model.meta.get("u_max", np.inf))
        self.feedforward = feedforward

    def plan(self, z, z0, n_c):
        """Rolls the belief with the re-encoded applied action rather than the
        raw LQR latent action: w* can leave the encoder's reachable set when
        the decoded torque clips/saturates, and a belief driven by infeasible
        latent pushes diverges from any trajectory the plant can realize."""
        model = self.model
        z = np.asarray(z, dtype=float).copy()
        w_eq = equilibrium_action(model, z0) if self.feedforward \
            else np.zeros(model.dim_w)
        actions = np.empty((n_c, model.dim_u))
        latents = np.empty((n_c, model.dim_w))
        for k in range(n_c):
            w = w_eq - self.sol.K @ (z - z0)
            u = model.decode_action(w, x=z[:model.dim_x])
            u = np.clip(u, -self.u_max, self.u_max)
            w_applied = model.embed_action(u)
            actions[k] = u
            latents[k] = w_applied
            z = model.latent_step(z, w_applied)
        return Plan(actions=actions, latents=latents)


class DkacPlanner:
    """Per-step LQR with effective input matrix K_u diag(a(x)); the latent
    action a(x) * u drives the belief. The gain network is frozen at the
    current believed state over the planning horizon."""

    def __init__(self, model: KoopmanModel, Q, B, tol=1e-10, max_iter=10000,
                 discount=0.9, feedforward=True):
        if model.kind != "dkac":
            raise ValueError("DkacPlanner requires a dkac model")
        self.model = model
        self.weights = lift_weights(Q, B, model.dim_z)
        self.tol = tol
        self.max_iter = max_iter
        self.discount = discount
        self.u_max = float(model.meta.get("u_max", np.inf))
        self.feedforward = feedforward
        self._warm_P = None
        self.sol = None

    def plan(self, z, z0, n_c):
        model = self.model
        z = np.asarray(z, dtype=float).copy()
        gain = model.action_gain(z[:model.dim_x])
        M = model.K_u * gain[None, :]
        s = np.sqrt(self.discount)
        self.sol = solve_dare(s * model.K_x, s * M,
                              self.weights.Q_hat, self.weights.B_hat,
                              tol=self.tol, max_iter=self.max_iter, P0=self._warm_P)
        self._warm_P = self.sol.P
        if self.feedforward:
            rhs = (np.eye(model.dim_z) - model.K_x) @ np.asarray(z0, dtype=float)
            u_eq, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        else:
            u_eq = np.zeros(model.dim_u)
        actions = np.empty((n_c, model.dim_u))
        latents = np.empty((n_c, model.dim_w))
        saturated = bool(np.any(np.abs(gain) < 1e-6))
        for k in range(n_c):
            u = u_eq - self.sol.K @ (z - z0)
            u = np.clip(u, -self.u_max, self.u_max)
            w = gain * u
            actions[k] = u
            latents[k] = w
            z = model.latent_step(z, w)
        return Plan(actions=actions, latents=latents, saturated=saturated)


def make_planner(model: KoopmanModel, Q, B, **kw):
    if model.kind == "dkac":
        return DkacPlanner(model, Q, B, **kw)
    return LqrPlanner(model, Q, B, **kw)


def plan_horizon(model: KoopmanModel, sol: LqrSolution, z, z0, n_c, u_max=None):
    """Decoded actions for the next n_c steps under the nominal latent loop."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    z = np.asarray(z, dtype=float).copy()
    out = []
    for _ in range(n_c):
        w, u = optimal_action(model, sol, z, z0, u_max=u_max)
        out.append(u)
        z = model.latent_step(z, w)
    return out


def baseline_action(kind, model: KoopmanModel, Q, B, z, z0, u_max=None):
    """Single-slot action for a baseline controller ('dkuc' or 'dkac')."""
    kind = kind.lower()
    if kind not in ("dkuc", "dkac"):
        raise ValueError("baseline kind must be 'dkuc' or 'dkac'")
    if model.kind != kind:
        raise ValueError(f"model kind {model.kind!r} does not match {kind!r}")
    planner = make_planner(model, Q, B)
    if u_max is not None:
        planner.u_max = float(u_max)
    return planner.plan(z, z0, 1).actions[0]
