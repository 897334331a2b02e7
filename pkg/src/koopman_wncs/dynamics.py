"""Plant models: spring-coupled double pendulum, cartpole, and the quadratic
control cost.

The pendulum is integrated with RK4 at a fixed sampling interval; the cartpole
uses the classic explicit-Euler step so it matches the conventional gym-style
environment. Process noise is one zero-mean Gaussian draw per step.
"""

from dataclasses import dataclass, field

import numpy as np


class PlantDivergedError(RuntimeError):
    """State left the finite range; carries the last finite state."""

    def __init__(self, last_state):
        super().__init__("plant state diverged (non-finite)")
        self.last_state = np.asarray(last_state, dtype=float)


def input_nonlinearity(u, kind):
    """Actuator torque shaping h'(u): 'tanh' -> tanh(u), 'cubic' -> u - u**3/3."""
    if kind == "tanh":
        return np.tanh(u)
    if kind == "cubic":
        return u - u**3 / 3.0
    raise ValueError(f"unknown input nonlinearity {kind!r}")


@dataclass
class PendulumParams:
    m1: float = 2.0          # kg
    m2: float = 2.0          # kg
    j1: float = 0.5          # kg m^2
    j2: float = 0.5          # kg m^2
    g: float = 10.0          # m s^-2
    length: float = 0.5      # spring length l' (m)
    b: float = 0.4           # pendulum separation (m)
    k: float = 2.0           # spring constant (N/m)
    s: float = 0.5           # pendulum height (m)
    h_kind: str = "tanh"     # input nonlinearity selector

    def __post_init__(self):
        for name in ("m1", "m2", "j1", "j2", "length", "b", "k", "s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.h_kind not in ("tanh", "cubic"):
            raise ValueError(f"h_kind must be 'tanh' or 'cubic', got {self.h_kind!r}")


@dataclass
class NoiseModel:
    """Additive Gaussian step noise with covariance `cov`; owns its RNG stream."""

    cov: np.ndarray
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)
    _sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        eig, vec = np.linalg.eigh(cov)
        if eig.min() < -1e-12:
            raise ValueError("covariance must be positive semidefinite")
        self.cov = cov
        self._sqrt = vec * np.sqrt(np.clip(eig, 0.0, None))
        self.rng = np.random.default_rng(self.seed)

    @classmethod
    def isotropic(cls, dim, sigma2, seed=0):
        return cls(cov=sigma2 * np.eye(dim), seed=seed)

    def sample(self):
        return self._sqrt @ self.rng.standard_normal(self.cov.shape[0])

    def spawn(self, index):
        """Independent stream for a parallel episode/trajectory."""
        child = np.random.SeedSequence(self.seed).spawn(index + 1)[index]
        out = NoiseModel(cov=self.cov.copy(), seed=self.seed)
        out.rng = np.random.default_rng(child)
        return out


def double_pendulum_deriv(x, u, p: PendulumParams):
    """Time derivative [th1', th1'', th2', th2''] of the spring-coupled pair.

    Accepts (..., 4) states and (..., 2) torques; broadcasts over leading axes.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    th1, w1, th2, w2 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    h1 = input_nonlinearity(u[..., 0], p.h_kind)
    h2 = input_nonlinearity(u[..., 1], p.h_kind)
    spring = p.k * p.s**2 / 4.0
    couple = p.k * p.s / 2.0 * (p.length - p.b)
    dw1 = ((p.m1 * p.g * p.s - spring) / p.j1) * np.sin(th1) \
        + couple / p.j1 + h1 / p.j1 + (spring / p.j1) * np.sin(th2)
    dw2 = ((p.m2 * p.g * p.s + spring) / p.j2) * np.sin(th2) \
        - couple / p.j2 + h2 / p.j2 + (spring / p.j2) * np.sin(th1)
    return np.stack([w1, dw1, w2, dw2], axis=-1)


class DoublePendulum:
    """Spring-coupled double pendulum, RK4-discretized at interval dt."""

    dim_x = 4
    dim_u = 2

    def __init__(self, params: PendulumParams | None = None, dt=0.02, u_max=5.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.params = params if params is not None else PendulumParams()
        self.dt = float(dt)
        self.u_max = float(u_max)

    def deriv(self, x, u):
        return double_pendulum_deriv(x, u, self.params)

    def step(self, x, u, noise: NoiseModel | None = None):
        """One RK4 step (torque held over dt), plus one optional noise draw."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        dt = self.dt
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = self.deriv(x, u)
            k2 = self.deriv(x + 0.5 * dt * k1, u)
            k3 = self.deriv(x + 0.5 * dt * k2, u)
            k4 = self.deriv(x + dt * k3, u)
            x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if noise is not None:
                x_next = x_next + noise.sample()
        if not np.all(np.isfinite(x_next)):
            raise PlantDivergedError(x)
        return x_next


class CartPole:
    """Classic cartpole with continuous force input, explicit Euler at 0.02 s.

    State [cart position m, cart velocity m/s, pole angle rad, angular velocity
    rad/s]; matches the conventional gym formulation (pole is a uniform rod of
    half-length `length`).
    """

    dim_x = 4
    dim_u = 1

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5            # half pole length
    dt = 0.02

    def __init__(self, u_max=10.0):
        self.u_max = float(u_max)
        self.total_mass = self.masscart + self.masspole
        self.polemass_length = self.masspole * self.length

    def deriv(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        force = u[..., 0]
        _, x_dot, theta, theta_dot = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        costh, sinth = np.cos(theta), np.sin(theta)
        temp = (force + self.polemass_length * theta_dot**2 * sinth) / self.total_mass
        theta_acc = (self.gravity * sinth - costh * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costh**2 / self.total_mass))
        x_acc = temp - self.polemass_length * theta_acc * costh / self.total_mass
        return np.stack([x_dot, x_acc, theta_dot, theta_acc], axis=-1)

    def step(self, x, u, noise: NoiseModel | None = None):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            x_next = x + self.dt * self.deriv(x, u)
            if noise is not None:
                x_next = x_next + noise.sample()
        if not np.all(np.isfinite(x_next)):
            raise PlantDivergedError(x)
        return x_next


def cartpole_step(x, u, plant: CartPole | None = None):
    """One noise-free Euler step of the classic cartpole equations."""
    return (plant or CartPole()).step(x, u)


def plant_step(plant, x, u, noise: NoiseModel | None = None):
    """Advance any plant one sampling interval; see DoublePendulum/CartPole."""
    return plant.step(x, u, noise)


def control_cost(x_tilde, u_tilde, Q, B, x0):
    """Quadratic stage cost (x̃-x0)^T Q (x̃-x0) + ũ^T B ũ."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    u_tilde = np.asarray(u_tilde, dtype=float)
    Q = np.asarray(Q, dtype=float)
    B = np.asarray(B, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if Q.shape != (x_tilde.shape[-1],) * 2 or B.shape != (u_tilde.shape[-1],) * 2:
        raise ValueError("weight matrix dimensions do not match state/input")
    dx = x_tilde - x0
    return float(dx @ Q @ dx + u_tilde @ B @ u_tilde)
