"""Lyapunov drift-plus-penalty sensor scheduling.

Per-slot state: virtual transmission queue Q_a, age of information beta, and
sensor battery. The per-slot rule minimizes

    V*Gamma + Q_a*(a - Gamma) - p_b*(a*p_sc + p_s) + beta_prev*(1 - a)

over the vertices of {a <= Gamma <= 1, a in {0,1}}; the objective is linear in
each variable, so vertex enumeration is exact and replaces the SDP relaxation.
The quadratic-in-a coefficients of the error constraint are still computed and
logged for parity with the relaxed formulation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errmodel import ErrorPolyCoeffs, eval_error


@dataclass
class SchedulerConfig:
    V: float = 10.0                 # drift-penalty weight
    lam: float = 1.0                # transmission weight in the total cost
    delta: float = 0.3              # prediction-error threshold
    p_sense: float = 1e-5           # sensing power per slot, W
    recharge_period: int = 0        # battery recharge period T' (0 = never)
    battery_init: float = 1.0       # p_b0, W

    def __post_init__(self):
        if self.V < 0:
            raise ValueError("V must be >= 0")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass
class SchedulerState:
    x_last: np.ndarray              # last state delivered to the controller
    Q_a: float = 0.0
    beta: int = 0
    battery: float = 1.0
    t: int = 0


@dataclass
class Decision:
    a: int
    gamma: float
    objective: float
    eps_skip: float                 # surrogate error if this slot is skipped
    starved: bool = False
    forced: bool = False            # a=1 forced by the error constraint
    quad_coeffs: tuple = (0.0, 0.0, 0.0)


def aoi_update(beta_prev, a):
    """beta = 1 + (1 - a) beta_prev."""
    if a not in (0, 1):
        raise ValueError("a must be binary")
    return 1 + (1 - a) * beta_prev


def queue_update(q_a, a, gamma):
    """Q_a' = max(Q_a - Gamma, 0) + a."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    return max(q_a - gamma, 0.0) + a


def battery_update(p_b, a, p_sc, p_sense, t, recharge_period=0, battery_init=1.0):
    """p_b' = max(p_b - a p_sc - p_sense, 0), reset to battery_init when the
    slot index hits the recharge period."""
    p_next = max(p_b - a * p_sc - p_sense, 0.0)
    if recharge_period and (t + 1) % recharge_period == 0:
        p_next = battery_init
    return p_next


def drift_penalty_objective(q_a, beta_prev, p_b, a, gamma, V, p_sc, p_sense):
    """Upper-bound objective of the per-slot drift-plus-penalty problem."""
    return V * gamma + q_a * (a - gamma) - p_b * (a * p_sc + p_sense) \
        + beta_prev * (1 - a)


def a0_feasible(coeffs: ErrorPolyCoeffs, x_last, beta_prev, delta):
    """True iff skipping keeps the expected prediction error within delta.

    Skipping makes the age 1 + beta_prev; scheduling zeroes the error term, so
    a=1 is always feasible for this constraint.
    """
    x_norm = float(np.linalg.norm(x_last))
    return float(eval_error(coeffs, x_norm, 1 + beta_prev)) <= delta


def error_quad_coeffs(coeffs: ErrorPolyCoeffs, x_last, beta_prev):
    """Coefficients (c1, c2, c3) of the relaxed error constraint written as
    c1 a^2 + c2 a + c3 <= delta, from substituting the age update into the
    surrogate; the cubic remainder of the relaxation is dropped. Logged for
    parity with the SDP route, not used by the decision."""
    r = float(np.linalg.norm(x_last))
    alpha = coeffs.alpha
    # surrogate in (r, beta): pad degree-1 fits with zero quadratic terms
    a1, a2 = alpha[0], alpha[1]
    a3 = alpha[2] if coeffs.degree >= 2 else 0.0
    a4 = alpha[3] if coeffs.degree >= 2 else 0.0
    a5 = alpha[4] if coeffs.degree >= 2 else 0.0
    bp = float(beta_prev)
    # eps((1-a)) = A s + B s^2 + C s^3 with s = 1 - a; the cubic term is
    # folded into the quadratic coefficient (a^3 = a^2 on binary a), keeping
    # both endpoint values exact
    A = a1 * r + a2 + a3 * r * r + a4 + a5 * r
    Bc = bp * (a2 + 2.0 * a4 + a5 * r)
    C = a4 * bp * bp
    c3 = A + Bc + C
    c2 = -(A + 2.0 * Bc + 3.0 * C)
    c1 = Bc + 2.0 * C
    return c1, c2, c3


def decide(state: SchedulerState, cfg: SchedulerConfig, coeffs: ErrorPolyCoeffs,
           p_sc):
    """Per-slot decision by vertex enumeration over {(0,0), (0,1), (1,1)}.

    a=0 is discarded when the skip error exceeds delta; a=1 is discarded when
    the battery cannot pay for transmission plus sensing. With neither branch
    available the sensor starves: returns (0, 0) flagged.
    """
    eps_skip = float(eval_error(coeffs, float(np.linalg.norm(state.x_last)),
                                1 + state.beta))
    skip_ok = eps_skip <= cfg.delta
    tx_ok = state.battery >= p_sc + cfg.p_sense
    quad = error_quad_coeffs(coeffs, state.x_last, state.beta)

    candidates = []
    if skip_ok:
        candidates += [(0, 0.0), (0, 1.0)]
    if tx_ok:
        candidates.append((1, 1.0))
    if not candidates:
        return Decision(a=0, gamma=0.0,
                        objective=drift_penalty_objective(
                            state.Q_a, state.beta, state.battery, 0, 0.0,
                            cfg.V, p_sc, cfg.p_sense),
                        eps_skip=eps_skip, starved=True, quad_coeffs=quad)
    best = None
    for a, gamma in candidates:
        obj = drift_penalty_objective(state.Q_a, state.beta, state.battery,
                                      a, gamma, cfg.V, p_sc, cfg.p_sense)
        if best is None or obj < best[0]:
            best = (obj, a, gamma)
    obj, a, gamma = best
    return Decision(a=a, gamma=gamma, objective=obj, eps_skip=eps_skip,
                    forced=(a == 1 and not skip_ok), quad_coeffs=quad)
