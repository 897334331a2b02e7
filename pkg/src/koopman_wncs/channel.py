"""Rician fading link statistics: gain sampling, SNR, Marcum-Q outage, and
minimum-power allocation.

All internal arithmetic is linear-scale; dB and dBm conversions happen once at
config-parse time (`ChannelParams.from_config`).
"""

import math
from dataclasses import dataclass

import numpy as np


class InvalidPowerError(ValueError):
    pass


class PowerBracketError(RuntimeError):
    """Bisection for the minimum power could not bracket the outage target."""

    def __init__(self, msg, lo, hi):
        super().__init__(f"{msg} (search bounds [{lo:.3e}, {hi:.3e}] W)")
        self.lo = lo
        self.hi = hi


@dataclass
class ChannelParams:
    kappa: float            # Rician LOS factor, >= 0
    n0: float               # noise PSD, W/Hz
    bandwidth: float        # Hz
    gamma0: float           # SNR decode threshold, linear
    outage_target: float    # target outage probability in (0, 1)

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.n0 <= 0 or self.bandwidth <= 0 or self.gamma0 <= 0:
            raise ValueError("n0, bandwidth, gamma0 must be positive")
        if not 0.0 < self.outage_target < 1.0:
            raise ValueError("outage_target must lie in (0, 1)")

    @classmethod
    def from_config(cls, kappa, n0_dbm_per_hz, bandwidth_hz, gamma0_db, outage_target):
        """Build from config units (dBm/Hz noise PSD, dB SNR threshold)."""
        return cls(
            kappa=float(kappa),
            n0=10.0 ** ((float(n0_dbm_per_hz) - 30.0) / 10.0),
            bandwidth=float(bandwidth_hz),
            gamma0=10.0 ** (float(gamma0_db) / 10.0),
            outage_target=float(outage_target),
        )

    @property
    def noise_power(self):
        return self.n0 * self.bandwidth


@dataclass
class LinkBudget:
    p: float        # transmission power, W
    outage: float   # achieved outage probability at p


def sample_gain(kappa, rng, size=None):
    """Rician channel coefficient: sqrt(k/(1+k)) e^{j phi} + sqrt(1/(1+k)) CN(0,1)."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    phi = rng.uniform(0.0, 2.0 * np.pi, size=size)
    scatter = (rng.standard_normal(size=size) + 1j * rng.standard_normal(size=size)) \
        / np.sqrt(2.0)
    return np.sqrt(kappa / (1.0 + kappa)) * np.exp(1j * phi) \
        + np.sqrt(1.0 / (1.0 + kappa)) * scatter


def snr(p, h, n0, bandwidth):
    """Instantaneous SNR p|h|^2 / (N0 w)."""
    if np.any(np.asarray(p) < 0):
        raise InvalidPowerError("transmission power must be >= 0")
    return p * np.abs(h) ** 2 / (n0 * bandwidth)


def _marcum_q1_split(a, b, tol=1e-10, max_terms=100000):
    """Return (Q1(a,b), 1-Q1(a,b)) via the canonical noncentral-chi-square series.

    Q1(a,b) = sum_j Pois(j; a^2/2) * P(Erlang(j+1) > b^2/2). Both the sum and
    its complement are accumulated from positive terms, so the complement keeps
    full relative accuracy when Q1 is close to 1. Truncation error is bounded
    by the residual Poisson mass, which is driven below `tol`.
    """
    if a < 0 or b < 0:
        raise ValueError("marcum_q1 requires a >= 0 and b >= 0")
    if b == 0.0:
        return 1.0, 0.0
    lam = 0.5 * a * a
    y = 0.5 * b * b
    # Erlang survival S_j = e^-y sum_{m<=j} y^m/m!; complement tracked directly
    # so 1-Q1 is a sum of positive terms (no cancellation for small outages).
    erl_term = math.exp(-y)
    surv = erl_term
    comp = -math.expm1(-y)
    pois = math.exp(-lam)
    pois_cum = pois
    q = pois * surv
    q_comp = pois * comp
    j = 0
    while 1.0 - pois_cum > tol and j < max_terms:
        j += 1
        erl_term *= y / j
        surv += erl_term
        comp = max(comp - erl_term, 0.0)
        pois *= lam / j
        pois_cum += pois
        q += pois * surv
        q_comp += pois * comp
    # Residual Poisson mass, weighted by the last survival/CDF values; the
    # remaining error is below tol on both sides.
    tail = max(1.0 - pois_cum, 0.0)
    q += tail * surv
    q_comp += tail * comp
    return min(q, 1.0), min(q_comp, 1.0)


def marcum_q1(a, b, tol=1e-10):
    """Generalized Marcum Q-function of order 1, truncation error <= tol."""
    return _marcum_q1_split(a, b, tol=tol)[0]


def outage_prob(p, params: ChannelParams):
    """Outage probability 1 - Q1(sqrt(2k), sqrt(2(1+k) g0 N0 w / p))."""
    if p <= 0:
        raise InvalidPowerError("outage probability needs p > 0")
    a = math.sqrt(2.0 * params.kappa)
    b = math.sqrt(2.0 * (1.0 + params.kappa) * params.gamma0 * params.noise_power / p)
    return _marcum_q1_split(a, b)[1]


def required_power(params: ChannelParams, rel_tol=1e-6, max_expand=200):
    """Smallest power with outage <= target, by bisection to `rel_tol`.

    Returns the feasible (upper) endpoint of the final bracket, so the achieved
    outage sits just below the target.
    """
    target = params.outage_target
    p0 = params.gamma0 * params.noise_power
    hi = p0
    n = 0
    while outage_prob(hi, params) > target:
        hi *= 4.0
        n += 1
        if n > max_expand:
            raise PowerBracketError("no feasible power found", p0, hi)
    lo = hi
    n = 0
    while outage_prob(lo, params) <= target:
        lo /= 4.0
        n += 1
        if n > max_expand:
            # outage stays below target for arbitrarily small p (target ~ 1)
            lo = hi * 1e-300
            break
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if outage_prob(mid, params) <= target:
            hi = mid
        else:
            lo = mid
    return LinkBudget(p=hi, outage=outage_prob(hi, params))


def transmit(p, params: ChannelParams, rng):
    """Sample one fading realization; True iff the packet decodes (SNR >= g0)."""
    if p < 0:
        raise InvalidPowerError("transmission power must be >= 0")
    if p == 0.0:
        return False
    h = sample_gain(params.kappa, rng)
    return bool(snr(p, h, params.n0, params.bandwidth) >= params.gamma0)
