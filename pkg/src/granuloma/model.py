"""Model parameters and every closed-form constant of the stability theory.

The four-field system couples healthy macrophages u, bacteria v, infected
macrophages w and T cells z.  Around the infection-free state (beta, 0, 0, 0)
the basic reproduction number R0 = (mu*beta + 1)/beta decides the regime:
R0 < 1 (with beta > 1) admits a stability window (xi, delta, gamma) and
exponential envelopes whose constants are assembled here from S-integrals,
semigroup working constants k_hat, and the initial-data sizes alpha and
||grad v0||_q.

Everything in this module is a pure function of its arguments; nothing here
touches a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

_EXP_MAX = 709.0  # largest argument math.exp accepts before overflow


class FKind(str, Enum):
    SATURATING = "saturating"   # f(w) = w / (1 + w)
    LINEAR = "linear"           # f(w) = w

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModelParams:
    beta: float
    mu: float
    f_kind: FKind = FKind.LINEAR
    n: int = 1
    q: float = 4.0

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not (math.isfinite(self.q) and self.q > self.n):
            raise ValueError(f"q must satisfy q > n, got q={self.q}, n={self.n}")
        if not isinstance(self.f_kind, FKind):
            object.__setattr__(self, "f_kind", FKind(self.f_kind))

    def f(self, s):
        """T-cell stimulation rate; satisfies 0 <= f(s) <= s for s >= 0."""
        if self.f_kind is FKind.SATURATING:
            return s / (1.0 + s)
        return s


@dataclass(frozen=True)
class StabilityWindow:
    """Admissible (xi, delta, gamma) triple together with the spectral gap."""

    xi: float
    delta: float
    gamma: float
    lam: float  # first nonzero Neumann eigenvalue of -Laplacian


def reproduction_number(p: ModelParams) -> float:
    return (p.mu * p.beta + 1.0) / p.beta


def xi_interval(p: ModelParams):
    """Open interval (mu, (beta-1)/beta), or None when R0 >= 1.

    Nonempty exactly when the infection-free state is subcritical
    (R0 < 1, which forces beta > 1).
    """
    if p.beta <= 1.0 or reproduction_number(p) >= 1.0:
        return None
    return (p.mu, (p.beta - 1.0) / p.beta)


def gamma_sup(p: ModelParams, xi: float, delta: float, lam: float) -> float:
    """Supremum of admissible decay rates: min{delta, 1 - mu/xi, lambda}."""
    iv = xi_interval(p)
    if iv is None:
        raise ValueError("no admissible window: reproduction number >= 1")
    if not (iv[0] < xi < iv[1]):
        raise ValueError(f"xi={xi} outside the admissible interval {iv}")
    cap = (1.0 - xi) * p.beta - 1.0
    if not (0.0 < delta < cap):
        raise ValueError(f"delta={delta} outside (0, {cap})")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return min(delta, 1.0 - p.mu / xi, lam)


def validate_window(p: ModelParams, w: StabilityWindow):
    sup = gamma_sup(p, w.xi, w.delta, w.lam)   # re-raises on bad xi/delta
    if not (0.0 < w.gamma < sup):
        raise ValueError(f"gamma={w.gamma} outside (0, {sup})")
    return w


def make_window(p: ModelParams, lam: float, xi: float | None = None,
                delta: float | None = None,
                gamma: float | None = None) -> StabilityWindow:
    """Fill unspecified window entries with the default heuristic.

    xi sits at the midpoint of its interval, delta halfway to its cap, and
    gamma at 0.9 of the resulting supremum.
    """
    iv = xi_interval(p)
    if iv is None:
        raise ValueError("no admissible window: reproduction number >= 1")
    if xi is None:
        xi = 0.5 * (iv[0] + iv[1])
    if delta is None:
        delta = 0.5 * ((1.0 - xi) * p.beta - 1.0)
    if gamma is None:
        gamma = 0.9 * gamma_sup(p, xi, delta, lam)
    return validate_window(p, StabilityWindow(xi, delta, gamma, lam))


def s_integral(a: float, rate: float) -> float:
    """int_0^inf (1 + sigma^a) e^(-rate*sigma) dsigma for a in (-1, 0].

    Closed form 1/rate + Gamma(a+1) * rate^(-(a+1)); the integral diverges
    for a <= -1.
    """
    if not (-1.0 < a <= 0.0):
        raise ValueError(f"a must lie in (-1, 0], got {a}")
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValueError(f"rate must be positive, got {rate}")
    return 1.0 / rate + math.gamma(a + 1.0) * rate ** (-(a + 1.0))


@dataclass(frozen=True)
class EnvelopeConstants:
    alpha: float
    eta: float
    k_hat: tuple[float, float, float, float]
    S1: float
    S2: float
    S3: float
    c_K: float
    t_star: float
    M: float
    M_tilde: float
    C1: float
    C2: float
    D: float
    eps1: float
    eps2: float
    zeta: float
    rigorous: bool = False


def _exp(x: float) -> float:
    return math.exp(x) if x < _EXP_MAX else math.inf


def envelope_constants(p: ModelParams, w: StabilityWindow, alpha: float,
                       eta: float, grad_v0_q: float,
                       k_hat: tuple[float, float, float, float],
                       domain_volume: float, w_star: float,
                       rigorous: bool = False) -> EnvelopeConstants:
    """Assemble the full lemma-constant set for the decay envelopes.

    k_hat are working values of the four semigroup constants; unless they
    come from a rigorous source the result is flagged non-rigorous.  w_star
    is the test-function ceiling that defines the suppression level
    zeta = xi * w_star.
    """
    validate_window(p, w)
    if w.gamma >= 1.0:
        raise ValueError("gamma must be < 1 (the 1/(1-gamma) factor)")
    if w.gamma >= w.lam:
        raise ValueError("gamma must be < lambda (S1 convergence)")
    if alpha < 0 or eta <= 0 or grad_v0_q < 0:
        raise ValueError("need alpha >= 0, eta > 0, grad_v0_q >= 0")
    if len(k_hat) != 4 or any(k < 0 for k in k_hat):
        raise ValueError("k_hat must be four nonnegative reals")
    if domain_volume <= 0 or w_star <= 0:
        raise ValueError("domain_volume and w_star must be positive")

    _, k2, k3, k4 = k_hat
    beta, mu, n, q = p.beta, p.mu, p.n, p.q
    xi, delta, gamma, lam = w.xi, w.delta, w.gamma, w.lam

    S1 = s_integral(-0.5, lam - gamma)
    S2 = s_integral(-0.5 - n / (2.0 * q), 1.0)
    S3 = s_integral(-0.5 - n / (2.0 * q), lam + 1.0 - gamma)

    c_K = k3 * k4 * (alpha + beta + eta) * S2
    drive = alpha + c_K + eta
    sink = beta - (1.0 + delta) / (1.0 - xi)   # > 0 for any valid window
    t_star = 0.0 if drive <= sink else math.log(drive / sink) / gamma

    M = alpha + beta + eta + c_K * grad_v0_q - 1.0
    M_tilde = (1.0 + k3 * k4 * S2) * (alpha + beta + eta)

    bump = _exp((1.0 + gamma) * t_star)
    vol_q = domain_volume ** (1.0 / q)
    C1 = k2 * S1 * vol_q * (M + mu / xi) * bump
    C2 = (k2 * k4 * S1 * S3 * vol_q * (M + mu / xi)
          + 1.0 / (1.0 - gamma)) * (M + 1.0) * bump
    D = (k3 * k4 * S2 * c_K
         + (k2 * k4 * S1 * S3 * vol_q * M_tilde
            + 1.0 / (1.0 - gamma)) * M_tilde * bump)

    eps1 = min(1.0, eta / (2.0 * D)) if D > 0 else 1.0
    zeta = xi * w_star
    if n <= 2:
        eps2 = eps1
    else:
        eps2 = min(eps1, zeta * _exp(-(1.0 + gamma) * t_star))

    return EnvelopeConstants(alpha=alpha, eta=eta, k_hat=tuple(k_hat),
                             S1=S1, S2=S2, S3=S3, c_K=c_K, t_star=t_star,
                             M=M, M_tilde=M_tilde, C1=C1, C2=C2, D=D,
                             eps1=eps1, eps2=eps2, zeta=zeta,
                             rigorous=rigorous)


def envelope_g(t: float, c: EnvelopeConstants, w: StabilityWindow,
               grad_v0_q: float) -> float:
    """Decay envelope for ||u - beta||_inf; strictly decreasing to zero."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return (c.alpha * math.exp(-t)
            + c.c_K * grad_v0_q * math.exp(-w.lam * t)
            + c.eta * math.exp(-w.gamma * t))


def vw_envelope(t: float, norm_v0_xi_w0: float, gamma: float,
                t_star: float) -> float:
    """Decay envelope for ||v + xi*w||_inf.

    The exponents are combined before exponentiating so the envelope stays
    finite at large t even when e^((1+gamma)t*) alone would overflow.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return norm_v0_xi_w0 * _exp((1.0 + gamma) * t_star - gamma * t)
