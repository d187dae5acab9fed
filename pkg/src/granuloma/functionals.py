"""Weighted test-function machinery for the T-cell suppression estimate.

The z-field energy argument integrates z^p against phi(w) = (2w* - y)^(-ell),
which is dissipative once ||v + xi*w||_inf drops below zeta = xi*w*.  The
coercivity constant kappa and the admissible ceiling b0 for w* are computed
here, together with the trajectory functionals (v + xi*w and the integral of
z^p phi(w)) that the diagnostics monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import BoxDomain, SimState
from .model import ModelParams


@dataclass(frozen=True)
class TestFunctionParams:
    p: float        # Lebesgue exponent for z
    ell: float
    w_star: float   # L-inf smallness level for w
    b0: float       # supremum of admissible w_star for this (p, ell)
    kappa: float
    zeta: float     # xi * w_star


def _bracket(p: float, ell: float, w_star: float) -> float:
    """Second admissibility condition; kappa is positive iff this is."""
    den = ell * (ell + 1.0 - 2.0 * p * w_star)
    if den <= 0.0:
        return -math.inf
    return p - 1.0 - (p * ell * ell + p * (p - 1.0) ** 2 * w_star * w_star) / den


def wmax_conditions(p: float, ell: float, w_star: float) -> tuple[bool, bool]:
    """The two conditions gating the coercivity lemma."""
    return (w_star < (ell + 1.0) / (2.0 * p), _bracket(p, ell, w_star) > 0.0)


def kappa_value(p: float, ell: float, w_star: float) -> float:
    """Coercivity constant p*(2w*)^(-ell)*[p-1 - (p ell^2 + p(p-1)^2 w*^2)/(ell(ell+1-2pw*))]."""
    c1, c2 = wmax_conditions(p, ell, w_star)
    if not c1:
        raise ValueError(f"w_star={w_star} violates w_star < (ell+1)/(2p) "
                         f"= {(ell + 1.0) / (2.0 * p)}")
    if not c2:
        raise ValueError(f"(p={p}, ell={ell}, w_star={w_star}) makes the "
                         "coercivity bracket nonpositive")
    return p * (2.0 * w_star) ** (-ell) * _bracket(p, ell, w_star)


def kappa(tp: TestFunctionParams) -> float:
    return kappa_value(tp.p, tp.ell, tp.w_star)


def find_b0(p: float, ell: float) -> float:
    """Supremum of w* satisfying both admissibility conditions.

    The bracket decreases strictly in w* from (p-ell-1)/(ell+1) > 0 at 0+
    to -inf at (ell+1)/(2p), so the root is unique; plain bisection to
    1e-10.
    """
    if p <= 1.0:
        raise ValueError("need p > 1")
    if not (0.0 < ell < p - 1.0):
        raise ValueError(f"need 0 < ell < p-1, got ell={ell}")
    lo, hi = 0.0, (ell + 1.0) / (2.0 * p)
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if _bracket(p, ell, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_test_function_params(params: ModelParams, xi: float,
                              p: float | None = None,
                              ell: float | None = None,
                              w_star: float | None = None) -> TestFunctionParams:
    """Defaults: p = 1.25*qn/(q-n), ell = (p-1)/2, w_star = b0/2."""
    p_min = params.q * params.n / (params.q - params.n)
    if p is None:
        p = 1.25 * p_min
    if p <= p_min:
        raise ValueError(f"need p > qn/(q-n) = {p_min}, got {p}")
    if ell is None:
        ell = 0.5 * (p - 1.0)
    if not (0.0 < ell < p - 1.0):
        raise ValueError(f"need 0 < ell < p-1, got ell={ell}")
    b0 = find_b0(p, ell)
    if w_star is None:
        w_star = 0.5 * b0
    if not (0.0 < w_star < b0):
        raise ValueError(f"need 0 < w_star < b0 = {b0}, got {w_star}")
    return TestFunctionParams(p=p, ell=ell, w_star=w_star, b0=b0,
                              kappa=kappa_value(p, ell, w_star),
                              zeta=xi * w_star)


def phi(y, tp: TestFunctionParams):
    """(2w* - y)^(-ell) on [0, w*]; positive, increasing, convex."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(y > tp.w_star):
        raise ValueError("phi evaluated outside [0, w_star]")
    out = (2.0 * tp.w_star - y) ** (-tp.ell)
    return float(out) if out.ndim == 0 else out


def zp_functional(s: SimState, tp: TestFunctionParams, d: BoxDomain) -> float:
    """Cell-volume-weighted sum of z^p * phi(w); requires ||w||_inf <= w*."""
    wmax = float(np.abs(s.w).max())
    if wmax > tp.w_star:
        raise ValueError(f"||w||_inf = {wmax} out of phi domain "
                         f"[0, {tp.w_star}]")
    return float(np.sum(s.z ** tp.p * phi(s.w, tp)) * d.cell_volume)


def combined_vw(s: SimState, xi: float) -> np.ndarray:
    return s.v + xi * s.w
