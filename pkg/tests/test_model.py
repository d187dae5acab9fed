"""Parameter bookkeeping, the stability window, and the envelope constants.

The closed-form quantities are checked against values computed by hand or by
an independent route (quadrature for the s-integrals, a term-by-term
re-derivation for the envelope set).
"""

import math

import pytest
import scipy.integrate
from hypothesis import given
from hypothesis import strategies as st

from granuloma.model import (EnvelopeConstants, FKind, ModelParams,
                             StabilityWindow, envelope_constants, envelope_g,
                             gamma_sup, make_window, reproduction_number,
                             s_integral, validate_window, vw_envelope,
                             xi_interval)

P_DEFAULT = ModelParams(beta=2.0, mu=0.4, n=1, q=4.0)
LAM = math.pi ** 2


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(beta=0.0, mu=0.4)
    with pytest.raises(ValueError):
        ModelParams(beta=2.0, mu=-1.0)
    with pytest.raises(ValueError):
        ModelParams(beta=2.0, mu=0.4, n=0)
    with pytest.raises(ValueError):
        ModelParams(beta=2.0, mu=0.4, n=2, q=2.0)   # needs q > n


def test_f_kinds():
    lin = ModelParams(beta=2.0, mu=0.4, f_kind="linear")
    sat = ModelParams(beta=2.0, mu=0.4, f_kind=FKind.SATURATING)
    assert lin.f(0.5) == 0.5
    assert sat.f(1.0) == pytest.approx(0.5)
    assert sat.f(0.0) == 0.0
    with pytest.raises(ValueError):
        ModelParams(beta=2.0, mu=0.4, f_kind="cubic")


def test_reproduction_number_value():
    assert reproduction_number(P_DEFAULT) == pytest.approx(0.9, abs=1e-15)


def test_xi_interval_value():
    lo, hi = xi_interval(P_DEFAULT)
    assert (lo, hi) == pytest.approx((0.4, 0.5), abs=1e-15)


def test_xi_interval_empty_cases():
    assert xi_interval(ModelParams(beta=1.0, mu=0.1)) is None
    assert xi_interval(ModelParams(beta=0.5, mu=0.1)) is None
    # mu at/above (beta-1)/beta closes the interval
    assert xi_interval(ModelParams(beta=2.0, mu=0.6)) is None
    assert xi_interval(ModelParams(beta=2.0, mu=0.5)) is None


@given(beta=st.floats(0.05, 20.0), mu=st.floats(0.01, 5.0))
def test_window_exists_iff_subcritical(beta, mu):
    p = ModelParams(beta=beta, mu=mu)
    nonempty = xi_interval(p) is not None
    subcritical = beta > 1.0 and reproduction_number(p) < 1.0
    assert nonempty == subcritical


def test_gamma_sup_value():
    p = ModelParams(beta=4.0, mu=0.5)
    # min(delta, 1 - mu/xi, lam) = min(0.5, 1/6, 10)
    assert gamma_sup(p, xi=0.6, delta=0.5, lam=10.0) == pytest.approx(1.0 / 6)


def test_make_window_defaults():
    w = make_window(P_DEFAULT, LAM)
    assert w.xi == pytest.approx(0.45)           # interval midpoint
    assert w.delta == pytest.approx(0.05)        # half the cap (1-xi)beta - 1
    assert w.gamma == pytest.approx(0.045)       # 0.9 * sup
    assert w.lam == LAM
    validate_window(P_DEFAULT, w)


def test_make_window_explicit():
    w = make_window(P_DEFAULT, LAM, xi=0.45, delta=0.045)
    assert w.gamma == pytest.approx(0.0405)
    validate_window(P_DEFAULT, w)


def test_make_window_rejects_supercritical():
    with pytest.raises(ValueError):
        make_window(ModelParams(beta=2.0, mu=2.0), LAM)
    with pytest.raises(ValueError):
        make_window(P_DEFAULT, LAM, xi=0.39)      # below the interval
    with pytest.raises(ValueError):
        make_window(P_DEFAULT, LAM, xi=0.45, delta=0.045, gamma=0.05)


@given(beta=st.floats(1.2, 10.0), mu=st.floats(0.01, 2.0),
       lam=st.floats(0.5, 50.0))
def test_window_inequalities(beta, mu, lam):
    p = ModelParams(beta=beta, mu=mu)
    if xi_interval(p) is None:
        return
    w = make_window(p, lam)
    lo, hi = xi_interval(p)
    assert lo < w.xi < hi
    assert 0.0 < w.delta < (1.0 - w.xi) * beta - 1.0
    assert 0.0 < w.gamma < min(w.delta, 1.0 - mu / w.xi, lam)


# ----------------------------------------------------------------- integrals

def test_s_integral_closed_forms():
    assert s_integral(-0.5, 1.0) == pytest.approx(1.0 + math.sqrt(math.pi),
                                                  rel=1e-14)
    assert s_integral(0.0, 2.0) == pytest.approx(1.0, rel=1e-14)


@given(a=st.floats(-0.95, 0.0), rate=st.floats(0.05, 20.0))
def test_s_integral_matches_quadrature(a, rate):
    val, _ = scipy.integrate.quad(
        lambda s: (1.0 + s ** a) * math.exp(-rate * s), 0.0, math.inf)
    assert s_integral(a, rate) == pytest.approx(val, rel=1e-8)


@given(a=st.floats(-0.9, 0.0), r1=st.floats(0.1, 5.0),
       dr=st.floats(0.1, 5.0))
def test_s_integral_decreasing_in_rate(a, r1, dr):
    assert s_integral(a, r1 + dr) < s_integral(a, r1)


def test_s_integral_rejects():
    for a, rate in ((-1.0, 1.0), (-1.5, 1.0), (0.1, 1.0), (-0.5, 0.0)):
        with pytest.raises(ValueError):
            s_integral(a, rate)


# ---------------------------------------------------------------- envelopes

def _reference_constants():
    """Term-by-term re-derivation of the constant set for one parameter
    point, written independently of the library implementation."""
    beta, mu, n, q = 2.0, 0.4, 2, 4.0
    xi, delta, gamma, lam = 0.45, 0.05, 0.04, math.pi ** 2
    alpha, eta, g0, vol, ws = 0.1, 0.1, 0.02, 1.0, 0.1
    G = math.gamma
    S1 = 1.0 / (lam - gamma) + G(0.5) * (lam - gamma) ** (-0.5)
    a = -0.5 - n / (2 * q)
    S2 = 1.0 + G(a + 1.0)
    S3 = 1.0 / (lam + 1 - gamma) + G(a + 1.0) * (lam + 1 - gamma) ** (a + 1.0) \
        / (lam + 1 - gamma) ** (2 * (a + 1.0))
    # the rate^-(a+1) form, written differently on purpose
    S3 = 1.0 / (lam + 1 - gamma) + G(a + 1.0) * (lam + 1 - gamma) ** -(a + 1.0)
    cK = 1.0 * 1.0 * (alpha + beta + eta) * S2
    sink = beta - (1 + delta) / (1 - xi)
    t_star = math.log((alpha + cK + eta) / sink) / gamma
    M = alpha + beta + eta + cK * g0 - 1.0
    Mt = (1.0 + S2) * (alpha + beta + eta)
    bump = math.exp((1 + gamma) * t_star)
    C1 = S1 * (M + mu / xi) * bump
    C2 = (S1 * S3 * (M + mu / xi) + 1.0 / (1 - gamma)) * (M + 1.0) * bump
    D = S2 * cK + (S1 * S3 * Mt + 1.0 / (1 - gamma)) * Mt * bump
    eps1 = min(1.0, eta / (2 * D))
    return dict(S1=S1, S2=S2, S3=S3, c_K=cK, t_star=t_star, M=M,
                M_tilde=Mt, C1=C1, C2=C2, D=D, eps1=eps1, eps2=eps1,
                zeta=xi * ws)


def test_envelope_constants_against_rederivation():
    p = ModelParams(beta=2.0, mu=0.4, n=2, q=4.0)
    w = StabilityWindow(xi=0.45, delta=0.05, gamma=0.04, lam=math.pi ** 2)
    c = envelope_constants(p, w, alpha=0.1, eta=0.1, grad_v0_q=0.02,
                           k_hat=(1.0, 1.0, 1.0, 1.0), domain_volume=1.0,
                           w_star=0.1)
    ref = _reference_constants()
    for key, val in ref.items():
        assert getattr(c, key) == pytest.approx(val, rel=1e-12), key
    assert not c.rigorous


def test_envelope_t_star_zero_branch():
    # k3 = 0 removes the feedback constant, so the drive alpha + eta stays
    # below the sink and no warm-up interval is needed
    p = ModelParams(beta=4.0, mu=0.5, n=1, q=4.0)
    w = make_window(p, LAM, xi=0.6, delta=0.5)
    c = envelope_constants(p, w, alpha=0.05, eta=0.05, grad_v0_q=0.0,
                           k_hat=(1.0, 1.0, 0.0, 1.0), domain_volume=1.0,
                           w_star=0.1)
    assert c.t_star == 0.0
    assert c.c_K == 0.0
    assert 0.0 < c.eps1 <= 1.0


def test_envelope_overflow_stays_usable():
    p = ModelParams(beta=2.0, mu=0.4, n=1, q=4.0)
    w = StabilityWindow(xi=0.45, delta=0.045, gamma=0.0405, lam=LAM)
    c = envelope_constants(p, w, alpha=0.0, eta=0.1, grad_v0_q=0.0,
                           k_hat=(1.0, 1.0, 1e6, 1e6), domain_volume=1.0,
                           w_star=0.1)
    assert math.isinf(c.C1)
    assert c.eps1 == 0.0          # threshold collapses, but stays defined
    # and the vw envelope still evaluates finitely at large t
    assert math.isfinite(vw_envelope(1e6, 1e-3, w.gamma, c.t_star))


def test_envelope_constants_rejects():
    w = StabilityWindow(xi=0.45, delta=0.045, gamma=0.0405, lam=LAM)
    with pytest.raises(ValueError):
        envelope_constants(P_DEFAULT, w, alpha=-0.1, eta=0.1, grad_v0_q=0.0,
                           k_hat=(1, 1, 1, 1), domain_volume=1.0, w_star=0.1)
    bad = StabilityWindow(xi=0.45, delta=0.045, gamma=0.0405, lam=0.02)
    with pytest.raises(ValueError):
        envelope_constants(P_DEFAULT, bad, alpha=0.0, eta=0.1, grad_v0_q=0.0,
                           k_hat=(1, 1, 1, 1), domain_volume=1.0, w_star=0.1)


def test_vw_envelope_identities():
    assert vw_envelope(0.0, 2e-3, 0.04, 0.0) == pytest.approx(2e-3)
    t_star = 5.0
    assert vw_envelope(t_star, 1.0, 0.1, t_star) == \
        pytest.approx(math.exp(t_star))       # e^{(1+g)t*} e^{-g t*}
    with pytest.raises(ValueError):
        vw_envelope(-1.0, 1.0, 0.1, 0.0)


def test_envelope_g_shape():
    p = ModelParams(beta=2.0, mu=0.4, n=1, q=4.0)
    w = StabilityWindow(xi=0.45, delta=0.045, gamma=0.0405, lam=LAM)
    c = envelope_constants(p, w, alpha=0.1, eta=0.1, grad_v0_q=0.05,
                           k_hat=(1, 1, 1, 1), domain_volume=1.0, w_star=0.1)
    assert envelope_g(0.0, c, w, 0.05) == \
        pytest.approx(0.1 + c.c_K * 0.05 + 0.1, rel=1e-14)
    # far in the tail, only the eta e^{-gamma t} term is alive
    t1, t2 = 30.0 / w.gamma, 60.0 / w.gamma
    slope = (math.log(envelope_g(t2, c, w, 0.05))
             - math.log(envelope_g(t1, c, w, 0.05))) / (t2 - t1)
    assert slope == pytest.approx(-w.gamma, rel=1e-6)


def test_envelope_members_frozen():
    c = EnvelopeConstants(alpha=0.0, eta=0.1, k_hat=(1, 1, 1, 1), S1=1.0,
                          S2=1.0, S3=1.0, c_K=1.0, t_star=0.0, M=1.0,
                          M_tilde=1.0, C1=1.0, C2=1.0, D=1.0, eps1=1.0,
                          eps2=1.0, zeta=0.1)
    with pytest.raises(AttributeError):
        c.eps1 = 2.0
