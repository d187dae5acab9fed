"""Trajectory diagnostics: norm rows, CSV round-trip, rate fits, checkers.

A DiagnosticsRow carries the norms the decay theory talks about: the
four-norm sum ||u-beta||_inf + ||v||_W1q + ||w||_W1q + ||z||_inf, the
combined field ||v + xi*w||_inf that drives the bootstrap, the L1 mass of
u+w+z, and the weighted z-functionals.  The check_* functions compare a
stored trajectory against the closed-form envelopes; each returns a
CheckReport with a signed worst margin and never raises on a mere failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import functionals
from .grid import (BoxDomain, SimState, grad_lq_norm, l1_norm, linf_norm,
                   lq_norm, w1q_norm)
from .model import (EnvelopeConstants, ModelParams, StabilityWindow,
                    envelope_g, vw_envelope)

CSV_HEADER = ("t,linf_u_minus_beta,w1q_v,w1q_w,linf_z,l1_mass,linf_vw,"
              "lq_grad_v,lq_grad_w,lp_z,zp_phi")
MARGIN_CAP = 1e18


@dataclass
class DiagnosticsRow:
    t: float
    linf_u_minus_beta: float
    w1q_v: float
    w1q_w: float
    linf_z: float
    l1_mass: float
    linf_vw: float
    lq_grad_v: float
    lq_grad_w: float
    lp_z: float
    zp_phi: float | None = None

    @property
    def four_norm_sum(self) -> float:
        return (self.linf_u_minus_beta + self.w1q_v + self.w1q_w
                + self.linf_z)


@dataclass
class CheckReport:
    name: str
    passed: bool | None      # None = indeterminate (gate never reached)
    margin: float
    worst_t: float
    notes: str = ""

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "passed": self.passed,
                           "margin": self.margin, "worst_t": self.worst_t,
                           "notes": self.notes}, sort_keys=True)


def measure_row(s: SimState, d: BoxDomain, p: ModelParams, xi: float,
                tp: functionals.TestFunctionParams) -> DiagnosticsRow:
    """All monitored norms of one state; zp_phi only while ||w||_inf <= w*."""
    q = p.q
    zp = None
    if linf_norm(s.w) <= tp.w_star:
        zp = functionals.zp_functional(s, tp, d)
    return DiagnosticsRow(
        t=s.t,
        linf_u_minus_beta=linf_norm(s.u - p.beta),
        w1q_v=w1q_norm(s.v, q, d),
        w1q_w=w1q_norm(s.w, q, d),
        linf_z=linf_norm(s.z),
        l1_mass=l1_norm(s.u + s.w + s.z, d),
        linf_vw=linf_norm(functionals.combined_vw(s, xi)),
        lq_grad_v=grad_lq_norm(s.v, q, d),
        lq_grad_w=grad_lq_norm(s.w, q, d),
        lp_z=lq_norm(s.z, tp.p, d),
        zp_phi=zp,
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        cells = [_fmt(r.t), _fmt(r.linf_u_minus_beta), _fmt(r.w1q_v),
                 _fmt(r.w1q_w), _fmt(r.linf_z), _fmt(r.l1_mass),
                 _fmt(r.linf_vw), _fmt(r.lq_grad_v), _fmt(r.lq_grad_w),
                 _fmt(r.lp_z), "" if r.zp_phi is None else _fmt(r.zp_phi)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_rows(rows, path):
    with open(path, "w") as fh:
        fh.write(rows_to_csv(rows))


def read_rows(path) -> list[DiagnosticsRow]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing or wrong diagnostics header")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        c = line.split(",")
        if len(c) != 11:
            raise ValueError(f"{path}: expected 11 columns, got {len(c)}")
        rows.append(DiagnosticsRow(
            t=float(c[0]), linf_u_minus_beta=float(c[1]), w1q_v=float(c[2]),
            w1q_w=float(c[3]), linf_z=float(c[4]), l1_mass=float(c[5]),
            linf_vw=float(c[6]), lq_grad_v=float(c[7]), lq_grad_w=float(c[8]),
            lp_z=float(c[9]), zp_phi=None if c[10] == "" else float(c[10])))
    return rows


class NoExponentialRegime(ValueError):
    pass


def fit_rate(series, tail_fraction: float) -> tuple[float, float, float]:
    """Least-squares exponential fit on the trailing part of a series.

    series is a sequence of (t, value) pairs; the last tail_fraction of the
    points (at least 10) are fit as log(value) = log(C) - rate*t.  Returns
    (C, rate, r2).  Nonpositive values on the tail have no exponential
    regime and are rejected.
    """
    pts = [(float(t), float(v)) for t, v in series]
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = max(10, math.ceil(tail_fraction * len(pts)))
    if len(pts) < k:
        raise ValueError(f"need at least {k} points, got {len(pts)}")
    tail = pts[-k:]
    ts = np.array([t for t, _ in tail])
    vs = np.array([v for _, v in tail])
    if np.any(vs <= 0.0):
        raise NoExponentialRegime("no exponential regime: nonpositive tail values")
    y = np.log(vs)
    slope, intercept = np.polyfit(ts, y, 1)
    resid = y - (slope * ts + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    # a constant-to-roundoff tail is a perfect fit; the 1 - ss_res/ss_tot
    # form would divide eps^2 noise by eps^2 noise and report garbage
    floor = 1e-28 * len(y) * max(1.0, float(np.max(np.abs(y)))) ** 2
    r2 = 1.0 if ss_tot <= floor else 1.0 - ss_res / ss_tot
    return float(np.exp(intercept)), float(-slope), r2


def _cap(x: float) -> float:
    if not math.isfinite(x):
        return MARGIN_CAP if x > 0 else -MARGIN_CAP
    return max(-MARGIN_CAP, min(MARGIN_CAP, x))


def check_mass(traj, m_star: float, tol: float = 1e-8) -> CheckReport:
    """Discrete mass bound: l1_mass never above m* = ||u0+w0+z0||_1 + beta|Omega|."""
    if not traj:
        raise ValueError("empty trajectory")
    worst = max(traj, key=lambda r: r.l1_mass)
    passed = bool(worst.l1_mass <= m_star * (1.0 + tol))
    return CheckReport(name="mass", passed=passed,
                       margin=_cap((m_star - worst.l1_mass) / m_star),
                       worst_t=worst.t)


def _envelope_check(name, traj, values, envelope, tol, notes) -> CheckReport:
    """Shared row-wise comparison value(t) <= envelope(t)*(1+tol)."""
    passed = True
    worst_margin = math.inf
    worst_t = traj[0].t
    for r, val, env in zip(traj, values, envelope):
        if val > env * (1.0 + tol):
            passed = False
        if val > 0.0:
            margin = env / val - 1.0
        else:
            margin = math.inf
        if margin < worst_margin:
            worst_margin = margin
            worst_t = r.t
    return CheckReport(name=name, passed=passed, margin=_cap(worst_margin),
                       worst_t=worst_t, notes=notes)


def check_vw_envelope(traj, window: StabilityWindow, c: EnvelopeConstants,
                      initial_norm: float, tol: float = 1e-2) -> CheckReport:
    if not traj:
        raise ValueError("empty trajectory")
    env = [vw_envelope(r.t, initial_norm, window.gamma, c.t_star) for r in traj]
    vals = [r.linf_vw for r in traj]
    notes = f"tol={tol}" + ("" if c.rigorous else "; non-rigorous constants")
    return _envelope_check("vw_envelope", traj, vals, env, tol, notes)


def check_u_envelope(traj, c: EnvelopeConstants, window: StabilityWindow,
                     grad_v0_q: float, tol: float = 1e-2) -> CheckReport:
    if not traj:
        raise ValueError("empty trajectory")
    env = [envelope_g(r.t, c, window, grad_v0_q) for r in traj]
    vals = [r.linf_u_minus_beta for r in traj]
    notes = f"tol={tol}" + ("" if c.rigorous else "; non-rigorous constants")
    return _envelope_check("u_envelope", traj, vals, env, tol, notes)


def decay_noise_floor(beta: float, dt_min: float,
                      safety: float = 4.0) -> float:
    """Amplitude below which a deviation riding on the O(beta) background
    can no longer decay in double precision.

    One step changes such a field by about rate*value*dt, and round-to-
    nearest absorbs any change under half an ulp of beta; values below
    ~ulp(beta)/dt therefore measure rounding, not the PDE.  (Fields whose
    own amplitude shrinks, like v and w, keep relative precision and never
    hit this.)  The safety factor backs off from the exact threshold.
    """
    return safety * float(np.spacing(beta)) / dt_min


def check_theorem_decay(traj, gamma: float, tail_fraction: float = 0.25,
                        r2_min: float = 0.95,
                        noise_floor: float = 0.0) -> CheckReport:
    """Tail fit of the four-norm sum: pass iff rate >= 0.9*gamma, r2 >= 0.95.

    A positive noise_floor (see decay_noise_floor) drops trailing rows
    whose four-norm sum has fallen below it before fitting, keeping at
    least 20 rows; without this a long run flattens into the rounding
    floor of u - beta and the fit reports the floor, not the decay.
    """
    if not traj:
        raise ValueError("empty trajectory")
    target = 0.9 * gamma
    notes = []
    t_end = traj[-1].t
    if t_end < 40.0 / gamma:
        notes.append(f"horizon {t_end:g} below 40/gamma = {40.0 / gamma:g}")
    rows = list(traj)
    dropped = 0
    while (noise_floor > 0.0 and len(rows) > 20
           and rows[-1].four_norm_sum < noise_floor):
        rows.pop()
        dropped += 1
    if dropped:
        notes.append(f"dropped {dropped} rows below noise floor "
                     f"{noise_floor:.3g}")
    series = [(r.t, r.four_norm_sum) for r in rows]
    try:
        C, rate, r2 = fit_rate(series, tail_fraction)
    except NoExponentialRegime:
        return CheckReport(name="theorem_decay", passed=False,
                           margin=-MARGIN_CAP, worst_t=t_end,
                           notes="no exponential regime; " + "; ".join(notes))
    notes.insert(0, f"fitted rate {rate:.6g}, r2 {r2:.6g}, C {C:.6g}")
    passed = bool(rate >= target and r2 >= r2_min)
    return CheckReport(name="theorem_decay", passed=passed,
                       margin=_cap((rate - target) / target),
                       worst_t=rows[max(0, len(rows) - max(10, math.ceil(
                           tail_fraction * len(rows))))].t,
                       notes="; ".join(notes))


def check_z_suppression(traj, tp: functionals.TestFunctionParams,
                        window: StabilityWindow, tol: float = 0.05,
                        slack: float = 1e-12) -> CheckReport:
    """After the first time ||v + xi w||_inf <= zeta, the z norms stay put.

    lp_z may not exceed (1+tol) times its running max over [t0, t0+1], and
    the weighted functional zp_phi may not exceed twice its value at t0.
    Indeterminate (not failed) when the trajectory never reaches the gate.
    """
    if not traj:
        raise ValueError("empty trajectory")
    zeta = tp.zeta
    i0 = next((i for i, r in enumerate(traj) if r.linf_vw <= zeta), None)
    if i0 is None:
        return CheckReport(name="z_suppression", passed=None, margin=0.0,
                           worst_t=traj[-1].t,
                           notes=f"indeterminate: linf_vw never <= zeta={zeta:g}")
    t0 = traj[i0].t
    after = traj[i0:]
    window_rows = [r for r in after if r.t <= t0 + 1.0]
    m0 = max(r.lp_z for r in window_rows)
    lp_bound = (1.0 + tol) * m0 + slack
    worst_lp = max(after, key=lambda r: r.lp_z)
    margin_lp = (lp_bound - worst_lp.lp_z) / max(m0, slack)

    zp0 = after[0].zp_phi
    zp_vals = [r.zp_phi for r in after if r.zp_phi is not None]
    notes = [f"t0={t0:g}", f"zeta={zeta:g}"]
    if zp0 is None or not zp_vals:
        # gate reached but phi inactive (can only happen on inconsistent rows)
        notes.append("zp_phi inactive at t0")
        passed = bool(worst_lp.lp_z <= lp_bound)
        return CheckReport(name="z_suppression", passed=passed,
                           margin=_cap(margin_lp), worst_t=worst_lp.t,
                           notes="; ".join(notes))
    zp_bound = 2.0 * zp0 + slack
    worst_zp = max(zp_vals)
    margin_zp = (zp_bound - worst_zp) / max(zp0, slack)
    passed = bool(worst_lp.lp_z <= lp_bound and worst_zp <= zp_bound)
    margin = min(margin_lp, margin_zp)
    worst_t = worst_lp.t if margin_lp <= margin_zp else \
        next(r.t for r in after if r.zp_phi == worst_zp)
    return CheckReport(name="z_suppression", passed=passed,
                       margin=_cap(margin), worst_t=worst_t,
                       notes="; ".join(notes))
