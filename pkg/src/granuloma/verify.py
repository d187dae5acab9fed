"""Verification battery: nine numbered checks over a configured scenario.

Each item exercises one guarantee of the solver/analysis stack, from closed
form constant cross-checks through full subcritical decay runs to a
supercritical negative control.  The battery scales with the config it is
given (grid size, horizon), so a reduced config gives a quick smoke run and
the default config reproduces the full-scale evidence.  Heavy runs write
their diagnostics CSVs under the output directory when one is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.integrate

from . import diagnostics, semigroup
from .config import ICSpec, RunConfig, build_initial_state, resolve_setup
from .grid import BoxDomain, linf_norm, lq_norm
from .model import ModelParams, reproduction_number, s_integral, xi_interval
from .stepper import run


@dataclass
class BatteryItem:
    index: int
    name: str
    passed: bool | None      # None = indeterminate (counts as non-failure)
    detail: str

    @property
    def verdict(self) -> str:
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]

    def line(self) -> str:
        return f"[{self.verdict}] {self.index} {self.name}: {self.detail}"


# ---------------------------------------------------------------- scenarios

def ode_config(cfg: RunConfig) -> RunConfig:
    """Spatially homogeneous variant: the PDE must reduce to the mean-field
    ODE exactly, so any discrepancy is pure time-discretization error.

    Always run on the 1D 256-cell protocol grid — the comparison tolerance
    is a time-step budget, and the CFL step is set by the grid spacing."""
    ics = (ICSpec(kind="constant", value=cfg.params.beta),
           ICSpec(kind="constant", value=1.0),
           ICSpec(kind="constant", value=1.0),
           ICSpec(kind="constant", value=1.0))
    step = replace(cfg.step, t_end=min(10.0, cfg.step.t_end),
                   output_interval=0.5)
    dom = BoxDomain(extents=(cfg.domain.extents[0],), cells=(256,))
    return replace(cfg, ics=ics, step=step, domain=dom,
                   snapshot_interval=0.0)


def bump_u_config(cfg: RunConfig, amplitude: float = 0.1) -> RunConfig:
    """Same scenario but with u perturbed off equilibrium by a small bump."""
    center = tuple(e / 2.0 for e in cfg.domain.extents)
    ic_u = ICSpec(kind="bump", amplitude=amplitude, center=center, width=0.1)
    return replace(cfg, ics=(ic_u,) + cfg.ics[1:])


def supercritical_config(cfg: RunConfig) -> RunConfig:
    """mu = 2 pushes the reproduction number above 1; horizon capped at 10
    (the infection grows like e^t, which is plenty to witness by t = 5)."""
    params = replace(cfg.params, mu=2.0)
    step = replace(cfg.step, t_end=min(10.0, cfg.step.t_end))
    return replace(cfg, params=params, step=step, gamma=None, delta=None)


def noise_config(cfg: RunConfig, seed: int, amplitude: float) -> RunConfig:
    ics = tuple(ICSpec(kind="noise", amplitude=amplitude, modes=8, seed=seed)
                for _ in range(4))
    return replace(cfg, ics=ics, epsilon=1.0, seed=cfg.seed)


# ------------------------------------------------------------------ helpers

def _restrict(ref: np.ndarray, factor: int) -> np.ndarray:
    """Block-average a reference field down by an integer factor per axis."""
    if ref.ndim == 1:
        return ref.reshape(-1, factor).mean(axis=1)
    nx, ny = ref.shape
    return ref.reshape(nx // factor, factor, ny // factor, factor) \
              .mean(axis=(1, 3))


def _row_at(rows, t: float):
    return min(rows, key=lambda r: abs(r.t - t))


def convergence_orders(cfg: RunConfig, resolutions=None, ref_factor: int = 8,
                       t_end: float | None = None, cfl: float = 0.9):
    """Observed L-inf convergence order per field against a fine reference.

    Runs the configured scenario at several resolutions plus a reference
    ``ref_factor`` times finer than the base grid, block-averages the
    reference onto each coarse grid, and least-squares fits error vs h.
    Returns (orders dict, errors dict, spacings list).
    """
    base = cfg.domain.cells[0]
    if resolutions is None:
        resolutions = (base // 2, base, 2 * base)
    n_ref = ref_factor * base
    t_end = min(5.0, cfg.step.t_end) if t_end is None else t_end

    def final_state(n):
        cells = (n,) * cfg.domain.ndim
        dom = BoxDomain(extents=cfg.domain.extents, cells=cells)
        c = replace(cfg, domain=dom,
                    step=replace(cfg.step, t_end=t_end, cfl_safety=cfl,
                                 output_interval=t_end))
        res = run(build_initial_state(c), dom, c.params, c.step)
        if res.terminated != "t_end":
            raise RuntimeError(f"convergence run at {n} cells ended early: "
                               f"{res.terminated}")
        return res.final

    ref = final_state(n_ref)
    errors = {f: [] for f in "uvwz"}
    spacings = []
    for n in resolutions:
        st = final_state(n)
        spacings.append(cfg.domain.extents[0] / n)
        for f in "uvwz":
            fine = _restrict(getattr(ref, f), n_ref // n)
            errors[f].append(linf_norm(getattr(st, f) - fine))
    logh = np.log(spacings)
    orders = {}
    for f in "uvwz":
        e = np.asarray(errors[f])
        if np.any(e <= 0):
            orders[f] = math.inf      # resolved to machine zero; fine
        else:
            orders[f] = float(np.polyfit(logh, np.log(e), 1)[0])
    return orders, errors, spacings


# ----------------------------------------------------------------- criteria

def _item_constants(cfg: RunConfig) -> BatteryItem:
    p0 = ModelParams(beta=2.0, mu=0.4, n=1, q=4.0)
    msgs = []
    ok = True

    r0 = reproduction_number(p0)
    if abs(r0 - 0.9) > 1e-14:
        ok, _ = False, msgs.append(f"R0(2,0.4)={r0!r} != 0.9")
    lo, hi = xi_interval(p0)
    if abs(lo - 0.4) > 1e-14 or abs(hi - 0.5) > 1e-14:
        ok, _ = False, msgs.append(f"xi interval ({lo},{hi}) != (0.4,0.5)")

    for a, rate in ((-0.5, 1.0), (-0.6, 2.0), (0.0, 0.7)):
        quad, _ = scipy.integrate.quad(
            lambda s: (1.0 + s ** a) * math.exp(-rate * s), 0.0, np.inf)
        closed = s_integral(a, rate)
        if abs(closed - quad) > 1e-8 * max(1.0, abs(quad)):
            ok, _ = False, msgs.append(
                f"s_integral({a},{rate})={closed} vs quadrature {quad}")

    setup = resolve_setup(cfg)
    tp = setup.tp
    ys = np.geomspace(1e-12 * tp.w_star, tp.w_star * (1 - 1e-12), 4001)
    # generator expression at displacement y: both factors are minimized at
    # y = 0, where the expression equals kappa exactly
    expr = _generator_expression(ys, tp)
    rel = abs(expr.min() - tp.kappa) / tp.kappa
    if rel > 1e-6:
        ok, _ = False, msgs.append(
            f"kappa mismatch: min expr {expr.min()} vs kappa {tp.kappa} "
            f"(rel {rel:.3g})")
    if not np.all(expr >= tp.kappa - 1e-10):
        ok, _ = False, msgs.append("generator expression dips below kappa")

    detail = "; ".join(msgs) if msgs else (
        f"R0, xi-interval, s-integral, kappa={tp.kappa:.6g} "
        f"(min-expr rel err {rel:.2e})")
    return BatteryItem(1, "constants-cross-check", ok, detail)


def _generator_expression(y, tp) -> np.ndarray:
    """p(2w*-y)^{-l} [p-1 - (4pl^2 + p(p-1)^2 (2w*-y)^2) / (4l(l+1-p(2w*-y)))]
    evaluated on 0 <= y < w*; its infimum over that range is kappa."""
    y = np.asarray(y, dtype=float)
    p, ell, ws = tp.p, tp.ell, tp.w_star
    s = 2.0 * ws - y
    den = 4.0 * ell * (ell + 1.0 - p * s)
    brack = (p - 1.0) - (4.0 * p * ell ** 2 + p * (p - 1.0) ** 2 * s ** 2) / den
    return p * s ** (-ell) * brack


def _item_ode(cfg: RunConfig) -> BatteryItem:
    from .stepper import ode_oracle
    c = ode_config(cfg)
    st0 = build_initial_state(c)
    res = run(st0, c.domain, c.params, c.step, snapshot_interval=1.0)
    ts, us, vs, ws, zs = ode_oracle(float(st0.u.flat[0]), float(st0.v.flat[0]),
                                    float(st0.w.flat[0]), float(st0.z.flat[0]),
                                    c.params, c.step.t_end)
    dt = ts[1] - ts[0]
    series = {"u": us, "v": vs, "w": ws, "z": zs}
    worst = 0.0
    sample_ts = [t for t in (1.0, 5.0, 10.0) if t <= c.step.t_end + 1e-9]
    for t in sample_ts:
        snap = min(res.snapshots, key=lambda s: abs(s.t - t))
        k = round(t / dt)
        for f in "uvwz":
            exact = float(series[f][k])
            err = linf_norm(getattr(snap, f) - exact)
            rel = err / max(abs(exact), 1e-300)
            worst = max(worst, rel)
    ok = worst <= 1e-4
    return BatteryItem(2, "ode-equivalence", ok,
                       f"max relative error {worst:.3e} at t in {sample_ts} "
                       f"(tol 1e-4)")


def _item_invariants(cfg: RunConfig) -> BatteryItem:
    msgs = []
    n_fail = 0
    cells = min(cfg.domain.cells[0], 96)
    dom = BoxDomain(extents=cfg.domain.extents,
                    cells=(cells,) * cfg.domain.ndim)
    rng = np.random.default_rng(cfg.seed)
    for k in range(20):
        amp = float(rng.uniform(0.2, 5.0))
        c = noise_config(replace(cfg, domain=dom, seed=cfg.seed + k), k, amp)
        c = replace(c, step=replace(c.step, t_end=1.0, output_interval=0.25))
        st0 = build_initial_state(c)
        m_star = (float(np.sum(st0.u + st0.w + st0.z)) * dom.cell_volume
                  + c.params.beta * dom.volume)
        res = run(st0, dom, c.params, c.step)
        try:
            res.final.validate(dom, nonnegative=True)
        except ValueError as e:
            n_fail += 1
            msgs.append(f"ic {k}: positivity lost ({e})")
            continue
        rep = diagnostics.check_mass(res.rows, m_star)
        if not rep.passed:
            n_fail += 1
            msgs.append(f"ic {k}: mass bound violated (margin {rep.margin:.3g})")

    # equilibrium must be an exact fixed point of the scheme
    from .stepper import cfl_dt, step as one_step
    eq = build_initial_state(replace(cfg, domain=dom, ics=(
        ICSpec(kind="constant", value=cfg.params.beta),
        ICSpec(kind="constant", value=0.0),
        ICSpec(kind="constant", value=0.0),
        ICSpec(kind="constant", value=0.0))))
    dt = cfl_dt(eq, dom, cfg.step)
    st = eq
    from .stepper import _advance
    st = _advance(st.copy(), dom, cfg.params, 10_000, dt)
    drift = max(linf_norm(st.u - cfg.params.beta), linf_norm(st.v),
                linf_norm(st.w), linf_norm(st.z))
    if drift > 1e-12:
        n_fail += 1
        msgs.append(f"equilibrium drift {drift:.3e} after 1e4 steps")

    ok = n_fail == 0
    detail = "; ".join(msgs[:4]) if msgs else (
        f"20 random ICs: positivity + mass bound held; "
        f"equilibrium drift {drift:.3e} over 1e4 steps")
    return BatteryItem(3, "invariants", ok, detail)


def _subcritical_runs(cfg: RunConfig, outdir: Path | None):
    """Run the scenario as configured (u at equilibrium) and with a small
    u-bump; returns [(tag, setup, result), ...]."""
    out = []
    for tag, c in (("a", cfg), ("b", bump_u_config(cfg))):
        setup = resolve_setup(c)
        if setup.window is None:
            raise RuntimeError(f"verify needs a subcritical base config "
                               f"(no stability window: {setup.window_reason})")
        res = run(setup.initial, c.domain, c.params, c.step,
                  xi=setup.window.xi, tp=setup.tp)
        if outdir is not None:
            d = outdir / f"subcritical_{tag}"
            d.mkdir(parents=True, exist_ok=True)
            diagnostics.write_rows(res.rows, d / "diagnostics.csv")
        out.append((tag, setup, res))
    return out


def _item_subcritical(runs) -> BatteryItem:
    msgs = []
    ok = True
    for tag, setup, res in runs:
        if res.terminated != "t_end":
            ok = False
            msgs.append(f"[{tag}] ended early: {res.terminated}")
            continue
        w, c = setup.window, setup.constants
        floor = diagnostics.decay_noise_floor(setup.params.beta, res.dt_min)
        reports = [
            diagnostics.check_mass(res.rows, setup.m_star),
            diagnostics.check_vw_envelope(res.rows, w, c, setup.norm_vw0),
            diagnostics.check_u_envelope(res.rows, c, w, setup.grad_v0_q),
            diagnostics.check_theorem_decay(res.rows, w.gamma,
                                            noise_floor=floor),
        ]
        for rep in reports:
            if rep.passed is False:
                ok = False
            msgs.append(f"[{tag}] {rep.name}: "
                        f"{'ok' if rep.passed else 'FAIL'} "
                        f"margin {rep.margin:.3g}")
    return BatteryItem(4, "subcritical-envelopes", ok, "; ".join(msgs))


def _item_supercritical(cfg: RunConfig, gamma: float,
                        outdir: Path | None) -> BatteryItem:
    c = supercritical_config(cfg)
    setup = resolve_setup(c)
    res = run(setup.initial, c.domain, c.params, c.step,
              xi=setup.xi_monitor, tp=setup.tp)
    if outdir is not None:
        d = outdir / "supercritical"
        d.mkdir(parents=True, exist_ok=True)
        diagnostics.write_rows(res.rows, d / "diagnostics.csv")
    r0 = reproduction_number(c.params)
    grew = _row_at(res.rows, 5.0).linf_vw > res.rows[0].linf_vw
    rep = diagnostics.check_theorem_decay(res.rows, gamma)
    ok = (setup.window is None) and grew and (rep.passed is False) and r0 > 1
    detail = (f"R0={r0:.3g}, window: {setup.window_reason or 'exists'}; "
              f"linf_vw grew by t=5: {grew}; decay check correctly fails: "
              f"{rep.passed is False} ({rep.notes})")
    return BatteryItem(5, "supercritical-control", ok, detail)


def _item_semigroup(cfg: RunConfig) -> BatteryItem:
    dom = cfg.domain
    q = cfg.params.q
    msgs = []
    ok = True
    for kind, (pp, qq), floor in ((1, (math.inf, q), 0.5),
                                  (3, (q, q), 0.5)):
        k = semigroup.estimate_constant(kind, pp, qq, dom, samples=8,
                                        seed=cfg.seed)
        if not (floor - 1e-6 <= k <= 100.0):
            ok = False
        msgs.append(f"K{kind}~{k:.4g} (floor {floor})")
    rng = np.random.default_rng(cfg.seed)
    f = semigroup.band_limited_field(dom, rng) + 3.0
    g = semigroup.heat_apply(f, 0.7, dom)
    mean_drift = abs(float(g.mean() - f.mean()))
    contract = lq_norm(g - g.mean(), 2.0, dom) <= \
        lq_norm(f - f.mean(), 2.0, dom) * (1 + 1e-12)
    if mean_drift > 1e-12 or not contract:
        ok = False
    msgs.append(f"mean drift {mean_drift:.2e}; L2 contraction {contract}")
    return BatteryItem(6, "semigroup-constants", ok, "; ".join(msgs))


def _item_z_suppression(runs) -> BatteryItem:
    msgs = []
    ok: bool | None = True
    for tag, setup, res in runs:
        rep = diagnostics.check_z_suppression(res.rows, setup.tp,
                                              setup.window)
        if rep.passed is False:
            ok = False
        elif rep.passed is None and ok is not False:
            ok = None
        msgs.append(f"[{tag}] {rep.notes} (margin {rep.margin:.3g})")
    return BatteryItem(7, "z-suppression", ok, "; ".join(msgs))


def _item_convergence(cfg: RunConfig, outdir: Path | None) -> BatteryItem:
    orders, errors, spacings = convergence_orders(cfg)
    ok = all(o >= 1.0 for o in orders.values())
    if outdir is not None:
        lines = ["field,h,linf_error"]
        for f in "uvwz":
            for h, e in zip(spacings, errors[f]):
                lines.append(f"{f},{h:.17g},{e:.17g}")
        (outdir / "convergence.csv").write_text("\n".join(lines) + "\n")
    detail = ", ".join(f"{f}:{orders[f]:.2f}" for f in "uvwz") + \
        " (all must be >= 1.0)"
    return BatteryItem(8, "convergence-order", ok, detail)


def _item_determinism(cfg: RunConfig) -> BatteryItem:
    cells = min(cfg.domain.cells[0], 64)
    dom = BoxDomain(extents=cfg.domain.extents,
                    cells=(cells,) * cfg.domain.ndim)
    c = replace(cfg, domain=dom,
                step=replace(cfg.step, t_end=min(5.0, cfg.step.t_end)))

    def once() -> str:
        setup = resolve_setup(c)
        res = run(setup.initial, dom, c.params, c.step,
                  xi=setup.xi_monitor, tp=setup.tp)
        return diagnostics.rows_to_csv(res.rows) + repr(setup.k_hat)

    same = once() == once()
    return BatteryItem(9, "determinism", same,
                       "two identical runs produced byte-identical "
                       f"diagnostics: {same}")


def run_battery(cfg: RunConfig, outdir: Path | None = None,
                progress=None) -> list[BatteryItem]:
    """Execute all nine checks; item failures are recorded, not raised."""
    items: list[BatteryItem] = []

    def push(fn, *args):
        try:
            item = fn(*args)
        except Exception as e:                       # record, keep going
            idx = len(items) + 1
            item = BatteryItem(idx, getattr(fn, "__name__", "?"), False,
                               f"error: {type(e).__name__}: {e}")
        items.append(item)
        if progress is not None:
            progress(item.line())

    push(_item_constants, cfg)
    push(_item_ode, cfg)
    push(_item_invariants, cfg)

    try:
        runs = _subcritical_runs(cfg, outdir)
    except Exception as e:
        runs = None
        items.append(BatteryItem(4, "subcritical-envelopes", False,
                                 f"error: {type(e).__name__}: {e}"))
        if progress is not None:
            progress(items[-1].line())
    if runs is not None:
        push(_item_subcritical, runs)
    gamma = runs[0][1].window.gamma if runs else 0.04

    push(_item_supercritical, cfg, gamma, outdir)
    push(_item_semigroup, cfg)
    if runs is not None:
        push(_item_z_suppression, runs)
    else:
        items.append(BatteryItem(7, "z-suppression", False,
                                 "skipped: subcritical runs unavailable"))
    push(_item_convergence, cfg, outdir)
    push(_item_determinism, cfg)
    items.sort(key=lambda it: it.index)
    return items
