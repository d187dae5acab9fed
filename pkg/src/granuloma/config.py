"""Flat "key = value" run configuration with dotted namespaces.

A config file overlays the built-in defaults (the standard verification
scenario: 1D unit interval, 256 cells, beta=2, mu=0.4, q=4, bump data of
size epsilon=1e-3, f linear, t_end=200).  Parsing is lossless: printing a
parsed config and re-parsing it reproduces the same object exactly.

This module also owns scenario resolution: realizing initial conditions on
the grid, choosing the stability window, estimating the semigroup working
constants, and assembling the envelope-constant set that the CLI reports
and the checkers consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft

from . import semigroup
from .functionals import TestFunctionParams, make_test_function_params
from .grid import BoxDomain, SimState, grad_lq_norm, l1_norm, linf_norm
from .model import (EnvelopeConstants, FKind, ModelParams, StabilityWindow,
                    envelope_constants, make_window, reproduction_number,
                    xi_interval)
from .stepper import MONITOR_XI, StepConfig

FIELD_NAMES = ("u", "v", "w", "z")
IC_KINDS = ("constant", "bump", "noise")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ICSpec:
    """One field's initial condition.

    kind "constant": the given value everywhere.
    kind "bump": equilibrium (beta for u, 0 otherwise) plus a Gaussian bump
        amplitude*exp(-|x-center|^2 / (2 width^2)).
    kind "noise": amplitude times band-limited cosine noise normalized to
        unit sup, clipped at 0.
    """
    kind: str
    value: float = 0.0
    amplitude: float = 0.0
    center: tuple[float, ...] = (0.5,)
    width: float = 0.1
    modes: int = 8
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    domain: BoxDomain | None
    step: StepConfig
    # stability-window overrides (None = derive defaults)
    xi: float | None
    delta: float | None
    gamma: float | None
    lam: float | None
    # envelope inputs
    alpha: float | None          # None = derive from u0
    eta: float
    tolerance: float             # envelope check allowance
    grad_v0_q_override: float | None
    k_hat: tuple[float, float, float, float] | None
    estimate_samples: int
    # test-function overrides
    tf_p: float | None
    tf_ell: float | None
    tf_w_star: float | None
    # initial conditions
    ics: tuple[ICSpec, ICSpec, ICSpec, ICSpec]
    epsilon: float
    # output
    output_dir: str
    snapshot_interval: float
    seed: int


_FLOAT_KEYS = {
    "model.beta", "model.mu", "model.q",
    "grid.extent.x", "grid.extent.y",
    "step.t_end", "step.cfl_safety", "step.output_interval",
    "step.blowup_threshold", "step.dt_floor",
    "window.xi", "window.delta", "window.gamma", "window.lambda",
    "envelope.alpha", "envelope.eta", "envelope.tolerance",
    "envelope.grad_v0_q",
    "envelope.k1", "envelope.k2", "envelope.k3", "envelope.k4",
    "testfn.p", "testfn.ell", "testfn.w_star",
    "ic.epsilon", "output.snapshot_interval",
}
_INT_KEYS = {"model.n", "grid.cells.x", "grid.cells.y",
             "envelope.estimate_samples", "seed"}
_STR_KEYS = {"model.f_kind", "output.dir"}
for _f in FIELD_NAMES:
    _FLOAT_KEYS |= {f"ic.{_f}.value", f"ic.{_f}.amplitude",
                    f"ic.{_f}.center.x", f"ic.{_f}.center.y", f"ic.{_f}.width"}
    _INT_KEYS |= {f"ic.{_f}.modes", f"ic.{_f}.seed"}
    _STR_KEYS |= {f"ic.{_f}.kind"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS

_DEFAULTS = {
    "model.beta": "2.0",
    "model.mu": "0.4",
    "model.f_kind": "linear",
    "model.n": "1",
    "model.q": "4.0",
    "grid.extent.x": "1.0",
    "grid.cells.x": "256",
    "step.t_end": "200.0",
    "step.cfl_safety": "0.45",
    "step.output_interval": "0.5",
    "step.blowup_threshold": "1000000.0",
    "step.dt_floor": "1e-13",
    "window.xi": "0.45",
    "window.delta": "0.045",
    "envelope.eta": "0.1",
    "envelope.tolerance": "0.01",
    "envelope.estimate_samples": "32",
    "ic.epsilon": "0.001",
    "ic.u.kind": "constant",
    "ic.u.value": "2.0",
    "ic.v.kind": "bump",
    "ic.v.amplitude": "1.0",
    "ic.v.center.x": "0.5",
    "ic.v.width": "0.1",
    "ic.w.kind": "bump",
    "ic.w.amplitude": "1.0",
    "ic.w.center.x": "0.5",
    "ic.w.width": "0.1",
    "ic.z.kind": "bump",
    "ic.z.amplitude": "1.0",
    "ic.z.center.x": "0.5",
    "ic.z.width": "0.1",
    "output.dir": "out",
    "output.snapshot_interval": "0.0",
    "seed": "1234",
}


def _coerce(key: str, raw: str, where: str):
    try:
        if key in _FLOAT_KEYS:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError("non-finite")
            return val
        if key in _INT_KEYS:
            return int(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"{where}: bad value for key '{key}': {raw!r} ({e})")


def parse_config(text: str) -> RunConfig:
    """Parse a config (defaults overlaid by the given text)."""
    raw = dict(_DEFAULTS)
    seen = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {ln}: unknown config key '{key}'")
        if key in seen:
            raise ConfigError(f"line {ln}: duplicate key '{key}' "
                              f"(first on line {seen[key]})")
        seen[key] = ln
        raw[key] = value
    values = {}
    for key, rv in raw.items():
        where = f"line {seen[key]}" if key in seen else "default"
        values[key] = _coerce(key, rv, where)
    return _assemble(values)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def default_config() -> RunConfig:
    return parse_config("")


def _assemble(v: dict) -> RunConfig:
    def opt(key):
        return v.get(key)

    try:
        fk = FKind(v["model.f_kind"])
    except ValueError:
        raise ConfigError(f"model.f_kind must be one of "
                          f"{[k.value for k in FKind]}, got {v['model.f_kind']!r}")
    try:
        params = ModelParams(beta=v["model.beta"], mu=v["model.mu"],
                             f_kind=fk, n=v["model.n"], q=v["model.q"])
    except ValueError as e:
        raise ConfigError(f"model.*: {e}")

    has_y = "grid.extent.y" in v or "grid.cells.y" in v
    if has_y and not ("grid.extent.y" in v and "grid.cells.y" in v):
        raise ConfigError("2D grids need both grid.extent.y and grid.cells.y")
    domain = None
    if "grid.extent.x" in v:
        extents = (v["grid.extent.x"],) + ((v["grid.extent.y"],) if has_y else ())
        cells = (v["grid.cells.x"],) + ((v["grid.cells.y"],) if has_y else ())
        try:
            domain = BoxDomain(extents=extents, cells=cells)
        except ValueError as e:
            raise ConfigError(f"grid.*: {e}")
        if params.n <= 2 and domain.ndim != params.n:
            raise ConfigError(f"model.n = {params.n} but the grid is "
                              f"{domain.ndim}D")
    if params.n <= 2 and domain is None:
        raise ConfigError("simulation configs (n <= 2) need a grid")

    try:
        step = StepConfig(t_end=v["step.t_end"],
                          cfl_safety=v["step.cfl_safety"],
                          output_interval=v["step.output_interval"],
                          blowup_threshold=v["step.blowup_threshold"],
                          dt_floor=v["step.dt_floor"])
    except ValueError as e:
        raise ConfigError(f"step.*: {e}")

    k_keys = ["envelope.k1", "envelope.k2", "envelope.k3", "envelope.k4"]
    k_present = [k for k in k_keys if k in v]
    if k_present and len(k_present) != 4:
        raise ConfigError("set all four of envelope.k1..k4 or none")
    k_hat = tuple(v[k] for k in k_keys) if len(k_present) == 4 else None

    ics = []
    for name in FIELD_NAMES:
        kind = v[f"ic.{name}.kind"]
        if kind not in IC_KINDS:
            raise ConfigError(f"ic.{name}.kind must be one of {IC_KINDS}, "
                              f"got {kind!r}")
        spec = ICSpec(kind=kind)
        if kind == "constant":
            val = v.get(f"ic.{name}.value", 0.0)
            if val < 0:
                raise ConfigError(f"ic.{name}.value must be >= 0")
            spec = replace(spec, value=val)
        elif kind == "bump":
            center = (v.get(f"ic.{name}.center.x", 0.5),)
            if domain is not None and domain.ndim == 2:
                center = center + (v.get(f"ic.{name}.center.y", 0.5),)
            width = v.get(f"ic.{name}.width", 0.1)
            if width <= 0:
                raise ConfigError(f"ic.{name}.width must be positive")
            spec = replace(spec, amplitude=v.get(f"ic.{name}.amplitude", 0.0),
                           center=center, width=width)
        else:
            modes = v.get(f"ic.{name}.modes", 8)
            if modes < 1:
                raise ConfigError(f"ic.{name}.modes must be >= 1")
            spec = replace(spec, amplitude=v.get(f"ic.{name}.amplitude", 0.0),
                           modes=modes, seed=v.get(f"ic.{name}.seed", 0))
        ics.append(spec)

    eps = v["ic.epsilon"]
    if eps < 0:
        raise ConfigError("ic.epsilon must be >= 0")
    eta = v["envelope.eta"]
    if eta <= 0:
        raise ConfigError("envelope.eta must be positive")
    snap = v["output.snapshot_interval"]
    if snap < 0:
        raise ConfigError("output.snapshot_interval must be >= 0")
    if snap > 0 and abs((snap / step.output_interval) % 1.0) > 1e-9:
        raise ConfigError("output.snapshot_interval must be a multiple of "
                          "step.output_interval")

    return RunConfig(
        params=params, domain=domain, step=step,
        xi=opt("window.xi"), delta=opt("window.delta"),
        gamma=opt("window.gamma"), lam=opt("window.lambda"),
        alpha=opt("envelope.alpha"), eta=eta,
        tolerance=v["envelope.tolerance"],
        grad_v0_q_override=opt("envelope.grad_v0_q"),
        k_hat=k_hat, estimate_samples=v["envelope.estimate_samples"],
        tf_p=opt("testfn.p"), tf_ell=opt("testfn.ell"),
        tf_w_star=opt("testfn.w_star"),
        ics=tuple(ics), epsilon=eps,
        output_dir=v["output.dir"], snapshot_interval=snap,
        seed=v["seed"])


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)     # shortest string that round-trips exactly
    return str(x)


def format_config(cfg: RunConfig) -> str:
    """Canonical textual form; parse_config(format_config(c)) == c."""
    out = []

    def put(key, val):
        if val is not None:
            out.append(f"{key} = {_fmt(val)}")

    p = cfg.params
    put("model.beta", p.beta)
    put("model.mu", p.mu)
    put("model.f_kind", p.f_kind.value)
    put("model.n", p.n)
    put("model.q", p.q)
    if cfg.domain is not None:
        put("grid.extent.x", cfg.domain.extents[0])
        put("grid.cells.x", cfg.domain.cells[0])
        if cfg.domain.ndim == 2:
            put("grid.extent.y", cfg.domain.extents[1])
            put("grid.cells.y", cfg.domain.cells[1])
    s = cfg.step
    put("step.t_end", s.t_end)
    put("step.cfl_safety", s.cfl_safety)
    put("step.output_interval", s.output_interval)
    put("step.blowup_threshold", s.blowup_threshold)
    put("step.dt_floor", s.dt_floor)
    put("window.xi", cfg.xi)
    put("window.delta", cfg.delta)
    put("window.gamma", cfg.gamma)
    put("window.lambda", cfg.lam)
    put("envelope.alpha", cfg.alpha)
    put("envelope.eta", cfg.eta)
    put("envelope.tolerance", cfg.tolerance)
    put("envelope.grad_v0_q", cfg.grad_v0_q_override)
    if cfg.k_hat is not None:
        for i, k in enumerate(cfg.k_hat, start=1):
            put(f"envelope.k{i}", k)
    put("envelope.estimate_samples", cfg.estimate_samples)
    put("testfn.p", cfg.tf_p)
    put("testfn.ell", cfg.tf_ell)
    put("testfn.w_star", cfg.tf_w_star)
    put("ic.epsilon", cfg.epsilon)
    for name, spec in zip(FIELD_NAMES, cfg.ics):
        put(f"ic.{name}.kind", spec.kind)
        if spec.kind == "constant":
            put(f"ic.{name}.value", spec.value)
        elif spec.kind == "bump":
            put(f"ic.{name}.amplitude", spec.amplitude)
            put(f"ic.{name}.center.x", spec.center[0])
            if len(spec.center) == 2:
                put(f"ic.{name}.center.y", spec.center[1])
            put(f"ic.{name}.width", spec.width)
        else:
            put(f"ic.{name}.amplitude", spec.amplitude)
            put(f"ic.{name}.modes", spec.modes)
            put(f"ic.{name}.seed", spec.seed)
    put("output.dir", cfg.output_dir)
    put("output.snapshot_interval", cfg.snapshot_interval)
    put("seed", cfg.seed)
    return "\n".join(out) + "\n"


def _noise_field(d: BoxDomain, rng, modes: int) -> np.ndarray:
    coeff = np.zeros(d.cells)
    if d.ndim == 1:
        m = min(modes, d.cells[0] - 1)
        coeff[1:m + 1] = rng.standard_normal(m)
    else:
        m0 = min(modes, d.cells[0] - 1)
        m1 = min(modes, d.cells[1] - 1)
        block = rng.standard_normal((m0 + 1, m1 + 1))
        block[0, 0] = 0.0
        coeff[:m0 + 1, :m1 + 1] = block
    f = scipy.fft.idctn(coeff, type=2, norm="ortho")
    peak = np.abs(f).max()
    return f / peak if peak > 0 else f


def build_field(spec: ICSpec, name: str, d: BoxDomain, params: ModelParams,
                global_seed: int) -> np.ndarray:
    equil = params.beta if name == "u" else 0.0
    if spec.kind == "constant":
        f = np.full(d.cells, spec.value)
    elif spec.kind == "bump":
        coords = d.meshgrid()
        r2 = sum((x - c) ** 2 for x, c in zip(coords, spec.center))
        f = equil + spec.amplitude * np.exp(-r2 / (2.0 * spec.width ** 2))
    else:
        rng = np.random.default_rng(
            [global_seed, FIELD_NAMES.index(name), spec.seed])
        f = spec.amplitude * _noise_field(d, rng, spec.modes)
    return np.clip(f, 0.0, None)


def build_initial_state(cfg: RunConfig) -> SimState:
    """Realize the configured initial data; epsilon scales v, w, z."""
    if cfg.domain is None:
        raise ConfigError("no grid configured")
    fields = {}
    for name, spec in zip(FIELD_NAMES, cfg.ics):
        f = build_field(spec, name, cfg.domain, cfg.params, cfg.seed)
        if name != "u":
            f = f * cfg.epsilon
        fields[name] = f
    return SimState(t=0.0, **fields)


@dataclass
class ResolvedSetup:
    """Everything derived from a config that the CLI reports and checks use."""
    cfg: RunConfig
    params: ModelParams
    domain: BoxDomain | None
    lam: float
    window: StabilityWindow | None
    window_reason: str           # empty when a window exists
    xi_monitor: float            # weight used for the v + xi*w diagnostics
    tp: TestFunctionParams
    k_hat: tuple[float, float, float, float]
    k_source: str                # "config" | "estimated" | "default"
    initial: SimState | None
    alpha: float
    grad_v0_q: float
    norm_vw0: float
    m_star: float
    constants: EnvelopeConstants | None
    hyp_vw_small: bool | None    # ||v0 + xi w0||_inf <= eps2
    hyp_grad_small: bool | None  # ||grad v0||_q <= sqrt(eps2)


def resolve_setup(cfg: RunConfig, estimate_samples: int | None = None,
                  need_initial: bool = True) -> ResolvedSetup:
    params = cfg.params
    domain = cfg.domain

    if cfg.lam is not None:
        lam = cfg.lam
        if lam <= 0:
            raise ConfigError("window.lambda must be positive")
    elif domain is not None:
        lam = semigroup.neumann_lambda(domain)
    else:
        raise ConfigError("constants-only mode (no grid) needs window.lambda")

    window = None
    window_reason = ""
    try:
        window = make_window(params, lam, xi=cfg.xi, delta=cfg.delta,
                             gamma=cfg.gamma)
    except ValueError as e:
        window_reason = str(e)
    xi_monitor = window.xi if window is not None else (
        cfg.xi if cfg.xi is not None else MONITOR_XI)

    tp = make_test_function_params(params, xi_monitor, p=cfg.tf_p,
                                   ell=cfg.tf_ell, w_star=cfg.tf_w_star)

    initial = None
    alpha = cfg.alpha
    grad_v0_q = cfg.grad_v0_q_override
    norm_vw0 = 0.0
    m_star = 0.0
    if need_initial and domain is not None:
        initial = build_initial_state(cfg)
        if alpha is None:
            alpha = linf_norm(initial.u - params.beta)
        if grad_v0_q is None:
            grad_v0_q = grad_lq_norm(initial.v, params.q, domain)
        norm_vw0 = linf_norm(initial.v + xi_monitor * initial.w)
        m_star = (l1_norm(initial.u + initial.w + initial.z, domain)
                  + params.beta * domain.volume)
    if alpha is None:
        raise ConfigError("constants-only mode needs envelope.alpha")
    if grad_v0_q is None:
        grad_v0_q = 0.0

    if cfg.k_hat is not None:
        k_hat, k_source = cfg.k_hat, "config"
    elif domain is not None:
        ns = estimate_samples if estimate_samples is not None \
            else cfg.estimate_samples
        q = params.q
        pairs = {1: (math.inf, q), 2: (q, q), 3: (q, q), 4: (math.inf, q)}
        k_hat = tuple(
            semigroup.estimate_constant(kind, pairs[kind][0], pairs[kind][1],
                                        domain, ns, seed=cfg.seed * 4 + kind)
            for kind in (1, 2, 3, 4))
        k_source = "estimated"
    else:
        k_hat, k_source = (1.0, 1.0, 1.0, 1.0), "default"

    constants = None
    hyp_vw = hyp_grad = None
    if window is not None:
        constants = envelope_constants(params, window, alpha, cfg.eta,
                                       grad_v0_q, k_hat,
                                       domain.volume if domain else 1.0,
                                       tp.w_star, rigorous=False)
        if initial is not None:
            hyp_vw = bool(norm_vw0 <= constants.eps2)
            hyp_grad = bool(grad_v0_q <= math.sqrt(constants.eps2))

    return ResolvedSetup(cfg=cfg, params=params, domain=domain, lam=lam,
                         window=window, window_reason=window_reason,
                         xi_monitor=xi_monitor, tp=tp, k_hat=k_hat,
                         k_source=k_source, initial=initial, alpha=alpha,
                         grad_v0_q=grad_v0_q, norm_vw0=norm_vw0,
                         m_star=m_star, constants=constants,
                         hyp_vw_small=hyp_vw, hyp_grad_small=hyp_grad)
