"""Command-line front end.

Subcommands
    simulate   march the PDE, writing diagnostics.csv / manifest.txt /
               optional field snapshots into the output directory
    constants  resolve and print the stability window, semigroup constants,
               and the full envelope-constant set for a config
    sweep      run a family of simulations along one parameter axis
               (model.beta, model.mu, or ic.epsilon), recording fitted
               decay rates; --bisect-epsilon refines the stability threshold
    verify     execute the nine-check verification battery

The output directory is ``$GRANULOMA_OUTPUT_ROOT / output.dir`` (root
defaults to the working directory); -o overrides output.dir.

Exit codes: 0 success; 1 failed verification checks; 2 config errors;
3 simulate run stopped by the blow-up guard or a collapsed timestep.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import diagnostics, verify
from .config import (ConfigError, RunConfig, default_config, format_config,
                     load_config, resolve_setup)
from .model import reproduction_number, xi_interval
from .stepper import run

OUTPUT_ROOT_ENV = "GRANULOMA_OUTPUT_ROOT"
SWEEP_AXES = ("model.beta", "model.mu", "ic.epsilon")


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.output:
        cfg = replace(cfg, output_dir=args.output)
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    d = root / cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest_lines(setup, res=None) -> list[str]:
    cfg = setup.cfg
    lines = []

    def put(key, val):
        lines.append(f"{key} = {_fmt(val)}")

    put("reproduction_number", reproduction_number(setup.params))
    put("lambda", setup.lam)
    if setup.window is not None:
        w = setup.window
        for k in ("xi", "delta", "gamma", "lam"):
            put(f"window.{k}", getattr(w, k))
    else:
        put("window.reason", setup.window_reason)
    put("alpha", setup.alpha)
    put("grad_v0_q", setup.grad_v0_q)
    put("norm_vw0", setup.norm_vw0)
    put("m_star", setup.m_star)
    put("k.source", setup.k_source)
    for i, k in enumerate(setup.k_hat, start=1):
        put(f"k.{i}", k)
    tp = setup.tp
    for k in ("p", "ell", "w_star", "b0", "kappa", "zeta"):
        put(f"testfn.{k}", getattr(tp, k))
    if setup.constants is not None:
        c = setup.constants
        for k in ("S1", "S2", "S3", "c_K", "t_star", "M", "M_tilde",
                  "C1", "C2", "D", "eps1", "eps2", "zeta", "rigorous"):
            put(f"constants.{k}", getattr(c, k))
        put("hypothesis.vw_small", setup.hyp_vw_small)
        put("hypothesis.grad_small", setup.hyp_grad_small)
    if res is not None:
        put("run.terminated", res.terminated)
        put("run.t_final", res.final.t)
        put("run.n_steps", res.n_steps)
        put("run.dt_min", res.dt_min)
        put("run.dt_max", res.dt_max)
        put("run.snapshots", len(res.snapshots))
    put("tolerance", cfg.tolerance)
    return lines


def _write_snapshot(state, dom, outdir: Path):
    coords = dom.meshgrid()
    for name in "uvwz":
        f = getattr(state, name)
        path = outdir / f"{name}_t{state.t:g}.csv"
        with open(path, "w") as fh:
            if dom.ndim == 1:
                fh.write("x,value\n")
                for x, val in zip(coords[0], f):
                    fh.write(f"{x:.17g},{val:.17g}\n")
            else:
                fh.write("x,y,value\n")
                X, Y = coords
                for i in range(f.shape[0]):
                    for j in range(f.shape[1]):
                        fh.write(f"{X[i, j]:.17g},{Y[i, j]:.17g},"
                                 f"{f[i, j]:.17g}\n")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    setup = resolve_setup(cfg)
    outdir = _outdir(cfg)
    snap = cfg.snapshot_interval if cfg.snapshot_interval > 0 else None
    res = run(setup.initial, cfg.domain, cfg.params, cfg.step,
              xi=setup.xi_monitor, tp=setup.tp, snapshot_interval=snap)
    diagnostics.write_rows(res.rows, outdir / "diagnostics.csv")
    (outdir / "config.cfg").write_text(format_config(cfg))
    (outdir / "manifest.txt").write_text(
        "\n".join(_manifest_lines(setup, res)) + "\n")
    if res.snapshots:
        snapdir = outdir / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for st in res.snapshots:
            _write_snapshot(st, cfg.domain, snapdir)
    last = res.rows[-1]
    print(f"terminated: {res.terminated} at t={res.final.t:g} "
          f"({res.n_steps} steps, dt in [{res.dt_min:.3g}, {res.dt_max:.3g}])")
    print(f"final: |u-beta|={last.linf_u_minus_beta:.6g} "
          f"w1q_v={last.w1q_v:.6g} w1q_w={last.w1q_w:.6g} "
          f"|z|={last.linf_z:.6g} mass={last.l1_mass:.6g}")
    print(f"wrote {outdir}/diagnostics.csv")
    return 0 if res.terminated == "t_end" else 3


def cmd_constants(args) -> int:
    cfg = _load(args)
    samples = args.estimate_k
    setup = resolve_setup(cfg, estimate_samples=samples,
                          need_initial=cfg.domain is not None)
    p = setup.params
    r0 = reproduction_number(p)
    if p.beta <= 1.0:
        verdict = "not applicable (beta <= 1)"
    elif r0 < 1.0:
        verdict = "subcritical (R0 < 1, beta > 1)"
    else:
        verdict = "supercritical (R0 >= 1): no admissible stability window"
    print(f"R0 = {r0:.17g}  ->  {verdict}")
    iv = xi_interval(p)
    print(f"xi interval: {iv}" if iv else "xi interval: empty")
    print(f"lambda = {setup.lam:.17g}")
    for line in _manifest_lines(setup):
        print(line)
    if setup.constants is not None and not setup.constants.rigorous:
        print("note: semigroup constants are empirical working values; "
              "the envelope set is non-rigorous")
    return 0


def _set_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "model.beta":
        return replace(cfg, params=replace(cfg.params, beta=value))
    if axis == "model.mu":
        return replace(cfg, params=replace(cfg.params, mu=value))
    if axis == "ic.epsilon":
        return replace(cfg, epsilon=value)
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def _sweep_point(cfg: RunConfig, axis: str, value: float):
    c = _set_axis(cfg, axis, value)
    try:
        setup = resolve_setup(c)
        res = run(setup.initial, c.domain, c.params, c.step,
                  xi=setup.xi_monitor, tp=setup.tp)
        series = [(r.t, r.linf_vw) for r in res.rows]
        try:
            _, rate, r2 = diagnostics.fit_rate(series, 0.25)
        except diagnostics.NoExponentialRegime:
            rate = r2 = math.nan
        if setup.window is not None:
            floor = diagnostics.decay_noise_floor(c.params.beta, res.dt_min)
            rep = diagnostics.check_theorem_decay(res.rows,
                                                  setup.window.gamma,
                                                  noise_floor=floor)
            theorem = bool(rep.passed)
        else:
            theorem = False
        return (value, rate, r2, theorem, res.terminated)
    except Exception as e:                 # record the point, keep sweeping
        return (value, math.nan, math.nan, False, f"error:{type(e).__name__}")


def _run_points(cfg, axis, values):
    workers = max(1, min(len(values), os.cpu_count() or 1))
    with concurrent.futures.ThreadPoolExecutor(workers) as ex:
        return list(ex.map(lambda v: _sweep_point(cfg, axis, v), values))


def cmd_sweep(args) -> int:
    cfg = _load(args)
    axis = args.axis
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    if args.points < 2:
        raise ConfigError("sweep needs --points >= 2")
    lo, hi = args.from_, args.to
    values = [lo + (hi - lo) * k / (args.points - 1)
              for k in range(args.points)]
    rows = _run_points(cfg, axis, values)
    outdir = _outdir(cfg)
    lines = ["axis,value,fitted_rate,r2,theorem_pass,terminated"]
    for value, rate, r2, theorem, term in rows:
        rate_s = "" if math.isnan(rate) else f"{rate:.17g}"
        r2_s = "" if math.isnan(r2) else f"{r2:.17g}"
        lines.append(f"{axis},{value:.17g},{rate_s},{r2_s},{theorem},{term}")
        print(f"{axis}={value:<22.10g} rate={rate:<12.6g} r2={r2:<10.4g} "
              f"theorem={'pass' if theorem else 'fail'} ({term})")
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {outdir}/sweep.csv")

    if args.bisect_epsilon:
        if axis != "ic.epsilon":
            raise ConfigError("--bisect-epsilon requires --axis ic.epsilon")
        return _bisect_epsilon(cfg, lo, hi, outdir)
    return 0


def _bisect_epsilon(cfg: RunConfig, lo: float, hi: float,
                    outdir: Path) -> int:
    """Log-space bisection for the largest epsilon that still decays."""
    if lo <= 0 or hi <= lo:
        raise ConfigError("bisect needs 0 < from < to")

    def decays(eps: float) -> bool:
        return _sweep_point(cfg, "ic.epsilon", eps)[3]

    records = []
    ok_lo, ok_hi = decays(lo), decays(hi)
    records.append((lo, hi, ok_lo, ok_hi))
    if not ok_lo:
        print(f"no decay even at epsilon={lo:g}; no threshold in bracket")
        return 0
    if ok_hi:
        print(f"decay holds up to epsilon={hi:g}; no threshold in bracket")
        return 0
    while hi / lo > 1.1:
        mid = math.sqrt(lo * hi)
        if decays(mid):
            lo = mid
        else:
            hi = mid
        records.append((lo, hi, True, False))
        print(f"bracket: [{lo:.6g}, {hi:.6g}]")
    lines = ["eps_lo,eps_hi,decays_lo,decays_hi"]
    lines += [f"{a:.17g},{b:.17g},{da},{db}" for a, b, da, db in records]
    (outdir / "bisect.csv").write_text("\n".join(lines) + "\n")
    print(f"epsilon threshold in [{lo:.6g}, {hi:.6g}] "
          f"(relative width {hi / lo - 1:.3g}); wrote {outdir}/bisect.csv")
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    outdir = _outdir(cfg)
    items = verify.run_battery(cfg, outdir, progress=print)
    with open(outdir / "report.jsonl", "w") as fh:
        for it in items:
            fh.write(json.dumps({"index": it.index, "name": it.name,
                                 "passed": it.passed, "detail": it.detail},
                                sort_keys=True) + "\n")
    n_pass = sum(1 for it in items if it.passed)
    n_fail = sum(1 for it in items if it.passed is False)
    print(f"passed {n_pass}/{len(items)} checks"
          + (f", {n_fail} FAILED" if n_fail else ""))
    return 1 if n_fail else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="granuloma",
        description="Chemotaxis granuloma model: simulation and "
                    "verification harness.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", metavar="FILE",
                       help="config file (defaults used when omitted)")
        p.add_argument("-o", "--output", metavar="DIR",
                       help="override output.dir")

    p = sub.add_parser("simulate", help="run the solver")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("constants", help="print window + envelope constants")
    common(p)
    p.add_argument("--estimate-k", type=int, metavar="N", default=None,
                   help="samples per semigroup-constant estimate")
    p.set_defaults(fn=cmd_constants)

    p = sub.add_parser("sweep", help="parameter sweep")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--from", dest="from_", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--bisect-epsilon", action="store_true",
                   help="refine the decay/no-decay epsilon threshold")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="run the verification battery")
    common(p)
    p.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
