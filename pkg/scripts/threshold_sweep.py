#!/usr/bin/env python3
"""Locate the finite-amplitude stability threshold in the IC size epsilon.

The subcritical equilibrium is only locally stable: small infections decay
at the theorem rate, large ones escape and blow up (or saturate).  This
script log-bisects epsilon between a decaying and a non-decaying bracket,
using the same pass criterion as the verification battery (tail fit of the
four-norm sum against 0.9*gamma).

Example:
    python3 scripts/threshold_sweep.py --lo 0.5 --hi 2.0
"""

import argparse
import math
import sys
from dataclasses import replace

from granuloma import diagnostics
from granuloma.config import parse_config, resolve_setup
from granuloma.stepper import run


def decays(cfg, eps):
    c = replace(cfg, epsilon=eps)
    setup = resolve_setup(c)
    res = run(setup.initial, c.domain, c.params, c.step,
              xi=setup.xi_monitor, tp=setup.tp)
    if res.terminated != "t_end" or setup.window is None:
        return False, res.terminated
    floor = diagnostics.decay_noise_floor(c.params.beta, res.dt_min)
    rep = diagnostics.check_theorem_decay(res.rows, setup.window.gamma,
                                          noise_floor=floor)
    return bool(rep.passed), res.terminated


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=64)
    ap.add_argument("--t-end", type=float, default=40.0)
    ap.add_argument("--lo", type=float, default=0.5)
    ap.add_argument("--hi", type=float, default=2.0)
    ap.add_argument("--rtol", type=float, default=0.05,
                    help="stop when hi/lo - 1 <= rtol")
    ap.add_argument("--out", default="threshold.csv")
    args = ap.parse_args(argv)
    if not (0.0 < args.lo < args.hi):
        ap.error("need 0 < lo < hi")

    cfg = parse_config(f"grid.cells.x = {args.cells}\n"
                       f"step.t_end = {args.t_end}\n")
    lo, hi = args.lo, args.hi
    ok_lo, term_lo = decays(cfg, lo)
    ok_hi, term_hi = decays(cfg, hi)
    print(f"eps={lo:g}: {'decays' if ok_lo else 'does not decay'} ({term_lo})")
    print(f"eps={hi:g}: {'decays' if ok_hi else 'does not decay'} ({term_hi})")
    if not ok_lo or ok_hi:
        print("no threshold inside the bracket; widen --lo/--hi")
        return 1

    records = [(lo, hi)]
    while hi / lo - 1.0 > args.rtol:
        mid = math.sqrt(lo * hi)
        ok, term = decays(cfg, mid)
        if ok:
            lo = mid
        else:
            hi = mid
        records.append((lo, hi))
        print(f"eps={mid:.6g}: {'decays' if ok else 'escapes'} ({term})  "
              f"bracket [{lo:.6g}, {hi:.6g}]")

    with open(args.out, "w") as fh:
        fh.write("eps_lo,eps_hi\n")
        for a, b in records:
            fh.write(f"{a:.17g},{b:.17g}\n")
    print(f"threshold in [{lo:.6g}, {hi:.6g}] "
          f"(relative width {hi / lo - 1:.3g}); wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
