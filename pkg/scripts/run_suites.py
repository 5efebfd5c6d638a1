#!/usr/bin/env python3
"""Bulk check-suite runner on the small calibration stack.

Builds the fast M = 144 marker/tiling/signal stack (arc radius 1/400) and
hammers the tiling, phi-profile, and band suites with a configurable number
of random instances.  Useful for soak runs beyond what the unit tests and
the pipeline's own sampling budgets cover.
"""

import argparse
import time
from fractions import Fraction

from meandimlab.dynsys import SystemSpec
from meandimlab.marker import make_marker_spec
from meandimlab.pipeline import StarMap, band_suite, phi_suite, tiling_suite
from meandimlab.signal import GammaVariant, SignalParams
from meandimlab.tiling import TilingParams


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100, help="instances per suite")
    ap.add_argument(
        "--window-mult",
        type=int,
        default=100,
        help="tiling/phi window length in multiples of M1",
    )
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if args.samples < 1 or args.window_mult < 10:
        ap.error("need samples >= 1 and window-mult >= 10")

    mspec = make_marker_spec(SystemSpec(D=1), 0, Fraction(1, 400))
    tparams = TilingParams(r=1.0, delta=0.5, c=1.5, M=mspec.M, M1=mspec.M1)
    sparams = SignalParams.from_tiling(tparams, 3, GammaVariant.MAX_AT_ZERO)
    F = StarMap(mspec.system, eps_half=0.125, n_horizon=3, m=3, seed=args.seed)
    span = args.window_mult * mspec.M1
    N = span

    t0 = time.perf_counter()
    suites = {}
    tsuites, _ = tiling_suite(
        mspec, tparams, samples=args.samples, seed=args.seed,
        window=(-span / 2.0, span / 2.0),
    )
    suites.update(tsuites)
    psuites, sep, est = phi_suite(
        mspec, tparams, sparams, samples=args.samples, N=N,
        eps=0.25, seed=args.seed + 1,
    )
    suites.update(psuites)
    bsuites, _ = band_suite(
        mspec, tparams, sparams, F, samples=max(4, args.samples // 8),
        N=1000, seed=args.seed + 2,
    )
    suites.update(bsuites)
    elapsed = time.perf_counter() - t0

    for name, suite in suites.items():
        print(f"{name:<16}{suite.result().line()}")
    print(f"{'separation':<16}{sep.line()}")
    print(
        f"free fraction max {est['free_fraction_max']:.4g}, "
        f"width estimate {est['z_width']['value']:.4g} "
        f"({args.samples} instances, window {span}, {elapsed:.1f}s)"
    )
    failed = sum(s.failures for s in suites.values()) + (0 if sep.passed else 1)
    print("all suites pass" if failed == 0 else f"{failed} failures")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
