"""Marker data on the rotation factor: the arc pair, the ramp function phi,
and the return/coverage constants M and M1.

phi depends only on the circle coordinate: it equals 1 on the closed inner
arc, 0 outside the open outer arc, with a linear ramp between.  M is the
first return time of the outer arc to itself; M1-1 is the first window
half-length whose rotation orbit is dense enough that every circle point
visits the inner arc.  Both are computed by exact integer arithmetic on the
q-grid, so the reported constants are not estimates.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynsys import (
    ConfigurationError,
    OrbitWindow,
    SystemSpec,
    WindowExhaustionError,
    make_point,
)

_M_SEARCH_CAP = 10**8
_M1_SEARCH_CAP = 10**8


class MarkerConstructionError(RuntimeError):
    """A marker invariant failed; carries the offending witness."""


def _frac_num2(spec: SystemSpec, value: Fraction) -> int:
    """value as an exact numerator over 2q (half-grid units)."""
    scaled = value * (2 * spec.q)
    if scaled.denominator != 1:
        raise ConfigurationError(
            "arc radii must be exact multiples of 1/(2q) for exact comparison"
        )
    return int(scaled)


@dataclass(frozen=True)
class MarkerSpec:
    system: SystemSpec
    arc_center: Fraction
    arc_radius: Fraction
    inner_radius: Fraction
    M: int
    M1: int

    def __post_init__(self):
        if not (0 < self.inner_radius < self.arc_radius < Fraction(1, 4)):
            raise ConfigurationError("need 0 < inner_radius < arc_radius < 1/4")
        if self.M < 2:
            raise ConfigurationError("arc returns to itself in one step (M < 2)")
        if self.M1 <= self.M:
            raise ConfigurationError("coverage constant M1 must exceed M")

    @property
    def center_num(self) -> int:
        c = (self.arc_center % 1) * self.system.q
        if c.denominator != 1:
            raise ConfigurationError("arc_center must have denominator dividing q")
        return int(c)

    # radii in half-grid units (numerator over 2q), exact
    @property
    def outer_num2(self) -> int:
        return _frac_num2(self.system, self.arc_radius)

    @property
    def inner_num2(self) -> int:
        return _frac_num2(self.system, self.inner_radius)


def _phi_and_t2(spec: MarkerSpec, x: OrbitWindow, lo: int, hi: int):
    """phi values plus the clamped arc distances in half-grid units.

    The clamped distance t2eff = max(t2, inner2) determines phi on the
    support exactly: phi = (outer2 - t2eff) / (outer2 - inner2).  Carrying
    the integer t2eff lets downstream height arithmetic avoid cancellation.
    """
    sys_ = spec.system
    nums = x.circle_nums(lo, hi)
    d = (nums - spec.center_num) % sys_.q
    t2 = 2 * np.minimum(d, sys_.q - d)  # arc distance in half-grid units
    inner2, outer2 = spec.inner_num2, spec.outer_num2
    out = np.zeros(len(t2))
    out[t2 <= inner2] = 1.0
    ramp = (t2 > inner2) & (t2 < outer2)
    if ramp.any():
        out[ramp] = (outer2 - t2[ramp]) / float(outer2 - inner2)
    return out, np.maximum(t2, inner2)


def phi_profile(spec: MarkerSpec, x: OrbitWindow, lo: int, hi: int) -> np.ndarray:
    """phi(T^k x) for k = lo..hi, vectorized and exact at the endpoints:
    values are exactly 1.0 on the inner arc and exactly 0.0 outside the
    open outer arc; the ramp region is evaluated in floats."""
    return _phi_and_t2(spec, x, lo, hi)[0]


def phi_eval(spec: MarkerSpec, x: OrbitWindow) -> float:
    return float(phi_profile(spec, x, 0, 0)[0])


def phi_lipschitz_constant(spec: MarkerSpec) -> float:
    """Slope of the ramp: |phi(c1)-phi(c2)| <= slope * arcdist(c1,c2)."""
    return float(2 * spec.system.q / (spec.outer_num2 - spec.inner_num2))


def compute_M(system: SystemSpec, arc_radius: Fraction) -> int:
    """Smallest k >= 1 with arcdist(k*theta, 0) <= 2*arc_radius, by exact
    blockwise scan.  The arc returns to itself exactly at such k."""
    q, p = system.q, system.p
    two_r4 = 2 * _frac_num2(system, arc_radius)  # 2*radius in half-grid units
    block = 1 << 16
    k0 = 1
    while k0 <= _M_SEARCH_CAP:
        n = min(block, _M_SEARCH_CAP - k0 + 1)
        anchor = (k0 * p) % q
        ks = np.arange(n, dtype=np.int64)
        d = (anchor + ks * p) % q
        d = np.minimum(d, q - d)
        hits = np.nonzero(2 * d <= two_r4)[0]
        if len(hits):
            return k0 + int(hits[0])
        k0 += n
    raise MarkerConstructionError(
        "no arc return within the search horizon; adjust arc_radius"
    )


def _max_gap_ok(system: SystemSpec, N: int, inner2: int) -> bool:
    """True iff the sorted points {k*theta mod 1 : |k| <= N} have every
    circular gap < 2*inner_radius (exact integer comparison)."""
    from .dynsys import circle_block

    pos = np.sort(circle_block(system, 0, -N, 2 * N + 1))
    gaps = np.diff(pos)
    wrap = pos[0] + system.q - pos[-1]
    worst = max(int(gaps.max(initial=0)), int(wrap))
    return 2 * worst < 2 * inner2  # worst in 1/q units vs inner in 1/(2q)


def compute_M1(system: SystemSpec, inner_radius: Fraction, M: int) -> int:
    """Smallest M1 with: every circle point enters the closed inner arc
    within M1-1 rotation steps in one of the two directions.

    Equivalent exact criterion: the circular gaps of {k*theta : |k| <= M1-1}
    are all < 2*inner_radius (then any point is within inner_radius of some
    orbit point).  Found by doubling plus bisection on exact sorted gaps.
    """
    inner2 = _frac_num2(system, inner_radius)
    if inner2 <= 0:
        raise ConfigurationError("inner radius too small to represent")
    N = max(2 * M, 64)
    while not _max_gap_ok(system, N, inner2):
        N *= 2
        if N > _M1_SEARCH_CAP:
            raise MarkerConstructionError(
                "coverage horizon exceeded; adjust inner_radius"
            )
    lo, hi = N // 2, N  # ok(hi) holds; ok(lo) may hold if N was the seed
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _max_gap_ok(system, mid, inner2):
            hi = mid
        else:
            lo = mid
    if _max_gap_ok(system, lo, inner2):
        hi = lo
    return hi + 1


def compute_M_M1(
    system: SystemSpec, arc_radius: Fraction, inner_radius: Fraction
) -> tuple[int, int]:
    M = compute_M(system, arc_radius)
    if M < 2:
        raise MarkerConstructionError(
            "arc overlaps its first image (M = 1); shrink arc_radius"
        )
    M1 = compute_M1(system, inner_radius, M)
    if M1 <= M:
        raise MarkerConstructionError(f"M1={M1} <= M={M}; inconsistent arcs")
    return M, M1


def make_marker_spec(
    system: SystemSpec,
    arc_center: Fraction = Fraction(0),
    arc_radius: Fraction = Fraction(1, 400),
    inner_radius: Fraction | None = None,
) -> MarkerSpec:
    if inner_radius is None:
        inner_radius = arc_radius / 2
    M, M1 = compute_M_M1(system, arc_radius, inner_radius)
    return MarkerSpec(
        system=system,
        arc_center=arc_center,
        arc_radius=arc_radius,
        inner_radius=inner_radius,
        M=M,
        M1=M1,
    )


@dataclass(frozen=True)
class MarkerSequence:
    """Support times and values of n -> phi(T^n x) over an integer window."""

    spec: MarkerSpec
    window: tuple[int, int]  # inclusive
    support: np.ndarray  # int64, sorted times with phi > 0
    values: np.ndarray  # float, phi at those times
    support_t2: np.ndarray  # int64, clamped arc distance (half-grid units)

    @property
    def M(self) -> int:
        return self.spec.M

    @property
    def M1(self) -> int:
        return self.spec.M1

    def shifted(self, k: int) -> "MarkerSequence":
        """The sequence of T^k x: support times drop by k."""
        lo, hi = self.window
        return MarkerSequence(
            spec=self.spec,
            window=(lo - k, hi - k),
            support=self.support - k,
            values=self.values,
            support_t2=self.support_t2,
        )


def marker_sequence(
    spec: MarkerSpec, x: OrbitWindow, lo: int, hi: int, validate: bool = True
) -> MarkerSequence:
    if hi < lo:
        raise ConfigurationError("empty marker window")
    vals, t2 = _phi_and_t2(spec, x, lo, hi)
    sup = np.nonzero(vals > 0.0)[0]
    seq = MarkerSequence(
        spec=spec,
        window=(lo, hi),
        support=(sup + lo).astype(np.int64),
        values=vals[sup],
        support_t2=t2[sup].astype(np.int64),
    )
    if validate:
        ok, witness = check_separation(seq)
        if not ok:
            raise MarkerConstructionError(
                f"support times {witness} closer than M={spec.M}"
            )
    return seq


def check_separation(seq: MarkerSequence) -> tuple[bool, tuple | None]:
    """Support times must be >= M apart."""
    if len(seq.support) < 2:
        return True, None
    gaps = np.diff(seq.support)
    bad = np.nonzero(gaps < seq.M)[0]
    if len(bad):
        i = int(bad[0])
        return False, (int(seq.support[i]), int(seq.support[i + 1]))
    return True, None


def check_coverage(seq: MarkerSequence) -> tuple[bool, tuple | None]:
    """Every length-2*M1 subwindow of the sequence window must contain a
    time with phi exactly 1 (an inner-arc visit).  Equivalent gap condition
    on the sorted full-value times, including the window edges."""
    lo, hi = seq.window
    if hi - lo + 1 < 2 * seq.M1:
        return True, None
    ones = seq.support[seq.values == 1.0]
    if len(ones) == 0:
        return False, (lo, hi)
    if ones[0] > lo + 2 * seq.M1 - 1:
        return False, (lo, int(ones[0]))
    if ones[-1] < hi - 2 * seq.M1 + 1:
        return False, (int(ones[-1]), hi)
    gaps = np.diff(ones)
    bad = np.nonzero(gaps > 2 * seq.M1)[0]
    if len(bad):
        i = int(bad[0])
        return False, (int(ones[i]), int(ones[i + 1]))
    return True, None


def gap_histogram(seq: MarkerSequence) -> dict[int, int]:
    gaps = np.diff(seq.support)
    vals, counts = np.unique(gaps, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def pick_z_zprime(spec: MarkerSpec, radius: int = 64) -> tuple[OrbitWindow, OrbitWindow]:
    """The designated separated pair: z sits on the arc center (phi = 1),
    z' on the antipode (phi = 0); cube parts a fixed constant."""
    sys_ = spec.system
    z = make_point(sys_, cube=0.5, circle=Fraction(spec.center_num, sys_.q), radius=radius)
    anti = (spec.center_num + sys_.q // 2) % sys_.q
    zp = make_point(sys_, cube=0.5, circle=Fraction(anti, sys_.q), radius=radius)
    if phi_eval(spec, z) != 1.0:
        raise MarkerConstructionError("z must sit on the inner arc")
    if phi_eval(spec, zp) != 0.0:
        raise MarkerConstructionError("z' must sit outside the outer arc")
    return z, zp


def support_window_for(spec: MarkerSpec, needed_lo: int, needed_hi: int) -> tuple[int, int]:
    """Marker window with enough slack for exact tiling on [needed_lo,
    needed_hi]: three coverage radii on each side."""
    pad = 3 * (spec.M1 + 1)
    return needed_lo - pad, needed_hi + pad
