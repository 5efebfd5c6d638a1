"""Identifiers and result records for the verification suites.

Every quantitative claim the toolkit can verify has a short stable check id;
reports and the command-line verifier print one PASS/FAIL line per id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

# tiling-level checks
TILE_LOCALITY = "tile-locality"          # every tile within M1+1 of its label
SURVIVOR_LEVEL = "survivor-level"        # nonempty tile => phi > 1/2 at its site
INTERIOR_MASS = "interior-mass"          # deep interior >= (1-delta) * companion tile
EDGE_DENSITY = "edge-density"            # density of R-collar below delta
COVERAGE = "coverage"                    # tiles partition the certified window
CENTRAL_TILE = "central-tile"            # anchored tile is deep and stays in [-2M1-2, 2M1+2]
EQUIVARIANCE = "equivariance"            # shifting commutes with tiling

# signal-level checks
PROFILE_CAP = "profile-cap"              # signal never exceeds the rigid profile
SEPARATION = "separation"                # designated pair separated at coordinate 0
PLATEAU_BUDGET = "plateau-budget"        # free (non-plateau) fraction below delta
BAND_RECOVERY = "band-recovery"          # band values reproduce the block map exactly
BAND_SUPPORT = "band-support"            # band values vanish away from tile edges
BAND_SPARSITY = "band-sparsity"          # nonzero band entries below budget per window

# factor/fiber checks
FIBER_CONTAINMENT = "fiber-containment"  # sampled fibers inside the block-map union
FIBER_WIDTH = "fiber-width"              # fiber width ratio below target
PAIR_SEPARATION = "pair-separation"      # factor map separates the designated pair
NERVE_TRANSFER = "nerve-transfer"        # nerve-image closeness certifies eps-closeness

# product-run checks
PRODUCT_BUDGET = "product-budget"        # summed per-factor bounds stay below delta

ALL_CHECK_IDS = [
    TILE_LOCALITY, SURVIVOR_LEVEL, INTERIOR_MASS, EDGE_DENSITY, COVERAGE,
    CENTRAL_TILE, EQUIVARIANCE, PROFILE_CAP, SEPARATION, PLATEAU_BUDGET,
    BAND_RECOVERY, BAND_SUPPORT, BAND_SPARSITY, FIBER_CONTAINMENT,
    FIBER_WIDTH, PAIR_SEPARATION, NERVE_TRANSFER, PRODUCT_BUDGET,
]


@dataclass
class CheckResult:
    check_id: str
    passed: bool
    detail: str = ""
    witness: Any = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"[{status}] {self.check_id}"
        if self.detail:
            msg += f": {self.detail}"
        return msg


@dataclass
class CheckSuite:
    """Aggregates results of one check id over many instances."""

    check_id: str
    instances: int = 0
    failures: int = 0
    worst: float | None = None  # tightest margin seen, when meaningful
    first_witness: Any = None

    def add(self, passed: bool, margin: float | None = None, witness: Any = None):
        self.instances += 1
        if margin is not None:
            self.worst = margin if self.worst is None else min(self.worst, margin)
        if not passed:
            self.failures += 1
            if self.first_witness is None:
                self.first_witness = witness

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.instances > 0

    def result(self) -> CheckResult:
        detail = f"{self.instances - self.failures}/{self.instances} instances"
        if self.worst is not None:
            detail += f", worst margin {self.worst:.3g}"
        return CheckResult(self.check_id, self.passed, detail, self.first_witness)
