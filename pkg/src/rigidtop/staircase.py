"""Staircase functions on finite quotients, with exact rational values.

Each tower stage n carries a finite symmetric set S_n and a quotient whose
kernel the set avoids up to the certified power.  The stage function takes
the value (M+1-d)/(M+1) at Cayley distance d from the identity coset
(generators are the projected S_n), hits zero beyond distance M, and for
stage 1 degenerates to the indicator of the distance <= 1 ball.  The
envelope function is the running pointwise minimum of the stage functions,
pulled back through the nested quotients.

Tables store only the support: an absent residue is exactly zero.  Values
are kept as integer numerators over one table-wide denominator, so sweeps
are integer arithmetic; Fractions appear only at the API surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional

from .errors import ResourceLimitError, StageError
from .groups import GroupSpec
from .quotients import FiniteQuotient

STAGE = "stage"
ENVELOPE = "envelope"


@dataclass(frozen=True)
class StageParams:
    """Inputs of one inductive step.

    steps is the staircase resolution M_n; elements is S_n (symmetric, with
    the identity); prev_rigidity is the set chosen inside the previous
    kernel, empty at stage 1.  The separation requirement binding these
    together, S_n^(3*steps) meeting the kernel only at the identity, is
    checked by the tower builder and recorded in its certificate.
    """

    stage: int
    steps: int
    elements: tuple
    quotient: FiniteQuotient
    prev_rigidity: tuple = ()

    def __post_init__(self):
        if self.stage < 1 or self.steps < 1:
            raise StageError("stage and steps must be positive")
        spec = self.quotient.spec
        if spec.identity not in self.elements:
            raise StageError("stage set must contain the identity")
        members = set(self.elements)
        for g in self.elements:
            if spec.inv(g) not in members:
                raise StageError("stage set must be symmetric")

    @property
    def spec(self) -> GroupSpec:
        return self.quotient.spec

    @property
    def separation_exponent(self) -> int:
        return 3 * self.steps


@dataclass
class StaircaseTable:
    """Support-only table of one staircase or envelope function.

    entries maps residue payloads to integer numerators over `denominator`;
    residues outside the map take the value 0.  sphere_sizes[d] counts the
    Cayley sphere at distance d (stage tables only, up to depth M+1).
    """

    stage: int
    steps: int
    kind: str
    quotient: FiniteQuotient
    denominator: int
    entries: dict
    sphere_sizes: list = field(default_factory=list)

    def value(self, residue) -> Fraction:
        return Fraction(self.entries.get(residue, 0), self.denominator)

    def value_of(self, g) -> Fraction:
        """Value at a group element, through the projection."""
        return self.value(self.quotient.project(g))

    def support_size(self) -> int:
        return len(self.entries)

    def sorted_support(self):
        return sorted(self.entries, key=self.quotient.residue_sort_key)

    def serialize_entries(self):
        """Canonical [residue, "p/q"] pairs, in deterministic residue order."""
        out = []
        for r in self.sorted_support():
            f = Fraction(self.entries[r], self.denominator)
            out.append(
                [self.quotient.serialize_residue(r), f"{f.numerator}/{f.denominator}"]
            )
        return out

    def distinct_values(self):
        return sorted(
            {Fraction(n, self.denominator) for n in self.entries.values()},
            reverse=True,
        )


def stage_table(params: StageParams, node_cap: int = 10_000_000) -> StaircaseTable:
    """Build the stage-n staircase by BFS in the quotient, truncated at M+1.

    The distance map is exactly the coset filtration: distance d means the
    element lies in the image of S^d but not of S^(d-1).  Raises
    ResourceLimitError naming the stage when the ball exceeds node_cap.
    """
    q = params.quotient
    m = params.steps
    gens = _projected_generators(params)
    depth_limit = m + 1

    distances = {q.identity_residue: 0}
    frontier = [q.identity_residue]
    sphere_sizes = [1]
    for depth in range(1, depth_limit + 1):
        nxt = set()
        for r in frontier:
            for s in gens:
                t = q.mul(r, s)
                if t not in distances and t not in nxt:
                    nxt.add(t)
        if len(distances) + len(nxt) > node_cap:
            raise ResourceLimitError(
                f"stage {params.stage} table exceeds node cap {node_cap}",
                quantity="quotient ball nodes",
                limit=node_cap,
                stage=params.stage,
            )
        if not nxt:
            sphere_sizes.append(0)
            break
        for t in nxt:
            distances[t] = depth
        sphere_sizes.append(len(nxt))
        frontier = list(nxt)

    if params.stage == 1:
        denominator = 1
        entries = {r: 1 for r, d in distances.items() if d <= 1}
    else:
        denominator = m + 1
        entries = {r: m + 1 - d for r, d in distances.items() if d <= m}
    return StaircaseTable(
        stage=params.stage,
        steps=m,
        kind=STAGE,
        quotient=q,
        denominator=denominator,
        entries=entries,
        sphere_sizes=sphere_sizes,
    )


def envelope_table(
    params: StageParams,
    stage: StaircaseTable,
    prev: Optional[StaircaseTable],
) -> StaircaseTable:
    """Pointwise minimum of the previous envelope (pulled back through the
    parent projection) and the current stage table.

    Constancy on kernel cosets is structural: the table is indexed by
    residues.  Zeros are dropped so that absence remains exactness of zero.
    """
    if prev is None:
        if params.stage != 1:
            raise StageError("missing previous envelope for stage > 1")
        return StaircaseTable(
            stage=1,
            steps=params.steps,
            kind=ENVELOPE,
            quotient=stage.quotient,
            denominator=stage.denominator,
            entries=dict(stage.entries),
            sphere_sizes=list(stage.sphere_sizes),
        )
    if prev.stage != params.stage - 1:
        raise StageError(
            f"envelope stage mismatch: previous table is stage {prev.stage}, "
            f"building stage {params.stage}"
        )
    q = params.quotient
    if q.parent_modulus != prev.quotient.modulus:
        raise StageError("previous envelope lives on the wrong quotient")
    denominator = lcm(prev.denominator, stage.denominator)
    cur_scale = denominator // stage.denominator
    prev_scale = denominator // prev.denominator
    entries = {}
    for r, num in stage.entries.items():
        up = prev.entries.get(q.reduce_to_parent(r), 0)
        merged = min(num * cur_scale, up * prev_scale)
        if merged:
            entries[r] = merged
    return StaircaseTable(
        stage=params.stage,
        steps=params.steps,
        kind=ENVELOPE,
        quotient=q,
        denominator=denominator,
        entries=entries,
        sphere_sizes=list(stage.sphere_sizes),
    )


def shift_defect(table: StaircaseTable, s) -> Fraction:
    """Exact sup over the whole group of |f(gs) - f(g)|.

    Both terms vanish outside the support and its s-translate, so the sweep
    over those finitely many residues computes the true supremum.
    """
    q = table.quotient
    ps = q.project(s)
    ps_inv = q.inv(ps)
    entries = table.entries
    worst = 0
    for r, num in entries.items():
        shifted = entries.get(q.mul(r, ps), 0)
        diff = abs(shifted - num)
        if diff > worst:
            worst = diff
        if q.mul(r, ps_inv) not in entries and num > worst:
            worst = num
    return Fraction(worst, table.denominator)


def sphere_nonempty(table: StaircaseTable) -> list:
    """Flags for spheres 1..M: non-degeneracy of the staircase levels.

    Under projection injectivity on the radius-M ball these coincide with
    the group-side statements that consecutive powers of the stage set keep
    growing.
    """
    flags = []
    for d in range(1, table.steps + 1):
        flags.append(d < len(table.sphere_sizes) and table.sphere_sizes[d] > 0)
    return flags


def _projected_generators(params: StageParams):
    q = params.quotient
    projected = {}
    for g in params.elements:
        r = q.project(g)
        if r != q.identity_residue:
            projected[r] = None
    return sorted(projected, key=q.residue_sort_key)
