"""Construction profiles: staircase resolutions and resource caps.

The resolution sequence M_n drives everything else: stage n uses the
separation exponent 3*M_n and a staircase with M_n nonzero levels.  The
sequence must increase strictly and keep the partial sums of 1/(M_n+1)
below one.  Two presets are provided; 'paper' uses powers of ten, which is
only feasible on the integer line, while 'desk' uses powers of three and is
the default for end-to-end runs.  All determinism is structural: profiles
carry no seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .errors import StageError

DEFAULT_NODE_CAP = 10_000_000


@dataclass(frozen=True)
class Profile:
    name: str
    steps_list: tuple = ()  # explicit M values for custom profiles
    node_cap: int = DEFAULT_NODE_CAP
    quotient_enum_cap: int = 400_000
    sweep_budget: int = 30_000_000
    kernel_search_nodes: int = 600_000
    direct_injectivity_cap: int = 300_000
    table_serialize_cap: int = 200_000
    zero_window_store_cap: int = 64
    zero_search_slack: int = 3
    rigidity_count: int = 2
    allow_empty_rigidity: bool = False
    fallback_to_power: bool = True
    hausdorff_radius: int = 2
    order_iteration_cap: int = 2_000_000

    def steps(self, stage: int) -> int:
        """Resolution M_n for stage n (1-based)."""
        if stage < 1:
            raise StageError("stage index must be positive")
        if self.name == "paper":
            return 10 ** (stage - 1)
        if self.name == "desk":
            return 3 ** (stage - 1)
        if stage > len(self.steps_list):
            raise StageError(
                f"custom profile defines {len(self.steps_list)} stages, "
                f"stage {stage} requested"
            )
        return self.steps_list[stage - 1]

    def validate_stages(self, count: int) -> None:
        if count < 1:
            raise StageError("at least one stage is required")
        values = [self.steps(n) for n in range(1, count + 1)]
        for a, b in zip(values, values[1:]):
            if b <= a:
                raise StageError("resolution sequence must increase strictly")
        # the rigidity bounds 1/(M_n+1) must stay summable below one
        total = sum(Fraction(1, m + 1) for m in values)
        if total >= 1:
            raise StageError("partial sums of 1/(M_n+1) must stay below 1")

    def with_node_cap(self, node_cap: Optional[int]) -> "Profile":
        if node_cap is None:
            return self
        return replace(self, node_cap=node_cap)

    def describe(self, stage_count: int) -> dict:
        return {
            "name": self.name,
            "steps": [self.steps(n) for n in range(1, stage_count + 1)],
            "node_cap": self.node_cap,
            "quotient_enum_cap": self.quotient_enum_cap,
            "rigidity_count": self.rigidity_count,
            "hausdorff_radius": self.hausdorff_radius,
        }


def paper_profile(**overrides) -> Profile:
    return Profile(name="paper", **overrides)


def desk_profile(**overrides) -> Profile:
    return Profile(name="desk", **overrides)


def custom_profile(steps, **overrides) -> Profile:
    steps = tuple(int(v) for v in steps)
    if not steps:
        raise StageError("custom profile needs at least one resolution")
    return Profile(name="custom", steps_list=steps, **overrides)


def profile_by_name(name: str, **overrides) -> Profile:
    if name == "paper":
        return paper_profile(**overrides)
    if name == "desk":
        return desk_profile(**overrides)
    if name.startswith("custom:"):
        parts = name.split(":", 1)[1]
        return custom_profile([v for v in parts.split(",") if v], **overrides)
    raise StageError(f"unknown profile {name!r}")
