"""Inductive construction of the quotient tower and its stage certificates.

One stage does, in order:

  1. assemble the stage set: previous set, previous rigidity set, and the
     next exhaustion ball;
  2. pick the modulus as the smallest multiple of the parent modulus beating
     twice the entry-growth bound for the separation exponent 3*M_n, which
     makes the separation certificate true by construction;
  3. build the staircase and envelope tables;
  4. run and record every stage check with its exact value;
  5. choose the rigidity set inside the fresh kernel for the next stage.

Everything recorded is an exact integer or rational; certificates from
identical inputs are byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .errors import (
    PreconditionError,
    ResourceLimitError,
    StageError,
)
from .groups import FREE, GroupSpec
from .profiles import Profile
from .quotients import (
    FiniteQuotient,
    SeparationCertificate,
    growth_bound,
    injectivity_check,
    modulus_for_bound,
    separation_certificate,
)
from .staircase import (
    StageParams,
    StaircaseTable,
    envelope_table,
    shift_defect,
    sphere_nonempty,
    stage_table,
)


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def parse_fraction(text: str) -> Fraction:
    num, _, den = text.partition("/")
    if not den:
        raise ValueError(f"rational must be 'p/q': {text!r}")
    return Fraction(int(num), int(den))


# -- policies ----------------------------------------------------------------


@dataclass(frozen=True)
class Policy:
    """How each stage picks its rigidity set inside the fresh kernel.

    kind 'kernel' searches the generator ball for kernel members and falls
    back to powers of the first generator when the search budget is too
    small to reach the kernel.  kind 'power' uses powers of a designated
    infinite-order element.  kind 'predicates' hits a round-robin list of
    decidable element predicates.
    """

    kind: str = "kernel"
    base_element: object = None
    predicates: tuple = ()  # (name, callable) pairs
    fallback_to_default: bool = True

    def describe(self, spec: GroupSpec) -> dict:
        out = {"kind": self.kind}
        if self.base_element is not None:
            out["base_element"] = spec.serialize(self.base_element)
        if self.predicates:
            out["predicates"] = [name for name, _ in self.predicates]
        return out


def kernel_policy() -> Policy:
    return Policy(kind="kernel")


def power_policy(base_element) -> Policy:
    return Policy(kind="power", base_element=base_element)


def predicate_policy(predicates, fallback_to_default: bool = True) -> Policy:
    return Policy(
        kind="predicates",
        predicates=tuple(predicates),
        fallback_to_default=fallback_to_default,
    )


def group_power(spec: GroupSpec, g, k: int):
    """g**k in exact form; free-group powers must stay run-length compact."""
    if k < 0:
        return group_power(spec, spec.inv(g), -k)
    if k == 0:
        return spec.identity
    kind = spec.kind
    if kind == "integer-line":
        return g * k
    if kind == "heisenberg3":
        x, y, z = g
        return (k * x, k * y, k * z + (k * (k - 1) // 2) * x * y)
    if kind == "sl2z":
        out = spec.identity
        base = g
        n = k
        while n:
            if n & 1:
                out = spec.mul(out, base)
            base = spec.mul(base, base)
            n >>= 1
        return out
    # free words: peel the conjugating shell, then power the cyclic core
    head, core = _cyclic_reduce(g)
    if len(core) == 1:
        ltr, e = core[0]
        powered = ((ltr, e * k),)
    elif k * sum(abs(e) for _, e in core) <= 10_000:
        powered = ()
        for _ in range(k):
            powered = spec.mul(powered, core)
    else:
        raise ResourceLimitError(
            "free power has no compact reduced form",
            quantity="word length",
        )
    return spec.mul(spec.mul(head, powered), spec.inv(head))


def _cyclic_reduce(w):
    head = ()
    core = w
    while len(core) >= 2 and core[0][0] == core[-1][0]:
        first, last = core[0], core[-1]
        if first[1] * last[1] >= 0:
            break
        take = min(abs(first[1]), abs(last[1]))
        sign = 1 if first[1] > 0 else -1
        head = head + ((first[0], sign * take),)
        middle = list(core)
        if abs(first[1]) == take:
            middle.pop(0)
        else:
            middle[0] = (first[0], first[1] - sign * take)
        if abs(last[1]) == take:
            middle.pop()
        else:
            middle[-1] = (last[0], last[1] + sign * take)
        core = tuple(middle)
        if not core:
            break
    return head, core


def infinite_order_guard(spec: GroupSpec, g) -> None:
    """Reject torsion elements; exact for the whole catalog."""
    if spec.is_identity(g):
        raise PreconditionError("identity has no power rigidity sequence")
    if spec.kind == "sl2z":
        a, b, c, d = g
        trace = a + d
        if abs(trace) <= 1 or (abs(trace) == 2 and b == 0 and c == 0 and a == d):
            raise PreconditionError(f"element has finite order in SL(2,Z): {g}")
    # the remaining kinds are torsion-free


def _kernel_search_adaptive(q: FiniteQuotient, count: int, node_budget: int):
    """Layered kernel search that widens the radius until the node budget is
    spent; layers complete before stopping, keeping the result deterministic."""
    spec = q.spec
    e = spec.identity
    id_res = q.identity_residue
    found = {}
    seen = {e}
    frontier = [e]
    radius = 0
    while frontier:
        radius += 1
        nxt = set()
        for g in frontier:
            for s in spec.generators:
                h = spec.mul(g, s)
                if h not in seen and h not in nxt:
                    nxt.add(h)
        if not nxt or len(seen) + len(nxt) > node_budget:
            radius -= 1
            break
        for h in sorted(nxt, key=spec.sort_key):
            if q.project(h) == id_res and h not in found:
                found[h] = None
                found[spec.inv(h)] = None
        seen.update(nxt)
        frontier = nxt
        if len(found) >= count:
            break
    return spec.sorted_elements(found), radius


def select_rigidity_set(
    q: FiniteQuotient,
    stage: int,
    policy: Policy,
    profile: Profile,
):
    """Choose the next rigidity set inside ker(projection) minus the identity.

    Returns (elements, route) where route records how the set was found.
    Every element is verified to project to the identity residue.
    """
    spec = q.spec
    route: dict = {"policy": policy.kind}

    def _power_pair(base):
        infinite_order_guard(spec, base)
        k = q.element_order(base, iteration_cap=profile.order_iteration_cap)
        g = group_power(spec, base, k)
        if spec.is_identity(g):
            raise StageError("power landed on the identity; base has finite order")
        return spec.sorted_elements([g, spec.inv(g)]), k

    if policy.kind == "power":
        if policy.base_element is None:
            raise StageError("power policy needs a base element")
        elements, k = _power_pair(policy.base_element)
        route.update({"route": "power", "exponent": k})
    elif policy.kind == "predicates":
        if not policy.predicates:
            raise StageError("predicate policy needs at least one predicate")
        idx = stage % len(policy.predicates)
        name, pred = policy.predicates[idx]
        hit = _predicate_kernel_search(q, pred, profile.kernel_search_nodes)
        if hit is not None:
            elements = spec.sorted_elements([hit, spec.inv(hit)])
            route.update({"route": "predicate", "predicate": name, "index": idx,
                          "witness": spec.serialize(hit)})
        elif policy.fallback_to_default:
            elements, route_inner = select_rigidity_set(
                q, stage, kernel_policy(), profile
            )
            route.update(
                {"route": "predicate-fallback", "predicate": name, "index": idx,
                 "fallback": route_inner}
            )
        else:
            raise StageError(
                f"predicate {name!r} not satisfied within the search cap"
            )
    else:
        elements, radius = _kernel_search_adaptive(
            q, profile.rigidity_count, profile.kernel_search_nodes
        )
        if elements:
            route.update({"route": "kernel-search", "radius": radius})
        elif profile.fallback_to_power:
            base = spec.generators[0]
            elements, k = _power_pair(base)
            route.update(
                {
                    "route": "power-fallback",
                    "base": spec.serialize(base),
                    "exponent": k,
                    "searched_radius": radius,
                }
            )
        else:
            elements = []
            route.update({"route": "kernel-search", "radius": radius})

    for g in elements:
        if spec.is_identity(g):
            raise StageError("rigidity set must avoid the identity")
        if q.project(g) != q.identity_residue:
            raise StageError("rigidity element escapes the kernel")
    if not elements and not profile.allow_empty_rigidity:
        raise StageError(f"stage {stage}: empty rigidity set is not allowed")
    return tuple(elements), route


def _predicate_kernel_search(q: FiniteQuotient, pred: Callable, node_budget: int):
    spec = q.spec
    e = spec.identity
    id_res = q.identity_residue
    seen = {e}
    frontier = [e]
    while frontier:
        nxt = set()
        for g in frontier:
            for s in spec.generators:
                h = spec.mul(g, s)
                if h not in seen and h not in nxt:
                    nxt.add(h)
        if not nxt or len(seen) + len(nxt) > node_budget:
            return None
        for h in sorted(nxt, key=spec.sort_key):
            if q.project(h) == id_res and pred(h):
                return h
        seen.update(nxt)
        frontier = nxt
    return None


# -- stage checks ------------------------------------------------------------


def _check(name, passed, value=None, bound=None, **detail):
    rec = {"name": name, "passed": bool(passed)}
    if value is not None:
        rec["value"] = value
    if bound is not None:
        rec["bound"] = bound
    if detail:
        rec["detail"] = detail
    return rec


@dataclass
class ZeroWindowReport:
    window_radius: int
    exhaustive: bool
    count: int
    elements: list  # residues, possibly truncated for storage
    lift: object = None  # group element projecting into the zero set
    verified: bool = False

    def to_record(self, q: FiniteQuotient, store_cap: int) -> dict:
        return {
            "window_radius": self.window_radius,
            "exhaustive": self.exhaustive,
            "count": self.count,
            "elements": [
                q.serialize_residue(r) for r in self.elements[:store_cap]
            ],
            "lift": None if self.lift is None else q.spec.serialize(self.lift),
            "verified": self.verified,
        }


@dataclass
class StageCertificate:
    """One inductive step with all of its verified inequalities."""

    stage: int
    steps: int
    elements: tuple  # S_n
    prev_rigidity: tuple  # F_{n-1}
    quotient: FiniteQuotient
    separation: SeparationCertificate
    stairs: StaircaseTable
    envelope: StaircaseTable
    rigidity_set: tuple  # F_n, chosen for the next stage
    rigidity_route: dict
    sphere_flags: list
    zero_windows: ZeroWindowReport
    checks: list

    @property
    def spec(self) -> GroupSpec:
        return self.quotient.spec

    def params(self) -> StageParams:
        return StageParams(
            self.stage, self.steps, self.elements, self.quotient, self.prev_rigidity
        )

    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


@dataclass
class Tower:
    spec: GroupSpec
    profile: Profile
    policy: Policy
    stages: list

    @property
    def depth(self) -> int:
        return len(self.stages)

    def stage(self, n: int) -> StageCertificate:
        return self.stages[n - 1]

    def deepest(self) -> StageCertificate:
        return self.stages[-1]

    def rigidity_sets(self):
        """(stage, set) pairs; the set at stage i lies in the stage-i kernel."""
        return [(cert.stage, cert.rigidity_set) for cert in self.stages]


def table_digest(table: StaircaseTable) -> str:
    h = hashlib.sha256()
    for residue, frac in table.serialize_entries():
        h.update(repr(residue).encode())
        h.update(frac.encode())
    return h.hexdigest()


# -- zero windows ------------------------------------------------------------


def enumerate_quotient(q: FiniteQuotient, cap: int):
    """All residues in the image of the group, by BFS closure over the
    projected generators; None when the image exceeds cap."""
    gens = [q.project(g) for g in q.spec.generators]
    seen = {q.identity_residue}
    frontier = [q.identity_residue]
    while frontier:
        nxt = []
        for r in frontier:
            for s in gens:
                t = q.mul(r, s)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if len(seen) > cap:
            return None
        frontier = nxt
    return sorted(seen, key=q.residue_sort_key)


def zero_window_elements(
    cert_envelope: StaircaseTable,
    stage_set,
    window_radius: int,
    profile: Profile,
) -> ZeroWindowReport:
    """Residues t with envelope zero on the whole window-ball translate of t.

    When the quotient image is small the sweep is exhaustive over it;
    otherwise a bounded group-side search walks just past the staircase
    support and verifies candidates directly, returning a nonempty sample.
    """
    q = cert_envelope.quotient
    spec = q.spec
    window = spec.ball(spec.generators, window_radius)
    projected_window = [q.project(b) for b in window]
    entries = cert_envelope.entries

    def _clear(residue) -> bool:
        return all(q.mul(pb, residue) not in entries for pb in projected_window)

    all_residues = enumerate_quotient(q, profile.quotient_enum_cap)
    if all_residues is not None:
        good = [t for t in all_residues if _clear(t)]
        lift = None
        if good:
            lift = _lift_residue(q, good[0], cert_envelope, projected_window, profile)
        return ZeroWindowReport(
            window_radius=window_radius,
            exhaustive=True,
            count=len(good),
            elements=good,
            lift=lift,
            verified=lift is not None,
        )

    # bounded search: elements just beyond the support have clear windows
    found = []
    lift = None
    depth_limit = cert_envelope.steps + 1 + window_radius + profile.zero_search_slack
    seen = {spec.identity}
    frontier = [spec.identity]
    steps = [g for g in spec.sorted_elements(stage_set) if not spec.is_identity(g)]
    for _ in range(depth_limit):
        nxt = set()
        for g in frontier:
            for s in steps:
                h = spec.mul(g, s)
                if h not in seen and h not in nxt:
                    nxt.add(h)
        if len(seen) + len(nxt) > profile.node_cap:
            raise ResourceLimitError(
                "zero window search exceeds node cap",
                quantity="ball nodes",
                limit=profile.node_cap,
            )
        if not nxt:
            break
        layer = sorted(nxt, key=spec.sort_key)
        for h in layer:
            r = q.project(h)
            if _clear(r):
                found.append(r)
                if lift is None:
                    lift = h
                if len(found) >= profile.zero_window_store_cap:
                    break
        if found:
            break
        seen.update(nxt)
        frontier = layer
    return ZeroWindowReport(
        window_radius=window_radius,
        exhaustive=False,
        count=len(found),
        elements=found,
        lift=lift,
        verified=lift is not None,
    )


def _lift_residue(q, residue, envelope, projected_window, profile):
    """Concrete group element over a zero-window residue.

    The integer and Heisenberg kinds lift by centering each coordinate; the
    matrix kinds fall back to a bounded search, which is how large quotients
    find their witnesses anyway.
    """
    spec = q.spec
    m = q.modulus

    def _center(v):
        return v if v <= m // 2 else v - m

    if spec.kind == "integer-line":
        return _center(residue)
    if spec.kind == "heisenberg3":
        x, y, z = residue
        return (_center(x), _center(y), _center(z))
    depth_limit = envelope.steps + 1 + len(projected_window) + profile.zero_search_slack
    seen = {spec.identity}
    frontier = [spec.identity]
    for _ in range(depth_limit):
        nxt = set()
        for g in frontier:
            for s in spec.generators:
                h = spec.mul(g, s)
                if h not in seen and h not in nxt:
                    nxt.add(h)
        if not nxt or len(seen) + len(nxt) > profile.kernel_search_nodes:
            return None
        layer = sorted(nxt, key=spec.sort_key)
        for h in layer:
            if q.project(h) == residue:
                return h
        seen.update(nxt)
        frontier = layer
    return None


def covering_radius(cert: StageCertificate, zero_residues, profile: Profile):
    """Largest Cayley distance from the zero set, over the whole quotient
    image; returns ('skipped', size_hint) when enumeration exceeds the cap."""
    if not zero_residues:
        raise PreconditionError("covering radius needs a nonempty zero set")
    q = cert.quotient
    size = q.size()
    if size is None or size > profile.quotient_enum_cap:
        return ("skipped", size)
    gens = []
    seen_g = set()
    for g in cert.elements:
        r = q.project(g)
        if r != q.identity_residue and r not in seen_g:
            seen_g.add(r)
            gens.append(r)
    visited = set(zero_residues)
    frontier = list(zero_residues)
    radius = 0
    while frontier:
        nxt = []
        for r in frontier:
            for s in gens:
                t = q.mul(r, s)
                if t not in visited:
                    visited.add(t)
                    nxt.append(t)
        if nxt:
            radius += 1
        frontier = nxt
    return radius


# -- stage construction -------------------------------------------------------


def envelope_defect(cert: StageCertificate, s) -> Fraction:
    """Exact global defect of the stage envelope under right translation by s.

    s must belong to the stage set or project into the kernel (where the
    envelope is invariant by construction); anything else would need support
    translates the table does not carry.
    """
    q = cert.quotient
    if s not in cert.elements and q.project(s) != q.identity_residue:
        raise PreconditionError("defect sweeps need s in the stage set")
    return shift_defect(cert.envelope, s)


def _paper_reading_sums(profile: Profile, i: int, n: int):
    # two historical forms of the telescoped bound, kept for comparison
    sum_a = sum(Fraction(1, profile.steps(j)) for j in range(i + 1, n + 2))
    sum_b = sum(Fraction(1, profile.steps(j)) for j in range(i + 1, n + 1))
    return sum_a, sum_b


def build_stage(
    prev: Optional[StageCertificate],
    spec: GroupSpec,
    profile: Profile,
    policy: Policy,
    ancestor_rigidity: tuple = (),
) -> StageCertificate:
    """Run one inductive step; deterministic in (spec, profile, policy).

    ancestor_rigidity lists (i, F_i) for every earlier stage, so the defect
    of the new envelope can be recorded against each earlier rigidity set.
    """
    n = 1 if prev is None else prev.stage + 1
    steps = profile.steps(n)
    if prev is None:
        stage_set = spec.sorted_elements(spec.generators + (spec.identity,))
        prev_rigidity = ()
        parent_modulus = 1
    else:
        exhaustion = spec.ball(spec.generators, n - 1, node_cap=profile.node_cap)
        stage_set = spec.sorted_elements(
            tuple(prev.elements) + tuple(prev.rigidity_set) + tuple(exhaustion)
        )
        prev_rigidity = prev.rigidity_set
        parent_modulus = prev.quotient.modulus

    exponent = 3 * steps
    bound = growth_bound(spec, stage_set, exponent)
    modulus = modulus_for_bound(bound, parent_modulus)
    quotient = FiniteQuotient(spec, modulus, parent_modulus, level=n)
    separation = separation_certificate(spec, stage_set, exponent, modulus)
    if not separation.satisfied:
        raise StageError(f"stage {n}: separation bound failed at modulus {modulus}")

    params = StageParams(n, steps, tuple(stage_set), quotient, prev_rigidity)
    stairs = stage_table(params, node_cap=profile.node_cap)
    prev_envelope = None if prev is None else prev.envelope
    envelope = envelope_table(params, stairs, prev_envelope)

    checks = [
        _check(
            "separation",
            separation.satisfied,
            value=separation.entry_bound,
            bound=modulus,
            exponent=exponent,
        ),
        _check(
            "parent-divisibility",
            modulus % parent_modulus == 0,
            value=modulus,
            bound=parent_modulus,
        ),
        _check(
            "envelope-identity",
            envelope.value(quotient.identity_residue) == 1,
            value=_frac_str(envelope.value(quotient.identity_residue)),
        ),
    ]

    sphere_flags = sphere_nonempty(stairs)
    checks.append(
        _check("spheres-nonempty", all(sphere_flags), value=sum(sphere_flags),
               bound=steps)
    )

    inj = injectivity_check(
        quotient,
        stage_set,
        steps,
        certified_exponent=exponent,
        enum_cap=profile.direct_injectivity_cap,
    )
    checks.append(
        _check("injectivity-radius", inj.injective, value=inj.mode, radius=steps)
    )

    if prev is not None:
        checks.append(_check("chain-monotone", *_chain_monotone(envelope, prev)))
        checks.append(_check("zero-persistence", *_zero_persistence(envelope, prev)))

    # staircase Lipschitz bound along every stage-set translation
    stage_defect_bound = Fraction(1, steps + 1) if n >= 2 else Fraction(1)
    sweep_cost = len(stairs.entries) * len(stage_set)
    if sweep_cost <= profile.sweep_budget:
        worst = max(
            (shift_defect(stairs, s) for s in stage_set if not spec.is_identity(s)),
            default=Fraction(0),
        )
        checks.append(
            _check(
                "stage-step-defect",
                worst <= stage_defect_bound,
                value=_frac_str(worst),
                bound=_frac_str(stage_defect_bound),
                mode="swept",
            )
        )
    else:
        # distance changes by at most one along a generator edge
        checks.append(
            _check(
                "stage-step-defect",
                True,
                value=_frac_str(stage_defect_bound),
                bound=_frac_str(stage_defect_bound),
                mode="lipschitz",
            )
        )

    # rigidity defects for every earlier rigidity set member
    if prev is not None:
        for i, members in sorted(ancestor_rigidity):
            derived = Fraction(1, profile.steps(i + 1) + 1)
            sum_a, sum_b = _paper_reading_sums(profile, i, n)
            for s in members:
                defect = shift_defect(envelope, s)
                checks.append(
                    _check(
                        f"rigidity-defect-{i}",
                        defect <= derived,
                        value=_frac_str(defect),
                        bound=_frac_str(derived),
                        element=spec.serialize(s),
                        telescoped_long=_frac_str(sum_a),
                        telescoped_short=_frac_str(sum_b),
                        holds_long=defect < sum_a,
                        holds_short=defect < sum_b,
                    )
                )

    zero_report = zero_window_elements(envelope, stage_set, n - 1, profile)
    checks.append(
        _check(
            "zero-windows",
            zero_report.count > 0,
            value=zero_report.count,
            window_radius=n - 1,
            exhaustive=zero_report.exhaustive,
        )
    )

    rigidity_set, route = select_rigidity_set(quotient, n, policy, profile)
    checks.append(
        _check(
            "rigidity-set",
            bool(rigidity_set) or profile.allow_empty_rigidity,
            value=len(rigidity_set),
        )
    )

    return StageCertificate(
        stage=n,
        steps=steps,
        elements=tuple(stage_set),
        prev_rigidity=tuple(prev_rigidity),
        quotient=quotient,
        separation=separation,
        stairs=stairs,
        envelope=envelope,
        rigidity_set=rigidity_set,
        rigidity_route=route,
        sphere_flags=sphere_flags,
        zero_windows=zero_report,
        checks=checks,
    )


def _chain_monotone(envelope: StaircaseTable, prev: StageCertificate):
    # a/den_cur <= b/den_prev compared by cross products, exactly
    q = envelope.quotient
    prev_table = prev.envelope
    for r, num in envelope.entries.items():
        up = prev_table.entries.get(q.reduce_to_parent(r), 0)
        if num * prev_table.denominator > up * envelope.denominator:
            return False, _frac_str(Fraction(num, envelope.denominator))
    return True, "0/1"


def _zero_persistence(envelope: StaircaseTable, prev: StageCertificate):
    q = envelope.quotient
    prev_entries = prev.envelope.entries
    for r in envelope.entries:
        if q.reduce_to_parent(r) not in prev_entries:
            return False, q.residue_sort_key(r)
    return True, None


def build_tower(
    spec: GroupSpec,
    profile: Profile,
    policy: Policy,
    stage_count: int,
) -> Tower:
    """Build the requested number of stages, threading rigidity sets down."""
    profile.validate_stages(stage_count)
    stages = []
    prev = None
    ancestors = []
    for _ in range(stage_count):
        cert = build_stage(prev, spec, profile, policy, tuple(ancestors))
        if cert.rigidity_set:
            ancestors.append((cert.stage, cert.rigidity_set))
        stages.append(cert)
        prev = cert
    return Tower(spec=spec, profile=profile, policy=policy, stages=stages)
