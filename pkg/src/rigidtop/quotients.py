"""Finite quotients of the catalog groups as congruence kernels.

A quotient is the reduction-mod-m homomorphism: on the integer line this is
Z -> Z/m, for matrix kinds it is entrywise reduction, and free groups are
first embedded into SL(2,Z) and then reduced.  Kernels of these projections
are automatically normal finite index subgroups, and nesting between levels
is guaranteed by modulus divisibility.

Separation facts of the form  S^k  meets the kernel only in the identity
are certified arithmetically: an entry-growth bound E(k) over all products
of at most k factors is computed by exact interval recursion, and
2*E(k) < m  forces any product congruent to the identity to equal it.
No ball of size |S|^k is ever enumerated for this.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import gcd
from typing import Optional

from .errors import (
    PreconditionError,
    ResourceLimitError,
    UnsupportedKindError,
)
from .groups import (
    FREE,
    HEISENBERG,
    INTEGER_LINE,
    SL2Z,
    GroupSpec,
    free_to_matrix_mod,
)

_MAT2_ID = (1, 0, 0, 1)


@dataclass(frozen=True)
class FiniteQuotient:
    """Reduction mod `modulus`, at tower level `level`.

    parent_modulus divides modulus, so the kernel at this level is contained
    in the kernel one level up.
    """

    spec: GroupSpec
    modulus: int
    parent_modulus: int = 1
    level: int = 1
    degenerate: bool = False

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError("modulus must be at least 2")
        if self.parent_modulus < 1 or self.modulus % self.parent_modulus:
            raise ValueError("parent modulus must divide the modulus")

    # -- projection and residue arithmetic --------------------------------

    @property
    def identity_residue(self):
        k = self.spec.kind
        if k == INTEGER_LINE:
            return 0
        if k == HEISENBERG:
            return (0, 0, 0)
        return tuple(v % self.modulus for v in _MAT2_ID)

    def project(self, g):
        """Homomorphism onto the finite quotient; exact for any element."""
        m = self.modulus
        k = self.spec.kind
        if k == INTEGER_LINE:
            return g % m
        if k == FREE:
            return free_to_matrix_mod(self.spec, g, m)
        if k == HEISENBERG:
            x, y, z = g
            return (x % m, y % m, z % m)
        return tuple(v % m for v in g)

    def reduce_to_parent(self, residue):
        """Image of a residue one level up; factors through the projection."""
        p = self.parent_modulus
        if self.spec.kind == INTEGER_LINE:
            return residue % p
        return tuple(v % p for v in residue)

    def mul(self, r1, r2):
        m = self.modulus
        k = self.spec.kind
        if k == INTEGER_LINE:
            return (r1 + r2) % m
        if k == HEISENBERG:
            x1, y1, z1 = r1
            x2, y2, z2 = r2
            return ((x1 + x2) % m, (y1 + y2) % m, (z1 + z2 + x1 * y2) % m)
        a, b, c, d = r1
        e, f, g, h = r2
        return (
            (a * e + b * g) % m,
            (a * f + b * h) % m,
            (c * e + d * g) % m,
            (c * f + d * h) % m,
        )

    def inv(self, r):
        m = self.modulus
        k = self.spec.kind
        if k == INTEGER_LINE:
            return (-r) % m
        if k == HEISENBERG:
            x, y, z = r
            return ((-x) % m, (-y) % m, (x * y - z) % m)
        a, b, c, d = r
        return (d % m, (-b) % m, (-c) % m, a % m)

    def serialize_residue(self, r):
        if self.spec.kind == INTEGER_LINE:
            return str(r)
        if self.spec.kind == HEISENBERG:
            x, y, z = r
            return [1, x, z, 0, 1, y, 0, 0, 1]
        return list(r)

    def parse_residue(self, data):
        m = self.modulus
        if self.spec.kind == INTEGER_LINE:
            return int(data) % m
        if self.spec.kind == HEISENBERG:
            _, x, z, _, _, y, _, _, _ = data
            return (int(x) % m, int(y) % m, int(z) % m)
        return tuple(int(v) % m for v in data)

    def residue_sort_key(self, r) -> str:
        return json.dumps(self.serialize_residue(r), separators=(",", ":"))

    def size(self, factor_limit: int = 10_000_000) -> Optional[int]:
        """Order of the quotient group, or None when it needs factoring a
        modulus beyond factor_limit."""
        m = self.modulus
        k = self.spec.kind
        if k == INTEGER_LINE:
            return m
        if k == HEISENBERG:
            return m**3
        if m > factor_limit:
            return None
        order = m**3
        mm, p = m, 2
        while p * p <= mm:
            if mm % p == 0:
                order = order - order // (p * p)
                while mm % p == 0:
                    mm //= p
            p += 1
        if mm > 1:
            order = order - order // (mm * mm)
        return order

    def descriptor(self) -> dict:
        return {
            "kind": self.spec.kind,
            "modulus": self.modulus,
            "parent_modulus": self.parent_modulus,
            "level": self.level,
        }

    # -- orders ------------------------------------------------------------

    def element_order(self, g, iteration_cap: int = 2_000_000) -> int:
        """Least k >= 1 with project(g)^k trivial; the quotient is finite so
        this terminates, with closed forms for the common unipotent shapes."""
        m = self.modulus
        r = self.project(g)
        e = self.identity_residue
        if r == e:
            return 1
        k = self.spec.kind
        if k == INTEGER_LINE:
            return m // gcd(r, m)
        if k == HEISENBERG:
            # (x,y,z)^k = (kx, ky, kz + C(k,2) xy), so 2m is always a period
            return self._shrink_order(r, 2 * m)
        a, b, c, d = r
        if a == 1 and d == 1 and c == 0:
            return m // gcd(b, m)
        if a == 1 and d == 1 and b == 0:
            return m // gcd(c, m)
        acc = r
        for n in range(2, iteration_cap + 1):
            acc = self.mul(acc, r)
            if acc == e:
                return n
        raise ResourceLimitError(
            "element order exceeds iteration cap",
            quantity="order iterations",
            limit=iteration_cap,
        )

    def _pow_is_identity(self, r, n: int) -> bool:
        e = self.identity_residue
        acc = e
        base = r
        while n:
            if n & 1:
                acc = self.mul(acc, base)
            base = self.mul(base, base)
            n >>= 1
        return acc == e

    def _shrink_order(self, r, n: int) -> int:
        # n is a period; reduce it to the minimal one through its divisors
        k = 2
        while k * k <= n:
            while n % k == 0 and self._pow_is_identity(r, n // k):
                n //= k
            k += 1
        return n


# -- separation -------------------------------------------------------------


def _interval_matmul(p, q, dim):
    out = []
    for i in range(dim):
        for j in range(dim):
            lo = hi = 0
            for k in range(dim):
                alo, ahi = p[i * dim + k]
                blo, bhi = q[k * dim + j]
                prods = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
                lo += min(prods)
                hi += max(prods)
            out.append((lo, hi))
    return out


def _matrix_hull(mats, dim):
    hull = []
    for idx in range(dim * dim):
        vals = [m[idx] for m in mats]
        hull.append((min(vals), max(vals)))
    return hull


def growth_bound(spec: GroupSpec, elements, exponent: int) -> int:
    """Exact bound on the largest matrix entry over all products of at most
    `exponent` factors from `elements` (identity padding included)."""
    if exponent < 1:
        raise ValueError("exponent must be positive")
    if spec.kind == INTEGER_LINE:
        return max(1, exponent * max(abs(g) for g in elements))
    if spec.kind == HEISENBERG:
        mats = [(1, x, z, 0, 1, y, 0, 0, 1) for x, y, z in elements]
        mats.append((1, 0, 0, 0, 1, 0, 0, 0, 1))
        dim = 3
    else:
        if spec.kind == FREE:
            from .groups import free_to_matrix

            mats = [free_to_matrix(spec, w) for w in elements]
        else:
            mats = [tuple(g) for g in elements]
        mats.append(_MAT2_ID)
        dim = 2
    base = _matrix_hull(mats, dim)
    acc = base
    for _ in range(exponent - 1):
        acc = _interval_matmul(acc, base, dim)
    return max(max(abs(lo), abs(hi)) for lo, hi in acc)


@dataclass(frozen=True)
class SeparationCertificate:
    """Record of the arithmetic check 2*E(exponent) < modulus."""

    exponent: int
    entry_bound: int
    modulus: int
    satisfied: bool

    def to_record(self) -> dict:
        return {
            "exponent": self.exponent,
            "entry_bound": self.entry_bound,
            "modulus": self.modulus,
            "satisfied": self.satisfied,
        }


def separation_certificate(
    spec: GroupSpec, elements, exponent: int, modulus: int
) -> SeparationCertificate:
    """Certify S^exponent meets the mod-`modulus` kernel only at the identity.

    Sound because every entry of any product g of at most `exponent` factors
    is bounded by E, so every entry of g - I is bounded by E + 1 <= 2E < m;
    congruence to the identity then forces equality.  Returns satisfied=False
    when the arithmetic fails, in which case a larger modulus is needed.
    """
    bound = growth_bound(spec, elements, exponent)
    return SeparationCertificate(exponent, bound, modulus, 2 * bound < modulus)


def separate(
    spec: GroupSpec, elements, parent_modulus: int = 1, level: int = 1
) -> FiniteQuotient:
    """Smallest multiple of parent_modulus whose reduction kills no element
    of the finite set (identity excluded).  Degenerate input is flagged."""
    targets = [g for g in elements if not spec.is_identity(g)]
    if not targets:
        return FiniteQuotient(
            spec,
            max(parent_modulus, 2),
            parent_modulus,
            level,
            degenerate=True,
        )
    peak = max(spec.max_abs(g) for g in targets)
    modulus = parent_modulus * (2 * peak // parent_modulus + 1)
    q = FiniteQuotient(spec, modulus, parent_modulus, level)
    for g in targets:
        if q.project(g) == q.identity_residue:
            raise AssertionError("separation rule violated; modulus too small")
    return q


def modulus_for_bound(entry_bound: int, parent_modulus: int) -> int:
    """Smallest multiple of parent_modulus strictly above twice the bound."""
    return parent_modulus * (2 * entry_bound // parent_modulus + 1)


# -- kernel search and injectivity -------------------------------------------


def kernel_ball_elements(
    q: FiniteQuotient,
    search_radius: int,
    count: int = 2,
    node_cap: int = 1_000_000,
):
    """Nontrivial kernel members found inside the generator ball.

    Layered BFS over the group records residues; direct hits and collision
    products u*v^-1 short enough to stay in the ball are collected.  Layers
    are completed before stopping so the outcome is independent of hash
    order.  An empty result means the radius was too small; nothing is ever
    fabricated.
    """
    if search_radius < 1 or count < 1:
        raise ValueError("search_radius and count must be positive")
    spec = q.spec
    e = spec.identity
    id_res = q.identity_residue
    found = {}
    by_residue = {id_res: (e, 0)}
    seen = {e}
    frontier = [e]

    def _add(g):
        if spec.is_identity(g) or g in found:
            return
        found[g] = None
        found[spec.inv(g)] = None

    for depth in range(1, search_radius + 1):
        nxt = set()
        for g in frontier:
            for s in spec.generators:
                h = spec.mul(g, s)
                if h in seen or h in nxt:
                    continue
                nxt.add(h)
        if not nxt:
            break
        if len(seen) + len(nxt) > node_cap:
            raise ResourceLimitError(
                "kernel search exceeds node cap",
                quantity="ball nodes",
                limit=node_cap,
            )
        for h in sorted(nxt, key=spec.sort_key):
            res = q.project(h)
            if res == id_res:
                _add(h)
            elif res in by_residue:
                other, odepth = by_residue[res]
                if depth + odepth <= search_radius:
                    _add(spec.mul(h, spec.inv(other)))
            else:
                by_residue[res] = (h, depth)
        seen.update(nxt)
        frontier = sorted(nxt, key=spec.sort_key)
        if len(found) >= count:
            break
    ordered = spec.sorted_elements(found)
    if len(ordered) > count:
        kept = []
        for g in ordered:
            if g in kept:
                continue
            kept.append(g)
            inv = spec.inv(g)
            if inv != g and inv not in kept:
                kept.append(inv)
            if len(kept) >= count:
                break
        ordered = spec.sorted_elements(kept)
    return ordered


@dataclass(frozen=True)
class InjectivityResult:
    injective: bool
    mode: str  # "direct" or "certificate"
    ball_size: Optional[int] = None


def injectivity_check(
    q: FiniteQuotient,
    elements,
    radius: int,
    certified_exponent: Optional[int] = None,
    enum_cap: int = 300_000,
) -> InjectivityResult:
    """Is the projection injective on the radius-`radius` ball over `elements`?

    Checked directly on the enumerated ball when small enough; otherwise the
    separation certificate settles it, since a collision x != y inside the
    ball would put x*y^-1 in S^(2*radius) and in the kernel at once.
    """
    try:
        ball = q.spec.ball(elements, radius, node_cap=enum_cap)
    except ResourceLimitError:
        ball = None
    if ball is not None:
        residues = {q.project(g) for g in ball}
        return InjectivityResult(len(residues) == len(ball), "direct", len(ball))
    if certified_exponent is None or 2 * radius > certified_exponent:
        raise PreconditionError(
            "ball too large for direct check and not covered by a "
            "separation certificate"
        )
    return InjectivityResult(True, "certificate", None)
