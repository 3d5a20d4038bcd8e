"""Exact arithmetic and ball enumeration for the supported groups.

The catalog is fixed: the integer line, free groups of rank >= 2 (realized
inside SL(2,Z) via the Sanov matrices for quotient purposes), the discrete
Heisenberg group, and SL(2,Z).  Every kind has a decidable word problem and
canonical element payloads:

    integer-line   int
    free(r)        tuple of (letter, exponent) pairs, freely reduced
    heisenberg3    (x, y, z) for the upper unitriangular matrix
                   [[1, x, z], [0, 1, y], [0, 0, 1]]
    sl2z           (a, b, c, d) row-major with a*d - b*c == 1

All payloads are immutable values and all operations are pure functions, so
everything here is safe for concurrent use.  Ball enumeration is sequential
and layer-sorted to guarantee a reproducible order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import (
    ResourceLimitError,
    SpecMismatchError,
    UnsupportedKindError,
)

INTEGER_LINE = "integer-line"
FREE = "free"
HEISENBERG = "heisenberg3"
SL2Z = "sl2z"

KINDS = (INTEGER_LINE, FREE, HEISENBERG, SL2Z)

# Sanov generators: a free basis of a rank-2 subgroup of SL(2,Z).
_SANOV_A = (1, 2, 0, 1)
_SANOV_B = (1, 0, 2, 1)

_MAT2_ID = (1, 0, 0, 1)

# Words longer than this serialize in run-length form ("a^91") instead of
# flat letters; kernel powers can have astronomically long flat forms.
FLAT_WORD_LIMIT = 1000


def _mat2_mul(p, q):
    a, b, c, d = p
    e, f, g, h = q
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def _mat2_mul_mod(p, q, m):
    a, b, c, d = p
    e, f, g, h = q
    return (
        (a * e + b * g) % m,
        (a * f + b * h) % m,
        (c * e + d * g) % m,
        (c * f + d * h) % m,
    )


def _mat2_pow(p, n):
    if n < 0:
        a, b, c, d = p
        return _mat2_pow((d, -b, -c, a), -n)
    out = _MAT2_ID
    base = p
    while n:
        if n & 1:
            out = _mat2_mul(out, base)
        base = _mat2_mul(base, base)
        n >>= 1
    return out


@dataclass(frozen=True)
class GroupSpec:
    """A catalog group together with its fixed symmetric generating set."""

    kind: str
    rank: int = 0
    label: str = ""
    generators: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedKindError(f"unknown group kind: {self.kind!r}")
        for g in self.generators:
            self.validate_element(g)
            if self.is_identity(g):
                raise SpecMismatchError("generator list must exclude the identity")
        gens = set(self.generators)
        for g in self.generators:
            if self.inv(g) not in gens:
                raise SpecMismatchError("generator list must be symmetric")

    # -- basic operations ------------------------------------------------

    @property
    def identity(self):
        if self.kind == INTEGER_LINE:
            return 0
        if self.kind == FREE:
            return ()
        if self.kind == HEISENBERG:
            return (0, 0, 0)
        return _MAT2_ID

    def is_identity(self, g) -> bool:
        return g == self.identity

    def mul(self, a, b):
        k = self.kind
        if k == INTEGER_LINE:
            return a + b
        if k == FREE:
            return _word_mul(a, b)
        if k == HEISENBERG:
            x1, y1, z1 = a
            x2, y2, z2 = b
            return (x1 + x2, y1 + y2, z1 + z2 + x1 * y2)
        return _mat2_mul(a, b)

    def inv(self, a):
        k = self.kind
        if k == INTEGER_LINE:
            return -a
        if k == FREE:
            return tuple((ltr, -e) for ltr, e in reversed(a))
        if k == HEISENBERG:
            x, y, z = a
            return (-x, -y, x * y - z)
        p, q, r, s = a
        return (s, -q, -r, p)

    def compose(self, a, b):
        """Validated product; raises SpecMismatchError on foreign payloads."""
        self.validate_element(a)
        self.validate_element(b)
        return self.mul(a, b)

    def validate_element(self, g):
        k = self.kind
        if k == INTEGER_LINE:
            if not isinstance(g, int) or isinstance(g, bool):
                raise SpecMismatchError(f"not an integer-line element: {g!r}")
            return
        if not isinstance(g, tuple):
            raise SpecMismatchError(f"not a {k} element: {g!r}")
        if k == FREE:
            prev = None
            for pair in g:
                if not (isinstance(pair, tuple) and len(pair) == 2):
                    raise SpecMismatchError(f"malformed word: {g!r}")
                ltr, e = pair
                if not (0 <= ltr < self.rank) or e == 0:
                    raise SpecMismatchError(f"word not over rank {self.rank}: {g!r}")
                if ltr == prev:
                    raise SpecMismatchError(f"word not freely reduced: {g!r}")
                prev = ltr
            return
        if k == HEISENBERG:
            if len(g) != 3 or not all(isinstance(v, int) for v in g):
                raise SpecMismatchError(f"not a heisenberg3 element: {g!r}")
            return
        if len(g) != 4 or not all(isinstance(v, int) for v in g):
            raise SpecMismatchError(f"not an sl2z element: {g!r}")
        a, b, c, d = g
        if a * d - b * c != 1:
            raise SpecMismatchError(f"determinant is not 1: {g!r}")

    # -- serialization ---------------------------------------------------

    def serialize(self, g):
        """Canonical wire form: decimal string, word string, or row-major array."""
        k = self.kind
        if k == INTEGER_LINE:
            return str(g)
        if k == FREE:
            return _word_str(g)
        if k == HEISENBERG:
            x, y, z = g
            return [1, x, z, 0, 1, y, 0, 0, 1]
        return list(g)

    def parse(self, data):
        k = self.kind
        try:
            if k == INTEGER_LINE:
                g = int(data)
            elif k == FREE:
                g = _word_parse(data)
            elif k == HEISENBERG:
                one_a, x, z, z0, one_b, y, z1, z2, one_c = data
                if (one_a, z0, one_b, z1, z2, one_c) != (1, 0, 1, 0, 0, 1):
                    raise ValueError("not upper unitriangular")
                g = (int(x), int(y), int(z))
            else:
                g = tuple(int(v) for v in data)
        except (TypeError, ValueError) as exc:
            raise SpecMismatchError(f"cannot parse {k} element from {data!r}") from exc
        self.validate_element(g)
        return g

    def sort_key(self, g) -> str:
        """Deterministic tie-break key: lexicographic on the serialized payload."""
        return json.dumps(self.serialize(g), separators=(",", ":"))

    def sorted_elements(self, elements):
        return sorted(set(elements), key=self.sort_key)

    # -- geometry --------------------------------------------------------

    def max_abs(self, g) -> int:
        """Largest absolute matrix entry of g (of its image, for free words)."""
        k = self.kind
        if k == INTEGER_LINE:
            return abs(g)
        if k == FREE:
            return max(abs(v) for v in free_to_matrix(self, g))
        if k == HEISENBERG:
            x, y, z = g
            return max(1, abs(x), abs(y), abs(z))
        return max(abs(v) for v in g)

    def ball(self, gens, radius: int, node_cap: Optional[int] = None):
        """All products of at most `radius` generators, in layered BFS order.

        Within a layer, elements are ordered by sort_key.  The identity is
        layer 0 even when absent from `gens`; an identity generator is
        tolerated and skipped.  Exceeding `node_cap` raises
        ResourceLimitError rather than truncating.
        """
        elements, _ = self.ball_layers(gens, radius, node_cap)
        return elements

    def ball_layers(self, gens, radius: int, node_cap: Optional[int] = None):
        """Like ball(), additionally returning the list of layer sizes."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        steps = [g for g in self.sorted_elements(gens) if not self.is_identity(g)]
        _check_symmetric(self, steps)
        e = self.identity
        seen = {e}
        ordered = [e]
        layer_sizes = [1]
        frontier = [e]
        for _ in range(radius):
            nxt = set()
            for g in frontier:
                for s in steps:
                    h = self.mul(g, s)
                    if h not in seen and h not in nxt:
                        nxt.add(h)
            if node_cap is not None and len(seen) + len(nxt) > node_cap:
                raise ResourceLimitError(
                    f"ball enumeration exceeds node cap {node_cap}",
                    quantity="ball nodes",
                    limit=node_cap,
                )
            if not nxt:
                break
            layer = sorted(nxt, key=self.sort_key)
            ordered.extend(layer)
            layer_sizes.append(len(layer))
            seen.update(nxt)
            frontier = layer
        return ordered, layer_sizes

    def word_length(self, g, max_radius: int = 4096, node_cap: int = 2_000_000) -> int:
        """Distance from the identity with respect to self.generators."""
        k = self.kind
        if k == INTEGER_LINE and set(self.generators) == {1, -1}:
            return abs(g)
        if k == FREE:
            return sum(abs(e) for _, e in g)
        if self.is_identity(g):
            return 0
        seen = {self.identity}
        frontier = [self.identity]
        for dist in range(1, max_radius + 1):
            nxt = []
            for h in frontier:
                for s in self.generators:
                    t = self.mul(h, s)
                    if t == g:
                        return dist
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
            if len(seen) > node_cap:
                raise ResourceLimitError(
                    "word length search exceeds node cap",
                    quantity="ball nodes",
                    limit=node_cap,
                )
            frontier = nxt
        raise ResourceLimitError(
            f"word length search exceeds radius {max_radius}",
            quantity="search radius",
            limit=max_radius,
        )

    def weight(self, g) -> Fraction:
        """2**-n(g) where n(g) is the first generator ball containing g."""
        return Fraction(1, 2 ** self.word_length(g))


def _check_symmetric(spec: GroupSpec, steps) -> None:
    steps_set = set(steps)
    for s in steps:
        if spec.inv(s) not in steps_set:
            raise SpecMismatchError("generating set must be symmetric")


# -- free words ------------------------------------------------------------


def _word_mul(u, v):
    out = list(u)
    for ltr, e in v:
        if out and out[-1][0] == ltr:
            merged = out[-1][1] + e
            out.pop()
            if merged:
                out.append((ltr, merged))
        else:
            out.append((ltr, e))
    return tuple(out)


def _word_str(w) -> str:
    total = sum(abs(e) for _, e in w)
    parts = []
    if total <= FLAT_WORD_LIMIT:
        for ltr, e in w:
            ch = chr(ord("a") + ltr) if e > 0 else chr(ord("A") + ltr)
            parts.append(ch * abs(e))
    else:
        for ltr, e in w:
            ch = chr(ord("a") + ltr) if e > 0 else chr(ord("A") + ltr)
            parts.append(ch if abs(e) == 1 else f"{ch}^{abs(e)}")
    return "".join(parts)


def _word_parse(s: str):
    if not isinstance(s, str):
        raise ValueError("free words parse from strings")
    pairs = []
    i = 0
    while i < len(s):
        ch = s[i]
        if "a" <= ch <= "z":
            ltr, sign = ord(ch) - ord("a"), 1
        elif "A" <= ch <= "Z":
            ltr, sign = ord(ch) - ord("A"), -1
        else:
            raise ValueError(f"bad word character {ch!r}")
        i += 1
        exp = 1
        if i < len(s) and s[i] == "^":
            j = i + 1
            while j < len(s) and s[j].isdigit():
                j += 1
            if j == i + 1:
                raise ValueError("caret without exponent")
            exp = int(s[i + 1 : j])
            i = j
        pairs.append((ltr, sign * exp))
    word = ()
    for ltr, e in pairs:
        word = _word_mul(word, ((ltr, e),))
    return word


def free_letter_matrix(letter: int, exponent: int):
    """Image of one generator power under the fixed embedding into SL(2,Z).

    Letter 0 maps to the Sanov A, letter 1 to the Sanov B; for higher ranks
    letter j maps to B^-j A B^j, whose powers stay closed-form.
    """
    if letter == 0:
        return (1, 2 * exponent, 0, 1)
    if letter == 1:
        return (1, 0, 2 * exponent, 1)
    j = letter - 1
    conj = _mat2_pow(_SANOV_B, j)
    conj_inv = _mat2_pow(_SANOV_B, -j)
    return _mat2_mul(_mat2_mul(conj_inv, (1, 2 * exponent, 0, 1)), conj)


def free_to_matrix(spec: GroupSpec, w):
    """Evaluate a reduced word under the injective homomorphism into SL(2,Z)."""
    if spec.kind != FREE:
        raise UnsupportedKindError("free_to_matrix expects a free group")
    out = _MAT2_ID
    for ltr, e in w:
        out = _mat2_mul(out, free_letter_matrix(ltr, e))
    return out


def free_to_matrix_mod(spec: GroupSpec, w, m: int):
    """free_to_matrix followed by entrywise reduction mod m, kept cheap for runs."""
    out = _MAT2_ID
    for ltr, e in w:
        out = _mat2_mul_mod(out, tuple(v % m for v in free_letter_matrix(ltr, e)), m)
    return out


# -- catalog constructors ---------------------------------------------------


def integer_line(label: str = "Z") -> GroupSpec:
    return GroupSpec(INTEGER_LINE, label=label, generators=(1, -1))


def free_group(rank: int, label: str = "") -> GroupSpec:
    if not 2 <= rank <= 26:
        raise UnsupportedKindError("free rank must be between 2 and 26")
    gens = []
    for ltr in range(rank):
        gens.append(((ltr, 1),))
        gens.append(((ltr, -1),))
    return GroupSpec(FREE, rank=rank, label=label or f"F{rank}", generators=tuple(gens))


def heisenberg(label: str = "H3(Z)") -> GroupSpec:
    gens = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
    return GroupSpec(HEISENBERG, label=label, generators=gens)


def sl2z(label: str = "SL(2,Z)") -> GroupSpec:
    s = (0, -1, 1, 0)
    t = (1, 1, 0, 1)
    gens = (s, (0, 1, -1, 0), t, (1, -1, 0, 1))
    return GroupSpec(SL2Z, label=label, generators=gens)


_CONSTRUCTORS = {
    "z": integer_line,
    "heis": heisenberg,
    "sl2z": sl2z,
}


def group_by_name(name: str) -> GroupSpec:
    """Resolve CLI-style names: z, heis, sl2z, free2, free3, ..."""
    if name in _CONSTRUCTORS:
        return _CONSTRUCTORS[name]()
    if name.startswith("free"):
        try:
            rank = int(name[4:])
        except ValueError:
            raise UnsupportedKindError(f"unknown group name: {name!r}") from None
        return free_group(rank)
    raise UnsupportedKindError(f"unknown group name: {name!r}")
