"""Rank-one Heisenberg Fock module with integer grading.

Basis states are integer partitions: the partition (l1 >= ... >= lk) labels
the vector built by applying the creation modes a(-l1) ... a(-lk) to the
vacuum (the empty partition).  Mode operators obey

    [a(m), a(n)] = m * delta(m + n, 0),

and the zero mode is excluded (it acts as zero on this module).  The grading
operator gives a state the weight sum(parts), so the weight-w space has
dimension p(w) and the grading is bounded below by the vacuum at weight 0.
The bilinear pairing is the contravariant form making a(-n) adjoint to a(n),
normalized so the vacuum pairs to 1 with itself.  All coefficients are exact
rationals.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

Partition = tuple[int, ...]
Scalar = Fraction

VACUUM: Partition = ()

ONE = Fraction(1)
ZERO = Fraction(0)


class ModeError(ValueError):
    """Raised for the excluded zero mode."""


class PairingError(ValueError):
    """Raised when a gram matrix that must be invertible is singular."""


def weight(partition: Partition) -> int:
    return sum(partition)


def _partitions_first_part(w: int, largest: int) -> list[Partition]:
    if w == 0:
        return [()]
    out = []
    for first in range(min(w, largest), 0, -1):
        for rest in _partitions_first_part(w - first, first):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def partitions_of(w: int) -> tuple[Partition, ...]:
    """All partitions of w, lexicographically decreasing."""
    if w < 0:
        return ()
    return tuple(_partitions_first_part(w, w))


def enumerate_basis(weight_cutoff: int) -> list[Partition]:
    """Basis states of every weight 0..weight_cutoff, weights ascending,
    lexicographically decreasing within each weight.  Deterministic."""
    if weight_cutoff < 0:
        raise ValueError("weight cutoff must be >= 0")
    out: list[Partition] = []
    for w in range(weight_cutoff + 1):
        out.extend(partitions_of(w))
    return out


class GradedVector:
    """Finite rational combination of partition basis states."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[Partition, Scalar] | None = None):
        self.terms: dict[Partition, Scalar] = {}
        if terms:
            for state, coeff in terms.items():
                if coeff:
                    self.terms[state] = Fraction(coeff)

    @classmethod
    def vacuum(cls) -> "GradedVector":
        return cls({VACUUM: ONE})

    @classmethod
    def state(cls, partition: Partition | list[int]) -> "GradedVector":
        part = tuple(sorted(partition, reverse=True))
        if any(p < 1 for p in part):
            raise ValueError("parts must be positive")
        return cls({part: ONE})

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GradedVector) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "GradedVector") -> "GradedVector":
        out = dict(self.terms)
        for state, coeff in other.terms.items():
            out[state] = out.get(state, ZERO) + coeff
        return GradedVector(out)

    def __sub__(self, other: "GradedVector") -> "GradedVector":
        return self + (-other)

    def __neg__(self) -> "GradedVector":
        return GradedVector({s: -c for s, c in self.terms.items()})

    def __rmul__(self, scalar) -> "GradedVector":
        scalar = Fraction(scalar)
        return GradedVector({s: scalar * c for s, c in self.terms.items()})

    __mul__ = __rmul__

    def project(self, k: int) -> "GradedVector":
        """Weight-k homogeneous component."""
        return GradedVector({s: c for s, c in self.terms.items() if weight(s) == k})

    def weights(self) -> set[int]:
        return {weight(s) for s in self.terms}

    def max_weight(self) -> int:
        return max((weight(s) for s in self.terms), default=0)

    def is_homogeneous(self) -> bool:
        return len(self.weights()) <= 1

    def __repr__(self):
        if not self.terms:
            return "GradedVector(0)"
        bits = []
        for state in sorted(self.terms, key=lambda s: (weight(s), s)):
            bits.append(f"{self.terms[state]}*{state or 'vac'}")
        return "GradedVector(" + " + ".join(bits) + ")"


ZERO_VECTOR = GradedVector()


def mode_action(n: int, v: GradedVector, cutoff: int | None = None) -> GradedVector:
    """Apply the mode a(n) to v.

    n < 0 inserts the part |n| (creation); n > 0 removes one part equal to n
    with the commutator coefficient n * multiplicity (annihilation).  States
    above the weight cutoff are dropped.
    """
    if n == 0:
        raise ModeError("zero mode excluded from this module")
    out: dict[Partition, Scalar] = {}
    for state, coeff in v.terms.items():
        if n < 0:
            new = tuple(sorted(state + (-n,), reverse=True))
            if cutoff is not None and weight(new) > cutoff:
                continue
            out[new] = out.get(new, ZERO) + coeff
        else:
            mult = state.count(n)
            if not mult:
                continue
            idx = state.index(n)
            new = state[:idx] + state[idx + 1:]
            out[new] = out.get(new, ZERO) + coeff * n * mult
    return GradedVector(out)


def translate(v: GradedVector, cutoff: int) -> GradedVector:
    """Translation generator: raises weight by one.

    On a basis state it acts part by part, bumping one part n to n+1 with
    coefficient n * multiplicity.
    """
    out = GradedVector()
    for state, coeff in v.terms.items():
        for n in sorted(set(state)):
            mult = state.count(n)
            idx = state.index(n)
            bumped = tuple(sorted(state[:idx] + state[idx + 1:] + (n + 1,), reverse=True))
            if weight(bumped) <= cutoff:
                out += (coeff * n * mult) * GradedVector({bumped: ONE})
    return out


def translate_adjoint(v: GradedVector) -> GradedVector:
    """Pairing adjoint of the translation generator: lowers weight by one.

    Acts by dropping one part j >= 2 to j-1 with coefficient j * multiplicity;
    parts equal to 1 are killed (they would hit the excluded zero mode).
    """
    out = GradedVector()
    for state, coeff in v.terms.items():
        for j in sorted(set(state)):
            if j < 2:
                continue
            mult = state.count(j)
            idx = state.index(j)
            lowered = tuple(sorted(state[:idx] + state[idx + 1:] + (j - 1,), reverse=True))
            out += (coeff * j * mult) * GradedVector({lowered: ONE})
    return out


def pair(u: GradedVector, v: GradedVector) -> Scalar:
    """Contravariant bilinear pairing.

    Computed honestly: the annihilation modes of each u-state are pushed
    through v with the commutation relations; the vacuum coefficient of the
    result is the pairing.  Zero whenever the weights differ.
    """
    total = ZERO
    for state, coeff in u.terms.items():
        reduced = v
        for part in state:
            if not reduced:
                break
            reduced = mode_action(part, reduced)
        total += coeff * reduced.terms.get(VACUUM, ZERO)
    return total


@lru_cache(maxsize=None)
def gram_matrix(l: int) -> tuple[tuple[Scalar, ...], ...]:
    """Gram matrix of the pairing on the weight-l space, basis partitions_of(l)."""
    basis = partitions_of(l)
    rows = []
    for a in basis:
        va = GradedVector({a: ONE})
        rows.append(tuple(pair(va, GradedVector({b: ONE})) for b in basis))
    return tuple(rows)


def invert_matrix(rows: list[list[Scalar]]) -> list[list[Scalar]]:
    """Exact inverse by Gauss-Jordan elimination over the rationals."""
    n = len(rows)
    aug = [[Fraction(x) for x in row] + [ONE if i == j else ZERO for j in range(n)]
           for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise PairingError("singular gram matrix: pairing degenerate")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = ONE / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def dual_basis(l: int, change: list[list[Scalar]] | None = None
               ) -> list[tuple[GradedVector, GradedVector]]:
    """Pairs (g_i, gbar_i) spanning the weight-l space with pair(gbar_i, g_j)
    equal to delta_ij.

    ``change`` optionally replaces the partition basis by an invertible
    rational combination of it (rows are coordinates); the duals are rebuilt
    from the transformed gram matrix.
    """
    if l < 0:
        raise ValueError("weight must be >= 0")
    basis = [GradedVector({p: ONE}) for p in partitions_of(l)]
    if change is not None:
        if len(change) != len(basis):
            raise ValueError("basis change has wrong size")
        new = []
        for row in change:
            vec = GradedVector()
            for c, b in zip(row, basis):
                vec += Fraction(c) * b
            new.append(vec)
        basis = new
    gram = [[pair(a, b) for b in basis] for a in basis]
    inv = invert_matrix(gram)
    duals = []
    for i in range(len(basis)):
        dual = GradedVector()
        for j, b in enumerate(basis):
            dual += inv[j][i] * b
        duals.append(dual)
    return list(zip(basis, duals))
