"""Operator-valued series attached to module elements.

The generating field of the Heisenberg module expands as

    a(z) = sum_n a(n) z**(-n-1),

and the partition state (l1, ..., lk) is realized by the normal-ordered
product of the derivative fields d^(l-1) a(z) / (l-1)!, peeled one part at a
time:

    field((l1,) + rest, z) = :(d^(l1-1) a(z) / (l1-1)!) field(rest, z):

with the creation half acting after and the annihilation half before the
inner field.  Applied to a module vector with a weight cutoff this yields a
finite map from integer powers of z to vectors; powers are stored so that the
z**p coefficient raises weight by p + wt(source).  The relation to mode
numbers is p = -n - wt(source), kept in one conversion helper.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .fock import (
    GradedVector,
    Partition,
    ONE,
    mode_action,
    pair,
    partitions_of,
    translate,
    translate_adjoint,
    weight,
)
from .series import comb_general

PowerMap = dict[int, GradedVector]


class CutoffUnderflowError(ValueError):
    """The weight cutoff is too small to retain any coefficient."""


def power_from_mode(n: int, source_weight: int) -> int:
    """z-power carried by mode n of a weight-homogeneous source."""
    return -n - source_weight


def mode_from_power(p: int, source_weight: int) -> int:
    return -p - source_weight


def _derivative_mode_coeff(k: int, n: int) -> Fraction:
    """Coefficient of a(n) z**(-n-k) in d^(k-1) a(z) / (k-1)!."""
    return (-1) ** (k - 1) * comb_general(n + k - 1, k - 1)


@lru_cache(maxsize=None)
def _gamma_state(source: Partition, target: Partition, cutoff: int) -> tuple[tuple[int, GradedVector], ...]:
    """Power map of the source-state field applied to the target state.

    Exact for every retained power; coefficients of weight above the cutoff
    are dropped (each power holds a single homogeneous vector, so truncation
    never corrupts retained entries).
    """
    if not source:
        if weight(target) > cutoff:
            return ()
        return ((0, GradedVector.state(target)),)
    k = source[0]
    rest = source[1:]
    out: dict[int, GradedVector] = {}

    def absorb(power: int, vec: GradedVector):
        if vec.is_zero():
            return
        if power in out:
            out[power] = out[power] + vec
        else:
            out[power] = vec

    # creation half of d^(k-1)a/(k-1)! applied after field(rest)
    inner = _gamma_state(rest, target, cutoff)
    for p, vec in inner:
        for m in range(1, cutoff + 1):  # creation mode a(-m)
            coeff = _derivative_mode_coeff(k, -m)
            if not coeff:
                continue
            created = coeff * mode_action(-m, vec, cutoff)
            absorb(p + m - k, created)
    # annihilation half applied before field(rest)
    target_vec = GradedVector.state(target)
    for m in set(target):  # a(m) with m > 0 kills the state unless m is a part
        lowered = mode_action(m, target_vec)
        coeff = _derivative_mode_coeff(k, m)
        if not coeff or lowered.is_zero():
            continue
        for state, c in lowered.terms.items():
            for p, vec in _gamma_state(rest, state, cutoff):
                absorb(p - m - k, (coeff * c) * vec)
    return tuple(sorted((p, v) for p, v in out.items() if not v.is_zero()))


def gamma_apply(source: GradedVector, target: GradedVector, weight_cutoff: int) -> PowerMap:
    """Apply the field of ``source`` to ``target``: map power -> vector.

    Bilinear in both arguments; the identity state returns {0: target}.
    Raises CutoffUnderflowError when nothing survives a positive input.
    """
    out: dict[int, GradedVector] = {}
    for s_state, s_coeff in source.terms.items():
        for t_state, t_coeff in target.terms.items():
            for p, vec in _gamma_state(s_state, t_state, weight_cutoff):
                add = (s_coeff * t_coeff) * vec
                if p in out:
                    out[p] = out[p] + add
                else:
                    out[p] = add
    out = {p: v for p, v in out.items() if not v.is_zero()}
    if not out and source and target:
        raise CutoffUnderflowError(
            f"weight cutoff {weight_cutoff} retains no coefficient")
    return out


def gamma_on_vacuum_shift(source: GradedVector, weight_cutoff: int) -> PowerMap:
    """Field on the vacuum: the translation exponential of the source."""
    return gamma_apply(source, GradedVector.vacuum(), weight_cutoff)


def translation_exponential(v: GradedVector, weight_cutoff: int) -> PowerMap:
    """Map j -> T^j v / j!, finite under the weight cutoff."""
    out: PowerMap = {}
    current = v
    factorial = ONE
    j = 0
    while current:
        out[j] = (1 / factorial) * current
        j += 1
        factorial *= j
        current = translate(current, weight_cutoff)
    return out


def lowering_exponential(v: GradedVector) -> PowerMap:
    """Map j -> (T-adjoint)^j v / j!; terminates since weights are bounded below."""
    out: PowerMap = {}
    current = v
    factorial = ONE
    j = 0
    while current:
        out[j] = (1 / factorial) * current
        j += 1
        factorial *= j
        current = translate_adjoint(current)
    return out


def gamma_adjoint_apply(source: GradedVector, functional: GradedVector,
                        weight_cutoff: int) -> dict[Partition, PowerMap]:
    """Pairing adjoint of the source field applied to a functional vector.

    Returns, per basis state b, the z-power map of <functional, field(z) b>
    divided by <b, b> so that pairing the result against any w reproduces
    <functional, field(z) w>.  Exact for retained powers.
    """
    out: dict[Partition, PowerMap] = {}
    for w in range(weight_cutoff + 1):
        for b in partitions_of(w):
            norm = pair(GradedVector.state(b), GradedVector.state(b))
            applied = {}
            for p, vec in gamma_apply(source, GradedVector.state(b), weight_cutoff).items():
                c = pair(functional, vec)
                if c:
                    applied[p] = c / norm
            if applied:
                out[b] = applied
    return out


def derivation_check(source: GradedVector, weight_cutoff: int):
    """Verify that the translated source's field is the z-derivative of the
    source's field, power by power on every basis state within the cutoff.

    Returns (ok, max_deviation, located) where located names the first
    offending (target, power).
    """
    translated = translate(source, weight_cutoff)
    worst = Fraction(0)
    located = None
    for w in range(weight_cutoff + 1):
        for target in partitions_of(w):
            tvec = GradedVector.state(target)
            lhs = gamma_apply(translated, tvec, weight_cutoff) if translated else {}
            rhs_raw = gamma_apply(source, tvec, weight_cutoff)
            rhs = {p - 1: p * vec for p, vec in rhs_raw.items() if p}
            for p in set(lhs) | set(rhs):
                delta = lhs.get(p, GradedVector()) - rhs.get(p, GradedVector())
                # derivative shifts the weight-p+1 coefficient to power p, so
                # only powers whose coefficients both sides retain may differ
                for state, c in delta.terms.items():
                    if abs(c) > worst:
                        worst = abs(c)
                        located = (target, p)
    return worst == 0, worst, located
