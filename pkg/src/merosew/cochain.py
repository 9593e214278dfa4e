"""Coboundary operator and the double chain-cochain grid.

The coboundary of an n-ary correlator, evaluated on n+1 argument slots, is
the signed sum of

* n contraction terms: arguments i, i+1 replaced by the field of argument i
  acting on argument i+1 at the difference of their variables, the fused
  insertion sitting at the inner variable;
* two boundary terms moving the first or last argument's field onto the
  functional side, with signs +1 and (-1)**(n+1).

Every term is realized as a truncated series in the common standard region
|z_1| > ... > |z_{n+1}| > 0.  Boundary terms and contractions away from the
chain tail are expansions of the same meromorphic functions as radially
ordered matrix elements, and are computed that way; a contraction whose
fused insertion lands on the vacuum end of the chain is built honestly from
the field-map payload and binomial expansions of the difference powers (away
from the tail such a monomial re-expansion has no convergent formal meaning,
one annihilation tail per payload weight hitting the same monomial).

Squaring the operator cancels structurally identical terms with opposite
signs exactly; the remaining adjacent-contraction pairs cancel because the
two nested tail expansions certify the same function, which is the content
the zero check verifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .fock import GradedVector, weight
from .fields import _gamma_state
from .series import ExpansionDomain, MultiSeries, expand_binomial
from .correlators import CorrelatorSpec, Cutoffs, SpecError, radial_series

ONE = Fraction(1)


@dataclass(frozen=True)
class ComplexPosition:
    """Grid coordinates: cochain degree n, attached-series count m."""
    n: int
    m: int

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise SpecError("grid coordinates must be nonnegative")

    @property
    def terminal(self) -> bool:
        return self.m == 0

    def step(self) -> "ComplexPosition":
        if self.terminal:
            raise SpecError("terminal position: no coboundary at m = 0")
        return ComplexPosition(self.n + 1, self.m - 1)


@dataclass(frozen=True)
class Node:
    """Argument slot: a plain insertion or a fusion of two earlier slots.

    A fused node anchors at the second slot's variable; the first slot's
    variable survives only through the difference powers.
    """
    var: str
    vec: GradedVector | None = None
    first: "Node | None" = None
    second: "Node | None" = None

    @classmethod
    def plain(cls, vec: GradedVector, var: str) -> "Node":
        return cls(var=var, vec=vec)

    @classmethod
    def fused(cls, first: "Node", second: "Node") -> "Node":
        return cls(var=second.var, first=first, second=second)

    @property
    def is_fused(self) -> bool:
        return self.first is not None

    def leaves(self) -> list[tuple[GradedVector, str]]:
        if not self.is_fused:
            return [(self.vec, self.var)]
        return self.first.leaves() + self.second.leaves()

    def diffs(self) -> list[tuple[str, str]]:
        if not self.is_fused:
            return []
        return (self.first.diffs() + [(self.first.var, self.second.var)]
                + self.second.diffs())

    def payload(self, weight_cutoff: int) -> dict[tuple[int, ...], GradedVector]:
        """Difference-power map of the fused state, keys aligned with diffs()."""
        if not self.is_fused:
            return {(): self.vec}
        pa = self.first.payload(weight_cutoff)
        pb = self.second.payload(weight_cutoff)
        out: dict[tuple[int, ...], GradedVector] = {}
        for ka, va in pa.items():
            for kb, vb in pb.items():
                for sa, ca in va.terms.items():
                    for sb, cb in vb.terms.items():
                        for p, vec in _gamma_state(sa, sb, weight_cutoff):
                            key = ka + (p,) + kb
                            add = (ca * cb) * vec
                            if key in out:
                                out[key] = out[key] + add
                            else:
                                out[key] = add
        return {k: v for k, v in out.items() if not v.is_zero()}


Term = tuple[Fraction, tuple[Node, ...], tuple[Node, ...]]


def delta_arglists(fargs: tuple[Node, ...], tnodes: tuple[Node, ...]
                   ) -> list[Term]:
    """One application of the coboundary formula to an argument list.

    fargs has (input arity + 1) entries; tnodes are fields already moved to
    the functional side, passed through untouched.
    """
    n_inner = len(fargs) - 1
    out: list[Term] = []
    for i in range(n_inner):
        fused = Node.fused(fargs[i], fargs[i + 1])
        out.append((Fraction((-1) ** (i + 1)),
                    fargs[:i] + (fused,) + fargs[i + 2:], tnodes))
    out.append((ONE, fargs[1:], tnodes + (fargs[0],)))
    out.append((Fraction((-1) ** (n_inner + 1)), fargs[:-1], tnodes + (fargs[-1],)))
    return out


def iterated_delta(fargs: tuple[Node, ...], times: int,
                   tnodes: tuple[Node, ...] = ()) -> list[Term]:
    """Compose the coboundary formula the given number of times."""
    if times == 0:
        return [(ONE, fargs, tnodes)]
    out: list[Term] = []
    for sign, fa, tn in delta_arglists(fargs, tnodes):
        for sign2, fa2, tn2 in iterated_delta(fa, times - 1, tn):
            out.append((sign * sign2, fa2, tn2))
    return out


def term_series(theta: GradedVector, nodes: tuple[Node, ...],
                domain: ExpansionDomain, cutoffs: Cutoffs) -> MultiSeries:
    """Standard-region series of one coboundary term.

    All nodes except a tail fusion contribute their flattened leaves to the
    radial matrix element (the expansion of the common function); a fused
    node anchored at the innermost variable is expanded through its payload
    and the difference binomials.
    """
    ordered = sorted(nodes, key=lambda nd: domain.index(nd.var))
    tail = ordered[-1] if ordered else None
    plain: list[tuple[GradedVector, str]] = []
    for nd in ordered[:-1]:
        plain.extend(nd.leaves())
    if tail is None:
        return radial_series(theta, (), domain, cutoffs)
    if not tail.is_fused:
        plain.extend(tail.leaves())
        return radial_series(theta, tuple(plain), domain, cutoffs)
    diffs = tail.diffs()
    payload = tail.payload(cutoffs.weight)
    total = MultiSeries.zero(domain)
    p_max = [max(key[slot] for key in payload) for slot in range(len(diffs))] \
        if payload else []
    for key, vec in sorted(payload.items()):
        ins = tuple(plain) + ((vec, tail.var),)
        piece = radial_series(theta, ins, domain, cutoffs)
        for slot, (hi_var, lo_var) in enumerate(diffs):
            piece = piece * expand_binomial(domain, hi_var, lo_var, key[slot],
                                            order=cutoffs.order)
        total = total + piece
    # payload truncation: difference powers beyond the retained range are
    # unknown, so the fused-away variables' windows cap at the retained power
    for slot, (hi_var, _lo_var) in enumerate(diffs):
        total = total.restrict_window({hi_var: (None, p_max[slot])})
    return total


def terms_series(theta: GradedVector, terms: list[Term],
                 domain: ExpansionDomain, cutoffs: Cutoffs) -> MultiSeries:
    total = MultiSeries.zero(domain)
    for sign, fargs, tnodes in terms:
        total = total + sign * term_series(theta, tnodes + fargs, domain, cutoffs)
    return total


@dataclass
class CochainImage:
    """Coboundary image: signed argument-list terms plus bookkeeping."""
    position: ComplexPosition
    theta: GradedVector
    domain: ExpansionDomain
    terms: list[Term]
    slots_left: tuple[tuple[GradedVector, str], ...]

    def series(self, cutoffs: Cutoffs) -> MultiSeries:
        return terms_series(self.theta, self.terms, self.domain, cutoffs)


def _argument_nodes(spec: CorrelatorSpec, consumed: int
                    ) -> tuple[tuple[Node, ...], ExpansionDomain,
                               tuple[tuple[GradedVector, str], ...]]:
    """Insertion nodes plus the last ``consumed`` attached slots, appended as
    the smallest variables in consumption order."""
    if consumed > spec.m:
        raise SpecError(f"spec has {spec.m} attached slots, {consumed} needed")
    ordered = sorted(spec.insertions, key=lambda ins: spec.domain.index(ins[1]))
    nodes = [Node.plain(vec, var) for vec, var in ordered]
    order = [v for _, v in ordered]
    slots = spec.attached
    for j in range(consumed):
        vec, var = slots[len(slots) - 1 - j]
        nodes.append(Node.plain(vec, var))
        order.append(var)
    remaining = slots[:len(slots) - consumed]
    return tuple(nodes), ExpansionDomain(order), remaining


def coboundary(spec: CorrelatorSpec, cutoffs: Cutoffs) -> CochainImage:
    """Apply the coboundary once, consuming the last attached slot."""
    if spec.m == 0:
        raise SpecError("terminal position: m = 0 has no coboundary")
    nodes, domain, remaining = _argument_nodes(spec, 1)
    terms = delta_arglists(nodes, ())
    return CochainImage(ComplexPosition(spec.n, spec.m).step(), spec.theta,
                        domain, terms, remaining)


def delta_square_check(spec: CorrelatorSpec, cutoffs: Cutoffs,
                       corrupt_term: int | None = None):
    """Exact-zero test of the squared coboundary on a spec with m >= 2.

    Returns (ok, max_abs, series).  ``corrupt_term`` flips the sign of one
    composed term, the negative control locating sign errors.
    """
    if spec.m < 2:
        raise SpecError("squaring the coboundary needs m >= 2")
    nodes, domain, _ = _argument_nodes(spec, 2)
    terms = iterated_delta(nodes, 2)
    if corrupt_term is not None:
        sign, fa, tn = terms[corrupt_term]
        terms = list(terms)
        terms[corrupt_term] = (-sign, fa, tn)
    series = terms_series(spec.theta, terms, domain, cutoffs)
    worst = Fraction(0)
    for exps, coeff in series.terms.items():
        if abs(coeff) > worst:
            worst = abs(coeff)
    return worst == 0 and series.window is not None, worst, series


def complex_ladder(spec: CorrelatorSpec, cutoffs: Cutoffs) -> dict:
    """Walk the full ladder from (n, m) down to the terminal column.

    Applies the coboundary repeatedly; reports degree bookkeeping (n + m
    constant), the first-step image size, and the exact-zero residual of
    every composable pair (the j-fold composition for every j >= 2).
    """
    if spec.m < 1:
        raise SpecError("ladder needs at least one attached slot")
    position = ComplexPosition(spec.n, spec.m)
    total_degree = spec.n + spec.m
    steps = []
    for j in range(1, spec.m + 1):
        nodes, domain, _ = _argument_nodes(spec, j)
        terms = iterated_delta(nodes, j)
        position = position.step()
        entry = {
            "position": (position.n, position.m),
            "degree_ok": position.n + position.m == total_degree,
            "terms": len(terms),
        }
        if j >= 2:
            series = terms_series(spec.theta, terms, domain, cutoffs)
            worst = max((abs(c) for c in series.terms.values()), default=Fraction(0))
            entry["square_zero"] = (worst == 0 and series.window is not None)
            entry["max_residual"] = worst
        steps.append(entry)
    return {
        "start": (spec.n, spec.m),
        "total_degree": total_degree,
        "steps": steps,
        "ok": all(st.get("square_zero", True) and st["degree_ok"] for st in steps),
    }
