"""Matrix-element correlation functions over the graded Fock module.

A correlator pairs a fixed functional vector against a product of fields
applied to the vacuum,

    <theta, field(g1, z1) ... field(gn, zn) vacuum>,

expanded as a truncated Laurent series in the region |z1| > ... > |zn| > 0.
Insertions handed in any order are applied in the magnitude order of their
variables (radial ordering), so reassigning states to variables realizes the
series of the analytically continued function rather than a reordered
operator product.

Every monomial's coefficient is determined by a single chain of intermediate
weights, so the weight cutoff drops monomials without corrupting retained
ones; the exactness window of the result is assigned from that chain
structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product

from .fock import (
    GradedVector,
    Partition,
    ONE,
    ZERO,
    pair,
    translate,
    translate_adjoint,
    weight,
)
from .fields import _gamma_state, translation_exponential
from .series import (
    Bound,
    DomainError,
    ExpansionDomain,
    MultiSeries,
    expand_binomial,
)

Insertion = tuple[GradedVector, str]


class SpecError(ValueError):
    """Malformed correlator description."""


class UnderflowError(ValueError):
    """Cutoffs too small to retain anything."""


@dataclass(frozen=True)
class Cutoffs:
    """Truncation knobs shared by the correlator-level operations.

    weight: intermediate states above this weight are dropped.
    order:  truncation order for geometric (negative binomial) expansions
            and shift variables.
    budgets: optional per-variable weight budgets (summing to <= weight)
            steering the certified window; equal split by default.
    """
    weight: int
    order: int = 8
    budgets: tuple[int, ...] | None = None


@dataclass(frozen=True)
class CorrelatorSpec:
    """Symbolic description of a correlator with optional attached slots.

    ``insertions`` pair module vectors with variable names from ``domain``;
    ``attached`` lists reserve (vector, fresh variable) slots consumed by the
    coboundary operator and the block insertion sums.  ``theta`` is the
    functional vector, the dual vacuum by default.
    """
    insertions: tuple[Insertion, ...]
    domain: ExpansionDomain
    theta: GradedVector = field(default_factory=GradedVector.vacuum)
    attached: tuple[Insertion, ...] = ()

    def __post_init__(self):
        names = [v for _, v in self.insertions]
        if len(set(names)) != len(names):
            raise SpecError(f"repeated insertion variables: {names}")
        for v in names:
            if v not in self.domain:
                raise SpecError(f"insertion variable {v!r} not in {self.domain}")
        for _, v in self.attached:
            if v in self.domain:
                raise SpecError(f"attached slot variable {v!r} already in domain")

    @property
    def n(self) -> int:
        return len(self.insertions)

    @property
    def m(self) -> int:
        return len(self.attached)


@dataclass
class CorrelatorValue:
    series: MultiSeries
    spec: CorrelatorSpec
    cutoffs: Cutoffs

    def pole_orders(self) -> dict[tuple[int, int], int]:
        """Observed pole orders at coinciding insertion points (n <= 3)."""
        form = rational_form(self.spec, self.cutoffs)
        return dict(form.beta)


# -- the chain engine -------------------------------------------------------

StateTerms = dict[Partition, dict[tuple[int, ...], Fraction]]


def _apply_field_chain(insertions: tuple[Insertion, ...], start: Partition,
                       weight_cutoff: int) -> StateTerms:
    """Apply the fields right-to-left to a start state.

    Returns, per resulting basis state, the exponent-vector terms over the
    insertion variables (ordered as given, which must be magnitude order).
    """
    nvars = len(insertions)
    current: StateTerms = {start: {(0,) * nvars: ONE}}
    for j in range(nvars - 1, -1, -1):
        vec, _var = insertions[j]
        grown: StateTerms = {}
        for s, terms in current.items():
            for s_src, c_src in vec.terms.items():
                for p, out_vec in _gamma_state(s_src, s, weight_cutoff):
                    for s2, c2 in out_vec.terms.items():
                        bucket = grown.setdefault(s2, {})
                        for exps, c in terms.items():
                            key = exps[:j] + (exps[j] + p,) + exps[j + 1:]
                            acc = bucket.get(key, ZERO) + c_src * c2 * c
                            if acc:
                                bucket[key] = acc
                            else:
                                bucket.pop(key, None)
        current = {s: t for s, t in grown.items() if t}
    return current


@lru_cache(maxsize=None)
def _chain_cached(insertions: tuple[Insertion, ...], start: Partition,
                  weight_cutoff: int) -> StateTerms:
    return _apply_field_chain(insertions, start, weight_cutoff)


def _vector_weights(vec: GradedVector) -> tuple[int, int]:
    ws = vec.weights()
    if not ws:
        return (0, 0)
    return min(ws), max(ws)


def _correlator_boxes(theta: GradedVector, ordered: tuple[Insertion, ...],
                      start_weight: int, cutoffs: Cutoffs,
                      vacuum_start: bool = False):
    """Certified window and hard support for a radial-ordered correlator."""
    n = len(ordered)
    th_lo, th_hi = _vector_weights(theta)
    wlo = [None] * n
    whi: list[Bound] = [None] * n
    slo: list[Bound] = [None] * n
    shi: list[Bound] = [None] * n
    if n == 0:
        return (), ()
    w_min, w_max = zip(*(_vector_weights(v) for v, _ in ordered))
    W = cutoffs.weight
    if th_hi > W:
        # the final pairing weight itself exceeds the cutoff: nothing certified
        return None, tuple(zip(slo, shi))
    if n == 1:
        # the single power is pinned by the weights
        slo[0] = max(0, th_lo - w_max[0]) if vacuum_start else \
            th_lo - w_max[0] - start_weight
        shi[0] = th_hi - w_min[0] - start_weight
        return tuple(zip(wlo, whi)), tuple(zip(slo, shi))
    # leftmost variable: power above the support bound is exactly zero,
    # power below the window bound would need intermediate weight > cutoff
    wlo[0] = th_hi - w_min[0] - W
    shi[0] = th_hi - w_min[0]
    # rightmost variable acts on the start state directly; a field applied to
    # the vacuum is regular at the origin
    slo[n - 1] = 0 if vacuum_start else -w_max[n - 1] - start_weight
    # per-variable weight budgets for the remaining suffix constraints
    if cutoffs.budgets is not None:
        budgets = cutoffs.budgets
        if len(budgets) != n - 1 or sum(budgets) > W:
            raise SpecError("budgets must cover the non-leading variables "
                            "and sum to at most the weight cutoff")
    else:
        base = (W - start_weight) // (n - 1)
        budgets = (base,) * (n - 1)
    for j in range(1, n):
        whi[j] = budgets[j - 1] - w_max[j]
    return tuple(zip(wlo, whi)), tuple(zip(slo, shi))


def radial_series(theta: GradedVector, insertions: tuple[Insertion, ...],
                  domain: ExpansionDomain, cutoffs: Cutoffs,
                  start: GradedVector | None = None) -> MultiSeries:
    """Series of <theta, fields... start> over the insertion variables."""
    ordered = tuple(sorted(insertions, key=lambda ins: domain.index(ins[1])))
    sub = ExpansionDomain([v for _, v in ordered])
    if start is None:
        start = GradedVector.vacuum()
    total = MultiSeries.zero(sub)
    for s0, c0 in start.terms.items():
        chain = _chain_cached(ordered, s0, cutoffs.weight)
        terms: dict[tuple[int, ...], Fraction] = {}
        for s, poly in chain.items():
            coeff = pair(theta, GradedVector.state(s))
            if not coeff:
                continue
            for exps, c in poly.items():
                acc = terms.get(exps, ZERO) + coeff * c
                if acc:
                    terms[exps] = acc
                else:
                    terms.pop(exps, None)
        window, support = _correlator_boxes(theta, ordered, weight(s0), cutoffs,
                                            vacuum_start=(s0 == ()))
        total = total + c0 * MultiSeries(sub, terms, window, support)
    return total.embed(domain) if sub != domain else total


def state_series(insertions: tuple[Insertion, ...], domain: ExpansionDomain,
                 cutoffs: Cutoffs) -> dict[Partition, MultiSeries]:
    """Vector-valued product applied to the vacuum: per-state series.

    The window of each component is taken from the same chain analysis as the
    scalar correlator with that component as the pinned final weight.
    """
    ordered = tuple(sorted(insertions, key=lambda ins: domain.index(ins[1])))
    sub = ExpansionDomain([v for _, v in ordered])
    chain = _chain_cached(ordered, (), cutoffs.weight)
    out: dict[Partition, MultiSeries] = {}
    for s, poly in chain.items():
        anchor = GradedVector.state(s)
        window, support = _correlator_boxes(anchor, ordered, 0, cutoffs,
                                            vacuum_start=True)
        ms = MultiSeries(sub, dict(poly), window, support)
        out[s] = ms.embed(domain) if sub != domain else ms
    return out


def matrix_element(spec: CorrelatorSpec, cutoffs: Cutoffs) -> CorrelatorValue:
    """Radial-ordered matrix element of the spec, truncated and windowed."""
    if spec.n == 0:
        value = pair(spec.theta, GradedVector.vacuum())
        series = MultiSeries.constant(spec.domain, value) if value else \
            MultiSeries.zero(spec.domain)
        return CorrelatorValue(series, spec, cutoffs)
    series = radial_series(spec.theta, spec.insertions, spec.domain, cutoffs)
    return CorrelatorValue(series, spec, cutoffs)


# -- permutations and shuffles ----------------------------------------------


def permute(spec: CorrelatorSpec, sigma: tuple[int, ...]) -> CorrelatorSpec:
    """Reassign insertion i to the variable at position sigma(i) (0-based
    permutation of the spec's own insertion variables); states stay put."""
    if sorted(sigma) != list(range(spec.n)):
        raise SpecError(f"not a permutation of {spec.n} letters: {sigma}")
    names = [v for _, v in spec.insertions]
    new = tuple((vec, names[sigma[i]]) for i, (vec, _) in enumerate(spec.insertions))
    return replace(spec, insertions=new)


def permutation_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    for i, j in combinations(range(len(perm)), 2):
        if perm[i] > perm[j]:
            sign = -sign
    return sign


def inverse_shuffles(n: int, s: int) -> list[tuple[tuple[int, ...], int]]:
    """Inverse shuffles splitting (1..s | s+1..n): the riffles of the two
    blocks, with their signs.  0-based permutations, lexicographic order."""
    if not 1 <= s <= n - 1:
        raise SpecError(f"shuffle split s={s} out of range for n={n}")
    out = []
    for pos in combinations(range(n), s):
        perm = [0] * n
        rest = [i for i in range(n) if i not in pos]
        for val, p in enumerate(pos):
            perm[p] = val
        for val, p in enumerate(rest, start=s):
            perm[p] = val
        perm = tuple(perm)
        out.append((perm, permutation_sign(perm)))
    return out


def shuffle_sum(spec: CorrelatorSpec, s: int, cutoffs: Cutoffs) -> MultiSeries:
    """Signed sum of the variable-permuted correlators over the inverse
    shuffles with split s; each summand is realized in the common domain."""
    total = MultiSeries.zero(spec.domain)
    for perm, sign in inverse_shuffles(spec.n, s):
        value = matrix_element(permute(spec, perm), cutoffs)
        total = total + sign * value.series
    return total


# -- covariance checks --------------------------------------------------------


def translation_term(spec: CorrelatorSpec, i: int, cutoffs: Cutoffs) -> MultiSeries:
    """Correlator with the translation generator applied to insertion i."""
    vec, var = spec.insertions[i]
    dressed = spec.insertions[:i] + ((translate(vec, cutoffs.weight), var),) \
        + spec.insertions[i + 1:]
    return radial_series(spec.theta, dressed, spec.domain, cutoffs)


def translation_sum_series(spec: CorrelatorSpec, cutoffs: Cutoffs) -> MultiSeries:
    """Correlator with the adjoint translation acting on the functional."""
    theta = translate_adjoint(spec.theta)
    if not theta:
        return MultiSeries.zero(spec.domain)
    return radial_series(theta, spec.insertions, spec.domain, cutoffs)


def shifted_spec_series(spec: CorrelatorSpec, shift_var: str, cutoffs: Cutoffs) -> MultiSeries:
    """Correlator with every insertion dressed by the translation exponential.

    Independent realization of the simultaneous shift of all variables: the
    result is a series over the spec variables plus ``shift_var``.
    """
    new_domain = ExpansionDomain(spec.domain.order + (shift_var,))
    expos = [translation_exponential(vec, cutoffs.weight) for vec, _ in spec.insertions]
    total = MultiSeries.zero(new_domain)
    for choice in product(*(sorted(e.items()) for e in expos)):
        js = [j for j, _ in choice]
        if sum(js) > cutoffs.order:
            continue
        dressed = tuple((v, var) for (_, v), (_oldv, var) in zip(choice, spec.insertions))
        base = radial_series(spec.theta, dressed, spec.domain, cutoffs)
        mono = MultiSeries.monomial(new_domain, {shift_var: sum(js)})
        total = total + base.embed(new_domain) * mono
    # powers of the shift variable beyond the order cap are not retained
    return total.restrict_window({shift_var: (None, cutoffs.order)})


# -- block insertion sums -----------------------------------------------------


def insertion_sum_D(spec: CorrelatorSpec, head: int, cutoffs: Cutoffs,
                    q_cutoff: int | None = None) -> MultiSeries:
    """Sum over weight projections between an ordered head and fused tail.

    The first ``head`` insertions stay as fields; the remaining ones are
    fused into a state-valued series applied to the vacuum and projected on
    weights up to ``q_cutoff``.  The head variables must dominate the tail
    variables in the domain.
    """
    if not 0 <= head <= spec.n:
        raise SpecError("head size out of range")
    if q_cutoff is None:
        q_cutoff = cutoffs.weight
    head_ins = spec.insertions[:head]
    tail_ins = spec.insertions[head:]
    for _, hv in head_ins:
        for _, tv in tail_ins:
            if not spec.domain.precedes(hv, tv):
                raise SpecError(f"head variable {hv!r} must dominate {tv!r}")
    if not tail_ins:
        return radial_series(spec.theta, head_ins, spec.domain, cutoffs)
    tail = state_series(tail_ins, spec.domain, cutoffs)
    total = MultiSeries.zero(spec.domain)
    for s, coeff_series in tail.items():
        if weight(s) > q_cutoff:
            continue
        base = radial_series(spec.theta, head_ins, spec.domain, cutoffs,
                             start=GradedVector.state(s))
        total = total + base * coeff_series
    return total


def insertion_sum_C(spec: CorrelatorSpec, sizes: tuple[int, ...],
                    centers: tuple[str, ...], cutoffs: Cutoffs,
                    r_cutoff: int | None = None) -> MultiSeries:
    """Clustered projection sum: consecutive blocks recentered at fresh
    center variables, fused into states, correlated at the centers.

    The result is a series over (centers..., original variables...) where the
    original variables are reinterpreted as offsets from their block centers
    (each |offset| smaller than every center).
    """
    if sum(sizes) != spec.n:
        raise SpecError("cluster sizes must cover the insertions")
    if len(sizes) != len(centers):
        raise SpecError("one center per cluster required")
    if r_cutoff is None:
        r_cutoff = cutoffs.weight
    offset_set = {v for _, v in spec.insertions}
    offset_vars = tuple(v for v in spec.domain.order if v in offset_set)
    full = ExpansionDomain(tuple(centers) + offset_vars)
    center_dom = ExpansionDomain(centers)
    blocks = []
    pos = 0
    for size in sizes:
        blocks.append(spec.insertions[pos:pos + size])
        pos += size
    offset_dom = ExpansionDomain(offset_vars)
    cluster_states = [state_series(block, offset_dom, cutoffs) for block in blocks]
    total = MultiSeries.zero(full)
    items = [sorted(cs.items()) for cs in cluster_states]
    for combo in product(*items):
        if any(weight(s) > r_cutoff for s, _ in combo):
            continue
        ins = tuple((GradedVector.state(s), z) for (s, _), z in zip(combo, centers))
        base = radial_series(spec.theta, ins, center_dom, cutoffs)
        piece = base.embed(full)
        for _, coeff_series in combo:
            piece = piece * coeff_series.embed(full)
        total = total + piece
    return total


# -- rational-form reconstruction (n <= 3) ------------------------------------

Poly = dict[tuple[int, ...], Fraction]


@dataclass
class RationalForm:
    """numerator / prod (z_i - z_j)**beta[i, j], i < j in domain order."""
    vars: tuple[str, ...]
    numerator: Poly
    beta: dict[tuple[int, int], int]

    def evaluate(self, point: dict[str, Fraction]) -> Fraction:
        vals = [Fraction(point[v]) for v in self.vars]
        num = sum((c * _monomial_value(vals, e) for e, c in self.numerator.items()),
                  Fraction(0))
        den = Fraction(1)
        for (i, j), b in self.beta.items():
            den *= (vals[i] - vals[j]) ** b
        return num / den

    def canonical(self) -> tuple:
        return (self.vars, tuple(sorted(self.numerator.items())),
                tuple(sorted(self.beta.items())))


def _monomial_value(vals, exps) -> Fraction:
    out = Fraction(1)
    for v, e in zip(vals, exps):
        if e:
            out *= Fraction(v) ** e
    return out


def _poly_eval_equal(poly: Poly, i: int, j: int) -> Poly:
    """Substitute z_i = z_j (fold exponents)."""
    out: Poly = {}
    for exps, c in poly.items():
        key = list(exps)
        key[j] += key[i]
        key[i] = 0
        key = tuple(key)
        acc = out.get(key, ZERO) + c
        if acc:
            out[key] = acc
        else:
            out.pop(key, None)
    return out


def _poly_divide_binomial(poly: Poly, i: int, j: int) -> Poly | None:
    """Exact quotient by (z_i - z_j), or None when not divisible.

    Writing Q = sum_e z_i**e Q_e and R = Q / (z_i - z_j) = sum_e z_i**e R_e,
    the levels satisfy R_{e-1} = Q_e + z_j * R_e, solved from the top; the
    level below the bottom must vanish exactly.
    """
    if not poly:
        return {}
    levels: dict[int, Poly] = {}
    for exps, c in poly.items():
        stripped = exps[:i] + (0,) + exps[i + 1:]
        levels.setdefault(exps[i], {})[stripped] = \
            levels.get(exps[i], {}).get(stripped, ZERO) + c
    e_max = max(levels)
    e_min = min(levels)
    quotient: Poly = {}
    r: Poly = {}
    for e in range(e_max, e_min - 1, -1):
        new_r: Poly = {k: v for k, v in levels.get(e, {}).items() if v}
        for exps, c in r.items():
            key = exps[:j] + (exps[j] + 1,) + exps[j + 1:]
            acc = new_r.get(key, ZERO) + c
            if acc:
                new_r[key] = acc
            else:
                new_r.pop(key, None)
        r = new_r
        if e == e_min:
            return None if r else quotient
        for exps, c in r.items():
            quotient[exps[:i] + (e - 1,) + exps[i + 1:]] = c
    return quotient


def rational_form(spec: CorrelatorSpec, cutoffs: Cutoffs,
                  beta_cap: dict[tuple[int, int], int] | None = None) -> RationalForm:
    """Clear the pair poles of an n <= 3 correlator and reduce.

    Multiplies the series by (z_i - z_j)**beta for the a-priori caps
    beta = wt_i + wt_j, certifies the product is the polynomial it must be
    (supported in [0, D]**n for the homogeneity degree D), then divides out
    spurious binomial factors to a canonical form.  Requires homogeneous
    functional and insertion vectors.
    """
    if spec.n > 3:
        raise SpecError("rational reconstruction implemented for n <= 3 only")
    if not spec.theta.is_homogeneous() or \
            any(not vec.is_homogeneous() for vec, _ in spec.insertions):
        raise SpecError("rational reconstruction needs homogeneous vectors")
    value = matrix_element(spec, cutoffs)
    series = value.series
    names = [v for _, v in sorted(spec.insertions, key=lambda ins: spec.domain.index(ins[1]))]
    vecs = {v: vec for vec, v in spec.insertions}
    wts = [_vector_weights(vecs[v])[1] for v in names]
    n = len(names)
    beta: dict[tuple[int, int], int] = {}
    prod = series
    for i in range(n):
        for j in range(i + 1, n):
            cap = wts[i] + wts[j]
            if beta_cap:
                cap = min(cap, beta_cap.get((i, j), cap))
            beta[(i, j)] = cap
            if cap:
                prod = prod * expand_binomial(spec.domain, names[i], names[j], cap,
                                              order=cutoffs.order)
    # the cleared function is entire and homogeneous: a polynomial supported
    # in the box [0, D]**n, D its total degree
    th_hi = _vector_weights(spec.theta)[1]
    degree = th_hi - sum(wts) + sum(beta.values())
    idx = [prod.domain.index(v) for v in names]
    poly: Poly = {}
    box_hi = max(degree, 0)
    for exps, c in prod.terms.items():
        key = tuple(exps[k] for k in idx)
        if all(0 <= e <= box_hi for e in key):
            poly[key] = c
        else:
            raise UnderflowError(
                f"nonzero certified term {key} outside the polynomial box; "
                "pole caps or cutoffs are inconsistent")
    for corner in product((0, box_hi), repeat=n):
        probe = [0] * len(prod.domain)
        for k, v in enumerate(names):
            probe[prod.domain.index(v)] = corner[k]
        if not prod.window_contains(tuple(probe)):
            raise UnderflowError(
                "cutoffs too small to certify the rational form; "
                f"increase weight/order (corner {corner} outside window)")
    # reduce spurious factors
    changed = True
    while changed:
        changed = False
        for (i, j) in sorted(beta):
            while beta[(i, j)] > 0:
                if _poly_eval_equal(poly, i, j):
                    break
                quotient = _poly_divide_binomial(poly, i, j)
                if quotient is None:
                    break
                poly = quotient
                beta[(i, j)] -= 1
                changed = True
    beta = {k: b for k, b in beta.items() if b}
    return RationalForm(tuple(names), poly, beta)


def rational_forms_agree(a: RationalForm, b: RationalForm) -> bool:
    """Equality of the represented functions (canonical forms compared)."""
    return a.canonical() == b.canonical()
