"""Sewing product of two correlators over dual graded bases.

Two spheres carrying k and n marked points are glued along annuli whose
coordinates multiply to the sewing parameter: zeta1 * zeta2 = eps.  The
product of two correlators is the weight-graded double sum

    sum_l eps**l sum_(g, gbar)  F_left(...; g, zeta1) * F_right(...; gbar, zeta2)

over dual pairs of each weight-l space, truncated at a weight cutoff L.  The
per-l coefficients are kept both raw (variables zeta1, zeta2 separate) and
assembled into a single series in (x..., y..., zeta1, eps) through the exact
monomial substitution zeta2 -> eps / zeta1.

The independent cross-check realizes the same object by transporting the
right factor through the sewing map with operator algebra: pairing adjoints
of the right fields, the lowering exponential in zeta2, the grading scaling
by eps, and the translation exponential in zeta1, never touching dual bases.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .fock import (
    GradedVector,
    Partition,
    dual_basis,
    pair,
    translate,
    weight,
)
from .fields import (
    gamma_adjoint_apply,
    lowering_exponential,
    translation_exponential,
)
from .correlators import (
    CorrelatorSpec,
    Cutoffs,
    SpecError,
    _vector_weights,
    inverse_shuffles,
    radial_series,
)
from .series import ExpansionDomain, MultiSeries, residual_report

BasisPairs = dict[int, list[tuple[GradedVector, GradedVector]]]


class AnnulusError(ValueError):
    """Numeric sewing data outside the admissible annuli."""


@dataclass(frozen=True)
class SewingNumerics:
    """Numeric annulus data for convergence runs.

    rho1, rho2 bound |zeta1|, |zeta2|; |eps| <= r < rho1 * rho2.  R1, R2 are
    the configured coefficient-bound radii (default the rho's).
    """
    rho1: float
    rho2: float
    r: float
    eps_value: complex
    R1: float | None = None
    R2: float | None = None

    def __post_init__(self):
        if not (0 < self.r < self.rho1 * self.rho2):
            raise AnnulusError("need 0 < r < rho1 * rho2")
        if abs(self.eps_value) > self.r:
            raise AnnulusError("|eps| exceeds the configured r")

    @property
    def radius1(self) -> float:
        return self.R1 if self.R1 is not None else self.rho1

    @property
    def radius2(self) -> float:
        return self.R2 if self.R2 is not None else self.rho2

    def check_points(self, x_point: dict, y_point: dict):
        e = abs(self.eps_value)
        for v, val in x_point.items():
            if abs(complex(val)) < e / self.rho2:
                raise AnnulusError(f"|{v}| below the excised-disk bound")
        for v, val in y_point.items():
            if abs(complex(val)) < e / self.rho1:
                raise AnnulusError(f"|{v}| below the excised-disk bound")


@dataclass(frozen=True)
class SewingConfig:
    """Sewing of a k-insertion left spec with an n-insertion right spec.

    zeta2 is never independent data: the sewing relation fixes it to
    eps / zeta1 wherever the assembled series is formed.
    """
    left: CorrelatorSpec
    right: CorrelatorSpec
    zeta1: str = "zeta1"
    zeta2: str = "zeta2"
    eps: str = "eps"
    weight_cutoff: int = 8
    cutoffs: Cutoffs = field(default_factory=lambda: Cutoffs(weight=8, order=8))
    numerics: SewingNumerics | None = None

    def __post_init__(self):
        lvars = {v for _, v in self.left.insertions}
        rvars = {v for _, v in self.right.insertions}
        if lvars & rvars:
            raise SpecError(f"left and right variables overlap: {lvars & rvars}")
        specials = {self.zeta1, self.zeta2, self.eps}
        if len(specials) != 3 or specials & (lvars | rvars):
            raise SpecError("zeta1, zeta2, eps must be three fresh names")
        if self.weight_cutoff < 0:
            raise SpecError("weight cutoff must be >= 0")

    @property
    def m_total(self) -> int:
        return self.left.m + self.right.m

    def left_domain(self) -> ExpansionDomain:
        return ExpansionDomain(self.left.domain.order + (self.zeta1,))

    def right_domain(self) -> ExpansionDomain:
        return ExpansionDomain(self.right.domain.order + (self.zeta2,))

    def raw_domain(self) -> ExpansionDomain:
        return ExpansionDomain(self.left.domain.order + self.right.domain.order
                               + (self.zeta1, self.zeta2))

    def assembled_domain(self) -> ExpansionDomain:
        return ExpansionDomain(self.left.domain.order + self.right.domain.order
                               + (self.zeta1, self.eps))


@dataclass
class SewedResult:
    """Per-weight coefficients of the sewing product.

    ``coefficients[l]`` multiplies eps**l and keeps zeta1, zeta2 separate.
    The pihva-style indexing that counts eps**(l - m - 1) is exposed through
    ``shifted_index``; the raw basis weight l is the stored key (the two
    indexings differ by the attached-series shift, which the report carries
    rather than reconciling).
    """
    config: SewingConfig
    coefficients: dict[int, MultiSeries]

    def shifted_index(self, l: int) -> int:
        return l - self.config.m_total - 1

    def assemble(self) -> MultiSeries:
        cfg = self.config
        dom = cfg.assembled_domain()
        total = MultiSeries.zero(dom)
        for l, coeff in sorted(self.coefficients.items()):
            piece = coeff.substitute_sewing(cfg.zeta2, cfg.zeta1, cfg.eps)
            mono = MultiSeries.monomial(dom, {cfg.eps: l})
            total = total + piece.embed(dom) * mono
        return total.restrict_window({cfg.eps: (None, cfg.weight_cutoff)})


def _factor_series(spec: CorrelatorSpec, slot_vec: GradedVector, slot_var: str,
                   domain: ExpansionDomain, cutoffs: Cutoffs) -> MultiSeries:
    insertions = spec.insertions + ((slot_vec, slot_var),)
    return radial_series(spec.theta, insertions, domain, cutoffs)


def sew_product(cfg: SewingConfig, basis_pairs: BasisPairs | None = None) -> SewedResult:
    """The dual-basis double sum, one coefficient series per weight l.

    ``basis_pairs`` optionally overrides the dual pairs per weight (any
    invertible rational change of basis must leave the result unchanged).
    """
    ldom, rdom = cfg.left_domain(), cfg.right_domain()
    raw = cfg.raw_domain()
    coefficients: dict[int, MultiSeries] = {}
    for l in range(cfg.weight_cutoff + 1):
        pairs = basis_pairs[l] if basis_pairs is not None else dual_basis(l)
        acc = MultiSeries.zero(raw)
        for g, gbar in pairs:
            ls = _factor_series(cfg.left, g, cfg.zeta1, ldom, cfg.cutoffs)
            rs = _factor_series(cfg.right, gbar, cfg.zeta2, rdom, cfg.cutoffs)
            acc = acc + ls.embed(raw) * rs.embed(raw)
        coefficients[l] = acc
    return SewedResult(cfg, coefficients)


def epsilon_coefficient(res: SewedResult, l: int) -> MultiSeries:
    """Raw coefficient of eps**l (basis-weight indexing)."""
    if l > res.config.weight_cutoff:
        raise SpecError(f"weight {l} beyond the cutoff {res.config.weight_cutoff}")
    if l in res.coefficients:
        return res.coefficients[l]
    return MultiSeries.zero(res.config.raw_domain())


# -- transport cross-check ----------------------------------------------------


def _adjoint_boxes(theta: GradedVector, ordered, cutoffs: Cutoffs):
    """Window/support boxes for the adjoint (functional-side) chain."""
    n = len(ordered)
    th_lo, th_hi = _vector_weights(theta)
    W = cutoffs.weight
    if n == 0:
        return (), ()
    w_min, w_max = zip(*(_vector_weights(v) for v, _ in ordered))
    if th_hi > W:
        return None, tuple((None, None) for _ in range(n))
    budget_total = max(W - th_hi, 0)
    base = budget_total // n
    window = tuple((-base - w_min[i], None) for i in range(n))
    support = [(None, None)] * n
    support[0] = (None, th_hi - w_min[0])
    return window, tuple(support)


def adjoint_chain(theta: GradedVector, insertions, domain: ExpansionDomain,
                  cutoffs: Cutoffs) -> dict[Partition, MultiSeries]:
    """Apply the pairing adjoints of the fields to the functional vector.

    Returns per-state series over the insertion variables such that pairing
    state-by-state against any vector reproduces the correlator of theta with
    the fields applied to that vector.
    """
    ordered = tuple(sorted(insertions, key=lambda ins: domain.index(ins[1])))
    sub = ExpansionDomain([v for _, v in ordered])
    current: dict[Partition, dict] = {}
    for s, c in theta.terms.items():
        current[s] = {(0,) * len(ordered): c}
    for j, (vec, _var) in enumerate(ordered):
        grown: dict[Partition, dict] = {}
        for s, terms in current.items():
            per_state = gamma_adjoint_apply(vec, GradedVector.state(s), cutoffs.weight)
            for b, powers in per_state.items():
                bucket = grown.setdefault(b, {})
                for p, c2 in powers.items():
                    for exps, c in terms.items():
                        key = exps[:j] + (exps[j] + p,) + exps[j + 1:]
                        acc = bucket.get(key, 0) + c2 * c
                        if acc:
                            bucket[key] = acc
                        else:
                            bucket.pop(key, None)
        current = {s: t for s, t in grown.items() if t}
    window, support = _adjoint_boxes(theta, ordered, cutoffs)
    out = {}
    for s, terms in current.items():
        ms = MultiSeries(sub, terms, window, support)
        out[s] = ms.embed(domain) if sub != domain else ms
    return out


def transport_series(cfg: SewingConfig) -> MultiSeries:
    """The sewing product computed through the sewing-map transport.

    Realizes <theta_L, X exp(zeta1 T) eps^K exp(zeta2 T-adjoint) Y-adjoint
    theta_R> with zeta2 = eps / zeta1 substituted exactly; no dual bases are
    involved, so agreement with ``sew_product`` checks the dual-pair collapse.
    """
    dom = cfg.assembled_domain()
    cutoffs = cfg.cutoffs
    W = cutoffs.weight
    rdom = cfg.right.domain
    functional = adjoint_chain(cfg.right.theta, cfg.right.insertions, rdom, cutoffs)
    total = MultiSeries.zero(dom)
    for s, y_series in sorted(functional.items()):
        lowered = lowering_exponential(GradedVector.state(s))
        for j, vec_j in sorted(lowered.items()):
            for u, cu in vec_j.terms.items():
                wu = weight(u)
                if wu + j > cfg.weight_cutoff:
                    # eps-power j + wu exceeds the retained sewing orders
                    continue
                # zeta2**j -> eps**j zeta1**(-j); eps^K contributes eps**wu
                mono = MultiSeries.monomial(
                    dom, {cfg.zeta1: -j, cfg.eps: j + wu}, cu)
                shifted = translation_exponential(GradedVector.state(u), W)
                piece = MultiSeries.zero(dom)
                for jp, vec_jp in sorted(shifted.items()):
                    base = radial_series(cfg.left.theta, cfg.left.insertions,
                                         cfg.left.domain, cutoffs, start=vec_jp)
                    zmono = MultiSeries.monomial(dom, {cfg.zeta1: jp})
                    piece = piece + base.embed(dom) * zmono
                piece = piece.restrict_window({cfg.zeta1: (None, W - wu)})
                total = total + piece * mono * y_series.embed(dom)
    return total.restrict_window({cfg.eps: (None, cfg.weight_cutoff)})


def factorization_check(cfg: SewingConfig, basis_pairs: BasisPairs | None = None):
    """Compare the dual-basis product against the transport realization.

    Returns (ok, max_deviation, window): exact equality of every certified
    coefficient in rational mode; a None window flags a vacuous comparison.
    """
    assembled = sew_product(cfg, basis_pairs).assemble()
    transported = transport_series(cfg)
    worst, where, window = residual_report(assembled, transported)
    if window is None:
        return False, None, None
    return worst == 0, worst, window


# -- covariant actions ---------------------------------------------------------


def derivative_action(res: SewedResult, var: str) -> tuple[MultiSeries, MultiSeries]:
    """Differentiate the assembled product at an insertion variable, and
    re-sew with the translation generator applied to the owning insertion.

    Returns (direct, factorwise); the two must agree on certified terms.
    """
    cfg = res.config
    direct = res.assemble().partial_derivative(var)
    owner = None
    for side in ("left", "right"):
        spec: CorrelatorSpec = getattr(cfg, side)
        for i, (vec, v) in enumerate(spec.insertions):
            if v == var:
                owner = (side, i, vec)
    if owner is None:
        raise SpecError(f"{var!r} is not an insertion variable of the product")
    side, i, vec = owner
    spec = getattr(cfg, side)
    dressed = spec.insertions[:i] + ((translate(vec, cfg.cutoffs.weight), var),) \
        + spec.insertions[i + 1:]
    new_spec = CorrelatorSpec(insertions=dressed, domain=spec.domain,
                              theta=spec.theta, attached=spec.attached)
    new_cfg = SewingConfig(left=new_spec if side == "left" else cfg.left,
                           right=new_spec if side == "right" else cfg.right,
                           zeta1=cfg.zeta1, zeta2=cfg.zeta2, eps=cfg.eps,
                           weight_cutoff=cfg.weight_cutoff, cutoffs=cfg.cutoffs)
    factorwise = sew_product(new_cfg).assemble()
    return direct, factorwise


def translation_sum_residual(res: SewedResult) -> MultiSeries:
    """Sum of all insertion derivatives plus the slot-translated re-sewings.

    For vacuum functionals the total translation annihilates the product, so
    the returned series must vanish on certified terms:
    sum_v d/dv (product) + product with the zeta1 slot translated + product
    with the zeta2 slot translated = 0.
    """
    cfg = res.config
    assembled = res.assemble()
    total = MultiSeries.zero(assembled.domain)
    for _, var in cfg.left.insertions + cfg.right.insertions:
        total = total + assembled.partial_derivative(var)
    # slot translations: differentiate the factors at their sewing slots
    ldom, rdom = cfg.left_domain(), cfg.right_domain()
    raw = cfg.raw_domain()
    for l in range(cfg.weight_cutoff + 1):
        acc = MultiSeries.zero(raw)
        for g, gbar in dual_basis(l):
            ls = _factor_series(cfg.left, g, cfg.zeta1, ldom, cfg.cutoffs)
            rs = _factor_series(cfg.right, gbar, cfg.zeta2, rdom, cfg.cutoffs)
            acc = acc + ls.partial_derivative(cfg.zeta1).embed(raw) * rs.embed(raw)
            acc = acc + ls.embed(raw) * rs.partial_derivative(cfg.zeta2).embed(raw)
        piece = acc.substitute_sewing(cfg.zeta2, cfg.zeta1, cfg.eps)
        dom = cfg.assembled_domain()
        mono = MultiSeries.monomial(dom, {cfg.eps: l})
        total = total + piece.embed(dom) * mono
    return total.restrict_window({cfg.eps: (None, cfg.weight_cutoff)})


def scaling_degree(cfg: SewingConfig) -> int:
    """Weighted homogeneity degree of the assembled product: counting every
    position variable once and eps twice, all terms share this degree."""
    th = _vector_weights(cfg.left.theta)[1] + _vector_weights(cfg.right.theta)[1]
    wts = sum(_vector_weights(v)[1] for v, _ in
              cfg.left.insertions + cfg.right.insertions)
    return th - wts


def permutation_action(res: SewedResult, mapping: dict[str, str]) -> MultiSeries:
    """Relabel the insertion variables of the assembled series (the series
    realization of reindexing both factors simultaneously)."""
    cfg = res.config
    assembled = res.assemble()
    order = tuple(mapping.get(v, v) for v in assembled.domain.order)
    if sorted(order) != sorted(assembled.domain.order):
        raise SpecError("mapping must permute the product's own variables")
    # same exponent data, relabeled axes, then realigned to the original order
    relabeled = MultiSeries(ExpansionDomain(order), dict(assembled.terms),
                            assembled.window, assembled.support)
    dom = assembled.domain
    idx = [order.index(v) for v in dom.order]
    terms = {tuple(e[i] for i in idx): c for e, c in relabeled.terms.items()}
    box = lambda b: None if b is None else tuple(b[i] for i in idx)
    return MultiSeries(dom, terms, box(relabeled.window), box(relabeled.support))


def sewn_shuffle_sum(cfg: SewingConfig, s: int) -> tuple[MultiSeries, bool]:
    """Signed shuffle sum of the product in the factorized sense.

    The combined sum is evaluated through the factor-wise decomposition the
    membership proof uses: each factor is shuffle-summed over its own split-s
    inverse shuffles (variables permuted, states fixed), and the two signed
    combinations are sewn bilinearly.  A factor with too few insertions for
    the split contributes its plain series (nothing to shuffle); when both
    factors are degenerate the sum is empty by convention, and the returned
    flag reports that vacuous case.
    """
    dom = cfg.assembled_domain()
    k, n = cfg.left.n, cfg.right.n
    left_degenerate = not (1 <= s <= k - 1)
    right_degenerate = not (1 <= s <= n - 1)
    if left_degenerate and right_degenerate:
        return MultiSeries.zero(dom), True
    lcombos = [(tuple(range(k)), 1)] if left_degenerate else inverse_shuffles(k, s)
    rcombos = [(tuple(range(n)), 1)] if right_degenerate else inverse_shuffles(n, s)
    ldom, rdom, raw = cfg.left_domain(), cfg.right_domain(), cfg.raw_domain()
    lnames = [v for _, v in cfg.left.insertions]
    rnames = [v for _, v in cfg.right.insertions]
    total_raw: dict[int, MultiSeries] = {}
    for l in range(cfg.weight_cutoff + 1):
        acc = MultiSeries.zero(raw)
        for g, gbar in dual_basis(l):
            lsum = MultiSeries.zero(ldom)
            for perm, sign in lcombos:
                ins = tuple((vec, lnames[perm[i]]) for i, (vec, _) in
                            enumerate(cfg.left.insertions)) + ((g, cfg.zeta1),)
                lsum = lsum + sign * radial_series(cfg.left.theta, ins, ldom, cfg.cutoffs)
            rsum = MultiSeries.zero(rdom)
            for perm, sign in rcombos:
                ins = tuple((vec, rnames[perm[i]]) for i, (vec, _) in
                            enumerate(cfg.right.insertions)) + ((gbar, cfg.zeta2),)
                rsum = rsum + sign * radial_series(cfg.right.theta, ins, rdom, cfg.cutoffs)
            acc = acc + lsum.embed(raw) * rsum.embed(raw)
        total_raw[l] = acc
    out = MultiSeries.zero(dom)
    for l, coeff in sorted(total_raw.items()):
        piece = coeff.substitute_sewing(cfg.zeta2, cfg.zeta1, cfg.eps)
        out = out + piece.embed(dom) * MultiSeries.monomial(dom, {cfg.eps: l})
    return out.restrict_window({cfg.eps: (None, cfg.weight_cutoff)}), False


# -- numeric bounds -------------------------------------------------------------


@dataclass
class CauchyBounds:
    M1: float
    R1: float
    M2: float
    R2: float
    argmax1: complex
    argmax2: complex

    @property
    def M(self) -> float:
        return min(self.M1, self.M2)

    @property
    def R(self) -> float:
        return max(self.R1, self.R2)


def _polar_grid(r_min: float, r_max: float, radii: int, angles: int, rng=None):
    for i in range(radii):
        rad = r_min + (r_max - r_min) * (i + 1) / radii
        for a in range(angles):
            theta = 2 * math.pi * a / angles
            if rng is not None:
                theta += rng.uniform(0, 2 * math.pi / angles)
            yield rad * cmath.exp(1j * theta)


def cauchy_estimate(cfg: SewingConfig, x_point: dict, y_point: dict,
                    radii: int = 8, angles: int = 16, rng=None) -> CauchyBounds:
    """Empirical suprema of the two factor blocks over polar annulus grids.

    M_a is the max of |factor series| over the grid of its sewing coordinate
    (every dual vector of every retained weight contributes); R_a is the
    configured coefficient radius.  The grid is deterministic unless a seeded
    rng requests angular jitter.
    """
    if cfg.numerics is None:
        raise AnnulusError("numeric sewing data required")
    num = cfg.numerics
    num.check_points(x_point, y_point)
    if not x_point and not y_point and cfg.left.n + cfg.right.n > 0:
        raise AnnulusError("empty sample point set")
    e = abs(num.eps_value)
    ldom, rdom = cfg.left_domain(), cfg.right_domain()
    out = []
    for side, domain, point, slot, rho_own, rho_other, radius in (
            ("left", ldom, x_point, cfg.zeta1, num.rho1, num.rho2, num.radius1),
            ("right", rdom, y_point, cfg.zeta2, num.rho2, num.rho1, num.radius2)):
        spec: CorrelatorSpec = getattr(cfg, side)
        best = 0.0
        best_at = 0j
        for l in range(cfg.weight_cutoff + 1):
            for g, gbar in dual_basis(l):
                vec = g if side == "left" else gbar
                series = _factor_series(spec, vec, slot, domain, cfg.cutoffs)
                for zeta in _polar_grid(e / rho_other, min(rho_own, radius),
                                        radii, angles, rng):
                    val = abs(complex(series.evaluate({**point, slot: zeta})))
                    if val > best:
                        best, best_at = val, zeta
        out.append((best, radius, best_at))
    (M1, R1, a1), (M2, R2, a2) = out
    return CauchyBounds(M1, R1, M2, R2, a1, a2)


@dataclass
class ConvergenceReport:
    magnitudes: dict[int, float]
    bound_values: dict[int, float]
    violations: list[int]
    decay_slope: float | None

    @property
    def ok(self) -> bool:
        return not self.violations and (self.decay_slope is None
                                        or self.decay_slope < 0)


def convergence_check(res: SewedResult, bounds: CauchyBounds,
                      x_point: dict, y_point: dict, zeta1_value: complex
                      ) -> ConvergenceReport:
    """Verify |R_l| <= M * R**(-l + m + 1) at the base point and fit the
    decay of log |R_l eps**l| against l."""
    cfg = res.config
    if cfg.numerics is None:
        raise AnnulusError("numeric sewing data required")
    eps_value = cfg.numerics.eps_value
    zeta2_value = eps_value / zeta1_value
    m = cfg.m_total
    mags: dict[int, float] = {}
    bound_values: dict[int, float] = {}
    violations = []
    xs, ys = [], []
    for l, coeff in sorted(res.coefficients.items()):
        point = {**x_point, **y_point, cfg.zeta1: zeta1_value, cfg.zeta2: zeta2_value}
        val = abs(complex(coeff.evaluate(point, check_domain=False)))
        mags[l] = val
        bound = bounds.M * bounds.R ** (-l + m + 1)
        bound_values[l] = bound
        if val > bound:
            violations.append(l)
        if val > 0:
            xs.append(float(l))
            ys.append(math.log(val * abs(eps_value) ** l))
    slope = None
    if len(xs) >= 2:
        n = len(xs)
        mean_x = sum(xs) / n
        mean_y = sum(ys) / n
        denom = sum((x - mean_x) ** 2 for x in xs)
        if denom:
            slope = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / denom
    return ConvergenceReport(mags, bound_values, violations, slope)
