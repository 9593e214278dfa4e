"""Truncated multivariate Laurent series with expansion-domain bookkeeping.

A series lives over an ordered list of variables encoding the region
|v1| > |v2| > ... > |vn| > 0 in which its expansions are valid.  Besides the
finite term map, each series carries two per-variable exponent boxes:

* ``support``: hard bounds satisfied by every term of the *exact* object the
  series truncates (None = unbounded on that side);
* ``window``: the region in which the stored coefficients are certified,
  i.e. every exponent vector inside the window either appears in ``terms``
  with its exact coefficient or is exactly zero.

Arithmetic propagates both boxes conservatively, so products of truncated
geometric expansions keep an explicit region of exact coefficients and
identity checks can refuse to compare uncertified territory.  The window may
collapse to nothing (``window is None``); comparisons over such objects are
vacuous and callers are expected to probe for non-vacuity.

Scalars are exact rationals by default; complex values pass through the same
arithmetic for numeric runs.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

ONE = Fraction(1)

REL_TOL = 1e-9
ABS_TOL = 1e-12

Bound = int | None
Exps = tuple[int, ...]


class DomainError(ValueError):
    """Mismatched or violated expansion domains."""


class WrongRegionError(DomainError):
    """A negative binomial power was requested outside its region."""


def _max_lo(a: Bound, b: Bound) -> Bound:
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _min_lo(a: Bound, b: Bound) -> Bound:
    if a is None or b is None:
        return None
    return min(a, b)


def _min_hi(a: Bound, b: Bound) -> Bound:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _max_hi(a: Bound, b: Bound) -> Bound:
    if a is None or b is None:
        return None
    return max(a, b)


def _add(a: Bound, b: Bound) -> Bound:
    if a is None or b is None:
        return None
    return a + b


def _sub(a: Bound, b: Bound) -> Bound:
    if a is None or b is None:
        return None
    return a - b


class ExpansionDomain:
    """Strict total order on variable names: |first| > ... > |last| > 0."""

    __slots__ = ("order", "_index")

    def __init__(self, order):
        self.order = tuple(order)
        if len(set(self.order)) != len(self.order):
            raise DomainError(f"repeated variable in domain {self.order}")
        self._index = {v: i for i, v in enumerate(self.order)}

    def index(self, var: str) -> int:
        try:
            return self._index[var]
        except KeyError:
            raise DomainError(f"unknown variable {var!r} in domain {self.order}") from None

    def precedes(self, a: str, b: str) -> bool:
        """True when |a| > |b| in this domain."""
        return self.index(a) < self.index(b)

    def is_subdomain_of(self, other: "ExpansionDomain") -> bool:
        """True when self.order is an order-preserving subsequence of other."""
        it = iter(other.order)
        return all(v in it for v in self.order)

    def __contains__(self, var: str) -> bool:
        return var in self._index

    def __len__(self):
        return len(self.order)

    def __eq__(self, other):
        return isinstance(other, ExpansionDomain) and self.order == other.order

    def __hash__(self):
        return hash(self.order)

    def __repr__(self):
        return "ExpansionDomain(" + " > ".join(self.order) + ")"


FULL = (None, None)


class MultiSeries:
    """Finite Laurent-term map over an ExpansionDomain with exactness boxes."""

    __slots__ = ("domain", "terms", "window", "support")

    def __init__(self, domain: ExpansionDomain, terms: dict[Exps, object],
                 window=None, support=None):
        self.domain = domain
        n = len(domain)
        self.window = self._normalize_box(window, n)
        self.support = tuple(support) if support is not None else tuple(FULL for _ in range(n))
        self.terms = {}
        for exps, coeff in terms.items():
            if coeff and self._inside(exps, self.window):
                self.terms[tuple(exps)] = coeff

    @staticmethod
    def _normalize_box(box, n) -> tuple | None:
        if box is None:
            return tuple(FULL for _ in range(n))
        box = tuple(tuple(b) for b in box)
        for lo, hi in box:
            if lo is not None and hi is not None and lo > hi:
                return None
        return box

    @staticmethod
    def _inside(exps: Exps, box) -> bool:
        if box is None:
            return False
        for e, (lo, hi) in zip(exps, box):
            if lo is not None and e < lo:
                return False
            if hi is not None and e > hi:
                return False
        return True

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, domain: ExpansionDomain) -> "MultiSeries":
        return cls(domain, {})

    @classmethod
    def constant(cls, domain: ExpansionDomain, value) -> "MultiSeries":
        zero_exps = (0,) * len(domain)
        return cls(domain, {zero_exps: value}, support=[(0, 0)] * len(domain))

    @classmethod
    def monomial(cls, domain: ExpansionDomain, exps: dict[str, int], value=ONE) -> "MultiSeries":
        vec = [0] * len(domain)
        for var, e in exps.items():
            vec[domain.index(var)] = e
        vec = tuple(vec)
        return cls(domain, {vec: value}, support=[(e, e) for e in vec])

    # -- inspection --------------------------------------------------------

    @property
    def vars(self):
        return self.domain.order

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exps: dict[str, int] | Exps):
        if isinstance(exps, dict):
            vec = [0] * len(self.domain)
            for var, e in exps.items():
                vec[self.domain.index(var)] = e
            exps = tuple(vec)
        return self.terms.get(tuple(exps), 0)

    def window_contains(self, exps: dict[str, int] | Exps) -> bool:
        if isinstance(exps, dict):
            vec = [0] * len(self.domain)
            for var, e in exps.items():
                vec[self.domain.index(var)] = e
            exps = tuple(vec)
        return self.window is not None and self._inside(tuple(exps), self.window)

    def window_empty(self) -> bool:
        return self.window is None

    def terms_sorted(self):
        return sorted(self.terms.items())

    def homogeneous_degree(self, weights: dict[str, int] | None = None):
        """Common weighted total degree of all terms, or None if mixed/empty."""
        if not self.terms:
            return None
        wvec = [1] * len(self.domain)
        if weights:
            for var, w in weights.items():
                wvec[self.domain.index(var)] = w
        degs = {sum(e * w for e, w in zip(exps, wvec)) for exps in self.terms}
        return degs.pop() if len(degs) == 1 else None

    def __repr__(self):
        shown = ", ".join(f"{e}:{c}" for e, c in list(self.terms_sorted())[:6])
        more = "" if len(self.terms) <= 6 else f", ... ({len(self.terms)} terms)"
        return f"MultiSeries[{'/'.join(self.vars)}]({shown}{more})"

    # -- linear structure ---------------------------------------------------

    def _check_domain(self, other: "MultiSeries"):
        if self.domain != other.domain:
            raise DomainError(f"domain mismatch: {self.domain} vs {other.domain}")

    def __add__(self, other: "MultiSeries") -> "MultiSeries":
        self._check_domain(other)
        terms = dict(self.terms)
        for exps, coeff in other.terms.items():
            acc = terms.get(exps, 0) + coeff
            if acc:
                terms[exps] = acc
            else:
                terms.pop(exps, None)
        if self.window is None or other.window is None:
            window = None
        else:
            window = [( _max_lo(a[0], b[0]), _min_hi(a[1], b[1]))
                      for a, b in zip(self.window, other.window)]
        support = [(_min_lo(a[0], b[0]), _max_hi(a[1], b[1]))
                   for a, b in zip(self.support, other.support)]
        return MultiSeries(self.domain, terms, window, support)

    def __neg__(self) -> "MultiSeries":
        return MultiSeries(self.domain, {e: -c for e, c in self.terms.items()},
                           self.window, self.support)

    def __sub__(self, other: "MultiSeries") -> "MultiSeries":
        return self + (-other)

    def __rmul__(self, scalar) -> "MultiSeries":
        if not scalar:
            return MultiSeries(self.domain, {}, self.window, self.support)
        return MultiSeries(self.domain, {e: scalar * c for e, c in self.terms.items()},
                           self.window, self.support)

    def scaled(self, scalar) -> "MultiSeries":
        return self.__rmul__(scalar)

    # -- multiplication ------------------------------------------------------

    def __mul__(self, other: "MultiSeries") -> "MultiSeries":
        self._check_domain(other)
        n = len(self.domain)
        support = tuple((_add(a[0], b[0]), _add(a[1], b[1]))
                        for a, b in zip(self.support, other.support))
        window = self._product_window(other, n)
        terms: dict[Exps, object] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                exps = tuple(x + y for x, y in zip(ea, eb))
                if window is not None and not self._inside(exps, window):
                    continue
                acc = terms.get(exps, 0) + ca * cb
                if acc:
                    terms[exps] = acc
                else:
                    terms.pop(exps, None)
        return MultiSeries(self.domain, terms, window, support)

    def _product_window(self, other: "MultiSeries", n: int):
        if self.window is None or other.window is None:
            return None
        window = []
        for i in range(n):
            lo_cons: list[int] = []
            hi_cons: list[int] = []
            for x, y in ((self, other), (other, self)):
                xl, xh = x.window[i]
                xsl, xsh = x.support[i]
                ysl, ysh = y.support[i]
                if xl is not None and (xsl is None or xsl < xl):
                    # x has uncertified territory below its window
                    if ysh is None:
                        return None
                    lo_cons.append(xl + ysh)
                if xh is not None and (xsh is None or xsh > xh):
                    if ysl is None:
                        return None
                    hi_cons.append(xh + ysl)
            lo = max(lo_cons) if lo_cons else None
            hi = min(hi_cons) if hi_cons else None
            if lo is not None and hi is not None and lo > hi:
                return None
            window.append((lo, hi))
        return tuple(window)

    # -- calculus and substitutions -------------------------------------------

    def partial_derivative(self, var: str) -> "MultiSeries":
        i = self.domain.index(var)
        terms: dict[Exps, object] = {}
        for exps, coeff in self.terms.items():
            if exps[i] == 0:
                continue
            new = exps[:i] + (exps[i] - 1,) + exps[i + 1:]
            acc = terms.get(new, 0) + exps[i] * coeff
            if acc:
                terms[new] = acc
            else:
                terms.pop(new, None)
        shift = lambda b: (_sub(b[0], 1), _sub(b[1], 1))
        window = None if self.window is None else tuple(
            shift(b) if j == i else b for j, b in enumerate(self.window))
        support = tuple(shift(b) if j == i else b for j, b in enumerate(self.support))
        return MultiSeries(self.domain, terms, window, support)

    def _binomial_resubstitute(self, src: str, big: str, small: str, order: int,
                               new_domain: ExpansionDomain) -> "MultiSeries":
        """Replace src by big + small, expanding in powers of small (|big| > |small|).

        src disappears from the result; big may coincide with src.  Exact for
        nonnegative src exponents; negative exponents are truncated at
        small**order.
        """
        if not new_domain.precedes(big, small):
            raise WrongRegionError(f"need |{big}| > |{small}| in {new_domain}")
        i = self.domain.index(src)
        ib, isml = new_domain.index(big), new_domain.index(small)
        old_to_new = []
        for j, v in enumerate(self.domain.order):
            if j == i:
                old_to_new.append(None)
            else:
                old_to_new.append(new_domain.index(v))
        terms: dict[Exps, object] = {}
        for exps, coeff in self.terms.items():
            m = exps[i]
            base = [0] * len(new_domain)
            for j, e in enumerate(exps):
                if old_to_new[j] is not None:
                    base[old_to_new[j]] += e
            top = m if m >= 0 else order
            for r in range(top + 1):
                vec = list(base)
                vec[ib] += m - r
                vec[isml] += r
                vec = tuple(vec)
                acc = terms.get(vec, 0) + coeff * comb_general(m, r)
                if acc:
                    terms[vec] = acc
                else:
                    terms.pop(vec, None)
        window = self._resub_box(self.window, i, old_to_new, ib, isml, order,
                                 len(new_domain), for_window=True)
        support = self._resub_box(self.support, i, old_to_new, ib, isml, order,
                                  len(new_domain), for_window=False)
        return MultiSeries(new_domain, terms, window, support)

    def _resub_box(self, box, i, old_to_new, ib, isml, order, n, for_window):
        # big and small slots in the new domain never carry old exponents:
        # big is either fresh or the src variable itself, small is fresh.
        if box is None:
            return None
        lo = [None] * n
        hi = [None] * n
        for j, b in enumerate(box):
            if j == i:
                continue
            t = old_to_new[j]
            lo[t], hi[t] = b
        slo, shi = box[i]
        if for_window:
            # certified: source exponent m = e_big + e_small stays in [slo, shi]
            lo[ib], hi[ib] = slo, _sub(shi, order)
            lo[isml], hi[isml] = 0, order
        else:
            negatives_possible = slo is None or slo < 0
            lo[ib] = None if negatives_possible else 0
            hi[ib] = shi
            lo[isml], hi[isml] = 0, (None if negatives_possible else shi)
        return tuple(zip(lo, hi))

    def shift_substitute(self, var: str, new: str, order: int) -> "MultiSeries":
        """Substitute var -> var + new, new a fresh smallest variable."""
        if new in self.domain:
            raise DomainError(f"variable {new!r} already present")
        new_domain = ExpansionDomain(self.domain.order + (new,))
        return self._binomial_resubstitute(var, var, new, order, new_domain)

    def shift_all(self, new: str, order: int) -> "MultiSeries":
        """Substitute v -> v + new simultaneously for every variable.

        The fresh variable collects the Taylor directions of all shifts; its
        total power is truncated at ``order``.
        """
        if new in self.domain:
            raise DomainError(f"variable {new!r} already present")
        new_domain = ExpansionDomain(self.domain.order + (new,))
        terms: dict[Exps, object] = {}
        for exps, coeff in self.terms.items():
            stack = [((), 0, coeff)]
            for m in exps:
                grown = []
                top = m if m >= 0 else order
                for vec, utot, c in stack:
                    for r in range(min(top, order - utot) + 1):
                        grown.append((vec + (m - r,), utot + r, c * comb_general(m, r)))
                stack = grown
            for vec, utot, c in stack:
                key = vec + (utot,)
                acc = terms.get(key, 0) + c
                if acc:
                    terms[key] = acc
                else:
                    terms.pop(key, None)
        window = None
        if self.window is not None:
            window = tuple((lo, _sub(hi, order)) for lo, hi in self.window) + ((0, order),)
        support = []
        for lo, hi in self.support:
            support.append(((None if lo is None or lo < 0 else 0), hi))
        support.append((0, None))
        return MultiSeries(new_domain, terms, window, tuple(support))

    def scale_substitute(self, z) -> "MultiSeries":
        """Scale every variable: v -> z*v for a nonzero scalar z, or attach a
        fresh variable carrying the total degree when z is a name."""
        if isinstance(z, str):
            if z in self.domain:
                raise DomainError(f"variable {z!r} already present")
            new_domain = ExpansionDomain(self.domain.order + (z,))
            terms = {exps + (sum(exps),): coeff for exps, coeff in self.terms.items()}
            window = None if self.window is None else tuple(self.window) + (FULL,)
            support = tuple(self.support) + (FULL,)
            return MultiSeries(new_domain, terms, window, support)
        if not z:
            raise ValueError("scale factor must be nonzero")
        terms = {exps: coeff * z ** sum(exps) for exps, coeff in self.terms.items()}
        return MultiSeries(self.domain, terms, self.window, self.support)

    def substitute_sewing(self, var_out: str, var_keep: str, var_new: str) -> "MultiSeries":
        """Substitute var_out -> var_new / var_keep (exact monomial remap).

        var_new is appended as a fresh variable; every var_out exponent e
        becomes +e on var_new and -e on var_keep.
        """
        if var_new in self.domain:
            raise DomainError(f"variable {var_new!r} already present")
        i = self.domain.index(var_out)
        k = self.domain.index(var_keep)
        new_domain = ExpansionDomain(
            tuple(v for v in self.domain.order if v != var_out) + (var_new,))
        kept = [self.domain.index(v) for v in new_domain.order[:-1]]
        terms: dict[Exps, object] = {}
        for exps, coeff in self.terms.items():
            e = exps[i]
            vec = []
            for j in kept:
                vec.append(exps[j] - e if j == k else exps[j])
            vec.append(e)
            vec = tuple(vec)
            acc = terms.get(vec, 0) + coeff
            if acc:
                terms[vec] = acc
            else:
                terms.pop(vec, None)

        def remap(box, for_window):
            if box is None:
                return None
            vlo, vhi = box[i]
            out = []
            for j in kept:
                lo, hi = box[j]
                if j == k:
                    if for_window:
                        # need f + e inside [lo, hi] for every e in [vlo, vhi]
                        if lo is not None and vlo is None:
                            return None
                        if hi is not None and vhi is None:
                            return None
                        out.append((_sub(lo, vlo), _sub(hi, vhi)))
                    else:
                        out.append((_sub(lo, vhi), _sub(hi, vlo)))
                else:
                    out.append((lo, hi))
            out.append((vlo, vhi))
            return tuple(out)

        return MultiSeries(new_domain, terms, remap(self.window, True),
                           remap(self.support, False))

    def embed(self, new_domain: ExpansionDomain) -> "MultiSeries":
        """View the series over a larger domain (order-compatible superset)."""
        if not self.domain.is_subdomain_of(new_domain):
            raise DomainError(f"{self.domain} is not a subdomain of {new_domain}")
        pos = [new_domain.index(v) for v in self.domain.order]
        n = len(new_domain)
        terms = {}
        for exps, coeff in self.terms.items():
            vec = [0] * n
            for p, e in zip(pos, exps):
                vec[p] = e
            terms[tuple(vec)] = coeff
        window = [FULL] * n
        support: list[tuple[Bound, Bound]] = [(0, 0)] * n
        if self.window is None:
            window = None
        else:
            for p, b in zip(pos, self.window):
                window[p] = b
        for p, b in zip(pos, self.support):
            support[p] = b
        return MultiSeries(new_domain, terms,
                           None if window is None else tuple(window), tuple(support))

    def restrict_window(self, box: dict[str, tuple[Bound, Bound]]) -> "MultiSeries":
        window = None
        if self.window is not None:
            window = list(self.window)
            for var, (lo, hi) in box.items():
                i = self.domain.index(var)
                window[i] = (_max_lo(window[i][0], lo), _min_hi(window[i][1], hi))
        return MultiSeries(self.domain, self.terms, window, self.support)

    def slice_var(self, var: str, power: int) -> "MultiSeries":
        """Sub-series multiplying var**power, with var removed."""
        i = self.domain.index(var)
        new_domain = ExpansionDomain(tuple(v for v in self.domain.order if v != var))
        terms = {exps[:i] + exps[i + 1:]: c for exps, c in self.terms.items()
                 if exps[i] == power}
        drop = lambda box: None if box is None else box[:i] + box[i + 1:]
        window = drop(self.window)
        if self.window is not None:
            lo, hi = self.window[i]
            if (lo is not None and power < lo) or (hi is not None and power > hi):
                window = None
        return MultiSeries(new_domain, terms, window, drop(self.support))

    # -- numeric ------------------------------------------------------------

    def evaluate(self, point: dict[str, object], check_domain: bool = True):
        """Finite sum of the stored monomials at the point.

        The point must respect the domain's magnitude order, and every
        variable occurring with a negative exponent must be nonzero.
        """
        values = []
        for var in self.vars:
            if var not in point:
                raise DomainError(f"no value for variable {var!r}")
            values.append(point[var])
        if check_domain:
            mags = [abs(complex(v)) for v in values]
            for a, b in zip(mags, mags[1:]):
                if not a > b:
                    raise DomainError(f"point violates domain order {self.domain}")
        total = 0
        for exps, coeff in self.terms.items():
            term = coeff
            for v, e in zip(values, exps):
                if e:
                    if not v:
                        raise ZeroDivisionError("zero value at negative exponent")
                    term = term * v ** e
            total = total + term
        return total

    def evaluate_with_tail(self, point: dict[str, object]):
        """Evaluate and report a crude geometric tail estimate.

        The estimate sums the magnitudes of the terms on the high edge of the
        window (the last retained shell in each truncated direction) and
        divides by (1 - ratio) for the worst adjacent magnitude ratio; it is a
        heuristic convergence flag, not a bound certificate.
        """
        value = self.evaluate(point)
        mags = [abs(complex(point[v])) for v in self.vars]
        ratio = max((b / a for a, b in zip(mags, mags[1:])), default=0.0)
        edge = 0.0
        if self.window is not None:
            for i, (lo, hi) in enumerate(self.window):
                for bound in (lo, hi):
                    if bound is None:
                        continue
                    for exps, coeff in self.terms.items():
                        if exps[i] == bound:
                            term = abs(complex(coeff))
                            for v, e in zip(mags, exps):
                                term *= v ** e
                            edge = max(edge, term)
        if ratio >= 1.0:
            return value, float("inf"), False
        tail = edge * ratio / (1.0 - ratio)
        return value, tail, tail < max(REL_TOL * abs(complex(value)), ABS_TOL) or edge == 0.0


def comb_general(m: int, r: int):
    """Binomial coefficient C(m, r) for any integer m and r >= 0."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if m >= 0:
        return Fraction(comb(m, r))
    num = ONE
    for t in range(r):
        num *= m - t
    return num / _factorial(r)


def _factorial(r: int) -> Fraction:
    out = ONE
    for t in range(2, r + 1):
        out *= t
    return out


def expand_binomial(domain: ExpansionDomain, i: str, j: str, m: int,
                    order: int = 12) -> MultiSeries:
    """The expansion of (z_i - z_j)**m valid in the stored domain.

    Exact polynomial for m >= 0.  For m < 0 the geometric expansion in powers
    of z_j / z_i, valid only when |z_i| > |z_j|, truncated at z_j**order.
    """
    ii, jj = domain.index(i), domain.index(j)
    n = len(domain)
    terms: dict[Exps, object] = {}
    if m >= 0:
        for r in range(m + 1):
            vec = [0] * n
            vec[ii] = m - r
            vec[jj] = r
            terms[tuple(vec)] = Fraction(comb(m, r)) * (-1) ** r
        support = [(0, 0)] * n
        support[ii] = (0, m)
        support[jj] = (0, m)
        return MultiSeries(domain, terms, None, support)
    if not domain.precedes(i, j):
        raise WrongRegionError(
            f"(z_{i} - z_{j})**{m} needs |{i}| > |{j}|, domain says otherwise")
    for r in range(order + 1):
        vec = [0] * n
        vec[ii] = m - r
        vec[jj] = r
        terms[tuple(vec)] = comb_general(m, r) * (-1) ** r
    window = [FULL] * n
    window[ii] = (m - order, None)
    window[jj] = (None, order)
    support = [(0, 0)] * n
    support[ii] = (None, m)
    support[jj] = (0, None)
    return MultiSeries(domain, terms, tuple(window), tuple(support))


def residual_report(a: MultiSeries, b: MultiSeries):
    """Max |coefficient| of a - b inside the certified window, plus metadata.

    Returns (max_abs, offending_exponents, window) where window is None when
    nothing is certified (vacuous comparison).
    """
    diff = a - b
    if diff.window is None:
        return None, None, None
    worst = 0
    where = None
    for exps, coeff in diff.terms.items():
        mag = abs(coeff) if isinstance(coeff, Fraction) else abs(complex(coeff))
        if mag > worst:
            worst, where = mag, exps
    return worst, where, diff.window
