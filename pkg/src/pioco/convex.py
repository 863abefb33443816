"""Exact rational convex geometry.

Everything here works on ``Fraction`` (or ``int``) coordinates; there is no
floating point in any decision path.  The LP solver is a dense two-phase
tableau simplex with Bland's rule, which is slow but never cycles and gives
reproducible certificates.  Facet enumeration uses the double-description
method on the homogenised polar cone, in integer arithmetic, after reducing
the point set to its affine hull.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import NamedTuple, Sequence

from .behavior import CapExceeded

DEFAULT_FACET_CAP = 10**4

ZERO = Fraction(0)
ONE = Fraction(1)


class DimensionError(ValueError):
    pass


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b) if x and y), ZERO)


@dataclass(frozen=True)
class Facet:
    """Halfspace ``normal · x <= offset`` (or an equality, depending on where it sits)."""

    normal: tuple
    offset: Fraction

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(Fraction(c) for c in self.normal))
        object.__setattr__(self, "offset", Fraction(self.offset))

    def slack(self, x: Sequence) -> Fraction:
        """``normal · x - offset``: positive means violated."""
        return dot(self.normal, x) - self.offset

    def negated(self) -> Facet:
        return Facet(tuple(-c for c in self.normal), -self.offset)


@dataclass(frozen=True)
class HRep:
    dim: int
    equalities: tuple = ()
    facets: tuple = ()

    def ordered(self) -> list[Facet]:
        """All constraints as inequalities, in the canonical checking order.

        Each equality contributes ``n·x <= c`` followed by ``-n·x <= -c``;
        facets follow, sorted lexicographically.
        """
        out = []
        for e in sorted(self.equalities, key=_facet_key):
            out.extend((e, e.negated()))
        out.extend(sorted(self.facets, key=_facet_key))
        return out

    def contains_point(self, x: Sequence) -> bool:
        return all(e.slack(x) == 0 for e in self.equalities) and all(
            f.slack(x) <= 0 for f in self.facets
        )


def _facet_key(f: Facet):
    return (f.normal, f.offset)


@dataclass(frozen=True)
class Polytope:
    """``hull(vertices)`` intersected with optional extra constraints."""

    vertices: tuple
    constraints: HRep | None = None

    @property
    def dim(self) -> int:
        return len(self.vertices[0]) if self.vertices else 0


class LPResult(NamedTuple):
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Fraction | None = None
    point: tuple | None = None


class HullMembership(NamedTuple):
    member: bool
    weights: tuple | None = None

    def __bool__(self):
        return self.member


class Containment(NamedTuple):
    contained: bool
    point: tuple | None = None
    facet: Facet | None = None
    violation: Fraction | None = None

    def __bool__(self):
        return self.contained


# -- simplex ----------------------------------------------------------------


def _pivot(rows, rhs, rc, basis, r, col):
    """Pivot on (r, col).  ``rc`` is [reduced costs, objective rhs]."""
    row = rows[r]
    piv = row[col]
    if piv != 1:
        row = [x / piv for x in row]
        rows[r] = row
        rhs[r] /= piv
    nz = [j for j, x in enumerate(row) if x]
    for i, other in enumerate(rows):
        if i != r:
            f = other[col]
            if f:
                for j in nz:
                    other[j] -= f * row[j]
                rhs[i] -= f * rhs[r]
    f = rc[0][col]
    if f:
        costs = rc[0]
        for j in nz:
            costs[j] -= f * row[j]
        rc[1] -= f * rhs[r]
    basis[r] = col


def _run_simplex(rows, rhs, rc, basis, allowed) -> str:
    """Maximise with Bland's rule; columns outside ``allowed`` never enter."""
    while True:
        costs = rc[0]
        col = next((j for j in allowed if costs[j] > 0), None)
        if col is None:
            return "optimal"
        best = None
        for i, row in enumerate(rows):
            a = row[col]
            if a > 0:
                ratio = rhs[i] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return "unbounded"
        _pivot(rows, rhs, rc, basis, best[1], col)


def _reduced_costs(rows, rhs, basis, c):
    costs = list(c)
    value = ZERO
    for i, b in enumerate(basis):
        cb = c[b]
        if cb:
            for j, x in enumerate(rows[i]):
                if x:
                    costs[j] -= cb * x
            value -= cb * rhs[i]
    return [costs, value]


def lp(
    objective: Sequence,
    ub: Sequence[Facet] = (),
    eq: Sequence[Facet] = (),
    bounds: Sequence | None = None,
    maximize: bool = True,
) -> LPResult:
    """Optimise ``objective · x`` subject to ``ub`` (``<=``), ``eq`` (``=``) and bounds.

    ``bounds`` is a list of ``(lo, hi)`` pairs with ``None`` for an open side;
    by default every variable is free.
    """
    n = len(objective)
    for f in list(ub) + list(eq):
        if len(f.normal) != n:
            raise DimensionError(f"constraint has dimension {len(f.normal)}, expected {n}")
    if bounds is None:
        bounds = [(None, None)] * n
    if len(bounds) != n:
        raise DimensionError("bounds do not match the objective dimension")
    sign = 1 if maximize else -1

    # x_j = shift_j + sum(coef * y_col), y >= 0
    shift = []
    terms = []
    extra_ub = []
    ncols = 0
    for j, (lo, hi) in enumerate(bounds):
        if lo is not None:
            shift.append(Fraction(lo))
            terms.append([(ncols, ONE)])
            if hi is not None:
                extra_ub.append((ncols, Fraction(hi) - Fraction(lo)))
            ncols += 1
        elif hi is not None:
            shift.append(Fraction(hi))
            terms.append([(ncols, -ONE)])
            ncols += 1
        else:
            shift.append(ZERO)
            terms.append([(ncols, ONE), (ncols + 1, -ONE)])
            ncols += 2

    def mapped(normal, offset):
        row = [ZERO] * ncols
        for j, a in enumerate(normal):
            if a:
                a = Fraction(a)
                for col, coef in terms[j]:
                    row[col] += a * coef
                offset -= a * shift[j]
        return row, Fraction(offset)

    ub_rows = [mapped(f.normal, f.offset) for f in ub]
    for col, width in extra_ub:
        row = [ZERO] * ncols
        row[col] = ONE
        ub_rows.append((row, width))
    eq_rows = [mapped(f.normal, f.offset) for f in eq]

    n_ub = len(ub_rows)
    n_slack_end = ncols + n_ub
    rows, rhs, basis, art_rows = [], [], [], []
    for i, (row, b) in enumerate(ub_rows):
        full = row + [ZERO] * n_ub
        full[ncols + i] = ONE
        if b < 0:
            full = [-x for x in full]
            b = -b
            art_rows.append(i)
            basis.append(None)
        else:
            basis.append(ncols + i)
        rows.append(full)
        rhs.append(b)
    for row, b in eq_rows:
        full = row + [ZERO] * n_ub
        if b < 0:
            full = [-x for x in full]
            b = -b
        art_rows.append(len(rows))
        basis.append(None)
        rows.append(full)
        rhs.append(b)

    n_art = len(art_rows)
    total = n_slack_end + n_art
    for row in rows:
        row.extend([ZERO] * n_art)
    for k, i in enumerate(art_rows):
        rows[i][n_slack_end + k] = ONE
        basis[i] = n_slack_end + k

    if n_art:
        c1 = [ZERO] * n_slack_end + [-ONE] * n_art
        rc = _reduced_costs(rows, rhs, basis, c1)
        _run_simplex(rows, rhs, rc, basis, range(total))
        if rc[1] != 0:
            # rc[1] holds minus the objective; the phase-one optimum must be 0
            return LPResult("infeasible")
        # drive remaining artificials out of the basis
        i = 0
        while i < len(rows):
            if basis[i] >= n_slack_end:
                col = next((j for j in range(n_slack_end) if rows[i][j] != 0), None)
                if col is None:
                    del rows[i], rhs[i], basis[i]
                    continue
                _pivot(rows, rhs, [[ZERO] * total, ZERO], basis, i, col)
            i += 1
        for row in rows:
            del row[n_slack_end:]

    c = [ZERO] * n_slack_end
    const = ZERO
    for j, a in enumerate(objective):
        if a:
            a = Fraction(a) * sign
            const += a * shift[j]
            for col, coef in terms[j]:
                c[col] += a * coef
    rc = _reduced_costs(rows, rhs, basis, c)
    status = _run_simplex(rows, rhs, rc, basis, range(n_slack_end))
    if status == "unbounded":
        return LPResult("unbounded")
    y = [ZERO] * n_slack_end
    for i, b in enumerate(basis):
        y[b] = rhs[i]
    x = tuple(shift[j] + sum((coef * y[col] for col, coef in terms[j]), ZERO) for j in range(n))
    value = dot(objective, x)
    return LPResult("optimal", value, x)


# -- hull membership ------------------------------------------------------------


def hull_member(point: Sequence, vertices: Sequence[Sequence]) -> HullMembership:
    """Is ``point`` a convex combination of ``vertices``?  Weights certify a yes."""
    if not vertices:
        raise ValueError("empty vertex set")
    d = len(point)
    if any(len(v) != d for v in vertices):
        raise DimensionError("vertex and point dimensions differ")
    n = len(vertices)
    eq = [Facet((ONE,) * n, ONE)]
    for k in range(d):
        eq.append(Facet(tuple(v[k] for v in vertices), point[k]))
    res = lp((ZERO,) * n, eq=eq, bounds=[(0, None)] * n)
    if res.status != "optimal":
        return HullMembership(False)
    return HullMembership(True, res.point)


# -- facet enumeration --------------------------------------------------------


def _rref(rows: list[list[Fraction]]):
    """Reduced row echelon form; returns (rows, pivot columns)."""
    rows = [list(r) for r in rows]
    pivots = []
    if not rows:
        return rows, pivots
    ncols = len(rows[0])
    r = 0
    for col in range(ncols):
        pr = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        piv = rows[r][col]
        rows[r] = [x / piv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def _integer_scale(values: Sequence[Fraction]) -> list[int]:
    """Smallest positive multiple of ``values`` that is integral and primitive."""
    den = lcm(*(Fraction(v).denominator for v in values)) if values else 1
    ints = [int(Fraction(v) * den) for v in values]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return [x // g for x in ints] if g > 1 else ints


def _normalise(normal: Sequence, offset, orient: bool) -> Facet:
    vals = list(normal) + [offset]
    ints = _integer_scale(vals)
    if orient:
        lead = next((x for x in ints[:-1] if x), 0)
        if lead < 0:
            ints = [-x for x in ints]
    return Facet(tuple(Fraction(x) for x in ints[:-1]), Fraction(ints[-1]))


def affine_hull(vertices: Sequence[Sequence]):
    """Equalities of the affine hull and the pivot coordinates parametrising it."""
    v0 = [Fraction(x) for x in vertices[0]]
    d = len(v0)
    diffs = [[Fraction(x) - y for x, y in zip(v, v0)] for v in vertices[1:]]
    diffs = [r for r in diffs if any(r)]
    reduced, pivots = _rref(diffs)
    free = [j for j in range(d) if j not in pivots]
    equalities = []
    for f in free:
        normal = [ZERO] * d
        normal[f] = ONE
        for row, pc in zip(reduced, pivots):
            normal[pc] = -row[f]
        equalities.append(_normalise(normal, dot(normal, v0), orient=True))
    return equalities, pivots


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _double_description(rows: list[list[int]], dim: int, cap: int) -> list[tuple]:
    """Extreme rays of the pointed cone ``{z : row · z <= 0}`` (integer rows)."""
    # pick `dim` linearly independent rows for a simplicial start
    chosen = []
    echelon: list[list[Fraction]] = []
    lead_cols: list[int] = []
    for idx, row in enumerate(rows):
        vec = [Fraction(x) for x in row]
        for erow, lc in zip(echelon, lead_cols):
            if vec[lc]:
                f = vec[lc] / erow[lc]
                vec = [a - f * b for a, b in zip(vec, erow)]
        lc = next((j for j, x in enumerate(vec) if x), None)
        if lc is not None:
            echelon.append(vec)
            lead_cols.append(lc)
            chosen.append(idx)
            if len(chosen) == dim:
                break
    if len(chosen) < dim:
        raise ValueError("cone is not pointed")

    # rays of {A0 z <= 0}: columns of -A0^{-1}
    a0 = [[Fraction(x) for x in rows[i]] for i in chosen]
    aug = [r + [ONE if j == i else ZERO for j in range(dim)] for i, r in enumerate(a0)]
    red, _ = _rref(aug)
    inv = [r[dim:] for r in red]
    rays = []
    masks = []
    all_chosen = 0
    for i in chosen:
        all_chosen |= 1 << i
    for j in range(dim):
        col = [-inv[i][j] for i in range(dim)]
        rays.append(tuple(_integer_scale(col)))
        masks.append(all_chosen & ~(1 << chosen[j]))

    chosen_set = set(chosen)
    for idx, row in enumerate(rows):
        if idx in chosen_set:
            continue
        vals = [sum(a * b for a, b in zip(row, ray)) for ray in rays]
        pos = [i for i, s in enumerate(vals) if s > 0]
        if not pos:
            bit = 1 << idx
            masks = [m | bit if s == 0 else m for m, s in zip(masks, vals)]
            continue
        neg = [i for i, s in enumerate(vals) if s < 0]
        # rays tight on each processed row, as bitsets over ray indices
        tight: dict = {}
        for ri, m in enumerate(masks):
            x = m
            while x:
                low = x & -x
                b = low.bit_length() - 1
                tight[b] = tight.get(b, 0) | (1 << ri)
                x ^= low
        everyone = (1 << len(rays)) - 1
        new_rays, new_masks = [], []
        for pi in pos:
            mp = masks[pi]
            for ni in neg:
                common = mp & masks[ni]
                if _popcount(common) < dim - 2:
                    continue
                pair = (1 << pi) | (1 << ni)
                acc = everyone
                x = common
                while x and acc != pair:
                    low = x & -x
                    acc &= tight.get(low.bit_length() - 1, 0)
                    x ^= low
                if acc != pair:
                    continue
                sp, sn = vals[pi], vals[ni]
                ray = [sp * b - sn * a for a, b in zip(rays[pi], rays[ni])]
                g = 0
                for v in ray:
                    g = gcd(g, v)
                if g > 1:
                    ray = [v // g for v in ray]
                new_rays.append(tuple(ray))
                new_masks.append(common | (1 << idx))
        bit = 1 << idx
        keep_rays, keep_masks = [], []
        for ray, m, s in zip(rays, masks, vals):
            if s < 0:
                keep_rays.append(ray)
                keep_masks.append(m)
            elif s == 0:
                keep_rays.append(ray)
                keep_masks.append(m | bit)
        rays = keep_rays + new_rays
        masks = keep_masks + new_masks
        if len(rays) > cap:
            raise CapExceeded("facet enumeration", cap)
    return rays


def hrep(vertices: Sequence[Sequence], cap: int = DEFAULT_FACET_CAP) -> HRep:
    """Halfspace description of ``hull(vertices)``.

    Lower-dimensional hulls carry explicit equalities; the inequalities are
    then expressed in the pivot coordinates of the affine hull.
    """
    if not vertices:
        raise ValueError("empty vertex set")
    d = len(vertices[0])
    if any(len(v) != d for v in vertices):
        raise DimensionError("vertices have different dimensions")
    pts = sorted({tuple(Fraction(x) for x in v) for v in vertices})
    equalities, pivots = affine_hull(pts)
    r = len(pivots)
    if r == 0:
        return HRep(d, tuple(equalities), ())
    rows = []
    for v in pts:
        w = [v[j] for j in pivots]
        den = lcm(*(x.denominator for x in w))
        rows.append([int(x * den) for x in w] + [-den])
    rays = _double_description(rows, r + 1, cap)
    facets = []
    for ray in rays:
        a, b = ray[:r], ray[r]
        if not any(a):
            continue
        normal = [ZERO] * d
        for j, coef in zip(pivots, a):
            normal[j] = Fraction(coef)
        facets.append(_normalise(normal, Fraction(b), orient=False))
    return HRep(d, tuple(equalities), tuple(sorted(set(facets), key=_facet_key)))


# -- containment ---------------------------------------------------------------


def contains(P: Polytope, Q: HRep) -> Containment:
    """Decide ``P ⊆ Q``; on failure return the maximising point and facet.

    Facets of ``Q`` are scanned in canonical order, so the witness is the one
    for the first violated facet.
    """
    if not P.vertices:
        return Containment(True)
    if P.dim != Q.dim:
        raise DimensionError(f"P has dimension {P.dim}, Q has {Q.dim}")
    verts = P.vertices
    n = len(verts)
    extra_eq, extra_ub = [], []
    if P.constraints is not None and (P.constraints.equalities or P.constraints.facets):
        def lift(f):
            return Facet(tuple(dot(f.normal, v) for v in verts), f.offset)

        extra_eq = [Facet((ONE,) * n, ONE)] + [lift(e) for e in P.constraints.equalities]
        extra_ub = [lift(f) for f in P.constraints.facets]
        feasible = lp((ZERO,) * n, ub=extra_ub, eq=extra_eq, bounds=[(0, None)] * n)
        if feasible.status == "infeasible":
            return Containment(True)

    for f in Q.ordered():
        vals = [f.slack(v) for v in verts]
        worst = max(vals)
        if worst <= 0:
            continue
        if not extra_eq:
            i = vals.index(worst)
            return Containment(False, tuple(verts[i]), f, worst)
        objective = tuple(dot(f.normal, v) for v in verts)
        res = lp(objective, ub=extra_ub, eq=extra_eq, bounds=[(0, None)] * n)
        if res.status != "optimal":
            raise ArithmeticError(f"containment LP ended {res.status}")
        if res.value > f.offset:
            lam = res.point
            point = tuple(
                sum((w * v[k] for w, v in zip(lam, verts) if w), ZERO) for k in range(Q.dim)
            )
            return Containment(False, point, f, res.value - f.offset)
    return Containment(True)
