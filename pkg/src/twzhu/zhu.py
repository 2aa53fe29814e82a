"""Twisted residue products, the subspaces O_g, and the quotients A_g(V),
A_g(U) with their action tables.

Truncation: at cutoff N (a degree bound on U) the generators are all products
whose highest-weight term stays within degree N.  The image of U^0 of degree
<= D in the quotient is reported for each N; it can only shrink as N grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .linalg import EchelonBasis, Quotient, SparseMatrix, Vector, basis_vector, vadd, viadd
from .voa import TruncatedVOA, VertexModule, binom, bracket_apply


# -- eigenspaces --------------------------------------------------------------

def _stabilizer(U: VertexModule, g):
    if g is None:
        return None
    if U is U.voa.adjoint:
        return U.voa.automorphisms[g]
    return U.stabilizers[g]


def group_order(V: TruncatedVOA, g) -> int:
    return 1 if g is None else V.orders[g]


def module_eigenspace(U: VertexModule, g, r: int, max_degree=None) -> list:
    """Basis indices of U^r = {u : phi(g) u = e^{2 pi i r/|g|} u}; phi(g) must be diagonal."""
    from .exact import root_of_unity
    top = U.cutoff if max_degree is None else U.lowest + Fraction(max_degree)
    idx = [i for i in range(U.dim) if U.weights[i] <= top]
    phi = _stabilizer(U, g)
    if phi is None:
        return idx if r == 0 else []
    T = group_order(U.voa, g)
    ev = root_of_unity(r, T)
    out = []
    for i in idx:
        col = phi.column(i)
        if set(col) - {i}:
            raise NotImplementedError("non-diagonal stabilizer; change basis first")
        if col.get(i) == ev:
            out.append(i)
    return out


def voa_eigenvectors(V: TruncatedVOA, g, r: int, max_weight=None) -> list:
    if g is None:
        top = V.cutoff if max_weight is None else max_weight
        return [basis_vector(i) for i in V.indices_upto(top)] if r == 0 else []
    return V.eigenspace(g, r, max_weight)


def eigen_r(V: TruncatedVOA, a: Vector, g) -> int:
    return 0 if g is None else V.eigen_index(a, g)


# -- residue products ---------------------------------------------------------------

def residue(U: VertexModule, a: Vector, exponent, zpower: int, u: Vector, strict=True) -> Vector:
    """Res_z (1+z)^exponent z^{-zpower} Y(a, z) u = sum_i binom(exponent, i) a_{i-zpower} u."""
    out: Vector = {}
    if not u:
        return out
    wa = U.voa.weight_of(a)
    maxdeg = max(U.degree(i) for i in u)
    top = math.floor(wa - 1 + maxdeg) + zpower
    for i in range(0, top + 1):
        c = binom(exponent, i)
        if c:
            viadd(out, U.apply(a, i - zpower, u, strict), c)
    return out


def residue_product(kind: str, V: TruncatedVOA, a, u: Vector, g=None, U: VertexModule | None = None,
                    strict=True) -> Vector:
    """a o_g u, a *_g u or u *_g a for a in V^r (r = 0 for the star kinds).

    Inhomogeneous a is split into weight components.
    """
    U = U or V.adjoint
    a = a if isinstance(a, dict) else basis_vector(a)
    parts = V.homogeneous_parts(a)
    if len(parts) != 1:
        out: Vector = {}
        for part in parts.values():
            viadd(out, residue_product(kind, V, part, u, g, U, strict))
        return out
    wa = V.weight_of(a)
    r = eigen_r(V, a, g)
    T = group_order(V, g)
    if kind == "circ":
        d = 1 if r == 0 else 0
        return residue(U, a, wa + Fraction(r, T) - 1 + d, 1 + d, u, strict)
    if r != 0:
        raise ValueError("star products need a in V^0")
    if kind == "star_left":
        return residue(U, a, wa, 1, u, strict)
    if kind == "star_right":
        return residue(U, a, wa - 1, 1, u, strict)
    raise ValueError(f"unknown product {kind!r}")


def shifted_residue_element(V, U, a: Vector, u: Vector, g, m: int, n: int, strict=True) -> Vector:
    """Res (1+z)^{wt a - 1 + d + r/|g| + n} / z^{m+1+d} Y(a,z) u, d = delta_{r,0}."""
    if not m >= n >= 0:
        raise ValueError("need m >= n >= 0")
    wa = V.weight_of(a)
    r = eigen_r(V, a, g)
    T = group_order(V, g)
    d = 1 if r == 0 else 0
    return residue(U, a, wa - 1 + d + Fraction(r, T) + n, m + 1 + d, u, strict)


# -- generators ------------------------------------------------------------------------

def o_g_generators(V: TruncatedVOA, U: VertexModule, g, cutoff, residue_depth: int = 0,
                   target_r: int | None = 0) -> list:
    """a o_g u for a in V^r, u in U^s with the top term of degree <= cutoff.

    target_r = 0 keeps r + s = 0 (the part landing in U^0); None keeps all.
    Shifted residue elements with m >= n >= 0, m <= residue_depth are appended.
    Order: ascending total weight, then basis order.
    """
    T = group_order(V, g)
    cutoff = Fraction(cutoff)
    out = []
    pairs = []
    for r in range(T):
        avecs = voa_eigenvectors(V, g, r, cutoff + 1)
        for s in range(T):
            if target_r is not None and (r + s) % T != target_r:
                continue
            for ui in module_eigenspace(U, g, s, cutoff):
                for a in avecs:
                    pairs.append((V.weight_of(a) + U.degree(ui), r, a, ui))
    pairs.sort(key=lambda t: (t[0], t[1], sorted(t[2]), t[3]))
    for tot, r, a, ui in pairs:
        d = 1 if r == 0 else 0
        u = {ui: Fraction(1)}
        for m in range(0, residue_depth + 1):
            if tot + m + d > cutoff:
                break
            for n in range(0, m + 1):
                if m == 0:
                    out.append(residue_product("circ", V, a, u, g, U))
                else:
                    out.append(shifted_residue_element(V, U, a, u, g, m, n))
    return [x for x in out if x]


# -- quotient ------------------------------------------------------------------------------

@dataclass
class ZhuQuotient:
    V: TruncatedVOA
    U: VertexModule
    g: object
    cutoff: Fraction
    level: Fraction
    ambient: list
    generators: list
    quotient: Quotient
    dims_by_cutoff: list = field(default_factory=list)
    algebra: "ZhuQuotient | None" = None
    left: dict = field(default_factory=dict)
    right: dict = field(default_factory=dict)

    @property
    def representatives(self) -> list:
        """Representatives of degree <= level (the saturated part)."""
        return [i for i in self.quotient.representatives if self.U.degree(i) <= self.level]

    @property
    def dim(self) -> int:
        return len(self.representatives)

    @property
    def stabilized(self) -> bool:
        return len(self.dims_by_cutoff) >= 2 and self.dims_by_cutoff[-1][1] == self.dims_by_cutoff[-2][1]

    def project(self, vec: Vector) -> Vector:
        return self.quotient.project(vec)

    def rep_names(self) -> list:
        return [self.U.label_str(i) for i in self.representatives]


def _priority(U: VertexModule):
    return lambda c: (U.weights[c], c)


def _quotient_at(V, U, g, N, depth):
    T = group_order(V, g)
    amb = module_eigenspace(U, g, 0, N)
    gens = o_g_generators(V, U, g, N, depth)
    eb = EchelonBasis(_priority(U))
    for x in gens:
        eb.add(x)
    # O_g(V) contains every V^r with r != 0; for U = V these lie outside the ambient anyway
    reps = [i for i in amb if i not in eb.rows]
    return amb, gens, Quotient(amb, eb, reps)


def zhu_quotient(V: TruncatedVOA, U: VertexModule | None = None, g=None, cutoff=None,
                 residue_depth: int = 0, level=None, first_cutoff=None,
                 tables: bool = True, algebra: ZhuQuotient | None = None) -> ZhuQuotient:
    """A_g(U) truncated at degree cutoff, reported on degrees <= level."""
    U = U or V.adjoint
    cutoff = Fraction(U.cutoff - U.lowest if cutoff is None else cutoff)
    level = Fraction(cutoff - 2 if level is None else level)
    first = Fraction(level if first_cutoff is None else first_cutoff)
    dims = []
    N = first
    result = None
    while N <= cutoff:
        amb, gens, q = _quotient_at(V, U, g, N, residue_depth)
        dims.append((N, sum(1 for i in q.representatives if U.degree(i) <= level)))
        result = (amb, gens, q)
        N += 1
    amb, gens, q = result
    zq = ZhuQuotient(V, U, g, cutoff, level, amb, gens, q, dims)
    if U is V.adjoint:
        zq.algebra = zq
    else:
        zq.algebra = algebra or zhu_quotient(V, None, g, cutoff, residue_depth, level, first,
                                             tables=False)
    if tables:
        fill_tables(zq)
    return zq


def star(zq: ZhuQuotient, a: Vector, u: Vector, side: str) -> Vector:
    kind = "star_left" if side == "left" else "star_right"
    return residue_product(kind, zq.V, a, u, zq.g, zq.U)


def fill_tables(zq: ZhuQuotient):
    """Left/right actions of algebra representatives on representatives, where
    the product stays inside the truncation."""
    A = zq.algebra
    for ai in A.representatives:
        a = {ai: Fraction(1)}
        wa = zq.V.weights[ai]
        for ui in zq.representatives:
            if wa + zq.U.degree(ui) > zq.cutoff:
                continue
            u = {ui: Fraction(1)}
            zq.left[(ai, ui)] = zq.project(star(zq, a, u, "left"))
            zq.right[(ai, ui)] = zq.project(star(zq, a, u, "right"))


# -- axiom checks -------------------------------------------------------------------------

def verify_bimodule_axioms(zq: ZhuQuotient, max_total=None, generator_checks: bool = True) -> list:
    """Associativity of the three kinds and vanishing of O_g(V) actions, for
    representative triples with wt a + wt b + deg u <= max_total."""
    V, U, g = zq.V, zq.U, zq.g
    A = zq.algebra
    bound = zq.cutoff - 1 if max_total is None else Fraction(max_total)
    bad = []
    areps = A.representatives

    def L(a, u):
        return residue_product("star_left", V, a, u, g, U)

    def R(a, u):
        return residue_product("star_right", V, a, u, g, U)

    def VV(a, b):
        return residue_product("star_left", V, a, b, g, V.adjoint)

    for ai in areps:
        a = {ai: Fraction(1)}
        for bi in areps:
            b = {bi: Fraction(1)}
            wab = V.weights[ai] + V.weights[bi]
            if wab > bound:
                continue
            ab = VV(a, b)
            for ui in zq.representatives:
                if wab + U.degree(ui) > bound:
                    continue
                u = {ui: Fraction(1)}
                checks = (
                    ("a*(b*u)=(a*b)*u", L(a, L(b, u)), L(ab, u)),
                    ("(u*a)*b=u*(a*b)", R(b, R(a, u)), R(ab, u)),
                    ("(a*u)*b=a*(u*b)", R(b, L(a, u)), L(a, R(b, u))),
                )
                for name, x, y in checks:
                    if zq.project(vadd(x, y, -1)):
                        bad.append((name, V.label_str(ai), V.label_str(bi), U.label_str(ui)))
    if generator_checks:
        for x in A.generators:
            wx = max(V.weights[i] for i in x)
            for ui in zq.representatives:
                if wx + U.degree(ui) > bound:
                    continue
                u = {ui: Fraction(1)}
                lx = residue_product("star_left", V, x, u, g, U)
                rx = residue_product("star_right", V, x, u, g, U)
                if zq.project(lx):
                    bad.append(("O_g(V)*u=0", _vec_name(V, x), U.label_str(ui)))
                if zq.project(rx):
                    bad.append(("u*O_g(V)=0", _vec_name(V, x), U.label_str(ui)))
    return bad


def _vec_name(V, x):
    return " + ".join(f"{c}*{V.label_str(i)}" for i, c in sorted(x.items()))


def commutator_identity_check(V: TruncatedVOA, U: VertexModule | None = None, g=None,
                              max_total=5) -> list:
    """a*u - u*a = a_[0] u exactly, for a in V^0 and u basis vectors of U."""
    U = U or V.adjoint
    bad = []
    for a in voa_eigenvectors(V, g, 0, max_total):
        wa = V.weight_of(a)
        for ui in range(U.dim):
            if wa + U.degree(ui) > max_total:
                continue
            u = {ui: Fraction(1)}
            lhs = vadd(residue_product("star_left", V, a, u, g, U),
                       residue_product("star_right", V, a, u, g, U), -1)
            rhs = bracket_apply(U, a, 0, u)
            if vadd(lhs, rhs, -1):
                bad.append((_vec_name(V, a), U.label_str(ui)))
    return bad


def dense_rank(vectors: list, ncols: int) -> int:
    """Independent dense Gaussian elimination over Fractions (cross-check oracle)."""
    rows = [[v.get(j, Fraction(0)) for j in range(ncols)] for v in vectors]
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / pr[col]
                rows[r] = [x - f * y for x, y in zip(rows[r], pr)]
        rank += 1
    return rank
