"""Trace functions S(u, tau) = tr_W o(u) psi(h)^{-1} q^{L(0) - c/24}, the
O(g,h) generator families, the C4 differential equation, the operator
omega~*_tau, the constant-term identities and numeric modular checks.

A formal combination is a list of (coefficient, vector) pairs where the
coefficient is a scalar or a PuiseuxSeries in q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .exact import root_of_unity, to_complex
from .linalg import NO_SOLUTION, EchelonBasis, SparseMatrix, Vector, basis_vector, solve_system, vadd, viadd, vscale
from .qseries import (ModularMatrix, PuiseuxSeries, TwistPair, eisenstein, q_series_Q)
from .voa import (IntertwinerData, L_bracket_apply, TruncatedVOA, ValidationError, VertexModule,
                  bracket_apply, check_stabilizer, invert_matrix)
from .zhu import _priority, _stabilizer, group_order, residue_product

SECTORS = ((None, None), (None, "theta"), ("theta", None), ("theta", "theta"))


def sector_tag(g, h) -> str:
    """Serialized sector name "g^i h^j"."""
    return f"g^{0 if g is None else 1} h^{0 if h is None else 1}"


def parse_sector(text: str) -> tuple:
    """'1,theta', 'θ,1', 'theta,theta' ... -> (g, h)."""
    parts = [p.strip() for p in text.replace(";", ",").split(",")]
    if len(parts) != 2:
        raise ValueError(f"bad sector {text!r}")
    out = []
    for p in parts:
        if p in ("1", "id", "none", ""):
            out.append(None)
        elif p in ("theta", "θ", "t"):
            out.append("theta")
        else:
            raise ValueError(f"bad sector element {p!r}")
    return tuple(out)


def _mul(f, s: PuiseuxSeries) -> PuiseuxSeries:
    return f * s if isinstance(f, PuiseuxSeries) else s.scale(f)


# -- trace expansions ------------------------------------------------------------------

@dataclass
class TraceExpansion:
    """u -> S(u, tau) for an intertwiner I of type U x W -> W, exact to order.

    Exponents are d + h_W - c/24 with W-degree d < order.  Log powers are
    not produced (p = 0).
    """

    I: IntertwinerData
    psi_inv: SparseMatrix | None
    order: Fraction
    sector: tuple = (None, None)
    p: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def W(self) -> VertexModule:
        return self.I.W1

    @property
    def leading_exponent(self) -> Fraction:
        return self.W.lowest - Fraction(self.W.voa.central_charge) / 24

    @property
    def prec(self) -> Fraction:
        return self.leading_exponent + self.order

    @property
    def den(self) -> int:
        return _den(self.W)

    def _grades(self):
        return [w for w in self.W.grades() if w - self.W.lowest < self.order]

    def basis(self, i: int) -> PuiseuxSeries:
        hit = self._cache.get(i)
        if hit is not None:
            return hit
        W = self.W
        m = self.I.grade_preserving({i: Fraction(1)})
        if self.psi_inv is not None:
            m = m @ self.psi_inv
        coeffs = {}
        base = self.leading_exponent
        for w in self._grades():
            t = sum((m.get(c, c) for c in W.indices_at(w)), Fraction(0))
            if t:
                coeffs[base + w - W.lowest] = t
        s = PuiseuxSeries(coeffs, self.den, self.prec)
        self._cache[i] = s
        return s

    def __call__(self, u) -> PuiseuxSeries:
        if isinstance(u, list):
            return self.combination(u)
        out = PuiseuxSeries.zero(self.prec, self.den)
        for i, c in u.items():
            out = out + self.basis(i).scale(c)
        return out

    def combination(self, comb: list) -> PuiseuxSeries:
        """M(g,h)-linear extension to formal combinations [(f, vector)]."""
        out = PuiseuxSeries.zero(self.prec, self.den)
        for f, vec in comb:
            if vec:
                out = out + _mul(f, self(vec))
        return out


def _den(W: VertexModule) -> int:
    d = Fraction(W.lowest - Fraction(W.voa.central_charge) / 24).denominator
    for w in W.grades():
        d = math.lcm(d, Fraction(w - W.lowest).denominator)
    return d


def check_h_stable(I: IntertwinerData, h, max_weight=None) -> list:
    """psi(h) Y(a) psi(h)^{-1} = Y(h a) on W for the adjoint-type intertwiner."""
    if h is None:
        return []
    return check_stabilizer(I.W1, h, max_weight)


def trace_qexpansion(I: IntertwinerData, psi_inv: SparseMatrix | None, u: Vector, order,
                     sector=(None, None), validate: bool = True) -> PuiseuxSeries:
    """Exact q-expansion of S^I(u, tau); see TraceExpansion."""
    return trace_expansion(I, psi_inv, order, sector, validate)(u)


def trace_expansion(I: IntertwinerData, psi_inv: SparseMatrix | None, order, sector=(None, None),
                    validate: bool = True, max_weight=None) -> TraceExpansion:
    if validate and sector[1] is not None:
        bad = check_h_stable(I, sector[1], max_weight)
        if bad:
            raise ValidationError(f"intertwiner not {sector[1]}-stable: {bad[0]}")
    return TraceExpansion(I, psi_inv, Fraction(order), tuple(sector))


def heisenberg_sector_trace(V: TruncatedVOA, g, h, order, validate: bool = True) -> TraceExpansion:
    """Adjoint-intertwiner traces on M(1) (g = 1) or M(1)(theta) (g = theta)."""
    from .instances import FockModule, build_twisted_fock
    order = Fraction(order)
    deg = math.ceil(order) - 1 if order.denominator == 1 else math.floor(order)
    if g is None:
        W = FockModule(V, deg, name="M(1)")
        W.stabilizers["theta"] = W.parity_matrix()
    else:
        W = build_twisted_fock(V, cutoff=deg + 1)
    I = IntertwinerData.adjoint(W)
    psi_inv = None if h is None else invert_matrix(W.stabilizers[h])
    return trace_expansion(I, psi_inv, order, (g, h), validate, max_weight=2)


# -- eigen data and O(g,h) generators --------------------------------------------------

def _vector_eigen(V: TruncatedVOA, U: VertexModule, vec: Vector, g) -> Fraction:
    """x with phi(g) vec = e^{2 pi i x} vec, for a basis vector of a diagonal stabilizer."""
    if g is None:
        return Fraction(0)
    phi = _stabilizer(U, g)
    (i,) = vec
    ev = phi.get(i, i)
    T = group_order(V, g)
    for r in range(T):
        if root_of_unity(r, T) == ev:
            return Fraction(r, T)
    raise ValueError("stabilizer eigenvalue is not a |g|-th root of unity")


def twist_pair(V, U, vec, g, h) -> TwistPair:
    return TwistPair.from_fractions(_vector_eigen(V, U, vec, g), _vector_eigen(V, U, vec, h))


@dataclass
class SectorGenerator:
    family: int
    a: int | None
    u: int
    terms: list          # [(coefficient, vector)]

    def describe(self, V, U) -> str:
        a = "-" if self.a is None else V.label_str(self.a)
        return f"family {self.family}: a={a} u={U.label_str(self.u)}"


def _bracket_sum(U, a, u, coeff_fn, start_k, step_n, strict=False):
    """Terms (coeff_fn(k), a_[step_n(k)] u) for k >= start_k until the mode vanishes."""
    out = []
    wa = U.voa.weight_of(a)
    top = wa - 1 + U.degree(next(iter(u)))
    k = start_k
    while step_n(k) <= top:
        vec = bracket_apply(U, a, step_n(k), u, strict)
        if vec:
            f = coeff_fn(k)
            if f is not None:
                out.append((f, vec))
        k += 1
    return out


def sector_generators(V: TruncatedVOA, U: VertexModule, g, h, cutoff, order) -> list:
    """The four O(g,h) generator families for basis a of V and u of U with
    wt a + deg u <= cutoff (family 3: deg u <= cutoff)."""
    cutoff = Fraction(cutoff)
    order = Fraction(order)
    gens = []
    us = [i for i in range(U.dim) if U.degree(i) <= cutoff]
    for ui in us:
        u = {ui: Fraction(1)}
        if not twist_pair(V, U, u, g, h).trivial:
            gens.append(SectorGenerator(3, None, ui, [(Fraction(1), u)]))
    E = {}

    def eis(k):
        if k not in E:
            E[k] = eisenstein(k, order)
        return E[k]

    for ai in range(V.dim):
        a = {ai: Fraction(1)}
        wa = V.weights[ai]
        tw = twist_pair(V, V.adjoint, a, g, h)
        for ui in us:
            if wa + U.degree(ui) > cutoff:
                continue
            u = {ui: Fraction(1)}
            if tw.trivial:
                gens.append(SectorGenerator(1, ai, ui, [(Fraction(1), bracket_apply(U, a, 0, u))]))
                terms = [(Fraction(1), bracket_apply(U, a, -2, u))]
                terms += _bracket_sum(U, a, u, lambda k: eis(2 * k).scale(2 * k - 1), 2,
                                      lambda k: 2 * k - 2)
                gens.append(SectorGenerator(2, ai, ui, terms))
            else:
                terms = _bracket_sum(U, a, u, lambda k: q_series_Q(k, tw, order), 0, lambda k: k - 1)
                gens.append(SectorGenerator(4, ai, ui, terms))
    return gens


def check_vanishing_on_O(S: TraceExpansion, gens: list) -> list:
    """Generators whose trace is not the zero series: [(generator, series)]."""
    bad = []
    for gen in gens:
        s = S.combination(gen.terms)
        if not s.is_zero():
            bad.append((gen, s))
    return bad


# -- C4 and omega~*_tau ------------------------------------------------------------------

def _fixed(V, U, u: Vector, sector) -> bool:
    for x in sector:
        if x is None:
            continue
        phi = _stabilizer(U, x)
        if vadd(phi.apply(u), u, -1):
            return False
    return True


def l0_eigenvalue(U: VertexModule, u: Vector):
    """k with L[0] u = k u, or None."""
    lu = L_bracket_apply(U, 0, u, strict=False)
    i = min(u)
    k = lu.get(i, Fraction(0)) / u[i]
    return k if not vadd(lu, u, -k) else None


def c4_residual(S: TraceExpansion, U: VertexModule, u: Vector) -> PuiseuxSeries:
    """S(L[-2]u) - q d/dq S(u) - k E_2 S(u) - sum_{l>=2} E_{2l} S(L[2l-2]u)."""
    V = U.voa
    if not _fixed(V, U, u, S.sector):
        raise ValueError("C4 needs u fixed by the sector automorphisms")
    k = l0_eigenvalue(U, u)
    if k is None:
        raise ValueError("C4 needs an L[0]-eigenvector; decompose u first")
    out = S(L_bracket_apply(U, -2, u)) - S(u).q_derivative() - _mul(eisenstein(2, S.order), S(u)).scale(k)
    top = max(U.degree(i) for i in u)
    l = 2
    while 2 * l - 2 <= top + 1:
        x = L_bracket_apply(U, 2 * l - 2, u, strict=False)
        if x:
            out = out - eisenstein(2 * l, S.order) * S(x)
        l += 1
    return out


def omega_star_tau(U: VertexModule, u: Vector, order) -> list:
    """omega~*_tau u = L[-2]u - sum_{k>=1} E_{2k} L[2k-2]u as a formal combination."""
    terms = [(Fraction(1), L_bracket_apply(U, -2, u))]
    if not u:
        return terms
    top = max(U.degree(i) for i in u)
    k = 1
    while 2 * k - 2 <= top + 1:
        x = L_bracket_apply(U, 2 * k - 2, u, strict=False)
        if x:
            terms.append((-eisenstein(2 * k, order), x))
        k += 1
    return terms


def omega_star_residual(S: TraceExpansion, U: VertexModule, u: Vector, N: int = 1) -> PuiseuxSeries:
    """((omega~*_tau - q d/dq)^N S)(u), each stage extended M(g,h)-linearly."""
    if N == 0:
        return S(u)
    out = -omega_star_residual(S, U, u, N - 1).q_derivative()
    for f, vec in omega_star_tau(U, u, S.order):
        if vec:
            out = out + _mul(f, omega_star_residual(S, U, vec, N - 1))
    return out


def _level_one_monomials(weight: int) -> list:
    """(a, b) with 4a + 6b = weight."""
    return [(a, (weight - 4 * a) // 6) for a in range(weight // 4 + 1) if (weight - 4 * a) % 6 == 0]


def find_l2_relation(S: TraceExpansion, U: VertexModule, u: Vector, m: int):
    """Search r_i in C[E_4, E_6] of weight 2(m - i) with
    S(L[-2]^m u) + sum_{i<m} r_i S(L[-2]^i u) = 0 to the order of S.

    Returns {i: {(a, b): coefficient of E_4^a E_6^b}} or None when no such
    relation exists at this order (a finding to report, not an error).
    """
    vecs = [u]
    for _ in range(m):
        vecs.append(L_bracket_apply(U, -2, vecs[-1]))
    series = [S(v) for v in vecs]
    E4, E6 = eisenstein(4, S.order), eisenstein(6, S.order)
    unknowns, columns = [], []
    for i in range(m):
        for a, b in _level_one_monomials(2 * (m - i)):
            f = PuiseuxSeries.constant(Fraction(1), S.order)
            for _ in range(a):
                f = f * E4
            for _ in range(b):
                f = f * E6
            unknowns.append((i, (a, b)))
            columns.append(f * series[i])
    target = series[m]
    exps = sorted({e for c in columns + [target] for e in c.exponents() if e < S.prec})
    rows = [{k: c.coefficient(e) for k, c in enumerate(columns) if c.coefficient(e)} for e in exps]
    rhs = [-target.coefficient(e) for e in exps]
    sol = solve_system(rows, len(unknowns), rhs)
    if sol is NO_SOLUTION:
        return None
    out: dict = {i: {} for i in range(m)}
    for k, (i, mono) in enumerate(unknowns):
        c = sol.get(k, Fraction(0))
        if c:
            out[i][mono] = c
    return out


# -- constant-term identities --------------------------------------------------------------

def _const(series_or_scalar):
    if isinstance(series_or_scalar, PuiseuxSeries):
        return series_or_scalar.coefficient(Fraction(0))
    return series_or_scalar


def constant_term_identities(V: TruncatedVOA, U: VertexModule | None, g, h, cutoff) -> list:
    """All applicable identities for basis a of V, u of U with wt a + deg u <= cutoff.

    Returns [(a, u, identity id, ok)].
    """
    U = U or V.adjoint
    cutoff = Fraction(cutoff)
    rows = []
    for ai in range(V.dim):
        a = {ai: Fraction(1)}
        wa = V.weights[ai]
        tw = twist_pair(V, V.adjoint, a, g, h)
        for ui in range(U.dim):
            if wa + U.degree(ui) > cutoff:
                continue
            u = {ui: Fraction(1)}
            for ident, lhs, rhs in _identities(V, U, a, u, g, tw):
                rows.append((ai, ui, ident, not vadd(lhs, rhs, -1)))
    return rows


def _identities(V, U, a, u, g, tw: TwistPair):
    def br(n):
        return bracket_apply(U, a, n, u)

    def bsum(coeff, start, step):
        out: Vector = {}
        for f, vec in _bracket_sum(U, a, u, coeff, start, step):
            viadd(out, vec, f)
        return out

    if tw.trivial:
        e = {k: eisenstein(2 * k, 1).coefficient(Fraction(0)) for k in range(1, 16)}
        lhs = vadd(br(-1), bsum(lambda k: -e[k], 1, lambda k: 2 * k - 1))
        rhs = vadd(residue_product("star_left", V, a, u, g, U), br(0), Fraction(-1, 2))
        yield "i-a", lhs, rhs
        lhs = vadd(br(-2), bsum(lambda k: (2 * k - 1) * e[k], 2, lambda k: 2 * k - 2))
        rhs = vadd(residue_product("circ", V, a, u, g, U), br(0), Fraction(1, 12))
        yield "i-b", lhs, rhs
        return
    lhs = bsum(lambda k: _const(q_series_Q(k, tw, 1)), 0, lambda k: k - 1)
    if tw.j != 0:
        yield "ii-a", lhs, vscale(residue_product("circ", V, a, u, g, U), -1)
    else:
        lam = tw.lam
        rhs = vadd(vscale(residue_product("star_left", V, a, u, g, U), -1), br(0), 1 / (1 - lam))
        yield "ii-b", lhs, rhs


# -- C^A_[2,0] quotient ----------------------------------------------------------------------

def c2a_generators(V: TruncatedVOA, U: VertexModule, group, N) -> list:
    """a_[-2]u (a in V) and b_[0]u (b in V^A) with top degree <= N."""
    N = Fraction(N)
    gens = []
    inv = [i for i in range(V.dim) if all(
        not vadd(V.automorphisms[x].apply({i: Fraction(1)}), {i: Fraction(1)}, -1) for x in group)]
    inv_set = set(inv)
    for ai in range(V.dim):
        wa = V.weights[ai]
        for ui in range(U.dim):
            d = U.degree(ui)
            u = {ui: Fraction(1)}
            if wa + d + 1 <= N:
                x = bracket_apply(U, {ai: Fraction(1)}, -2, u)
                if x:
                    gens.append(x)
            if ai in inv_set and wa + d - 1 <= N:
                x = bracket_apply(U, {ai: Fraction(1)}, 0, u)
                if x:
                    gens.append(x)
    return gens


def c2a_quotient_dims(V: TruncatedVOA, U: VertexModule | None = None, group=("theta",),
                      cutoffs=(4, 5, 6), level=None) -> list:
    """[(N, dim of the image of degree <= level in U / C^A_[2,0](U) truncated at N)]."""
    U = U or V.adjoint
    level = Fraction(min(cutoffs) - 1 if level is None else level)
    out = []
    for N in cutoffs:
        eb = EchelonBasis(_priority(U))
        for x in c2a_generators(V, U, group, N):
            eb.add(x)
        reps = [i for i in range(U.dim) if U.degree(i) <= level and i not in eb.rows]
        out.append((N, len(reps)))
    return out


# -- modular checks --------------------------------------------------------------------------

def sector_act(sector: tuple, gamma: ModularMatrix) -> tuple:
    """(g, h) gamma = (g^a h^c, g^b h^d) for g, h in {1, theta}."""
    g, h = (0 if x is None else 1 for x in sector)
    ng = (g * gamma.a + h * gamma.f) % 2
    nh = (g * gamma.b + h * gamma.d) % 2
    return ("theta" if ng else None, "theta" if nh else None)


class ModularFitError(ValueError):
    pass


def modular_sector_check(source: dict, target: dict, gamma: ModularMatrix, taus: list, weight=0,
                         precision: int = 53, cond_bound: float = 1e12) -> float:
    """Fit tau -> (c tau + d)^{-k} S(gamma tau) into the span of the target family.

    source and target map labels to callables tau -> complex; returns the worst
    relative residual over the source functions.
    """
    tgt = list(target.values())
    if len(taus) < len(tgt):
        raise ModularFitError("fewer tau samples than target functions")
    A = np.array([[complex(f(t)) for f in tgt] for t in taus])
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_bound:
        raise ModularFitError(f"ill-conditioned fit (condition number {cond:.3g}); add tau samples")
    worst = 0.0
    for f in source.values():
        b = []
        for t in taus:
            t = mpmath.mpc(t)
            gt = gamma.act(t)
            b.append(complex((gamma.f * t + gamma.d) ** (-weight) * f(gt)))
        b = np.array(b)
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        worst = max(worst, float(res))
    return worst


def t_action_check(S: PuiseuxSeries) -> float:
    """S(tau + 1) = sum c_e e^{2 pi i e} q^e exactly: compare coefficients termwise.

    Returns the max deviation of e^{2 pi i e} from the exact root of unity used.
    """
    worst = 0.0
    for e in S.exponents():
        exact = to_complex(root_of_unity(e.numerator % e.denominator, e.denominator))
        numeric = complex(mpmath.exp(2j * mpmath.pi * e))
        worst = max(worst, abs(exact - numeric))
    return worst


def t_shifted(S: PuiseuxSeries) -> PuiseuxSeries:
    """Exact series of S(tau + 1)."""
    coeffs = {e: c * root_of_unity(e.numerator % e.denominator, e.denominator)
              for e, c in S.coeffs.items()}
    return PuiseuxSeries(coeffs, S.den, S.prec)
