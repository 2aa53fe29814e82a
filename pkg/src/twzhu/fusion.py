"""Top-level machinery: Hom spaces for fusion rules, zero modes of
intertwiners, fundamental h-stable modules and the decomposition of twisted
symmetric functionals on a bimodule into twisted traces.

Algebras and bimodules are given by structure tables over exact scalars.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from .exact import is_zero
from .linalg import (NO_SOLUTION, EchelonBasis, SparseMatrix, Vector, basis_vector, nullspace,
                     solve_system, vadd, viadd, vscale)
from .zhu import star
from .voa import IntertwinerData, VertexModule, invert_matrix


# -- tables ------------------------------------------------------------------------

@dataclass
class AlgebraTables:
    """Associative algebra with basis e_0..e_{n-1}: prod[(i, j)] = e_i e_j."""

    dim: int
    prod: dict
    unit: Vector

    def mul(self, x: Vector, y: Vector) -> Vector:
        out: Vector = {}
        for i, a in x.items():
            for j, b in y.items():
                viadd(out, self.prod.get((i, j), {}), a * b)
        return out

    def left(self, x: Vector) -> SparseMatrix:
        return SparseMatrix(self.dim, self.dim, {j: v for j in range(self.dim)
                                                 if (v := self.mul(x, {j: Fraction(1)}))})

    def right(self, x: Vector) -> SparseMatrix:
        return SparseMatrix(self.dim, self.dim, {j: v for j in range(self.dim)
                                                 if (v := self.mul({j: Fraction(1)}, x))})

    def power(self, x: Vector, k: int) -> Vector:
        out = dict(self.unit)
        for _ in range(k):
            out = self.mul(out, x)
        return out

    def check(self) -> list:
        bad = []
        n = self.dim
        for i, j, k in itertools.product(range(n), repeat=3):
            ei, ej, ek = ({i: Fraction(1)}, {j: Fraction(1)}, {k: Fraction(1)})
            if vadd(self.mul(self.mul(ei, ej), ek), self.mul(ei, self.mul(ej, ek)), -1):
                bad.append(("associativity", i, j, k))
        for i in range(n):
            ei = {i: Fraction(1)}
            if vadd(self.mul(self.unit, ei), ei, -1) or vadd(self.mul(ei, self.unit), ei, -1):
                bad.append(("unit", i))
        return bad


@dataclass
class BimoduleTables:
    """left[i] = (b -> e_i . b), right[i] = (b -> b . e_i) as dim x dim matrices."""

    dim: int
    left: list
    right: list

    def act_left(self, a: Vector, b: Vector) -> Vector:
        out: Vector = {}
        for i, c in a.items():
            viadd(out, self.left[i].apply(b), c)
        return out

    def act_right(self, b: Vector, a: Vector) -> Vector:
        out: Vector = {}
        for i, c in a.items():
            viadd(out, self.right[i].apply(b), c)
        return out

    def left_matrix(self, a: Vector) -> SparseMatrix:
        out = SparseMatrix(self.dim, self.dim)
        for i, c in a.items():
            out = out + self.left[i].scale(c)
        return out

    def right_matrix(self, a: Vector) -> SparseMatrix:
        out = SparseMatrix(self.dim, self.dim)
        for i, c in a.items():
            out = out + self.right[i].scale(c)
        return out

    def check(self, A: AlgebraTables) -> list:
        bad = []
        n = A.dim
        for i, j in itertools.product(range(n), repeat=2):
            eij = A.prod.get((i, j), {})
            if not (self.left[i] @ self.left[j] == self.left_matrix(eij)):
                bad.append(("left action", i, j))
            if not (self.right[j] @ self.right[i] == self.right_matrix(eij)):
                bad.append(("right action", i, j))
            if not (self.left[i] @ self.right[j] == self.right[j] @ self.left[i]):
                bad.append(("commuting actions", i, j))
        return bad


def matrix_algebra(mats: list) -> AlgebraTables:
    """Algebra spanned by the given square matrices (lists of rows), closed under product."""
    flat = [_flatten(m) for m in mats]
    n = len(mats[0])
    prod = {}
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            c = _coords(flat, _flatten(_matmul(a, b)))
            if c is None:
                raise ValueError("span of the matrices is not closed under products")
            prod[(i, j)] = c
    ident = [[Fraction(int(r == c)) for c in range(n)] for r in range(n)]
    unit = _coords(flat, _flatten(ident))
    if unit is None:
        raise ValueError("the identity matrix is not in the span")
    return AlgebraTables(len(mats), prod, unit)


def regular_bimodule(A: AlgebraTables, twist: SparseMatrix | None = None) -> BimoduleTables:
    """B = A with b . a = b * twist(a) (twist = None: the regular bimodule)."""
    left = [A.left({i: Fraction(1)}) for i in range(A.dim)]
    right = []
    for i in range(A.dim):
        a = {i: Fraction(1)} if twist is None else twist.column(i)
        right.append(A.right(a))
    return BimoduleTables(A.dim, left, right)


def _flatten(m):
    return {k: Fraction(x) if isinstance(x, int) else x
            for k, x in enumerate(v for row in m for v in row) if x}


def _matmul(a, b):
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]


def _coords(basis: list, vec: Vector):
    """Coefficients x with sum x_k basis[k] = vec, or None."""
    rows: dict = {}
    for k, v in enumerate(basis):
        for r, c in v.items():
            rows.setdefault(r, {})[k] = c
    keys = sorted(set(rows) | set(vec))
    sol = solve_system([rows.get(r, {}) for r in keys], len(basis), [vec.get(r, Fraction(0)) for r in keys])
    if sol is NO_SOLUTION:
        return None
    return sol


@dataclass
class TopLevelModule:
    """Left module over an AlgebraTables: action[i] is the matrix of e_i."""

    dim: int
    action: list
    omega: Fraction | None = None
    psi: SparseMatrix | None = None

    def matrix(self, a: Vector) -> SparseMatrix:
        out = SparseMatrix(self.dim, self.dim)
        for i, c in a.items():
            out = out + self.action[i].scale(c)
        return out

    def check(self, A: AlgebraTables, omega_element: Vector | None = None) -> list:
        bad = []
        for (i, j), v in A.prod.items():
            if not (self.action[i] @ self.action[j] == self.matrix(v)):
                bad.append(("action", i, j))
        if omega_element is not None and self.omega is not None:
            if not (self.matrix(omega_element) == SparseMatrix.identity(self.dim, self.omega)):
                bad.append(("omega scalar",))
        return bad


class IncompleteTablesError(ValueError):
    pass


def _table_coords(zq, vec: Vector, reps: list) -> Vector:
    pos = {r: k for k, r in enumerate(reps)}
    out = {}
    for k, c in vec.items():
        r = zq.quotient.representatives[k]
        if r not in pos:
            raise IncompleteTablesError(f"product leaves the reported range at {zq.U.label_str(r)}")
        out[pos[r]] = c
    return out


def algebra_from_zhu(zq) -> AlgebraTables:
    """Structure tables of A_g(V) on its representatives; raises if the truncation is not closed."""
    A = zq.algebra
    reps = A.representatives
    prod = {}
    for i, ai in enumerate(reps):
        for j, aj in enumerate(reps):
            if (ai, aj) not in A.left:
                if A.V.weights[ai] + A.U.degree(aj) > A.cutoff:
                    raise IncompleteTablesError(f"product {A.U.label_str(ai)} * {A.U.label_str(aj)} beyond the cutoff")
                A.left[(ai, aj)] = A.project(star(A, {ai: Fraction(1)}, {aj: Fraction(1)}, "left"))
            prod[(i, j)] = _table_coords(A, A.left[(ai, aj)], reps)
    unit = _table_coords(A, A.project({A.V.vacuum: Fraction(1)}), reps)
    return AlgebraTables(len(reps), prod, unit)


def bimodule_from_zhu(zq) -> BimoduleTables:
    """Left and right actions of A_g(V) on A_g(U) as matrices on the representatives."""
    areps, reps = zq.algebra.representatives, zq.representatives
    n = len(reps)
    left, right = [], []
    for ai in areps:
        lc, rc = {}, {}
        for k, ui in enumerate(reps):
            if (ai, ui) not in zq.left:
                raise IncompleteTablesError(f"action of {zq.V.label_str(ai)} on {zq.U.label_str(ui)} beyond the cutoff")
            if (v := _table_coords(zq, zq.left[(ai, ui)], reps)):
                lc[k] = v
            if (v := _table_coords(zq, zq.right[(ai, ui)], reps)):
                rc[k] = v
        left.append(SparseMatrix(n, n, lc))
        right.append(SparseMatrix(n, n, rc))
    return BimoduleTables(n, left, right)


def top_level_module(W: VertexModule, zq, stabilizer: str | None = None) -> TopLevelModule:
    """A_g(V) acting on W(0) through zero modes of the algebra representatives."""
    top = W.indices_at(W.lowest)
    action = [W.zero_mode({ai: Fraction(1)}).restrict(top, top) for ai in zq.algebra.representatives]
    psi = None
    if stabilizer is not None:
        psi = W.stabilizers[stabilizer].restrict(top, top)
    return TopLevelModule(len(top), action, W.lowest, psi)


# -- fusion rules --------------------------------------------------------------------

def fusion_dimension(A: AlgebraTables, B: BimoduleTables, W1: TopLevelModule, W2: TopLevelModule):
    """dim Hom_A(B (x)_A W1, W2) and a basis of solutions {b: matrix W2 x W1}."""
    nb, n1, n2 = B.dim, W1.dim, W2.dim
    if n2 == 0 or n1 == 0 or nb == 0:
        return 0, []

    def var(b, w1, w2):
        return (b * n1 + w1) * n2 + w2

    rows = []
    for i in range(A.dim):
        for b in range(nb):
            lb = B.left[i].column(b)
            rb = B.right[i].column(b)
            for w1 in range(n1):
                # f(e_i.b, w1) - pi2(e_i) f(b, w1) = 0
                eq: dict = {}
                for bb, c in lb.items():
                    for w2 in range(n2):
                        eq.setdefault(w2, {})
                        viadd(eq[w2], {var(bb, w1, w2): c})
                for w2p in range(n2):
                    for w2, c in W2.action[i].column(w2p).items():
                        eq.setdefault(w2, {})
                        viadd(eq[w2], {var(b, w1, w2p): -c})
                rows.extend(r for r in eq.values() if r)
                # f(b.e_i, w1) - f(b, pi1(e_i) w1) = 0
                eq = {}
                for bb, c in rb.items():
                    for w2 in range(n2):
                        eq.setdefault(w2, {})
                        viadd(eq[w2], {var(bb, w1, w2): c})
                for w1p, c in W1.action[i].column(w1).items():
                    for w2 in range(n2):
                        eq.setdefault(w2, {})
                        viadd(eq[w2], {var(b, w1p, w2): -c})
                rows.extend(r for r in eq.values() if r)
    nv = nb * n1 * n2
    m = SparseMatrix.from_entries(len(rows), nv, ((r, c, v) for r, row in enumerate(rows)
                                                  for c, v in row.items()))
    sols = nullspace(m)
    maps = []
    for x in sols:
        f = {}
        for b in range(nb):
            f[b] = SparseMatrix.from_entries(n2, n1, ((w2, w1, x[var(b, w1, w2)])
                                                      for w1 in range(n1) for w2 in range(n2)
                                                      if x.get(var(b, w1, w2))))
        maps.append(f)
    return len(sols), maps


# -- zero modes ------------------------------------------------------------------------

class ZeroModeError(ValueError):
    pass


def top_indices(W: VertexModule) -> list:
    return W.indices_at(W.lowest)


def _top_block(I: IntertwinerData, u: Vector, rows: list, cols: list) -> SparseMatrix:
    """o^I(u) = u_(deg u - 1) restricted to W1(0) -> W2(0), in top-index coordinates."""
    return I.grade_preserving(u).restrict(rows, cols)


@dataclass
class ZeroMode:
    I: IntertwinerData
    rows: list
    cols: list
    matrices: dict = field(default_factory=dict)

    def __call__(self, u: Vector) -> SparseMatrix:
        return _top_block(self.I, u, self.rows, self.cols)


def zero_mode(I: IntertwinerData, zq=None, check: bool = True, max_total=None) -> ZeroMode:
    """o^I on A_g(U) representatives, restricted to the top levels.

    With zq (the ZhuQuotient of U) and check set, the relations
    o^I(O_g(U)) = 0, o^I(u*a) = o^I(u)o(a) and o^I(a*u) = o(a)o^I(u) are
    verified; a violation raises ZeroModeError naming (u, a, w).
    """
    from .zhu import residue_product
    rows, cols = top_indices(I.W2), top_indices(I.W1)
    zm = ZeroMode(I, rows, cols)
    if zq is None:
        return zm
    for ui in zq.representatives:
        zm.matrices[ui] = zm({ui: Fraction(1)})
    if not check:
        return zm
    V, U = zq.V, zq.U
    bound = zq.cutoff if max_total is None else Fraction(max_total)
    for x in zq.generators:
        if max(U.degree(i) for i in x) > bound:
            continue
        m = zm(x)
        if not m.is_zero():
            r, c, _ = next(m.entries())
            raise ZeroModeError(f"o^I(O_g(U)) != 0 at generator {sorted(x)[:3]}, w = {I.W1.label_str(cols[c])}")
    for ai in zq.algebra.representatives:
        a = {ai: Fraction(1)}
        oa1 = I.W1.zero_mode(a).restrict(cols, cols)
        oa2 = I.W2.zero_mode(a).restrict(rows, rows)
        for ui in zq.representatives:
            if V.weights[ai] + U.degree(ui) > bound:
                continue
            u = {ui: Fraction(1)}
            ou = zm(u)
            right = zm(residue_product("star_right", V, a, u, zq.g, U))
            left = zm(residue_product("star_left", V, a, u, zq.g, U))
            for name, x, y in (("o(u*a) = o(u)o(a)", right, ou @ oa1),
                               ("o(a*u) = o(a)o(u)", left, oa2 @ ou)):
                diff = x - y
                if not diff.is_zero():
                    _, c, _ = next(diff.entries())
                    raise ZeroModeError(f"{name} fails: u={U.label_str(ui)}, a={V.label_str(ai)}, "
                                        f"w={I.W1.label_str(cols[c])}")
    return zm


# -- fundamental h-stable modules -------------------------------------------------------

class StableModuleError(ValueError):
    pass


@dataclass
class StableModule:
    """Direct sum of an h-orbit of modules with block stabilizer psi."""

    dims: list
    psi: SparseMatrix
    isomorphisms: list

    @property
    def dim(self):
        return sum(self.dims)


def _normalize(m: SparseMatrix) -> SparseMatrix:
    """Scale so the smallest-index nonzero entry (column-major) is 1."""
    entries = sorted(((c, r, v) for r, c, v in m.entries()))
    if not entries:
        return m
    return m.scale(1 / entries[0][2])


def _intertwining_maps(gens, rep_src, rep_dst, hgen, n_src, n_dst, allowed=None):
    """Matrices X: src -> dst with X rep_src(x) = (sum c rep_dst(x')) X for x' in h x.

    allowed(r, c) restricts the possibly nonzero entries (e.g. to equal degree).
    """
    pairs = [(r, c) for r in range(n_dst) for c in range(n_src) if allowed is None or allowed(r, c)]
    var = {p: k for k, p in enumerate(pairs)}
    by_col: dict = {}
    by_row: dict = {}
    for r, c in pairs:
        by_col.setdefault(c, []).append(r)
        by_row.setdefault(r, []).append(c)
    rows = []
    for x in gens:
        ms = rep_src(x)
        md = SparseMatrix(n_dst, n_dst)
        for coef, y in hgen(x):
            md = md + rep_dst(y).scale(coef)
        # (X ms)[r, c] = sum_k X[r, k] ms[k, c];  (md X)[r, c] = sum_k md[r, k] X[k, c]
        eqs: dict = {}
        for k, c, v in ms.entries():
            for r in by_col.get(k, ()):
                viadd(eqs.setdefault((r, c), {}), {var[(r, k)]: v})
        for r, k, v in md.entries():
            for c in by_row.get(k, ()):
                viadd(eqs.setdefault((r, c), {}), {var[(k, c)]: -v})
        rows.extend(e for e in eqs.values() if e)
    m = SparseMatrix.from_entries(len(rows), len(pairs),
                                  ((i, c, v) for i, row in enumerate(rows) for c, v in row.items()))
    return [SparseMatrix.from_entries(n_dst, n_src, (pairs[k] + (v,) for k, v in s.items()))
            for s in nullspace(m)]


def _invertible_combination(cands: list):
    if not cands:
        return None
    n = cands[0].rows
    for coeffs in itertools.chain([(1,) + (0,) * (len(cands) - 1)],
                                  itertools.product(range(1, 4), repeat=len(cands))):
        m = SparseMatrix(n, cands[0].cols)
        for c, x in zip(coeffs, cands):
            m = m + x.scale(Fraction(c))
        try:
            invert_matrix(m)
            return m
        except ValueError:
            continue
    return None


def fundamental_stable_module(reps: list, dims: list, generators: list, hgen, allowed=None) -> StableModule:
    """W-bar = W^0 + ... + W^{n-1} with psi_i: W^{i+1} -> W^i solving
    psi_i rep_{i+1}(x) = rep_i(h x) psi_i (indices mod n).

    reps[i](x) gives the matrix of generator x on W^i; hgen(x) lists (c, x')
    with h x = sum c x'. allowed(i, r, c) optionally restricts entries of psi_i.
    """
    n = len(reps)
    isos = []
    for i in range(n):
        j = (i + 1) % n
        mask = None if allowed is None else (lambda r, c, i=i: allowed(i, r, c))
        cands = _intertwining_maps(generators, reps[j], reps[i], hgen, dims[j], dims[i], mask)
        m = _invertible_combination(cands)
        if m is None:
            raise StableModuleError(f"no isomorphism W^{j} -> W^{i} o h within the cutoff")
        isos.append(_normalize(m))
    offs = [sum(dims[:i]) for i in range(n)]
    total = sum(dims)
    entries = []
    for i, m in enumerate(isos):
        j = (i + 1) % n
        for r, c, v in m.entries():
            entries.append((offs[i] + r, offs[j] + c, v))
    psi = SparseMatrix.from_entries(total, total, entries)
    return StableModule(list(dims), psi, isos)


def vertex_representation(W: VertexModule, max_weight=1, mode_span=None):
    """(generators, rep, hgen factory) for modes a_n of V basis vectors of weight <= max_weight.

    Modes range over the coset of a with |n| <= mode_span (default: the module cutoff).
    """
    V = W.voa
    span = int(W.cutoff) + 1 if mode_span is None else mode_span
    gens = []
    for i in V.indices_upto(max_weight):
        if i == V.vacuum:
            continue
        c = W.mode_coset(i)
        for k in range(-span - 1, span + 1):
            if abs(c + k) <= span:
                gens.append((i, c + k))

    def rep(x):
        return W.mode(x[0], x[1])

    def hgen_for(h):
        def hg(x):
            col = V.automorphisms[h].column(x[0])
            return [(c, (j, x[1])) for j, c in col.items()]
        return hg

    return gens, rep, hgen_for


def solve_module_stabilizer(W: VertexModule, h: str, max_weight=1, mode_span=None) -> SparseMatrix:
    """psi(h) on W with Y(ha) psi = psi Y(a), degree preserving and normalized; raises when none exists."""
    gens, rep, hgen_for = vertex_representation(W, max_weight, mode_span)
    st = fundamental_stable_module([rep], [W.dim], gens, hgen_for(h),
                                   allowed=lambda i, r, c: W.degree(r) == W.degree(c))
    return st.psi


# -- decomposition of twisted symmetric functionals ------------------------------------

class HypothesisError(ValueError):
    pass


@dataclass
class Block:
    module: list          # action matrices of A's basis on W-bar
    psi: SparseMatrix
    I: dict               # B basis index -> matrix on W-bar
    C: Fraction
    s: int
    t_over_s: int
    gamma: Vector
    constants: list       # the C_j of the t/s copies before absorption into I

    @property
    def dim(self):
        return self.psi.rows


@dataclass
class DecompositionResult:
    blocks: list

    def evaluate(self, b: Vector):
        out = Fraction(0)
        for blk in self.blocks:
            m = SparseMatrix(blk.dim, blk.dim)
            for i, c in b.items():
                if i in blk.I:
                    m = m + blk.I[i].scale(c)
            out = out + blk.C * (m @ invert_matrix(blk.psi)).trace()
        return out


def _matrix_power(m: SparseMatrix, k: int) -> SparseMatrix:
    out = SparseMatrix.identity(m.rows)
    base = m if k >= 0 else invert_matrix(m)
    for _ in range(abs(k)):
        out = out @ base
    return out


def _order(m: SparseMatrix, bound: int = 64) -> int:
    ident = SparseMatrix.identity(m.rows)
    p = m
    for k in range(1, bound + 1):
        if p == ident:
            return k
        p = p @ m
    raise ValueError("automorphism of infinite or large order")


def _F(F: Vector, b: Vector):
    return sum((F.get(i, 0) * c for i, c in b.items()), Fraction(0))


def is_semisimple(A: AlgebraTables) -> bool:
    """Nondegeneracy of the trace form tr(L_x L_y) of the regular representation."""
    Ls = [A.left({i: Fraction(1)}) for i in range(A.dim)]
    eb = EchelonBasis()
    for i in range(A.dim):
        eb.add({j: (Ls[i] @ Ls[j]).trace() for j in range(A.dim) if (Ls[i] @ Ls[j]).trace()})
    return len(eb) == A.dim


def check_hypotheses(A, hA, B, phi, F, omega, r, N=None) -> list:
    """Violations of compatibility, the omega condition and the twisted symmetry."""
    bad = []
    n = A.dim
    N = n if N is None else N
    h_inv = invert_matrix(hA)
    for i in range(n):
        ha = hA.column(i)
        if not (phi @ B.left[i] == B.left_matrix(ha) @ phi):
            bad.append(("phi(h)(a.b) = ha.phi(h)b", i))
        if not (phi @ B.right[i] == B.right_matrix(ha) @ phi):
            bad.append(("phi(h)(b.a) = phi(h)b.ha", i))
    om = vadd(omega, A.unit, -r)
    omN = A.power(om, N)
    Lom = B.left_matrix(omN)
    for b in range(B.dim):
        if _F(F, Lom.column(b)):
            bad.append(("F((omega - r)^N . b) = 0", b))
    for b in range(B.dim):
        if _F(F, phi.column(b)) != F.get(b, 0):
            bad.append(("F(phi(h) b) = F(b)", b))
    for i in range(n):
        hinv_a = h_inv.column(i)
        R = B.right_matrix(hinv_a)
        for b in range(B.dim):
            if _F(F, B.left[i].column(b)) != _F(F, R.column(b)):
                bad.append(("F(a.b) = F(b.h^{-1}a)", i, b))
    return bad


def _center(A: AlgebraTables) -> list:
    n = A.dim
    rows = []
    for j in range(n):
        ej = {j: Fraction(1)}
        # sum_i x_i (e_i e_j - e_j e_i) = 0
        eq: dict = {}
        for i in range(n):
            d = vadd(A.prod.get((i, j), {}), A.prod.get((j, i), {}), -1)
            for k, c in d.items():
                eq.setdefault(k, {})[i] = c
        rows.extend(eq.values())
        del ej
    m = SparseMatrix.from_entries(len(rows), n, ((r, c, v) for r, row in enumerate(rows) for c, v in row.items()))
    return nullspace(m)


def _min_poly(A: AlgebraTables, z: Vector, unit: Vector):
    """Coefficients [c_0..c_k] (monic) of the minimal polynomial of z in A."""
    powers = [dict(unit)]
    while True:
        nxt = A.mul(powers[-1], z)
        coeffs = _coords(powers, nxt)
        if coeffs is not None:
            k = len(powers)
            return [-coeffs.get(i, Fraction(0)) for i in range(k)] + [Fraction(1)]
        powers.append(nxt)
        if len(powers) > A.dim + 1:
            raise ValueError("minimal polynomial search overflow")


def _rational_roots(poly: list) -> list:
    x = sympy.Symbol("x")
    if any(not isinstance(c, (int, Fraction)) for c in poly):
        raise NotImplementedError("minimal polynomials with non-rational coefficients")
    p = sympy.Poly([sympy.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else c
                    for c in reversed(poly)], x)
    roots = []
    for fac, mult in sympy.factor_list(p)[1]:
        if fac.degree() == 1:
            a, b = fac.all_coeffs()
            root = -sympy.Rational(b) / sympy.Rational(a)
            roots.append((Fraction(int(root.p), int(root.q)), mult))
        else:
            roots.append((None, mult))
    return roots


def central_idempotents(A: AlgebraTables) -> list:
    """Primitive central idempotents (the center must split over the rationals)."""
    Z = _center(A)
    k = len(Z)
    if k == 1:
        return [dict(A.unit)]
    for coeffs in itertools.product(range(1, 6), repeat=k):
        z: Vector = {}
        for c, v in zip(coeffs, Z):
            viadd(z, v, c)
        poly = _min_poly(A, z, A.unit)
        if len(poly) - 1 < k:
            continue
        roots = _rational_roots(poly)
        if any(r is None for r, _ in roots):
            raise NotImplementedError("center does not split over the rationals")
        mus = [r for r, _ in roots]
        idem = []
        for i, mu in enumerate(mus):
            e = dict(A.unit)
            for j, nu in enumerate(mus):
                if j != i:
                    e = vscale(A.mul(e, vadd(z, A.unit, -nu)), 1 / (mu - nu))
            idem.append(e)
        return idem
    raise ValueError("no generating central element found")


def _span_basis(vectors: list) -> list:
    eb = EchelonBasis()
    out = []
    for v in vectors:
        if eb.add(v):
            out.append(v)
    return out


def _minimal_left_ideal(A: AlgebraTables, e: Vector) -> list:
    """Basis of a minimal left ideal of the simple component A e."""
    comp = _span_basis([A.mul({i: Fraction(1)}, e) for i in range(A.dim)])
    n = len(comp)
    d = int(round(n ** 0.5))
    if d * d != n:
        raise NotImplementedError("simple component is not a full matrix algebra over Q")
    if d == 1:
        return comp

    def ideal(y):
        return _span_basis([A.mul(b, y) for b in comp])

    queue = list(comp) + [A.mul(x, y) for x in comp for y in comp]
    seen = 0
    while queue and seen < 500:
        y = queue.pop(0)
        seen += 1
        if not y:
            continue
        J = ideal(y)
        if len(J) == d:
            return J
        if len(J) < n:
            queue.extend(A.mul(x, y) for x in comp)
        for mu, _ in _rational_roots(_min_poly(A, y, e)):
            if mu is not None:
                z = vadd(y, e, -mu)
                if z and len(ideal(z)) < len(J) + (0 if len(J) < n else 0) or len(J) == n:
                    queue.insert(0, z)
    raise NotImplementedError("no minimal left ideal found (eigenvalues not rational)")


def _left_module(A: AlgebraTables, J: list) -> list:
    """Matrices of e_i acting on the left ideal J (in J's basis)."""
    out = []
    for i in range(A.dim):
        cols = {}
        for k, v in enumerate(J):
            c = _coords(J, A.mul({i: Fraction(1)}, v))
            if c is None:
                raise ValueError("not a left ideal")
            if c:
                cols[k] = c
        out.append(SparseMatrix(len(J), len(J), cols))
    return out


def _image_basis(P: SparseMatrix) -> list:
    return _span_basis([P.column(c) for c in range(P.cols) if P.column(c)])


def averaging_projector(phi: SparseMatrix, sigma: SparseMatrix, order: int) -> SparseMatrix:
    """rho = (1/|h|) sum_i phi^{-i} sigma phi^i."""
    out = SparseMatrix(phi.rows, phi.cols)
    inv = invert_matrix(phi)
    for i in range(order):
        out = out + _matrix_power(inv, i) @ sigma @ _matrix_power(phi, i)
    return out.scale(Fraction(1, order))


def decompose_trace_functional(A: AlgebraTables, hA: SparseMatrix, B: BimoduleTables, phi: SparseMatrix,
                               F: Vector, omega: Vector, r) -> DecompositionResult:
    """F(b) = sum_j C_j tr_{W^j} I_j(b) psi_j^{-1} over orbits of simple components."""
    bad = check_hypotheses(A, hA, B, phi, F, omega, r)
    if bad:
        raise HypothesisError(f"hypothesis violated: {bad[0]}")
    if not is_semisimple(A):
        raise HypothesisError("A is not semisimple (degenerate trace form)")
    if not any(F.values()):
        return DecompositionResult([])
    h_inv = invert_matrix(hA)
    order = _lcm(_order(hA), _order(phi))
    idem = central_idempotents(A)
    # permutation of components
    perm = {}
    for i, e in enumerate(idem):
        he = hA.apply(e)
        perm[i] = next(j for j, f in enumerate(idem) if not vadd(he, f, -1))
    done = set()
    blocks = []
    for i0 in range(len(idem)):
        if i0 in done:
            continue
        orbit = [i0]
        while perm[orbit[-1]] != i0:
            orbit.append(perm[orbit[-1]])
        done.update(orbit)
        blk = _orbit_block(A, hA, h_inv, B, phi, F, omega, r, idem, orbit, order)
        if blk is not None:
            blocks.append(blk)
    result = DecompositionResult(blocks)
    _verify(A, hA, B, phi, F, result)
    return result


def _lcm(a, b):
    from math import gcd
    return a * b // gcd(a, b)


def _orbit_block(A, hA, h_inv, B, phi, F, omega, r, idem, orbit, order):
    s = len(orbit)
    e1 = idem[orbit[0]]
    comps = [idem[i] for i in orbit]

    def component_projector(e):
        return B.left_matrix(e) @ B.right_matrix(h_inv.apply(e))

    projs = [component_projector(e) for e in comps]
    B0 = _image_basis(projs[0])
    if not B0 or all(not _F(F, P.apply(v)) for P in projs for v in _image_basis(P)):
        return None
    J = _left_module(A, _minimal_left_ideal(A, e1))
    d = J[0].rows
    A1 = _span_basis([A.mul({i: Fraction(1)}, e1) for i in range(A.dim)])
    if len(B0) % (d * d):
        raise HypothesisError("component of B is not a sum of copies of A_1")
    t_over_s = len(B0) // (d * d)
    # beta with a . beta = beta . h^{-1} a for a in A_1
    rows = []
    for a in A1:
        La, Rb = B.left_matrix(a), B.right_matrix(h_inv.apply(a))
        eqs: dict = {}
        for k, v in enumerate(B0):
            diff = vadd(La.apply(v), Rb.apply(v), -1)
            for rr, c in diff.items():
                eqs.setdefault(rr, {})[k] = c
        rows.extend(eqs.values())
    m = SparseMatrix.from_entries(len(rows), len(B0), ((i, c, v) for i, row in enumerate(rows) for c, v in row.items()))
    betas = []
    for x in nullspace(m):
        bvec: Vector = {}
        for k, c in x.items():
            viadd(bvec, B0[k], c)
        betas.append(bvec)
    if len(betas) != t_over_s:
        raise HypothesisError("unexpected number of bimodule summands")
    # W-bar = sum_k h^k o W, pi(x) on block k = pi_1(h^{-k}(e_k x))
    total = s * d
    hk_inv = [_matrix_power(h_inv, k) for k in range(s)]

    def pibar(x: Vector) -> SparseMatrix:
        ent = []
        for k in range(s):
            xk = hk_inv[k].apply(A.mul(comps[k], x))
            mk = SparseMatrix(d, d)
            for i, c in xk.items():
                mk = mk + J[i].scale(c)
            ent.extend((k * d + rr, k * d + cc, v) for rr, cc, v in mk.entries())
        return SparseMatrix.from_entries(total, total, ent)

    # Skolem-Noether: h^s(a) gamma = gamma a on A_1
    hs = _matrix_power(hA, s)
    rows = []
    for a in A1:
        hsa = hs.apply(a)
        eqs = {}
        for k, g in enumerate(A1):
            diff = vadd(A.mul(hsa, g), A.mul(g, a), -1)
            for rr, c in diff.items():
                eqs.setdefault(rr, {})[k] = c
        rows.extend(eqs.values())
    m = SparseMatrix.from_entries(len(rows), len(A1), ((i, c, v) for i, row in enumerate(rows) for c, v in row.items()))
    gamma = None
    for x in nullspace(m):
        g: Vector = {}
        for k, c in x.items():
            viadd(g, A1[k], c)
        gm = SparseMatrix(d, d)
        for i, c in g.items():
            gm = gm + J[i].scale(c)
        try:
            invert_matrix(gm)
        except ValueError:
            continue
        gamma = g
        break
    if gamma is None:
        raise HypothesisError("no invertible Skolem-Noether element found")
    gm = SparseMatrix(d, d)
    for i, c in gamma.items():
        gm = gm + J[i].scale(c)
    ent = []
    for k in range(s - 1):
        ent.extend(((k + 1) * d + j, k * d + j, Fraction(1)) for j in range(d))
    ent.extend((rr, (s - 1) * d + cc, v) for rr, cc, v in gm.entries())
    psi = _normalize(SparseMatrix.from_entries(total, total, ent))
    psi_inv = invert_matrix(psi)
    # C_j from G_j(a) = F(a . beta_j) = C_j tr_W(a)
    constants = []
    for beta in betas:
        Cj = _F(F, B.act_left(e1, beta)) / d
        for a in A1:
            tr = sum((J[i].trace() * c for i, c in a.items()), Fraction(0))
            if _F(F, B.act_left(a, beta)) != Cj * tr:
                raise HypothesisError("restricted functional is not a trace")
        constants.append(Cj)

    # I_0 on B^(0): b = sum_j a_j . beta_j  ->  sum_j C_j pibar(a_j) psi
    gens = [B.act_left(a, beta) for beta in betas for a in A1]

    def I0(b: Vector) -> SparseMatrix:
        coeffs = _coords(gens, b)
        if coeffs is None:
            raise HypothesisError("B^(0) is not generated by the invariant elements")
        a_parts = [dict() for _ in betas]
        for k, c in coeffs.items():
            j, ai = divmod(k, len(A1))
            viadd(a_parts[j], A1[ai], c)
        out = SparseMatrix(total, total)
        for Cj, aj in zip(constants, a_parts):
            if aj:
                out = out + pibar(aj).scale(Cj)
        return out @ psi

    def I0_tilde(b: Vector) -> SparseMatrix:
        reps = order // s
        out = SparseMatrix(total, total)
        for i in range(reps):
            bi = _matrix_power(phi, i * s).apply(b)
            out = out + _matrix_power(psi, -i * s) @ I0(bi) @ _matrix_power(psi, i * s)
        return out.scale(Fraction(s, order))

    phi_inv = invert_matrix(phi)
    I = {}
    for bidx in range(B.dim):
        bvec = {bidx: Fraction(1)}
        out = SparseMatrix(total, total)
        for k in range(s):
            part = projs[k].apply(bvec)
            if not part:
                continue
            back = _matrix_power(phi_inv, k).apply(part)
            out = out + _matrix_power(psi, k) @ I0_tilde(back) @ _matrix_power(psi, -k)
        if not out.is_zero():
            I[bidx] = out
    del psi_inv
    module = [pibar({i: Fraction(1)}) for i in range(A.dim)]
    return Block(module, psi, I, Fraction(1), s, t_over_s, gamma, constants)


def _verify(A, hA, B, phi, F, result: DecompositionResult):
    """Reconstruction, h-stability and equivariance of each block; raises on failure."""
    for b in range(B.dim):
        if result.evaluate({b: Fraction(1)}) != F.get(b, 0):
            raise AssertionError(f"reconstruction fails at basis vector {b}")
    for blk in result.blocks:
        psi, psi_inv = blk.psi, invert_matrix(blk.psi)
        zero = SparseMatrix(blk.dim, blk.dim)

        def I(v):
            out = zero
            for i, c in v.items():
                if i in blk.I:
                    out = out + blk.I[i].scale(c)
            return out

        def pi(v):
            out = zero
            for i, c in v.items():
                out = out + blk.module[i].scale(c)
            return out

        for i in range(A.dim):
            if not (pi(hA.column(i)) == psi @ blk.module[i] @ psi_inv):
                raise AssertionError("psi does not stabilize the module")
        for b in range(B.dim):
            bv = {b: Fraction(1)}
            if not (psi @ I(bv) == I(phi.apply(bv)) @ psi):
                raise AssertionError("I is not psi-equivariant")
            for i in range(A.dim):
                if not (I(B.left[i].apply(bv)) == blk.module[i] @ I(bv)):
                    raise AssertionError("I is not a left A-map")
                if not (I(B.right[i].apply(bv)) == I(bv) @ blk.module[i]):
                    raise AssertionError("I is not a right A-map")


def valid_functionals(A, hA, B, phi, omega, r) -> list:
    """Basis of all F satisfying the twisted symmetry and the omega condition."""
    n = A.dim
    h_inv = invert_matrix(hA)
    rows = []
    for b in range(B.dim):
        row = dict(phi.column(b))
        viadd(row, {b: Fraction(1)}, -1)
        rows.append(row)
    for i in range(n):
        R = B.right_matrix(h_inv.column(i))
        for b in range(B.dim):
            rows.append(vadd(B.left[i].column(b), R.column(b), -1))
    omN = A.power(vadd(omega, A.unit, -r), n)
    Lom = B.left_matrix(omN)
    for b in range(B.dim):
        rows.append(Lom.column(b))
    m = SparseMatrix.from_entries(len(rows), B.dim, ((i, c, v) for i, row in enumerate(rows) for c, v in row.items()))
    return nullspace(m)


def is_scalar(m: SparseMatrix) -> bool:
    if m.rows == 0:
        return True
    c = m.get(0, 0)
    return m == SparseMatrix.identity(m.rows, c) and not is_zero(c)


__all__ = [
    "AlgebraTables", "IncompleteTablesError", "algebra_from_zhu", "bimodule_from_zhu", "top_level_module", "BimoduleTables", "TopLevelModule", "fusion_dimension", "zero_mode", "ZeroMode",
    "ZeroModeError", "fundamental_stable_module", "StableModule", "StableModuleError",
    "solve_module_stabilizer", "vertex_representation", "decompose_trace_functional",
    "DecompositionResult", "Block", "HypothesisError", "averaging_projector", "valid_functionals",
    "matrix_algebra", "regular_bimodule", "central_idempotents", "is_semisimple", "check_hypotheses",
    "basis_vector", "is_scalar",
]
