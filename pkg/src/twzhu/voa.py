"""Truncated vertex operator algebras, twisted modules and intertwiners.

All objects hold explicit (lazily computed) mode matrices on a weight
truncation.  A mode ``a_n`` moves weight by ``wt a - n - 1``; columns whose
image would leave the truncation are dropped from the stored matrix, and
``apply(..., strict=True)`` refuses to produce such a vector instead.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .exact import Cyclotomic, format_scalar, parse_scalar, root_of_unity
from .linalg import (SparseMatrix, Vector, basis_vector, nullspace, solve_linear, vadd,
                     viadd, vscale)


class TruncationError(ValueError):
    """A requested vector would need basis vectors above the cutoff."""


class ValidationError(ValueError):
    pass


@lru_cache(maxsize=None)
def binom(x, i: int) -> Fraction:
    """Generalized binomial x(x-1)...(x-i+1)/i! for rational x."""
    if i < 0:
        return Fraction(0)
    x = Fraction(x)
    out = Fraction(1)
    for j in range(i):
        out *= (x - j)
    return out / math.factorial(i)


def _as_vector(a) -> Vector:
    if isinstance(a, dict):
        return a
    return basis_vector(a)


# -- modules ------------------------------------------------------------------

class VertexModule:
    """Graded module over a truncated VOA.

    Subclasses provide ``_column(i, n, col)``: the vector ``(e_i)_n e_col``
    for a VOA basis index ``i``, as a dict over module indices.  The result
    must be exact whenever its weight is within the cutoff.
    """

    def __init__(self, voa, labels, weights, cutoff, twist=None, twist_order=1, name=""):
        self.voa = voa
        self.labels = list(labels)
        self.weights = [Fraction(w) for w in weights]
        self.cutoff = Fraction(cutoff)
        self.twist = twist
        self.twist_order = twist_order
        self.name = name
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        self.lowest = min(self.weights) if self.weights else Fraction(0)
        self.stabilizers: dict = {}
        self._by_weight: dict = {}
        for i, w in enumerate(self.weights):
            self._by_weight.setdefault(w, []).append(i)
        self._mode_cache: dict = {}
        self._coset_cache: dict = {}

    # grading
    @property
    def dim(self):
        return len(self.labels)

    def grades(self):
        return sorted(self._by_weight)

    def indices_at(self, weight) -> list:
        return self._by_weight.get(Fraction(weight), [])

    def indices_upto(self, weight) -> list:
        weight = Fraction(weight)
        return [i for i, w in enumerate(self.weights) if w <= weight]

    def degree(self, i):
        return self.weights[i] - self.lowest

    def weight_of(self, vec: Vector):
        """Weight of a homogeneous nonzero vector."""
        ws = {self.weights[i] for i in vec}
        if len(ws) != 1:
            raise ValueError("vector is not homogeneous")
        return ws.pop()

    def homogeneous_parts(self, vec: Vector) -> dict:
        out: dict = {}
        for i, c in vec.items():
            out.setdefault(self.weights[i], {})[i] = c
        return out

    def label_str(self, i) -> str:
        return _label_str(self.labels[i])

    # modes
    def mode_coset(self, a_index) -> Fraction:
        """Allowed mode indices of a VOA basis vector lie in this + Z."""
        if self.twist is None or self.twist_order == 1:
            return Fraction(0)
        c = self._coset_cache.get(a_index)
        if c is None:
            r = self.voa.eigen_index(basis_vector(a_index), self.twist)
            c = self._coset_cache[a_index] = Fraction(r, self.twist_order)
        return c

    def _column(self, i, n, col) -> Vector:  # pragma: no cover - abstract
        raise NotImplementedError

    def target_weight(self, a_index, n, col):
        return self.weights[col] + self.voa.weights[a_index] - n - 1

    def basis_mode(self, i, n) -> SparseMatrix:
        n = Fraction(n)
        key = (i, n)
        m = self._mode_cache.get(key)
        if m is None:
            if (n - self.mode_coset(i)).denominator != 1:
                m = SparseMatrix(self.dim, self.dim)
            else:
                data = {}
                for col in range(self.dim):
                    t = self.target_weight(i, n, col)
                    if t > self.cutoff or t < self.lowest:
                        continue
                    v = self._column(i, n, col)
                    if v:
                        data[col] = v
                m = SparseMatrix(self.dim, self.dim, data)
            self._mode_cache[key] = m
        return m

    def mode(self, a, n) -> SparseMatrix:
        a = _as_vector(a)
        out = SparseMatrix(self.dim, self.dim)
        for i, c in a.items():
            out = out + self.basis_mode(i, n).scale(c)
        return out

    def apply(self, a, n, vec: Vector, strict: bool = True) -> Vector:
        """a_n vec.  With strict, raise TruncationError if any term could
        land above the cutoff."""
        a = _as_vector(a)
        n = Fraction(n)
        out: Vector = {}
        for i, c in a.items():
            if (n - self.mode_coset(i)).denominator != 1:
                continue
            m = self.basis_mode(i, n)
            for col, x in vec.items():
                t = self.target_weight(i, n, col)
                if t > self.cutoff:
                    if strict:
                        raise TruncationError(
                            f"{self.voa.label_str(i)}_({n}) on {self.label_str(col)} "
                            f"reaches weight {t} > cutoff {self.cutoff}")
                    continue
                viadd(out, m.data.get(col, {}), c * x)
        return out

    def nonzero_mode_range(self, a_index):
        """Mode indices n (in the right coset) whose matrix can be nonzero."""
        span = self.cutoff - self.lowest
        w = self.voa.weights[a_index]
        lo = w - 1 - span
        hi = w - 1 + span
        n = lo + ((self.mode_coset(a_index) - lo) % 1)
        out = []
        while n <= hi:
            out.append(n)
            n += 1
        return out

    def zero_mode(self, a) -> SparseMatrix:
        """o(a) = a_{wt a - 1}, summed over homogeneous components."""
        out = SparseMatrix(self.dim, self.dim)
        for w, part in self.voa.homogeneous_parts(_as_vector(a)).items():
            for i, c in part.items():
                if (w - 1 - self.mode_coset(i)).denominator == 1:
                    out = out + self.basis_mode(i, w - 1).scale(c)
        return out


class StoredModule(VertexModule):
    """Module whose modes are given as explicit matrices {(a, n): matrix}."""

    def __init__(self, voa, labels, weights, cutoff, modes: dict, **kw):
        super().__init__(voa, labels, weights, cutoff, **kw)
        self.stored = {(i, Fraction(n)): m for (i, n), m in modes.items()}

    def mode_coset(self, a_index):
        if self.twist is None or self.twist_order == 1 or self.voa is None:
            return Fraction(0)
        return super().mode_coset(a_index)

    def _column(self, i, n, col):
        m = self.stored.get((i, n))
        return dict(m.data.get(col, {})) if m is not None else {}


class ConjugateModule(VertexModule):
    """W o h: same space, Y^h(a, z) = Y(ha, z)."""

    def __init__(self, base: VertexModule, h: str):
        super().__init__(base.voa, base.labels, base.weights, base.cutoff, base.twist,
                         base.twist_order, name=f"{base.name}o{h}")
        self.base = base
        self.h = h
        self.stabilizers = dict(base.stabilizers)

    def mode_coset(self, a_index):
        return self.base.mode_coset(a_index)

    def _column(self, i, n, col):
        ha = self.voa.automorphisms[self.h].column(i)
        return self.base.apply(ha, n, {col: Fraction(1)}, strict=False)


def conjugate_module(W: VertexModule, h: str) -> VertexModule:
    if h not in W.voa.automorphisms:
        raise KeyError(f"unknown automorphism {h!r}")
    return ConjugateModule(W, h)


# -- the algebra ----------------------------------------------------------------

class TruncatedVOA:
    """A VOA truncated at integer weight ``cutoff``; its adjoint module does the modes."""

    def __init__(self, central_charge, vacuum: int, omega: Vector, automorphisms=None, name=""):
        self.central_charge = Fraction(central_charge)
        self.vacuum = vacuum
        self.omega = omega
        self.automorphisms: dict = dict(automorphisms or {})
        self.orders: dict = {}
        self.name = name
        self.adjoint: VertexModule | None = None
        for k, m in self.automorphisms.items():
            self.orders[k] = _matrix_order(m)
        self._eig_cache: dict = {}

    def attach(self, module: VertexModule):
        self.adjoint = module
        module.voa = self
        return self

    def add_automorphism(self, name, matrix, order=None):
        self.automorphisms[name] = matrix
        self.orders[name] = order or _matrix_order(matrix)
        self._eig_cache = {}

    # forwarded structure
    @property
    def labels(self):
        return self.adjoint.labels

    @property
    def weights(self):
        return self.adjoint.weights

    @property
    def cutoff(self):
        return self.adjoint.cutoff

    @property
    def dim(self):
        return self.adjoint.dim

    @property
    def index(self):
        return self.adjoint.index

    def label_str(self, i):
        return self.adjoint.label_str(i)

    def indices_upto(self, w):
        return self.adjoint.indices_upto(w)

    def indices_at(self, w):
        return self.adjoint.indices_at(w)

    def homogeneous_parts(self, vec):
        return self.adjoint.homogeneous_parts(vec)

    def weight_of(self, vec):
        return self.adjoint.weight_of(vec)

    def mode(self, a, n):
        return self.adjoint.mode(a, n)

    def apply(self, a, n, vec, strict=True):
        return self.adjoint.apply(a, n, vec, strict)

    @property
    def omega_tilde(self) -> Vector:
        return vadd(self.omega, {self.vacuum: Fraction(1)}, -self.central_charge / 24)

    def virasoro(self, n, module: VertexModule | None = None) -> SparseMatrix:
        return (module or self.adjoint).mode(self.omega, n + 1)

    # automorphism eigenspaces
    def eigen_index(self, vec: Vector, name: str) -> int:
        """r with g vec = exp(2 pi i r/|g|) vec; error if vec is not an eigenvector."""
        g = self.automorphisms[name]
        T = self.orders[name]
        gv = g.apply(vec)
        k = next(iter(vec))
        ratio = gv.get(k, 0) / vec[k] if not isinstance(vec[k], Cyclotomic) else gv.get(k, 0) / vec[k]
        for r in range(T):
            if root_of_unity(r, T) == ratio:
                if vadd(gv, vec, -ratio):
                    break
                return r
        raise ValueError(f"vector is not an eigenvector of {name}")

    def eigenspace(self, name: str, r: int, max_weight=None) -> list:
        """Basis of V^r (weight <= max_weight) as homogeneous vectors."""
        key = (name, r % self.orders[name], max_weight)
        if key in self._eig_cache:
            return self._eig_cache[key]
        g = self.automorphisms[name]
        T = self.orders[name]
        ev = root_of_unity(r, T)
        top = self.cutoff if max_weight is None else Fraction(max_weight)
        out = []
        for w in self.adjoint.grades():
            if w > top:
                continue
            idx = self.indices_at(w)
            diag = all(set(g.column(i)) <= {i} for i in idx)
            if diag:
                out += [basis_vector(i) for i in idx if g.get(i, i) == ev]
            else:
                sub = g.restrict(idx, idx) - SparseMatrix.identity(len(idx), ev)
                for v in nullspace(sub):
                    out.append({idx[k]: c for k, c in v.items()})
        self._eig_cache[key] = out
        return out


def _matrix_order(m: SparseMatrix, bound: int = 64) -> int:
    ident = SparseMatrix.identity(m.rows)
    p = m
    for k in range(1, bound + 1):
        if p == ident:
            return k
        p = p @ m
    raise ValueError("automorphism has no finite order within bound")


def _label_str(label) -> str:
    if isinstance(label, str):
        return label
    if isinstance(label, tuple):
        return "(" + ",".join(_label_str(x) for x in label) + ")"
    if isinstance(label, Fraction):
        return str(label)
    return str(label)


# -- square-bracket modes ---------------------------------------------------------

def _series_mul(a: list, b: list, n: int) -> list:
    out = [Fraction(0)] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j, y in enumerate(b[: n - i]):
                out[i + j] += x * y
    return out


def _series_pow(a: list, k: int, n: int) -> list:
    """a**k for a series with a[0] = 1 and any integer k."""
    if k < 0:
        inv = [Fraction(0)] * n
        inv[0] = Fraction(1) / a[0]
        for m in range(1, n):
            inv[m] = -sum((a[j] * inv[m - j] for j in range(1, min(m, len(a) - 1) + 1)), Fraction(0)) / a[0]
        a, k = inv, -k
    out = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for _ in range(k):
        out = _series_mul(out, a, n)
    return out


@lru_cache(maxsize=None)
def bracket_coefficients(wt, n: int, length: int) -> tuple:
    """Coefficients c_j, j = n, ..., n + length - 1, of (log(1+w))^n (1+w)^{wt-1}.

    a_[n] = sum_j c_j a_j.
    """
    wt = Fraction(wt)
    ratio = [Fraction((-1) ** j, j + 1) for j in range(length)]   # log(1+w)/w
    powered = _series_pow(ratio, n, length)
    shift = [binom(wt - 1, j) for j in range(length)]
    return tuple(_series_mul(powered, shift, length))


def bracket_apply(module: VertexModule, a, n: int, vec: Vector, strict: bool = True) -> Vector:
    """a_[n] vec on an untwisted module, for a homogeneous (round-weight) VOA vector a."""
    voa = module.voa
    out: Vector = {}
    if not vec:
        return out
    maxdeg = max(module.degree(i) for i in vec)
    for w, part in voa.homogeneous_parts(_as_vector(a)).items():
        jmax = math.floor(w - 1 + maxdeg)
        if jmax < n:
            continue
        coeffs = bracket_coefficients(w, n, jmax - n + 1)
        for off, c in enumerate(coeffs):
            if c:
                viadd(out, module.apply(part, n + off, vec, strict), c)
    return out


def bracket_mode(module: VertexModule, a, n: int) -> SparseMatrix:
    """a_[n] as a (truncated) matrix."""
    cols = {}
    for col in range(module.dim):
        v = bracket_apply(module, a, n, {col: Fraction(1)}, strict=False)
        if v:
            cols[col] = v
    return SparseMatrix(module.dim, module.dim, cols)


def L_bracket_apply(module: VertexModule, n: int, vec: Vector, strict: bool = True) -> Vector:
    """L[n] = omega~_[n+1]."""
    voa = module.voa
    out = bracket_apply(module, voa.omega, n + 1, vec, strict)
    if n == -2:
        viadd(out, vec, -voa.central_charge / 24)
    return out


def bracket_weights(module: VertexModule, max_weight=None) -> dict:
    """L[0]-eigenvectors {k: [vectors]} by back-substitution.

    L[0] = L(0) + (strictly weight-lowering terms), so each basis vector x of
    round weight k extends uniquely to an eigenvector x + (lower weights).
    """
    top = module.cutoff if max_weight is None else Fraction(max_weight)
    out: dict = {}
    for i in range(module.dim):
        k = module.weights[i]
        if k > top:
            continue
        x = {i: Fraction(1)}
        lx = L_bracket_apply(module, 0, x, strict=False)
        # lower components solved weight by weight downwards
        for w in sorted({module.weights[j] for j in range(module.dim) if module.weights[j] < k},
                        reverse=True):
            comp = {j: c for j, c in vadd(lx, x, -k).items() if module.weights[j] == w}
            if not comp:
                continue
            d = k - w
            corr = vscale(comp, 1 / d)
            viadd(x, corr)
            lx = L_bracket_apply(module, 0, x, strict=False)
        if vadd(lx, x, -k):
            raise ValueError(f"defective L[0] triangular system at {module.label_str(i)}")
        out.setdefault(k, []).append(x)
    return out


# -- intertwiners ---------------------------------------------------------------

class IntertwinerData:
    """Modes u_(n): W1 -> W2 of an intertwining operator of type U x W1 -> W2.

    I(u, z) = sum_n u_(n) z^{-n-1} z^{-shift}; the shift h0 + h1 - h2 is kept
    separate from the indices.  It is unrelated to the automorphism usually
    also called h, which is always referred to by name (e.g. "theta").
    """

    def __init__(self, U: VertexModule, W1: VertexModule, W2: VertexModule, mode_fn,
                 shift=Fraction(0), coset_fn=None, name=""):
        self.U, self.W1, self.W2 = U, W1, W2
        self._mode_fn = mode_fn
        self.shift = Fraction(shift)
        self._coset_fn = coset_fn
        self.name = name
        self._cache: dict = {}

    @classmethod
    def adjoint(cls, W: VertexModule):
        """U = V and I = Y_W."""
        return cls(W.voa.adjoint, W, W, W.basis_mode, Fraction(0), W.mode_coset, name=f"Y_{W.name}")

    def coset(self, u_index) -> Fraction:
        if self._coset_fn is not None:
            return self._coset_fn(u_index)
        return Fraction(0)

    def basis_mode(self, u_index, n) -> SparseMatrix:
        n = Fraction(n)
        if (n - self.coset(u_index)).denominator != 1:
            return SparseMatrix(self.W2.dim, self.W1.dim)
        key = (u_index, n)
        if key not in self._cache:
            self._cache[key] = self._mode_fn(u_index, n)
        return self._cache[key]

    def mode(self, u, n) -> SparseMatrix:
        out = SparseMatrix(self.W2.dim, self.W1.dim)
        for i, c in _as_vector(u).items():
            out = out + self.basis_mode(i, n).scale(c)
        return out

    def target_degree(self, u_index, n, col):
        return self.U.degree(u_index) + self.W1.degree(col) - n - 1

    def apply(self, u, n, vec, strict=True) -> Vector:
        n = Fraction(n)
        out: Vector = {}
        top = self.W2.cutoff - self.W2.lowest
        for i, c in _as_vector(u).items():
            if (n - self.coset(i)).denominator != 1:
                continue
            m = self.basis_mode(i, n)
            for col, x in vec.items():
                if self.target_degree(i, n, col) > top:
                    if strict:
                        raise TruncationError(f"u_({n}) on {self.W1.label_str(col)} leaves the cutoff")
                    continue
                viadd(out, m.data.get(col, {}), c * x)
        return out

    def grade_preserving(self, u) -> SparseMatrix:
        """o^I(u) = u_(deg u - 1) on all of W1, summed over homogeneous parts;
        zero on components outside the integral coset."""
        out = SparseMatrix(self.W2.dim, self.W1.dim)
        for w, part in self.U.homogeneous_parts(_as_vector(u)).items():
            d = w - self.U.lowest
            for i, c in part.items():
                if (d - 1 - self.coset(i)).denominator == 1:
                    out = out + self.basis_mode(i, d - 1).scale(c)
        return out


def h_conjugate_intertwiner(I: IntertwinerData, h: str, phi: SparseMatrix | None = None) -> IntertwinerData:
    """I^h(u, z) = psi_2(h)^{-1} I(phi(h) u, z) psi_1(h)."""
    try:
        psi1 = I.W1.stabilizers[h]
        psi2 = I.W2.stabilizers[h]
    except KeyError as exc:
        raise KeyError(f"missing stabilizer for {h!r}") from exc
    if phi is None:
        if h in I.U.stabilizers:
            phi = I.U.stabilizers[h]
        elif I.U is I.U.voa.adjoint:
            phi = I.U.voa.automorphisms[h]
        else:
            raise KeyError(f"missing stabilizer for {h!r} on U")
    psi2_inv = invert_matrix(psi2)

    def fn(i, n):
        return psi2_inv @ I.mode(phi.column(i), n) @ psi1

    return IntertwinerData(I.U, I.W1, I.W2, fn, I.shift, I._coset_fn, name=f"{I.name}^{h}")


def invert_matrix(m: SparseMatrix) -> SparseMatrix:
    n = m.rows
    cols = {}
    for j in range(n):
        sol = solve_linear(m, basis_vector(j))
        if not isinstance(sol, dict):
            raise ValueError("matrix is singular")
        cols[j] = sol
    inv = SparseMatrix(n, n, cols)
    if not (m @ inv) == SparseMatrix.identity(n):
        raise ValueError("matrix is singular")
    return inv


# -- Jacobi identity ---------------------------------------------------------------

def _max_i(bound) -> int:
    return max(-1, math.floor(bound))


def check_twisted_jacobi(V: TruncatedVOA, I: IntertwinerData, a: int, u: int,
                         ms, ps, ns, w_degree=0, skip_truncated: bool = False) -> list:
    """Coefficient form of the twisted Jacobi identity:

        sum_i binom(p,i) (a_{m+i} u)_(p+n-i)
            = sum_i (-1)^i binom(m,i) [a_{p+m-i} u_(n+i) - (-1)^m u_(m+n-i) a_{p+i}]

    on all W1 basis vectors of degree <= w_degree.  a is a VOA basis index, u a
    U basis index, p runs over the coset of a on W1, n over that of u.
    Returns a list of (a, u, m, p, n, w) quadruples where the identity fails.
    Raises TruncationError when the window needs modes beyond the cutoff,
    unless skip_truncated is set, in which case such coefficients are skipped.
    """
    W1, W2 = I.W1, I.W2
    bad = []
    cols = [c for c in range(W1.dim) if W1.degree(c) <= w_degree]
    ca = W1.mode_coset(a)
    if W2.mode_coset(a) != ca:
        raise ValueError("W1 and W2 disagree on the twist of a")
    for m in ms:
        for p in ps:
            if (Fraction(p) - ca).denominator != 1:
                continue
            for n in ns:
                if (Fraction(n) - I.coset(u)).denominator != 1:
                    continue
                for col in cols:
                    try:
                        ok = _jacobi_coefficient(V, I, a, u, m, p, n, col)
                    except TruncationError:
                        if not skip_truncated:
                            raise
                        continue
                    if not ok:
                        bad.append((a, u, m, p, n, col))
    return bad


def _jacobi_coefficient(V, I, a, u, m, p, n, col) -> bool:
    U, W1, W2 = I.U, I.W1, I.W2
    wa = V.weights[a]
    du = U.degree(u)
    w = {col: Fraction(1)}
    dw = W1.degree(col)
    lhs: Vector = {}
    # a_{m+i} u vanishes once m+i > wt a - 1 + deg u
    for i in range(0, _max_i(wa - 1 + du - m) + 1):
        c = binom(p, i)
        if c:
            x = U.apply(a, m + i, {u: Fraction(1)})
            viadd(lhs, I.apply(x, p + n - i, w), c)
    rhs: Vector = {}
    for i in range(0, _max_i(du + dw - n - 1) + 1):
        c = (-1) ** i * binom(m, i)
        if c:
            viadd(rhs, W2.apply(a, p + m - i, I.apply(u, n + i, w)), c)
    sgn = -1 if m % 2 else 1
    for i in range(0, _max_i(wa - 1 + dw - p) + 1):
        c = (-1) ** i * binom(m, i)
        if c:
            viadd(rhs, I.apply(u, m + n - i, W1.apply(a, p + i, w)), -sgn * c)
    return not vadd(lhs, rhs, -1)


# -- validation --------------------------------------------------------------------

def _bracket(x: SparseMatrix, y: SparseMatrix) -> SparseMatrix:
    return x @ y - y @ x


def check_virasoro(V: TruncatedVOA, module: VertexModule | None = None, span: int = 2) -> list:
    """[L(m), L(n)] = (m-n) L(m+n) + (m^3-m)/12 c delta_{m+n,0} on low grades."""
    W = module or V.adjoint
    c = V.central_charge
    bad = []
    for m in range(-span, span + 1):
        for n in range(-span, span + 1):
            room = max(abs(m), abs(n), 2)
            lim = W.cutoff - room
            for col in W.indices_upto(lim):
                v = {col: Fraction(1)}
                lhs = vadd(W.apply(V.omega, m + 1, W.apply(V.omega, n + 1, v, False), False),
                           W.apply(V.omega, n + 1, W.apply(V.omega, m + 1, v, False), False), -1)
                rhs = vscale(W.apply(V.omega, m + n + 1, v, False), m - n)
                if m + n == 0:
                    viadd(rhs, v, Fraction(m ** 3 - m, 12) * c)
                if vadd(lhs, rhs, -1):
                    bad.append(f"virasoro [L({m}),L({n})] fails on {W.label_str(col)}")
                    break
    return bad


def check_bracket_virasoro(V: TruncatedVOA, module: VertexModule | None = None, span: int = 2) -> list:
    """[L[m], L[n]] = (m-n) L[m+n] + (m^3-m)/12 c delta_{m+n,0}, same c, on grades
    where every intermediate vector stays inside the cutoff."""
    W = module or V.adjoint
    c = V.central_charge
    bad = []
    for m in range(-span, span + 1):
        for n in range(-span, span + 1):
            lim = W.cutoff - abs(m) - abs(n)
            for col in W.indices_upto(lim):
                v = {col: Fraction(1)}
                lhs = vadd(L_bracket_apply(W, m, L_bracket_apply(W, n, v, False), False),
                           L_bracket_apply(W, n, L_bracket_apply(W, m, v, False), False), -1)
                rhs = vscale(L_bracket_apply(W, m + n, v, False), m - n)
                if m + n == 0:
                    viadd(rhs, v, Fraction(m ** 3 - m, 12) * c)
                if vadd(lhs, rhs, -1):
                    bad.append(f"virasoro [L[{m}],L[{n}]] fails on {W.label_str(col)}")
                    break
    return bad


def check_L0_grading(V: TruncatedVOA, module: VertexModule | None = None) -> list:
    W = module or V.adjoint
    bad = []
    for col in range(W.dim):
        v = W.apply(V.omega, 1, {col: Fraction(1)}, False)
        if v != ({col: W.weights[col]} if W.weights[col] else {}):
            bad.append(f"L(0) does not act by the weight on {W.label_str(col)}")
    return bad


def check_vacuum(V: TruncatedVOA) -> list:
    bad = []
    one = V.vacuum
    for n in range(-3, 4):
        m = V.mode(one, n)
        want = SparseMatrix.identity(V.dim) if n == -1 else SparseMatrix(V.dim, V.dim)
        # only columns inside the truncation are meaningful
        if not (m == want.restrict(list(range(V.dim)), list(range(V.dim)))) and n == -1:
            bad.append("vacuum mode 1_(-1) is not the identity")
        elif n != -1 and not m.is_zero():
            bad.append(f"vacuum mode 1_({n}) is not zero")
    for i in range(V.dim):
        if V.apply(i, -1, {one: Fraction(1)}) != {i: Fraction(1)}:
            bad.append(f"creation a_(-1)1 = a fails for {V.label_str(i)}")
        for n in range(0, 3):
            if V.apply(i, n, {one: Fraction(1)}):
                bad.append(f"a_({n})1 != 0 for {V.label_str(i)}")
    return bad


def check_automorphism(V: TruncatedVOA, name: str, max_weight=None) -> list:
    """(ka)_n k = k a_n on columns within the truncation."""
    k = V.automorphisms[name]
    bad = []
    if k.apply({V.vacuum: Fraction(1)}) != {V.vacuum: Fraction(1)}:
        bad.append(f"{name} does not fix the vacuum")
    if k.apply(V.omega) != V.omega:
        bad.append(f"{name} does not fix omega")
    top = V.cutoff if max_weight is None else max_weight
    for i in V.indices_upto(top):
        ka = k.column(i)
        for n in V.adjoint.nonzero_mode_range(i):
            lhs = V.mode(ka, n) @ k
            rhs = k @ V.mode(i, n)
            if not lhs == rhs:
                bad.append(f"{name} is not equivariant for {V.label_str(i)}_({n})")
                break
    return bad


def check_stabilizer(W: VertexModule, name: str, max_weight=None) -> list:
    """Y(ha, z) = psi(h) Y(a, z) psi(h)^{-1}."""
    V = W.voa
    psi = W.stabilizers[name]
    h = V.automorphisms[name]
    bad = []
    top = V.cutoff if max_weight is None else max_weight
    for i in V.indices_upto(top):
        ha = h.column(i)
        for n in W.nonzero_mode_range(i):
            if not (W.mode(ha, n) @ psi == psi @ W.mode(i, n)):
                bad.append(f"stabilizer {name} fails for {V.label_str(i)}_({n}) on {W.name}")
                break
    return bad


def check_mode_weights(W: VertexModule) -> list:
    V = W.voa
    bad = []
    for (i, n), m in W._mode_cache.items():
        for col, vec in m.data.items():
            t = W.target_weight(i, n, col)
            if any(W.weights[r] != t for r in vec):
                bad.append(f"mode {V.label_str(i)}_({n}) breaks the grading at {W.label_str(col)}")
    return bad


def validate_voa(V: TruncatedVOA, span: int = 2) -> dict:
    """Run the invariant suite; returns {check name: [violations]}."""
    report = {
        "vacuum": check_vacuum(V),
        "L0_grading": check_L0_grading(V),
        "virasoro": check_virasoro(V, span=span),
    }
    for name in sorted(V.automorphisms):
        report[f"automorphism:{name}"] = check_automorphism(V, name)
    report["mode_weights"] = check_mode_weights(V.adjoint)
    report["jacobi"] = jacobi_window(V, V.adjoint)
    return report


def validate_module(W: VertexModule, span: int = 2) -> dict:
    V = W.voa
    report = {
        "L0_grading": check_L0_grading(V, W),
        "virasoro": check_virasoro(V, W, span=span),
    }
    for name in sorted(W.stabilizers):
        report[f"stabilizer:{name}"] = check_stabilizer(W, name)
    report["mode_weights"] = check_mode_weights(W)
    report["jacobi"] = jacobi_window(V, W)
    return report


def jacobi_window(V: TruncatedVOA, W: VertexModule, max_weight=1, span: int = 2) -> list:
    """Twisted Jacobi coefficients for a, u of weight <= max_weight on the top two degrees of W."""
    I = IntertwinerData.adjoint(W)
    low = [i for i in V.indices_upto(max_weight) if i != V.vacuum]
    bad = []
    for a in low:
        ca = W.mode_coset(a)
        ps = [ca + k for k in range(-span, span)]
        for u in low:
            cu = W.mode_coset(u)
            ns = [cu + k for k in range(-span, span)]
            for q in check_twisted_jacobi(V, I, a, u, range(-span, span), ps, ns, w_degree=1,
                                          skip_truncated=True):
                bad.append(f"twisted Jacobi fails for a={V.label_str(q[0])}, u={V.label_str(q[1])}, "
                           f"m={q[2]}, p={q[3]}, n={q[4]} on {W.label_str(q[5])}")
    return bad


# -- file format -------------------------------------------------------------------

def _all_modes(W: VertexModule):
    for i in range(W.voa.dim):
        for n in W.nonzero_mode_range(i):
            m = W.basis_mode(i, n)
            if not m.is_zero():
                yield i, n, m


def dump_voa(V: TruncatedVOA) -> str:
    lines = ["voa " + (V.name or "unnamed"), f"central_charge {format_scalar(V.central_charge)}",
             f"cutoff {V.cutoff}", "basis"]
    names = [V.label_str(i) for i in range(V.dim)]
    for i in range(V.dim):
        lines.append(f"{names[i]} {V.weights[i]}")
    lines.append("end")
    lines.append(f"vacuum {names[V.vacuum]}")
    lines.append("omega")
    for i, c in sorted(V.omega.items()):
        lines.append(f"{names[i]} {format_scalar(c)}")
    lines.append("end")
    for name in sorted(V.automorphisms):
        lines.append(f"automorphism {name} {V.orders[name]}")
        for r, c, x in sorted(V.automorphisms[name].entries()):
            lines.append(f"{r} {c} {format_scalar(x)}")
        lines.append("end")
    lines.append("modes")
    for i, n, m in _all_modes(V.adjoint):
        for r, c, x in sorted(m.entries()):
            lines.append(f"{names[i]} {n} {r} {c} {format_scalar(x)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def dump_module(W: VertexModule) -> str:
    V = W.voa
    lines = ["module " + (W.name or "unnamed"), f"cutoff {W.cutoff}"]
    if W.twist is not None:
        lines.append(f"twist {W.twist} {W.twist_order}")
    lines.append("basis")
    for i in range(W.dim):
        lines.append(f"{W.label_str(i)} {W.weights[i]}")
    lines.append("end")
    for name in sorted(W.stabilizers):
        lines.append(f"stabilizer {name}")
        for r, c, x in sorted(W.stabilizers[name].entries()):
            lines.append(f"{r} {c} {format_scalar(x)}")
        lines.append("end")
    lines.append("modes")
    for i, n, m in _all_modes(W):
        for r, c, x in sorted(m.entries()):
            lines.append(f"{V.label_str(i)} {n} {r} {c} {format_scalar(x)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _sections(text: str):
    """Split into (header tokens, body lines) blocks; 'end' closes a body."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    out = []
    i = 0
    block_heads = {"basis", "omega", "automorphism", "modes", "stabilizer"}
    while i < len(lines):
        toks = lines[i].split()
        if toks[0] in block_heads:
            j = i + 1
            body = []
            while j < len(lines) and lines[j] != "end":
                body.append(lines[j])
                j += 1
            if j == len(lines):
                raise ValidationError(f"section {toks[0]!r} is not closed by 'end'")
            out.append((toks, body))
            i = j + 1
        else:
            out.append((toks, []))
            i += 1
    return out


def _matrix_from_lines(body, dim):
    ent = []
    for ln in body:
        r, c, x = ln.split(maxsplit=2)
        ent.append((int(r), int(c), parse_scalar(x)))
    return SparseMatrix.from_entries(dim, dim, ent)


def load_voa(text: str, validate: bool = True) -> TruncatedVOA:
    secs = _sections(text)
    name, c, cutoff = "", None, None
    names, weights = [], []
    vacuum = None
    omega_lines, autos, mode_lines = [], [], []
    for toks, body in secs:
        head = toks[0]
        if head == "voa":
            name = toks[1] if len(toks) > 1 else ""
        elif head == "central_charge":
            c = parse_scalar(" ".join(toks[1:]))
        elif head == "cutoff":
            cutoff = Fraction(toks[1])
        elif head == "basis":
            for ln in body:
                nm, w = ln.split()
                names.append(nm)
                weights.append(Fraction(w))
        elif head == "vacuum":
            vacuum = toks[1]
        elif head == "omega":
            omega_lines = body
        elif head == "automorphism":
            autos.append((toks[1], int(toks[2]), body))
        elif head == "modes":
            mode_lines = body
        else:
            raise ValidationError(f"unknown section {head!r}")
    if c is None or cutoff is None or vacuum is None or not names:
        raise ValidationError("missing central_charge, cutoff, basis or vacuum")
    idx = {nm: i for i, nm in enumerate(names)}
    if len(idx) != len(names):
        raise ValidationError("duplicate basis names")
    if vacuum not in idx:
        raise ValidationError(f"vacuum {vacuum!r} is not a basis vector")
    omega = {}
    for ln in omega_lines:
        nm, x = ln.split(maxsplit=1)
        omega[idx[nm]] = parse_scalar(x)
    dim = len(names)
    modes = _parse_modes(mode_lines, idx, idx, dim, dim)
    V = TruncatedVOA(c, idx[vacuum], omega, name=name)
    W = StoredModule(V, names, weights, cutoff, modes, name=name)
    V.attach(W)
    for nm, order, body in autos:
        V.add_automorphism(nm, _matrix_from_lines(body, dim), order)
    if validate:
        _raise_first(validate_voa(V), stored=W)
    return V


def _parse_modes(lines, a_idx, w_idx, rows, cols):
    ent: dict = {}
    for ln in lines:
        a, n, r, c, x = ln.split(maxsplit=4)
        if a not in a_idx:
            raise ValidationError(f"mode line refers to unknown vector {a!r}")
        ent.setdefault((a_idx[a], Fraction(n)), []).append((int(r), int(c), parse_scalar(x)))
    return {k: SparseMatrix.from_entries(rows, cols, v) for k, v in ent.items()}


def _raise_first(report: dict, stored: StoredModule | None = None):
    if stored is not None:
        W = stored
        for (i, n), m in W.stored.items():
            for col, vec in m.data.items():
                t = W.target_weight(i, n, col)
                if any(W.weights[r] != t for r in vec):
                    raise ValidationError(
                        f"mode_weights: {W.voa.label_str(i)}_({n}) breaks the grading at {W.label_str(col)}")
    for key, viol in report.items():
        if viol:
            raise ValidationError(f"{key}: {viol[0]}")


def load_module(text: str, V: TruncatedVOA, validate: bool = True) -> StoredModule:
    secs = _sections(text)
    name, cutoff, twist, order = "", None, None, 1
    names, weights, stabs, mode_lines = [], [], [], []
    for toks, body in secs:
        head = toks[0]
        if head == "module":
            name = toks[1] if len(toks) > 1 else ""
        elif head == "cutoff":
            cutoff = Fraction(toks[1])
        elif head == "twist":
            twist, order = toks[1], int(toks[2])
        elif head == "basis":
            for ln in body:
                nm, w = ln.split()
                names.append(nm)
                weights.append(Fraction(w))
        elif head == "stabilizer":
            stabs.append((toks[1], body))
        elif head == "modes":
            mode_lines = body
        else:
            raise ValidationError(f"unknown section {head!r}")
    if cutoff is None or not names:
        raise ValidationError("missing cutoff or basis")
    widx = {nm: i for i, nm in enumerate(names)}
    aidx = {V.label_str(i): i for i in range(V.dim)}
    dim = len(names)
    modes = _parse_modes(mode_lines, aidx, widx, dim, dim)
    W = StoredModule(V, names, weights, cutoff, modes, twist=twist, twist_order=order, name=name)
    for nm, body in stabs:
        W.stabilizers[nm] = _matrix_from_lines(body, dim)
    if validate:
        _raise_first(validate_module(W), stored=W)
    return W
