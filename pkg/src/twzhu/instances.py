"""The rank-one Heisenberg VOA M(1), its involution theta, Fock modules, the
theta-twisted Fock module, intertwiners solved degree by degree, and
independent character oracles.

Basis vectors are monomials alpha(-n1)...alpha(-nk)v with n1 >= ... >= nk,
labelled ``(tag, (n1, ..., nk))``.  Modes of composite vectors come from the
Borcherds identity with p chosen in the coset of alpha on the module:

    (alpha_{-k} c)_{p+n} = sum_i (-1)^i binom(-k,i) [alpha_{p-k-i} c_{n+i}
                             - (-1)^k c_{-k+n-i} alpha_{p+i}]
                           - sum_{i>=1} binom(p,i) (alpha_{-k+i} c)_{p+n-i}

Every intermediate vector has weight at most that of the result, so the
recursion never leaves the truncation.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath

from .linalg import NO_SOLUTION, SparseMatrix, Vector, solve_system, viadd
from .qseries import PuiseuxSeries
from .voa import IntertwinerData, TruncatedVOA, VertexModule, binom

HALF = Fraction(1, 2)


# -- partitions ------------------------------------------------------------------

@lru_cache(maxsize=None)
def partitions(n: int, maxpart: int | None = None) -> tuple:
    """Partitions of n into parts <= maxpart, each as a descending tuple."""
    if maxpart is None:
        maxpart = n
    if n == 0:
        return ((),)
    out = []
    for k in range(min(n, maxpart), 0, -1):
        for rest in partitions(n - k, k):
            out.append((k,) + rest)
    return tuple(out)


def half_partitions(weight) -> tuple:
    """Partitions of weight into parts from 1/2 + Z_{>=0}, descending."""
    weight = Fraction(weight)
    twice = int(2 * weight)
    if 2 * weight != twice:
        return ()
    out = []

    def rec(rem, maxodd, acc):
        if rem == 0:
            out.append(tuple(Fraction(o, 2) for o in acc))
            return
        for o in range(min(rem, maxodd), 0, -1):
            if o % 2 == 1:
                rec(rem - o, o, acc + (o,))

    rec(twice, twice, ())
    return tuple(out)


def partition_count(n: int) -> int:
    return len(partitions(n))


def _insert(parts: tuple, x) -> tuple:
    lst = list(parts)
    pos = 0
    while pos < len(lst) and lst[pos] >= x:
        pos += 1
    lst.insert(pos, x)
    return tuple(lst)


def _remove(parts: tuple, x) -> tuple:
    lst = list(parts)
    lst.remove(x)
    return tuple(lst)


def monomial_name(label) -> str:
    tag, parts = label
    body = "".join(f"a({-p})" for p in parts) + "1"
    return f"{tag}:{body}" if tag else body


# -- Fock modules ----------------------------------------------------------------

class FockModule(VertexModule):
    """Fock-type module over the Heisenberg VOA.

    ``tags`` index copies of the Fock space; alpha(0) acts on tag t by
    ``zero[t]`` and every alpha mode sends tag t to ``flip[t]``.  For the
    twisted module ``p0 = 1/2`` and alpha has half-integral modes only.
    """

    def __init__(self, voa, degree_cutoff: int, top_weight=Fraction(0), tags=("",),
                 zero=None, flip=None, twisted: bool = False, name=""):
        self.twisted = twisted
        self.p0 = HALF if twisted else Fraction(0)
        self.top = Fraction(top_weight)
        self.tags = tuple(tags)
        self.zero = dict(zero or {t: Fraction(0) for t in self.tags})
        self.flip = dict(flip or {t: t for t in self.tags})
        labels, weights = [], []
        degree_cutoff = int(degree_cutoff)
        steps = range(0, 2 * degree_cutoff + 1) if twisted else range(0, degree_cutoff + 1)
        for s in steps:
            deg = Fraction(s, 2) if twisted else Fraction(s)
            parts_list = half_partitions(deg) if twisted else partitions(s)
            for t in self.tags:
                for parts in parts_list:
                    labels.append((t, parts))
                    weights.append(self.top + deg)
        super().__init__(voa, labels, weights, self.top + degree_cutoff,
                         twist="theta" if twisted else None, twist_order=2 if twisted else 1,
                         name=name)
        self._act_cache: dict = {}
        self.degree_cutoff = degree_cutoff

    def label_str(self, i) -> str:
        return monomial_name(self.labels[i])

    def label_weight(self, label):
        return self.top + sum(label[1], Fraction(0))

    def mode_coset(self, a_index):
        if not self.twisted:
            return Fraction(0)
        return Fraction(len(self.voa.labels[a_index][1]) % 2, 2)

    # alpha on labels, no truncation
    def alpha(self, p, label) -> dict:
        tag, parts = label
        nt = self.flip[tag]
        if p < 0:
            return {(nt, _insert(parts, -p)): Fraction(1)}
        if p == 0:
            z = self.zero.get(tag)
            if z is None:
                raise ValueError("alpha(0) does not act on a twisted module")
            return {(nt, parts): z} if z else {}
        cnt = parts.count(p)
        if not cnt:
            return {}
        return {(nt, _remove(parts, p)): cnt * p}

    def act(self, bparts: tuple, q, wlab) -> dict:
        """(b)_q w on labels, b = alpha(-k1)...alpha(-kr)1 given by its parts."""
        q = Fraction(q)
        key = (bparts, q, wlab)
        hit = self._act_cache.get(key)
        if hit is not None:
            return hit
        out = self._act(bparts, q, wlab)
        self._act_cache[key] = out
        return out

    def _act(self, bparts, q, wlab) -> dict:
        if not bparts:
            return {wlab: Fraction(1)} if q == -1 else {}
        wt_w = self.label_weight(wlab)
        wt_b = sum(bparts)
        if wt_w + wt_b - q - 1 < self.top:
            return {}
        if bparts == (1,):
            return self.alpha(q, wlab)
        k, c = bparts[0], bparts[1:]
        wt_c = sum(c)
        p = self.p0
        n = q - p
        out: dict = {}
        Vmod = self.voa.adjoint
        i = 0
        while wt_w + wt_c - n - i - 1 >= self.top:
            coeff = binom(k + i - 1, i)
            for lab, x in self.act(c, n + i, wlab).items():
                viadd(out, self.alpha(p - k - i, lab), coeff * x)
            i += 1
        sgn = (-1) ** k
        i = 0
        while p + i <= wt_w - self.top:
            if p + i == 0 and self.zero.get(wlab[0]) is None:
                i += 1
                continue
            coeff = binom(k + i - 1, i)
            for lab, x in self.alpha(p + i, wlab).items():
                viadd(out, self.act(c, -k + n - i, lab), -sgn * coeff * x)
            i += 1
        if p:
            i = 1
            while -k + i <= wt_c:
                coeff = binom(p, i)
                for (_, parts), x in Vmod.alpha(-k + i, ("", c)).items():
                    viadd(out, self.act(parts, p + n - i, wlab), -coeff * x)
                i += 1
        return out

    def _column(self, i, n, col):
        res = self.act(self.voa.labels[i][1], n, self.labels[col])
        return {self.index[lab]: x for lab, x in res.items()}

    def parity_matrix(self, tag_sign=None) -> SparseMatrix:
        """diag((-1)^{#parts}) or, with tag_sign, diag(tag_sign[tag])."""
        data = {}
        for i, (tag, parts) in enumerate(self.labels):
            s = tag_sign[tag] if tag_sign else (-1) ** len(parts)
            data[i] = {i: Fraction(s)}
        return SparseMatrix(self.dim, self.dim, data)


def build_heisenberg(cutoff: int) -> TruncatedVOA:
    """M(1) up to weight cutoff with omega = 1/2 alpha(-1)^2 1 and theta."""
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    V = TruncatedVOA(1, 0, {}, name="heisenberg")
    mod = FockModule(V, cutoff, name="M(1)")
    V.attach(mod)
    V.vacuum = mod.index[("", ())]
    V.omega = {mod.index[("", (1, 1))]: HALF}
    V.add_automorphism("theta", mod.parity_matrix(), 2)
    return V


def alpha_vector(V: TruncatedVOA) -> Vector:
    return {V.index[("", (1,))]: Fraction(1)}


def build_twisted_fock(V: TruncatedVOA, cutoff=None, top_weight=Fraction(1, 16)) -> FockModule:
    """M(1)(theta): alpha modes in 1/2 + Z, top weight 1/16, psi(theta) = (-1)^{#parts}."""
    cutoff = V.cutoff - V.adjoint.lowest if cutoff is None else cutoff
    W = FockModule(V, cutoff, top_weight=top_weight, tags=("",), zero={"": None}, twisted=True,
                   name="M(1)(theta)")
    W.stabilizers["theta"] = W.parity_matrix()
    return W


def build_fock_module(V: TruncatedVOA, lam, cutoff=None) -> FockModule:
    """M(1, lam): alpha(0) = lam, lowest weight lam^2/2."""
    lam = Fraction(lam)
    cutoff = V.cutoff if cutoff is None else cutoff
    return FockModule(V, cutoff, top_weight=lam * lam / 2, zero={"": lam}, name=f"M(1,{lam})")


def build_stable_untwisted_module(V: TruncatedVOA, lam, cutoff=None) -> FockModule:
    """U = M(1,lam) + M(1,-lam) with phi(theta)(x e_lam) = (theta x) e_{-lam}.

    Stored in the phi(theta)-eigenbasis e^{+-}_x = x e_lam +- (theta x) e_{-lam}:
    alpha(n) maps e^{s}_x to e^{-s}, alpha(0) acts by lam, phi(theta) = diag(s).
    """
    lam = Fraction(lam)
    cutoff = V.cutoff if cutoff is None else cutoff
    U = FockModule(V, cutoff, top_weight=lam * lam / 2, tags=("+", "-"),
                   zero={"+": lam, "-": lam}, flip={"+": "-", "-": "+"},
                   name=f"M(1,{lam})+M(1,{-lam})")
    U.stabilizers["theta"] = U.parity_matrix({"+": 1, "-": -1})
    return U


def eigenbasis_to_summands(U: FockModule, i: int) -> dict:
    """Coordinates of e^{s}_x in the summand basis {(+-lam, x)}."""
    tag, parts = U.labels[i]
    s = 1 if tag == "+" else -1
    sign = (-1) ** len(parts)
    return {("+lam", parts): Fraction(1), ("-lam", parts): Fraction(s * sign)}


# -- intertwiners by degreewise solving -------------------------------------------------

class IntertwinerSolveError(ValueError):
    pass


def _u_coset(U: FockModule, i: int, twisted: bool) -> Fraction:
    """Mode coset of u on a theta-twisted target: 0 on U^0, 1/2 on U^1."""
    if not twisted:
        return Fraction(0)
    if U is U.voa.adjoint:
        phi = U.voa.automorphisms["theta"]
    else:
        phi = U.stabilizers["theta"]
    return Fraction(0) if phi.get(i, i) == 1 else HALF


class _Solver:
    """u_(n) w for Fock-type U, W1, W2 from top data.

    For top vectors u of U the vectors X[t, d] = u_(-d-1) w1_top are solved
    degree by degree from [alpha_m, u_(n)] = (alpha_0 u)_(m+n) (m >= 0).  Other
    w come from u_(n) alpha_{-m} w' = alpha_{-m} u_(n) w' - (alpha_0 u)_(n-m) w',
    and composite u from the Borcherds recursion.
    """

    def __init__(self, U: FockModule, W1: FockModule, W2: FockModule, top_datum: dict):
        if W1.twisted != W2.twisted:
            raise ValueError("W1 and W2 must have the same twist")
        self.U, self.W1, self.W2 = U, W1, W2
        self.p0 = W1.p0
        (self.w1_top,) = [lab for lab in W1.labels if not lab[1]]
        (self.w2_top,) = [lab for lab in W2.labels if not lab[1]]
        self.tops = [i for i in range(U.dim) if not U.labels[i][1]]
        self.top_tag = {U.labels[i][0]: i for i in self.tops}
        self.datum = {U.labels[i][0]: Fraction(top_datum.get(i, 0)) for i in self.tops}
        self.X: dict = {}
        self.cache: dict = {}
        self._solve_tops()

    def coset(self, i):
        return _u_coset(self.U, i, self.W1.twisted)

    def _tag_coset(self, tag):
        return self.coset(self.top_tag[tag])

    def _solve_tops(self):
        W2 = self.W2
        steps = sorted({W2.degree(i) for i in range(W2.dim)})
        for d in steps:
            tags = [t for t in self.top_tag if (d + 1 + self._tag_coset(t)).denominator == 1]
            idx = W2.indices_at(W2.lowest + d)
            unknowns = [(t, j) for t in tags for j in idx]
            if not unknowns:
                continue
            pos = {x: k for k, x in enumerate(unknowns)}
            rows, rhs = [], []

            def eq(row: dict, value):
                rows.append(row)
                rhs.append(value)

            for t in tags:
                lam = self.U.zero[t]
                tp = self.U.flip[t]
                if d == 0:
                    for j in idx:
                        want = self.datum[t] if W2.labels[j] == self.w2_top else Fraction(0)
                        eq({pos[(t, j)]: Fraction(1)}, want)
                m = Fraction(1, 2) if self.p0 else Fraction(1)
                while m <= d:
                    # alpha_m X[t, d] = lam X[t', d - m]
                    target = self.X.get((tp, d - m), {})
                    image: dict = {}
                    for j in idx:
                        for lab, c in W2.alpha(m, W2.labels[j]).items():
                            image.setdefault(lab, {})[pos[(t, j)]] = c
                    for lab in set(image) | set(target):
                        eq(image.get(lab, {}), lam * target.get(lab, Fraction(0)))
                    m += 1
                if not self.p0 and W2.zero.get("") is not None and self.W1.zero.get("") is not None:
                    # alpha_0 X[t, d] - z1 X[t, d] = lam X[t', d]
                    z1 = self.W1.zero[self.w1_top[0]]
                    for j in idx:
                        lab = W2.labels[j]
                        row = {pos[(t, j)]: W2.zero[lab[0]] - z1}
                        if (tp, j) in pos:
                            row[pos[(tp, j)]] = row.get(pos[(tp, j)], 0) - lam
                        eq(row, Fraction(0))
            sol = solve_system(rows, len(unknowns), rhs)
            if sol is NO_SOLUTION:
                raise IntertwinerSolveError(f"inconsistent system at degree {d}")
            for t in tags:
                vec = {W2.labels[j]: sol.get(pos[(t, j)], Fraction(0)) for j in idx}
                self.X[(t, d)] = {k: v for k, v in vec.items() if v}

    def act(self, ulab, n, wlab) -> dict:
        key = (ulab, n, wlab)
        hit = self.cache.get(key)
        if hit is None:
            hit = self._act(ulab, Fraction(n), wlab)
            self.cache[key] = hit
        return hit

    def _act(self, ulab, n, wlab) -> dict:
        U, W1, W2 = self.U, self.W1, self.W2
        tag, parts = ulab
        du = sum(parts, Fraction(0))
        dw = W1.label_weight(wlab) - W1.top
        target = du + dw - n - 1
        if target < 0 or target > W2.degree_cutoff:
            return {}
        out: dict = {}
        if not parts:
            lam = U.zero[tag]
            tp = U.flip[tag]
            if not wlab[1]:
                return dict(self.X.get((tag, -n - 1), {}))
            m = wlab[1][0]
            rest = (wlab[0], _remove(wlab[1], m))
            if W1.flip[rest[0]] != wlab[0]:
                rest = (W1.flip[wlab[0]], rest[1])
            for lab, x in self.act(ulab, n, rest).items():
                viadd(out, W2.alpha(-m, lab), x)
            if lam:
                viadd(out, self.act((tp, ()), n - m, rest), -lam)
            return out
        k, c = parts[0], parts[1:]
        clab = (U.flip[tag], c)
        wt_c = sum(c, Fraction(0))
        p = self.p0
        q = n - p
        i = 0
        while wt_c + dw - q - i - 1 >= 0:
            coeff = binom(k + i - 1, i)
            for lab, x in self.act(clab, q + i, wlab).items():
                viadd(out, W2.alpha(p - k - i, lab), coeff * x)
            i += 1
        sgn = (-1) ** k
        i = 0
        while p + i <= dw:
            if p + i == 0 and W1.zero.get(wlab[0]) is None:
                i += 1
                continue
            coeff = binom(k + i - 1, i)
            for lab, x in W1.alpha(p + i, wlab).items():
                viadd(out, self.act(clab, -k + q - i, lab), -sgn * coeff * x)
            i += 1
        if p:
            i = 1
            while -k + i <= wt_c:
                coeff = binom(p, i)
                for lab, x in U.alpha(-k + i, clab).items():
                    viadd(out, self.act(lab, p + q - i, wlab), -coeff * x)
                i += 1
        return out

    def mode(self, i, n) -> SparseMatrix:
        ulab = self.U.labels[i]
        cols = {}
        for col, wlab in enumerate(self.W1.labels):
            res = self.act(ulab, n, wlab)
            vec = {self.W2.index[lab]: x for lab, x in res.items() if x}
            if vec:
                cols[col] = vec
        return SparseMatrix(self.W2.dim, self.W1.dim, cols)


def solve_intertwiner(U: FockModule, W1: FockModule, W2: FockModule, top_datum: dict,
                      name: str = "") -> IntertwinerData:
    """Intertwiner of type U x W1 -> W2 with u_(-1) w1_top = top_datum[u] w2_top
    for the top vectors u of U (Fock modules have one-dimensional tops).

    Raises IntertwinerSolveError when some degree has no solution.
    """
    s = _Solver(U, W1, W2, top_datum)
    shift = U.lowest + W1.lowest - W2.lowest
    return IntertwinerData(U, W1, W2, s.mode, shift, s.coset, name=name or f"I({U.name};{W1.name})")


# -- characters and oracles --------------------------------------------------------------

def _sector_data(sector):
    g, h = sector
    lead = Fraction(1, 48) if g else Fraction(-1, 24)
    step = HALF if g else Fraction(1)
    sign = -1 if h else 1
    return lead, step, sign


def signed_partition_character(sector, n_terms) -> PuiseuxSeries:
    """Graded trace of psi(h)^{-1} on the Fock basis: partitions (into half-odd
    parts when g = theta) weighted by (-1)^{#parts} when h = theta.  Exponents
    below lead + n_terms."""
    lead, step, sign = _sector_data(sector)
    n = int(n_terms / step)
    counts = [Fraction(0)] * n
    counts[0] = Fraction(1)
    # part sizes in units of step: 1, 2, 3... (untwisted) or 1, 3, 5... (twisted)
    parts = range(1, n) if step == 1 else range(1, n, 2)
    for pt in parts:
        for s in range(pt, n):
            counts[s] += sign * counts[s - pt]
    coeffs = {lead + s * step: c for s, c in enumerate(counts) if c}
    return PuiseuxSeries(coeffs, lead.denominator if step == 1 else 48, lead + n_terms)


def eta_quotient_oracle(sector, n_terms):
    """(series, function) for q^lead prod (1 - eps q^e)^{-1}; the series is
    built by multiplying geometric factors, the function uses q-Pochhammer."""
    lead, step, sign = _sector_data(sector)
    prec = Fraction(n_terms)
    series = PuiseuxSeries.constant(Fraction(1), prec)
    e = HALF if step == HALF else Fraction(1)
    while e < prec:
        geo = {}
        m = 0
        while m * e < prec:
            geo[m * e] = Fraction(sign) ** m
            m += 1
        series = series * PuiseuxSeries(geo, e.denominator, prec)
        e += 1
    series = series.shift(lead)

    def fn(tau, precision: int = 53):
        with mpmath.workprec(precision + 20):
            tau = mpmath.mpc(tau)
            q = mpmath.exp(2j * mpmath.pi * tau)
            first = mpmath.exp(2j * mpmath.pi * tau * (mpmath.mpf(e0.numerator) / e0.denominator))
            val = mpmath.exp(2j * mpmath.pi * tau * (mpmath.mpf(lead.numerator) / lead.denominator))
            return val / mpmath.qp(sign * first, q)

    e0 = HALF if step == HALF else Fraction(1)
    return series, fn
