"""Sparse exact linear algebra over rationals and cyclotomic numbers.

Vectors are plain dicts ``{index: scalar}`` with no stored zeros.  Matrices
are column-keyed dicts of such vectors.  Everything is exact; nothing here
ever rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .exact import Cyclotomic, format_scalar, parse_scalar

Vector = dict


# -- vectors -----------------------------------------------------------------

def vadd(x: Vector, y: Vector, c=1) -> Vector:
    """x + c*y as a new vector."""
    out = dict(x)
    if not c:
        return out
    for k, v in y.items():
        s = out.get(k, 0) + c * v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def viadd(x: Vector, y: Vector, c=1) -> None:
    """In-place x += c*y."""
    if not c:
        return
    for k, v in y.items():
        s = x.get(k, 0) + c * v
        if s:
            x[k] = s
        else:
            x.pop(k, None)


def vscale(x: Vector, c) -> Vector:
    if not c:
        return {}
    return {k: c * v for k, v in x.items()}


def vsum(terms: Iterable[tuple]) -> Vector:
    """Sum of c*v over (c, v) pairs."""
    out: Vector = {}
    for c, v in terms:
        viadd(out, v, c)
    return out


def basis_vector(i: int) -> Vector:
    return {i: Fraction(1)}


def entry_size(x) -> int:
    if isinstance(x, Cyclotomic):
        return sum(c.numerator.bit_length() + c.denominator.bit_length() for c in x.coeffs if c)
    x = Fraction(x)
    return x.numerator.bit_length() + x.denominator.bit_length()


# -- matrices ----------------------------------------------------------------

class SparseMatrix:
    """rows x cols matrix stored as {col: {row: value}}."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: dict | None = None):
        self.rows = rows
        self.cols = cols
        self.data = {}
        if data:
            for c, col in data.items():
                col = {r: v for r, v in col.items() if v}
                if col:
                    self.data[c] = col

    @classmethod
    def from_entries(cls, rows, cols, entries):
        data: dict = {}
        for r, c, v in entries:
            if not (0 <= r < rows and 0 <= c < cols):
                raise IndexError(f"entry ({r}, {c}) outside {rows}x{cols}")
            col = data.setdefault(c, {})
            s = col.get(r, 0) + v
            if s:
                col[r] = s
            else:
                col.pop(r, None)
        return cls(rows, cols, data)

    @classmethod
    def from_dense(cls, rows_list):
        rows = len(rows_list)
        cols = len(rows_list[0]) if rows else 0
        return cls.from_entries(
            rows, cols,
            ((i, j, Fraction(v) if isinstance(v, int) else v)
             for i, row in enumerate(rows_list) for j, v in enumerate(row) if v),
        )

    @classmethod
    def identity(cls, n, scale=Fraction(1)):
        return cls(n, n, {i: {i: scale} for i in range(n)})

    @classmethod
    def zero(cls, rows, cols):
        return cls(rows, cols)

    @classmethod
    def from_columns(cls, rows, columns: list):
        return cls(rows, len(columns), {j: v for j, v in enumerate(columns) if v})

    def column(self, c) -> Vector:
        return self.data.get(c, {})

    def get(self, r, c):
        return self.data.get(c, {}).get(r, 0)

    def entries(self):
        for c in sorted(self.data):
            col = self.data[c]
            for r in sorted(col):
                yield r, c, col[r]

    def nnz(self):
        return sum(len(c) for c in self.data.values())

    def is_zero(self):
        return not self.data

    def to_dense(self):
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for r, c, v in self.entries():
            out[r][c] = v
        return out

    def row_dicts(self) -> dict:
        rows: dict = {}
        for c, col in self.data.items():
            for r, v in col.items():
                rows.setdefault(r, {})[c] = v
        return rows

    def apply(self, vec: Vector) -> Vector:
        out: Vector = {}
        for c, x in vec.items():
            col = self.data.get(c)
            if col:
                viadd(out, col, x)
        return out

    def __matmul__(self, other):
        if isinstance(other, dict):
            return self.apply(other)
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        data = {}
        for c, col in other.data.items():
            v = self.apply(col)
            if v:
                data[c] = v
        return SparseMatrix(self.rows, other.cols, data)

    def _combine(self, other, c):
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        data = {k: dict(v) for k, v in self.data.items()}
        for k, col in other.data.items():
            tgt = data.setdefault(k, {})
            viadd(tgt, col, c)
            if not tgt:
                del data[k]
        return SparseMatrix(self.rows, self.cols, data)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        if not c:
            return SparseMatrix(self.rows, self.cols)
        return SparseMatrix(self.rows, self.cols, {k: vscale(v, c) for k, v in self.data.items()})

    __rmul__ = scale

    @property
    def T(self):
        return SparseMatrix(self.cols, self.rows, self.row_dicts())

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and self.data == other.data

    def trace(self):
        return sum((col.get(c, 0) for c, col in self.data.items()), Fraction(0))

    def restrict(self, rows: list, cols: list) -> "SparseMatrix":
        """Submatrix on the given (ordered) row and column index lists."""
        rpos = {r: i for i, r in enumerate(rows)}
        data = {}
        for j, c in enumerate(cols):
            col = self.data.get(c)
            if col:
                sub = {rpos[r]: v for r, v in col.items() if r in rpos}
                if sub:
                    data[j] = sub
        return SparseMatrix(len(rows), len(cols), data)

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz()})"


def dump_matrix(m: SparseMatrix) -> str:
    lines = [f"{m.rows} {m.cols}"]
    lines += [f"{r} {c} {format_scalar(v)}" for r, c, v in m.entries()]
    return "\n".join(lines) + "\n"


def load_matrix(text: str) -> SparseMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows, cols = map(int, lines[0].split())
    entries = []
    for ln in lines[1:]:
        r, c, s = ln.split(None, 2)
        entries.append((int(r), int(c), parse_scalar(s)))
    return SparseMatrix.from_entries(rows, cols, entries)


# -- echelon forms -------------------------------------------------------------

class EchelonBasis:
    """Incrementally maintained reduced echelon basis of a subspace.

    Each stored row has a pivot entry 1 and vanishes at every other pivot
    column, so reducing a vector is a single pass over its pivot entries.
    ``priority(col)`` chooses pivots: the highest-priority nonzero column of
    a new row becomes its pivot, ties broken by the smallest entry size.
    """

    def __init__(self, priority: Callable[[int], object] | None = None):
        self.priority = priority or (lambda c: -c)
        self.rows: dict = {}  # pivot col -> row vector
        self._occ: dict = {}  # col -> set of pivots whose row touches col

    def __len__(self):
        return len(self.rows)

    @property
    def pivots(self):
        return sorted(self.rows)

    def reduce(self, vec: Vector) -> Vector:
        v = dict(vec)
        for p in [p for p in v if p in self.rows]:
            c = v.get(p)
            if c:
                viadd(v, self.rows[p], -c)
        return v

    def add(self, vec: Vector) -> bool:
        """Add a vector; True iff it enlarged the span."""
        v = self.reduce(vec)
        if not v:
            return False
        best = max(v, key=lambda c: (self.priority(c), -entry_size(v[c])))
        inv = Fraction(1) / v[best]
        v = {k: x * inv for k, x in v.items()}
        for p in list(self._occ.get(best, ())):
            row = self.rows[p]
            c = row.get(best)
            if c:
                old = set(row)
                viadd(row, v, -c)
                for k in old - set(row):
                    self._occ[k].discard(p)
                for k in set(row) - old:
                    self._occ.setdefault(k, set()).add(p)
        self.rows[best] = v
        for k in v:
            self._occ.setdefault(k, set()).add(best)
        return True

    def contains(self, vec: Vector) -> bool:
        return not self.reduce(vec)


def rref(m: SparseMatrix):
    """Reduced row echelon form: (matrix, pivot columns, rank)."""
    eb = EchelonBasis()
    for r in m.row_dicts().values():
        eb.add(r)
    piv = eb.pivots
    out = SparseMatrix.from_entries(
        m.rows, m.cols, ((i, c, v) for i, p in enumerate(piv) for c, v in eb.rows[p].items())
    )
    return out, piv, len(piv)


def nullspace(m: SparseMatrix) -> list:
    """Basis of {x : m x = 0} as sparse vectors."""
    eb = EchelonBasis()
    for r in m.row_dicts().values():
        eb.add(r)
    pivset = set(eb.rows)
    basis = []
    for f in range(m.cols):
        if f in pivset:
            continue
        x = {f: Fraction(1)}
        for p, row in eb.rows.items():
            c = row.get(f)
            if c:
                x[p] = -c
        basis.append(x)
    return basis


class NoSolution:
    """Marker result of an inconsistent inhomogeneous system."""

    def __bool__(self):
        return False

    def __repr__(self):
        return "NoSolution()"


NO_SOLUTION = NoSolution()


def solve_linear(constraints: SparseMatrix, rhs: Vector | None = None):
    """Nullspace basis (rhs None) or one particular solution (or NO_SOLUTION)."""
    if rhs is None:
        return nullspace(constraints)
    n = constraints.cols
    aug = constraints.row_dicts()
    for r, v in rhs.items():
        if v:
            aug.setdefault(r, {})[n] = v
    eb = EchelonBasis()
    for row in aug.values():
        eb.add(row)
    if n in eb.rows:
        return NO_SOLUTION
    x = {}
    for p, row in eb.rows.items():
        c = row.get(n)
        if c:
            x[p] = c
    return x


def solve_system(rows: Iterable[Vector], nvars: int, rhs: list | None = None):
    """Row-list front end: rows are {var: coeff}; rhs aligned with rows."""
    rows = list(rows)
    m = SparseMatrix.from_entries(
        len(rows), nvars, ((i, c, v) for i, r in enumerate(rows) for c, v in r.items())
    )
    if rhs is None:
        return solve_linear(m)
    return solve_linear(m, {i: v for i, v in enumerate(rhs) if v})


# -- graded bases and quotients -------------------------------------------------

@dataclass
class GradedBasis:
    """Named basis vectors carrying rational grades with a common denominator."""

    labels: list
    grades: list
    denominator: int = 1

    def __post_init__(self):
        self.grades = [Fraction(g) for g in self.grades]
        for g in self.grades:
            if (g * self.denominator).denominator != 1:
                raise ValueError(f"grade {g} not in (1/{self.denominator})Z")
        self._by_grade: dict = {}
        for i, g in enumerate(self.grades):
            self._by_grade.setdefault(g, []).append(i)

    @property
    def dim(self):
        return len(self.labels)

    def grade_list(self):
        return sorted(self._by_grade)

    def indices(self, grade) -> list:
        return self._by_grade.get(Fraction(grade), [])

    def graded_dims(self) -> dict:
        return {g: len(ix) for g, ix in sorted(self._by_grade.items())}

    def index(self, label) -> int:
        return self.labels.index(label)


@dataclass
class Quotient:
    """ambient / span(generators), with representatives among ambient basis indices."""

    ambient: list
    echelon: EchelonBasis
    representatives: list = field(default_factory=list)

    def __post_init__(self):
        self._pos = {r: i for i, r in enumerate(self.representatives)}

    @property
    def dim(self):
        return len(self.representatives)

    def project(self, vec: Vector) -> Vector:
        """Coordinates of the class of vec with respect to the representatives."""
        v = self.echelon.reduce(vec)
        out = {}
        for k, c in v.items():
            if k not in self._pos:
                raise ValueError(f"vector component {k} lies outside the ambient space")
            out[self._pos[k]] = c
        return out

    def lift(self, coords: Vector) -> Vector:
        return {self.representatives[i]: c for i, c in coords.items()}


def quotient_basis(ambient: Iterable[int] | int, generators: Iterable[Vector],
                   priority: Callable[[int], object] | None = None) -> Quotient:
    """Quotient of span(ambient basis) by span(generators).

    Representatives are ambient basis indices that are not pivots; pivots are
    chosen by ``priority`` (highest first), so callers can keep low-weight
    representatives by prioritising high-weight columns.
    """
    if isinstance(ambient, int):
        ambient = range(ambient)
    ambient = list(ambient)
    eb = EchelonBasis(priority)
    amb = set(ambient)
    for g in generators:
        if any(k not in amb for k in g):
            raise ValueError("generator outside the ambient space")
        eb.add(g)
    reps = [i for i in ambient if i not in eb.rows]
    return Quotient(ambient, eb, reps)
