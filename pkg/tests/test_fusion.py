import itertools
import random
from fractions import Fraction

import pytest

from twzhu.exact import zeta
from twzhu.fusion import (AlgebraTables, BimoduleTables, HypothesisError, IncompleteTablesError, StableModuleError,
                          TopLevelModule, ZeroModeError, algebra_from_zhu, averaging_projector, bimodule_from_zhu,
                          central_idempotents, check_hypotheses, decompose_trace_functional,
                          fundamental_stable_module, fusion_dimension, is_semisimple, matrix_algebra,
                          regular_bimodule, solve_module_stabilizer, top_level_module, valid_functionals, zero_mode)
from twzhu.instances import build_fock_module, build_twisted_fock, solve_intertwiner
from twzhu.linalg import SparseMatrix
from twzhu.voa import IntertwinerData, h_conjugate_intertwiner, invert_matrix
from twzhu.zhu import zhu_quotient

ONE = Fraction(1)


def units(n):
    return [[[Fraction(int(r == i and c == j)) for c in range(n)] for r in range(n)]
            for i in range(n) for j in range(n)]


def M2():
    return matrix_algebra(units(2))


def simple_module(n=2):
    return TopLevelModule(n, [SparseMatrix.from_dense(m) for m in units(n)])


def scalar_algebra():
    return matrix_algebra([[[ONE]]])


def conj_action(A, G, n=2):
    """Matrix of x -> G x G^{-1} on the unit-matrix basis."""
    Gi = invert_matrix(G)
    cols = {}
    for k, e in enumerate(units(n)):
        X = G @ SparseMatrix.from_dense(e) @ Gi
        cols[k] = {n * r + c: v for r in range(n) for c in range(n) if (v := X.get(r, c))}
    return SparseMatrix(A.dim, A.dim, cols)


# -- tables -------------------------------------------------------------------------------

def test_tables_are_consistent():
    A = M2()
    assert A.check() == []
    assert regular_bimodule(A).check(A) == []
    assert simple_module().check(A) == []


def test_semisimplicity_test():
    assert is_semisimple(M2())
    # upper triangular 2x2 matrices have a radical
    T = matrix_algebra([units(2)[0], units(2)[1], units(2)[3]])
    assert not is_semisimple(T)


def test_central_idempotents():
    A = matrix_algebra([[[ONE, 0], [0, 0]], [[Fraction(0), 0], [0, ONE]]])
    idem = central_idempotents(A)
    assert len(idem) == 2
    for e in idem:
        assert A.mul(e, e) == e
    assert central_idempotents(M2()) == [M2().unit]


# -- fusion rules ---------------------------------------------------------------------------

def test_fusion_scalar_case():
    A = scalar_algebra()
    W = TopLevelModule(1, [SparseMatrix.identity(1)])
    assert fusion_dimension(A, regular_bimodule(A), W, W)[0] == 1


def test_fusion_zero_target():
    A = M2()
    Z = TopLevelModule(0, [SparseMatrix(0, 0)] * 4)
    assert fusion_dimension(A, regular_bimodule(A), simple_module(), Z) == (0, [])


def test_fusion_matrix_algebra_schur():
    A = M2()
    dim, maps = fusion_dimension(A, regular_bimodule(A), simple_module(), simple_module())
    assert dim == 1
    # the solution is b (x) w -> b w up to scalar
    f = maps[0]
    c = f[0].get(0, 0)
    for k, e in enumerate(units(2)):
        assert f.get(k, SparseMatrix(2, 2)) == SparseMatrix.from_dense(e).scale(c)


def test_fusion_symmetry_on_diagonal_algebra():
    A = matrix_algebra([[[ONE, 0], [0, 0]], [[Fraction(0), 0], [0, ONE]]])
    B = regular_bimodule(A)
    mods = [TopLevelModule(1, [SparseMatrix.identity(1, Fraction(int(i == j))) for j in range(2)]) for i in range(2)]
    N = [[fusion_dimension(A, B, x, y)[0] for y in mods] for x in mods]
    assert N == [[1, 0], [0, 1]]
    assert N == [list(r) for r in zip(*N)]


def test_fusion_on_heisenberg_twisted_sector(V6, twisted4, stable4):
    zq = zhu_quotient(V6, stable4, "theta", 4)
    A, B = algebra_from_zhu(zq), bimodule_from_zhu(zq)
    assert A.check() == [] and B.check(A) == []
    T = top_level_module(twisted4, zq)
    assert T.omega == Fraction(1, 16)
    assert fusion_dimension(A, B, T, T)[0] == 1


def test_incomplete_tables_detected(V6):
    # A(M(1)) is a polynomial ring: no finite truncation is closed
    with pytest.raises(IncompleteTablesError):
        algebra_from_zhu(zhu_quotient(V6, None, None, 4))


# -- zero modes ------------------------------------------------------------------------------

def test_zero_mode_of_module_vertex_operator(V6):
    zq = zhu_quotient(V6, None, None, 4)
    W = build_fock_module(V6, Fraction(1, 2), 4)
    zm = zero_mode(IntertwinerData.adjoint(W), zq)
    top = W.indices_at(W.lowest)
    for ai, m in zm.matrices.items():
        assert m == W.zero_mode({ai: ONE}).restrict(top, top)
    assert zm.matrices[V6.vacuum] == SparseMatrix.identity(1)


def test_zero_mode_vanishes_off_the_fixed_space(V6, twisted4):
    zm = zero_mode(IntertwinerData.adjoint(twisted4))
    odd = next(i for i in V6.indices_upto(3) if twisted4.mode_coset(i) != 0)
    assert zm({odd: ONE}).is_zero()


def test_zero_mode_relations_witness(V6):
    zq = zhu_quotient(V6, None, None, 4)
    W = build_fock_module(V6, Fraction(1, 2), 4)
    good = IntertwinerData.adjoint(W)
    alpha = next(i for i in V6.indices_at(1))

    def corrupted(i, n):
        m = good.basis_mode(i, n)
        return m.scale(2) if i == alpha else m

    bad = IntertwinerData(V6.adjoint, W, W, corrupted, 0, W.mode_coset, name="bad")
    with pytest.raises(ZeroModeError) as exc:
        zero_mode(bad, zq)
    assert "u=" in str(exc.value) or "generator" in str(exc.value)


def test_zero_mode_of_conjugated_intertwiner(V6, twisted4, stable4):
    top = {i: ONE for i in stable4.indices_at(stable4.lowest)}
    I = solve_intertwiner(stable4, twisted4, twisted4, top, name="I")
    Ih = h_conjugate_intertwiner(I, "theta")
    psi = twisted4.stabilizers["theta"]
    phi = stable4.stabilizers["theta"]
    rows = cols = twisted4.indices_at(twisted4.lowest)
    p = psi.restrict(rows, cols)
    pinv = invert_matrix(p)
    for ui in stable4.indices_upto(stable4.lowest + 2):
        u = {ui: ONE}
        lhs = zero_mode(Ih)(u)
        rhs = pinv @ zero_mode(I)(phi.apply(u)) @ p
        assert lhs == rhs


# -- stable modules -----------------------------------------------------------------------------

def test_stable_module_n1_twisted_fock(V6):
    W = build_twisted_fock(V6, cutoff=6)
    psi = solve_module_stabilizer(W, "theta")
    assert psi @ psi == SparseMatrix.identity(W.dim, (psi @ psi).get(0, 0))
    assert psi == W.stabilizers["theta"]


def test_stable_module_n2_swap():
    reps = [lambda x: SparseMatrix.identity(1, Fraction(int(x == 0))),
            lambda x: SparseMatrix.identity(1, Fraction(int(x == 1)))]
    st = fundamental_stable_module(reps, [1, 1], [0, 1], lambda x: [(ONE, 1 - x)])
    sq = st.psi @ st.psi
    assert st.dim == 2 and sq.get(0, 0) and sq.get(1, 1) and sq.get(0, 1) == 0
    assert st.psi.get(0, 0) == 0 and st.psi.get(0, 1) != 0


def test_stable_module_n1_scalar():
    st = fundamental_stable_module([lambda x: SparseMatrix.identity(1)], [1], [0], lambda x: [(ONE, x)])
    assert st.psi == SparseMatrix.identity(1)


def test_no_isomorphism_is_reported(V6):
    with pytest.raises(StableModuleError):
        solve_module_stabilizer(build_fock_module(V6, Fraction(1, 2), 3), "theta")


# -- decomposition of twisted symmetric functionals ------------------------------------------------

def test_decompose_zero_functional():
    A = scalar_algebra()
    h = SparseMatrix.identity(1)
    assert decompose_trace_functional(A, h, regular_bimodule(A), h, {}, {0: ONE}, 1).blocks == []


def test_decompose_scalar_toy():
    A = scalar_algebra()
    h = SparseMatrix.identity(1)
    res = decompose_trace_functional(A, h, regular_bimodule(A), h, {0: Fraction(5)}, {0: ONE}, 1)
    (blk,) = res.blocks
    assert blk.dim == 1 and blk.psi == SparseMatrix.identity(1) and blk.C == 1
    assert blk.I[0] == SparseMatrix.identity(1, Fraction(5))


def swap_toy():
    A = matrix_algebra([[[ONE, 0], [0, 0]], [[Fraction(0), 0], [0, ONE]]])
    sw = SparseMatrix.from_dense([[0, 1], [1, 0]])
    return A, sw, regular_bimodule(A, sw)


def test_swap_toy_full_family():
    A, sw, B = swap_toy()
    fam = valid_functionals(A, sw, B, sw, A.unit, 1)
    assert len(fam) == 1
    for c in range(-3, 4):
        F = {k: v * c for k, v in fam[0].items()}
        res = decompose_trace_functional(A, sw, B, sw, F, A.unit, 1)
        if c == 0:
            assert res.blocks == []
            continue
        (blk,) = res.blocks
        assert blk.s == 2 and blk.dim == 2 and blk.t_over_s == 1
        for b in range(B.dim):
            assert res.evaluate({b: ONE}) == F.get(b, 0)


def test_hypothesis_violations_are_named():
    A, sw, B = swap_toy()
    with pytest.raises(HypothesisError) as exc:
        decompose_trace_functional(A, sw, B, sw, {0: ONE}, A.unit, 1)
    assert "F(" in str(exc.value)
    # omega condition: r not an eigenvalue of omega
    with pytest.raises(HypothesisError):
        decompose_trace_functional(A, sw, B, sw, {0: ONE, 1: ONE}, A.unit, 2)


def test_non_semisimple_rejected():
    T = matrix_algebra([units(2)[0], units(2)[1], units(2)[3]])
    h = SparseMatrix.identity(3)
    B = regular_bimodule(T)
    fam = valid_functionals(T, h, B, h, T.unit, 1)
    F = fam[0] if fam else {}
    if not F:
        pytest.skip("no nonzero valid functional on the triangular toy")
    with pytest.raises(HypothesisError):
        decompose_trace_functional(T, h, B, h, F, T.unit, 1)


@pytest.mark.parametrize("seed", range(4))
def test_matrix_algebra_inner_twist(seed):
    rng = random.Random(seed)
    A = M2()
    while True:
        P = SparseMatrix.from_dense([[Fraction(rng.randint(-3, 3)) for _ in range(2)] for _ in range(2)])
        try:
            Pi = invert_matrix(P)
            break
        except ValueError:
            continue
    g = SparseMatrix.from_dense([[Fraction(0), ONE], [-ONE, Fraction(0)]])
    h = conj_action(A, P @ g @ Pi)
    B = regular_bimodule(A)
    fam = valid_functionals(A, h, B, h, A.unit, 1)
    assert len(fam) == 1
    scale = Fraction(rng.randint(1, 9), rng.randint(1, 9))
    F = {k: v * scale for k, v in fam[0].items()}
    res = decompose_trace_functional(A, h, B, h, F, A.unit, 1)
    (blk,) = res.blocks
    assert blk.s == 1 and blk.dim == 2
    for b in range(4):
        assert res.evaluate({b: ONE}) == F.get(b, 0)


def test_matrix_algebra_cyclotomic_twist():
    A = M2()
    G = SparseMatrix.from_dense([[zeta(4), Fraction(0)], [Fraction(0), ONE]])
    h = conj_action(A, G)
    B = regular_bimodule(A)
    fam = valid_functionals(A, h, B, h, A.unit, 1)
    assert fam
    F = {k: v * 3 for k, v in fam[0].items()}
    res = decompose_trace_functional(A, h, B, h, F, A.unit, 1)
    for b in range(4):
        assert res.evaluate({b: ONE}) == F.get(b, 0)


def test_stabilizer_block_relation():
    A, sw, B = swap_toy()
    F = valid_functionals(A, sw, B, sw, A.unit, 1)[0]
    (blk,) = decompose_trace_functional(A, sw, B, sw, F, A.unit, 1).blocks
    psi_inv = invert_matrix(blk.psi)
    for i in range(A.dim):
        ha = sw.column(i)
        lhs = SparseMatrix(2, 2)
        for j, c in ha.items():
            lhs = lhs + blk.module[j].scale(c)
        assert lhs == blk.psi @ blk.module[i] @ psi_inv


def test_twisted_symmetry_equivalent_form():
    A, sw, B = swap_toy()
    F = valid_functionals(A, sw, B, sw, A.unit, 1)[0]
    # F vanishes on phi(h)-eigenvectors with eigenvalue -1
    anti = {0: ONE, 1: -ONE}
    assert sum(F.get(k, 0) * v for k, v in anti.items()) == 0
    assert check_hypotheses(A, sw, B, sw, F, A.unit, 1) == []


def test_averaging_projector():
    # B = C^3 over A = C, phi swaps e0 and e1, B' = span(e0 + e1) is invariant and
    # sigma projects along B' onto the non-invariant complement span(e0, e2)
    A = scalar_algebra()
    phi = SparseMatrix.from_dense([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    sigma = SparseMatrix.from_dense([[1, -1, 0], [0, 0, 0], [0, 0, 1]])
    assert sigma @ sigma == sigma
    rho = averaging_projector(phi, sigma, 2)
    assert rho @ rho == rho
    assert rho @ phi == phi @ rho
    assert rho.apply({0: ONE, 1: ONE}) == {}
    B = BimoduleTables(3, [SparseMatrix.identity(3, ONE)], [SparseMatrix.identity(3, ONE)])
    assert B.check(A) == []
    assert rho @ B.left[0] == B.left[0] @ rho and rho @ B.right[0] == B.right[0] @ rho


def test_averaging_projector_on_decomposition_blocks():
    A, sw, B = swap_toy()
    F = valid_functionals(A, sw, B, sw, A.unit, 1)[0]
    (blk,) = decompose_trace_functional(A, sw, B, sw, F, A.unit, 1).blocks
    # the averaged map satisfies I(phi b) = psi I(b) psi^{-1}
    psi_inv = invert_matrix(blk.psi)
    for b in range(B.dim):
        pb = sw.column(b)
        lhs = SparseMatrix(blk.dim, blk.dim)
        for j, c in pb.items():
            lhs = lhs + blk.I[j].scale(c)
        assert lhs == blk.psi @ blk.I[b] @ psi_inv
