from fractions import Fraction

import pytest

from twzhu.instances import alpha_vector, build_heisenberg, build_twisted_fock
from twzhu.linalg import SparseMatrix, vadd
from twzhu.voa import (IntertwinerData, L_bracket_apply, TruncationError, ValidationError, bracket_apply,
                       bracket_mode, bracket_weights, check_bracket_virasoro, check_mode_weights,
                       check_stabilizer, check_twisted_jacobi, check_virasoro, conjugate_module, dump_module,
                       dump_voa, h_conjugate_intertwiner, load_module, load_voa, validate_module, validate_voa)


def vec(V, name):
    for i in range(V.dim):
        if V.label_str(i) == name:
            return {i: Fraction(1)}
    raise KeyError(name)


def test_heisenberg_validation_suite(V6):
    report = validate_voa(V6)
    assert all(not bad for bad in report.values()), report


def test_mode_weight_bookkeeping(V6, twisted4):
    assert check_mode_weights(V6.adjoint) == []
    assert check_mode_weights(twisted4) == []


def test_virasoro_round_and_bracket(V6):
    assert check_virasoro(V6) == []
    assert check_bracket_virasoro(V6) == []


def test_bracket_weight_one_zero_mode(V6):
    a = alpha_vector(V6)
    assert bracket_mode(V6.adjoint, a, 0) == V6.mode(a, 0)


def test_bracket_creation(V6):
    for i in V6.indices_upto(3):
        x = {i: Fraction(1)}
        assert bracket_apply(V6.adjoint, x, -1, {V6.vacuum: Fraction(1)}) == x


def test_omega_bracket_zero_is_L_minus1_plus_L0(V6):
    W = V6.adjoint
    for i in V6.indices_upto(4):
        x = {i: Fraction(1)}
        want = vadd(V6.apply(V6.omega, 0, x, False), V6.apply(V6.omega, 1, x, False))
        assert bracket_apply(W, V6.omega, 0, x, strict=False) == want


def test_L_bracket_minus1(V6):
    # L[-1] = L(-1) + L(0)
    for i in V6.indices_upto(4):
        x = {i: Fraction(1)}
        want = vadd(V6.apply(V6.omega, 0, x, False), V6.apply(V6.omega, 1, x, False))
        assert L_bracket_apply(V6.adjoint, -1, x, strict=False) == want


def test_bracket_weights(V6):
    bw = bracket_weights(V6.adjoint, 4)
    assert {V6.vacuum: Fraction(1)} in bw[0]
    # omega~ is an L[0] eigenvector of weight 2
    wt = V6.omega_tilde
    assert L_bracket_apply(V6.adjoint, 0, wt) == {k: 2 * c for k, c in wt.items()}
    a = alpha_vector(V6)
    assert a in bw[1]
    for k, vs in bw.items():
        for x in vs:
            assert L_bracket_apply(V6.adjoint, 0, x, strict=False) == {i: k * c for i, c in x.items() if k}


def test_automorphism_and_stabilizers(V6, twisted4):
    theta = V6.automorphisms["theta"]
    assert theta @ theta == SparseMatrix.identity(V6.dim)
    assert check_stabilizer(twisted4, "theta") == []


def test_conjugate_module(V6, twisted4):
    same = conjugate_module(twisted4, "theta")
    a = alpha_vector(V6)
    (ai,) = a
    n = Fraction(1, 2)
    assert same.mode(a, n) == -twisted4.mode(a, n)
    twice = conjugate_module(same, "theta")
    for i in V6.indices_upto(2):
        for k in (-Fraction(3, 2), -Fraction(1, 2), Fraction(1, 2)):
            if twisted4.mode_coset(i) == k - (k // 1):
                assert twice.mode({i: Fraction(1)}, k) == twisted4.mode({i: Fraction(1)}, k)
    # psi(theta) intertwines W and W o theta
    psi = twisted4.stabilizers["theta"]
    assert psi @ twisted4.mode(a, n) == same.mode(a, n) @ psi


def test_h_conjugate_adjoint_intertwiner(V6, twisted4):
    I = IntertwinerData.adjoint(twisted4)
    Ih = h_conjugate_intertwiner(I, "theta")
    for i in V6.indices_upto(2):
        c = twisted4.mode_coset(i)
        for n in (c - 1, c, c + 1):
            assert Ih.basis_mode(i, n) == I.basis_mode(i, n)


def test_h_conjugate_missing_stabilizer(V6):
    from twzhu.instances import build_fock_module
    W = build_fock_module(V6, Fraction(1, 2), 3)
    with pytest.raises(KeyError):
        h_conjugate_intertwiner(IntertwinerData.adjoint(W), "theta")


def test_jacobi_on_untwisted_and_twisted(V6, twisted4):
    I = IntertwinerData.adjoint(V6.adjoint)
    for a in V6.indices_upto(2):
        for u in V6.indices_upto(2):
            assert check_twisted_jacobi(V6, I, a, u, range(-2, 2), range(-2, 2), range(-2, 2),
                                        w_degree=1, skip_truncated=True) == []
    It = IntertwinerData.adjoint(twisted4)
    half = [Fraction(k, 2) for k in range(-4, 4)]
    for a in V6.indices_upto(2):
        for u in V6.indices_upto(2):
            assert check_twisted_jacobi(V6, It, a, u, range(-2, 2), half, half, w_degree=1,
                                        skip_truncated=True) == []


def test_jacobi_vacuum_trivial(V6):
    I = IntertwinerData.adjoint(V6.adjoint)
    assert check_twisted_jacobi(V6, I, V6.vacuum, V6.vacuum, range(-2, 2), range(-2, 2), range(-2, 2),
                                skip_truncated=True) == []


def test_jacobi_window_beyond_cutoff_raises(V4):
    I = IntertwinerData.adjoint(V4.adjoint)
    a = next(iter(alpha_vector(V4)))
    with pytest.raises(TruncationError):
        check_twisted_jacobi(V4, I, a, a, [-6], [-6], [-6], w_degree=2)


def test_corrupted_mode_detected():
    V = build_heisenberg(4)
    W = build_twisted_fock(V, cutoff=3)
    text = dump_module(W)
    lines = text.splitlines()
    k = lines.index("a(-1)1 1/2 0 1 1/2")
    lines[k] = "a(-1)1 1/2 0 1 1"
    bad = load_module("\n".join(lines) + "\n", V, validate=False)
    I = IntertwinerData.adjoint(bad)
    a = next(iter(alpha_vector(V)))
    half = [Fraction(k, 2) for k in range(-3, 3)]
    found = check_twisted_jacobi(V, I, a, a, range(-2, 1), half, half, w_degree=1, skip_truncated=True)
    assert found and all(len(q) == 6 for q in found)
    with pytest.raises(ValidationError):
        load_module("\n".join(lines) + "\n", V, validate=True)


def test_file_roundtrip():
    V = build_heisenberg(4)
    V2 = load_voa(dump_voa(V))
    assert dump_voa(V2) == dump_voa(V)
    W = build_twisted_fock(V, cutoff=3)
    W2 = load_module(dump_module(W), V2)
    assert dump_module(W2) == dump_module(W)
    assert all(not b for b in validate_module(W2).values())


def test_loader_rejects_broken_vacuum():
    V = build_heisenberg(3)
    text = dump_voa(V).replace("1 -1 0 0 1\n", "1 -1 0 0 2\n", 1)
    with pytest.raises(ValidationError):
        load_voa(text)


def test_twisted_top_weight_shift_breaks_virasoro(V6):
    ok = build_twisted_fock(V6, cutoff=4)
    assert check_virasoro(V6, ok) == []
    for eps in (Fraction(1, 16) + Fraction(1, 2), Fraction(1, 16) - Fraction(1, 2), Fraction(0)):
        bad = build_twisted_fock(V6, cutoff=4, top_weight=eps)
        report = validate_module(bad)
        assert report["L0_grading"] or report["virasoro"]
