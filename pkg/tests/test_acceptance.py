"""Acceptance criteria 1-11 on the Heisenberg instance.

Each criterion prints one PASS/FAIL line.  Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""

import random
import time
from fractions import Fraction

import pytest

from twzhu.exact import root_of_unity, zeta
from twzhu.fusion import (TopLevelModule, decompose_trace_functional, fusion_dimension, matrix_algebra,
                          regular_bimodule, valid_functionals)
from twzhu.instances import (build_fock_module, build_heisenberg, build_stable_untwisted_module,
                             build_twisted_fock, eta_quotient_oracle, signed_partition_character,
                             solve_intertwiner)
from twzhu.linalg import SparseMatrix
from twzhu.qseries import S_MATRIX, T_MATRIX
from twzhu.trace import (SECTORS, c2a_quotient_dims, c4_residual, check_vanishing_on_O,
                         constant_term_identities, heisenberg_sector_trace, modular_sector_check, sector_act,
                         sector_generators, sector_tag, t_shifted)
from twzhu.voa import IntertwinerData, check_bracket_virasoro, invert_matrix
from twzhu.zhu import commutator_identity_check, verify_bimodule_axioms, zhu_quotient

ONE = Fraction(1)
_SHARED = {}


def shared(key, build):
    if key not in _SHARED:
        _SHARED[key] = build()
    return _SHARED[key]


def V6():
    return shared("V6", lambda: build_heisenberg(6))


def V7():
    return shared("V7", lambda: build_heisenberg(7))


def traces10():
    return shared("S10", lambda: {sec: heisenberg_sector_trace(V7(), *sec, 10) for sec in SECTORS})


# -- criteria ---------------------------------------------------------------------------------

def criterion_1():
    V = V6()
    stable = build_stable_untwisted_module(V, Fraction(1, 3), 6)
    notes, ok = [], True
    for g in (None, "theta"):
        for U in (None, stable):
            zq = zhu_quotient(V, U, g, 6)
            bad = verify_bimodule_axioms(zq)
            ok &= not bad
            notes.append(f"g={g or '1'} U={(U or V.adjoint).name}: {len(bad)} violations")
    return ok, "; ".join(notes)


def criterion_2():
    V = V6()
    bad = commutator_identity_check(V, None, None, 5) + commutator_identity_check(V, None, "theta", 5)
    return not bad, f"{len(bad)} violations for wt a + wt u <= 5"


def criterion_3():
    V = V7()
    total, bad = 0, []
    for sec in SECTORS:
        rows = constant_term_identities(V, None, *sec, 5)
        total += len(rows)
        bad += [r for r in rows if not r[3]]
    kinds = {r[2] for sec in SECTORS for r in constant_term_identities(V, None, *sec, 2)}
    ok = not bad and kinds == {"i-a", "i-b", "ii-a", "ii-b"}
    return ok, f"{total} identities, {len(bad)} failures, families {sorted(kinds)}"


def criterion_4():
    V = V6()
    bad = check_bracket_virasoro(V, span=2)
    return not bad, f"{len(bad)} violations for |m|,|n| <= 2, c = {V.central_charge}"


def criterion_5():
    V = V7()
    notes, ok = [], True
    for sec, S in traces10().items():
        gens = sector_generators(V, V.adjoint, *sec, 5, 10)
        bad = check_vanishing_on_O(S, gens)
        ok &= not bad and bool(gens)
        notes.append(f"{sector_tag(*sec)}: {len(bad)}/{len(gens)} nonzero")
    return ok, "; ".join(notes)


def criterion_6():
    V = V7()
    notes, ok = [], True
    for sec in SECTORS:
        S = heisenberg_sector_trace(V, *sec, 8)
        for name, u in (("1", {V.vacuum: ONE}), ("omega~", V.omega_tilde)):
            z = c4_residual(S, V.adjoint, u).is_zero()
            ok &= z
            if not z:
                notes.append(f"{sector_tag(*sec)} u={name} nonzero")
    return ok, "; ".join(notes) or "all residuals zero to order 8"


def criterion_7():
    V = V7()
    ok, notes = True, []
    for sec, S in traces10().items():
        s = S({V.vacuum: ONE})
        oracle, _ = eta_quotient_oracle(sec, 10)
        lead = s.valuation()
        ratio = s.coefficient(lead) / oracle.coefficient(lead)
        good = lead == oracle.valuation() and s.agrees_with(oracle.scale(ratio), lead + 10)
        ok &= good
        notes.append(f"{sector_tag(*sec)}: {'match' if good else 'MISMATCH'} ({len(s.exponents())} terms)")
    return ok, "; ".join(notes)


TAUS = [complex(x, y) for x, y in ((0.1, 0.8), (-0.3, 0.9), (0.25, 1.0), (-0.1, 1.1),
                                   (0.4, 1.2), (-0.45, 1.3), (0.05, 1.4), (0.3, 1.5))]


def _weight(sec):
    return Fraction(-1, 2) if sec == (None, None) else Fraction(0)


def criterion_8():
    V = V7()
    chars = {sec: signed_partition_character(sec, 200) for sec in SECTORS}
    fns = {sec: (lambda s: lambda t: s.evaluate(t))(chars[sec]) for sec in SECTORS}
    ok, notes, worst = True, [], 0.0
    for sec, S in traces10().items():
        # the 200-term characters agree with the computed traces where both exist
        s = S({V.vacuum: ONE})
        ok &= s.agrees_with(chars[sec], s.prec)
    for sec in SECTORS:
        tgt = sector_act(sec, T_MATRIX)
        shifted = t_shifted(chars[sec])
        lead = chars[tgt].valuation()
        ratio = shifted.coefficient(lead) / chars[tgt].coefficient(lead)
        exact = shifted == chars[tgt].scale(ratio) and any(ratio == root_of_unity(k, 48) for k in range(48))
        ok &= exact
        res_t = modular_sector_check({"s": fns[sec]}, {"t": fns[tgt]}, T_MATRIX, TAUS, _weight(sec))
        tgt = sector_act(sec, S_MATRIX)
        res_s = modular_sector_check({"s": fns[sec]}, {"t": fns[tgt]}, S_MATRIX, TAUS, _weight(sec))
        ok &= res_t < 1e-8 and res_s < 1e-8
        worst = max(worst, res_t, res_s)
        notes.append(f"{sector_tag(*sec)} T {'exact' if exact else 'NOT EXACT'}")
    return ok, "; ".join(notes) + f"; worst residual {worst:.2e}"


def _units(n):
    return [[[Fraction(int(r == i and c == j)) for c in range(n)] for r in range(n)]
            for i in range(n) for j in range(n)]


def _reconstructs(A, hA, B, phi, F, omega, r):
    res = decompose_trace_functional(A, hA, B, phi, F, omega, r)
    return all(res.evaluate({b: ONE}) == F.get(b, 0) for b in range(B.dim)), res


def criterion_9():
    ok, notes = True, []
    # (a) one-dimensional toys
    C = matrix_algebra([[[ONE]]])
    idC = SparseMatrix.identity(1)
    for c in (Fraction(5), Fraction(-2, 3), zeta(3)):
        good, res = _reconstructs(C, idC, regular_bimodule(C), idC, {0: c}, {0: ONE}, 1)
        ok &= good and len(res.blocks) == 1
    good, res = _reconstructs(C, idC, regular_bimodule(C), idC, {}, {0: ONE}, 1)
    ok &= good and res.blocks == []
    notes.append("1-dim toys")
    # (b) C + C with the swap, every F in the valid family
    A = matrix_algebra([[[ONE, 0], [0, 0]], [[Fraction(0), 0], [0, ONE]]])
    sw = SparseMatrix.from_dense([[0, 1], [1, 0]])
    B = regular_bimodule(A, sw)
    fam = valid_functionals(A, sw, B, sw, A.unit, 1)
    count = 0
    for c in range(-4, 5):
        for base in fam:
            good, res = _reconstructs(A, sw, B, sw, {k: v * c for k, v in base.items()}, A.unit, 1)
            ok &= good and all(bl.s == 2 for bl in res.blocks)
            count += 1
    notes.append(f"swap family dim {len(fam)}, {count} functionals")
    # (c) 2x2 matrices, h inner of order 3
    rng = random.Random(2024)
    M2 = matrix_algebra(_units(2))
    while True:
        P = SparseMatrix.from_dense([[Fraction(rng.randint(-3, 3)) for _ in range(2)] for _ in range(2)])
        try:
            Pi = invert_matrix(P)
            break
        except ValueError:
            pass
    G = P @ SparseMatrix.from_dense([[zeta(3), Fraction(0)], [Fraction(0), ONE]]) @ Pi
    Gi = invert_matrix(G)
    cols = {}
    for k, e in enumerate(_units(2)):
        X = G @ SparseMatrix.from_dense(e) @ Gi
        cols[k] = {2 * r + c: v for r in range(2) for c in range(2) if (v := X.get(r, c))}
    h = SparseMatrix(4, 4, cols)
    BM = regular_bimodule(M2)
    fam = valid_functionals(M2, h, BM, h, M2.unit, 1)
    scale = Fraction(rng.randint(1, 9), rng.randint(1, 9))
    good, res = _reconstructs(M2, h, BM, h, {k: v * scale for k, v in fam[0].items()}, M2.unit, 1)
    ok &= len(fam) == 1 and good
    notes.append(f"M2 inner order-3 twist: {'exact' if good else 'MISMATCH'}")
    return ok, "; ".join(notes)


def criterion_10():
    M2 = matrix_algebra(_units(2))
    B = regular_bimodule(M2)
    W = TopLevelModule(2, [SparseMatrix.from_dense(m) for m in _units(2)])
    Z = TopLevelModule(0, [SparseMatrix(0, 0)] * 4)
    d1 = fusion_dimension(M2, B, W, W)[0]
    d0 = fusion_dimension(M2, B, W, Z)[0]
    V = build_heisenberg(4)
    same = True
    for Wm in (build_fock_module(V, Fraction(1, 2), 4), build_twisted_fock(V, cutoff=4)):
        I = solve_intertwiner(V.adjoint, Wm, Wm, {V.vacuum: ONE})
        Y = IntertwinerData.adjoint(Wm)
        for i in range(V.dim):
            for n in range(-5, 5):
                n = n + Wm.mode_coset(i)
                same &= I.basis_mode(i, n) == Y.basis_mode(i, n)
    ok = d1 == 1 and d0 == 0 and same
    return ok, f"Schur toy {d1}, zero target {d0}, U=V reproduces modes: {same}"


def criterion_11():
    dims = c2a_quotient_dims(V6(), cutoffs=(4, 5, 6))
    ok = len({d for _, d in dims}) == 1
    return ok, f"dims {dims}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11]


def run_criterion(k):
    t = time.time()
    ok, detail = CRITERIA[k - 1]()
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  ({time.time() - t:.1f}s) {detail}"
    return ok, line


@pytest.mark.parametrize("k", range(1, 12))
def test_acceptance(k, capsys):
    ok, line = run_criterion(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    for k in range(1, 12):
        print(run_criterion(k)[1], flush=True)
