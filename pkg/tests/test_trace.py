import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from twzhu.exact import root_of_unity
from twzhu.instances import (FockModule, build_heisenberg, eta_quotient_oracle, partition_count,
                             signed_partition_character)
from twzhu.linalg import SparseMatrix
from twzhu.qseries import S_MATRIX, T_MATRIX, ModularMatrix, PuiseuxSeries
from twzhu.trace import (SECTORS, ModularFitError, c2a_quotient_dims, c4_residual, check_vanishing_on_O,
                         constant_term_identities, find_l2_relation, heisenberg_sector_trace, modular_sector_check, omega_star_residual,
                         omega_star_tau, parse_sector, sector_act, sector_generators, t_action_check, t_shifted,
                         trace_expansion)
from twzhu.voa import IntertwinerData, ValidationError

ONE = Fraction(1)


@pytest.fixture(scope="module")
def traces(V6):
    return {sec: heisenberg_sector_trace(V6, *sec, 8) for sec in SECTORS}


def vac(V):
    return {V.vacuum: ONE}


# -- expansions ------------------------------------------------------------------------------

def test_vacuum_trace_counts_partitions(traces, V6):
    S = traces[(None, None)](vac(V6))
    assert S.valuation() == Fraction(-1, 24)
    for n in range(8):
        assert S.coefficient(n - Fraction(1, 24)) == partition_count(n)
    assert S.coefficient(3 - Fraction(1, 24)) == 3


@pytest.mark.parametrize("sector", SECTORS)
def test_vacuum_trace_matches_eta_quotient(traces, V6, sector):
    S = traces[sector](vac(V6))
    oracle, _ = eta_quotient_oracle(sector, 8)
    lead = S.valuation()
    assert oracle.valuation() == lead
    ratio = S.coefficient(lead) / oracle.coefficient(lead)
    assert S.agrees_with(oracle.scale(ratio), 8 + lead)


def test_twisted_leading_exponents(traces, V6):
    S = traces[("theta", None)](vac(V6))
    exps = sorted(S.exponents())
    assert exps[0] == Fraction(1, 48)
    assert exps[1] == Fraction(1, 48) + Fraction(1, 2)
    assert S.coefficient(exps[1]) == 1
    assert traces[("theta", None)].leading_exponent == Fraction(1, 16) - Fraction(1, 24)


def test_conformal_vector_gives_energy_derivative(traces, V6):
    # o(omega) = L(0), so S(omega) = (q d/dq + c/24) S(1)
    for S in traces.values():
        s1 = S(vac(V6))
        assert S(V6.omega) == s1.q_derivative() + s1.scale(Fraction(1, 24))


@settings(max_examples=25, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 10 ** 6))
def test_linearity(a, b, seed):
    V = _V()
    S = _traces()[("theta", "theta")]
    rng = random.Random(seed)
    basis = V.indices_upto(3)
    u = {rng.choice(basis): ONE}
    v = {rng.choice(basis): ONE}
    w = {}
    for vec, c in ((u, a), (v, b)):
        for k, x in vec.items():
            w[k] = w.get(k, 0) + c * x
    w = {k: x for k, x in w.items() if x}
    assert S(w) == S(u).scale(a) + S(v).scale(b)


_CACHE = {}


def _V():
    if "V" not in _CACHE:
        _CACHE["V"] = build_heisenberg(6)
    return _CACHE["V"]


def _traces():
    if "S" not in _CACHE:
        _CACHE["S"] = {sec: heisenberg_sector_trace(_V(), *sec, 6) for sec in SECTORS}
    return _CACHE["S"]


def test_scalar_covariance(V6, twisted4):
    I = IntertwinerData.adjoint(twisted4)
    from twzhu.voa import invert_matrix
    psi_inv = invert_matrix(twisted4.stabilizers["theta"])
    S = trace_expansion(I, psi_inv, 4, ("theta", "theta"))
    S3 = trace_expansion(I, psi_inv.scale(Fraction(1, 3)), 4, ("theta", "theta"))
    for u in (vac(V6), V6.omega, V6.omega_tilde):
        assert S3(u) == S(u).scale(Fraction(1, 3))


def test_no_log_terms(traces):
    assert all(S.p == 0 for S in traces.values())


# -- O(g,h) -----------------------------------------------------------------------------------

@pytest.mark.parametrize("sector", SECTORS)
def test_trace_vanishes_on_sector_generators(V6, sector):
    S = heisenberg_sector_trace(V6, *sector, 5)
    gens = sector_generators(V6, V6.adjoint, *sector, 4, 5)
    assert gens
    assert check_vanishing_on_O(S, gens) == []


def test_generator_families_present(V6):
    fams = {g.family for g in sector_generators(V6, V6.adjoint, None, None, 3, 3)}
    assert fams == {1, 2}
    fams = {g.family for g in sector_generators(V6, V6.adjoint, "theta", None, 3, 3)}
    assert fams == {1, 2, 3, 4}


def test_family_one_zero_element(V6):
    gens = sector_generators(V6, V6.adjoint, None, None, 2, 3)
    g = next(x for x in gens if x.family == 1 and x.u == V6.vacuum and x.a == V6.vacuum)
    assert all(not vec for _, vec in g.terms)


def test_non_stabilizing_psi_is_rejected(V6):
    W = FockModule(V6, 4, name="M(1)")
    W.stabilizers["theta"] = SparseMatrix.identity(W.dim)
    I = IntertwinerData.adjoint(W)
    with pytest.raises(ValidationError):
        trace_expansion(I, None, 5, (None, "theta"))
    S = trace_expansion(I, SparseMatrix.identity(W.dim), 5, (None, "theta"), validate=False)
    assert check_vanishing_on_O(S, sector_generators(V6, V6.adjoint, None, "theta", 4, 5))


def test_random_non_O_element_has_nonzero_trace(V6):
    S = heisenberg_sector_trace(V6, None, None, 5)
    gens = sector_generators(V6, V6.adjoint, None, None, 4, 5)
    rng = random.Random(7)
    comb = [(ONE, vac(V6))]
    for g in rng.sample(gens, 10):
        c = Fraction(rng.randint(-4, 4))
        comb += [(f * c if isinstance(f, PuiseuxSeries) else f * c, v) for f, v in g.terms]
    assert not S.combination(comb).is_zero()
    assert S.combination(comb[1:]).is_zero()


# -- C4 and omega~* ---------------------------------------------------------------------------

@pytest.mark.parametrize("sector", SECTORS)
def test_c4(traces, V6, sector):
    S = traces[sector]
    assert c4_residual(S, V6.adjoint, vac(V6)).is_zero()
    assert c4_residual(S, V6.adjoint, V6.omega_tilde).is_zero()


def test_c4_vacuum_is_derivative(traces, V6):
    S = traces[(None, None)]
    assert S(V6.omega_tilde) == S(vac(V6)).q_derivative()


def test_c4_refuses_non_invariant(traces, V6):
    alpha = {next(iter(V6.indices_at(1))): ONE}
    with pytest.raises(ValueError):
        c4_residual(traces[(None, "theta")], V6.adjoint, alpha)


def test_omega_star_of_vacuum(V6):
    terms = [(f, v) for f, v in omega_star_tau(V6.adjoint, vac(V6), 4) if v]
    assert terms == [(ONE, V6.omega_tilde)]


@pytest.mark.parametrize("N", [1, 2])
def test_omega_star_annihilates(traces, V6, N):
    for S in traces.values():
        assert omega_star_residual(S, V6.adjoint, vac(V6), N).is_zero()
        assert omega_star_residual(S, V6.adjoint, V6.omega_tilde, 2).is_zero()


# -- constant terms and C2A ---------------------------------------------------------------------

@pytest.mark.parametrize("sector", SECTORS)
def test_constant_term_identities(V6, sector):
    rows = constant_term_identities(V6, None, *sector, 4)
    assert rows
    assert [r for r in rows if not r[3]] == []


def test_constant_term_identity_kinds(V6):
    kinds = {r[2] for r in constant_term_identities(V6, None, "theta", None, 3)}
    assert kinds == {"i-a", "i-b", "ii-a"}
    kinds = {r[2] for r in constant_term_identities(V6, None, None, "theta", 3)}
    assert kinds == {"i-a", "i-b", "ii-b"}


def test_c2a_quotient_stabilizes(V6):
    dims = c2a_quotient_dims(V6, cutoffs=(4, 5, 6))
    assert len({d for _, d in dims}) == 1


# -- modular checks ---------------------------------------------------------------------------

TAUS = [complex(x, y) for x, y in ((0.1, 0.8), (-0.3, 0.9), (0.25, 1.0), (-0.1, 1.1),
                                   (0.4, 1.2), (-0.45, 1.3), (0.05, 1.4), (0.3, 1.5))]


def test_sector_action():
    assert sector_act((None, "theta"), S_MATRIX) == ("theta", None)
    assert sector_act(("theta", None), T_MATRIX) == ("theta", "theta")
    assert sector_act((None, "theta"), T_MATRIX) == (None, "theta")
    assert parse_sector("θ,1") == ("theta", None)


def test_t_action_exact():
    S = signed_partition_character(("theta", None), 40)
    T = signed_partition_character(("theta", "theta"), 40)
    shifted = t_shifted(S)
    ratio = shifted.coefficient(Fraction(1, 48)) / T.coefficient(Fraction(1, 48))
    assert ratio == root_of_unity(1, 48)
    assert shifted == T.scale(ratio)
    assert t_action_check(S) < 1e-12


def _fn(sector, n=200):
    s = signed_partition_character(sector, n)
    return lambda t: s.evaluate(t)


def test_s_action_numeric():
    res = modular_sector_check({"s": _fn((None, "theta"))}, {"t": _fn(("theta", None))}, S_MATRIX, TAUS)
    assert res < 1e-8


def test_s_action_weight_half_on_untwisted_sector():
    f = _fn((None, None))
    assert modular_sector_check({"s": f}, {"t": f}, S_MATRIX, TAUS, weight=Fraction(-1, 2)) < 1e-8


def test_identity_matrix_residual():
    f = _fn((None, "theta"), 60)
    assert modular_sector_check({"s": f}, {"t": f}, ModularMatrix(1, 0, 0, 1), TAUS[:3]) < 1e-12


def test_wrong_target_sector_fails():
    res = modular_sector_check({"s": _fn((None, "theta"))}, {"t": _fn(("theta", "theta"))}, S_MATRIX, TAUS)
    assert res > 1e-3


def test_ill_conditioned_fit_is_reported():
    f = _fn((None, "theta"), 30)
    with pytest.raises(ModularFitError):
        modular_sector_check({"s": f}, {"a": f, "b": f}, S_MATRIX, TAUS)
    with pytest.raises(ModularFitError):
        modular_sector_check({"s": f}, {"a": f, "b": f}, S_MATRIX, TAUS[:1])


def test_oracle_function_agrees_with_series():
    series, fn = eta_quotient_oracle(("theta", "theta"), 60)
    t = complex(0.2, 1.1)
    assert abs(complex(fn(t)) - complex(series.evaluate(t))) < 1e-12


# -- L[-2] relations ------------------------------------------------------------------------------

def test_l2_relation_in_weight_zero_sectors(traces, V6):
    # the three weight-zero sector functions satisfy one third-order equation
    found = [find_l2_relation(traces[sec], V6.adjoint, vac(V6), 3) for sec in SECTORS[1:]]
    assert found[0] is not None
    assert found[0] == found[1] == found[2]
    assert set(found[0][0]) == {(0, 1)} and set(found[0][1]) == {(1, 0)} and found[0][2] == {}
    assert find_l2_relation(traces[(None, "theta")], V6.adjoint, vac(V6), 2) is None


def test_l2_relation_absent_for_untwisted_character(traces, V6):
    # 1/eta has weight -1/2, so E_2 terms would be needed
    for m in (1, 2, 3):
        assert find_l2_relation(traces[(None, None)], V6.adjoint, vac(V6), m) is None
