from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentkit import filtstab as fs

STABLE = (fs.BundleData(2, 0), fs.SectionFiltration((1,), (-1,), (1,)))
UNSTABLE = (fs.BundleData(2, 0), fs.SectionFiltration((1,), (1,), (1,)))
EQUAL = (fs.BundleData(2, 1), fs.SectionFiltration((1,), (0,), (1,)))
taus = st.sampled_from([F(1), F(1, 2), F(1, 3), F(1, 4), F(3, 4), F(2)])


@st.composite
def instances(draw, max_rank=4):
    R = draw(st.integers(2, max_rank))
    n = draw(st.integers(0, min(2, R - 1)))
    ranks = sorted(draw(st.lists(st.integers(1, R - 1), min_size=n, max_size=n, unique=True)))
    degs = draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    ts = draw(st.lists(taus, min_size=n, max_size=n))
    return fs.BundleData(R, draw(st.integers(-3, 3))), fs.SectionFiltration(tuple(ranks), tuple(degs), tuple(ts))


@st.composite
def weights(draw, R):
    k = draw(st.integers(0, R - 1))
    ranks = sorted(draw(st.lists(st.integers(1, R - 1), min_size=k, max_size=k, unique=True)))
    degs = draw(st.lists(st.integers(-4, 4), min_size=k, max_size=k))
    ms = draw(st.lists(st.fractions(max_value=F(-1, 6), min_value=-5, max_denominator=6), min_size=k, max_size=k))
    return fs.ParabolicWeights(draw(st.fractions(-3, 3, max_denominator=5)), tuple(ranks), tuple(degs), tuple(ms))


def test_central_c_examples():
    assert fs.central_c(fs.BundleData(3, 6), fs.SectionFiltration()) == 2
    assert fs.central_c(*STABLE) == F(1, 2)
    filt = fs.SectionFiltration((1, 2), (0, 0), (F(1, 2), F(1, 3)))
    assert fs.central_c(fs.BundleData(3, 1), filt) == F(13, 18)


def test_invariants():
    with pytest.raises(fs.InvariantError):
        fs.BundleData(0, 1)
    with pytest.raises(fs.InvariantError):
        fs.SectionFiltration((2, 1), (0, 0), (1, 1))
    with pytest.raises(fs.InvariantError):
        fs.SectionFiltration((1,), (0,), (0,))
    with pytest.raises(fs.InvariantError):
        fs.central_c(fs.BundleData(2, 0), fs.SectionFiltration((2,), (0,), (1,)))
    with pytest.raises(fs.InvariantError):
        fs.ParabolicWeights(0, (1,), (0,), (1,))
    with pytest.raises(fs.InvariantError):
        fs.slope_test(*STABLE, fs.Subobject(1, 0, (2,)))


def test_slope_examples():
    v0 = fs.Subobject(1, -1, (1,))
    assert fs.sub_slope(STABLE[1], v0) == 0
    assert fs.slope_test(*STABLE, v0) == "StrictPass"
    assert fs.slope_test(*UNSTABLE, fs.Subobject(1, 1, (1,))) == "Violated"
    assert fs.slope_test(*EQUAL, fs.Subobject(1, 0, (1,))) == "Equality"


def test_deg_pair_example():
    pw = fs.ParabolicWeights(0, (1,), (-1,), (-1,))
    assert fs.deg_pair(fs.BundleData(2, 0), pw) == 1
    assert fs.deg_pair(fs.BundleData(3, 5), fs.ParabolicWeights(F(2, 3), (), (), ())) == F(10, 3)


@given(st.integers(2, 5).flatmap(lambda R: st.tuples(st.just(R), st.integers(-5, 5), weights(R))))
def test_deg_pair_eigen_form(args):
    R, d, pw = args
    b = fs.BundleData(R, d)
    eigs = fs.eigenvalues(b, pw)
    assert fs.deg_pair(b, pw) == fs.deg_pair_eigen(d, eigs, pw.degrees)
    assert all(a < c for a, c in zip(eigs, eigs[1:]))


def test_total_degree_examples():
    b, f = STABLE
    assert fs.total_degree(b, f, fs.ParabolicWeights(0, (), (), ()), [[]]) == 0
    sub = fs.Subobject(1, -1, (1,))
    c = fs.central_c(b, f)
    for m in (F(-1), F(-1, 2), F(-3)):
        for z in (F(-1), F(0), F(2)):
            val = fs.total_degree(b, f, fs.ParabolicWeights(z, (1,), (-1,), (m,)), [[1]])
            assert val == m * sub.rank * (fs.sub_slope(f, sub) - c)
            assert (val > 0) == (fs.slope_test(b, f, sub) == "StrictPass")


@given(instances())
def test_single_step_sign_agrees_with_slope(inst):
    b, f = inst
    c = fs.central_c(b, f)
    for sub in fs.enumerate_subobjects(b, f, 2):
        meets = [[m] for m in sub.meets]
        val = fs.total_degree(b, f, fs.ParabolicWeights(0, (sub.rank,), (sub.degree,), (F(-1),)), meets, c)
        verdict = fs.slope_test(b, f, sub)
        assert (val > 0) == (verdict == "StrictPass")
        assert (val == 0) == (verdict == "Equality")


def test_equivalence_examples():
    rep = fs.equivalence_brute(*STABLE)
    assert rep.equivalent and not rep.counterexamples and rep.coefficient_test
    # the sub V0 itself passes; larger free degrees destabilize, and both sides agree on that
    assert fs.Subobject(1, -1, (1,)) not in rep.destabilizing
    rep = fs.equivalence_brute(*UNSTABLE)
    assert rep.equivalent and not rep.grid_positive and not rep.slopes_pass
    assert fs.Subobject(1, 1, (1,)) in rep.destabilizing
    rep = fs.equivalence_brute(*EQUAL)
    assert rep.equivalent and rep.grid_nonstrict_equals_slope_equality
    with pytest.raises(fs.InvariantError):
        fs.equivalence_brute(fs.BundleData(5, 0), fs.SectionFiltration())


def test_equivalence_with_chains():
    rep = fs.equivalence_brute(fs.BundleData(3, 1), fs.SectionFiltration((1,), (-2,), (F(1, 2),)), 2, max_chain=2)
    assert rep.equivalent and rep.coefficient_test
    # a two-step chain mixing a passing and a barely failing sub stays positive on the finite grid
    assert rep.chain_grid_misses
    for miss in rep.chain_grid_misses:
        assert len(miss["chain"]) == 2 and not miss["slope_ok"]


@given(instances())
def test_z_coefficient_root_is_central(inst):
    b, f = inst
    expr, root = fs.z_coefficient(*inst)
    assert root == fs.central_c(b, f)


def test_bogomolov_examples():
    assert fs.bogomolov_residual(*STABLE) == 1
    assert fs.bogomolov_residual(fs.BundleData(3, 2), fs.SectionFiltration()) == F(4, 3)
    bad = (fs.BundleData(2, 0), fs.SectionFiltration((1,), (3,), (1,)))
    rep = fs.bogomolov_report(*bad)
    assert rep["residual"] < 0 and rep["no_solution_expected"]
    with pytest.raises(fs.InvariantError):
        fs.bogomolov_residual(*STABLE, base_dim=2)


@given(instances())
def test_stable_implies_nonnegative_bogomolov(inst):
    if fs.is_stable(*inst, deg_bound=3):
        assert fs.bogomolov_residual(*inst) >= 0


def test_bogomolov_on_small_degree_bounds():
    # with small degree bounds stable data exist, so the implication is not vacuous
    stable = 0
    for B in (0, 1):
        for R in (2, 3):
            for d in range(-3, 4):
                for f in fs.enumerate_filtrations(R, B, [F(1, 2), F(1)], max_steps=R - 1):
                    if fs.is_stable(fs.BundleData(R, d), f, deg_bound=B):
                        stable += 1
                        assert fs.bogomolov_residual(fs.BundleData(R, d), f) >= 0
    assert stable > 20


def test_results_are_exact():
    b, f = fs.BundleData(3, 1), fs.SectionFiltration((1, 2), (0, 1), (F(1, 3), F(1, 4)))
    c = fs.central_c(b, f)
    assert isinstance(c, fs.Q) and c == F(1 + F(1, 3) + F(2, 4), 3)
    assert isinstance(fs.bogomolov_residual(b, f), fs.Q)
    assert fs.fmt(F(13, 18)) == "13/18"
