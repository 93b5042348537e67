"""Privacy audit tests: exact laws, invariance, mutation detection, exact
mutual information, enumeration-path consistency, and the chi-square check."""

import itertools
from fractions import Fraction

import pytest

from privcache import audit, scheme
from privcache.audit import (
    BudgetExceededError,
    chi_square_quantile,
    closed_form_mass,
    empirical_law_check,
    exact_mutual_information,
    masked_demand_law,
    masked_marginal_via_joint,
    restricted_vector_count,
    restricted_vectors,
    verify_law_invariance,
)
from privcache.scheme import FULL, NO_RELABEL, PLAIN_BASELINE, SchemeParams, Variant

P321 = SchemeParams(3, 2, 1, r=1)
P522 = SchemeParams(5, 2, 2, r=1)
MI_INSTANCE = SchemeParams(2, 2, 1, r=1, q=2, packet_size=1)  # file_len 4


def test_closed_form_mass_values():
    assert closed_form_mass(P522) == Fraction(1, 2880)
    assert closed_form_mass(P321) == Fraction(1, 12)
    assert closed_form_mass(MI_INSTANCE) == Fraction(1, 4)


def test_restricted_vector_counts():
    assert restricted_vector_count(P522) == 2880
    assert restricted_vector_count(P321) == 12
    vecs = list(restricted_vectors(P321))
    assert len(vecs) == len(set(vecs)) == 12
    # closed-form mass sums to one over the support
    assert closed_form_mass(P321) * 12 == 1


def test_law_uniform_for_every_demand_observer_selector():
    support = restricted_vector_count(P321)
    mass = closed_form_mass(P321)
    for demands in scheme.all_demand_matrices(P321):
        for observer in (0, 1):
            for selector in scheme.slot_support(P321):
                law = masked_demand_law(P321, demands, observer, selector)
                assert len(law) == support
                assert set(law.values()) == {mass}


def test_law_uniform_on_five_file_instance():
    law = masked_demand_law(P522, ((0, 1), (2, 3)), 0, (0, 2))
    assert len(law) == 2880
    assert set(law.values()) == {Fraction(1, 2880)}


def test_invariance_single_matrix_trivial():
    rep = verify_law_invariance(P321, [((0,), (1,))], 0, (0,))
    assert rep.identical and rep.max_discrepancy == 0


def test_invariance_requires_shared_observer_row():
    with pytest.raises(ValueError):
        verify_law_invariance(P321, [((0,), (1,)), ((1,), (1,))], 0, (0,))


def test_invariance_across_other_rows():
    family = [((0,), (0,)), ((0,), (1,)), ((0,), (2,))]
    rep = verify_law_invariance(P321, family, 0, (1,))
    assert rep.identical and rep.laws_checked == 3


def test_mutation_no_relabel_detected():
    family = [((0, 1), (0, 1)), ((0, 1), (0, 2)), ((0, 1), (2, 3))]
    rep = verify_law_invariance(P522, family, 0, (0, 2), variant=NO_RELABEL)
    assert not rep.identical
    assert rep.max_discrepancy > 0
    law = masked_demand_law(P522, family[0], 0, (0, 2), variant=NO_RELABEL)
    assert set(law.values()) != {closed_form_mass(P522)}


def test_mutation_frozen_fill_detected():
    # frozen within-block arrangement shrinks the support even with relabeling on
    frozen = Variant(random_fill=False)
    law = masked_demand_law(P522, ((0, 1), (0, 1)), 0, (0, 2), variant=frozen)
    assert len(law) < 2880


def test_plain_baseline_law_concentrates():
    law = masked_demand_law(P321, ((0,), (1,)), 0, (0,), variant=PLAIN_BASELINE)
    assert len(law) == 1  # fully derandomized: a single deterministic vector


def test_law_budget_enforced():
    with pytest.raises(BudgetExceededError):
        masked_demand_law(P522, ((0, 1), (0, 1)), 0, (0, 2), budget=100)


def test_exact_mi_zero_on_enumerable_instance():
    rep = exact_mutual_information(MI_INSTANCE, 0)
    assert rep.conditional_laws_equal
    assert isinstance(rep.value, Fraction) and rep.value == 0


def test_exact_mi_other_observer_and_prior():
    mats = list(scheme.all_demand_matrices(MI_INSTANCE))
    prior = {m: Fraction(1, len(mats)) for m in mats}
    rep = exact_mutual_information(MI_INSTANCE, 1, prior=prior)
    assert rep.conditional_laws_equal and rep.value == 0


def test_exact_mi_self_information_sanity():
    # the observer's own row is part of the observation: I = H(d_0) = 1 bit
    rep = exact_mutual_information(MI_INSTANCE, 0, target="own")
    assert not isinstance(rep.value, Fraction)
    assert abs(rep.value - 1.0) < 1e-12


def test_exact_mi_baseline_leaks():
    rep = exact_mutual_information(MI_INSTANCE, 0, variant=PLAIN_BASELINE)
    assert not rep.conditional_laws_equal
    assert float(rep.value) > 0
    assert rep.witness is not None


def test_exact_mi_budget_error_names_cardinality():
    big = SchemeParams(6, 4, 1, r=1, q=257)
    with pytest.raises(BudgetExceededError) as err:
        exact_mutual_information(big, 0)
    assert "exceed" in str(err.value)


def test_joint_marginal_reproduces_direct_law():
    for demands in (((0,), (0,)), ((0,), (1,))):
        for selector in ((0,), (1,)):
            direct = masked_demand_law(MI_INSTANCE, demands, 0, selector)
            via_joint = masked_marginal_via_joint(MI_INSTANCE, demands, 0, selector)
            assert direct == via_joint


def test_chi_square_quantile_values():
    # Wilson-Hilferty vs reference values (scipy.stats.chi2.ppf)
    assert abs(chi_square_quantile(23, 0.999) - 49.7282) < 0.3
    assert abs(chi_square_quantile(11, 0.999) - 31.2641) < 0.3
    assert abs(chi_square_quantile(2879, 0.999) - 3119.2021) < 1.0
    with pytest.raises(ValueError):
        chi_square_quantile(0, 0.999)
    with pytest.raises(ValueError):
        chi_square_quantile(10, 0.5)


def test_empirical_check_passes_for_real_scheme():
    rep = empirical_law_check(P321, ((0,), (1,)), 0, (0,), runs=2000, seed=7)
    assert rep.support_size == 12
    assert rep.outside_support == 0
    assert rep.passed


def test_empirical_check_run_floor():
    with pytest.raises(ValueError):
        empirical_law_check(P321, ((0,), (1,)), 0, (0,), runs=0, seed=1)
    with pytest.raises(ValueError):
        empirical_law_check(P321, ((0,), (1,)), 0, (0,), runs=119, seed=1)


def test_empirical_check_detects_skipped_relabeling():
    rep = empirical_law_check(P321, ((0,), (1,)), 0, (0,), runs=2000, seed=7, variant=NO_RELABEL)
    assert not rep.passed


def test_empirical_check_five_file_instance():
    rep = empirical_law_check(P522, ((0, 1), (0, 2)), 0, (0, 2), runs=100_000, seed=3)
    assert rep.support_size == 2880
    assert rep.dof == 2879
    assert rep.passed
