import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timemachine.errors import ImpossibleAncestry, InvalidEvent
from timemachine.model import MutationModel
from timemachine.oracle import (
    exact_biased_likelihood,
    exact_likelihood,
    pim_sample_distribution,
    proposal_expectation,
)
from timemachine.rng import CounterStream
from timemachine.simulator import (
    AncestralEvent,
    SimulationSettings,
    ancestor_event_distribution,
    apply_event,
    event_weight,
    final_stage_sd,
    importance_weight,
    log_bias_correction,
    run_replicate,
    sample_offspring_type,
)

from conftest import PDM, PIM_HALF


def test_offspring_only_type_present():
    s = CounterStream(1)
    assert all(sample_offspring_type((3, 0), s) == 0 for _ in range(200))


def test_offspring_frequencies(rng):
    draws = np.array([sample_offspring_type((3, 1), rng) for _ in range(100_000)])
    p = (draws == 0).mean()
    assert abs(p - 0.75) < 3 * math.sqrt(0.75 * 0.25 / draws.size)


def test_offspring_symmetric(rng):
    draws = np.array([sample_offspring_type((1, 1), rng) for _ in range(20_000)])
    assert abs(draws.mean() - 0.5) < 3 * math.sqrt(0.25 / draws.size)


def test_event_distribution_mixed_pair(pim_half):
    np.testing.assert_allclose(ancestor_event_distribution(pim_half, (1, 1), 0), [0, 0.25, 0.75])


def test_event_distribution_same_type_pair(pim_half):
    np.testing.assert_allclose(ancestor_event_distribution(pim_half, (2, 0), 0), [2 / 3, 1 / 4, 1 / 12])


def test_zero_mutation_mixed_pair_is_impossible():
    m = MutationModel.from_matrix(PIM_HALF, 0.0)
    with pytest.raises(ImpossibleAncestry):
        ancestor_event_distribution(m, (1, 1), 0)


def test_apply_event_examples():
    assert apply_event((2, 1), AncestralEvent.coalescent(0)) == (1, 1)
    assert apply_event((1, 1), AncestralEvent.mutation(0, 1)) == (0, 2)
    assert apply_event((1, 1), AncestralEvent.mutation(0, 0)) == (1, 1)


def test_apply_event_rejects_bad_coalescence():
    with pytest.raises(InvalidEvent):
        apply_event((1, 1), AncestralEvent.coalescent(0))


def test_ratio_weights_hand_values(pim_half):
    e = AncestralEvent.coalescent(0)
    assert event_weight(pim_half, (2, 1), (1, 1), e) == pytest.approx(2.25)
    e = AncestralEvent.mutation(0, 1)
    assert event_weight(pim_half, (1, 1), (0, 2), e) == pytest.approx(1 / 3)
    e = AncestralEvent.mutation(0, 0)
    assert event_weight(pim_half, (2, 0), (2, 0), e) == pytest.approx(1.0)


def test_event_weight_checks_consistency(pim_half):
    with pytest.raises(InvalidEvent):
        event_weight(pim_half, (2, 1), (2, 0), AncestralEvent.coalescent(0))


def test_exact_weight_is_forward_over_proposal(pdm):
    x = (2, 3)
    for i in range(2):
        probs = ancestor_event_distribution(pdm, x, i)
        q_type = x[i] / sum(x)
        e = AncestralEvent.coalescent(i)
        fwd = (x[i] - 1) / (sum(x) - 1 + pdm.mu)
        assert importance_weight(pdm, x, e) == pytest.approx(fwd / (q_type * probs[0]))
        for j in range(2):
            e = AncestralEvent.mutation(i, j)
            x_next = apply_event(x, e)
            fwd = pdm.mu * pdm.p(j, i) * x_next[j] / (sum(x) * (sum(x) - 1 + pdm.mu))
            assert importance_weight(pdm, x, e) == pytest.approx(fwd / (q_type * probs[1 + j]))


def test_bias_correction_hand_values(pim_half):
    assert log_bias_correction(pim_half, (1, 1)) == pytest.approx(-2 * math.log(2))
    assert log_bias_correction(pim_half, (2, 0)) == pytest.approx(math.log(0.375))
    assert log_bias_correction(pim_half, (1, 0)) == pytest.approx(-math.log(2))


def test_stop_at_sample_size_is_bias_term(pdm):
    r = run_replicate(pdm, (3, 2), SimulationSettings(5), CounterStream(4))
    assert r.events == 0
    assert r.log_weight == pytest.approx(log_bias_correction(pdm, (3, 2)))


@pytest.mark.parametrize("weighting", ["exact", "ratio"])
def test_replicate_deterministic(pdm, weighting):
    s = SimulationSettings(1, weighting=weighting)
    a = run_replicate(pdm, (4, 3), s, CounterStream(99))
    b = run_replicate(pdm, (4, 3), s, CounterStream(99))
    assert (a.log_weight, a.events, a.final_configuration) == (b.log_weight, b.events, b.final_configuration)


def test_replicate_reaches_root(pdm):
    r = run_replicate(pdm, (4, 3), SimulationSettings(1), CounterStream(5))
    assert sum(r.final_configuration) == 1
    assert r.coalescent_events == 6


def test_final_stage_ratio_same_type_single_step(pim_half):
    out = final_stage_sd(pim_half, (2, 0), CounterStream(3), weighting="ratio")
    assert len(out.log_weights) == 1


def test_final_stage_ratio_mixed_pair_terminates(pim_half):
    for seed in range(50):
        out = final_stage_sd(pim_half, (1, 1), CounterStream(seed), weighting="ratio")
        assert max(out.configuration) == 2
        assert all(math.isfinite(w) and w < 0 for w in out.log_weights)


def test_final_stage_ratio_one_type_weight():
    m = MutationModel.from_matrix([[1.0]], 3.0)
    out = final_stage_sd(m, (2,), CounterStream(0), weighting="ratio")
    assert out.log_weights == [pytest.approx(math.log(3.0 / 5.0))]


def test_final_stage_exact_ends_in_single_lineage(pdm):
    out = final_stage_sd(pdm, (1, 1), CounterStream(8))
    assert sum(out.configuration) == 1


def test_mc_pim_matches_oracle(pim_half):
    s = SimulationSettings(1)
    w = np.array([run_replicate(pim_half, (2, 2), s, CounterStream.from_seed(17, r)).log_weight
                  for r in range(100_000)])
    p = np.exp(w)
    target = exact_likelihood(pim_half, (2, 2))[0]
    # the proposal is optimal under PIM, so the SE can collapse to rounding level
    assert abs(p.mean() - target) <= 3 * p.std(ddof=1) / math.sqrt(p.size) + 1e-12 * target


def test_pim_weights_have_zero_variance(pim_skew):
    s = SimulationSettings(1)
    w = [run_replicate(pim_skew, (3, 2), s, CounterStream.from_seed(2, r)).log_weight for r in range(300)]
    np.testing.assert_allclose(np.exp(w), exact_likelihood(pim_skew, (3, 2))[0], rtol=1e-10)


configs = st.tuples(st.integers(0, 4), st.integers(0, 4)).filter(lambda y: sum(y) >= 2)


@settings(max_examples=25, deadline=None)
@given(configs, st.sampled_from([0.5, 1.0, 5.0]))
def test_exact_weights_unbiased_full_tree(y, mu):
    m = MutationModel.from_matrix(PDM, mu)
    assert proposal_expectation(m, y, 1) == pytest.approx(exact_likelihood(m, y)[0], rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(configs, st.sampled_from([0.5, 1.0, 5.0]), st.integers(2, 8))
def test_exact_weights_unbiased_for_stopped_target(y, mu, stop):
    m = MutationModel.from_matrix(PDM, mu)
    stop = min(stop, sum(y))
    target = exact_biased_likelihood(m, y, stop, pim_sample_distribution(m, stop))[0]
    assert proposal_expectation(m, y, stop) == pytest.approx(target, rel=1e-9)


def test_ratio_weights_miss_the_target():
    m = MutationModel.from_matrix(PIM_HALF, 0.5)
    lik, ordered = exact_likelihood(m, (4, 2))
    got = proposal_expectation(m, (4, 2), 1, weighting="ratio")
    assert abs(got - lik) > 0.1 * lik and abs(got - ordered) > 0.1 * ordered
