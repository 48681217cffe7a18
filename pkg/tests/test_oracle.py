import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timemachine.errors import CapacityExceeded, SizeMismatch
from timemachine.model import MutationModel, forward_successors
from timemachine.oracle import (
    LevelDistribution,
    OracleLimits,
    enumerate_configurations,
    exact_biased_likelihood,
    exact_last_exit_marginal,
    exact_likelihood,
    pim_sample_distribution,
    split_moment_distribution,
    tv_contraction_profile,
)

from conftest import PDM, PIM_HALF


def test_enumeration_examples():
    assert enumerate_configurations(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert enumerate_configurations(1, 5) == [(5,)]
    assert len(enumerate_configurations(3, 2)) == 6


def test_limits_enforced():
    with pytest.raises(CapacityExceeded, match="12"):
        enumerate_configurations(2, 13)


def test_split_moment_hand_value(pim_half):
    entering = LevelDistribution.from_mapping(2, 2, {(2, 0): 0.5, (0, 2): 0.5})
    out = split_moment_distribution(pim_half, entering).as_dict()
    assert out == pytest.approx({(2, 0): 0.375, (1, 1): 0.25, (0, 2): 0.375})


def test_split_moment_zero_mu_is_identity():
    m = MutationModel.from_matrix(PDM, 0.0)
    entering = LevelDistribution.from_mapping(2, 3, {(2, 1): 0.3, (0, 3): 0.7})
    out = split_moment_distribution(m, entering)
    assert out.as_dict() == pytest.approx(entering.as_dict())


def test_split_moment_swap_symmetry():
    m = MutationModel.from_matrix([[0.3, 0.7], [0.7, 0.3]], 2.0)
    entering = LevelDistribution.from_mapping(2, 3, {(3, 0): 0.5, (0, 3): 0.5})
    out = split_moment_distribution(m, entering)
    for z in out.support:
        assert out[z] == pytest.approx(out[z[::-1]])


def test_last_exit_examples(pim_half):
    assert exact_last_exit_marginal(pim_half, 2).as_dict() == pytest.approx(
        {(2, 0): 0.375, (1, 1): 0.25, (0, 2): 0.375}
    )
    one = MutationModel.from_matrix([[1.0]], 3.0)
    assert exact_last_exit_marginal(one, 5).as_dict() == {(5,): pytest.approx(1.0)}
    frozen = MutationModel.from_matrix([[1.0, 0.0], [1.0, 0.0]], 0.0)
    assert exact_last_exit_marginal(frozen, 4)[(4, 0)] == pytest.approx(1.0)


def test_likelihood_examples(pim_half, pim_skew):
    assert exact_likelihood(pim_half, (2, 0))[0] == pytest.approx(0.375)
    assert exact_likelihood(pim_skew, (0, 2))[0] == pytest.approx(0.855)
    one = MutationModel.from_matrix([[1.0]], 2.0)
    assert exact_likelihood(one, (6,))[0] == pytest.approx(1.0)


def test_ordered_probability_factor(pdm):
    p, q = exact_likelihood(pdm, (2, 1))
    assert q == pytest.approx(p / 3)


def test_biased_with_exact_h_is_exact(pdm):
    y = (2, 4)
    for m in range(2, 6):
        h = exact_last_exit_marginal(pdm, m)
        assert exact_biased_likelihood(pdm, y, m, h)[0] == pytest.approx(exact_likelihood(pdm, y)[0], abs=1e-12)


def test_biased_with_point_mass_differs(pdm):
    h = LevelDistribution.point_mass((3, 0))
    gap = exact_biased_likelihood(pdm, (2, 4), 3, h)[0] - exact_likelihood(pdm, (2, 4))[0]
    assert abs(gap) > 0


def test_biased_at_sample_size_is_h(pdm):
    h = pim_sample_distribution(pdm, 6)
    assert exact_biased_likelihood(pdm, (2, 4), 6, h)[0] == pytest.approx(h[(2, 4)])


def test_biased_size_mismatch(pdm):
    with pytest.raises(SizeMismatch):
        exact_biased_likelihood(pdm, (2, 4), 3, pim_sample_distribution(pdm, 4))


def test_pim_distribution_examples(pim_half, pim_skew):
    np.testing.assert_allclose(pim_sample_distribution(pim_half, 2).probabilities, [0.375, 0.25, 0.375])
    np.testing.assert_allclose(pim_sample_distribution(pim_skew, 2).probabilities, [0.055, 0.09, 0.855])
    one = MutationModel.from_matrix([[1.0]], 2.0)
    assert pim_sample_distribution(one, 4).as_dict() == {(4,): pytest.approx(1.0)}


def test_tv_profile_examples():
    m = MutationModel.from_matrix(PIM_HALF, 10.0)
    prof = tv_contraction_profile(m, (3, 0), (0, 3), 8)
    assert len(prof) == 6
    assert all(b < a for a, b in zip(prof, prof[1:]))
    same = tv_contraction_profile(m, (2, 1), (2, 1), 6)
    assert all(v == pytest.approx(0.0, abs=1e-15) for v in same)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 20.0), st.integers(2, 6))
def test_last_exit_sums_to_one(mu, k):
    m = MutationModel.from_matrix([[0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [0.6, 0.2, 0.2]], mu)
    assert exact_last_exit_marginal(m, k).probabilities.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 20.0), st.integers(3, 8))
def test_tv_in_unit_interval(mu, n_max):
    m = MutationModel.from_matrix(PDM, mu)
    prof = tv_contraction_profile(m, (3, 0), (1, 2), n_max)
    assert all(-1e-15 <= v <= 1 + 1e-15 for v in prof)


def _forward_chain_marginal(model, n):
    """Brute-force last-exit law by iterating the forward kernel on all states."""
    psi = model.stationary
    dist = {}
    for i in range(model.type_count):
        z = [0] * model.type_count
        z[i] = 2
        dist[tuple(z)] = dist.get(tuple(z), 0.0) + psi[i]
    out = {}
    for _ in range(4000):
        nxt = {}
        for z, p in dist.items():
            for z2, q in forward_successors(model, z).items():
                if sum(z2) > n:
                    out[z] = out.get(z, 0.0) + p * q
                else:
                    nxt[z2] = nxt.get(z2, 0.0) + p * q
        dist = nxt
        if sum(dist.values()) < 1e-15:
            break
    return out


def test_oracle_matches_forward_kernel_iteration():
    m = MutationModel.from_matrix(PDM, 2.0)
    brute = _forward_chain_marginal(m, 4)
    exact = exact_last_exit_marginal(m, 4)
    for z in exact.support:
        assert exact[z] == pytest.approx(brute.get(z, 0.0), abs=1e-12)


def test_custom_limits_allow_bigger_samples(pdm):
    p = exact_likelihood(pdm, (10, 20), OracleLimits(max_sample=40))[0]
    assert 0 < p < 1 and math.isfinite(p)
