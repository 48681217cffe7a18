"""Exact likelihoods on small samples and the bias of stopping early."""

from timemachine import (
    MutationModel,
    exact_biased_likelihood,
    exact_last_exit_marginal,
    exact_likelihood,
    pim_sample_distribution,
    tv_contraction_profile,
)

pdm = MutationModel.from_matrix([[0.5, 0.5], [0.1, 0.9]], mu=1.0)
y = (3, 5)

lik, ordered = exact_likelihood(pdm, y)
print(f"P(counts {y}) = {lik:.6g}; one ordered sample with these counts: {ordered:.6g}")

# replacing the level-m marginal by the exact one changes nothing ...
for m in (3, 5, 7):
    h = exact_last_exit_marginal(pdm, m)
    print(f"m={m}: exact h gives {exact_biased_likelihood(pdm, y, m, h)[0]:.12g}")

# ... while the parent-independent stand-in introduces a bias that grows with m
for m in range(2, 9):
    lb = exact_biased_likelihood(pdm, y, m, pim_sample_distribution(pdm, m))[0]
    print(f"m={m}: PIM h gives {lb:.6g}, gap {abs(lb - lik):.3g}")

# forward runs from opposite starts forget where they began
fast = MutationModel.from_matrix([[0.5, 0.5], [0.5, 0.5]], mu=10.0)
print("TV distance by size 3..8:", [round(v, 3) for v in tv_contraction_profile(fast, (3, 0), (0, 3), 8)])
