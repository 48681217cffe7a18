"""Mutation models: stationary vectors, multi-locus products, simulated data."""

import numpy as np

from timemachine import LocusSpec, MutationModel, build_multilocus_model, sample_coalescent_data, sample_initial_data

# two types, rows are "parent -> child" probabilities
pdm = MutationModel.from_matrix([[0.5, 0.5], [0.1, 0.9]], mu=5.0)
print("PDM stationary vector:", pdm.stationary)  # (1/6, 5/6)

# a mutation event picks one locus uniformly and mutates it with that locus's matrix
spec = LocusSpec(([[0.5, 0.5], [0.1, 0.9]],) * 3)
three = build_multilocus_model(spec, mu=5.0)
print("3-locus model has", three.type_count, "types")
print("row of type", spec.type_label(0), "->", np.round(three.dense_transition()[0], 4))
print("stationary equals the product of per-locus vectors:",
      np.allclose(three.stationary, np.kron(np.kron(pdm.stationary, pdm.stationary), pdm.stationary)))

rng = np.random.default_rng(1)
# multinomial draw from the stationary vector (does not depend on mu)
print("multinomial sample, n=30:", sample_initial_data(pdm, 30, rng))
# a sample drawn from the coalescent itself does depend on mu
for mu in (0.5, 5.0, 30.0):
    print(f"coalescent sample at mu={mu}:", sample_coalescent_data(pdm.with_mu(mu), 30, rng))
