"""Single backward histories, their weights, and the cost of stopping late vs early."""

import numpy as np

from timemachine import MutationModel, SimulationSettings, exact_likelihood, proposal_expectation, run_replicate
from timemachine.rng import CounterStream

pdm = MutationModel.from_matrix([[0.5, 0.5], [0.1, 0.9]], mu=5.0)
y = (2, 4)

r = run_replicate(pdm, y, SimulationSettings(stop_population=1), CounterStream.from_seed(0, 0))
print("one full-tree history:", r.coalescent_events, "coalescences,", r.mutation_events, "mutations,",
      "log weight", round(r.log_weight, 4))

w = np.array([run_replicate(pdm, y, SimulationSettings(1), CounterStream.from_seed(0, k)).log_weight
              for k in range(20_000)])
print("mean weight", np.exp(w).mean(), "vs exact", exact_likelihood(pdm, y)[0])

# the expected weight under the proposal can be computed exactly on small samples;
# the closed-form weights kept as weighting="ratio" do not reproduce the likelihood
for weighting in ("exact", "ratio"):
    print(f"E[exp W] with {weighting} weights:", proposal_expectation(pdm, y, 1, weighting))

# stopping at m lineages shortens every history
for stop in (1, 2, 4, 6):
    ev = [run_replicate(pdm, y, SimulationSettings(stop), CounterStream.from_seed(1, k)).events for k in range(2000)]
    print(f"stop at {stop}: {np.mean(ev):.2f} events per history")
