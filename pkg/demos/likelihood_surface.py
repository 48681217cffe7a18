"""Likelihood curves over mu for several stopping levels, written as CSV and SVG."""

from pathlib import Path

from timemachine import EstimateRequest, MutationModel, grid_sweep, mu_grid, sample_initial_data
from timemachine.report import GRID_HEADER, grid_charts, grid_rows, write_csv
import numpy as np

pdm = MutationModel.from_matrix([[0.5, 0.5], [0.1, 0.9]], mu=1.0)
y = sample_initial_data(pdm, 30, np.random.default_rng(1))
print("data:", y)

req = EstimateRequest(pdm, y, replicates=2000, repeats=5, seed=3, timing=False)
result, _ = grid_sweep(req, mu_grid(0.1, 30.1, 12), [1, 2, 3, 8])
for t in (1, 2, 3, 8):
    rows = result.level(t)
    print(f"ntm={t}: argmax mu {result.argmax_mu(t):.3g}, mean events {np.mean([r.mean_events for r in rows]):.1f}")

out = Path("demo-out")
out.mkdir(exist_ok=True)
write_csv(out / "grid.csv", GRID_HEADER, grid_rows(result.rows), "demo")
print("wrote", [str(p) for p in grid_charts(result, out, "PDM n=30")])
