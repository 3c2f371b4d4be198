"""
Sensitivity to the number of bins and the target width
======================================================
"""

from histloss.data import make_synthetic
from histloss.harness import RunConfig, prepare, sweep, sweep_table

cfg = RunConfig(hidden_dims=(32, 32), epochs=15, support=(0.0, 100.0))
data = prepare(cfg, make_synthetic(2000, 16, seed=3))

print(sweep_table(sweep(cfg, "bins", [10, 25, 50, 100], data)))
# sigma values are multiples of the bin width
print(sweep_table(sweep(cfg, "sigma", [0.25, 0.5, 1.0, 2.0, 4.0], data)))
