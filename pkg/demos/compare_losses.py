"""
Histogram loss versus squared error on a synthetic problem
==========================================================

The targets live in [0, 100]. Every loss trains the same small network on the
same split; errors are in raw target units.
"""

from histloss.data import make_synthetic
from histloss.harness import RunConfig, prepare, run_ols, train

ds = make_synthetic(n=3000, d=32, seed=0)
base = RunConfig(hidden_dims=(64, 64), epochs=30, support=(0.0, 100.0), seed=0)
data = prepare(base, ds)

print(f"{'loss':12} {'test MAE':>9} {'test RMSE':>10}")
for loss in ("hl_gaussian", "hl_onebin", "l2_softmax", "l2", "l1"):
    _, hist = train(base.replace(loss=loss), data)
    te = hist.final.test
    print(f"{loss:12} {te.mae:9.3f} {te.rmse:10.3f}")

ols = run_ols(data)
print(f"{'ols':12} {ols.test.mae:9.3f} {ols.test.rmse:10.3f}")
