"""
Is it the representation or the loss?
=====================================

Freeze hidden layers and retrain only the output head. With random hidden
layers the two losses see exactly the same features.
"""

from histloss.data import make_synthetic
from histloss.harness import RunConfig, prepare, representation_experiment, train

cfg = RunConfig(hidden_dims=(32, 32), epochs=15, support=(0.0, 100.0), seed=2)
data = prepare(cfg, make_synthetic(2000, 16, seed=2))

for loss in ("hl_gaussian", "l2"):
    res = representation_experiment("random", None, cfg.replace(loss=loss), data)
    print(f"random features, {loss:12} head: test MAE {res.test.mae:.3f}")

hl_net, _ = train(cfg, data)
fixed = representation_experiment("fixed", None, cfg.replace(loss="l2"), data, source_net=hl_net)
own = train(cfg.replace(loss="l2"), data)[1].final.test
print(f"l2 head on HL features: {fixed.test.mae:.3f}   l2 trained end to end: {own.mae:.3f}")
