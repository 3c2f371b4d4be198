"""
Checking backprop against finite differences
============================================
"""

from histloss.harness import gradcheck_suite

report = gradcheck_suite(trials=30, seed=0)
print("passed:", report.passed)
print("max relative error:", f"{report.max_rel_error:.2e}")
for t in report.trials[:6]:
    print(f"  {t['loss']:12} hidden={t['hidden_dims']} rel={t['rel_error']:.1e}")

# scaling the analytic gradient by 1% is caught
bad = gradcheck_suite(trials=6, seed=0, corrupt=1.01, include_stationary=False)
print("corrupted gradients pass?", bad.passed)
