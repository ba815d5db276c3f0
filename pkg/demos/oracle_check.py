# %% [markdown]
# Kernel SHAP against exhaustive enumeration on the synthetic classifier.
# With all 2^8 coalitions the regression solution is the exact Shapley value,
# so the two columns below should agree to rounding.

# %%
import numpy as np

from latentshap.kernel_shap import brute_force_shapley, explain_kernel_shap
from latentshap.synthetic import build_world

world = build_world()
print(f"classifier test accuracy: {world.test_accuracy:.3f}")

rng = np.random.default_rng(0)
B = world.X_train[rng.choice(500, 50, replace=False)]
x = world.X_test[0]

# %%
ks = explain_kernel_shap(world.model, B, x)
bf = brute_force_shapley(world.model, B, x)
for name, a, b in zip(ks.feature_names, ks.attributions, bf.attributions):
    print(f"{name:>4} {a:+.10f} {b:+.10f}")
print("max difference", np.abs(ks.attributions - bf.attributions).max())
print("base + sum(phi) =", ks.base_value + ks.attributions.sum(), " f(x) =", world.model(x[None])[0])
