# %% [markdown]
# Explaining a classifier in PCA coordinates.
#
# The reference answer explains the composed model f(pca^-1(z)) directly.
# Latent SHAP only sees the forward map; the naive baseline explains in the
# original feature space and pushes the attributions through the transform.
# Noise added to the transform makes it non-invertible, which is the case
# Latent SHAP is built for.

# %%
import numpy as np

from latentshap.baselines import naive_transform_explanation
from latentshap.core import cosine_similarity
from latentshap.kernel_shap import explain_with_inverse_transform
from latentshap.latent import explain_latent_shap
from latentshap.synthetic import add_noise_to_transform, build_world

world = build_world()
rng = np.random.default_rng(1)
B = world.X_train[rng.choice(500, 200, replace=False)]

# %%
for i in range(3):
    x = world.X_test[i]
    truth = explain_with_inverse_transform(world.model, world.pca, B, x)
    print(f"instance {i}")
    for alpha in (0.0, 0.1, 0.5):
        noisy = add_noise_to_transform(world.pca, alpha, world.pc_stds, seed=i)
        lat = explain_latent_shap(world.model, noisy, B, x)
        naive = naive_transform_explanation(world.model, noisy, B, x)
        print(f"  alpha={alpha:.1f}  latent cos={cosine_similarity(truth.attributions, lat.attributions):+.3f}"
              f"  naive cos={cosine_similarity(truth.attributions, naive.attributions):+.3f}")

# %% [markdown]
# The attributions themselves, for the last instance at alpha = 0.

# %%
lat = explain_latent_shap(world.model, world.pca, B, x)
print(np.round(np.vstack([truth.attributions, lat.attributions]), 4))
