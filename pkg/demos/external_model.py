# %% [markdown]
# Explaining a model that lives in another process. The child reads CSV rows
# on stdin and writes one prediction per line; here it is a small Python
# script, but any executable following the same protocol works.

# %%
import sys
import tempfile
from pathlib import Path

import numpy as np

from latentshap.external import ExternalModel
from latentshap.kernel_shap import explain_kernel_shap

script = Path(tempfile.mkdtemp()) / "model.py"
script.write_text(
    "import sys, math\n"
    "for line in sys.stdin:\n"
    "    v = [float(t) for t in line.split(',')]\n"
    "    print(repr(1 / (1 + math.exp(-(2 * v[0] - v[1] + 0.5 * v[0] * v[2])))))\n"
)
model = ExternalModel([sys.executable, str(script)], timeout=30)

rng = np.random.default_rng(2)
B = rng.normal(size=(30, 3))
x = np.array([1.0, -0.5, 2.0])

# %%
e = explain_kernel_shap(model, B, x)
print(dict(zip(e.feature_names, np.round(e.attributions, 6).tolist())))
print("base + sum(phi) =", e.base_value + e.attributions.sum(), " f(x) =", model(x[None])[0])
