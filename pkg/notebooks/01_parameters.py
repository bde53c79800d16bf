"""
Parameter sets and admissibility
================================

Load a TOML parameter file, run the admissibility checks and look at the
Heston-type flags. Run from the repository root.
"""

# %%
import numpy as np

from affinepath import load_params, validate
from affinepath.params import classify_heston

heston = load_params("configs/heston.toml")
print(validate(heston))
print(classify_heston(heston))

# %%
# Break a condition on purpose: a J-coordinate driver may not carry diffusion.
alpha = heston.alpha.copy()
alpha[1] = np.eye(2) * 0.1
print(validate(heston.replace(alpha=alpha)))

# %%
# The general example has a state-independent part and a J to J drift,
# so it is neither married nor of type H.
general = load_params("configs/general.toml")
print(classify_heston(general))
