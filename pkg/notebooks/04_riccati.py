"""
Riccati equations and the transform formula
===========================================
"""

# %%
import numpy as np

from affinepath import load_params
from affinepath.riccati import cf_affine, cir_psi, solve_riccati

cir = load_params("configs/cir.toml")
sol = solve_riccati(cir, [-1.0], 2.0, n_grid=5)
print(sol.psi[:, 0].real)
print(cir_psi(sol.time_grid, -1.0, -0.5, 0.2))

# %%
# Heston type: the J part of psi does not move.
heston = load_params("configs/heston.toml")
sol = solve_riccati(heston, [-0.5 + 1j, 2j], 1.0, n_grid=3)
print(sol.psi)

# %%
print(cf_affine(heston, [-1.0, 1j], [0.5, 0.0], 1.0, n_grid=3))
