"""
The multivariate time change
============================

Solve tau' = x + Z(tau) for two coupled drivers by pasting diagonal solutions,
compare the lower and upper brackets with a brute-force Euler scheme, and
assemble the process.
"""

# %%
import sys

import numpy as np

sys.path.insert(0, "tests")
from oracles import euler_tau  # noqa: E402

from affinepath.levy import generate_path, split
from affinepath.params import LevyTriplet
from affinepath.timechange import assemble, solve_converged, solve_pasted

drivers = [
    LevyTriplet(np.array([0.2, 0.5]), np.diag([0.3, 0.0]), compensate=np.array([True, False])),
    LevyTriplet(np.array([0.4, -0.1]), np.diag([0.0, 0.2]), compensate=np.array([False, True])),
]
Z = [generate_path(tr, 8.0, seed=3, stream=(0, k)) for k, tr in enumerate(drivers)]
sps = [split(z, k, 2) for k, z in enumerate(Z)]
x = np.array([1.0, 0.8])

# %%
for M in (4, 6, 8):
    up = solve_pasted(sps, x, M, "up", 1.0)
    dn = solve_pasted(sps, x, M, "down", 1.0)
    print(M, up.n_pastes, np.max(dn.tau - up.tau))

# %%
t, tau = euler_tau(Z, x, 1.0, h=1e-4)
sol = solve_converged(sps, x, 1.0)
print("level", sol.level, "gap", sol.gap)
print("distance to Euler", np.abs(sol.tau[-1] - tau[-1]).max())

# %%
path = assemble(Z, sol, x)
print(path.X[-1], path.tau[-1])
