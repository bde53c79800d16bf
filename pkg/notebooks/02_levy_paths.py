"""
Driver paths
============

Levy paths are generated on a uniform mesh with exact jump times. They are
reproducible per (seed, stream) and can be extended without changing the
part already drawn.
"""

# %%
import numpy as np

from affinepath.jumps import ExponentialOnCoordinate, JumpMeasure
from affinepath.levy import dyadic_approximant, extend_path, generate_path, split
from affinepath.params import LevyTriplet

tr = LevyTriplet(
    np.array([-0.5, 0.4]),
    np.diag([0.2, 0.0]),
    JumpMeasure(2.0, ExponentialOnCoordinate(2, 1, 0.3)),
    np.array([True, False]),
)
Z = generate_path(tr, 2.0, seed=1, stream=(0, 0))
print("jumps:", Z.jump_times.round(3))

# %%
longer = extend_path(Z, 4.0)
s = np.linspace(0, 2, 5)
print(np.abs(longer.evaluate(s) - Z.evaluate(s)).max())

# %%
# Split off the increasing cross part and bracket it by dyadic step functions.
sp = split(Z, 0, 2)
s = np.linspace(0, 1.9, 7)
for M in (2, 4, 6):
    lo = dyadic_approximant(sp, M, "up").evaluate(s)[:, 1]
    hi = dyadic_approximant(sp, M, "down").evaluate(s)[:, 1]
    print(M, np.max(hi - lo).round(4))
