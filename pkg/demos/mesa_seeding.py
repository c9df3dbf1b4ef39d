"""Compare MESA seed designs with plain uniform draws by minimum pairwise distance."""

import numpy as np

from slotopt import mesa
from slotopt.space import SearchSpace

space = SearchSpace.slot_design()


def min_distance(U):
    d = np.linalg.norm(U[:, None] - U[None], axis=-1)
    return d[np.triu_indices(len(U), 1)].min()


gaps = {"mesa": [], "uniform": []}
for seed in range(20):
    rng = np.random.default_rng(seed)
    X = mesa.seed_designs(space, 128, 12, rng)
    gaps["mesa"].append(min_distance(space.to_unit(X)))
    gaps["uniform"].append(min_distance(rng.random((12, space.dim))))
for k, v in gaps.items():
    print(f"{k:8s} median min distance {np.median(v):.3f}")
