"""Small PIBO / NSGA-II / PSO / random-search comparison on the synthetic problem."""

import numpy as np

from slotopt import baselines as B
from slotopt import config as C
from slotopt import pibo

cfg = C.Config.from_text(C.bundled("synthetic.yaml"))
ev = C.build_evaluator(cfg)
final = {"pibo": [], "nsga2": [], "pso": [], "random": []}
for seed in range(5):
    rc = C.build_run_config(cfg, ev, seed)
    final["pibo"].append(pibo.run(rc, ev).regret()[-1])
    evo = B.EvolutionConfig(population_size=20, generations=300, budget=rc.budget, random_seed=seed)
    final["nsga2"].append(B.nsga2(evo, ev).regret()[-1])
    final["pso"].append(B.pso(evo, ev).regret()[-1])
    final["random"].append(B.random_search(rc.budget, ev, seed).regret()[-1])
for k, v in final.items():
    print(f"{k:7s} median final regret {np.median(v):.4g}")
