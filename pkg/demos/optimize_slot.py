"""Optimize the two-layer keystone slot and compare it with the benchmark winding."""

from dataclasses import replace

from slotopt import config as C
from slotopt import pibo
from slotopt.machine import SlotDesignEvaluator
from slotopt.space import INITIAL, VARIABLE_NAMES

cfg = C.Config.from_text(C.bundled("reference.yaml"))
ev = C.build_evaluator(cfg)
trace = pibo.run(C.build_run_config(cfg, ev, 0), ev)
best = trace.incumbent()
print(f"{len(trace)} queries, {trace.top_count} at high fidelity, cost {trace.spent:.0f}")
for name, value in zip(VARIABLE_NAMES, best.x):
    print(f"  {name:11s} {value:8.3f}")

bench = replace(SlotDesignEvaluator(), winding="benchmark").evaluate(INITIAL)
opt = ev.evaluate(best.x)
for label, r in (("benchmark", bench), ("optimized", opt)):
    print(f"{label:10s} SFF {r.sff:.3f}  torque {r.torque:.1f} N m  copper loss {r.conduction_loss:.0f} W  "
          f"winding {r.winding_temperature:.1f} C")
