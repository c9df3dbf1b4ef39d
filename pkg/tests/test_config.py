import pytest

from slotopt import config as C
from slotopt.machine import SlotDesignEvaluator
from slotopt.synthetic import SyntheticProblem

BUNDLED = [
    "reference.yaml", "synthetic.yaml", "benchmark_synthetic.yaml", "benchmark_slot.yaml",
    "pack_benchmark.yaml", "pack_keystone2.yaml", "pack_keystone4.yaml",
]


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_parse(name):
    cfg = C.Config.from_text(C.bundled(name), name)
    if "problem" in cfg.data:
        ev = C.build_evaluator(cfg)
        C.build_run_config(cfg, ev, 0)
        for method in ("nsga2", "pso"):
            C.build_evolution_config(cfg, method, 0)


def test_reference_builds_slot_evaluator():
    cfg = C.Config.from_text(C.bundled("reference.yaml"))
    ev = C.build_evaluator(cfg)
    assert isinstance(ev, SlotDesignEvaluator)
    assert ev.bounds.g2_max == 1.35
    rc = C.build_run_config(cfg, ev, 3)
    assert rc.budget == 800 and rc.random_seed == 3
    assert rc.fidelity.zeta == (0.01, 0.0) and rc.fidelity.costs == (1.0, 10.0)


def test_synthetic_problem():
    ev = C.build_evaluator(C.Config.from_text("problem: synthetic\nsynthetic:\n  bias: 0.2\n"))
    assert isinstance(ev, SyntheticProblem) and ev.bias == 0.2


def test_missing_key_names_key_and_line():
    text = "problem: slot\nseed: 1\n\noptimizer:\n  seed_count: 4\n"
    cfg = C.Config.from_text(text, "run.yaml")
    with pytest.raises(C.ConfigError, match=r"missing key 'budget' in optimizer \(line 4\)"):
        C.build_run_config(cfg, C.build_evaluator(cfg), 0)
    with pytest.raises(C.ConfigError, match=r"missing key 'problem'"):
        C.build_evaluator(C.Config.from_text("seed: 1\n"))


def test_unknown_key_reports_line():
    text = "problem: slot\nmachine:\n  pole_count: 6\n  pole_cuont: 8\n"
    with pytest.raises(C.ConfigError, match=r"unknown key 'pole_cuont' in machine \(line 4\)"):
        C.build_evaluator(C.Config.from_text(text))


def test_invalid_values_and_syntax():
    with pytest.raises(C.ConfigError, match="invalid machine"):
        C.build_evaluator(C.Config.from_text("problem: slot\nmachine:\n  pole_count: 5\n"))
    with pytest.raises(C.ConfigError):
        C.Config.from_text("problem: [slot\n")
    with pytest.raises(C.ConfigError):
        C.Config.from_text("- a\n- b\n")
    with pytest.raises(C.ConfigError, match="unknown problem"):
        C.build_evaluator(C.Config.from_text("problem: wing\n"))


def test_design_vector_length_checked():
    cfg = C.Config.from_text("pack:\n  design: [1, 2, 3]\n")
    with pytest.raises(C.ConfigError, match="line 2"):
        C.design_vector(cfg, ("pack", "design"))
