import os
import tempfile

import pytest

import jobshop_rl as js


def test_generate_roundtrip():
    inst = js.generate(3, 2, seed=4)
    assert inst.num_jobs == 3 and inst.num_machines == 2
    again = js.parse_instance(js.write_instance(inst))
    assert again == inst
    assert js.generate(3, 2, seed=4) == inst


def test_episode_is_feasible():
    inst = js.Instance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], num_machines=2)
    state = js.SchedulingState(inst)
    total = 0
    while not state.done():
        job = state.allowed().index(True)
        total += state.apply(job)
    assert -total == state.makespan
    assert js.check_schedule(inst, state.schedule) == ""


def test_invalid_action_raises():
    state = js.SchedulingState(js.Instance([[(0, 1)]], num_machines=1))
    state.apply(0)
    with pytest.raises(js.InvalidAction):
        state.apply(0)


def test_exact_solvers_agree():
    for seed in range(5):
        inst = js.generate(3, 3, seed=seed)
        bb = js.branch_and_bound(inst)
        assert bb["optimal"]
        assert bb["makespan"] == js.brute_force(inst)["makespan"]
        assert js.check_schedule(inst, bb["schedule"]) == ""


def test_lp_export():
    inst = js.Instance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], num_machines=2)
    lp = js.export_lp(inst)
    assert "Minimize" in lp and "Binaries" in lp
    assert js.milp_constraint_count(inst) == 2 + 4 + 4


def test_metrics():
    assert js.tau(2.47, 4.68) == pytest.approx(-0.472, abs=5e-3)
    assert js.rho(4785.2, 29505.2) == pytest.approx(-0.838, abs=5e-3)
    prof = js.performance_profile([("p1", "A", 1.0), ("p1", "B", 2.0)])
    assert prof["A"][-1][1] == 1.0
    assert js.moving_average([1.0, 3.0], 2) == [1.0, 2.0]


def test_train_and_solve():
    inst = js.generate(3, 2, seed=1)
    policy, log = js.train([inst], episodes=4, rollouts=3, hidden1=4, hidden2=5, ffn=[6, 4, 2])
    assert len(log) == 4
    makespan, schedule = policy.solve(inst)
    assert makespan >= js.branch_and_bound(inst)["makespan"]
    assert js.check_schedule(inst, schedule) == ""


def test_config_error():
    with pytest.raises(js.ConfigError):
        js.generate(0, 2)


def test_cli_passthrough():
    with tempfile.TemporaryDirectory() as tmp:
        code, out, _ = js.run_cli(["gen", "--jobs", "2", "--machines", "2", "--out", tmp])
        assert code == 0
        assert any(name.endswith(".jssp") for name in os.listdir(tmp))
        code, _, err = js.run_cli(["gen", "--jobs", "0", "--machines", "2", "--out", tmp])
        assert code == 2 and err.startswith("error[config]")
