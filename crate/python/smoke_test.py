"""Smoke test for the passfl_py extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `pip install <wheel>`, then run `python python/smoke_test.py`.
"""

import math

import passfl_py as pf


def check_closed_form():
    rho, v = pf.closed_form_target([0.6, 0.8], 1.0)
    assert abs(rho - 1.0) < 1e-12
    assert abs(v[0] - 0.6) < 1e-12 and abs(v[1] - 0.8) < 1e-12


def check_metrics():
    h = [1 + 0j, 0.5j]
    phi = [0.5, 0.5]
    b = [phi[0] / h[0], phi[1] / h[1]]
    mse = pf.aggregation_mse(h, [True, True], b, 1.0, phi, 0.0)
    assert mse < 1e-24
    snr = pf.computation_snr(h, [True, True], b, 1.0, phi, 0.01)
    assert abs(snr - (0.5 + 0.01) / 0.01) < 1e-9
    assert math.isinf(pf.energy_objective(h, [True, True], [0j, 0j], 1.0, phi, 1.0))


def check_solvers():
    params = pf.SystemParams()
    assert abs(params.noise_power - 1e-12) < 1e-27
    scenario = pf.Scenario.random(50.0, 32, [500] * 8, seed=1)
    assert len(scenario.devices) == 8
    assert abs(sum(scenario.weights) - 1.0) < 1e-12

    pass_link = pf.solve(params, scenario)
    assert sum(pass_link.schedule) >= 6
    assert len(pass_link.positions) == 32
    assert pass_link.snr > 1.0 and pass_link.total_energy > 0.0
    trace = pass_link.energy_trace
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    h = scenario.channel(params, pass_link.positions)
    assert max(abs(x - y) for x, y in zip(h, pass_link.channel)) < 1e-15

    mimo_link = pf.solve_mimo(params, scenario, antennas=8)
    assert mimo_link.snr > 1.0


def check_training():
    config = """
[fl]
rounds = 2
epochs = 1
hidden = 16

[fl.synthetic]
dim = 16
train_samples = 400
test_samples = 200
"""
    rounds = pf.train(config, "ideal", seed=3)
    assert [r["round"] for r in rounds] == [0, 1]
    assert all(0.0 <= r["accuracy"] <= 100.0 for r in rounds)
    assert rounds[0]["snr"] is None
    rounds = pf.train(config, "pass", seed=3)
    assert rounds[-1]["energy_total"] > 0.0
    try:
        pf.train("[fl]\nroundz = 2\n")
    except ValueError as e:
        assert "roundz" in str(e)
    else:
        raise AssertionError("unknown key accepted")


if __name__ == "__main__":
    check_closed_form()
    check_metrics()
    check_solvers()
    check_training()
    print("passfl_py smoke test passed")
