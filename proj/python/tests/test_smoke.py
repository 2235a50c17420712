import numpy as np
import pytest

import ifepanel


def small_spec(**over):
    spec = {"N": 40, "T": 30, "K": 2, "beta": [1.0, -0.5],
            "heterogeneity": {"type": "ife", "m": 2},
            "loading_regressor_correlation": 0.5, "seed": 3}
    spec.update(over)
    return spec


def test_panel_from_arrays():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 5))
    a = rng.standard_normal((6, 1))
    p = ifepanel.Panel(2.0 * x + a, [x])
    assert (p.N, p.T, p.K) == (6, 5, 1)
    assert p.var_names == ["x1"]
    r = ifepanel.fe(p, "unit")
    assert abs(r["beta"][0] - 2.0) < 1e-10
    assert r["method"] == "FE"


def test_simulate_is_pure_and_truth_is_returned():
    p1, t1 = ifepanel.simulate(small_spec())
    p2, _ = ifepanel.simulate(small_spec())
    assert np.array_equal(p1.y, p2.y)
    assert t1["beta"] == [1.0, -0.5]


def test_noiseless_ils_recovers_beta():
    p, t = ifepanel.simulate(small_spec(errors={"law": "iid_normal", "sigma": 0.0}))
    r = ifepanel.ils(p, m=2)
    assert np.max(np.abs(r["beta"] - np.array(t["beta"]))) < 1e-6
    assert r["factors"].shape == (30, 2)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(r["ssr_path"], r["ssr_path"][1:]))


def test_estimate_by_config_entry_and_failure_status():
    p, _ = ifepanel.simulate(small_spec())
    ok = ifepanel.estimate(p, {"type": "GF", "G": 2, "starts": 20}, seed=4)
    assert ok["ok"] and ok["label"] == "GF(2)"
    bad = ifepanel.estimate(p, {"type": "ILS", "m": 100})
    assert not bad["ok"] and bad["status"] == "InvalidM"


def test_errors_carry_their_kind():
    with pytest.raises(ifepanel.IfepanelError) as e:
        ifepanel.gos(np.ones((5, 10)), 2)
    assert e.value.args[0] == "RequiresNGreaterT"


def test_diagnostics_round_trip():
    u = np.tile(np.array([[1.0, 3.0, 2.0, 5.0]]), (3, 1))
    assert ifepanel.cd_test(u)["statistic"] == pytest.approx(np.sqrt(12.0), abs=1e-12)
    assert ifepanel.alpha_residual(np.tile(np.arange(20.0), (12, 1)))["alpha"] == pytest.approx(1.0)
    p, _ = ifepanel.simulate(small_spec())
    a = ifepanel.cdw_test(p.y, reps=50, seed=9)
    b = ifepanel.cdw_test(p.y, reps=50, seed=9, threads=3)
    assert a["statistic"] == b["statistic"]
    er, gr = ifepanel.er_gr(p.y, 6)
    assert er["method"] == "ER" and gr["method"] == "GR"
    table = ifepanel.diagnose(p)
    assert table["rows"] == ["y", "x1", "x2", "All"]
