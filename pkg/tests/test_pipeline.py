import numpy as np
import pytest

from dfc import diagnosis as dg
from dfc import scenario
from dfc.pipeline import RANK_UNMET, horizons, run_pipeline
from conftest import SCENARIOS


@pytest.fixture(scope="module")
def fig9():
    return run_pipeline(scenario.load(SCENARIOS / "fig9.json"))


def test_fig9_other_vehicles_point_at_3(fig9):
    for i, v in fig9.verdicts.items():
        if i != 3:
            assert v.label == "other-faulty(3)"
    ev = fig9.verdicts[1].evidence
    others = max(s for j, s in ev.items() if j != 3)
    assert ev[3] >= 5 * others


def test_fig9_self_correction(fig9):
    v3 = fig9.verdicts[3]
    assert v3.verdict == dg.SELF_FAULTY
    truth = fig9.trace.truth.u[2]
    err = np.sqrt(np.mean((v3.corrected_speed - truth) ** 2))
    assert err < 0.5
    raw = np.sqrt(np.mean((fig9.trace.measured.u[2] - truth) ** 2))
    assert err < raw


def test_fig9_recovery_is_exact(fig9):
    assert not fig9.failed
    for o in fig9.outcomes.values():
        assert o.recovery_ok
        assert o.recovery_error < 1e-6


def test_fault_free_all_clear():
    res = run_pipeline(scenario.load(SCENARIOS / "fault_free_diag.json"))
    assert {v.verdict for v in res.verdicts.values()} == {dg.NO_FAULT}
    assert res.comm_fault_flag is False


def test_malicious_communicator_is_absorbed():
    res = run_pipeline(scenario.load(SCENARIOS / "p20_3_malicious_diag.json"))
    assert not res.failed
    assert {v.verdict for v in res.verdicts.values()} == {dg.NO_FAULT}
    assert res.comm_fault_flag is True
    assert max(o.recovery_error for o in res.outcomes.values()) < 1e-6


def test_path_graph_refuses_under_attack():
    res = run_pipeline(scenario.load(SCENARIOS / "p8_1_comm_attack.json"))
    assert res.failed
    for i in res.failed:
        v = res.verdicts[i]
        assert v.verdict == dg.INCONCLUSIVE
        assert v.cause.startswith(RANK_UNMET)
        assert res.outcomes[i].rank_condition is False


def test_default_horizons():
    sc = scenario.load(SCENARIOS / "fault_free_diag.json")
    L = horizons(sc)
    g = sc.graph
    assert all(L[i] == g.n - g.degree(i) - 1 for i in L)
    sc = scenario.load(SCENARIOS / "p20_3_malicious_diag.json")
    assert set(horizons(sc).values()) == {19}


def test_pipeline_deterministic():
    sc = scenario.load(SCENARIOS / "fig9.json")
    a, b = run_pipeline(sc), run_pipeline(sc)
    for i in a.outcomes:
        for ra, rb in zip(a.outcomes[i].residuals, b.outcomes[i].residuals):
            assert ra.samples.tobytes() == rb.samples.tobytes()
