import json
from dataclasses import replace

import numpy as np
import pytest

from seaice_brine import io
from seaice_brine import scenarios as sc
from seaice_brine import stefan as st
from seaice_brine.model import ModelParams


def small(name="small", **kw):
    base = dict(name=name, shape={"kind": "sphere", "radius": 0.8},
                schedule=((0.0, -2.0, 0.0), (0.5, -4.0, -0.014)), stop={"tau_end": 1.0},
                frame_taus=(0.0, 0.5, 1.0), params=sc.WELL_POSED, n_nodes=32, dtau=0.02,
                checks=("no_pinch", "near_spherical", "uniform_spacing"))
    base.update(kw)
    return sc.Scenario(**base)


@pytest.mark.parametrize("kw", [
    {"schedule": ((0.5, -2.0, 0.0),)},
    {"schedule": ((0.0, -2.0, 0.0), (0.0, -4.0, 0.0))},
    {"schedule": ()},
    {"stop": {}},
    {"stop": {"pinch": 3.0, "steady": 1e-6}},
    {"shape": {"kind": "torus"}},
])
def test_scenario_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_scenario_dict_round_trip():
    for name in sc.BUILTIN_SCENARIOS:
        s = sc.builtin_scenario(name)
        assert sc.Scenario.from_dict(json.loads(json.dumps(s.to_dict()))) == s


def test_scenario_unknown_key():
    d = small().to_dict()
    d["tau_stop"] = 1.0
    with pytest.raises(KeyError, match="tau_stop"):
        sc.Scenario.from_dict(d)


def test_builtin_lookup():
    assert set(sc.BUILTIN_SCENARIOS) == {"sphere", "tube-A", "tube-B", "tube-C"}
    with pytest.raises(KeyError, match="built-ins"):
        sc.builtin_scenario("tube-D")


def test_builtin_schedules_shift_at_tau_one():
    for name, s in sc.BUILTIN_SCENARIOS.items():
        assert [row[0] for row in s.schedule] == [0.0, 1.0], name
        assert s.schedule[0][1] == -2.0
    assert sc.BUILTIN_SCENARIOS["sphere"].schedule[1][1:] == (-4.0, -0.014)
    assert sc.BUILTIN_SCENARIOS["tube-A"].schedule[1][1:] == (-6.0, 0.0)
    assert sc.BUILTIN_SCENARIOS["tube-B"].schedule[1][1:] == (-10.0, -0.014)
    assert sc.BUILTIN_SCENARIOS["tube-C"].schedule[1][1:] == (-4.0, -0.014)


@pytest.mark.parametrize("name", sorted(sc.BUILTIN_SCENARIOS))
def test_initial_state_balanced(name):
    s = sc.builtin_scenario(name)
    params = ModelParams().replace(**s.params)
    state = sc.initial_state(s, params)
    _, a0, b0 = s.schedule[0]
    v = st.normal_velocity(state, st.ThermalProfile(a0, b0), params)
    assert abs(np.sum(state.curve.r * v) / np.sum(state.curve.r)) < 1e-10
    assert state.total_salt > 0


def test_report_enumerates_every_check():
    s = small(checks=("no_pinch", "pinch", "near_spherical", "descends", "uniform_spacing",
                      "pinch_middle_third", "pinch_time_B"))
    rep = sc.run_scenario(s)
    assert [a.name for a in rep.assertions] == list(s.checks)
    assert rep.error is None
    taus = [f.tau for f in rep.frames]
    assert taus == [0.0, 0.5, 1.0]
    # no pinch: the pinch-dependent checks report failure with measured None
    by = {a.name: a for a in rep.assertions}
    assert by["no_pinch"].passed and not by["pinch"].passed
    assert by["pinch_middle_third"].measured is None and not rep.passed


def test_solver_error_surfaces_in_report(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("newton failed at tau=0.3")
    monkeypatch.setattr(sc.st, "evolve", boom)
    rep = sc.run_scenario(small())
    assert "newton failed" in rep.error
    assert len(rep.assertions) == 3 and not any(a.passed for a in rep.assertions)
    io.validate_report(rep.to_dict())


def test_unknown_check_rejected():
    with pytest.raises(ValueError, match="bogus"):
        sc.run_scenario(small(checks=("bogus",)))


def test_deterministic_frames(tmp_path):
    s = small()
    for k in range(2):
        rep = sc.run_scenario(s)
        io.write_frames(tmp_path / f"run{k}.csv", rep.frames)
    assert (tmp_path / "run0.csv").read_bytes() == (tmp_path / "run1.csv").read_bytes()


def test_report_validates_against_schema():
    rep = sc.run_scenario(small())
    data = rep.to_dict()
    io.validate_report(data)
    assert data["frames_written"] == 3
    json.dumps(data, allow_nan=False)
    assert "PASS" in rep.summary() or "FAIL" in rep.summary()


def test_anisotropy_of_sphere_and_capsule():
    assert sc.anisotropy(st.sphere_curve(1.0, 64)) < 1e-12
    assert sc.anisotropy(st.capsule_curve(4.0, 0.4, 64)) > 0.5


def test_sphere_stays_centered_without_gradient():
    s = small(schedule=((0.0, -2.0, 0.0), (0.5, -4.0, 0.0)), checks=("near_spherical",))
    rep = sc.run_scenario(s, ModelParams(delta_g=0.0))
    z = [st.centroid_height(f.curve) for f in rep.frames]
    assert np.max(np.abs(z)) < 1e-10
    assert rep.passed


def test_drift_zero_gradient_control():
    p = ModelParams(delta_g=0.0).replace(**sc.WELL_POSED)
    assert abs(sc.drift_for_gradient(0.0, p, n=32)) < 1e-8


def test_drift_sign_and_linearity_small():
    p = ModelParams().replace(**sc.WELL_POSED)
    v4 = sc.drift_for_gradient(-0.004, p, n=32)
    v8 = sc.drift_for_gradient(-0.008, p, n=32)
    assert v4 < 0 and v8 / v4 == pytest.approx(2.0, rel=0.1)


def test_pore_sweep_report():
    rep = sc.run_pore_sweep()
    assert rep.passed, rep.summary()
    assert len(rep.assertions) == 4
    assert rep.events[0]["x3"] == pytest.approx(38.7, rel=0.05)
    io.validate_report(rep.to_dict())


def test_suite_ordering_check_is_always_declared(monkeypatch):
    def fake(scenario, params=None):
        rep = sc.RunReport(scenario.name)
        if scenario.name == "tube-B":
            rep.events.append({"type": "pinch", "tau": 2.0})
        return rep
    monkeypatch.setattr(sc, "run_scenario", fake)
    reps = sc.run_suite(names=["tube-B", "tube-C"])
    check = reps[1].assertions[-1]
    assert check.name == "pinch_after_tube_B" and not check.passed
    assert check.measured == [2.0, None]


def test_scenario_params_override_applied():
    s = replace(small(), params={"curvature_sign": -1, "delta_g": 0.0})
    rep = sc.run_scenario(s)
    assert rep.metadata["params"]["delta_g"] == 0.0
    assert rep.metadata["params"]["curvature_sign"] == -1
