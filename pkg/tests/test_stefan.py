import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from seaice_brine import stefan as st
from seaice_brine.model import ModelParams

P = ModelParams()
PW = ModelParams(curvature_sign=-1)  # well-posed orientation used for dynamics


def _order(h, err):
    return np.polyfit(np.log(h), np.log(err), 1)[0]


# --- curve construction ----------------------------------------------------------------

def test_curve_validation():
    with pytest.raises(ValueError):
        st.InterfaceCurve(np.ones(8), np.arange(8.0))
    with pytest.raises(ValueError):
        st.InterfaceCurve(np.ones(16), np.arange(15.0))
    r = np.ones(16)
    r[3] = np.nan
    with pytest.raises(ValueError):
        st.InterfaceCurve(r, np.arange(16.0))


def test_cell_centred_nodes():
    c = st.sphere_curve(1.0, 32)
    assert np.allclose(c.s_nodes, (np.arange(32) + 0.5) / 32)


def test_capsule_geometry():
    c = st.capsule_curve(4.0, 0.4, 256)
    assert c.r.max() == pytest.approx(0.4, rel=5e-3)
    assert c.x3.max() - c.x3.min() == pytest.approx(4.8, rel=5e-3)
    assert abs(st.centroid_height(c)) < 1e-6
    h = st.arc_spacing(c)[1:-1]
    assert (h.max() - h.min()) / h.mean() < 1e-3
    assert np.all(np.diff(c.x3) > 0)


# --- curvature -------------------------------------------------------------------------

def test_cylinder_curvature():
    for r0 in (0.3, 1.0, 2.5):
        c = st.cylinder_curve(r0, 5.0, 64)
        assert np.allclose(st.curvature(c), -1.0 / (2 * r0), rtol=1e-12)


def test_sphere_curvature_second_order():
    errs = []
    ns = [32, 64, 128, 256]
    for n in ns:
        c = st.sphere_curve(0.7, n, center=0.3)
        errs.append(np.max(np.abs(st.curvature(c) + 1 / 0.7)))
    assert 1.7 <= _order(1.0 / np.array(ns), errs) <= 2.3
    assert errs[-1] < 1e-4


def test_flat_limit():
    k = [np.max(np.abs(st.curvature(st.sphere_curve(R, 64)))) for R in (1e2, 1e4, 1e6)]
    assert k[-1] < 1e-5 and k[0] > k[1] > k[2]


@settings(max_examples=30, deadline=None)
@given(hs.floats(0.05, 20.0), hs.floats(-10, 10))
def test_sphere_curvature_any_radius(R, center):
    c = st.sphere_curve(R, 128, center)
    assert np.allclose(st.curvature(c) * R, -1.0, atol=2e-3)


def test_degenerate_tangent_raises():
    c = st.InterfaceCurve(np.full(16, 1.0), np.zeros(16), st.Topology.OPEN)
    with pytest.raises(st.GeometryError):
        st.curvature(c)


# --- salt and velocity -------------------------------------------------------------------

def test_salt_uniform_sphere():
    q = P.replace(delta_g=0.0)
    c = st.sphere_curve(1.0, 128)
    s = st.BrineState(c, 4 * np.pi / 3 * 7.0)
    N = st.salt_density(s, q)
    assert np.allclose(N, 7.0, rtol=1e-3)  # trapezoid volume of the discrete sphere


@settings(max_examples=30, deadline=None)
@given(hs.floats(0.1, 5.0), hs.floats(0.0, 6.0), hs.floats(0.1, 50.0))
def test_salt_normalisation_identity(radius, length, NT):
    q = P.replace(delta_g=0.0)
    c = st.capsule_curve(length, radius, 64)
    s = st.BrineState(c, NT)
    N = st.salt_density(s, q)
    assert np.allclose(N * st.volume(c), NT, rtol=1e-12)


def test_stratification_effect_is_tiny():
    c = st.sphere_curve(1.0, 128)
    N = st.salt_density(st.BrineState(c, 10.0), P)
    assert (N.max() - N.min()) / N.mean() < 1e-7


def test_salt_requires_closed_curve():
    c = st.cylinder_curve(1.0, 3.0, 32)
    with pytest.raises(st.GeometryError):
        st.salt_density(st.BrineState(c, 1.0), P)


def test_equilibrium_sphere_velocity_zero():
    q = P.replace(delta_g=0.0)
    c = st.sphere_curve(0.5, 256)
    NT = 5.4 * st.volume(c)
    V = st.normal_velocity(st.BrineState(c, NT), st.ThermalProfile(-4.0), q)
    assert np.max(np.abs(V)) < 1e-3
    # the salt value itself: 1/0.5 + N + 1.85 (-4) = 0
    assert st.equilibrium_sphere_salt(0.5, -4.0, P) == pytest.approx(5.4)


def test_pure_curvature_velocity():
    q = P.replace(delta_g=0.0)
    c = st.sphere_curve(2.0, 256)
    V = st.normal_velocity(st.BrineState(c, 1e-300), st.ThermalProfile(0.0), q)
    assert np.allclose(V, 0.5, atol=1e-4)


def _open_curve_from_pore(prof, x_lo, x_hi, n):
    sol = prof.solution
    xx = np.linspace(x_lo, x_hi, 20001)
    rr = sol.sol(xx)[0]
    ell = np.concatenate([[0], np.cumsum(np.hypot(np.diff(xx), np.diff(rr)))])
    nodes = (np.arange(n) + 0.5) / n * ell[-1]
    return st.InterfaceCurve(np.interp(nodes, ell, rr), np.interp(nodes, ell, xx), st.Topology.OPEN)


def test_equilibrium_pore_has_zero_velocity():
    a0, b0 = -4.0, 0.0032
    prof = st.equilibrium_pore(2.0, a0, b0, 30.0, P)
    errs = []
    for n in (128, 256):
        c = _open_curve_from_pore(prof, 0.0, 30.0, n)
        V = -P.curvature_sign * st.curvature(c) + prof.salt + P.beta * (a0 - b0 * c.x3)
        errs.append(np.max(np.abs(V[5:-5])))
    assert errs[1] < 1e-3 and errs[1] < errs[0] / 3


# --- equilibrium pores ---------------------------------------------------------------------

def test_pore_constant_without_gradient():
    prof = st.equilibrium_pore(2.0, -4.0, 0.0, 50.0, P)
    assert prof.reason == "x3_max"
    assert np.allclose(prof.r, 2.0, atol=1e-9)
    assert prof.salt == pytest.approx(7.15)


def test_pore_regimes():
    kinds = {b0: st.classify_pore_regime(st.equilibrium_pore(2.0, -4.0, b0, 50.0, P))
             for b0 in (0.0015, 0.0032, 0.015)}
    assert kinds == {0.0015: st.PoreRegime.TAPERED, 0.0032: st.PoreRegime.OSCILLATORY,
                     0.015: st.PoreRegime.PINCH_OFF}


def test_pore_pinch_location():
    prof = st.equilibrium_pore(2.0, -4.0, 0.015, 50.0, P)
    assert abs(prof.x3_end - 38.7) / 38.7 < 0.05


def test_pore_rejects_bad_radius():
    with pytest.raises(ValueError):
        st.equilibrium_pore(0.0, -4.0, 0.0, 1.0, P)


def test_pore_axis_event():
    # strong upward cooling with a thin pore reaches the axis
    prof = st.equilibrium_pore(0.2, -4.0, 0.5, 50.0, P)
    assert prof.reason in ("pinch", "turning_point")
    assert st.classify_pore_regime(prof) is st.PoreRegime.PINCH_OFF


# --- implicit step -------------------------------------------------------------------------

def test_jacobian_matches_finite_differences():
    c = st.capsule_curve(2.0, 0.5, 24)
    c = st.InterfaceCurve(c.r * (1 + 0.05 * np.sin(7 * c.s_nodes)), c.x3 + 0.02 * np.cos(3 * c.s_nodes))
    asm = st._Assembler(c, st.ThermalProfile(-3.0, -0.01), 4.0, 0.05, PW)
    z = st._interleave(c) + 1e-3 * np.cos(np.arange(2 * c.n))
    J = asm.jacobian_dense(z)
    h = 1e-7
    fd = np.empty_like(J)
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        fd[:, j] = (asm.residual(z + e) - asm.residual(z - e)) / (2 * h)
    assert np.max(np.abs(J - fd)) / np.max(np.abs(J)) < 1e-6


def test_equilibrium_sphere_is_fixed_point():
    q = P.replace(delta_g=0.0)
    c = st.sphere_curve(0.5, 128)
    s = st.BrineState(c, 5.4 * st.volume(c))
    # salt chosen from the discrete volume so that the discrete velocity vanishes in the mean
    V = st.normal_velocity(s, st.ThermalProfile(-4.0), q)
    s = st.BrineState(c, (5.4 - V.mean()) * st.volume(c))
    new = st.step_backward_euler(s, st.ThermalProfile(-4.0), 0.01, q)
    assert np.max(np.abs(new.curve.r - c.r)) < 1e-6
    assert np.max(np.abs(new.curve.x3 - c.x3)) < 1e-6


def test_newton_fixed_point_exact():
    q = PW.replace(delta_g=0.0)
    s0 = st.BrineState(st.sphere_curve(0.5, 64), 2.0)
    th = st.ThermalProfile(-4.0)
    # relax to the discrete equilibrium, then one more step must not move it
    evo = st.evolve(s0, [(0.0, th)], 20.0, 0.5, q)
    s = evo.final
    new = st.step_backward_euler(s, th, 0.1, q)
    assert np.max(np.abs(new.curve.r - s.curve.r)) < 1e-10
    assert np.max(np.abs(new.curve.x3 - s.curve.x3)) < 1e-10


def test_salt_volume_identity_along_steps():
    q = PW.replace(delta_g=0.0)
    s = st.BrineState(st.capsule_curve(2.0, 0.5, 64), 3.0)
    th = st.ThermalProfile(-3.0, -0.01)
    for _ in range(5):
        s = st.step_backward_euler(s, th, 0.02, q)
        N = st.salt_density(s, q)
        assert np.allclose(N * st.volume(s.curve), s.total_salt, rtol=1e-13)


def test_spacing_stays_uniform():
    q = PW
    s = st.BrineState(st.capsule_curve(3.0, 0.5, 96), 4.0)
    evo = st.evolve(s, [(0.0, st.ThermalProfile(-2.0, -0.014))], 1.0, 0.02, q, frame_taus=[0.5, 1.0])
    for f in evo.frames + [evo.final]:
        h = st.arc_spacing(f.curve)[1:-1]
        assert (h.max() - h.min()) / h.mean() < 0.01


def test_equidistribute_keeps_shape():
    n = 64
    s = (np.arange(n) + 0.5) / n
    t = s + 0.08 * np.sin(2 * np.pi * s) / (2 * np.pi)  # uneven parameterisation of a sphere
    c = st.InterfaceCurve(np.sin(np.pi * t), -np.cos(np.pi * t))
    e = st.equidistribute(c)
    assert np.allclose(np.hypot(e.r, e.x3), 1.0, atol=2e-3)
    h = st.arc_spacing(e)[1:-1]
    assert (h.max() - h.min()) / h.mean() < 1e-8


def test_shrinking_sphere_matches_oracle():
    q = PW.replace(delta_g=0.0)
    R0, dth, T = 0.5, -4.0, 0.1
    NT = st.equilibrium_sphere_salt(R0, -2.0, q) * 4 / 3 * np.pi * R0**3
    ref = st.sphere_radius_oracle(R0, NT, dth, T, q)
    errs = []
    for dt in (2e-3, 1e-3):
        s = st.BrineState(st.sphere_curve(R0, 128), NT)
        for _ in range(round(T / dt)):
            s = st.step_backward_euler(s, st.ThermalProfile(dth), dt, q)
        R = (3 * st.volume(s.curve) / (4 * np.pi)) ** (1 / 3)
        errs.append(abs(R - ref))
    assert errs[1] / ref < 1e-3
    assert 1.6 < errs[0] / errs[1] < 2.4


def test_step_rejects_bad_input():
    s = st.BrineState(st.sphere_curve(1.0, 32), 1.0)
    with pytest.raises(ValueError):
        st.step_backward_euler(s, st.ThermalProfile(-2.0), 0.0, PW)
    with pytest.raises(ValueError):
        st.BrineState(st.sphere_curve(1.0, 32), 0.0)


# --- pinch detection ---------------------------------------------------------------------------

def test_no_pinch_on_cylinder_or_sphere():
    assert st.detect_pinch(st.BrineState(st.capsule_curve(3.0, 1.0, 64), 1.0), P) is None
    assert st.detect_pinch(st.BrineState(st.sphere_curve(0.05, 64), 1.0), P) is None


def test_pinch_on_constructed_dip():
    n = 101
    s = (np.arange(n) + 0.5) / n
    r = 0.5 * np.sin(np.pi * s) * (1 - (1 - 1e-3) * np.exp(-((s - 0.5) / 0.05) ** 2))
    c = st.InterfaceCurve(r, 4 * s)
    ev = st.detect_pinch(st.BrineState(c, 1.0), P)
    assert ev is not None
    assert ev.s_location == pytest.approx(0.5, abs=1 / n)
    assert 0 < ev.s_location < 1
    assert ev.r_min < P.r_pinch
    assert ev.to_dict()["type"] == "pinch"


@settings(max_examples=25, deadline=None)
@given(hs.floats(10 * 1e-3 + 1e-6, 3.0), hs.floats(0.0, 5.0))
def test_no_false_pinch_on_convex_shapes(radius, length):
    c = st.capsule_curve(length, radius, 48)
    assert st.detect_pinch(st.BrineState(c, 1.0), P) is None


def test_newton_converges_on_long_curves():
    # the residual floor grows with the coordinates; a 40 mm capsule must still step
    c = st.capsule_curve(40.0, 1.0, 256)
    s = st.BrineState(c, 9.0 * st.volume(c))
    for _ in range(3):
        s = st.step_backward_euler(s, st.ThermalProfile(-2.0), 0.01, PW)
    assert s.tau == pytest.approx(0.03)


def test_evolve_step_budget():
    s = st.BrineState(st.sphere_curve(1.0, 32), 7.0 * 4.0 / 3.0 * np.pi)
    with pytest.raises(st.NewtonDivergence, match="step budget"):
        st.evolve(s, [(0.0, st.ThermalProfile(-4.0))], 1.0, 0.01, PW, max_steps=5)


# --- drift and oracle ---------------------------------------------------------------------------

def test_drift_needs_three_frames():
    s = st.BrineState(st.sphere_curve(1.0, 32), 1.0)
    with pytest.raises(ValueError):
        st.drift_velocity([s, s])


def test_drift_of_translating_frames():
    frames = [st.BrineState(st.sphere_curve(1.0, 32, center=-0.1 * t), 1.0, t) for t in range(4)]
    assert st.drift_velocity(frames) == pytest.approx(-0.1, rel=1e-6)


def test_oracle_self_consistency():
    a = st.sphere_radius_oracle(0.5, 3.0, -4.0, 0.1, PW, rtol=1e-12)
    b = st.sphere_radius_oracle(0.5, 3.0, -4.0, 0.1, PW, rtol=5e-13)
    assert abs(a - b) < 1e-8
