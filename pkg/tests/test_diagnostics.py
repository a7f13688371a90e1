import math

import numpy as np
import pytest

from henonlab.diagnostics import (
    CrossingDetector,
    config_distance,
    detect_crossings,
    equal_energy_neighbor,
    hull_area,
    lyapunov_series,
    pair_energy_mismatch,
    refine_crossings,
)
from henonlab.dynamics import ClassicalSystem, SemiclassicalSystem, classical_energy, effective_energy
from henonlab.errors import (
    DegenerateOffset,
    InvalidBranch,
    NegativeDiscriminant,
    RefinementFailure,
    SeparationUnderflow,
)
from henonlab.integrator import IntegrationPlan, integrate, propagate
from henonlab.validation import oracle_crossing_times

PRESET_012 = np.array([0.12, 0.12, 0.001, 0.001])


def linear_oscillator(t, y):
    return np.array([y[2], y[3], -y[0], -y[1]])


def one_chunk(field, y0, t_total, dt=0.02):
    (chunk,) = propagate(field, y0, IntegrationPlan(dt, t_total), chunk_steps=10**9)
    return chunk


def test_no_crossings_when_x1_stays_positive():
    chunk = one_chunk(lambda t, y: np.array([0.0, 1.0, 0.0, 0.0]), [0.5, 0.0, 0.0, 1.0], 10.0)
    assert detect_crossings(chunk) == []


def test_linear_oscillator_crossings_every_period():
    # x1 = A sin t, crossing upward at t = 2 pi k
    a = 1e-3
    chunk = one_chunk(linear_oscillator, [0.0, 0.0, a, 0.0], 40.0)
    pts = detect_crossings(chunk)
    t = np.array([p.t for p in pts])
    # t = 0 is the start node, which is not inside any bracket
    expected = 2 * np.pi * np.arange(1, 7)
    assert t.shape == expected.shape
    assert np.max(np.abs(np.diff(t) - 2 * np.pi)) <= 1e-4
    assert np.max(np.abs(t - expected)) <= 1e-4


def test_downward_crossings_are_rejected():
    det = CrossingDetector()
    chunk = one_chunk(linear_oscillator, [0.0, 0.0, 1e-3, 0.0], 40.0)
    det.observe_chunk(chunk)
    rejected = np.array(det.rejected_times)
    assert rejected.size == 6
    assert np.max(np.abs(rejected - np.pi * (2 * np.arange(6) + 1))) <= 1e-4


def test_per_step_and_chunked_detection_agree():
    chunk = one_chunk(ClassicalSystem(), PRESET_012, 200.0)
    a, b = CrossingDetector(), CrossingDetector()
    a.observe_chunk(chunk)
    for x, y in chunk.brackets():
        b.observe(x, y)
    assert np.array_equal(a.as_array(), b.as_array())


def test_preset_section_residuals():
    det = CrossingDetector()
    integrate(ClassicalSystem(), PRESET_012, IntegrationPlan(0.02, 20_000.0, (det,)))
    s = det.states
    assert s.shape[0] > 1000
    assert np.max(np.abs(s[:, 0])) <= 1e-9
    assert np.min(s[:, 2]) > 0.0
    assert np.all(np.diff(det.times) > 0)


def test_crossing_times_match_fine_oracle_on_regular_orbit():
    det = CrossingDetector()
    integrate(ClassicalSystem(), PRESET_012, IntegrationPlan(0.02, 100.0, (det,)))
    ref = oracle_crossing_times(PRESET_012)
    assert det.times.shape == ref.shape
    assert np.max(np.abs(det.times - ref)) <= 1e-6


def test_time_reversal_maps_crossings():
    # forward crossings at tau correspond to backward-run crossings at T - tau
    t_total = 60.0
    end = integrate(ClassicalSystem(), PRESET_012, IntegrationPlan(0.02, t_total)).state
    back = end * np.array([1, 1, -1, -1])
    fwd, rev = CrossingDetector(), CrossingDetector()
    integrate(ClassicalSystem(), PRESET_012, IntegrationPlan(0.02, t_total, (fwd,)))
    integrate(ClassicalSystem(), back, IntegrationPlan(0.02, t_total, (rev,)))
    # p1 flips sign under reversal, so upward crossings become the rejected ones
    mirrored = np.sort(t_total - np.array(rev.rejected_times))
    assert mirrored.shape == fwd.times.shape
    assert np.max(np.abs(mirrored - fwd.times)) <= 1e-6


def test_refinement_failure_is_reported():
    y0 = np.array([[-1.0, 0, 0, 0]])
    y1 = np.array([[2.0, 0, 0, 0]])
    f = np.array([[3.0, 0, 0, 0]])
    with pytest.raises(RefinementFailure):
        refine_crossings([0.0], y0, f, [1.0], y1, f, tol=1e-9, max_iter=3)
    t, s = refine_crossings([0.0], y0, f, [1.0], y1, f)
    assert abs(t[0] - 1 / 3) <= 1e-9 and abs(s[0, 0]) <= 1e-9


def test_node_on_plane_is_recorded_once():
    y = np.array([[-0.1, 0, 1, 0], [0.0, 0, 1, 0], [0.1, 0, 1, 0]])
    from henonlab.integrator import Trajectory

    chunk = Trajectory(0, 0.1, y, np.tile([1.0, 0, 0, 0], (3, 1)))
    pts = detect_crossings(chunk)
    assert len(pts) == 1 and pts[0].t == 0.1


def test_neighbor_energy_matches():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    x1, x2 = 0.12, 0.12
    x2p = x2 + 1e-4
    c = (2 * x2 + 1) * x1**2 + (x2**2 - x2p**2) - 2 / 3 * (x2**3 - x2p**3)
    assert pair.shadow[0] == pytest.approx(math.sqrt(c / (2 * x2p + 1)), rel=1e-15)
    assert pair.shadow[1] == x2p
    assert abs(classical_energy(pair.shadow) - classical_energy(pair.primary)) <= 1e-15
    assert pair.d0 == pytest.approx(config_distance(pair.primary, pair.shadow), rel=0)


def test_neighbor_zero_offset():
    with pytest.raises(DegenerateOffset):
        equal_energy_neighbor(PRESET_012, 0.0)
    pair = equal_energy_neighbor([-0.12, 0.12, 0.001, 0.001], 0.0)
    assert pair.shadow[0] == 0.12 and pair.d0 == pytest.approx(0.24)


def test_neighbor_semiclassical_effective_energy():
    y = np.concatenate([PRESET_012, [0.5, 0.5, 0.0, 0.0]])
    for hbar in (0.0, 1e-4, 1.5e-3):
        pair = equal_energy_neighbor(y, 1e-4, hbar)
        assert np.array_equal(pair.shadow[2:], y[2:])
        e0, e1 = effective_energy(pair.primary, hbar), effective_energy(pair.shadow, hbar)
        assert abs(e1 - e0) <= 1e-15
        assert pair_energy_mismatch(pair, hbar) <= 1e-13


def test_neighbor_errors():
    with pytest.raises(InvalidBranch):
        equal_energy_neighbor([0.1, -0.6, 0, 0], 0.0)
    with pytest.raises(NegativeDiscriminant):
        equal_energy_neighbor([0.0, 0.0, 0, 0], 0.1)
    with pytest.raises(ValueError):
        equal_energy_neighbor([0.1, 0.1, 0, 0, 0.4, 0.5, 0, 0], 1e-4, hbar=0.01)


def test_constant_separation_under_zero_field():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    ser = lyapunov_series(lambda t, y: np.zeros(4), pair, IntegrationPlan(0.02, 10.0), sample_stride=5)
    assert np.all(ser.d == pair.d0)
    assert np.all(ser.lam == 0.0)
    assert ser.t[-1] == 10.0 and ser.t.size == 100


def test_final_step_is_always_sampled():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    ser = lyapunov_series(ClassicalSystem(), pair, IntegrationPlan(0.02, 1.03), sample_stride=50)
    assert ser.t.tolist() == [1.0, 52 * 0.02]


def test_harmonic_limit_exponent_decays_like_inverse_time():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    ser = lyapunov_series(linear_oscillator, pair, IntegrationPlan(0.02, 500.0))
    # both orbits are ellipses, so d(t) <= |primary - shadow| in the energy norm
    dmax = math.sqrt(np.sum((pair.primary - pair.shadow) ** 2))
    assert np.all(ser.d <= dmax * (1 + 1e-8))
    assert np.all(ser.lam <= (math.log(dmax) - math.log(pair.d0)) / ser.t + 1e-12)


def test_exponent_definition():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    ser = lyapunov_series(ClassicalSystem(), pair, IntegrationPlan(0.02, 50.0), sample_stride=10)
    np.testing.assert_array_equal(ser.lam, (np.log(ser.d) - math.log(pair.d0)) / ser.t)
    a = integrate(ClassicalSystem(), pair.primary, IntegrationPlan(0.02, 50.0)).state
    b = integrate(ClassicalSystem(), pair.shadow, IntegrationPlan(0.02, 50.0)).state
    assert ser.d[-1] == config_distance(a, b)
    assert ser.final == ser.lam[-1]


def test_observers_watch_primary_orbit():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    det = CrossingDetector()
    lyapunov_series(ClassicalSystem(), pair, IntegrationPlan(0.02, 100.0, (det,)))
    ref = CrossingDetector()
    integrate(ClassicalSystem(), PRESET_012, IntegrationPlan(0.02, 100.0, (ref,)))
    assert np.array_equal(det.as_array(), ref.as_array())


def test_separation_underflow():
    pair = equal_energy_neighbor(PRESET_012, 1e-4)
    collide = pair._replace(shadow=pair.primary.copy())
    with pytest.raises(SeparationUnderflow):
        lyapunov_series(ClassicalSystem(), collide, IntegrationPlan(0.02, 1.0))


def test_semiclassical_pair_runs():
    y = np.concatenate([PRESET_012, [0.5, 0.5, 0.0, 0.0]])
    pair = equal_energy_neighbor(y, 1e-4, 1e-4)
    ser = lyapunov_series(SemiclassicalSystem(1e-4), pair, IntegrationPlan(0.02, 5.0))
    assert np.all(np.isfinite(ser.lam))


def test_hull_area():
    assert hull_area([[0, 0], [1, 0], [0, 1], [0.2, 0.2]]) == pytest.approx(0.5)
    assert hull_area([[0, 0], [1, 1]]) == 0.0
    assert hull_area([[0, 0], [1, 1], [2, 2]]) == 0.0
