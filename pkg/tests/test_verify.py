from __future__ import annotations

import math

import numpy as np
import pytest

from eulerspec import (IntegratorControls, audit_trajectory, init_fiber_frame,
                       integrate_bas, kolmogorov_oracle, make_abc_flow,
                       make_kolmogorov_flow, make_shear_flow,
                       oracle_comparison, shear_oracle, step_halving_study)
from helpers import random_point, unit_vector

ABC = make_abc_flow(1.0, 1.0, 1.0)


def test_shear_oracle_matches_integrator(rng):
    U = (1.3, -0.4, 0.8)
    flow = make_shear_flow(U)
    for _ in range(5):
        x0 = random_point(rng)
        xi0 = unit_vector(rng)
        b0 = np.cross(xi0, unit_vector(rng))
        b0 /= np.linalg.norm(b0)
        dev = oracle_comparison(flow, x0, xi0, b0, 100.0)
        assert dev is not None and dev <= 1e-10


def test_shear_oracle_values():
    state = shear_oracle((2.0, 0.0, 0.0), (1.0, 2.0, 3.0), (0.0, 1.0, 0.0), 5.0,
                         b0=(1.0, 0.0, 0.0))
    np.testing.assert_allclose(state.x, [11.0, 2.0, 3.0], rtol=0)
    np.testing.assert_allclose(state.xi, [0.0, 1.0, 0.0], rtol=0)
    np.testing.assert_allclose(state.b, [1.0, 0.0, 0.0], rtol=0)


def test_kolmogorov_oracle_matches_integrator(rng):
    flow = make_kolmogorov_flow(1.0)
    for _ in range(5):
        x0 = random_point(rng)
        xi0 = unit_vector(rng)
        if abs(xi0[0]) < 1e-3:
            xi0[0] = 0.1
            xi0 /= np.linalg.norm(xi0)
        b0 = np.cross(xi0, unit_vector(rng))
        b0 /= np.linalg.norm(b0)
        dev = oracle_comparison(flow, x0, xi0, b0, 10.0)
        assert dev is not None and dev <= 1e-8


def test_kolmogorov_oracle_frozen_frequency_branch():
    # xi1 = 0 freezes the frequency; the amplitude slides linearly in time.
    flow = make_kolmogorov_flow(0.7)
    x0 = np.array([0.5, 1.1, 2.0])
    xi0 = np.array([0.0, 0.6, 0.8])
    b0 = np.array([1.0, 0.0, 0.0])  # transverse to xi0
    state = kolmogorov_oracle(0.7, x0, xi0, b0, 4.0)
    np.testing.assert_allclose(state.xi, xi0, rtol=0)
    g = 0.7 * math.cos(x0[1])
    np.testing.assert_allclose(state.b, [1.0 - g * 4.0 * 0.0, 0.0, 0.0], atol=1e-15)
    dev = oracle_comparison(flow, x0, xi0, b0, 4.0)
    assert dev is not None and dev <= 1e-8


def test_kolmogorov_oracle_preserves_invariants(rng):
    # The closed form must inherit both exact invariants of the transport:
    # the inner product b.xi and the product b2 |xi|^2.
    for _ in range(10):
        x0 = random_point(rng)
        xi0 = unit_vector(rng) * float(rng.uniform(0.5, 2.0))
        b0 = rng.standard_normal(3)
        amp = float(rng.uniform(0.2, 2.0))
        for t in (0.0, 0.7, 3.0, -2.0):
            state = kolmogorov_oracle(amp, x0, xi0, b0, t)
            assert state.b @ state.xi == pytest.approx(b0 @ xi0, abs=1e-10)
            assert state.b[1] * (state.xi @ state.xi) == pytest.approx(
                b0[1] * (xi0 @ xi0), abs=1e-10)


def test_oracle_comparison_returns_none_when_uncovered(rng):
    xi0 = unit_vector(rng)
    b0 = np.cross(xi0, unit_vector(rng))
    b0 /= np.linalg.norm(b0)
    assert oracle_comparison(ABC, random_point(rng), xi0, b0, 1.0) is None


def test_audit_trajectory_fields(rng):
    x0 = random_point(rng)
    xi0 = unit_vector(rng)
    frame = init_fiber_frame(xi0, seed=0)
    report = audit_trajectory(ABC, x0, xi0, frame, 10.0)
    d = report.as_dict()
    assert set(d) == {"max_H_drift", "max_bxi_drift", "det_jacobian_err",
                      "xi_consistency_angle", "group_roundtrip_err"}
    assert all(v >= 0.0 for v in d.values())
    assert report.max_H_drift <= 1e-8
    assert report.max_bxi_drift <= 1e-8
    assert report.det_jacobian_err <= 1e-8
    assert report.xi_consistency_angle <= 1e-6
    assert report.group_roundtrip_err <= 1e-6
    assert report.worst() == max(d.values())


def test_drift_scales_with_tolerance(rng):
    # Tightening rtol by three decades must shrink each measurable drift
    # field roughly linearly (within a factor of 100 of proportionality).
    x0 = random_point(rng)
    xi0 = unit_vector(rng)
    frame = init_fiber_frame(xi0, seed=0)
    coarse = audit_trajectory(ABC, x0, xi0, frame, 10.0,
                              IntegratorControls(rtol=1e-6, atol=1e-8))
    fine = audit_trajectory(ABC, x0, xi0, frame, 10.0,
                            IntegratorControls(rtol=1e-9, atol=1e-11))
    for key, coarse_v in coarse.as_dict().items():
        fine_v = fine.as_dict()[key]
        assert fine_v <= coarse_v + 1e-12, key
        if fine_v > 1e-12:  # above the round-off floor a ratio is meaningful
            ratio = coarse_v / fine_v
            assert 10.0 <= ratio <= 1e5, (key, ratio)


def test_step_halving_kolmogorov_converges(rng):
    flow = make_kolmogorov_flow(1.0)
    study = step_halving_study(flow, random_point(rng), unit_vector(rng), 100.0,
                               tolerances=(1e-6, 1e-8, 1e-10))
    assert study.tolerances == [1e-6, 1e-8, 1e-10]
    assert study.passed
    assert study.diffs[-1] <= 1e-4
    rows = list(study.rows())
    assert len(rows) == 3 and rows[0][0] == 1e-6


def test_step_halving_shear_exactly_stationary(rng):
    flow = make_shear_flow((1.0, 2.0, 0.0))
    study = step_halving_study(flow, random_point(rng), unit_vector(rng), 50.0,
                               tolerances=(1e-5, 1e-7, 1e-9))
    assert study.passed
    assert all(d == 0.0 for d in study.diffs)


def test_step_halving_sorts_and_validates(rng):
    flow = make_kolmogorov_flow(1.0)
    study = step_halving_study(flow, (0.1, 0.2, 0.3), (0.5, 0.5, 0.7071), 20.0,
                               tolerances=(1e-10, 1e-6))  # unsorted input
    assert study.tolerances == [1e-6, 1e-10]
    with pytest.raises(ValueError):
        step_halving_study(flow, (0.1, 0.2, 0.3), (0.5, 0.5, 0.7071), 20.0,
                           tolerances=(1e-8,))


def test_audit_negative_horizon(rng):
    x0 = random_point(rng)
    xi0 = unit_vector(rng)
    frame = init_fiber_frame(xi0, seed=0)
    report = audit_trajectory(ABC, x0, xi0, frame, -10.0)
    assert report.max_H_drift <= 1e-8
    assert report.group_roundtrip_err <= 1e-6


def test_oracle_comparison_respects_controls(rng):
    flow = make_kolmogorov_flow(1.0)
    xi0 = unit_vector(rng)
    if abs(xi0[0]) < 1e-3:
        xi0[0] = 0.1
        xi0 /= np.linalg.norm(xi0)
    b0 = np.cross(xi0, unit_vector(rng))
    b0 /= np.linalg.norm(b0)
    x0 = random_point(rng)
    loose = oracle_comparison(flow, x0, xi0, b0, 10.0,
                              IntegratorControls(rtol=1e-5, atol=1e-7))
    tight = oracle_comparison(flow, x0, xi0, b0, 10.0,
                              IntegratorControls(rtol=1e-11, atol=1e-13))
    assert tight <= loose
