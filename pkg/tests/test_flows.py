from __future__ import annotations

import json

import numpy as np
import pytest

from eulerspec import (FlowValidationError, FourierFlow, check_steady_euler,
                       eval_flow, load_flow_file, make_abc_flow,
                       make_kolmogorov_flow, make_shear_flow, reduce_point)
from helpers import TWO_PI, random_divfree_flow, random_point

CATALOG = [
    make_abc_flow(1.0, 1.0, 1.0),
    make_abc_flow(1.0, 0.7, 0.43),
    make_shear_flow((1.0, -2.0, 0.5)),
    make_kolmogorov_flow(0.8),
]


def test_catalog_flows_validate():
    for flow in CATALOG:
        flow.require_valid()


def test_catalog_gradient_trace_vanishes_on_grid():
    axis = TWO_PI * np.arange(16) / 16.0
    pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    for flow in CATALOG:
        worst = 0.0
        for x in pts[:: 7]:  # every 7th grid point keeps this under a second
            ev = eval_flow(flow, x)
            worst = max(worst, abs(float(np.trace(ev.grad_u))))
        assert worst <= 1e-13, f"{flow.name}: trace {worst:.2e}"


def test_gradient_matches_finite_differences(rng):
    h = 1e-5
    for flow in CATALOG:
        for _ in range(100):
            x = random_point(rng)
            ev = eval_flow(flow, x)
            fd = np.empty((3, 3))
            for j in range(3):
                dx = np.zeros(3)
                dx[j] = h
                fd[:, j] = (eval_flow(flow, x + dx).u - eval_flow(flow, x - dx).u) / (2 * h)
            assert np.max(np.abs(fd - ev.grad_u)) <= 1e-8


def test_catalog_flows_are_steady():
    for flow in CATALOG:
        report = check_steady_euler(flow)
        assert report.passed, report.summary()
        assert report.grid_per_axis >= 2 * flow.max_wavenumber + 1


def test_abc_point_values():
    flow = make_abc_flow(1.0, 1.0, 1.0)
    ev0 = eval_flow(flow, (0.0, 0.0, 0.0))
    np.testing.assert_allclose(ev0.u, [1.0, 1.0, 1.0], atol=1e-15)
    # u = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x):
    # the third component at (pi/2, 0, 0) is C sin 0 + B cos(pi/2) = 0.
    ev1 = eval_flow(flow, (np.pi / 2, 0.0, 0.0))
    np.testing.assert_allclose(ev1.u, [1.0, 2.0, 0.0], atol=1e-15)


def test_shear_flow_is_constant(rng):
    flow = make_shear_flow((0.3, -1.2, 2.0))
    for _ in range(5):
        ev = eval_flow(flow, random_point(rng))
        np.testing.assert_allclose(ev.u, [0.3, -1.2, 2.0], rtol=0, atol=0)
        assert np.all(ev.grad_u == 0.0)


def test_kolmogorov_flow_profile(rng):
    flow = make_kolmogorov_flow(0.8)
    for _ in range(5):
        x = random_point(rng)
        ev = eval_flow(flow, x)
        np.testing.assert_allclose(ev.u, [0.8 * np.sin(x[1]), 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(ev.grad_u[0, 1], 0.8 * np.cos(x[1]), atol=1e-15)


def test_random_divfree_flows_validate(rng):
    for _ in range(10):
        flow = random_divfree_flow(rng)
        flow.require_valid()


def test_broken_hermitian_pairing_rejected(rng):
    flow = random_divfree_flow(rng)
    c = flow.c.copy()
    c[0] *= 1.5  # conjugate partner no longer matches
    bad = FourierFlow(name="broken", k=flow.k.copy(), c=c)
    with pytest.raises(FlowValidationError):
        bad.require_valid()


def test_compressible_mode_rejected():
    k = np.array([[1, 0, 0], [-1, 0, 0]])
    c = np.array([[1.0 + 0j, 0.0, 0.0], [1.0 - 0j, 0.0, 0.0]])  # k.c != 0
    with pytest.raises(FlowValidationError):
        FourierFlow(name="compressible", k=k, c=c).require_valid()


def test_missing_conjugate_rejected():
    k = np.array([[0, 1, 0]])
    c = np.array([[0.5j, 0.0, 0.0]])
    with pytest.raises(FlowValidationError):
        FourierFlow(name="one-sided", k=k, c=c).require_valid()


def test_eval_rejects_invalid_flow():
    k = np.array([[0, 1, 0]])
    c = np.array([[0.5j, 0.0, 0.0]])
    with pytest.raises(FlowValidationError):
        eval_flow(FourierFlow(name="one-sided", k=k, c=c), (0.0, 0.0, 0.0))


def _write_flow_file(path, name, modes):
    path.write_text(json.dumps({"name": name, "modes": modes}))
    return path


def test_load_flow_file_completes_conjugates(tmp_path, rng):
    half = [
        {"k": [1, 0, 0], "re": [0.0, 0.0, 0.5], "im": [0.0, -0.5, 0.0]},
        {"k": [0, 1, 0], "re": [0.5, 0.0, 0.0], "im": [0.0, 0.0, -0.5]},
        {"k": [0, 0, 1], "re": [0.0, 0.5, 0.0], "im": [-0.5, 0.0, 0.0]},
    ]
    loaded = load_flow_file(_write_flow_file(tmp_path / "abc.json", "abc-file", half))
    reference = make_abc_flow(1.0, 1.0, 1.0)
    assert len(loaded.modes) == 6
    for _ in range(20):
        x = random_point(rng)
        got, want = eval_flow(loaded, x), eval_flow(reference, x)
        np.testing.assert_allclose(got.u, want.u, atol=1e-12)
        np.testing.assert_allclose(got.grad_u, want.grad_u, atol=1e-12)


def test_load_flow_file_reports_conflicting_conjugates(tmp_path):
    modes = [
        {"k": [0, 1, 0], "re": [0.0, 0.0, 0.0], "im": [-0.5, 0.0, 0.0]},
        {"k": [0, -1, 0], "re": [0.0, 0.0, 0.0], "im": [0.4, 0.0, 0.0]},
    ]
    with pytest.raises(FlowValidationError, match=r"0, -?1, 0"):
        load_flow_file(_write_flow_file(tmp_path / "conflict.json", "conflict", modes))


def test_load_flow_file_rejects_duplicates(tmp_path):
    modes = [
        {"k": [0, 1, 0], "re": [0.0, 0.0, 0.0], "im": [-0.5, 0.0, 0.0]},
        {"k": [0, 1, 0], "re": [0.0, 0.0, 0.0], "im": [-0.5, 0.0, 0.0]},
    ]
    with pytest.raises(FlowValidationError):
        load_flow_file(_write_flow_file(tmp_path / "dup.json", "dup", modes))


def test_load_flow_file_rejects_imaginary_mean_mode(tmp_path):
    modes = [{"k": [0, 0, 0], "re": [1.0, 0.0, 0.0], "im": [0.5, 0.0, 0.0]}]
    with pytest.raises(FlowValidationError):
        load_flow_file(_write_flow_file(tmp_path / "mean.json", "mean", modes))


def test_check_steady_euler_flags_advective_residual():
    # u = (2 cos 2y, 2 cos x, 0): curl((u.grad)u) has magnitude 12 at the origin.
    k = np.array([[1, 0, 0], [-1, 0, 0], [0, 2, 0], [0, -2, 0]])
    c = np.array([
        [0.0, 1.0 + 0j, 0.0], [0.0, 1.0 - 0j, 0.0],
        [1.0 + 0j, 0.0, 0.0], [1.0 - 0j, 0.0, 0.0],
    ])
    flow = FourierFlow(name="advective", k=k, c=c)
    report = check_steady_euler(flow)
    assert not report.passed
    assert report.max_curl_residual == pytest.approx(12.0, rel=1e-12)
    assert report.worst_point.shape == (3,)
    # the reported point attains the advertised residual
    assert report.max_div_residual <= 1e-13


def test_check_steady_euler_grid_override():
    flow = make_kolmogorov_flow(1.0)
    report = check_steady_euler(flow, grid_per_axis=5)
    assert report.passed
    assert report.grid_per_axis == 5


def test_check_steady_euler_rejects_coarse_grid():
    flow = make_abc_flow(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        check_steady_euler(flow, grid_per_axis=2)


def test_reduce_point_wraps_into_fundamental_cell():
    x = reduce_point((TWO_PI + 0.1, -0.1, 7.0 * np.pi))
    assert np.all(x >= 0.0) and np.all(x < TWO_PI)
    np.testing.assert_allclose(x, [0.1, TWO_PI - 0.1, np.pi], atol=1e-12)


def test_zero_shear_flow_is_valid():
    flow = make_shear_flow((0.0, 0.0, 0.0))
    flow.require_valid()
    assert check_steady_euler(flow).passed
