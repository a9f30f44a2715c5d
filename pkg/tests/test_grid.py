import numpy as np
import pytest

from pschrod.grid import (
    GridFunction,
    GridSpec,
    annulus_integrate,
    gradient,
    integrate,
    load_grid_function,
    sample,
    save_grid_function,
    zero_boundary,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(n=0, L=1.0, m=5)
    with pytest.raises(ValueError):
        GridSpec(n=4, L=1.0, m=5)
    with pytest.raises(ValueError):
        GridSpec(n=1, L=0.0, m=5)
    with pytest.raises(ValueError):
        GridSpec(n=1, L=1.0, m=2)


def test_spec_node_coords_reproducible():
    spec = GridSpec(n=1, L=1.0, m=5)
    assert spec.h == 0.5
    assert np.array_equal(spec.axis_coords(), [-1.0, -0.5, 0.0, 0.5, 1.0])
    # identical reconstruction is exact
    assert np.array_equal(spec.axis_coords(), GridSpec(1, 1.0, 5).axis_coords())


def test_sample_1d_identity():
    u = sample(GridSpec(1, 1.0, 3), lambda x: x)
    assert np.array_equal(u.values, [-1.0, 0.0, 1.0])


def test_sample_zero_field():
    u = sample(GridSpec(2, 1.5, 5), lambda x, y: 0.0)
    assert np.array_equal(u.values, np.zeros(25))


def test_sample_2d_sum_of_coordinates():
    # nine nodes of [-1,1]^2 with m=3, row-major: x slow, y fast
    u = sample(GridSpec(2, 1.0, 3), lambda x, y: x + y)
    expected = [-2.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 2.0]
    assert np.array_equal(u.values, expected)


def test_sample_rejects_non_finite():
    with pytest.raises(ValueError, match="node"):
        sample(GridSpec(1, 1.0, 5), lambda x: 1.0 / x)


def test_sample_scalar_fallback():
    # a field that cannot take arrays still samples correctly
    def field(x):
        return float(max(x, 0.0))

    u = sample(GridSpec(1, 1.0, 5), field)
    assert np.array_equal(u.values, [0.0, 0.0, 0.0, 0.5, 1.0])


def test_gradient_constant_is_zero():
    u = sample(GridSpec(1, 2.0, 9), lambda x: 7.0 + 0.0 * x)
    assert np.array_equal(gradient(u).components[0], np.zeros(9))


def test_gradient_affine_exact_everywhere():
    u = sample(GridSpec(1, 2.0, 9), lambda x: 3.0 * x)
    assert np.allclose(gradient(u).components[0], 3.0, rtol=0, atol=1e-13)
    v = sample(GridSpec(2, 1.0, 7), lambda x, y: 2.0 * x - 5.0 * y + 1.0)
    g = gradient(v)
    assert np.allclose(g.components[0], 2.0, rtol=0, atol=1e-12)
    assert np.allclose(g.components[1], -5.0, rtol=0, atol=1e-12)


def test_gradient_quadratic_interior():
    u = sample(GridSpec(1, 1.0, 5), lambda x: x**2)
    # central differences at x = -0.5, 0, 0.5 with h = 0.5
    assert np.allclose(gradient(u).components[0][1:4], [-1.0, 0.0, 1.0], atol=1e-14)


def test_integrate_constant_box_volume():
    u = sample(GridSpec(1, 2.0, 5), lambda x: 1.0 + 0.0 * x)
    assert integrate(u) == pytest.approx(4.0, abs=1e-14)
    v = sample(GridSpec(2, 1.0, 9), lambda x, y: 1.0 + 0.0 * x)
    assert integrate(v) == pytest.approx(4.0, abs=1e-13)


def test_integrate_odd_function_vanishes():
    u = sample(GridSpec(1, 3.0, 31), lambda x: x)
    assert abs(integrate(u)) < 1e-14


def test_integrate_quadratic_hand_trapezoid():
    # h * (u0/2 + u1 + u2 + u3 + u4/2) with h = 0.5
    u = sample(GridSpec(1, 1.0, 5), lambda x: x**2)
    hand = 0.5 * (0.5 * 1.0 + 0.25 + 0.0 + 0.25 + 0.5 * 1.0)
    assert integrate(u) == pytest.approx(hand, abs=1e-15)
    assert hand == 0.75


def test_integrate_linearity(rng):
    spec = GridSpec(1, 2.0, 33)
    u = GridFunction(spec, rng.standard_normal(33))
    v = GridFunction(spec, rng.standard_normal(33))
    lhs = integrate(GridFunction(spec, 2.5 * u.values - 1.25 * v.values))
    rhs = 2.5 * integrate(u) - 1.25 * integrate(v)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_integrate_nonnegative(rng):
    spec = GridSpec(2, 1.0, 9)
    u = GridFunction(spec, np.abs(rng.standard_normal(81)))
    assert integrate(u) >= 0.0


def test_annulus_empty_beyond_corner():
    spec = GridSpec(2, 1.0, 5)
    u = GridFunction(spec, np.ones(25))
    assert annulus_integrate(u, np.sqrt(2.0) * 1.0) == 0.0


def test_annulus_origin_complement():
    spec = GridSpec(1, 2.0, 5)
    u = GridFunction(spec, np.abs(np.arange(5.0)) + 1.0)
    origin = int(np.flatnonzero(spec.radii() == 0.0)[0])
    origin_term = float(spec.weights()[origin] * u.values[origin])
    assert annulus_integrate(u, 0.0) + origin_term == pytest.approx(integrate(u), rel=1e-14)


def test_annulus_hand_value():
    # L=2, m=5, R=1: only x = +-2 survive, each with boundary weight h/2 = 0.5
    u = sample(GridSpec(1, 2.0, 5), lambda x: 1.0 + 0.0 * x)
    assert annulus_integrate(u, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_annulus_rejects_negative_radius():
    u = sample(GridSpec(1, 1.0, 5), lambda x: x)
    with pytest.raises(ValueError):
        annulus_integrate(u, -0.5)


def test_zero_boundary():
    spec = GridSpec(2, 1.0, 5)
    u = GridFunction(spec, np.ones(25))
    z = zero_boundary(u)
    assert np.all(z.values[spec.boundary_mask()] == 0.0)
    assert np.all(z.values[~spec.boundary_mask()] == 1.0)


def test_values_are_immutable():
    u = sample(GridSpec(1, 1.0, 5), lambda x: x)
    with pytest.raises(ValueError):
        u.values[0] = 3.0


def test_gridfunction_length_mismatch():
    with pytest.raises(ValueError):
        GridFunction(GridSpec(1, 1.0, 5), np.zeros(4))


def test_serialization_round_trip_bit_exact(tmp_path, rng):
    spec = GridSpec(2, 1.75, 9)
    u = GridFunction(spec, rng.standard_normal(81))
    save_grid_function(u, tmp_path / "field")
    v = load_grid_function(tmp_path / "field")
    assert v.spec == spec
    assert u.values.tobytes() == v.values.tobytes()


def test_serialization_header_contents(tmp_path):
    import json

    u = sample(GridSpec(1, 2.0, 5), lambda x: x)
    jpath, bpath = save_grid_function(u, tmp_path / "u")
    header = json.loads(jpath.read_text())
    assert header == {
        "n": 1, "L": 2.0, "m": 5,
        "order": "row-major", "dtype": "f64-little-endian",
    }
    assert bpath.stat().st_size == 5 * 8


def test_load_rejects_wrong_payload(tmp_path):
    u = sample(GridSpec(1, 2.0, 5), lambda x: x)
    jpath, bpath = save_grid_function(u, tmp_path / "u")
    bpath.write_bytes(bpath.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_grid_function(tmp_path / "u")
