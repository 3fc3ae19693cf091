import numpy as np
import pytest

from lap2d import special_functions as sf
from lap2d.errors import DomainError, PointInsideError
from lap2d.exterior import (BoundaryTrace, circle_angles, exterior_eval, exterior_gradient,
                            flux, flux_conservation, radiation_residual, read_trace_csv,
                            trace_on_circle, write_trace_csv)
from lap2d.grid import Grid, GridField
from lap2d.problem import SpectralShift

GRID = Grid(4.0, 257)
Y0 = np.array([0.21, -0.13])


def log_field(grid=GRID, y=Y0):
    x1, x2 = grid.mesh()
    r = np.hypot(x1 - y[0], x2 - y[1])
    return GridField(grid, -np.log(np.maximum(r, 1e-3)) / (2 * np.pi))


def helmholtz_field(k, grid=GRID, y=Y0, conj=False):
    x1, x2 = grid.mesh()
    r = np.maximum(np.hypot(x1 - y[0], x2 - y[1]), 1e-3)
    g = 0.25j * sf.hankel1_0(k * r)
    return GridField(grid, np.conj(g) if conj else g)


def exact_trace(radius, m, value, normal_deriv):
    th = circle_angles(m)
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    return BoundaryTrace(radius, th, value(pts), normal_deriv(pts))


def test_trace_of_log_kernel():
    t = trace_on_circle(log_field(), 1.5, 128)
    assert np.max(np.abs(t.values - sf.log_green(t.points, Y0))) < 1e-5
    ref = sf.log_green_normal_deriv(Y0, t.points, t.normals)  # symmetric kernel
    assert np.max(np.abs(t.normal_derivs - ref)) < 1e-3


def test_trace_of_constant_and_quadratic():
    t = trace_on_circle(GridField(GRID, np.full((257, 257), 2.5)), 1.0, 64)
    assert np.allclose(t.values, 2.5) and np.max(np.abs(t.normal_derivs)) < 1e-12
    q = GridField.sample(GRID, lambda x, y: x * x + y * y)
    t = trace_on_circle(q, 1.3, 64)
    assert np.max(np.abs(t.normal_derivs - 2.6)) < 1e-9


def test_trace_radius_must_fit():
    with pytest.raises(DomainError):
        trace_on_circle(log_field(), 3.99, 64)


def test_trace_sample_count():
    with pytest.raises(DomainError):
        trace_on_circle(log_field(), 1.0, 62)
    with pytest.raises(DomainError):
        trace_on_circle(log_field(), 1.0, 65)


def test_flux_of_log_kernel_is_minus_one():
    for r in (0.8, 1.5, 2.5):
        assert flux(trace_on_circle(log_field(), r, 256)) == pytest.approx(-1.0, abs=1e-4)
    exact = exact_trace(1.0, 128, lambda p: sf.log_green(p, Y0),
                        lambda p: sf.log_green_normal_deriv(Y0, p, p / 1.0))
    assert flux(exact) == pytest.approx(-1.0, abs=1e-6)


def test_flux_of_constant_is_exactly_zero():
    t = BoundaryTrace(1.0, circle_angles(64), np.full(64, 3.0 + 0j), np.zeros(64, complex))
    assert flux(t) == 0
    # through the spline the derivative picks up round-off only
    t = trace_on_circle(GridField(GRID, np.ones((257, 257))), 1.0, 64)
    assert abs(flux(t)) < 1e-12


def test_harmonic_polynomial_has_zero_flux():
    u = GridField.sample(GRID, lambda x, y: x * x - y * y + 3 * x * y)
    assert np.allclose(flux_conservation(u, [0.5, 1.0, 2.0]), 0, atol=1e-6)


def test_flux_conservation_for_log_kernel():
    values = flux_conservation(log_field(), [0.6, 1.2, 2.4], 128)
    assert np.allclose(values, -1.0, atol=1e-4)


def test_exterior_eval_reproduces_log_kernel():
    t = exact_trace(1.0, 128, lambda p: sf.log_green(p, Y0),
                    lambda p: sf.log_green_normal_deriv(Y0, p, p))
    x = np.array([[2.0, 0.3], [-1.5, -2.5], [0.0, 3.0]])
    assert np.allclose(exterior_eval(t, x), sf.log_green(x, Y0), atol=1e-12)


def test_exterior_formula_annihilates_interior_regular_fields():
    # fields regular inside the circle produce zero outside
    t = exact_trace(1.0, 128, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2,
                    lambda p: 2 * (p[:, 0] ** 2 - p[:, 1] ** 2))
    x = np.array([[2.0, 0.3], [-1.5, -2.5]])
    assert np.max(np.abs(exterior_eval(t, x))) < 1e-12


@pytest.mark.parametrize("k", [1.0, 2.0 + 0.5j])
def test_exterior_eval_reproduces_helmholtz_kernel(k):
    shift = SpectralShift.helmholtz(abs(k)) if np.imag(k) == 0 else None
    def g(p):
        return sf.helmholtz_green(p, Y0, k)
    def gn(p):
        return sf.helmholtz_green_normal_deriv(Y0, p, p, k)
    t = exact_trace(1.0, 128, g, gn)
    x = np.array([[2.0, 0.3], [-1.5, -2.5], [0.0, 3.0]])
    if shift is None:
        class Shift:
            wavenumber = k
        shift = Shift()
    assert np.allclose(exterior_eval(t, x, shift), g(x), rtol=1e-10)


def test_exterior_eval_from_grid_trace_is_second_order():
    errs = []
    for n in (129, 257):
        grid = Grid(4.0, n)
        t = trace_on_circle(helmholtz_field(1.0, grid), 1.2, 128)
        x = np.array([[2.5, 0.4], [-2.0, 2.0]])
        errs.append(np.max(np.abs(exterior_eval(t, x, SpectralShift.helmholtz(1.0))
                                  - sf.helmholtz_green(x, Y0, 1.0))))
    assert errs[1] < errs[0] / 3.5


def test_exterior_gradient_matches_finite_difference():
    t = exact_trace(1.0, 128, lambda p: sf.helmholtz_green(p, Y0, 1.0),
                    lambda p: sf.helmholtz_green_normal_deriv(Y0, p, p, 1.0))
    shift = SpectralShift.helmholtz(1.0)
    x = np.array([[2.0, 0.7]])
    d = 1e-5
    fd = [(exterior_eval(t, x + d * e, shift) - exterior_eval(t, x - d * e, shift)) / (2 * d)
          for e in np.eye(2)]
    assert np.allclose(exterior_gradient(t, x, shift)[0], np.ravel(fd), rtol=1e-7)


def test_zero_trace_gives_zero():
    t = BoundaryTrace(1.0, circle_angles(64), np.zeros(64, complex), np.zeros(64, complex))
    assert np.all(exterior_eval(t, [[3.0, 0.0]], SpectralShift.zero_energy(0.1)) == 0)


def test_point_inside_rejected():
    t = BoundaryTrace(1.0, circle_angles(64), np.zeros(64, complex), np.zeros(64, complex))
    with pytest.raises(PointInsideError):
        exterior_eval(t, [[0.5, 0.5]])
    with pytest.raises(PointInsideError):
        exterior_gradient(t, [[1.0, 0.0]])


def test_quadrature_order_on_doubling_m():
    def g(p):
        return sf.helmholtz_green(p, np.array([0.6, 0.3]), 1.0)
    def gn(p):
        return sf.helmholtz_green_normal_deriv(np.array([0.6, 0.3]), p, p, 1.0)
    x = np.array([[1.4, 0.0]])
    ref = g(x)
    errs = [abs(exterior_eval(exact_trace(1.0, m, g, gn), x, SpectralShift.helmholtz(1.0))
                - ref)[0] for m in (64, 128)]
    assert errs[1] <= errs[0] / 4


def test_radiation_residual_of_outgoing_kernel():
    k = 2.0
    radii = np.linspace(1.0, 3.0, 6)
    res = radiation_residual(helmholtz_field(k, y=np.zeros(2)), k, radii)
    assert np.all(np.diff(res) < 0)
    slope = np.polyfit(np.log(radii), np.log(res), 1)[0]
    assert -slope >= 1.0


def test_radiation_residual_of_incoming_kernel_does_not_decay():
    k = 2.0
    radii = np.linspace(1.0, 3.0, 6)
    res = radiation_residual(helmholtz_field(k, y=np.zeros(2), conj=True), k, radii)
    # |dw/dr - ikw|^2 ~ 4k^2|w|^2 and |w|^2 ~ 1/r, so the circle integral stays O(1)
    assert min(res) > 0.5 * max(res)
    assert -np.polyfit(np.log(radii), np.log(res), 1)[0] < 0.5


def test_radiation_residual_zero_and_domain():
    assert radiation_residual(GridField(GRID, np.zeros((257, 257))), 1.0, [1.0, 2.0]) == [0, 0]
    with pytest.raises(DomainError):
        radiation_residual(log_field(), 0.0, [1.0])


def test_trace_csv_round_trip(tmp_path):
    t = trace_on_circle(helmholtz_field(1.0), 1.1, 64)
    write_trace_csv(t, tmp_path / "t.csv")
    back = read_trace_csv(tmp_path / "t.csv")
    assert back.radius == t.radius and back.m == 64
    assert np.array_equal(back.values, t.values)
    assert np.array_equal(back.normal_derivs, t.normal_derivs)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("# radius=") and lines[1] == "angle,u_re,u_im,uN_re,uN_im"
