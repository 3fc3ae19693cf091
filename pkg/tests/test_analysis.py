import numpy as np
import pytest

from lap2d import special_functions as sf
from lap2d.analysis import (compute_norms, difference_norm, fit_decay, ladder,
                            power_law_field, ray_directions, source_norms)
from lap2d.errors import DomainError
from lap2d.fd_solver import conv_oracle
from lap2d.grid import Grid, GridField
from lap2d.problem import SpectralShift, monopole_source

GRID = Grid(8.0, 129)


def test_zero_field_norms():
    n = compute_norms(GridField(GRID, np.zeros((129, 129))), 2.0)
    assert (n.sup_weighted, n.sup_weighted_half, n.l2_minus_b) == (0, 0, 0)


def test_weight_cancels_in_sup_norm():
    u = GridField(GRID, 1.0 / (1.0 + GRID.radius()))
    assert compute_norms(u).sup_weighted == pytest.approx(1.0, abs=1e-15)
    assert np.allclose((1 + GRID.radius()) * np.abs(u.data), 1.0, atol=1e-15)


def test_b_must_exceed_one():
    u = GridField(GRID, np.ones((129, 129)))
    with pytest.raises(DomainError):
        compute_norms(u, 1.0)
    with pytest.raises(DomainError):
        source_norms(monopole_source(), 0.5)


def test_l2_minus_b_finite_and_decreasing_in_b():
    r = GRID.radius()
    u = GridField(GRID, np.where((r >= 1) & (r <= 8), -np.log(np.maximum(r, 1e-9)) / (2 * np.pi), 0))
    values = [compute_norms(u, b).l2_minus_b for b in (1.5, 2.0, 3.0, 4.0)]
    assert all(np.isfinite(values))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_l2_minus_b_quadrature():
    # int (1 + |x|^2)^-1 over [-8, 8]^2 with u = 1 (b = 2), checked against a fine rule
    u = GridField(GRID, np.ones((129, 129)))
    t = np.linspace(-8, 8, 4001)
    X, Y = np.meshgrid(t, t, indexing="ij")
    ref = np.trapezoid(np.trapezoid(1 / (1 + X ** 2 + Y ** 2), t), t)
    assert compute_norms(u, 2.0).l2_minus_b ** 2 == pytest.approx(ref, rel=1e-3)


def test_region_restriction():
    u = GridField(GRID, np.ones((129, 129)))
    assert compute_norms(u, 2.0, (0.0, 2.0)).sup_weighted == pytest.approx(3.0, abs=0.07)


def test_triangle_inequality():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = GridField(GRID, rng.normal(size=(129, 129)) + 1j * rng.normal(size=(129, 129)))
        b = GridField(GRID, rng.normal(size=(129, 129)))
        na, nb = compute_norms(a), compute_norms(b)
        nab = compute_norms(GridField(GRID, a.data + b.data))
        for key in ("sup_weighted", "sup_weighted_half", "l2_minus_b"):
            assert getattr(nab, key) <= getattr(na, key) + getattr(nb, key) + 1e-12


def test_source_norms():
    f_norm, f_b = source_norms(monopole_source(), 2.0)
    # unit-mass bump 3/pi (1 - r^2)^2: ||f||^2 = 9/pi^2 * pi/5
    assert f_norm == pytest.approx(np.sqrt(9 / (5 * np.pi)), rel=1e-3)
    assert f_b > f_norm


def test_ray_directions():
    dirs = ray_directions()
    assert len(dirs) == len(set(dirs)) == 16
    angles = sorted(np.arctan2(q, p) % (2 * np.pi) for p, q in dirs)
    assert angles[0] == 0.0


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_fit_exact_power_law(p):
    fit = fit_decay(power_law_field(GRID, p, 3.0), (2.0, 6.0))
    assert fit.exponent == pytest.approx(p, abs=1e-6)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-6)
    assert fit.residual < 1e-10
    assert not fit.logarithmic
    assert fit.rays_used == 16


def test_fit_hankel_modulus():
    grid = Grid(40.0, 641)
    r = np.maximum(grid.radius(), 1e-3)
    u = GridField(grid, np.abs(0.25j * sf.hankel1_0(2.0 * r)))
    fit = fit_decay(u, (10.0, 40.0))
    assert fit.exponent == pytest.approx(0.5, abs=0.02)


def test_fit_flags_logarithm():
    r = np.maximum(GRID.radius(), 1e-3)
    u = GridField(GRID, np.log(1.0 / r))
    fit = fit_decay(u, (2.0, 8.0))
    assert fit.logarithmic


def test_fit_skips_nodal_rays():
    x1, x2 = GRID.mesh()
    r = np.maximum(GRID.radius(), 1e-3)
    u = GridField(GRID, x1 / r ** 2)  # dipole: vanishes on the x2 axis
    fit = fit_decay(u, (2.0, 6.0))
    assert fit.rays_used == 14
    assert fit.exponent == pytest.approx(1.0, abs=1e-6)


def test_fit_errors():
    with pytest.raises(DomainError):
        fit_decay(power_law_field(GRID, 1.0), (2.0, 9.0))
    with pytest.raises(DomainError):
        fit_decay(power_law_field(GRID, 1.0), (1.0, 4.0), perturbation_radius=1.0)
    with pytest.raises(DomainError):
        fit_decay(GridField(GRID, np.zeros((129, 129))), (2.0, 6.0))
    with pytest.raises(DomainError):
        fit_decay(power_law_field(GRID, 1.0), (2.0, 6.0), directions=5)


def test_identical_fields_ladder_passes():
    u = GridField(GRID, np.ones((129, 129)))
    lad = ladder([u, u, u], [0.1, 0.01, 0.001], "sup_weighted")
    assert lad.pairwise_norm_diffs == (0.0, 0.0)
    assert lad.cauchy


def test_ladder_diffs_and_verdict():
    base = np.ones((129, 129))
    fields = [GridField(GRID, base * (1 + 10.0 ** -j)) for j in range(1, 5)]
    lad = ladder(fields, [1.0, 0.5, 0.25, 0.125], "origin", tolerance=1e-3)
    assert np.allclose(lad.pairwise_norm_diffs, [0.09, 0.009, 0.0009])
    assert lad.decreasing and lad.cauchy
    lad = ladder(fields[::-1], [1.0, 0.5, 0.25, 0.125], "origin")
    assert not lad.cauchy


def test_ladder_errors():
    u = GridField(GRID, np.ones((129, 129)))
    with pytest.raises(DomainError):
        ladder([u, u], [0.1, 0.01], "sup_weighted")
    with pytest.raises(DomainError):
        ladder([u, u, u], [0.1, 0.2, 0.01], "sup_weighted")
    with pytest.raises(DomainError):
        ladder([u, u, GridField(Grid(8.0, 65), np.ones((65, 65)))], [3, 2, 1], "origin")
    with pytest.raises(DomainError):
        difference_norm(u, "max")


def test_blowup_law_from_oracle():
    # u_eps(0) for a unit-mass source grows by ln(4)/(4 pi) per factor 4 in eps
    f = monopole_source()
    u = [conv_oracle(f, SpectralShift.zero_energy(e), np.zeros((1, 2)))[0] for e in (4e-5, 1e-5)]
    assert abs(u[1] - u[0]) == pytest.approx(np.log(4) / (4 * np.pi), rel=0.05)
