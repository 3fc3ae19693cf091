"""Cauchy data on circles and the exterior representation formula.

For a field ``u`` that solves the constant-coefficient equation outside a
circle ``S`` of radius ``rho`` and has the right behaviour at infinity,

    u(x) = -int_S [ G(x, s) du/dN(s) - dG/dN_s(x, s) u(s) ] ds,   |x| > rho,

with ``N`` the outward normal and ``G`` the kernel matching the shift
(logarithmic, absorbing or outgoing Helmholtz).  The same formula applied to
a field that is regular inside ``S`` returns zero, which is what lets the
solver use it as a boundary closure.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PointInsideError
from .special_functions import layer_kernels

DEFAULT_SAMPLES = 128
_CHUNK = 2048


@dataclass(frozen=True)
class BoundaryTrace:
    radius: float
    angles: np.ndarray
    values: np.ndarray
    normal_derivs: np.ndarray

    def __post_init__(self):
        m = len(self.angles)
        if m < 64 or m % 2:
            raise DomainError(f"trace needs an even number >= 64 of samples, got {m}")

    @property
    def m(self):
        return len(self.angles)

    @property
    def normals(self):
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)])

    @property
    def points(self):
        return self.radius * self.normals

    @property
    def arc_weight(self):
        return 2.0 * np.pi * self.radius / self.m


def circle_angles(m):
    return 2.0 * np.pi * np.arange(m) / m


def trace_on_circle(field, radius, m=DEFAULT_SAMPLES, step=None):
    """Values and outward normal derivatives of ``field`` on ``|x| = radius``.

    Values come from the bicubic spline of the field; the normal derivative
    is the one-sided four-point difference ``(-11 u0 + 18 u1 - 9 u2 + 2 u3) / 6d``
    of spline values at ``radius + j d``, ``d = step`` (default ``h / 2``).
    """
    grid = field.grid
    step = 0.5 * grid.h if step is None else float(step)
    if radius <= 0 or radius + 3.0 * step > grid.half_width - grid.h:
        raise DomainError(f"trace radius {radius} does not fit in the grid")
    angles = circle_angles(m)
    c, s = np.cos(angles), np.sin(angles)
    interp = field.interpolator()
    rings = radius + step * np.arange(4)[:, None]
    samples = interp(rings * c, rings * s)
    derivs = (-11.0 * samples[0] + 18.0 * samples[1]
              - 9.0 * samples[2] + 2.0 * samples[3]) / (6.0 * step)
    return BoundaryTrace(float(radius), angles, samples[0], derivs)


def flux(trace):
    """Periodic trapezoidal value of the outward flux ``int_S du/dN ds``."""
    return complex(trace.arc_weight * np.sum(trace.normal_derivs))


def flux_conservation(field, radii, m=DEFAULT_SAMPLES):
    """Outward flux through each circle in ``radii``."""
    return [flux(trace_on_circle(field, r, m)) for r in radii]


def _wavenumber(shift):
    return 0j if shift is None else shift.wavenumber


def _targets(trace, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise DomainError("evaluation points need a trailing dimension of size 2")
    flat = x.reshape(-1, 2)
    if np.any(np.hypot(flat[:, 0], flat[:, 1]) <= trace.radius):
        raise PointInsideError("exterior evaluation requested inside the trace circle")
    return x.shape[:-1], flat


def _layer_sum(trace, x, shift, gradient):
    shape, flat = _targets(trace, x)
    k = _wavenumber(shift)
    s = trace.points
    normals = trace.normals
    u = trace.values
    un = trace.normal_derivs
    out = np.empty((len(flat), 2) if gradient else len(flat), dtype=complex)
    for start in range(0, len(flat), _CHUNK):
        block = flat[start:start + _CHUNK]
        d = block[:, None, :] - s[None, :, :]
        g, dg, grad_g, grad_dg = layer_kernels(d, normals[None, :, :], k)
        if gradient:
            integrand = grad_g * un[None, :, None] - grad_dg * u[None, :, None]
        else:
            integrand = g * un[None, :] - dg * u[None, :]
        out[start:start + _CHUNK] = -trace.arc_weight * integrand.sum(axis=1)
    return out.reshape(shape + ((2,) if gradient else ()))


def exterior_eval(trace, x, shift=None):
    """Exterior field at points ``x`` (shape ``(..., 2)``) from Cauchy data.

    ``shift=None`` or a ``zero-energy-limit`` shift selects the logarithmic
    kernel; otherwise the kernel wave number is ``shift.wavenumber``.
    """
    return _layer_sum(trace, x, shift, gradient=False)


def exterior_gradient(trace, x, shift=None):
    """Gradient of :func:`exterior_eval` with respect to ``x``."""
    return _layer_sum(trace, x, shift, gradient=True)


def radiation_residual(field, k, radii, m=DEFAULT_SAMPLES):
    """``int_{S_r} |du/dr - i k u|^2 ds`` for each radius."""
    if not k > 0:
        raise DomainError("radiation residual needs k > 0")
    out = []
    for r in radii:
        trace = trace_on_circle(field, r, m)
        defect = trace.normal_derivs - 1j * k * trace.values
        out.append(float(trace.arc_weight * np.sum(np.abs(defect) ** 2)))
    return out


def write_trace_csv(trace, path):
    table = np.column_stack([trace.angles, trace.values.real, trace.values.imag,
                             trace.normal_derivs.real, trace.normal_derivs.imag])
    header = f"# radius={trace.radius!r} m={trace.m}\nangle,u_re,u_im,uN_re,uN_im"
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")


def read_trace_csv(path):
    with open(path) as fh:
        first = fh.readline().strip()
    fields = dict(item.split("=") for item in first.lstrip("# ").split())
    table = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    trace = BoundaryTrace(float(fields["radius"]), table[:, 0],
                          table[:, 1] + 1j * table[:, 2], table[:, 3] + 1j * table[:, 4])
    if trace.m != int(fields["m"]):
        raise DomainError("trace CSV row count does not match its header")
    return trace
