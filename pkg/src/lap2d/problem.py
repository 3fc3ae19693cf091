"""Coefficient fields, compactly supported sources, and spectral shifts.

Coefficient and source callables are vectorised: they take two coordinate
arrays ``x1, x2`` of a common shape and return arrays of that shape (with a
trailing ``(2, 2)`` for coefficients).
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CoefficientError, ConfigurationError, DomainError
from .special_functions import regularized_wavenumber, wavenumber_from_square

SYMMETRY_TOL = 1e-12
TAIL_TOL = 1e-12
DEFAULT_LATTICE = 201


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric matrix field ``a(x)`` equal to the identity for ``|x| > R``."""

    entries: Callable
    perturbation_radius: float
    lipschitz_hint: float = 0.0
    description: str = ""

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        a = np.asarray(self.entries(x1, x2), dtype=float)
        return np.broadcast_to(a, np.broadcast(x1, x2).shape + (2, 2))


@dataclass(frozen=True)
class SourceTerm:
    """Right-hand side ``f`` vanishing outside the disk of ``support_radius``."""

    values: Callable
    support_radius: float
    description: str = ""

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.asarray(self.values(x1, x2), dtype=complex)
        out = np.broadcast_to(out, np.broadcast(x1, x2).shape).copy()
        out[np.hypot(x1, x2) > self.support_radius] = 0.0
        return out


SHIFT_KINDS = ("zero-energy-regularized", "helmholtz-regularized",
               "helmholtz-limit", "zero-energy-limit")


@dataclass(frozen=True)
class SpectralShift:
    """Which operator is solved: ``L + i eps``, ``L - k^2 - i eps`` or a limit.

    ``zero-energy-limit`` (``eps = k = 0``) only selects the logarithmic
    kernel for representation formulas and convolution.
    """

    kind: str
    eps: float = 0.0
    k: float = 0.0

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise DomainError(f"unknown shift kind {self.kind!r}")
        eps, k = self.eps, self.k
        ok = {
            "zero-energy-regularized": eps > 0 and k == 0,
            "helmholtz-regularized": eps > 0 and k > 0,
            "helmholtz-limit": eps == 0 and k > 0,
            "zero-energy-limit": eps == 0 and k == 0,
        }[self.kind]
        if not ok:
            raise DomainError(f"invalid (eps={eps}, k={k}) for shift {self.kind!r}")

    @classmethod
    def zero_energy(cls, eps):
        if eps == 0:
            return cls("zero-energy-limit")
        return cls("zero-energy-regularized", eps=float(eps))

    @classmethod
    def helmholtz(cls, k, eps=0.0):
        if eps == 0:
            return cls("helmholtz-limit", k=float(k))
        return cls("helmholtz-regularized", eps=float(eps), k=float(k))

    @property
    def sigma(self):
        """Diagonal shift added to ``L``."""
        if self.kind.startswith("zero-energy"):
            return 1j * self.eps
        return -self.k ** 2 - 1j * self.eps

    @property
    def wavenumber(self):
        """Kernel wave number (``Im >= 0``); zero for the logarithmic kernel."""
        if self.kind == "zero-energy-limit":
            return 0j
        if self.kind == "zero-energy-regularized":
            return complex(regularized_wavenumber(self.eps))
        return wavenumber_from_square(self.k ** 2 + 1j * self.eps)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

def default_lattice(radius, n=DEFAULT_LATTICE):
    """Sample points on ``[-R-1, R+1]^2``."""
    t = np.linspace(-radius - 1.0, radius + 1.0, n)
    return np.meshgrid(t, t, indexing="ij")


def symmetric_eigenvalues(a):
    """Eigenvalues (low, high) of stacked symmetric 2x2 matrices."""
    mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    rad = np.hypot(0.5 * (a[..., 0, 0] - a[..., 1, 1]), a[..., 0, 1])
    return mean - rad, mean + rad


def validate_coefficients(a, lattice=None):
    """Check symmetry, ellipticity and the identity tail on a lattice.

    Returns the smallest and largest eigenvalue found, ``(a0_est, a1_est)``.
    """
    x1, x2 = default_lattice(a.perturbation_radius) if lattice is None else lattice
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.size == 0:
        raise DomainError("empty sample lattice")
    m = a(x1, x2)
    if not np.all(np.isfinite(m)):
        raise CoefficientError("coefficient field is not finite")
    asym = np.max(np.abs(m[..., 0, 1] - m[..., 1, 0]))
    if asym > SYMMETRY_TOL:
        raise CoefficientError(f"coefficient asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    low, high = symmetric_eigenvalues(m)
    if np.min(low) <= 0:
        raise CoefficientError(f"ellipticity violated: eigenvalue {np.min(low):.3e}")
    outside = np.hypot(x1, x2) > a.perturbation_radius
    if np.any(outside):
        tail = np.max(np.abs(m[outside] - np.eye(2)))
        if tail > TAIL_TOL:
            raise CoefficientError(
                f"a(x) differs from the identity by {tail:.3e} outside R")
    return float(np.min(low)), float(np.max(high))


def is_identity(a, lattice=None):
    x1, x2 = default_lattice(a.perturbation_radius) if lattice is None else lattice
    return bool(np.max(np.abs(a(x1, x2) - np.eye(2))) <= TAIL_TOL)


def source_mean(f, quadrature_step):
    """Midpoint-rule value of the integral of ``f`` over its support square."""
    if not quadrature_step > 0:
        raise DomainError("quadrature_step must be positive")
    y1, y2, weight = support_cells(f.support_radius, quadrature_step)
    return complex(np.sum(f(y1, y2)) * weight)


def support_cells(radius, step):
    """Cell centres of a midpoint rule on ``[-radius, radius]^2``.

    The number of cells per side is rounded up so the actual step is at most
    ``step``.  Returns ``(y1, y2, cell_area)``.
    """
    cells = max(1, int(np.ceil(2.0 * radius / step - 1e-9)))
    h = 2.0 * radius / cells
    t = -radius + h * (np.arange(cells) + 0.5)
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    return y1, y2, h * h


# ---------------------------------------------------------------------------
# building blocks and the catalog
# ---------------------------------------------------------------------------

def polynomial_bump(x1, x2, center=(0.0, 0.0), radius=1.0, power=2):
    """``(1 - |x - c|^2 / rho^2)^p`` inside the disk, normalised to unit mass."""
    s = ((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2) / radius ** 2
    mass = np.pi * radius ** 2 / (power + 1)
    return np.where(s < 1.0, np.clip(1.0 - s, 0.0, None) ** power, 0.0) / mass


def smooth_cutoff(r, inner, outer):
    """C^1 step: 1 for ``r <= inner``, 0 for ``r >= outer``, cubic in between."""
    t = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def identity_field(radius=1.0):
    def entries(x1, x2):
        return np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2))
    return CoefficientField(entries, radius, 0.0, "a = I")


def scalar_bump_field(radius=1.0, amplitude=2.0):
    """``a = (1 + amplitude * exp(-|x|^2) * chi(|x|)) I`` with a C^1 cutoff."""
    inner = 0.5 * radius

    def entries(x1, x2):
        r = np.hypot(x1, x2)
        s = 1.0 + amplitude * np.exp(-r * r) * smooth_cutoff(r, inner, radius)
        out = np.zeros(np.shape(s) + (2, 2))
        out[..., 0, 0] = s
        out[..., 1, 1] = s
        return out

    lip = amplitude * (np.sqrt(2.0 / np.e) + 1.5 / (radius - inner))
    return CoefficientField(entries, radius, lip,
                            f"a = (1 + {amplitude} exp(-|x|^2) chi) I")


def anisotropic_field(radius=1.0, angle=np.pi / 6, boost=(1.5, 0.5)):
    """Rotation-conjugated diagonal perturbation ``Q diag(1+b1 chi, 1+b2 chi) Q^T``."""
    inner = 0.4 * radius
    c, s = np.cos(angle), np.sin(angle)

    def entries(x1, x2):
        chi = smooth_cutoff(np.hypot(x1, x2), inner, radius)
        d1 = 1.0 + boost[0] * chi
        d2 = 1.0 + boost[1] * chi
        out = np.zeros(np.shape(chi) + (2, 2))
        out[..., 0, 0] = c * c * d1 + s * s * d2
        out[..., 1, 1] = s * s * d1 + c * c * d2
        out[..., 0, 1] = out[..., 1, 0] = c * s * (d1 - d2)
        return out

    lip = 1.5 * max(boost) / (radius - inner)
    return CoefficientField(entries, radius, lip,
                            f"Q(theta) diag(1+{boost[0]} chi, 1+{boost[1]} chi) Q^T")


def monopole_source(radius=1.0):
    def values(x1, x2):
        return polynomial_bump(x1, x2, radius=radius)
    return SourceTerm(values, radius, f"unit-mass bump (1-|x|^2/{radius}^2)^2")


def dipole_source(offset=0.25, lobe_radius=0.5):
    """Difference of two unit-mass bumps at ``(+-offset, 0)``; moment ``2 offset``."""
    def values(x1, x2):
        return (polynomial_bump(x1, x2, (offset, 0.0), lobe_radius)
                - polynomial_bump(x1, x2, (-offset, 0.0), lobe_radius))
    return SourceTerm(values, offset + lobe_radius,
                      f"bump({offset},0) - bump(-{offset},0), lobe radius {lobe_radius}")


@dataclass(frozen=True)
class Problem:
    name: str
    coefficients: CoefficientField
    source: SourceTerm
    mean: float
    notes: str = field(default="")

    @property
    def perturbation_radius(self):
        return self.coefficients.perturbation_radius

    @property
    def compatible(self):
        """Whether the source has zero mean."""
        return self.mean == 0


def builtin_problems():
    """Named (coefficient, source) pairs used by the CLI; all have ``R = 1``."""
    dipole = dipole_source()
    problems = [
        Problem("identity-dipole", identity_field(), dipole, 0.0,
                "a = I; zero-mean dipole with moment (0.5, 0) supported in |x| <= 0.75"),
        Problem("identity-monopole", identity_field(), monopole_source(), 1.0,
                "a = I; unit-mass bump supported in |x| <= 1"),
        Problem("bump-dipole", scalar_bump_field(), dipole, 0.0,
                "scalar coefficient 1 + 2 exp(-|x|^2) chi; same dipole"),
        Problem("anisotropic-dipole", anisotropic_field(), dipole, 0.0,
                "rotated anisotropic coefficient inside |x| < 1; same dipole"),
    ]
    return {p.name: p for p in problems}


def get_problem(name):
    catalog = builtin_problems()
    try:
        return catalog[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {', '.join(catalog)}") from None
