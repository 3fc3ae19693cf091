"""Free-space kernels in the plane and the Bessel machinery behind them.

Three kernels are provided, all vectorised over stacked points of shape
``(..., 2)``:

* the logarithmic Laplace kernel ``g0(x, y) = ln(1/|x - y|) / (2 pi)``,
* the outgoing Helmholtz kernel ``G(x, y, k) = (i/4) H0(k |x - y|)``,
* the absorbing kernel of ``-Laplace + i eps``, which is ``G`` evaluated at
  the wave number ``k_eps = sqrt(eps) exp(3 pi i / 4)``.

Hankel functions of the first kind of order 0 and 1 are evaluated from the
ascending series for ``|z| <= 12`` and from the Hankel asymptotic expansion
beyond.  Inside the crossover radius, arguments with ``Im z >= 2`` go through
a trapezoidal ``K``-integral instead, because the series cancels there.  All
branches are exposed so that their agreement can be checked.
"""
import numpy as np

from .errors import CoincidentPointsError, DomainError

EULER_GAMMA = 0.57721566490153286061

#: ``|z|`` at which evaluation switches from the series to the asymptotic branch.
CROSSOVER_RADIUS = 12.0
SERIES_TERMS = 48
ASYMPTOTIC_TERMS = 20

_TWO_OVER_PI = 2.0 / np.pi


def _complex_argument(z):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise DomainError("Hankel argument must be finite")
    if np.any(z == 0):
        raise DomainError("Hankel functions are singular at z = 0")
    if np.any(z.imag < 0):
        raise DomainError("Hankel argument must satisfy Im(z) >= 0")
    return z


def hankel1_series(z):
    """Return ``(H0(z), H1(z))`` from the ascending series of J and Y.

    Accurate to roughly ``1e-16 * exp(|z| + Im z)`` in absolute terms, so it
    is only used inside the crossover radius.
    """
    z = _complex_argument(z)
    q = -0.25 * z * z
    t0 = np.ones_like(z)  # (-z^2/4)^m / (m!)^2
    t1 = np.ones_like(z)  # (-z^2/4)^m / (m! (m+1)!)
    j0 = np.zeros_like(z)
    j1 = np.zeros_like(z)
    y0_sum = np.zeros_like(z)
    y1_sum = np.zeros_like(z)
    harmonic = 0.0  # H_m
    for m in range(SERIES_TERMS):
        harmonic_next = harmonic + 1.0 / (m + 1)
        j0 += t0
        j1 += t1
        y0_sum += harmonic * t0
        y1_sum += (harmonic + harmonic_next - 2.0 * EULER_GAMMA) * t1
        t0 = t0 * q / ((m + 1) * (m + 1))
        t1 = t1 * q / ((m + 1) * (m + 2))
        harmonic = harmonic_next
    half = 0.5 * z
    log_half = np.log(half)
    j1 = half * j1
    y0 = _TWO_OVER_PI * ((log_half + EULER_GAMMA) * j0 - y0_sum)
    y1 = -_TWO_OVER_PI / z + _TWO_OVER_PI * log_half * j1 - half * y1_sum / np.pi
    return j0 + 1j * y0, j1 + 1j * y1


def _asymptotic_sum(z, order):
    nu4 = 4.0 * order * order
    coefficient = 1.0
    total = np.ones_like(z)
    power = np.ones_like(z)
    inv = 1j / z
    for k in range(1, ASYMPTOTIC_TERMS):
        coefficient *= (nu4 - (2 * k - 1) ** 2) / (8.0 * k)
        power = power * inv
        total += coefficient * power
    return total


def hankel1_asymptotic(z):
    """Return ``(H0(z), H1(z))`` from the large-argument Hankel expansion."""
    z = _complex_argument(z)
    prefactor = np.sqrt(_TWO_OVER_PI / z)
    h0 = prefactor * np.exp(1j * (z - 0.25 * np.pi)) * _asymptotic_sum(z, 0)
    h1 = prefactor * np.exp(1j * (z - 0.75 * np.pi)) * _asymptotic_sum(z, 1)
    return h0, h1


def hankel1_integral(z):
    """Return ``(H0(z), H1(z))`` through ``K0`` and ``K1`` of ``w = -i z``.

    Uses ``K_n(w) = int_0^inf exp(-w cosh t) cosh(n t) dt`` with the
    trapezoidal rule, which converges geometrically for ``Re w = Im z > 0``.
    Intended for ``Im z`` of order one or larger.
    """
    z = _complex_argument(z)
    if np.any(z.imag <= 0):
        raise DomainError("integral branch needs Im(z) > 0")
    w = -1j * z
    # half-width of the strip where the integrand stays decaying
    strip = np.arcsin(np.min(w.real / np.abs(w)))
    step = min(0.1, 2.0 * np.pi * strip / 45.0)
    t_max = np.arccosh(max(45.0 / np.min(w.real), 1.0)) + step
    t = np.arange(0.0, t_max, step)
    weights = np.full(t.shape, step)
    weights[0] *= 0.5
    flat = w.reshape(-1)
    k0 = np.zeros(flat.shape, dtype=complex)
    k1 = np.zeros(flat.shape, dtype=complex)
    for tj, wj in zip(t, weights):
        e = wj * np.exp(-flat * np.cosh(tj))
        k0 += e
        k1 += e * np.cosh(tj)
    h0 = -2j / np.pi * k0.reshape(w.shape)
    h1 = -2.0 / np.pi * k1.reshape(w.shape)
    return h0, h1


def _in_cancellation_zone(z):
    # J and Y grow like exp(Im z) while H decays like exp(-Im z); the series
    # then loses about 2 Im z / ln 10 digits.
    return (z.imag >= 2.0) & (np.abs(z) > 4.0)


def hankel1_01(z):
    """Return ``(H0(z), H1(z))``, choosing the branch by ``|z|``.

    Series inside the crossover radius, asymptotic expansion outside, and the
    ``K``-integral inside the crossover radius when ``Im z >= 2``.
    """
    z = _complex_argument(z)
    h0 = np.empty_like(z)
    h1 = np.empty_like(z)
    near = np.abs(z) <= CROSSOVER_RADIUS
    zone = near & _in_cancellation_zone(z)
    series = near & ~zone
    if np.any(series):
        h0[series], h1[series] = hankel1_series(z[series])
    if np.any(zone):
        h0[zone], h1[zone] = hankel1_integral(z[zone])
    if not np.all(near):
        far = ~near
        h0[far], h1[far] = hankel1_asymptotic(z[far])
    return h0, h1


def hankel1_0(z):
    """Hankel function of the first kind, order zero."""
    return hankel1_01(z)[0]


def hankel1_1(z):
    """Hankel function of the first kind, order one."""
    return hankel1_01(z)[1]


def bessel_jy(x):
    """Return ``(J0, J1, Y0, Y1)`` for real positive ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("bessel_jy expects x > 0")
    h0, h1 = hankel1_01(x)
    return h0.real, h1.real, h0.imag, h1.imag


# ---------------------------------------------------------------------------
# wave numbers
# ---------------------------------------------------------------------------

def wavenumber_from_square(k_squared):
    """Root of ``k^2`` on the branch ``Im k >= 0`` (``Re k > 0`` if real)."""
    k = np.sqrt(complex(k_squared))
    if k.imag < 0 or (k.imag == 0 and k.real < 0):
        k = -k
    return k


def check_wavenumber(k):
    k = complex(k)
    if k == 0:
        raise DomainError("wave number must be nonzero")
    if k.imag < 0:
        raise DomainError("wave number must satisfy Im(k) >= 0")
    return k


def regularized_wavenumber(eps):
    """``k_eps`` with ``k_eps^2 = -i eps`` and ``Im k_eps > 0``."""
    eps = float(eps)
    if not eps > 0:
        raise DomainError("eps must be positive")
    return np.sqrt(eps) * np.exp(0.75j * np.pi)


def alpha(eps):
    """Additive constant ``alpha(eps)`` with ``g_eps - alpha(eps) -> g0``.

    Equals ``i/4 - (ln(k_eps/2) + gamma) / (2 pi)``; its real part grows like
    ``ln(1/eps) / (4 pi)``.
    """
    k = regularized_wavenumber(eps)
    return 0.25j - (np.log(0.5 * k) + EULER_GAMMA) / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _displacement(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if d.shape[-1] != 2:
        raise DomainError("points must have a trailing dimension of size 2")
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise CoincidentPointsError("kernel evaluated at coincident points")
    return d, r


def _unit_normal(normal):
    normal = np.asarray(normal, dtype=float)
    if np.any(np.abs(np.hypot(normal[..., 0], normal[..., 1]) - 1.0) > 1e-12):
        raise DomainError("normal must have unit length")
    return normal


def log_green(x, y):
    """Laplace kernel ``ln(1/|x - y|) / (2 pi)``; ``-Laplace g0 = delta``."""
    _, r = _displacement(x, y)
    return -np.log(r) / (2.0 * np.pi)


def log_green_normal_deriv(x, s, normal):
    """Derivative of ``log_green(x, .)`` at ``s`` along ``normal``."""
    d, r = _displacement(x, s)
    normal = _unit_normal(normal)
    dn = d[..., 0] * normal[..., 0] + d[..., 1] * normal[..., 1]
    return dn / (2.0 * np.pi * r * r)


def helmholtz_green(x, y, k):
    """Outgoing kernel ``(i/4) H0(k |x - y|)`` of ``-(Laplace + k^2)``."""
    k = check_wavenumber(k)
    _, r = _displacement(x, y)
    return 0.25j * hankel1_0(k * r)


def helmholtz_green_normal_deriv(x, s, normal, k):
    """Derivative of ``helmholtz_green(x, ., k)`` at ``s`` along ``normal``."""
    k = check_wavenumber(k)
    d, r = _displacement(x, s)
    normal = _unit_normal(normal)
    dn = d[..., 0] * normal[..., 0] + d[..., 1] * normal[..., 1]
    return 0.25j * k * hankel1_1(k * r) * dn / r


def regularized_green(x, y, eps):
    """Square-integrable kernel of ``-Laplace + i eps``."""
    return helmholtz_green(x, y, regularized_wavenumber(eps))


def layer_kernels(d, normal, k=0.0):
    """Kernel data needed by single- and double-layer evaluation.

    Parameters
    ----------
    d : array (..., 2)
        Displacements ``x - s`` from boundary points ``s`` to targets ``x``.
    normal : array (..., 2)
        Unit normals at ``s``.
    k : complex
        Wave number; ``0`` selects the logarithmic kernel.

    Returns
    -------
    g, dg_dn, grad_g, grad_dg_dn
        ``G(x, s)``, ``dG/dN_s``, and their gradients with respect to ``x``
        (the gradients carry a trailing axis of size 2).
    """
    d = np.asarray(d, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise CoincidentPointsError("kernel evaluated at coincident points")
    normal = np.asarray(normal, dtype=float)
    dn = d[..., 0] * normal[..., 0] + d[..., 1] * normal[..., 1]
    unit = d / r[..., None]
    k = complex(k)
    if k == 0:
        g = -np.log(r) / (2.0 * np.pi) + 0j
        dg_dn = dn / (2.0 * np.pi * r * r) + 0j
        grad_g = -unit / (2.0 * np.pi * r[..., None]) + 0j
        grad_dg_dn = (normal / (r * r)[..., None]
                      - 2.0 * (dn / r ** 3)[..., None] * unit) / (2.0 * np.pi) + 0j
        return g, dg_dn, grad_g, grad_dg_dn
    k = check_wavenumber(k)
    h0, h1 = hankel1_01(k * r)
    c = 0.25j * k
    g = 0.25j * h0
    dg_dn = c * h1 * dn / r
    grad_g = -(c * h1)[..., None] * unit
    radial = (k * h0 - 2.0 * h1 / r) / r  # d/dr [H1(k r) / r]
    grad_dg_dn = c * ((radial * dn)[..., None] * unit + (h1 / r)[..., None] * normal)
    return g, dg_dn, grad_g, grad_dg_dn
