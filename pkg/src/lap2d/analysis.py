"""Weighted norms, decay-rate fits and convergence ladders.

All integrals and suprema run over the computational square (optionally a
sub-region of it); the whole-plane norms are approximated by stability under
enlarging the square, which the harness reports separately.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import GridField
from .problem import support_cells

#: RMS log-log residual above which a fit is flagged as not a power law
LOG_FLAG_RESIDUAL = 0.02
#: rays used by :func:`fit_decay`; all land exactly on grid nodes
LATTICE_DIRECTIONS = ((1, 0), (2, 1), (1, 1), (1, 2))
NORM_KINDS = ("sup_weighted", "sup_weighted_half", "l2_minus_b",
              "sup_sqrt_radius", "origin")


@dataclass(frozen=True)
class WeightedNorms:
    sup_weighted: float
    sup_weighted_half: float
    l2_minus_b: float
    b: float


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    fit_window: tuple
    residual: float
    rays_used: int = 0
    logarithmic: bool = False
    samples: list = field(default_factory=list, compare=False, repr=False)


@dataclass(frozen=True)
class ConvergenceLadder:
    parameters: tuple
    pairwise_norm_diffs: tuple
    norm_kind: str
    tolerance: float = 1e-3

    @property
    def decreasing(self):
        d = self.pairwise_norm_diffs
        return all(b < a for a, b in zip(d, d[1:])) or all(x == 0 for x in d)

    @property
    def cauchy(self):
        """Diffs strictly decrease and the last one is below tolerance."""
        return bool(self.decreasing and self.pairwise_norm_diffs[-1] < self.tolerance)


def region_mask(grid, region=None):
    """Boolean node mask for ``region = (r_min, r_max)`` (``None``: whole square)."""
    r = grid.radius()
    if region is None:
        return np.ones_like(r, dtype=bool)
    lo, hi = region
    return (r >= lo) & (r <= hi)


def _check_b(b):
    if not b > 1:
        raise DomainError(f"weighted L2 norms need b > 1, got {b}")


def compute_norms(field_, b=2.0, region=None):
    """The three weighted norms of a grid field.

    ``sup_weighted = max (1+|x|)|u|``, ``sup_weighted_half =
    max (1+|x|^(1/2))|u|`` and ``l2_minus_b = (int |u|^2 / (1+|x|^b))^(1/2)``
    by the trapezoidal rule (midpoint-equivalent on interior nodes).
    """
    _check_b(b)
    grid = field_.grid
    mask = region_mask(grid, region)
    r = grid.radius()
    mod = np.abs(field_.data)
    sup1 = float(np.max(((1.0 + r) * mod)[mask], initial=0.0))
    sup_half = float(np.max(((1.0 + np.sqrt(r)) * mod)[mask], initial=0.0))
    w = _trapezoid_weights(grid) * mask
    l2 = float(np.sqrt(np.sum(w * mod ** 2 / (1.0 + r ** b))))
    return WeightedNorms(sup1, sup_half, l2, float(b))


def _trapezoid_weights(grid):
    w1 = np.full(grid.n, grid.h)
    w1[[0, -1]] *= 0.5
    return np.outer(w1, w1)


def source_norms(f, b=2.0, step=None):
    """``(|||f|||, ||f||_b)``: L2 norm on the support and the b-weighted L2 norm."""
    _check_b(b)
    step = f.support_radius / 64.0 if step is None else step
    y1, y2, area = support_cells(f.support_radius, step)
    v = np.abs(f(y1, y2)) ** 2
    r = np.hypot(y1, y2)
    return float(np.sqrt(np.sum(v) * area)), float(np.sqrt(np.sum(v * (1.0 + r ** b)) * area))


def difference_norm(field_, norm_kind, region=None, b=2.0):
    """Scalar norm of one field used by ladders."""
    if norm_kind == "sup_weighted":
        return compute_norms(field_, b, region).sup_weighted
    if norm_kind == "sup_weighted_half":
        return compute_norms(field_, b, region).sup_weighted_half
    if norm_kind == "l2_minus_b":
        return compute_norms(field_, b, region).l2_minus_b
    if norm_kind == "sup_sqrt_radius":
        mask = region_mask(field_.grid, region)
        r = field_.grid.radius()
        return float(np.max((np.sqrt(r) * np.abs(field_.data))[mask], initial=0.0))
    if norm_kind == "origin":
        c = field_.grid.n // 2
        return float(abs(field_.data[c, c]))
    raise DomainError(f"unknown norm kind {norm_kind!r}")


def ladder(fields, params, norm_kind, region=None, b=2.0, tolerance=1e-3):
    """Pairwise differences ``||field[j+1] - field[j]||`` along a parameter ladder."""
    if len(fields) < 3 or len(fields) != len(params):
        raise DomainError("a ladder needs at least three fields, one per parameter")
    params = tuple(float(p) for p in params)
    if any(q >= p for p, q in zip(params, params[1:])) or params[-1] < 0:
        raise DomainError("ladder parameters must decrease strictly toward 0")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise DomainError("grid mismatch along the ladder")
    diffs = tuple(difference_norm(b_ - a_, norm_kind, region, b)
                  for a_, b_ in zip(fields, fields[1:]))
    return ConvergenceLadder(params, diffs, norm_kind, tolerance)


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

def ray_directions():
    """The sixteen lattice directions: the base set rotated by quarter turns."""
    out = []
    for quarter in range(4):
        for p, q in LATTICE_DIRECTIONS:
            for _ in range(quarter):
                p, q = -q, p
            out.append((p, q))
    return out


def fit_decay(field_, window, directions=16, perturbation_radius=None):
    """Fit ``|u| ~ C |x|^(-p)`` along lattice rays inside ``window``.

    Each ray is fitted by least squares in log-log coordinates; rays whose
    amplitude is below 1e-3 of the strongest ray (nodal lines) are skipped.
    ``exponent`` and ``prefactor`` are averages over the remaining rays and
    ``residual`` is the RMS log-log residual over all used samples.
    """
    grid = field_.grid
    lo, hi = (float(w) for w in window)
    if not 0 < lo < hi or hi > grid.half_width:
        raise DomainError(f"fit window {window} is not inside the grid")
    if perturbation_radius is not None and lo < 2.0 * perturbation_radius - 1e-12:
        raise DomainError("fit window must start at or beyond 2R")
    dirs = ray_directions()
    if directions not in (4, 8, 16):
        raise DomainError("directions must be 4, 8 or 16")
    dirs = dirs[::16 // directions]
    c = grid.n // 2
    rays = []
    for p, q in dirs:
        step = np.hypot(p, q) * grid.h
        t = np.arange(int(np.ceil(lo / step - 1e-9)), int(np.floor(hi / step + 1e-9)) + 1)
        i, j = c + p * t, c + q * t
        ok = (i >= 0) & (i < grid.n) & (j >= 0) & (j < grid.n)
        t, i, j = t[ok], i[ok], j[ok]
        if len(t) < 3:
            continue
        rays.append(((p, q), t * step, np.abs(field_.data[i, j])))
    if not rays:
        raise DomainError("fit window contains fewer than three nodes per ray")
    peak = max(np.max(v) for _, _, v in rays)
    if peak == 0:
        raise DomainError("field vanishes on the fit window")
    slopes, logc, res, samples = [], [], [], []
    for d, r, v in rays:
        if np.min(v) < 1e-3 * peak:
            continue
        x, y = np.log(r), np.log(v)
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slopes.append(-coef[1])
        logc.append(coef[0])
        res.append(y - A @ coef)
        samples.extend((d, float(ri), float(vi)) for ri, vi in zip(r, v))
    if not slopes:
        raise DomainError("field vanishes on the fit window")
    resid = float(np.sqrt(np.mean(np.concatenate(res) ** 2)))
    return DecayFit(float(np.mean(slopes)), float(np.exp(np.mean(logc))), (lo, hi), resid,
                    len(slopes), resid > LOG_FLAG_RESIDUAL, samples)


def power_law_field(grid, p, amplitude=1.0):
    """``amplitude |x|^-p`` with the origin value set to ``amplitude``."""
    r = grid.radius()
    with np.errstate(divide="ignore"):
        data = np.where(r > 0, amplitude * r ** (-p), amplitude)
    return GridField(grid, data)
