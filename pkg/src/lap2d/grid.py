"""Uniform square grids and complex fields sampled on them.

Binary layout of a serialized :class:`GridField`: one ASCII header line
``"<L> <n>\\n"`` followed by ``n*n`` little-endian ``(re, im)`` float64 pairs in
row-major order, row index ``i`` running along ``x1``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainError


@dataclass(frozen=True)
class Grid:
    """Nodes ``-L + h*i``, ``i = 0..n-1``, on ``[-L, L]^2`` with ``n`` odd."""

    half_width: float
    n: int

    def __post_init__(self):
        if self.n < 65 or self.n % 2 == 0:
            raise DomainError(f"n must be odd and >= 65, got {self.n}")
        if not self.half_width > 0:
            raise DomainError("half_width must be positive")

    @property
    def h(self):
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def coords(self):
        return -self.half_width + self.h * np.arange(self.n)

    def mesh(self):
        t = self.coords
        return np.meshgrid(t, t, indexing="ij")

    def radius(self):
        x1, x2 = self.mesh()
        return np.hypot(x1, x2)

    def check_fits(self, perturbation_radius):
        if self.half_width < 4.0 * perturbation_radius:
            raise DomainError(
                f"grid half-width {self.half_width} is below 4R = {4 * perturbation_radius}")


@dataclass
class GridField:
    grid: Grid
    data: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        n = self.grid.n
        if self.data.shape != (n, n):
            raise DomainError(f"data shape {self.data.shape} does not match grid ({n}, {n})")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("grid field contains non-finite values")

    @classmethod
    def sample(cls, grid, func):
        """Sample a vectorised ``func(x1, x2)`` at every node."""
        x1, x2 = grid.mesh()
        return cls(grid, func(x1, x2))

    def __sub__(self, other):
        if other.grid != self.grid:
            raise DomainError("grid mismatch")
        return GridField(self.grid, self.data - other.data)

    def interpolator(self):
        """Bicubic spline interpolant ``(x1, x2) -> complex`` (cached)."""
        cached = self.meta.get("_interpolator")
        if cached is not None:
            return cached
        t = self.grid.coords
        re = RectBivariateSpline(t, t, self.data.real, kx=3, ky=3, s=0)
        im = RectBivariateSpline(t, t, self.data.imag, kx=3, ky=3, s=0)

        def evaluate(x1, x2):
            x1 = np.asarray(x1, dtype=float)
            x2 = np.asarray(x2, dtype=float)
            out = re(x1.ravel(), x2.ravel(), grid=False) \
                + 1j * im(x1.ravel(), x2.ravel(), grid=False)
            return out.reshape(np.broadcast(x1, x2).shape)

        self.meta["_interpolator"] = evaluate
        return evaluate

    # -- serialization -----------------------------------------------------

    def to_bytes(self):
        header = f"{self.grid.half_width!r} {self.grid.n}\n".encode("ascii")
        pairs = np.empty((self.grid.n, self.grid.n, 2), dtype="<f8")
        pairs[..., 0] = self.data.real
        pairs[..., 1] = self.data.imag
        return header + pairs.tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob):
        newline = blob.index(b"\n")
        half_width, n = blob[:newline].decode("ascii").split()
        grid = Grid(float(half_width), int(n))
        pairs = np.frombuffer(blob[newline + 1:], dtype="<f8")
        if pairs.size != 2 * grid.n * grid.n:
            raise DomainError("payload size does not match the header")
        pairs = pairs.reshape(grid.n, grid.n, 2)
        return cls(grid, pairs[..., 0] + 1j * pairs[..., 1])

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self, path):
        x1, x2 = self.grid.mesh()
        table = np.column_stack([x1.ravel(), x2.ravel(),
                                 self.data.real.ravel(), self.data.imag.ravel()])
        np.savetxt(path, table, delimiter=",", header="x,y,re,im", comments="",
                   fmt="%.17g")
