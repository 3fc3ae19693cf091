"""Finite differences for ``-div(a grad u) + sigma u = f`` on a truncated square.

The scheme is vertex centred and flux conservative.  Fluxes ``a grad u`` are
formed on cell edges with ``a`` sampled at the edge midpoints; the
off-diagonal entry of ``a`` multiplies a centred transverse difference, so
the stencil widens from five to nine points where ``a12 != 0``.

Three closures of the truncation boundary are available:

``dirichlet-zero``
    boundary nodes pinned to zero.
``robin-radiation``
    ghost-node condition ``(u_out - u_in) / 2h - (i k - 1/(2r)) u = 0``.
``representation``
    the same Robin rows with a right-hand side ``g`` chosen so that the
    boundary data agree with the exterior representation formula evaluated
    from the solution's own trace on an inner circle.  ``g`` is updated by
    fixed-point sweeps; at convergence the truncated problem reproduces the
    whole-plane solution up to discretisation error.

Robin-type rows are scaled by 1/2 (faces) and 1/4 (corners), which keeps the
matrix complex symmetric when ``a`` is diagonal.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, OracleMisuseError, SolverError
from .exterior import DEFAULT_SAMPLES, exterior_eval, exterior_gradient, trace_on_circle
from .grid import GridField
from .problem import is_identity, support_cells
from .special_functions import hankel1_0, EULER_GAMMA

log = logging.getLogger(__name__)

CLOSURE_KINDS = ("dirichlet-zero", "robin-radiation", "representation")
#: faces in the order left, right, bottom, top with outward normals
FACES = (("left", (-1.0, 0.0)), ("right", (1.0, 0.0)),
         ("bottom", (0.0, -1.0)), ("top", (0.0, 1.0)))


@dataclass(frozen=True)
class BoundaryClosure:
    kind: str
    k: float = 0.0
    trace_radius: float = None
    samples: int = DEFAULT_SAMPLES
    tol: float = 1e-9
    max_sweeps: int = 20

    def __post_init__(self):
        if self.kind not in CLOSURE_KINDS:
            raise DomainError(f"unknown closure {self.kind!r}")
        if self.kind == "robin-radiation" and not self.k > 0:
            raise DomainError("robin-radiation closure requires k > 0")


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    weights: np.ndarray
    grid: object
    shift: object
    closure: BoundaryClosure
    coefficients: object
    faces: dict = field(default_factory=dict)
    _precond: object = field(default=None, repr=False)

    def preconditioner(self):
        if self._precond is None:
            ilu = spla.spilu(self.matrix.tocsc(), drop_tol=1e-7, fill_factor=40)
            self._precond = ilu.solve
        return self._precond

    def rhs(self, source_values, boundary_data=None):
        """Right-hand side for nodal source values and Robin data per face."""
        b = (self.weights * source_values.ravel()).astype(complex)
        if self.closure.kind == "dirichlet-zero":
            b[self.faces["pinned"]] = 0.0
            return b
        if boundary_data:
            h = self.grid.h
            for name, _ in FACES:
                nodes, _, weights = self.faces[name][:3]
                np.add.at(b, nodes, weights * 2.0 * boundary_data[name] / h)
        return b


def _node_index(n, i, j):
    return np.asarray(i) * n + np.asarray(j)


def robin_beta(points, k):
    """``i k - 1 / (2 |x|)`` at boundary points."""
    r = np.hypot(points[..., 0], points[..., 1])
    return 1j * k - 0.5 / r


def face_nodes(grid, name):
    n = grid.n
    t = np.arange(n)
    i, j = {"left": (np.zeros(n, int), t), "right": (np.full(n, n - 1), t),
            "bottom": (t, np.zeros(n, int)), "top": (t, np.full(n, n - 1))}[name]
    coords = grid.coords
    return i, j, np.column_stack([coords[i], coords[j]])


def assemble(a, shift, grid, closure):
    """Sparse matrix of ``-div(a grad .) + sigma`` with the given closure."""
    grid.check_fits(a.perturbation_radius)
    n, h = grid.n, grid.h
    t = grid.coords
    mid = t[:-1] + 0.5 * h
    ax = a(*np.meshgrid(mid, t, indexing="ij"))  # x-edges (i+1/2, j)
    ay = a(*np.meshgrid(t, mid, indexing="ij"))  # y-edges (i, j+1/2)
    if np.any(ax[..., 0, 0] <= 0) or np.any(ay[..., 1, 1] <= 0):
        raise DomainError("singular stencil: nonpositive diagonal coefficient")
    a11, a12 = ax[..., 0, 0], ax[..., 0, 1]
    a22, a21 = ay[..., 1, 1], ay[..., 1, 0]

    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel().astype(complex))

    inv_h2 = 1.0 / (h * h)
    # normal-flux part; edge (p, q) adds a/h^2 to the two diagonals and
    # -a/h^2 to the two couplings
    I, J = np.meshgrid(np.arange(n - 1), np.arange(n), indexing="ij")
    p, q = _node_index(n, I, J), _node_index(n, I + 1, J)
    w = a11 * inv_h2
    add(p, p, w); add(q, q, w); add(p, q, -w); add(q, p, -w)
    I, J = np.meshgrid(np.arange(n), np.arange(n - 1), indexing="ij")
    p, q = _node_index(n, I, J), _node_index(n, I, J + 1)
    w = a22 * inv_h2
    add(p, p, w); add(q, q, w); add(p, q, -w); add(q, p, -w)

    # transverse part: F_x(i+1/2, j) gains a12 (u[i,j+1] + u[i+1,j+1]
    # - u[i,j-1] - u[i+1,j-1]) / 4h; row i gets -F/h, row i+1 gets +F/h
    c = 0.25 * inv_h2
    I, J = np.nonzero(a12)
    if I.size:
        if np.any((J == 0) | (J == n - 1)):
            raise DomainError("off-diagonal coefficient reaches the grid boundary")
        coef = a12[I, J] * c
        for sign_row, row_i in ((-1.0, I), (1.0, I + 1)):
            r = _node_index(n, row_i, J)
            for col_i in (I, I + 1):
                add(r, _node_index(n, col_i, J + 1), sign_row * coef)
                add(r, _node_index(n, col_i, J - 1), -sign_row * coef)
    I, J = np.nonzero(a21)
    if I.size:
        if np.any((I == 0) | (I == n - 1)):
            raise DomainError("off-diagonal coefficient reaches the grid boundary")
        coef = a21[I, J] * c
        for sign_row, row_j in ((-1.0, J), (1.0, J + 1)):
            r = _node_index(n, I, row_j)
            for col_j in (J, J + 1):
                add(r, _node_index(n, I + 1, col_j), sign_row * coef)
                add(r, _node_index(n, I - 1, col_j), -sign_row * coef)

    N = n * n
    weights = np.ones(N)
    faces = {}
    on_boundary = np.zeros((n, n), bool)
    on_boundary[[0, -1], :] = True
    on_boundary[:, [0, -1]] = True
    if closure.kind == "dirichlet-zero":
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N)).tocsr()
        keep = (~on_boundary).ravel().astype(float)
        D = sp.diags(keep)
        A = D @ A @ D + sp.diags(1.0 - keep)
        A = A + sp.diags(shift.sigma * keep)
        faces["pinned"] = np.flatnonzero(on_boundary.ravel())
    else:
        k = closure.k if closure.kind == "robin-radiation" else shift.wavenumber
        for name, normal in FACES:
            i, j, pts = face_nodes(grid, name)
            node = _node_index(n, i, j)
            inner = _node_index(n, i - int(normal[0]), j - int(normal[1]))
            beta = robin_beta(pts, k)
            # ghost u_G = u_I + 2h (beta u_B + g) substituted into the ghost
            # edge flux (a = I on the boundary)
            add(node, node, inv_h2 - 2.0 * beta / h)
            add(node, inner, -inv_h2)
            faces[name] = (node, beta, None, pts, np.asarray(normal))
        for name, _ in FACES:
            node = faces[name][0]
            weights[node] *= 0.5
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N)).tocsr()
        A = sp.diags(weights) @ A + sp.diags(weights * shift.sigma)
        for name, _ in FACES:
            node, beta, _, pts, normal = faces[name]
            faces[name] = (node, beta, weights[node], pts, normal)
    A = A.tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return LinearSystem(A, weights, grid, shift, closure, a, faces)


# ---------------------------------------------------------------------------
# Krylov solver
# ---------------------------------------------------------------------------

class _Breakdown(Exception):
    pass


def bicgstab(A, b, precond, x0=None, rtol=1e-10, maxiter=1000):
    """Right-preconditioned BiCGStab.

    Returns ``(x, iterations, relative_residual)``.  Raises ``_Breakdown`` on
    a vanishing inner product and :class:`SolverError` when ``maxiter`` is
    exhausted.
    """
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    if res <= rtol:
        return x, 0, res
    r_hat = r.copy()
    rho = alpha = omega = 1.0 + 0j
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for it in range(1, maxiter + 1):
        rho_new = np.vdot(r_hat, r)
        if rho_new == 0 or omega == 0:
            raise _Breakdown(it)
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        p_hat = precond(p)
        v = A @ p_hat
        denom = np.vdot(r_hat, v)
        if denom == 0:
            raise _Breakdown(it)
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= rtol:
            x = x + alpha * p_hat
            return x, it, np.linalg.norm(b - A @ x) / bnorm
        s_hat = precond(s)
        t = A @ s_hat
        tt = np.vdot(t, t)
        if tt == 0:
            raise _Breakdown(it)
        omega = np.vdot(t, s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            true = np.linalg.norm(b - A @ x) / bnorm
            if true <= 10 * rtol:
                return x, it, true
            r = b - A @ x  # drifted; continue from the true residual
    raise SolverError(f"BiCGStab did not converge in {maxiter} iterations",
                      residual=float(res), iterations=maxiter)


def _linear_solve(system, b, x0=None, rtol=1e-10, maxiter=1000):
    precond = system.preconditioner()
    try:
        return bicgstab(system.matrix, b, precond, x0, rtol, maxiter)
    except _Breakdown:
        log.warning("BiCGStab breakdown; restarting once from the current iterate")
    try:
        return bicgstab(system.matrix, b, precond, None, rtol, maxiter)
    except _Breakdown as exc:
        raise SolverError(f"BiCGStab broke down twice (iteration {exc.args[0]})") from None


def default_trace_radius(grid, perturbation_radius):
    return perturbation_radius + max(4.0 * grid.h, 0.1 * perturbation_radius)


def solve(system, f, rtol=1e-10, maxiter=1000):
    """Solve the assembled system for source ``f``; returns a :class:`GridField`.

    The returned field's ``meta`` records iterations, residual and, for the
    representation closure, the number of boundary sweeps and the last
    relative change of the boundary data.
    """
    grid = system.grid
    x1, x2 = grid.mesh()
    fvals = f(x1, x2)
    closure = system.closure
    if closure.kind != "representation":
        u, its, res = _linear_solve(system, system.rhs(fvals), None, rtol, maxiter)
        return GridField(grid, u.reshape(grid.n, grid.n),
                         {"iterations": its, "residual": float(res)})

    radius = closure.trace_radius or default_trace_radius(
        grid, system.coefficients.perturbation_radius)
    if f.support_radius >= radius:
        raise DomainError("source support reaches the closure trace circle")
    data = None
    u = None
    total_its = 0
    change = np.inf
    sweeps = 0
    for sweeps in range(1, closure.max_sweeps + 1):
        u, its, res = _linear_solve(system, system.rhs(fvals, data), u, rtol, maxiter)
        total_its += its
        field_ = GridField(grid, u.reshape(grid.n, grid.n))
        new = representation_data(system, field_, radius)
        norm = np.sqrt(sum(np.sum(np.abs(g) ** 2) for g in new.values()))
        if data is None:
            diff = norm
        else:
            diff = np.sqrt(sum(np.sum(np.abs(new[k] - data[k]) ** 2) for k in new))
        change = diff / norm if norm > 0 else 0.0
        data = new
        if change <= closure.tol:
            break
    u, its, res = _linear_solve(system, system.rhs(fvals, data), u, rtol, maxiter)
    total_its += its
    if change > 1e3 * closure.tol:
        raise SolverError(f"representation closure stalled (relative change {change:.2e})",
                          residual=float(change), iterations=sweeps)
    return GridField(grid, u.reshape(grid.n, grid.n),
                     {"iterations": total_its, "residual": float(res), "sweeps": sweeps,
                      "closure_change": float(change), "trace_radius": float(radius),
                      "boundary_data": data})


def representation_data(system, field_, radius):
    """Robin data ``dN u_rep - beta u_rep`` per face from the field's trace."""
    trace = trace_on_circle(field_, radius, system.closure.samples)
    data = {}
    for name, _ in FACES:
        node, beta, _, pts, normal = system.faces[name]
        value = exterior_eval(trace, pts, system.shift)
        grad = exterior_gradient(trace, pts, system.shift)
        data[name] = grad @ normal - beta * value
    return data


def discrete_flux_balance(system, field_, f):
    """Terms of the discrete divergence identity for a Robin-type system.

    Returns ``(outward_flux, volume_term, source_integral)`` with
    ``-outward_flux + volume_term = source_integral`` up to round-off when
    the field solves the system.  Here ``outward_flux`` is the trapezoidal
    boundary integral of the discrete normal derivative ``beta u + g`` (``g``
    the Robin data stored by :func:`solve`, zero for ``robin-radiation``) and
    ``volume_term`` is ``sigma`` times the trapezoidal integral of ``u``.
    """
    if system.closure.kind == "dirichlet-zero":
        raise DomainError("flux balance is defined for Robin-type closures")
    grid = system.grid
    h = grid.h
    u = field_.data.ravel()
    x1, x2 = grid.mesh()
    fv = f(x1, x2).ravel()
    data = field_.meta.get("boundary_data") or {}
    outward = 0j
    for name, _ in FACES:
        node, beta, weights, _, _ = system.faces[name]
        normal_deriv = beta * u[node] + data.get(name, 0.0)
        # trapezoid weights along the face are twice the row weight
        outward += np.sum(2.0 * weights * h * normal_deriv)
    volume = system.shift.sigma * h * h * np.sum(system.weights * u)
    source = h * h * np.sum(system.weights * fv)
    return complex(outward), complex(volume), complex(source)


# ---------------------------------------------------------------------------
# convolution oracle
# ---------------------------------------------------------------------------

def _log_square_antiderivative(u, v):
    """F with d2F/du dv = ln sqrt(u^2 + v^2)."""
    r2 = u * u + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(r2 > 0, 0.5 * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        t1 = np.where(u != 0, 0.5 * u * u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
        t2 = np.where(v != 0, 0.5 * v * v * np.arctan(u / np.where(v != 0, v, 1.0)), 0.0)
    return u * v * (logr - 1.5) + t1 + t2


def log_kernel_square_integral(x, half_width):
    """``int g0(x, y) dy`` over the square ``[-a, a]^2`` (closed form)."""
    x = np.asarray(x, dtype=float)
    a = half_width
    lo1, hi1 = -a - x[..., 0], a - x[..., 0]
    lo2, hi2 = -a - x[..., 1], a - x[..., 1]
    F = _log_square_antiderivative
    total = F(hi1, hi2) - F(lo1, hi2) - F(hi1, lo2) + F(lo1, lo2)
    return -total / (2.0 * np.pi)


def conv_oracle(f, shift, eval_points, coefficients=None, step=None):
    """Whole-plane solution ``int g(x, y) f(y) dy`` for ``a = I``.

    Midpoint rule over the support square with the logarithmic singularity
    subtracted: ``g f(y) = g (f(y) - f(x)) + f(x) (g - g0) + f(x) g0``, the
    last term integrated in closed form.
    """
    if coefficients is not None and not is_identity(coefficients):
        raise OracleMisuseError("the convolution oracle requires a = I")
    rho = f.support_radius
    step = rho / 32.0 if step is None else step
    y1, y2, area = support_cells(rho, step)
    ys = np.column_stack([y1.ravel(), y2.ravel()])
    fy = f(ys[:, 0], ys[:, 1])
    k = shift.wavenumber
    if k != 0:
        # limit of (g - g0) at r = 0
        diag_limit = 0.25j - (np.log(0.5 * k) + EULER_GAMMA) / (2.0 * np.pi)
    pts = np.asarray(eval_points, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    fx = f(pts[:, 0], pts[:, 1])
    square = log_kernel_square_integral(pts, rho)
    out = np.empty(len(pts), dtype=complex)
    chunk = max(1, 400000 // len(ys))
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk]
        d = x[:, None, :] - ys[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        hit = r == 0
        rs = np.where(hit, 1.0, r)
        g0 = -np.log(rs) / (2.0 * np.pi)
        if k == 0:
            g = g0
            smooth = np.zeros_like(r, dtype=complex)
        else:
            g = 0.25j * hankel1_0(k * rs)
            smooth = np.where(hit, diag_limit, g - g0)
        fxs = fx[start:start + chunk]
        main = np.where(hit, 0.0, g * (fy[None, :] - fxs[:, None]))
        out[start:start + chunk] = area * (main.sum(axis=1)
                                           + fxs * smooth.sum(axis=1)) \
            + fxs * square[start:start + chunk]
    return out.reshape(shape)
