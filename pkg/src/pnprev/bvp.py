"""Finite-thickness boundary-value oracle for the full electrodiffusion system.

Solves the dimensionless steady-state system

    eps^2 (h(x) phi')' / h(x) = -(z1 c1 + z2 c2 + Q(x)),
    (c_k' + z_k c_k phi') = -J_k / (h(x) D_k),      J_k constant,

with phi(0) = V, phi(1) = 0, c_k(0) = l, c_k(1) = r, on a layer-adapted
mesh (geometrically graded toward 0, x1, x2 and 1, aligned with the
permanent-charge discontinuities, charge evaluated per cell).  The
discretization is a second-order finite-volume/box scheme whose unknowns
are the nodal fields plus the two constant fluxes; the nonlinear system is
solved by damped Newton with positivity safeguarding, warm-started from the
singular-orbit reconstruction and falling back to continuation from larger
eps.  The reversal potential at finite eps is then located by bisection on
the total current.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import BracketFailure, ConvergenceError, DomainError
from .reduced import g1, reduced_state_values
from .solvers import solve_a_values

EPSILON_MIN = 1e-4   # below this, layer resolution in binary64 is unreliable
EPSILON_MAX = 1e-1


@dataclass(frozen=True)
class MeshControl:
    """Knobs of the layer-adapted mesh.

    Minimum spacing near layers is ``epsilon * min_spacing_factor``; cells
    grow geometrically by ``growth`` away from each layer until they reach
    the background spacing (subinterval length / ``interior_cells``).
    """

    min_spacing_factor: float = 0.02
    growth: float = 1.06
    interior_cells: int = 64
    max_nodes: int = 60000


@dataclass(frozen=True)
class BvpSolution:
    """Converged discrete solution of the full system at one (eps, V, Q0)."""

    mesh: np.ndarray
    phi: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    u: np.ndarray
    J1: float
    J2: float
    I: float
    epsilon: float
    V: float
    Q0: float
    converged: bool
    defect: float
    iterations: int

    def cell_fluxes(self, grid, D1, D2, z1):
        """Per-cell discrete fluxes of both species (should match J1, J2)."""
        dphi = np.diff(self.phi) / grid.dx
        j1 = -grid.hm * D1 * (np.diff(self.c1) / grid.dx + z1 * _mid(self.c1) * dphi)
        j2 = -grid.hm * D2 * (np.diff(self.c2) / grid.dx - z1 * _mid(self.c2) * dphi)
        return j1, j2


def _mid(v):
    return 0.5 * (v[:-1] + v[1:])


def _graded_offsets(half_len, delta, growth, dmax):
    offs = [0.0]
    step = delta
    while step < dmax and offs[-1] + step < half_len:
        offs.append(offs[-1] + step)
        step *= growth
    return np.asarray(offs)


def build_mesh(epsilon, geom, control=None):
    """Mesh on [0, 1] aligned at the junctions and graded into every layer."""
    control = control or MeshControl()
    nodes = []
    for a, b in ((0.0, geom.x1), (geom.x1, geom.x2), (geom.x2, 1.0)):
        length = b - a
        delta = min(epsilon * control.min_spacing_factor, length / 8.0)
        dmax = length / control.interior_cells
        left = a + _graded_offsets(length / 2.0, delta, control.growth, dmax)
        right = b - _graded_offsets(length / 2.0, delta, control.growth, dmax)
        gap_lo, gap_hi = left[-1], right[-1]
        n_mid = max(1, int(np.ceil((gap_hi - gap_lo) / dmax)))
        middle = np.linspace(gap_lo, gap_hi, n_mid + 1)
        nodes.append(np.concatenate((left, middle, np.sort(right), [b])))
    x = np.unique(np.concatenate(nodes))
    if x.size > control.max_nodes:
        raise ConvergenceError(f"mesh would need {x.size} nodes (cap {control.max_nodes})")
    return x


class _Grid:
    """Static discretization data for one (epsilon, geometry, mesh) triple."""

    def __init__(self, epsilon, geom, control=None):
        self.epsilon = epsilon
        self.geom = geom
        self.x = build_mesh(epsilon, geom, control)
        self.n = self.x.size
        self.dx = np.diff(self.x)
        self.xm = _mid(self.x)
        self.hm = np.asarray(geom.area(self.xm), dtype=float)
        self.charged_cell = (self.xm > geom.x1) & (self.xm < geom.x2)
        self.dc = 0.5 * (self.dx[:-1] + self.dx[1:])
        self._build_pattern()

    def _build_pattern(self):
        n = self.n
        N = n - 1
        interior = np.arange(1, N)
        rows, cols = [], []

        def add(r, c):
            rows.append(r)
            cols.append(c)

        # Poisson interior rows (row index == node index)
        for off in (-1, 0, 1):
            add(interior, interior + off)                 # phi couplings
        for off in (-1, 0, 1):
            add(interior, n + interior + off)             # c1 couplings
        for off in (-1, 0, 1):
            add(interior, 2 * n + interior + off)         # c2 couplings
        add(np.array([0]), np.array([0]))                 # phi(0) BC
        add(np.array([N]), np.array([N]))                 # phi(1) BC

        cells = np.arange(N)
        r1 = n + 1 + cells                                # c1 cell rows
        add(np.array([n]), np.array([n]))                 # c1(0) BC
        add(r1, n + cells)
        add(r1, n + cells + 1)
        add(r1, cells)
        add(r1, cells + 1)
        add(r1, np.full(N, 3 * n))
        add(np.array([n + N + 1]), np.array([n + N]))     # c1(1) BC

        r2 = 2 * n + 2 + cells                            # c2 cell rows
        add(np.array([2 * n + 1]), np.array([2 * n]))     # c2(0) BC
        add(r2, 2 * n + cells)
        add(r2, 2 * n + cells + 1)
        add(r2, cells)
        add(r2, cells + 1)
        add(r2, np.full(N, 3 * n + 1))
        add(np.array([2 * n + N + 2]), np.array([3 * n - 1]))  # c2(1) BC

        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self.size = 3 * n + 2

    def residual(self, y, params):
        n = self.n
        eps2, V, z1, l, r, D1, D2, q_cell = params
        phi, c1, c2 = y[:n], y[n : 2 * n], y[2 * n : 3 * n]
        J1, J2 = y[3 * n], y[3 * n + 1]
        dphi = np.diff(phi) / self.dx
        c1m, c2m = _mid(c1), _mid(c2)
        rho = z1 * c1m - z1 * c2m + q_cell
        flux_phi = eps2 * self.hm * dphi
        load = 0.5 * self.dx * self.hm * rho
        F = np.empty(self.size)
        F[1 : n - 1] = (np.diff(flux_phi) + load[:-1] + load[1:]) / self.dc
        F[0] = phi[0] - V
        F[n - 1] = phi[-1]
        F[n] = c1[0] - l
        F[n + 1 : 2 * n] = J1 + self.hm * D1 * (np.diff(c1) / self.dx + z1 * c1m * dphi)
        F[2 * n] = c1[-1] - r
        F[2 * n + 1] = c2[0] - l
        F[2 * n + 2 : 3 * n + 1] = J2 + self.hm * D2 * (np.diff(c2) / self.dx - z1 * c2m * dphi)
        F[3 * n + 1] = c2[-1] - r
        return F

    def jacobian(self, y, params):
        n = self.n
        N = n - 1
        eps2, V, z1, l, r, D1, D2, q_cell = params
        phi, c1, c2 = y[:n], y[n : 2 * n], y[2 * n : 3 * n]
        dphi = np.diff(phi) / self.dx
        c1m, c2m = _mid(c1), _mid(c2)
        a = eps2 * self.hm / self.dx
        w = 0.25 * self.dx * self.hm

        data = [
            a[:-1] / self.dc, -(a[:-1] + a[1:]) / self.dc, a[1:] / self.dc,
            z1 * w[:-1] / self.dc, z1 * (w[:-1] + w[1:]) / self.dc, z1 * w[1:] / self.dc,
            -z1 * w[:-1] / self.dc, -z1 * (w[:-1] + w[1:]) / self.dc, -z1 * w[1:] / self.dc,
            [1.0], [1.0],
            [1.0],
            self.hm * D1 * (-1.0 / self.dx + 0.5 * z1 * dphi),
            self.hm * D1 * (1.0 / self.dx + 0.5 * z1 * dphi),
            -self.hm * D1 * z1 * c1m / self.dx,
            self.hm * D1 * z1 * c1m / self.dx,
            np.ones(N),
            [1.0],
            [1.0],
            self.hm * D2 * (-1.0 / self.dx - 0.5 * z1 * dphi),
            self.hm * D2 * (1.0 / self.dx - 0.5 * z1 * dphi),
            self.hm * D2 * z1 * c2m / self.dx,
            -self.hm * D2 * z1 * c2m / self.dx,
            np.ones(N),
            [1.0],
        ]
        values = np.concatenate([np.asarray(d, dtype=float) for d in data])
        return sp.csr_matrix((values, (self._rows, self._cols)), shape=(self.size, self.size))


DEFECT_TOL = 1e-8


def _newton(grid, params, y0, tol, max_iter=60):
    n = grid.n
    y = y0.copy()
    F = grid.residual(y, params)
    norm = np.max(np.abs(F))
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return y, norm, it - 1
        J = grid.jacobian(y, params)
        dy = spsolve(J.tocsc(), -F)
        lam = 1.0
        accepted = False
        while lam >= 2.0 ** -30:
            y_try = y + lam * dy
            if np.min(y_try[n : 3 * n]) <= 0.0:
                lam *= 0.5
                continue
            F_try = grid.residual(y_try, params)
            norm_try = np.max(np.abs(F_try))
            if norm_try <= (1.0 - 1e-4 * lam) * norm or norm_try <= tol:
                y, F, norm = y_try, F_try, norm_try
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # progress stalled at rounding level; fine if the defect contract holds
            if norm <= DEFECT_TOL:
                return y, norm, it
            raise ConvergenceError(f"damped step stalled at defect {norm}", defect=norm)
    if norm <= DEFECT_TOL:
        return y, norm, it
    raise ConvergenceError(f"no convergence after {max_iter} iterations, defect {norm}", defect=norm)


def _singular_orbit_guess(grid, V, Q0, bath, geom, transport):
    """Zero-current singular orbit sampled on the mesh, plus an ohmic shift to V."""
    z1, l, r = bath.z1, bath.l, bath.r
    D1, D2 = transport.D1, transport.D2
    theta = transport.theta
    eps = grid.epsilon
    x = grid.x

    A = float(solve_a_values(Q0, theta, z1, l, r, geom.alpha, geom.beta))
    st = reduced_state_values(A, Q0, z1, l, r, geom.alpha, geom.beta)
    B, Sa, Sb = float(st.B), float(st.Sa), float(st.Sb)
    vrev = float(g1(st, theta)) / z1
    J = -2.0 * D1 * D2 * (A - l) / ((D1 + D2) * geom.alpha * geom.H1)
    kj = (D1 + D2) / (2.0 * D1 * D2) * J

    Hx = np.asarray(geom.resistance(x), dtype=float)
    H1 = geom.H1
    Hx1, Hx2 = geom.alpha * H1, geom.beta * H1

    c_in_lo = (Sa - Q0) / z1 if Q0 <= 0 else (z1 * A) ** 2 / (Sa + Q0) / z1
    c_in_hi = (Sb - Q0) / z1 if Q0 <= 0 else (z1 * B) ** 2 / (Sb + Q0) / z1
    phi_1m = vrev + theta / z1 * np.log(A / l)
    phi_1p = phi_1m - np.log(c_in_lo / A) / z1
    phi_2p = theta / z1 * np.log(B / r)
    phi_2m = phi_2p - np.log(c_in_hi / B) / z1

    floor = 1e-3 * min(l, r, c_in_lo, c_in_hi)
    c_left = np.maximum(l - kj * Hx, floor)
    c_right = np.maximum(B - kj * (Hx - Hx2), floor)
    frac = np.clip((Hx - Hx1) / (Hx2 - Hx1), 0.0, 1.0)
    c1_mid = np.maximum(c_in_lo + (c_in_hi - c_in_lo) * frac, floor)

    phi_left = vrev + theta / z1 * np.log(c_left / l)
    phi_right = phi_2p + theta / z1 * np.log(c_right / B)
    phi_mid = phi_1p + (phi_2m - phi_1p) * frac

    s1 = 0.5 * (1.0 + np.tanh((x - geom.x1) / (2.0 * eps)))
    s2 = 0.5 * (1.0 + np.tanh((x - geom.x2) / (2.0 * eps)))
    c1 = c_left + (c1_mid - c_left) * s1 + (c_right - c1_mid) * s2
    c2 = c_left + (c1_mid + 2.0 * Q0 / z1 - c_left) * s1 + (c_right - c1_mid - 2.0 * Q0 / z1) * s2
    phi = phi_left + (phi_mid - phi_left) * s1 + (phi_right - phi_mid) * s2
    phi = phi + (V - vrev) * (1.0 - Hx / H1)

    y0 = np.empty(3 * grid.n + 2)
    y0[: grid.n] = phi
    y0[grid.n : 2 * grid.n] = np.maximum(c1, floor)
    y0[2 * grid.n : 3 * grid.n] = np.maximum(c2, floor)
    y0[3 * grid.n] = J
    y0[3 * grid.n + 1] = J
    return y0


def _interp_solution(grid, sol, V):
    """Resample an existing solution onto ``grid``, shifting phi ohmically to V."""
    y0 = np.empty(3 * grid.n + 2)
    phi = np.interp(grid.x, sol.mesh, sol.phi)
    if V != sol.V:
        Hx = np.asarray(grid.geom.resistance(grid.x), dtype=float)
        phi = phi + (V - sol.V) * (1.0 - Hx / grid.geom.H1)
    y0[: grid.n] = phi
    y0[grid.n : 2 * grid.n] = np.maximum(np.interp(grid.x, sol.mesh, sol.c1), 1e-300)
    y0[2 * grid.n : 3 * grid.n] = np.maximum(np.interp(grid.x, sol.mesh, sol.c2), 1e-300)
    y0[3 * grid.n] = sol.J1
    y0[3 * grid.n + 1] = sol.J2
    return y0


def _solve_on_grid(grid, V, Q0, bath, geom, transport, initial=None):
    eps2 = grid.epsilon ** 2
    z1, l, r = bath.z1, bath.l, bath.r
    q_cell = np.where(grid.charged_cell, 2.0 * Q0, 0.0)
    params = (eps2, V, z1, l, r, transport.D1, transport.D2, q_cell)
    scale = 1.0 + max(l, r) + abs(2.0 * Q0) + abs(V)
    tol = 1e-11 * scale
    if initial is not None:
        y0 = _interp_solution(grid, initial, V)
    else:
        y0 = _singular_orbit_guess(grid, V, Q0, bath, geom, transport)
    y, defect, iters = _newton(grid, params, y0, tol)
    n = grid.n
    phi, c1, c2 = y[:n], y[n : 2 * n], y[2 * n : 3 * n]
    u = np.empty(n)
    u[1:-1] = grid.epsilon * (phi[2:] - phi[:-2]) / (grid.x[2:] - grid.x[:-2])
    u[0] = grid.epsilon * (phi[1] - phi[0]) / grid.dx[0]
    u[-1] = grid.epsilon * (phi[-1] - phi[-2]) / grid.dx[-1]
    J1, J2 = float(y[3 * n]), float(y[3 * n + 1])
    return BvpSolution(
        mesh=grid.x, phi=phi, c1=c1, c2=c2, u=u, J1=J1, J2=J2,
        I=z1 * J1 - z1 * J2, epsilon=grid.epsilon, V=float(V), Q0=float(Q0),
        converged=defect <= DEFECT_TOL, defect=float(defect), iterations=iters,
    )


def solve_bvp(epsilon, V, Q0, bath, geom, transport, mesh_control=None, initial=None):
    """Solve the full system at finite eps; falls back to eps-continuation.

    ``initial`` may be a previous :class:`BvpSolution` used as warm start.
    Raises :class:`ConvergenceError` when Newton fails even along the
    continuation ladder, and :class:`DomainError` for eps outside
    [1e-4, 1e-1].
    """
    if not (EPSILON_MIN <= epsilon <= EPSILON_MAX):
        raise DomainError(f"epsilon must lie in [{EPSILON_MIN}, {EPSILON_MAX}], got {epsilon}")
    grid = _Grid(epsilon, geom, mesh_control)
    try:
        return _solve_on_grid(grid, V, Q0, bath, geom, transport, initial=initial)
    except ConvergenceError:
        pass
    # continuation: walk eps down from a mild value, warm-starting each rung
    rungs = []
    e = epsilon
    while e < 0.05:
        e *= 2.0
        rungs.append(min(e, EPSILON_MAX))
    sol = None
    for e in reversed(rungs):
        sol = _solve_on_grid(_Grid(e, geom, mesh_control), V, Q0, bath, geom, transport, initial=sol)
    return _solve_on_grid(grid, V, Q0, bath, geom, transport, initial=sol)


def current_scale(bath, geom, transport):
    """Characteristic flux magnitude used to normalize current tolerances."""
    D1, D2 = transport.D1, transport.D2
    drive = abs(bath.l - bath.r)
    if drive == 0.0:
        drive = max(bath.l, bath.r)
    return 2.0 * D1 * D2 * drive / ((D1 + D2) * geom.H1)


def find_reversal_bvp(epsilon, Q0, bath, geom, transport, mesh_control=None, max_bisect=200):
    """Reversal potential of the finite-eps system, by bisection on the current.

    The bracket spans the zero-current bounds of the reduced model plus a
    unit margin; failure to bracket reports the currents at both ends.
    """
    z1 = bath.z1
    span = abs(np.log(bath.l / bath.r)) / z1 + 1.0
    tol_I = 1e-8 * current_scale(bath, geom, transport)
    grid = _Grid(epsilon, geom, mesh_control)

    def solve_at(V, warm):
        try:
            return _solve_on_grid(grid, V, Q0, bath, geom, transport, initial=warm)
        except ConvergenceError:
            sol = solve_bvp(epsilon, V, Q0, bath, geom, transport, mesh_control)
            return sol

    lo, hi = -span, span
    sol_lo = solve_at(lo, None)
    sol_hi = solve_at(hi, sol_lo)
    if np.sign(sol_lo.I) == np.sign(sol_hi.I):
        raise BracketFailure(
            f"current does not change sign on [{lo}, {hi}]",
            f_lo=sol_lo.I, f_hi=sol_hi.I,
        )
    warm = sol_lo
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        sol_mid = solve_at(mid, warm)
        warm = sol_mid
        if abs(sol_mid.I) <= tol_I:
            return mid
        if np.sign(sol_mid.I) == np.sign(sol_lo.I):
            lo, sol_lo = mid, sol_mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * span:
            return 0.5 * (lo + hi)
    raise ConvergenceError(f"bisection did not reach |I| <= {tol_I}", defect=abs(sol_mid.I))
