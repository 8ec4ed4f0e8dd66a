"""Root solvers and closed-form evaluators for zero-current quantities.

The central routine is :func:`solve_a`: the second reduced equation is
strictly decreasing in A on (0, A_max), so a bracketed bisection followed by
a short Newton polish finds the unique root with guaranteed convergence.
Everything else (reversal potential, zero-current flux, the small-charge
linearization, the constant-field comparison value and the reversal
permanent charge) is layered on top of that scalar solve.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, DegenerateSystemError, DomainError, NoReversalChargeError
from .reduced import (
    Transport,
    a_upper_limit,
    b_of_a,
    g1,
    g2,
    partials,
    reduced_state_values,
    transport_from_theta,
)

_BISECT_STEPS = 47       # shrinks the bracket to ~1e-14 of A_max
_NEWTON_POLISH = 5
_BRACKET_MARGIN = 1e-12  # relative inset of the bracket endpoints
_G2_RTOL = 1e-10         # residual bound, relative to the N scale


@dataclass(frozen=True)
class SolveResult:
    """Zero-current solution at fixed permanent charge.

    Vrev is dimensionless (units of kT/e); J is the common flux of both
    species under zero current.
    """

    Q0: float
    theta: float
    A: float
    B: float
    Sa: float
    Sb: float
    Vrev: float
    J: float
    residual_G2: float
    iterations: int


@dataclass(frozen=True)
class ReversalChargeResult:
    """Permanent charge whose reversal potential equals the requested V."""

    Qrev: float
    Vtarget: float
    residual_g1: float
    bracket: tuple
    multiplicity_flag: bool
    degenerate: bool = False


def _check_theta(theta):
    if np.any(np.asarray(theta) <= -1.0) or np.any(np.asarray(theta) >= 1.0):
        raise DomainError(f"theta must lie in (-1, 1), got {theta}")


def solve_a_values(Q0, theta, z1, l, r, alpha, beta):
    """Unique root of G2(., Q0, theta) in (0, A_max); broadcasts over arrays.

    Bracketing cannot fail for valid inputs (G2 > 0 near A = 0 and < 0 near
    A_max); a sign failure therefore raises :class:`BracketFailure`.
    """
    _check_theta(theta)
    a_max = a_upper_limit(l, r, alpha, beta)
    shape = np.broadcast(
        np.asarray(Q0), np.asarray(theta), np.asarray(z1), np.asarray(l),
        np.asarray(r), np.asarray(alpha), np.asarray(beta),
    ).shape
    lo = np.broadcast_to(np.asarray(_BRACKET_MARGIN * np.minimum(np.minimum(l, r), a_max)), shape).copy()
    hi = np.broadcast_to(np.asarray(a_max * (1.0 - _BRACKET_MARGIN)), shape).copy()

    def f(A):
        return g2(reduced_state_values(A, Q0, z1, l, r, alpha, beta), theta)

    f_lo = f(lo)
    f_hi = f(hi)
    if np.any(f_lo <= 0.0) or np.any(f_hi >= 0.0):
        raise BracketFailure(
            "G2 does not change sign across (0, A_max); inputs are invalid",
            f_lo=f_lo, f_hi=f_hi,
        )
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    A = 0.5 * (lo + hi)
    lo_cap = np.broadcast_to(np.asarray(_BRACKET_MARGIN * np.minimum(np.minimum(l, r), a_max)), shape)
    hi_cap = np.broadcast_to(np.asarray(a_max * (1.0 - _BRACKET_MARGIN)), shape)
    for _ in range(_NEWTON_POLISH):
        st = reduced_state_values(A, Q0, z1, l, r, alpha, beta)
        step = g2(st, theta) / partials(st, theta).dG2_dA
        A = np.clip(A - step, lo_cap, hi_cap)
    return A if shape else float(A)


def solve_a(Q0, theta, bath, geom):
    """Root of the second reduced equation for the given bath and geometry."""
    return solve_a_values(Q0, theta, bath.z1, bath.l, bath.r, geom.alpha, geom.beta)


def _flux_from_a(A, l, D1, D2, alpha, H1):
    return -2.0 * D1 * D2 * (A - l) / ((D1 + D2) * alpha * H1)


def solve_zero_current(Q0, transport, bath, geom):
    """Full zero-current record (A, B, Vrev, J, residual) at one charge value."""
    theta = transport.theta
    A = solve_a_values(Q0, theta, bath.z1, bath.l, bath.r, geom.alpha, geom.beta)
    st = reduced_state_values(A, Q0, bath.z1, bath.l, bath.r, geom.alpha, geom.beta)
    resid = abs(float(g2(st, theta)))
    n_scale = (geom.beta - geom.alpha) / geom.alpha * bath.z1 * bath.l
    if not resid <= _G2_RTOL * (1.0 + n_scale):
        raise BracketFailure(f"G2 residual {resid} above tolerance; solver failure")
    vrev = float(g1(st, theta)) / bath.z1
    J = _flux_from_a(float(A), bath.l, transport.D1, transport.D2, geom.alpha, geom.H1)
    return SolveResult(
        Q0=float(Q0), theta=float(theta), A=float(A), B=float(st.B), Sa=float(st.Sa),
        Sb=float(st.Sb), Vrev=vrev, J=J, residual_G2=resid,
        iterations=_BISECT_STEPS + _NEWTON_POLISH,
    )


def reversal_potential(Q0, theta, bath, geom):
    """Potential producing zero current at the given permanent charge."""
    A = solve_a(Q0, theta, bath, geom)
    st = reduced_state_values(A, Q0, bath.z1, bath.l, bath.r, geom.alpha, geom.beta)
    return g1(st, theta) / bath.z1


def reversal_potential_values(Q0, theta, z1, l, r, alpha, beta):
    """Array-friendly reversal potential on raw parameter values."""
    A = solve_a_values(Q0, theta, z1, l, r, alpha, beta)
    st = reduced_state_values(A, Q0, z1, l, r, alpha, beta)
    return g1(st, theta) / z1


def zero_current_flux(Q0, D1, D2, bath, geom):
    """Common species flux under zero current; same sign as l - r."""
    transport = Transport(D1=D1, D2=D2)
    A = solve_a(Q0, transport.theta, bath, geom)
    B = b_of_a(A, bath.l, bath.r, geom.alpha, geom.beta)
    J = _flux_from_a(A, bath.l, D1, D2, geom.alpha, geom.H1)
    J_alt = -2.0 * D1 * D2 * (bath.r - B) / ((D1 + D2) * (1.0 - geom.beta) * geom.H1)
    scale = abs(J) + abs(J_alt)
    if scale > 0.0 and abs(J - J_alt) > 1e-10 * scale:
        raise BracketFailure(f"flux expressions disagree: {J} vs {J_alt}")
    return J


def vrev_small_q0(theta, bath, geom):
    """Intercept and slope of the reversal potential near zero charge.

    Returns (V0, slope) with V0 = (theta/z1) ln(l/r) and the slope of the
    first-order expansion in Q0.
    """
    _check_theta(theta)
    l, r, z1 = bath.l, bath.r, bath.z1
    alpha, beta = geom.alpha, geom.beta
    v0 = theta / z1 * np.log(l / r)
    a0 = (1.0 - alpha) * l + alpha * r
    b0 = (1.0 - beta) * l + beta * r
    slope = (1.0 - theta * theta) / (z1 * z1) * (beta - alpha) * (l - r) / (a0 * b0)
    return v0, slope


def ghk_reversal(theta, bath):
    """Constant-field (Goldman-Hodgkin-Katz) reversal potential.

    Independent of permanent charge and channel geometry; kept for
    comparison against the structure-aware value.
    """
    _check_theta(theta)
    l, r, z1 = bath.l, bath.r, bath.z1
    return np.log(((1.0 - theta) * r + (1.0 + theta) * l) / ((1.0 - theta) * l + (1.0 + theta) * r)) / z1


_QREV_RESIDUAL_TOL = 1e-9
_QREV_MAX_DOUBLINGS = 60
_QREV_SCAN_POINTS = 1024


def reversal_charge(V, theta, bath, geom, residual_tol=_QREV_RESIDUAL_TOL):
    """Permanent charge Q0 whose reversal potential equals V.

    Exists iff (z1 V + ln(l/r)) (-z1 V + ln(l/r)) > 0.  The root is located
    by expanding a symmetric bracket until the residual changes sign, then
    bisecting.  Because monotonicity in Q0 is not guaranteed in every
    regime, a coarse 1024-point log-spaced scan reports whether more than
    one sign change was seen (``multiplicity_flag``).
    """
    _check_theta(theta)
    l, r, z1 = bath.l, bath.r, bath.z1
    alpha, beta = geom.alpha, geom.beta
    log_lr = np.log(l / r)
    if l == r:
        if V == 0.0:
            return ReversalChargeResult(
                Qrev=0.0, Vtarget=0.0, residual_g1=0.0, bracket=(0.0, 0.0),
                multiplicity_flag=False, degenerate=True,
            )
        raise DegenerateSystemError(
            "equal bath concentrations admit no reversal permanent charge for V != 0"
        )
    if not (z1 * V + log_lr) * (-z1 * V + log_lr) > 0.0:
        raise NoReversalChargeError(
            f"no reversal permanent charge exists: |z1 V| = {abs(z1 * V)} "
            f"is not below |ln(l/r)| = {abs(log_lr)}"
        )

    def resid(Q0):
        return reversal_potential_values(Q0, theta, z1, l, r, alpha, beta) * z1 - z1 * V

    # symmetric doubling bracket: the limits of the residual at +/-inf have
    # opposite signs whenever the existence condition holds
    ladder = 2.0 ** np.arange(_QREV_MAX_DOUBLINGS + 1)
    f_neg = np.asarray(resid(-ladder))
    f_pos = np.asarray(resid(ladder))
    flips = np.nonzero(np.sign(f_neg) != np.sign(f_pos))[0]
    if flips.size == 0:
        raise BracketFailure(
            "reversal-charge bracket expansion failed",
            f_lo=float(f_neg[-1]), f_hi=float(f_pos[-1]),
        )
    half = float(ladder[flips[0]])
    lo, hi = -half, half
    f_lo = float(f_neg[flips[0]])

    # interval refinement by batched subdivision (a 32-way bisection step)
    q = 0.0
    residual = abs(float(resid(q)))
    for _ in range(50):
        if residual <= residual_tol and hi - lo <= 1e-12 * (1.0 + abs(lo) + abs(hi)):
            break
        pts = np.linspace(lo, hi, 33)
        fs = np.asarray(resid(pts))
        flip = np.nonzero(np.sign(fs[:-1]) != np.sign(fs[1:]))[0]
        if flip.size == 0:
            break
        k = flip[0]
        lo, hi, f_lo = float(pts[k]), float(pts[k + 1]), float(fs[k])
        best = int(np.argmin(np.abs(fs)))
        q = float(pts[best])
        residual = abs(float(fs[best]))
    if residual > residual_tol:
        raise BracketFailure(f"reversal-charge residual {residual} above {residual_tol}")

    # coarse multiplicity scan over the final bracket span
    scan_max = max(half, 1.0)
    half_n = _QREV_SCAN_POINTS // 2
    grid = np.concatenate(
        (-np.logspace(np.log10(scan_max), -3, half_n), np.logspace(-3, np.log10(scan_max), half_n))
    )
    signs = np.sign(resid(grid))
    changes = int(np.count_nonzero(np.diff(signs)))
    return ReversalChargeResult(
        Qrev=float(q), Vtarget=float(V), residual_g1=residual,
        bracket=(float(lo), float(hi)), multiplicity_flag=changes > 1,
    )


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a parameter sweep; ``error`` is set when the row failed."""

    value: float
    result: object = None
    error: str = None


def _sweep_row(parameter, value, bath, geom, transport, Q0, qrev_tol):
    if parameter == "Q0":
        return solve_zero_current(value, transport, bath, geom)
    if parameter == "theta":
        return solve_zero_current(Q0, transport_from_theta(value, D1=transport.D1), bath, geom)
    if parameter == "V":
        return reversal_charge(value, transport.theta, bath, geom, residual_tol=qrev_tol)
    raise DomainError(f"unknown sweep parameter {parameter!r}")


def sweep(parameter, grid, bath, geom, transport, Q0=None, threads=1, qrev_tol=_QREV_RESIDUAL_TOL):
    """Evaluate one row per grid value; failures are recorded in-row.

    ``parameter`` is one of 'Q0', 'theta', 'V'.  Rows are independent pure
    computations, so they may be evaluated concurrently; output order always
    follows the grid.
    """
    values = [float(v) for v in grid]

    def run(v):
        try:
            return SweepRow(value=v, result=_sweep_row(parameter, v, bath, geom, transport, Q0, qrev_tol))
        except (NoReversalChargeError, DegenerateSystemError, BracketFailure, DomainError) as exc:
            return SweepRow(value=v, error=type(exc).__name__)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, values))
    return [run(v) for v in values]
