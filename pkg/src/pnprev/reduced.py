"""Algebraic core of the zero-current reduction.

For two ion species with opposite valences, the zero-current steady state
collapses to two scalar equations in the geometric-mean concentration A at
the left junction:

    G1(A, Q0, theta) = z1 * V        and        G2(A, Q0, theta) = 0,

with B tied to A through the geometry, Sa = sqrt(Q0^2 + (z1*A)^2),
Sb = sqrt(Q0^2 + (z1*B)^2) and N = ((beta-alpha)/alpha) z1 (A-l) + Sa - Sb.
This module evaluates G1, G2, their six analytic partial derivatives and the
auxiliary function ln(X + theta*Q0) + theta*Q0/(X + theta*Q0) used in the
theta-derivatives.

All functions broadcast over numpy arrays, so a whole grid of states can be
evaluated in one call.  Differences such as Sa - Sb are always computed in
cancellation-free form (see ``s_difference``); log ratios are rewritten via
log1p so that values remain accurate both near A = B and for very large
|Q0|, where the naive expressions lose every significant digit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BathConditions:
    """Electroneutral bath concentrations l (left), r (right) and cation valence z1.

    The anion valence is -z1 and both species share the bath concentration
    on each side, so a bath is fully described by (l, r, z1).
    """

    l: float
    r: float
    z1: float = 1.0

    def __post_init__(self):
        if not (self.l > 0.0 and self.r > 0.0):
            raise DomainError(f"bath concentrations must be positive, got l={self.l}, r={self.r}")
        if not self.z1 > 0.0:
            raise DomainError(f"cation valence must be positive, got z1={self.z1}")


@dataclass(frozen=True)
class Transport:
    """Constant diffusion coefficients of cation (D1) and anion (D2)."""

    D1: float
    D2: float

    def __post_init__(self):
        if not (self.D1 > 0.0 and self.D2 > 0.0):
            raise DomainError(f"diffusion coefficients must be positive, got {self.D1}, {self.D2}")

    @property
    def theta(self):
        """Diffusion asymmetry (D2 - D1)/(D2 + D1), in (-1, 1)."""
        return (self.D2 - self.D1) / (self.D2 + self.D1)


def transport_from_theta(theta, D1=1.0):
    """Transport with the given asymmetry, anchored at cation diffusivity D1."""
    theta = float(theta)
    if not -1.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (-1, 1), got {theta}")
    return Transport(D1=D1, D2=D1 * (1.0 + theta) / (1.0 - theta))


@dataclass(frozen=True)
class ReducedState:
    """A candidate A together with every derived quantity the equations need.

    Fields may be scalars or broadcast numpy arrays.  B is exact by
    construction: B = ((1-beta)/alpha) (l - A) + r.
    """

    A: object
    B: object
    Sa: object
    Sb: object
    N: object
    Q0: object
    z1: float
    l: float
    r: float
    alpha: float
    beta: float


def b_of_a(A, l, r, alpha, beta):
    """Geometric-mean concentration at the right junction for a given A."""
    return (1.0 - beta) / alpha * (l - A) + r


def a_upper_limit(l, r, alpha, beta):
    """Largest admissible A (where B reaches 0)."""
    return l + alpha * r / (1.0 - beta)


def b_upper_limit(l, r, alpha, beta):
    """Largest admissible B (where A reaches 0)."""
    return (1.0 - beta) * l / alpha + r


def a_crossover(l, r, alpha, beta):
    """The A value at which A = B: ((1-beta) l + alpha r)/(1 - beta + alpha)."""
    return ((1.0 - beta) * l + alpha * r) / (1.0 - beta + alpha)


def s_difference(A, B, Sa, Sb, z1):
    """Sa - Sb without cancellation: z1^2 (A - B)(A + B) / (Sa + Sb)."""
    return z1 * z1 * (A - B) * (A + B) / (Sa + Sb)


def reduced_state(A, Q0, bath, geom):
    """Bundle A with B, Sa, Sb and N for the given charge, bath and geometry."""
    return reduced_state_values(A, Q0, bath.z1, bath.l, bath.r, geom.alpha, geom.beta)


def reduced_state_values(A, Q0, z1, l, r, alpha, beta):
    """Array-friendly version of :func:`reduced_state` on raw parameter values."""
    B = b_of_a(A, l, r, alpha, beta)
    Sa = np.hypot(Q0, z1 * A)
    Sb = np.hypot(Q0, z1 * B)
    N = (beta - alpha) / alpha * z1 * (A - l) + s_difference(A, B, Sa, Sb, z1)
    return ReducedState(A=A, B=B, Sa=Sa, Sb=Sb, N=N, Q0=Q0, z1=z1, l=l, r=r, alpha=alpha, beta=beta)


def _require_positive_concentrations(state):
    if np.any(np.asarray(state.A) <= 0.0) or np.any(np.asarray(state.B) <= 0.0):
        raise DomainError("A and B must be positive (A inside (0, A_max))")


def _log_shifted_ratio(state, theta):
    # ln((Sa + theta Q0)/(Sb + theta Q0)); the shift is always > -Sb
    t = theta * state.Q0
    d = s_difference(state.A, state.B, state.Sa, state.Sb, state.z1)
    return np.log1p(d / (state.Sb + t))


def _log_minus_q0_ratio(state):
    # ln((Sa - Q0)/(Sb - Q0)).  For Q0 > 0 both numerator and denominator
    # collapse to ~Q0^(-1) scale, so rewrite via Sa - Q0 = (z1 A)^2/(Sa + Q0).
    A, B, Sa, Sb, Q0, z1 = state.A, state.B, state.Sa, state.Sb, state.Q0, state.z1
    d = s_difference(A, B, Sa, Sb, z1)
    with np.errstate(invalid="ignore", divide="ignore"):
        pos = 2.0 * np.log(A / B) + np.log1p(-d / (Sa + Q0))
        nonpos = np.log1p(d / (Sb - Q0))
    return np.where(Q0 > 0.0, pos, nonpos)


def g1(state, theta):
    """First reduced equation; equals z1*V at a zero-current solution."""
    _require_positive_concentrations(state)
    lr_plus = _log_shifted_ratio(state, theta)
    lr_minus = _log_minus_q0_ratio(state)
    return (
        theta * (lr_plus + np.log(state.l / state.r))
        - (1.0 + theta) * np.log(state.A / state.B)
        + lr_minus
    )


def g2(state, theta):
    """Second reduced equation; strictly decreasing in A, with a unique root."""
    _require_positive_concentrations(state)
    t = theta * state.Q0
    return t * _log_shifted_ratio(state, theta) - state.N


def aux_g(X, theta, Q0):
    """ln(X + theta*Q0) + theta*Q0/(X + theta*Q0), increasing for X > 0."""
    t = theta * Q0
    return np.log(X + t) + t / (X + t)


@dataclass(frozen=True)
class Partials:
    """The six analytic partial derivatives of (G1, G2) w.r.t. (A, Q0, theta)."""

    dG1_dA: object
    dG1_dQ0: object
    dG1_dtheta: object
    dG2_dA: object
    dG2_dQ0: object
    dG2_dtheta: object


def partials(state, theta):
    """Hand-coded partials of G1 and G2; B is treated as the function B(A)."""
    _require_positive_concentrations(state)
    A, B, Sa, Sb, Q0, z1 = state.A, state.B, state.Sa, state.Sb, state.Q0, state.z1
    t = theta * Q0
    one_m_t2 = 1.0 - theta * theta
    k = (1.0 - state.beta) / state.alpha
    sa_t = Sa + t
    sb_t = Sb + t
    d = s_difference(A, B, Sa, Sb, z1)
    denom = sa_t * sb_t
    lr_plus = np.log1p(d / sb_t)
    # g(Sa) - g(Sb) with both pieces in difference form
    gdiff = lr_plus - t * d / denom

    dG1_dA = one_m_t2 * Q0 * (1.0 / (A * sa_t) + k / (B * sb_t))
    dG1_dQ0 = one_m_t2 * d / denom
    dG1_dtheta = gdiff + np.log(state.l / state.r) - np.log(A / B)
    dG2_dA = -k * z1 * z1 * B / sb_t - z1 * z1 * A / sa_t - (state.beta - state.alpha) / state.alpha * z1
    dG2_dQ0 = theta * lr_plus + one_m_t2 * Q0 * d / denom
    dG2_dtheta = Q0 * gdiff
    return Partials(dG1_dA, dG1_dQ0, dG1_dtheta, dG2_dA, dG2_dQ0, dG2_dtheta)
