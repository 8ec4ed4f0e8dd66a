"""Internal singular-orbit reconstruction and the matching-system residual.

Once the reduced equations are solved, every quantity of the zero-current
singular orbit (junction potentials, junction concentrations, layer-limit
values, the flux and the internal slow-time length y*) follows from closed
forms.  ``matching_residual`` then plugs the reconstruction back into the
original eleven matching equations plus the definitional layer relations
and reports per-equation residuals.  A small maximum residual certifies the
whole reduction end to end, which makes this module the primary internal
correctness oracle of the package.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProfileError, DomainError
from .reduced import g1, g2, reduced_state

# Reconstruction divides by Q0; below this threshold the orbit is not
# uniquely determined and callers must use the zero-charge closed forms.
Q0_DEGENERACY_RTOL = 1e-8


@dataclass(frozen=True)
class InternalProfile:
    """Singular-orbit values at the two junctions.

    Naming: ``c<k>_<j><side>`` is the concentration of species k at junction
    j, where side ``m``/``p`` marks the limit from the left/right and no
    side marks the junction value itself.  ``ystar`` is None when the slow
    internal time length is not defined (equal diffusivities or zero flux).
    """

    phi1: float
    phi2: float
    c1_1: float
    c2_1: float
    c1_2: float
    c2_2: float
    c1_1m: float
    c1_1p: float
    c1_2m: float
    c1_2p: float
    c2_1m: float
    c2_1p: float
    c2_2m: float
    c2_2p: float
    phi_1m: float
    phi_1p: float
    phi_2m: float
    phi_2p: float
    J1: float
    ystar: object


def _stable_s_minus_q0(conc, S, Q0, z1):
    # S - Q0 with S = hypot(Q0, z1*conc); rewrite for Q0 > 0 where the
    # direct difference loses all digits once Q0 >> z1*conc.
    if Q0 > 0.0:
        return (z1 * conc) ** 2 / (S + Q0)
    return S - Q0


def _stable_log_s_minus_q0(conc, S, Q0, z1):
    if Q0 > 0.0:
        return 2.0 * np.log(z1 * conc) - np.log(S + Q0)
    return np.log(S - Q0)


def _stable_s_plus_q0(conc, S, Q0, z1):
    # mirror of _stable_s_minus_q0: S + Q0 cancels for Q0 < 0
    if Q0 < 0.0:
        return (z1 * conc) ** 2 / (S - Q0)
    return S + Q0


def reconstruct(A, Q0, V, bath, geom, transport, check=True):
    """Populate the full internal profile from a solved (A, V) pair.

    With ``check`` enabled (the default) the pair must satisfy the reduced
    system to residual 1e-9; sensitivity studies may disable the check to
    reconstruct from perturbed inputs on purpose.
    """
    z1, l, r = bath.z1, bath.l, bath.r
    alpha, beta, H1 = geom.alpha, geom.beta, geom.H1
    D1, D2 = transport.D1, transport.D2
    theta = transport.theta
    A = float(A)
    Q0 = float(Q0)
    V = float(V)

    st = reduced_state(A, Q0, bath, geom)
    if not (A > 0.0 and st.B > 0.0):
        raise DomainError(f"A={A} gives B={st.B}; both must be positive")
    if abs(Q0) < Q0_DEGENERACY_RTOL * z1 * A:
        raise DegenerateProfileError(
            f"internal profile is not determined at Q0={Q0}; "
            "use the zero-charge closed forms instead"
        )
    if check:
        n_scale = (beta - alpha) / alpha * z1 * l
        res_g2 = abs(float(g2(st, theta)))
        res_g1 = abs(float(g1(st, theta)) - z1 * V)
        if res_g2 > 1e-9 * (1.0 + n_scale) or res_g1 > 1e-9 * (1.0 + abs(z1 * V)):
            raise DomainError(
                f"(A, V) do not solve the reduced system: |G2|={res_g2}, |G1 - z1 V|={res_g1}"
            )

    B, Sa, Sb, N = float(st.B), float(st.Sa), float(st.Sb), float(st.N)
    smq_a = _stable_s_minus_q0(A, Sa, Q0, z1)
    smq_b = _stable_s_minus_q0(B, Sb, Q0, z1)
    ln_smq_a = _stable_log_s_minus_q0(A, Sa, Q0, z1)
    ln_smq_b = _stable_log_s_minus_q0(B, Sb, Q0, z1)
    # exponents (Sa - z1 A)/Q0 and (Sb - z1 B)/Q0 in cancellation-free form
    e_a = Q0 / (Sa + z1 * A)
    e_b = Q0 / (Sb + z1 * B)

    c1_1 = smq_a / z1 * np.exp(e_a)
    c1_2 = smq_b / z1 * np.exp(e_b)
    c2_1 = A * A / c1_1
    c2_2 = B * B / c1_2

    phi1 = (
        V
        + (1.0 + theta) / z1 * np.log(z1 * A)
        - theta / z1 * np.log(z1 * l)
        - (ln_smq_a + e_a) / z1
    )
    phi2 = (
        (1.0 + theta) / z1 * np.log(z1 * B)
        - theta / z1 * np.log(z1 * r)
        - (ln_smq_b + e_b) / z1
    )
    phi_1m = V + theta / z1 * np.log(A / l)
    phi_2p = theta / z1 * np.log(B / r)
    phi_1p = phi1 + e_a / z1
    phi_2m = phi2 + e_b / z1

    J1 = -2.0 * D1 * D2 * (A - l) / ((D1 + D2) * alpha * H1)
    if D1 != D2 and J1 != 0.0:
        ystar = D1 * D2 * N / (z1 * z1 * (D2 - D1) * Q0 * J1)
    else:
        ystar = None

    return InternalProfile(
        phi1=float(phi1), phi2=float(phi2),
        c1_1=float(c1_1), c2_1=float(c2_1), c1_2=float(c1_2), c2_2=float(c2_2),
        c1_1m=A, c1_1p=smq_a / z1, c1_2m=smq_b / z1, c1_2p=B,
        c2_1m=A, c2_1p=_stable_s_plus_q0(A, Sa, Q0, z1) / z1,
        c2_2m=_stable_s_plus_q0(B, Sb, Q0, z1) / z1,
        c2_2p=B,
        phi_1m=float(phi_1m), phi_1p=float(phi_1p),
        phi_2m=float(phi_2m), phi_2p=float(phi_2p),
        J1=float(J1), ystar=None if ystar is None else float(ystar),
    )


@dataclass(frozen=True)
class MatchingReport:
    """Labeled per-equation residuals of the matching system."""

    residuals: dict

    @property
    def max_abs(self):
        return max(abs(v) for v in self.residuals.values())


def matching_residual(profile, Q0, V, bath, geom, transport):
    """Evaluate every matching equation at the given profile.

    The eleven matching equations come first (fast-layer charge relations,
    field matching, the three flux expressions and the two internal-jump
    relations), followed by the definitional layer-limit identities.  Keys
    follow that canonical order.
    """
    p = profile
    z1, l, r = bath.z1, bath.l, bath.r
    alpha, beta, H1 = geom.alpha, geom.beta, geom.H1
    D1, D2 = transport.D1, transport.D2
    Q2 = 2.0 * Q0
    dsum = D1 + D2

    d1m = p.phi1 - p.phi_1m
    d1p = p.phi1 - p.phi_1p
    d2m = p.phi2 - p.phi_2m
    d2p = p.phi2 - p.phi_2p
    jr = p.J1 / (D1 * D2)

    res = {}
    res["fast_x1_neutral_left"] = p.c1_1 * np.exp(z1 * d1m) - p.c2_1 * np.exp(-z1 * d1m)
    res["fast_x2_neutral_right"] = p.c1_2 * np.exp(z1 * d2p) - p.c2_2 * np.exp(-z1 * d2p)
    res["fast_x1_charge_right"] = (
        z1 * p.c1_1 * np.exp(z1 * d1p) - z1 * p.c2_1 * np.exp(-z1 * d1p) + Q2
    )
    res["fast_x2_charge_left"] = (
        z1 * p.c1_2 * np.exp(z1 * d2m) - z1 * p.c2_2 * np.exp(-z1 * d2m) + Q2
    )
    res["fast_x1_field_match"] = 2.0 * p.c1_1m - (
        p.c1_1 * np.exp(z1 * d1p) + p.c2_1 * np.exp(-z1 * d1p) + Q2 * d1p
    )
    res["fast_x2_field_match"] = 2.0 * p.c1_2p - (
        p.c1_2 * np.exp(z1 * d2m) + p.c2_2 * np.exp(-z1 * d2m) + Q2 * d2m
    )
    res["flux_left_segment"] = jr + 2.0 * (p.c1_1m - l) / (dsum * alpha * H1)
    res["flux_right_segment"] = jr + 2.0 * (r - p.c1_2p) / (dsum * (1.0 - beta) * H1)
    res["flux_mid_segment"] = jr + (
        2.0 * (p.c1_2m - p.c1_1p) - (p.phi_2m - p.phi_1p) * Q2
    ) / (dsum * (beta - alpha) * H1)

    jump = p.phi_2m - p.phi_1p
    if p.ystar is not None:
        res["potential_jump_mid"] = jump - (D1 - D2) / (D1 * D2) * z1 * p.J1 * p.ystar
        decay = np.exp(-dsum / (D1 * D2) * z1 * z1 * p.J1 * p.ystar)
        res["concentration_jump_mid"] = p.c1_2m - (
            decay * p.c1_1p + D2 * Q2 / (dsum * z1) * (decay - 1.0)
        )
    else:
        # equal diffusivities force a flat slow potential; zero flux makes
        # the concentration map the identity
        res["potential_jump_mid"] = jump
        if p.J1 == 0.0:
            res["concentration_jump_mid"] = p.c1_2m - p.c1_1p

    geo_1 = np.sqrt(p.c1_1 * p.c2_1)
    geo_2 = np.sqrt(p.c1_2 * p.c2_2)
    res["def_c1_x1_left"] = p.c1_1m - p.c1_1 * np.exp(z1 * d1m)
    res["def_c2_x1_left"] = p.c2_1m - p.c2_1 * np.exp(-z1 * d1m)
    res["def_geomean_x1_left"] = p.c1_1m - geo_1
    res["def_c1_x2_right"] = p.c1_2p - p.c1_2 * np.exp(z1 * d2p)
    res["def_c2_x2_right"] = p.c2_2p - p.c2_2 * np.exp(-z1 * d2p)
    res["def_geomean_x2_right"] = p.c1_2p - geo_2
    res["def_c1_x1_right"] = p.c1_1p - p.c1_1 * np.exp(z1 * d1p)
    res["def_c2_x1_right"] = p.c2_1p - p.c2_1 * np.exp(-z1 * d1p)
    res["def_c1_x2_left"] = p.c1_2m - p.c1_2 * np.exp(z1 * d2m)
    res["def_c2_x2_left"] = p.c2_2m - p.c2_2 * np.exp(-z1 * d2m)
    res["def_phi_x1_left"] = p.phi_1m - (V - (D1 - D2) / (z1 * dsum) * np.log(p.c1_1m / l))
    res["def_phi_x2_right"] = p.phi_2p - (D1 - D2) / (z1 * dsum) * np.log(r / p.c1_2p)

    return MatchingReport(residuals={k: float(v) for k, v in res.items()})
