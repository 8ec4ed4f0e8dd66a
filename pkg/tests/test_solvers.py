import numpy as np
import pytest

from pnprev import (
    BathConditions,
    BracketFailure,
    ConstantProfile,
    DegenerateSystemError,
    NoReversalChargeError,
    Transport,
    build_geometry,
    ghk_reversal,
    reversal_charge,
    reversal_potential,
    solve_a,
    solve_zero_current,
    sweep,
    transport_from_theta,
    vrev_small_q0,
    zero_current_flux,
)
from pnprev.reduced import a_crossover, a_upper_limit, reduced_state_values
from pnprev.solvers import reversal_potential_values, solve_a_values
from pnprev.reduced import g1 as g1_eval
from pnprev.reduced import g2 as g2_eval

from conftest import random_parameter_sets


def scan_root_oracle(Q0, theta, z1, l, r, alpha, beta, n=4097, refine=200):
    """Brute-force root of the second equation: dense sign scan + bisection.

    Independent of the library solver's bracketing and polish; used to
    validate solve_a and the first-equation value at the root.
    """
    a_max = a_upper_limit(l, r, alpha, beta)
    grid = np.linspace(a_max * 1e-9, a_max * (1.0 - 1e-9), n)
    vals = g2_eval(reduced_state_values(grid, Q0, z1, l, r, alpha, beta), theta)
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    assert idx.size == 1, "oracle expects exactly one sign change"
    lo, hi = grid[idx[0]], grid[idx[0] + 1]
    for _ in range(refine):
        mid = 0.5 * (lo + hi)
        if g2_eval(reduced_state_values(mid, Q0, z1, l, r, alpha, beta), theta) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestSolveA:
    def test_zero_charge_closed_form(self, geom_unit, bath_02_1):
        A = solve_a(0.0, 0.6, bath_02_1, geom_unit)
        assert float(A) == pytest.approx((2.0 / 3.0) * 0.2 + (1.0 / 3.0) * 1.0, abs=1e-13)

    def test_symmetric_baths(self, geom_unit, bath_sym):
        for q0 in (-7.0, 0.0, 3.0):
            assert float(solve_a(q0, 0.2, bath_sym, geom_unit)) == pytest.approx(1.0, abs=1e-12)

    def test_large_charge_limit(self, geom_unit, bath_02_1):
        for q0 in (1e6, -1e6):
            A = float(solve_a(q0, 0.4, bath_02_1, geom_unit))
            assert abs(A - 0.2) <= 1e-3

    def test_against_scan_oracle(self, geom_unit, bath_02_1):
        A = float(solve_a(1.0, 0.0, bath_02_1, geom_unit))
        ref = scan_root_oracle(1.0, 0.0, 1.0, 0.2, 1.0, geom_unit.alpha, geom_unit.beta)
        assert A == pytest.approx(ref, abs=1e-12)
        st = reduced_state_values(A, 1.0, 1.0, 0.2, 1.0, geom_unit.alpha, geom_unit.beta)
        assert abs(float(g2_eval(st, 0.0))) < 1e-12
        # the first equation at the root gives z1 * Vrev
        v = float(reversal_potential(1.0, 0.0, bath_02_1, geom_unit))
        assert v == pytest.approx(float(g1_eval(st, 0.0)), abs=1e-15)

    def test_randomized_against_scan_oracle(self):
        rng = np.random.default_rng(31)
        Q0, theta, z1, l, r, alpha, beta = random_parameter_sets(rng, 25, q0_lo=-40.0, q0_hi=40.0)
        for i in range(Q0.size):
            got = float(solve_a_values(Q0[i], theta[i], z1[i], l[i], r[i], alpha[i], beta[i]))
            ref = scan_root_oracle(Q0[i], theta[i], z1[i], l[i], r[i], alpha[i], beta[i])
            assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_ordering_between_baths(self):
        rng = np.random.default_rng(37)
        Q0, theta, z1, l, r, alpha, beta = random_parameter_sets(rng, 3000)
        A = solve_a_values(Q0, theta, z1, l, r, alpha, beta)
        B = reduced_state_values(A, Q0, z1, l, r, alpha, beta).B
        a_star = a_crossover(l, r, alpha, beta)
        gt = l > r
        assert np.all(A[gt] < l[gt])
        assert np.all(A[gt] > a_star[gt])
        assert np.all(B[gt] < a_star[gt])
        assert np.all(B[gt] > r[gt])
        lt = l < r
        assert np.all(A[lt] > l[lt])
        assert np.all(A[lt] < a_star[lt])
        assert np.all(B[lt] > a_star[lt])
        assert np.all(B[lt] < r[lt])

    def test_vectorized_matches_scalar(self, geom_unit, bath_02_1):
        q = np.array([-3.0, 0.0, 2.5, 40.0])
        vec = solve_a(q, 0.3, bath_02_1, geom_unit)
        for qi, ai in zip(q, vec):
            assert float(solve_a(float(qi), 0.3, bath_02_1, geom_unit)) == pytest.approx(float(ai), rel=1e-14)

    def test_charge_slope_signs(self):
        # d A / d Q0 carries the sign of (l - r) Q0 when theta * Q0 >= 0
        rng = np.random.default_rng(41)
        Q0, theta, z1, l, r, alpha, beta = random_parameter_sets(rng, 800, q0_lo=-30.0, q0_hi=30.0)
        keep = (theta * Q0 >= 0.0) & (np.abs(Q0) > 1e-2) & (np.abs(l - r) > 1e-3)
        Q0, theta, z1, l, r, alpha, beta = (v[keep] for v in (Q0, theta, z1, l, r, alpha, beta))
        h = 1e-6 * (1.0 + np.abs(Q0))
        up = solve_a_values(Q0 + h, theta, z1, l, r, alpha, beta)
        dn = solve_a_values(Q0 - h, theta, z1, l, r, alpha, beta)
        slope = (up - dn) / (2.0 * h)
        ok = np.sign(slope) == np.sign((l - r) * Q0)
        # finite differences of a nearly flat function may lose the sign
        assert np.mean(ok | (np.abs(slope) < 1e-9)) == 1.0

    def test_theta_slope_signs(self):
        rng = np.random.default_rng(43)
        Q0, theta, z1, l, r, alpha, beta = random_parameter_sets(rng, 800, q0_lo=-30.0, q0_hi=30.0)
        keep = (np.abs(Q0) > 1e-2) & (np.abs(l - r) > 1e-3) & (np.abs(theta) < 0.9)
        Q0, theta, z1, l, r, alpha, beta = (v[keep] for v in (Q0, theta, z1, l, r, alpha, beta))
        h = 1e-7
        up = solve_a_values(Q0, theta + h, z1, l, r, alpha, beta)
        dn = solve_a_values(Q0, theta - h, z1, l, r, alpha, beta)
        slope = (up - dn) / (2.0 * h)
        ok = np.sign(slope) == np.sign((l - r) * Q0)
        assert np.mean(ok | (np.abs(slope) < 1e-9)) == 1.0


class TestReversalPotential:
    def test_zero_charge_value(self, geom_unit, bath_02_1):
        v = float(reversal_potential(0.0, 0.5, bath_02_1, geom_unit))
        assert v == pytest.approx(0.5 * np.log(0.2), abs=1e-13)

    def test_zero_charge_zero_theta(self, geom_unit, bath_02_1):
        assert float(reversal_potential(0.0, 0.0, bath_02_1, geom_unit)) == pytest.approx(0.0, abs=1e-14)

    def test_large_charge_limits(self, geom_unit, bath_02_1):
        for q0, sign in ((1e6, 1.0), (-1e6, -1.0)):
            v = float(reversal_potential(q0, 0.0, bath_02_1, geom_unit))
            assert abs(v - sign * np.log(0.2)) <= 1e-2

    def test_bounds_and_flux_sign(self):
        rng = np.random.default_rng(47)
        Q0, theta, z1, l, r, alpha, beta = random_parameter_sets(rng, 2000)
        keep = np.abs(l - r) > 1e-3
        Q0, theta, z1, l, r, alpha, beta = (v[keep] for v in (Q0, theta, z1, l, r, alpha, beta))
        v = reversal_potential_values(Q0, theta, z1, l, r, alpha, beta)
        bound = np.abs(np.log(l / r)) / z1
        assert np.all(np.abs(v) < bound)
        A = solve_a_values(Q0, theta, z1, l, r, alpha, beta)
        assert np.all(np.sign(l - A) == np.sign(l - r))  # J ~ -(A - l)

    def test_monotone_in_charge_same_sign_regime(self, geom_unit):
        for l, r in ((2.0, 0.4), (0.4, 2.0)):
            bath = BathConditions(l=l, r=r)
            for theta in (0.0, 0.5):
                grid = np.linspace(0.0, 60.0, 200)
                v = reversal_potential_values(grid, theta, 1.0, l, r, geom_unit.alpha, geom_unit.beta)
                diffs = np.diff(v)
                if l > r:
                    assert np.all(diffs > 0.0)
                else:
                    assert np.all(diffs < 0.0)

    def test_theta_slope_sign(self, geom_unit):
        rng = np.random.default_rng(53)
        for _ in range(60):
            l, r = rng.uniform(0.05, 5.0, 2)
            if abs(l - r) < 1e-2:
                continue
            bath = BathConditions(l=l, r=r)
            q0 = rng.uniform(-20.0, 20.0)
            theta = rng.uniform(-0.8, 0.8)
            h = 1e-6
            up = float(reversal_potential(q0, theta + h, bath, geom_unit))
            dn = float(reversal_potential(q0, theta - h, bath, geom_unit))
            assert np.sign(up - dn) == np.sign(l - r)

    def test_odd_in_charge_for_equal_diffusion(self, geom_unit, bath_02_1):
        grid = np.linspace(-50.0, 50.0, 41)
        v = reversal_potential_values(grid, 0.0, 1.0, 0.2, 1.0, geom_unit.alpha, geom_unit.beta)
        assert np.max(np.abs(v + v[::-1])) <= 1e-9

    def test_symmetry_breaks_for_unequal_diffusion(self, geom_unit, bath_02_1):
        grid = np.linspace(-50.0, 50.0, 41)
        v = reversal_potential_values(grid, 0.5, 1.0, 0.2, 1.0, geom_unit.alpha, geom_unit.beta)
        assert np.max(np.abs(v + v[::-1])) > 1e-3


class TestFlux:
    def test_symmetric_baths_zero_flux(self, geom_unit, bath_sym):
        assert zero_current_flux(5.0, 1.0, 2.0, bath_sym, geom_unit) == pytest.approx(0.0, abs=1e-14)

    def test_hand_value(self, geom_unit, bath_02_1):
        J = zero_current_flux(0.0, 1.0, 1.0, bath_02_1, geom_unit)
        assert J == pytest.approx(-0.8, abs=1e-13)

    def test_degree_one_homogeneity(self, geom_unit, bath_02_1):
        J1 = zero_current_flux(3.0, 1.0, 2.0, bath_02_1, geom_unit)
        J2 = zero_current_flux(3.0, 2.0, 4.0, bath_02_1, geom_unit)
        assert J2 == pytest.approx(2.0 * J1, rel=1e-12)

    def test_sign_matches_concentration_drop(self, geom_unit):
        rng = np.random.default_rng(59)
        for _ in range(50):
            l, r = rng.uniform(0.05, 5.0, 2)
            if abs(l - r) < 1e-3:
                continue
            J = zero_current_flux(rng.uniform(-30, 30), rng.uniform(0.2, 3), rng.uniform(0.2, 3),
                                  BathConditions(l=l, r=r), geom_unit)
            assert np.sign(J) == np.sign(l - r)

    def test_even_in_charge_for_equal_diffusion(self, geom_unit, bath_02_1):
        grid = np.linspace(-40.0, 40.0, 17)
        J = np.array([zero_current_flux(q, 1.0, 1.0, bath_02_1, geom_unit) for q in grid])
        assert np.max(np.abs(J - J[::-1])) <= 1e-9

    def test_evenness_lost_for_unequal_diffusion(self, geom_unit, bath_02_1):
        grid = np.linspace(-40.0, 40.0, 17)
        J = np.array([zero_current_flux(q, 1.0, 3.0, bath_02_1, geom_unit) for q in grid])
        assert np.max(np.abs(J - J[::-1])) > 1e-3

    def test_derivative_signs(self, geom_unit):
        # flux derivatives in charge and in each diffusivity, stated regimes only
        rng = np.random.default_rng(61)
        h = 1e-6
        for _ in range(40):
            l, r = rng.uniform(0.1, 5.0, 2)
            if abs(l - r) < 1e-2:
                continue
            bath = BathConditions(l=l, r=r)
            D1, D2 = rng.uniform(0.3, 3.0, 2)
            theta = (D2 - D1) / (D2 + D1)
            q0 = rng.uniform(0.05, 25.0) * np.sign(theta if theta != 0 else 1.0)
            dJ_dq = (
                zero_current_flux(q0 + h, D1, D2, bath, geom_unit)
                - zero_current_flux(q0 - h, D1, D2, bath, geom_unit)
            ) / (2 * h)
            assert np.sign(dJ_dq) == -np.sign((l - r) * q0)
            q_pos = abs(q0)
            dJ_dD1 = (
                zero_current_flux(q_pos, D1 + h, D2, bath, geom_unit)
                - zero_current_flux(q_pos, D1 - h, D2, bath, geom_unit)
            ) / (2 * h)
            assert np.sign(dJ_dD1) == np.sign(l - r)
            dJ_dD2 = (
                zero_current_flux(-q_pos, D1, D2 + h, bath, geom_unit)
                - zero_current_flux(-q_pos, D1, D2 - h, bath, geom_unit)
            ) / (2 * h)
            assert np.sign(dJ_dD2) == np.sign(l - r)


class TestSmallChargeExpansion:
    def test_hand_value(self, geom_unit, bath_02_1):
        v0, slope = vrev_small_q0(0.0, bath_02_1, geom_unit)
        assert float(v0) == 0.0
        assert float(slope) == pytest.approx(-60.0 / 77.0, rel=1e-13)

    def test_slope_matches_finite_difference(self, geom_unit, bath_02_1):
        v0, slope = vrev_small_q0(0.0, bath_02_1, geom_unit)
        for h in (1e-4, -1e-4):
            fd = (float(reversal_potential(h, 0.0, bath_02_1, geom_unit)) - float(v0)) / h
            assert fd == pytest.approx(float(slope), rel=1e-3)

    def test_degenerate_factors(self, geom_unit):
        _, slope = vrev_small_q0(0.3, BathConditions(l=1.0, r=1.0), geom_unit)
        assert float(slope) == 0.0
        _, slope = vrev_small_q0(0.9999, BathConditions(l=0.2, r=1.0), geom_unit)
        assert abs(float(slope)) < 1e-3


class TestGhk:
    def test_zeros(self, bath_02_1, bath_sym):
        assert float(ghk_reversal(0.0, bath_02_1)) == 0.0
        assert float(ghk_reversal(0.5, bath_sym)) == 0.0

    def test_hand_value(self, bath_02_1):
        assert float(ghk_reversal(0.5, bath_02_1)) == pytest.approx(np.log(0.5), abs=1e-14)

    def test_disagrees_with_structure_aware_value(self, geom_unit, bath_02_1):
        v_red = float(reversal_potential(0.0, 0.5, bath_02_1, geom_unit))
        v_ghk = float(ghk_reversal(0.5, bath_02_1))
        assert abs(v_red - v_ghk) > 0.1


class TestReversalCharge:
    def test_zero_at_matched_potential(self, geom_unit, bath_02_1):
        theta = 0.4
        v = theta * np.log(0.2)
        res = reversal_charge(v, theta, bath_02_1, geom_unit)
        assert res.Qrev == pytest.approx(0.0, abs=1e-8)
        assert not res.multiplicity_flag

    def test_zero_theta_zero_potential(self, geom_unit, bath_02_1):
        res = reversal_charge(0.0, 0.0, bath_02_1, geom_unit)
        assert res.Qrev == pytest.approx(0.0, abs=1e-9)

    def test_grows_near_admissible_boundary(self, geom_unit, bath_02_1):
        qs = [abs(reversal_charge(f * np.log(0.2), 0.0, bath_02_1, geom_unit).Qrev)
              for f in (0.8, 0.9, 0.99)]
        assert qs[0] < qs[1] < qs[2]
        assert qs[2] > 50.0

    def test_roundtrip(self, geom_unit, bath_02_1):
        for q0 in (-40.0, -2.0, 0.3, 7.0, 49.0):
            for theta in (-0.6, 0.0, 0.6):
                v = float(reversal_potential(q0, theta, bath_02_1, geom_unit))
                res = reversal_charge(v, theta, bath_02_1, geom_unit)
                if not res.multiplicity_flag:
                    assert res.Qrev == pytest.approx(q0, abs=1e-6)
                assert res.residual_g1 <= 1e-9

    def test_existence_condition(self, geom_unit, bath_02_1):
        with pytest.raises(NoReversalChargeError):
            reversal_charge(1.01 * np.log(0.2), 0.0, bath_02_1, geom_unit)
        with pytest.raises(NoReversalChargeError):
            reversal_charge(-1.01 * np.log(0.2), 0.0, bath_02_1, geom_unit)

    def test_degenerate_equal_baths(self, geom_unit, bath_sym):
        with pytest.raises(DegenerateSystemError):
            reversal_charge(0.5, 0.2, bath_sym, geom_unit)
        res = reversal_charge(0.0, 0.2, bath_sym, geom_unit)
        assert res.degenerate and res.Qrev == 0.0


class TestSweep:
    def test_single_point_matches_direct(self, geom_unit, bath_02_1, transport_eq):
        rows = sweep("Q0", [5.0], bath_02_1, geom_unit, transport_eq)
        direct = solve_zero_current(5.0, transport_eq, bath_02_1, geom_unit)
        assert rows[0].result == direct

    def test_rows_independent_of_thread_count(self, geom_unit, bath_02_1, transport_eq):
        grid = np.linspace(-20.0, 20.0, 9)
        serial = sweep("Q0", grid, bath_02_1, geom_unit, transport_eq)
        threaded = sweep("Q0", grid, bath_02_1, geom_unit, transport_eq, threads=4)
        assert [row.result for row in serial] == [row.result for row in threaded]

    def test_error_rows_recorded(self, geom_unit, bath_02_1, transport_eq):
        rows = sweep("V", [0.1, 5.0], bath_02_1, geom_unit, transport_eq)
        assert rows[0].error is None
        assert rows[1].error == "NoReversalChargeError"

    def test_theta_sweep(self, geom_unit, bath_02_1):
        rows = sweep("theta", [-0.5, 0.0, 0.5], bath_02_1, geom_unit, Transport(1.0, 1.0), Q0=0.0)
        vs = [row.result.Vrev for row in rows]
        assert vs[1] == pytest.approx(0.0, abs=1e-12)
        assert vs[0] == pytest.approx(-0.5 * np.log(0.2), abs=1e-12)
        assert vs[2] == pytest.approx(0.5 * np.log(0.2), abs=1e-12)


def test_solve_result_fields(geom_unit, bath_02_1):
    res = solve_zero_current(4.0, Transport(1.0, 3.0), bath_02_1, geom_unit)
    assert res.residual_G2 <= 1e-10 * (1.0 + 1.0 * 0.2)
    assert 0.2 < res.A < a_upper_limit(0.2, 1.0, geom_unit.alpha, geom_unit.beta)
    assert 0.2 <= res.A <= 1.0
    assert res.iterations > 0
