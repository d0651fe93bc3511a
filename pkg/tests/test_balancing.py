import math

import numpy as np
import pytest

from blowuplab import balancing, constants, kirchhoff, potentials
from blowuplab.balancing import (
    BalancingState, Infeasible, alpha_of_lambda, analytic_init, beta_rate,
    classify_blowup, cluster_eta, continuation_sweep, infeasibility_check,
    predicted_lambda_single, rate_ratio_bracket, rate_ratio_diagnostic,
    rescale_cluster, residual_EA, residual_EL, solve_system)
from blowuplab.bubbles import Bubble, BubbleFamily
from blowuplab.numerics import DomainError


def make_state(n, eps, lams, centers):
    fam = BubbleFamily(n, [Bubble(a=np.asarray(c, dtype=float), lam=l)
                           for c, l in zip(centers, lams)])
    alphas = np.array([alpha_of_lambda(n, eps, l) for l in lams])
    return BalancingState(n=n, eps=eps, family=fam, alphas=alphas)


class TestAlpha:
    def test_eps_zero_gives_one(self):
        assert alpha_of_lambda(6, 0.0, 123.4) == 1.0

    def test_direct_exponentiation_oracle(self):
        n, eps, lam = 4, 1e-3, 176.2
        expected = lam ** (eps * (n - 2) ** 2 / (2 * (4 - eps * (n - 2))))
        got = alpha_of_lambda(n, eps, lam)
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(1.00259, abs=2e-5)

    def test_increasing_in_lambda(self):
        values = [alpha_of_lambda(5, 1e-3, lam) for lam in (10, 100, 1000, 1e4)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert all(v >= 1 for v in values)

    def test_regime_error(self):
        with pytest.raises(DomainError):
            alpha_of_lambda(10, 0.5, 10.0)


class TestStateGuards:
    def test_eps_log_guard(self):
        with pytest.raises(DomainError, match="eps"):
            make_state(6, 0.01, [1e30], [np.zeros(6)])

    def test_interaction_guard(self):
        centers = [np.zeros(6), 0.01 * np.ones(6)]
        with pytest.raises(DomainError, match="eps_01"):
            make_state(6, 1e-4, [10.0, 10.0], centers)

    def test_valid_state_constructs(self):
        st = make_state(6, 1e-4, [100.0, 100.0],
                        [np.zeros(6), np.array([1, 0, 0, 0, 0, 0.0])])
        assert len(st.family) == 2


class TestResidualEL:
    def test_single_bubble_hand_formula(self):
        # res = c2*eps - c(n)/lam^2 * V with c2(6)=153.6 pi^3, c(6)=96 pi^3
        st = make_state(6, 1e-3, [50.0], [np.zeros(6)])
        res = residual_EL(st, potentials.Constant(2.0))
        expected = math.pi ** 3 * (153.6e-3 - 96.0 * 2.0 / 2500.0)
        assert res[0] == pytest.approx(expected, rel=1e-13)

    def test_closed_form_root_n6(self):
        eps = 1e-4
        table = constants.compute_table(6)
        lam = math.sqrt(table.kappa1 / eps)
        st = make_state(6, eps, [lam], [np.zeros(6)])
        res = residual_EL(st, potentials.Constant(1.0))
        assert abs(res[0]) <= 1e-12 * table.c2 * eps

    def test_negative_potential_positive_residual(self):
        for lam in (10.0, 100.0, 5000.0):
            st = make_state(6, 1e-3, [lam], [np.zeros(6)])
            res = residual_EL(st, potentials.Constant(-1.0))
            assert res[0] >= constants.compute_table(6).c2 * 1e-3

    def test_pair_interaction_raises_residual(self):
        eps = 1e-4
        single = make_state(6, eps, [200.0], [np.zeros(6)])
        paired = make_state(6, eps, [200.0, 200.0],
                            [np.zeros(6), np.array([2, 0, 0, 0, 0, 0.0])])
        v = potentials.Constant(1.0)
        assert residual_EL(paired, v)[0] > residual_EL(single, v)[0]


class TestResidualEA:
    def test_single_bubble_critical_point(self):
        v = potentials.Quadratic(v0=1.0, z=np.zeros(6), H=-2.0 * np.eye(6))
        st = make_state(6, 1e-4, [100.0], [np.zeros(6)])
        assert np.all(residual_EA(st, v) == 0.0)

    def test_mirror_symmetry_exact(self):
        v = potentials.Quadratic(v0=1.0, z=np.zeros(6), H=-2.0 * np.eye(6))
        d = np.array([0.03, 0.01, 0, 0, 0, -0.02])
        st = make_state(6, 1e-4, [300.0, 300.0], [d, -d])
        res = residual_EA(st, v).reshape(2, 6)
        assert np.array_equal(res[0], -res[1])

    def test_single_offcenter_parallel_to_gradient(self):
        h = np.diag([-2.0, -4.0, -2, -2, -2, -2.0])
        v = potentials.Quadratic(v0=1.0, z=np.zeros(6), H=h)
        a = np.array([0.05, 0.02, 0, 0, 0, 0.0])
        st = make_state(6, 1e-4, [100.0], [a])
        res = residual_EA(st, v).reshape(1, 6)[0]
        g = h @ a
        cross = res / np.linalg.norm(res) - g / np.linalg.norm(g)
        assert np.linalg.norm(cross) < 1e-12


class TestPredictedLambda:
    def test_n6_closed_form(self):
        pred = predicted_lambda_single(6, 1.0, 1e-4)
        assert pred.lambda_predicted == pytest.approx(math.sqrt(6250.0), rel=1e-12)
        assert pred.formula_branch == "plain"
        assert pred.kappa1_used == pytest.approx(0.625)

    def test_n4_against_bisection_oracle(self):
        # oracle: root of lam^2/ln(lam) = 6000 by bisection
        target = 6.0 * 1.0 / 1e-3
        lo, hi = 100.0, 300.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid ** 2 / math.log(mid) < target:
                lo = mid
            else:
                hi = mid
        pred = predicted_lambda_single(4, 1.0, 1e-3)
        assert pred.formula_branch == "log-corrected"
        assert pred.lambda_predicted == pytest.approx(lo, rel=1e-10)
        assert abs(pred.lambda_predicted - 176.2) < 0.5

    def test_sqrt_eps_scaling_exact(self):
        a = predicted_lambda_single(7, 2.0, 1e-3).lambda_predicted
        b = predicted_lambda_single(7, 2.0, 5e-4).lambda_predicted
        assert b == pytest.approx(a * math.sqrt(2.0), rel=1e-14)

    def test_negative_v_infeasible(self):
        out = predicted_lambda_single(6, -1.0, 1e-3)
        assert isinstance(out, Infeasible)

    def test_eps_range(self):
        with pytest.raises(DomainError):
            predicted_lambda_single(6, 1.0, 0.5)


class TestSolveSystem:
    def test_single_bubble_constant_v_matches_rate(self):
        n, eps = 6, 1e-4
        pred = predicted_lambda_single(n, 1.0, eps).lambda_predicted
        init = make_state(n, eps, [1.3 * pred], [0.01 * np.ones(n)])
        solved = solve_system(n, eps, potentials.Constant(1.0), init)
        assert isinstance(solved, BalancingState)
        assert solved.family[0].lam == pytest.approx(pred, rel=1e-10)

    def test_single_bubble_quadratic_max(self):
        n, eps = 6, 1e-4
        v = potentials.Quadratic(v0=1.0, z=np.zeros(n), H=-2.0 * np.eye(n))
        pred = predicted_lambda_single(n, 1.0, eps).lambda_predicted
        a0 = np.zeros(n)
        a0[0] = 0.05
        init = make_state(n, eps, [0.8 * pred], [a0])
        solved = solve_system(n, eps, v, init)
        assert np.linalg.norm(solved.family[0].a) < 1e-8
        assert solved.family[0].lam == pytest.approx(pred, rel=1e-9)

    def test_scaled_residuals_meet_tolerance(self):
        n, eps = 5, 1e-3
        v = potentials.Quadratic(v0=2.0, z=np.zeros(n), H=-2.0 * np.eye(n))
        pred = predicted_lambda_single(n, 2.0, eps).lambda_predicted
        a0 = np.zeros(n)
        a0[1] = 0.03
        solved = solve_system(n, eps, v, make_state(n, eps, [1.2 * pred], [a0]))
        el = residual_EL(solved, v)
        ea = residual_EA(solved, v)
        lam = solved.family[0].lam
        assert np.max(np.abs(el)) <= 1e-9 * eps
        assert np.max(np.abs(ea)) <= 1e-9 * (1.0 / lam ** 3)

    def test_negative_constant_infeasible(self):
        n, eps = 6, 1e-3
        centers = [np.zeros(n), np.array([1.5, 0, 0, 0, 0, 0.0])]
        init = make_state(n, eps, [100.0, 100.0], centers)
        out = solve_system(n, eps, potentials.Constant(-1.0), init)
        assert isinstance(out, Infeasible)
        assert out.certificate is not None
        assert out.certificate.infeasible

    def test_pair_symmetry_preserved(self):
        n, eps = 6, 1e-3
        v = potentials.Quadratic(v0=1.0, z=np.zeros(n), H=-2.0 * np.eye(n))
        xi = kirchhoff.find_critical(-2.0 * np.eye(n), m=2, n=n)[0].config.xi
        init = analytic_init(n, eps, v, np.zeros(n), xi)
        solved = solve_system(n, eps, v, init)
        a1, a2 = solved.family[0].a, solved.family[1].a
        assert np.linalg.norm(a1 + a2) <= 1e-9 * np.linalg.norm(a1 - a2)


class TestInfeasibilityCheck:
    def test_negative_constant_certificate(self):
        box = potentials.Box(center=np.zeros(5), halfwidth=1.0)
        cert = infeasibility_check(5, 1e-3, potentials.Constant(-1.0), box)
        assert cert.applicable and cert.infeasible
        assert set(cert.term_signs) == {"eps_term", "potential_term",
                                        "interaction_term"}
        assert "VIOLATED" not in str(cert.term_signs.values())

    def test_positive_constant_not_applicable(self):
        box = potentials.Box(center=np.zeros(5), halfwidth=1.0)
        cert = infeasibility_check(5, 1e-3, potentials.Constant(1.0), box)
        assert not cert.applicable

    def test_mixed_sign_not_applicable(self):
        v = potentials.Quadratic(v0=1.0, z=np.zeros(4), H=-2.0 * np.eye(4))
        box = potentials.Box(center=np.zeros(4), halfwidth=3.0)
        cert = infeasibility_check(4, 1e-3, v, box)
        assert not cert.applicable


class TestRescaleCluster:
    def test_n4_log_form(self):
        n, eps = 4, 1e-3
        z = np.zeros(n)
        a = z + np.array([0.02, -0.01, 0.0, 0.03])
        st = make_state(n, eps, [500.0], [a])
        (b,) = rescale_cluster(st, z, v_at_z=1.7)
        table = constants.compute_table(4)
        # V-exponent (n-4)/(2n) vanishes at n=4
        expected = table.kappa2 * (abs(math.log(eps)) / 2.0) ** 0.25 * (a - z)
        assert np.allclose(b, expected, rtol=1e-14)
        assert table.kappa2 == pytest.approx(2.0 ** -0.5, rel=1e-12)

    def test_center_maps_to_zero_and_linearity(self):
        n, eps = 6, 1e-4
        z = np.full(n, 0.5)
        st0 = make_state(n, eps, [300.0], [z])
        assert np.all(rescale_cluster(st0, z, 1.0)[0] == 0.0)
        d = np.array([0.01, 0, 0, 0.02, 0, 0.0])
        b1 = rescale_cluster(make_state(n, eps, [300.0], [z + d]), z, 1.0)[0]
        b3 = rescale_cluster(make_state(n, eps, [300.0], [z + 3 * d]), z, 1.0)[0]
        assert np.allclose(b3, 3.0 * b1, rtol=1e-13)

    def test_compat_exponent_ratio(self):
        n, eps, v = 6, 1e-4, 2.0
        z = np.zeros(n)
        st = make_state(n, eps, [300.0], [z + 0.01])
        b_default = rescale_cluster(st, z, v)[0]
        b_compat = rescale_cluster(st, z, v, compat_exponent=True)[0]
        # exponents differ by (n-4)/(n-2) - (n-4)/(2n) = 1/3 at n=6
        assert np.allclose(b_compat, b_default * 2.0 ** (1.0 / 3.0), rtol=1e-13)


class TestRateRatio:
    def test_hand_value_single_state(self):
        st = make_state(5, 1e-3, [100.0], [np.zeros(5)])
        assert rate_ratio_diagnostic(st) == pytest.approx(1e-3 * 100.0 ** 2)

    def test_solved_single_equals_kappa1_v(self):
        n, eps = 6, 1e-4
        init = make_state(n, eps, [250.0], [np.zeros(n)])
        solved = solve_system(n, eps, potentials.Constant(1.0), init)
        table = constants.compute_table(n)
        assert rate_ratio_diagnostic(solved) == pytest.approx(table.kappa1, rel=1e-9)

    def test_bracket_positive(self):
        states = [make_state(6, e, [200.0], [np.zeros(6)]) for e in (1e-3, 1e-4)]
        lo, hi = rate_ratio_bracket(states)
        assert 0 < lo <= hi


class TestClassify:
    def test_synthetic_isolated_simple(self):
        n = 6
        z = np.zeros(n)
        sweep = []
        for eps in (1e-4, 1e-5, 1e-6):
            a = z.copy()
            a[0] = 0.3 * math.sqrt(eps)
            lam = predicted_lambda_single(n, 1.0, eps).lambda_predicted
            sweep.append(make_state(n, eps, [lam], [a]))
        far = np.full(n, 2.0)
        records = classify_blowup(sweep, potentials.Constant(1.0),
                                  critical_locations=[z, far])
        by_loc = {tuple(r.location): r for r in records}
        near = by_loc[tuple(z)]
        assert near.classification == "isolated-simple"
        assert near.beta_sup == pytest.approx(0.3, rel=1e-12)
        assert by_loc[tuple(far)].classification == "empty"

    def test_synthetic_non_simple(self):
        n = 6
        z = np.zeros(n)
        sweep = []
        for eps in (1e-4, 1e-5, 1e-6):
            d = 0.3 * eps ** (1.0 / 6.0)
            a1, a2 = z.copy(), z.copy()
            a1[0], a2[0] = d, -d
            lam = predicted_lambda_single(n, 1.0, eps).lambda_predicted
            sweep.append(make_state(n, eps, [lam, lam], [a1, a2]))
        (rec,) = classify_blowup(sweep, potentials.Constant(1.0),
                                 critical_locations=[z])
        assert rec.classification == "non-simple"
        assert rec.cluster_sup == pytest.approx(0.3, rel=1e-12)
        assert rec.cluster_inf == pytest.approx(0.3, rel=1e-12)

    def test_non_monotone_sweep_rejected(self):
        st = make_state(6, 1e-4, [200.0], [np.zeros(6)])
        st2 = make_state(6, 1e-3, [100.0], [np.zeros(6)])
        with pytest.raises(DomainError):
            classify_blowup([st, st2], potentials.Constant(1.0),
                            critical_locations=[np.zeros(6)])


class TestContinuation:
    def test_pair_cluster_sweep_converges_to_kirchhoff(self):
        n = 6
        v = potentials.Quadratic(v0=1.0, z=np.zeros(n), H=-2.0 * np.eye(n))
        crit = kirchhoff.find_critical(-2.0 * np.eye(n), m=2, n=n)[0]
        sweep = continuation_sweep(n, v, np.zeros(n), crit.config.xi,
                                   eps_start=1e-3, eps_stop=1e-7)
        assert not sweep.failures
        assert len(sweep) == 17
        eps_list = [s.eps for s in sweep]
        assert all(b < a for a, b in zip(eps_list, eps_list[1:]))
        dists = []
        for st in sweep:
            b = np.array(rescale_cluster(st, np.zeros(n), 1.0))
            dists.append(kirchhoff.config_distance(b, crit.config.xi,
                                                   isotropic=True))
        scale = np.linalg.norm(crit.config.xi)
        # distance to the limiting configuration shrinks along the tail
        tail = dists[-6:]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(tail, tail[1:]))
        assert dists[-1] <= 0.25 * scale

        records = classify_blowup(list(sweep.states), v,
                                  critical_locations=[np.zeros(n)])
        assert records[0].classification == "non-simple"

        lo, hi = rate_ratio_bracket(sweep.states)
        assert 0.05 <= lo <= hi <= 20.0

    def test_single_bubble_sweep_rate(self):
        n = 5
        v = potentials.Quadratic(v0=1.0, z=np.zeros(n), H=-2.0 * np.eye(n))
        sweep = continuation_sweep(n, v, np.zeros(n), np.zeros((1, n)),
                                   eps_start=1e-2, eps_stop=1e-4)
        assert not sweep.failures
        for st in sweep:
            pred = predicted_lambda_single(n, 1.0, st.eps).lambda_predicted
            assert st.family[0].lam == pytest.approx(pred, rel=1e-9)
        records = classify_blowup(list(sweep.states), v,
                                  critical_locations=[np.zeros(n)])
        assert records[0].classification == "isolated-simple"

    def test_negative_potential_sweep_reports_infeasible(self):
        n = 6
        sweep = continuation_sweep(n, potentials.Constant(-1.0), np.zeros(n),
                                   np.zeros((1, n)), eps_start=1e-3,
                                   eps_stop=1e-4)
        assert len(sweep) == 0
        assert sweep.failures and "no positive root" in sweep.failures[0]
