import numpy as np
import pytest

from blowuplab import potentials as pots
from blowuplab.numerics import DomainError, fd_gradient


def bisect(g, lo, hi, iters=80):
    glo = g(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if glo * g(mid) <= 0:
            hi = mid
        else:
            lo, glo = mid, g(mid)
    return 0.5 * (lo + hi)


def test_constant_derivatives_vanish():
    spec = pots.Constant(1.0)
    x = np.array([0.3, -0.7, 0.1, 0.0])
    assert pots.v_eval(spec, x) == 1.0
    assert pots.v_grad(spec, x) == pytest.approx(np.zeros(4))
    assert pots.v_hess(spec, x) == pytest.approx(np.zeros((4, 4)))


def test_quadratic_direct_algebra():
    n = 4
    spec = pots.Quadratic(2.0, np.zeros(n), -2.0 * np.eye(n))
    e1 = np.eye(n)[0]
    assert pots.v_eval(spec, e1) == pytest.approx(1.0)
    assert pots.v_grad(spec, e1) == pytest.approx(-2.0 * e1)
    assert pots.v_hess(spec, e1) == pytest.approx(-2.0 * np.eye(n))


def test_quadratic_gradient_vanishes_at_center():
    z = np.array([0.2, -0.1, 0.4])
    spec = pots.Quadratic(1.5, z, np.diag([-1.0, -2.0, -3.0]))
    assert pots.v_grad(spec, z) == pytest.approx(np.zeros(3), abs=0.0)


def test_bump_gradient_zero_at_center():
    c = np.array([0.5, 0.5, 0.0, 0.0, 0.0])
    spec = pots.BumpSum(1.0, [pots.Bump(c, 0.7, 0.8)])
    assert pots.v_grad(spec, c) == pytest.approx(np.zeros(5), abs=1e-15)


def test_hessian_exactly_symmetric():
    rng = np.random.default_rng(1)
    bumps = [pots.Bump(rng.uniform(-1, 1, size=4), 0.5, 0.6) for _ in range(3)]
    spec = pots.BumpSum(1.0, bumps)
    for _ in range(20):
        h = pots.v_hess(spec, rng.uniform(-1, 1, size=4))
        assert np.array_equal(h, h.T)


def test_fd_consistency_all_variants():
    n = 4
    rng = np.random.default_rng(2)
    quad = pots.Quadratic(3.0, rng.uniform(-0.2, 0.2, size=n),
                          np.diag(rng.uniform(-2, -1, size=n)))
    bumps = pots.BumpSum(1.0, [pots.Bump(rng.uniform(-0.5, 0.5, size=n), 0.8, 0.7),
                               pots.Bump(rng.uniform(-0.5, 0.5, size=n), -0.3, 0.9)])
    for spec in (pots.Constant(2.0), quad, bumps):
        rep = pots.fd_consistency(spec, n)
        assert rep.max_grad_error <= 1e-6
        assert rep.max_hess_error <= 1e-5  # second differences carry more truncation


def test_quadratic_critical_point():
    n = 4
    spec = pots.Quadratic(2.0, np.zeros(n), -2.0 * np.eye(n))
    report = pots.critical_points(spec, pots.Box(np.zeros(n), 1.0))
    assert len(report) == 1
    cp = report[0]
    assert cp.location == pytest.approx(np.zeros(n))
    assert cp.morse_index == n
    assert cp.nondegenerate
    assert not report.degenerate_everywhere


def test_constant_degenerate_everywhere():
    report = pots.critical_points(pots.Constant(1.0), pots.Box(np.zeros(4), 1.0))
    assert len(report) == 0
    assert report.degenerate_everywhere


def test_single_bump_maximum():
    n = 3
    c = np.array([0.3, -0.2, 0.1])
    spec = pots.BumpSum(1.0, [pots.Bump(c, 0.5, 0.6)])
    report = pots.critical_points(spec, pots.Box(np.zeros(n), 1.0))
    assert len(report) == 1
    assert report[0].location == pytest.approx(c, abs=1e-8)
    assert report[0].morse_index == n  # amplitude > 0: a maximum


def test_two_equal_bumps_give_three_critical_points():
    n = 2
    w, amp = 1.0, 1.0
    e1 = np.array([1.0, 0.0])
    spec = pots.BumpSum(0.5, [pots.Bump(e1, amp, w), pots.Bump(-e1, amp, w)])
    report = pots.critical_points(spec, pots.Box(np.zeros(n), 2.0))
    assert len(report) >= 3
    # 1-d section oracle along the axis: g(t) = d/dt of the bump pair
    g = lambda t: (-2 * (t - 1) / w**2 * np.exp(-(t - 1) ** 2 / w**2)
                   - 2 * (t + 1) / w**2 * np.exp(-(t + 1) ** 2 / w**2))
    t_max = bisect(g, 0.5, 1.5)
    locations = sorted(float(p.location[0]) for p in report)
    assert locations[0] == pytest.approx(-t_max, abs=1e-6)
    assert locations[1] == pytest.approx(0.0, abs=1e-8)
    assert locations[-1] == pytest.approx(t_max, abs=1e-6)
    saddle = [p for p in report if abs(p.location[0]) < 1e-6][0]
    assert saddle.morse_index in (1, 2)  # descending along the axis at least


def test_positivity_sampling_rejects():
    n = 4
    spec = pots.Quadratic(1.0, np.zeros(n), -2.0 * np.eye(n))
    with pytest.raises(pots.PositivityError):
        pots.validate_positivity(spec, n, pots.Box(np.zeros(n), 2.0))
    # small box around the maximum is fine
    vmin = pots.validate_positivity(spec, n, pots.Box(np.zeros(n), 0.25))
    assert vmin > 0


def test_positivity_waiver():
    n = 4
    spec = pots.Constant(-1.0)
    with pytest.raises(pots.PositivityError):
        pots.from_json(pots.to_json(spec), n=n)
    got = pots.from_json(pots.to_json(spec), n=n, allow_negative=True)
    assert isinstance(got, pots.Constant) and got.v0 == -1.0


def test_json_round_trip():
    n = 3
    quad = pots.Quadratic(2.0, np.array([0.1, 0.0, -0.1]),
                          np.diag([-1.0, -2.0, -0.5]))
    data = pots.to_json(quad)
    back = pots.from_json(data, n=n)
    assert isinstance(back, pots.Quadratic)
    assert back.v0 == quad.v0
    assert back.z == pytest.approx(quad.z)
    assert back.H == pytest.approx(quad.H)

    bumps = pots.BumpSum(1.0, [pots.Bump(np.zeros(n), 0.4, 0.8)])
    back = pots.from_json(pots.to_json(bumps), n=n)
    assert isinstance(back, pots.BumpSum)
    assert back.bumps[0].width == 0.8


def test_from_json_rejects_unknown_type():
    with pytest.raises(DomainError):
        pots.from_json({"type": "spline"})


def test_asymmetric_hessian_rejected():
    H = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DomainError):
        pots.Quadratic(1.0, np.zeros(2), H)


def test_fd_gradient_agrees_on_mixed_bumps():
    rng = np.random.default_rng(9)
    n = 5
    spec = pots.BumpSum(2.0, [pots.Bump(rng.uniform(-1, 1, size=n),
                                        rng.uniform(-0.5, 0.8), rng.uniform(0.5, 1.2))
                              for _ in range(4)])
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, size=n)
        assert pots.v_grad(spec, x) == pytest.approx(
            fd_gradient(lambda p: pots.v_eval(spec, p), x, h=1e-6), rel=1e-6, abs=1e-9)
