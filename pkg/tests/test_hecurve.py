import numpy as np
import pytest

from qelastica import hecurve as hc
from oracles import agm_periods, sigma_weierstrass, weierstrass_invariants, wp_weierstrass

C1 = (-1.1, 0.3, 1.6)


@pytest.fixture(scope="module")
def sig1():
    return hc.Sigma(hc.HECurve(C1))


@pytest.fixture(scope="module")
def sig2():
    return hc.Sigma(hc.HECurve.random(np.random.default_rng(3), 2))


@pytest.fixture(scope="module")
def sig3():
    return hc.Sigma(hc.HECurve.random(np.random.default_rng(7), 3))


# -- curve and differentials ---------------------------------------------------


def test_curve_validation_and_lambda():
    cv = hc.HECurve((1.0, -2.0, 0.5))
    assert cv.branch_points == (-2.0, 0.5, 1.0)
    assert cv.genus == 1
    assert np.allclose(np.sort(np.roots(cv.lam[::-1]).real), cv.roots)
    assert cv.lam[-1] == 1
    with pytest.raises(hc.DegenerateCurve):
        hc.HECurve((0.0, 1.0))
    with pytest.raises(hc.DegenerateCurve):
        hc.HECurve((0.0, 1.0, 1.0))
    with pytest.raises(hc.DegenerateCurve):
        hc.HECurve((0.0, 1.0, 2 + 1j))


def test_curve_json_round_trip():
    cv = hc.HECurve.random(np.random.default_rng(0), 3)
    assert hc.HECurve.from_json(cv.to_json()) == cv
    with pytest.raises(hc.DegenerateCurve):
        hc.HECurve.from_json('{"genus": 2, "branch_points": [[0, 0], [1, 0], [2, 0]]}')


def test_differentials_genus1():
    d = hc.differentials(hc.HECurve(C1))
    assert np.array_equal(d.omega[0], [1.0])
    assert np.allclose(d.eta[0], [0.0, 1.0])  # eta_1 = x dx / 2y since lambda_3 = 1


def test_differentials_genus3():
    cv = hc.HECurve.random(np.random.default_rng(1), 3)
    lam = cv.lam
    d = hc.differentials(cv)
    for j, p in enumerate(d.eta, start=1):
        assert len(p) - 1 <= 2 * 3 - j
        expect = np.zeros(2 * 3 - j + 1)
        for k in range(j, 2 * 3 - j + 1):
            expect[k] = (k + 1 - j) * lam[k + 1 + j]
        assert np.array_equal(p, expect)
    assert np.allclose(d.eta[2], [0, 0, 0, 1.0])  # eta_3 = lambda_7 x^3 dx / 2y


# -- periods -------------------------------------------------------------------


def test_periods_match_agm(sig1):
    w1, w2 = agm_periods(C1)
    assert abs(sig1.data.omega1[0, 0] - w1) < 1e-10
    assert abs(sig1.data.omega2[0, 0] - w2) < 1e-10


@pytest.mark.parametrize("g", [1, 2, 3])
def test_legendre_relation(g):
    cv = hc.HECurve(C1) if g == 1 else hc.HECurve.random(np.random.default_rng(g), g)
    data = hc.periods(cv)
    assert np.max(np.abs(data.legendre() - 2j * np.pi * np.eye(g))) < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_riemann_relations_genus2(seed):
    data = hc.periods(hc.HECurve.random(np.random.default_rng(100 + seed), 2))
    asym, low = data.riemann_defect()
    assert asym < 1e-10 and low > 0
    assert np.max(np.abs(data.T.real)) < 1e-10  # real branch points: T is purely imaginary
    A = data.quadratic
    assert np.max(np.abs(A - A.T)) < 1e-10


def test_period_json(sig2):
    import json
    d = json.loads(sig2.data.to_json())
    assert set(d) == {"omega1", "omega2", "eta1", "eta2", "T"}
    assert complex(*d["T"][0][1]) == pytest.approx(sig2.data.T[0, 1])


def test_degeneration_grows_logarithmically():
    vals = []
    for eps in (1e-2, 1e-3, 1e-4):
        data = hc.periods(hc.HECurve((-1.0, 0.5, 0.5 + eps, 1.5, 2.2)))
        vals.append(abs(data.omega1[0, 0]))  # alpha_1 ends at the pinched pair
    assert vals[0] < vals[1] < vals[2]
    # logarithmic: equal steps per decade
    steps = np.diff(vals)
    assert abs(steps[1] / steps[0] - 1) < 0.05


# -- theta ---------------------------------------------------------------------


def test_theta_symmetries(sig2):
    T = sig2.data.T
    rng = np.random.default_rng(5)
    for _ in range(5):
        z = rng.normal(size=2) + 0.3j * rng.normal(size=2)
        th = hc.theta(z, T)
        assert abs(hc.theta(-z, T) - th) < 1e-12 * abs(th)
        for k in range(2):
            e = np.eye(2)[k]
            assert abs(hc.theta(z + e, T) - th) < 1e-10 * abs(th)
            shifted = hc.theta(z + T[:, k], T)
            factor = np.exp(-2j * np.pi * z[k] - 1j * np.pi * T[k, k])
            assert abs(shifted - factor * th) < 1e-10 * abs(factor * th)


def test_theta_quasi_periodicity_genus3(sig3):
    T = sig3.data.T
    z = np.array([0.1 + 0.05j, -0.2, 0.3 - 0.1j])
    th = hc.theta(z, T)
    for k in range(3):
        factor = np.exp(-2j * np.pi * z[k] - 1j * np.pi * T[k, k])
        assert abs(hc.theta(z + T[:, k], T) - factor * th) < 1e-10 * abs(factor * th)


def test_theta_radius_guard(sig2):
    need = hc.theta_radius(sig2.data.T)
    with pytest.raises(hc.RadiusTooSmall):
        hc.theta(np.zeros(2), sig2.data.T, radius=need - 1)
    a = hc.theta([0.1, 0.2], sig2.data.T)
    b = hc.theta([0.1, 0.2], sig2.data.T, radius=need + 3)
    assert abs(a - b) < 1e-12 * abs(b)


def test_characteristics():
    assert hc.ThetaChar.riemann(3) == hc.ThetaChar((0.5,) * 3, (1.5, 1.0, 0.5))
    assert [hc.ThetaChar.riemann(g).parity() for g in (1, 2, 3, 4)] == [-1, -1, 1, 1]


# -- sigma and wp ----------------------------------------------------------------


def test_genus1_against_weierstrass(sig1):
    g2, g3, e, lam2 = weierstrass_invariants(C1)
    slope = sig1.gradient_at_zero()[0]
    for t in (0.3 + 0.2j, 0.7 - 0.4j, 1.1 + 0.1j):
        wp = sig1.wp(1, 1, [t])
        ref = wp_weierstrass(t, e) - lam2 / 3
        assert abs(wp - ref) < 1e-8 * abs(ref)
        s = sig1([t]) / slope
        ref_s = np.exp(lam2 * t * t / 6) * sigma_weierstrass(t, g2, g3)
        assert abs(s - ref_s) < 1e-8 * abs(ref_s)
        # the divisor polynomial at genus 1 is x - wp_11
        assert np.allclose(hc.wp_to_divisor(sig1, [t]), [-wp, 1])


@pytest.mark.parametrize("fixture,parity", [("sig1", -1), ("sig2", -1), ("sig3", 1)])
def test_sigma_parity(fixture, parity, request):
    sig = request.getfixturevalue(fixture)
    g = sig.genus
    rng = np.random.default_rng(2)
    # sigma vanishes at the origin in every genus (to higher order when g = 3)
    assert abs(sig(np.zeros(g))) < 1e-12
    for _ in range(3):
        t = 0.3 * (rng.normal(size=g) + 1j * rng.normal(size=g))
        assert abs(sig(-t) - parity * sig(t)) < 1e-10 * abs(sig(t))


def test_sigma_quasi_periodicity(sig2):
    rng = np.random.default_rng(9)
    for m, n in (([1, 0], [0, 0]), ([0, 1], [0, 0]), ([0, 0], [1, 0]), ([1, -1], [0, 1])):
        ell = sig2.data.lattice_vector(m, n)
        ratios = []
        for t in hc.random_points(sig2, rng, 2):
            got = np.exp(sig2.log_sigma(t + ell) - sig2.log_sigma(t))
            ratios.append(got / sig2.quasi_period(m, n, t))
        assert np.allclose(ratios, 1, atol=1e-9)


def test_wp_symmetry_and_finite_differences(sig3):
    rng = np.random.default_rng(4)
    for t in hc.random_points(sig3, rng, 3):
        w = sig3.tensors(t)
        for i in range(1, 4):
            for j in range(1, 4):
                assert abs(w(i, j) - w(j, i)) < 1e-9 * max(1, abs(w(i, j)))
        fd = sig3.wp_fd(3, 2, t)
        assert abs(fd - w(3, 2)) < 1e-6 * max(1, abs(w(3, 2)))
        assert np.allclose(w.p4, np.transpose(w.p4, (1, 0, 3, 2)))


def test_near_divisor_guard(sig1):
    with pytest.raises(hc.NearDivisor):
        sig1.tensors([0.0])


def test_wp_periodic(sig2):
    t = hc.random_points(sig2, np.random.default_rng(8), 1)[0]
    ell = sig2.data.lattice_vector([1, 0], [0, 1])
    assert abs(sig2.wp(1, 2, t + ell) - sig2.wp(1, 2, t)) < 1e-8 * abs(sig2.wp(1, 2, t))


# -- relations ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def genus3_points(sig3):
    return hc.random_points(sig3, np.random.default_rng(17), 10)


def test_fifteen_relations(sig3, genus3_points):
    for t in genus3_points:
        res = hc.relation_residuals(sig3.tensors(t), sig3.curve.lam)
        assert len(res) == 15
        assert max(abs(d) / s for d, s in res) < 1e-6


def test_halved_constants_fail(sig3, genus3_points):
    worst = np.zeros(15)
    for t in genus3_points:
        res = hc.relation_residuals(sig3.tensors(t), sig3.curve.lam, halved=True)
        worst = np.maximum(worst, [abs(d) / s for d, s in res])
    assert np.all(worst[:13] < 1e-6)
    assert worst[13] > 1e-6 and worst[14] > 1e-6


def test_kdv_relation_any_genus(sig2, sig3):
    for sig in (sig2, sig3):
        for t in hc.random_points(sig, np.random.default_rng(1), 3):
            d, s = hc.kdv_relation_residual(sig.tensors(t), sig.curve.lam, sig.genus)
            assert abs(d) / s < 1e-9


# -- divisor and Abel map --------------------------------------------------------------


def test_abel_round_trip_genus2(sig2):
    for t in hc.random_points(sig2, np.random.default_rng(12), 4):
        pts = sig2.divisor(t)
        assert len(pts) == 2
        for x, y in pts:
            assert abs(y * y - sig2.curve.h(x)) < 1e-8 * max(1, abs(y * y))
        total = sum(hc.abel_point(sig2.curve, x, y) for x, y in pts)
        assert hc.lattice_distance(sig2.data, total - t) < 1e-6


def test_divisor_coefficients_are_holomorphic(sig2):
    t = hc.random_points(sig2, np.random.default_rng(13), 1)[0]
    e = np.array([0, 1.0])
    for h in (1e-3, 5e-4):
        for step in (h, 1j * h):  # complex step: the same derivative along i e_g
            dF = (hc.wp_to_divisor(sig2, t + step * e) - hc.wp_to_divisor(sig2, t - step * e)) / (2 * step)
            w = sig2.tensors(t)
            expect = np.array([-w(2, 2, 1), -w(2, 2, 2), 0])
            assert np.max(np.abs(dF - expect)) < 1e-5 * np.max(np.abs(expect))


# -- finite-gap potentials ----------------------------------------------------------------


def test_translation_invariance(sig2):
    t0 = hc.random_points(sig2, np.random.default_rng(14), 1)[0]
    s = np.linspace(0, 0.5, 6)
    delta = 0.137
    a = hc.finite_gap_u(sig2, s, t0 + delta * np.array([0, 1.0]))
    b = hc.finite_gap_u(sig2, s + delta, t0)
    assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(b))


def test_genus1_potential_is_real_and_periodic(sig1):
    period = abs(sig1.data.omega1[0, 0])
    s = np.linspace(0, period, 9)
    u = hc.finite_gap_u(sig1, s, hc.real_potential_shift(sig1))
    assert np.max(np.abs(u.imag)) < 1e-10
    assert abs(u[0] - u[-1]) < 1e-10


def test_kdv_finite_difference_convergence(sig2):
    t = hc.random_points(sig2, np.random.default_rng(3), 1)[0]
    res = [hc.kdv_fd_residual(sig2, t, h) for h in (0.01, 0.005, 0.0025)]
    assert res[-1] < 1e-5
    assert res[0] / res[1] > 8  # fourth-order stencils; the last halving meets roundoff
    assert res[2] < res[1]
    with pytest.raises(ValueError):
        hc.kdv_fd_residual(hc.Sigma(hc.HECurve(C1)), [0.3], 0.01)
