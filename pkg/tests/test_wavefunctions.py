import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pilotwave.errors import DomainError, NodeError
from pilotwave.wavefunctions import (
    Configuration, InterferometerParams, OscillatorParams, OscillatorProduct, SphericalBosonic,
    SphericalNonOverlap, Window, born_density, eval_psi, grad_phase, normalize_numeric, phase,
)

OSC = OscillatorProduct(OscillatorParams(omega1=1.0, omega2=math.sqrt(2.0), a1=1.3, a2=0.7))
IP = InterferometerParams()


def slit_r(x, dy):
    return math.hypot(x, dy)


def random_far_points(rng, n, params=IP):
    # points comfortably away from both slits
    q = np.column_stack([rng.uniform(0.2, 30.0, n), rng.uniform(-12, 12, n),
                         rng.uniform(0.2, 30.0, n), rng.uniform(-12, 12, n)])
    return q


class TestParams:
    def test_from_coupling(self):
        p = OscillatorParams.from_coupling(1.5)
        assert p.omega1 == 1.0 and p.omega2 == pytest.approx(2.0)

    @pytest.mark.parametrize("kw", [{"omega1": 0}, {"a1": -1}, {"hbar": 0}])
    def test_oscillator_invariants(self, kw):
        with pytest.raises(ValueError):
            OscillatorParams(**kw)

    def test_interferometer_defaults(self):
        assert IP.epsilon_r == pytest.approx(1e-3 * IP.a)
        assert IP.v == IP.hbar * IP.k / IP.m

    def test_epsilon_must_be_small(self):
        with pytest.raises(ValueError):
            InterferometerParams(epsilon_r=0.5)

    def test_configuration_finite(self):
        with pytest.raises(DomainError):
            Configuration(0.0, (1.0, math.nan))


class TestOscillator:
    def test_peak_density(self):
        p = OSC.params
        c = Configuration(0.0, (p.a1, -p.a2))
        expected = math.sqrt(p.omega1 / (math.pi * p.hbar)) * math.sqrt(p.omega2 / (math.pi * p.hbar))
        assert born_density(OSC, c) == pytest.approx(expected, rel=1e-14)
        assert abs(eval_psi(OSC, c)) ** 2 == pytest.approx(expected, rel=1e-14)

    def test_decay(self):
        assert born_density(OSC, Configuration(0.0, (40.0, 0.0))) < 1e-300

    def test_phase_zero_at_t0(self):
        assert phase(OSC, Configuration(0.0, (0.4, -2.0))) == 0.0

    @pytest.mark.parametrize("t", [0.0, 0.3, 2.0, 7.7])
    def test_grad_phase_closed_form(self, t):
        p = OSC.params
        g = grad_phase(OSC, Configuration(t, (0.1, 0.2)))
        assert g[0] == pytest.approx(-p.omega1 * p.a1 * math.sin(p.omega1 * t), abs=1e-15)
        assert g[1] == pytest.approx(p.omega2 * p.a2 * math.sin(p.omega2 * t), abs=1e-15)

    def test_grad_phase_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        for t in (0.4, 1.9, 5.2):
            q = rng.normal(size=(200, 2))
            g = OSC.grad_phase(t, q)
            for i in range(2):
                hstep = math.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(q[:, i]))
                dq = np.zeros_like(q)
                dq[:, i] = hstep
                fd = (OSC.phase(t, q + dq) - OSC.phase(t, q - dq)) / (2 * hstep)
                assert np.allclose(fd, g[:, i], rtol=1e-6, atol=1e-7)

    def test_marginal_is_gaussian(self):
        # integrate the Born density over Q2 and compare with the Q1 Gaussian
        p, t = OSC.params, 0.8
        q2 = np.linspace(-12, 12, 4001)
        for q1 in (-1.0, 0.2, 1.5):
            dens = OSC.born_density(t, np.column_stack([np.full_like(q2, q1), q2]))
            marg = np.trapezoid(dens, q2) if hasattr(np, "trapezoid") else np.trapz(dens, q2)
            mu, s = p.a1 * math.cos(p.omega1 * t), p.sigma1
            expected = math.exp(-0.5 * ((q1 - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))
            assert marg == pytest.approx(expected, rel=1e-8)

    def test_normalization(self):
        assert normalize_numeric(OSC) == pytest.approx(1.0, abs=1e-4)

    def test_psi_phase_consistency(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=(50, 2))
        t = 1.1
        psi = OSC.psi(t, q)
        assert np.allclose(np.angle(psi), np.angle(np.exp(1j * OSC.phase(t, q))), atol=1e-12)


class TestNonOverlap:
    model = SphericalNonOverlap(IP)

    def test_modulus_equal_radii(self):
        R = 3.0
        # r1A = r2B = R: particle 1 straight out of slit A, particle 2 out of slit B
        c = Configuration(0.0, (R, IP.a, R, -IP.a))
        assert abs(eval_psi(self.model, c)) == pytest.approx(1.0 / (2 * math.pi * R * R), rel=1e-14)
        assert phase(self.model, c) == pytest.approx(2 * IP.hbar * IP.k * R, rel=1e-14)

    def test_phase_depends_on_sum_of_radii(self):
        p = InterferometerParams(k=1.0)
        m = SphericalNonOverlap(p)
        c1 = Configuration(0.0, (3.0, p.a, 5.0, -p.a))
        c2 = Configuration(0.0, (4.0, p.a, 4.0, -p.a))
        assert phase(m, c1) == pytest.approx(phase(m, c2), rel=1e-14)

    def test_velocity_example(self):
        p = InterferometerParams(k=1.0, hbar=1.0, m=1.0)
        m = SphericalNonOverlap(p)
        g = grad_phase(m, Configuration(0.0, (3.0, p.a + 4.0, 2.0, -5.0)))
        assert g[0] / p.m == pytest.approx(0.6, rel=1e-14)
        assert g[1] / p.m == pytest.approx(0.8, rel=1e-14)

    def test_speed_invariant(self):
        q = random_far_points(np.random.default_rng(3), 1000)
        v = self.model.velocity(0.0, q)
        s1 = np.hypot(v[:, 0], v[:, 1])
        s2 = np.hypot(v[:, 2], v[:, 3])
        assert np.allclose(s1, IP.v, rtol=1e-14) and np.allclose(s2, IP.v, rtol=1e-14)

    def test_reflection_with_interchange(self):
        q = random_far_points(np.random.default_rng(4), 200)
        mirrored = np.column_stack([q[:, 2], -q[:, 3], q[:, 0], -q[:, 1]])
        assert np.allclose(self.model.psi(0.3, q), self.model.psi(0.3, mirrored), rtol=1e-13, atol=0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            eval_psi(self.model, Configuration(0.0, (1e-4, IP.a, 3.0, 0.0)))


class TestBosonic:
    model = SphericalBosonic(IP)

    def test_exchange_symmetry_exact(self):
        q = random_far_points(np.random.default_rng(5), 1000)
        swapped = q[:, [2, 3, 0, 1]]
        assert np.array_equal(self.model.psi(0.7, q), self.model.psi(0.7, swapped))

    def test_reflection_with_interchange(self):
        q = random_far_points(np.random.default_rng(6), 1000)
        mirrored = np.column_stack([q[:, 2], -q[:, 3], q[:, 0], -q[:, 1]])
        assert np.allclose(self.model.psi(0.0, q), self.model.psi(0.0, mirrored), rtol=1e-12, atol=0)

    def test_y_velocities_vanish_on_axis(self):
        rng = np.random.default_rng(7)
        q = np.column_stack([rng.uniform(0.5, 20, 100), np.zeros(100), rng.uniform(0.5, 20, 100), np.zeros(100)])
        v, bad = self.model.velocity_masked(0.0, q)
        ok = ~bad
        assert ok.sum() > 90
        assert np.all(v[ok, 1] == 0.0) and np.all(v[ok, 3] == 0.0)

    def test_y_velocities_odd_under_reflection(self):
        q = random_far_points(np.random.default_rng(8), 300)
        v = self.model.velocity(0.0, q)
        vr = self.model.velocity(0.0, q * np.array([1, -1, 1, -1]))
        assert np.allclose(vr[:, [1, 3]], -v[:, [1, 3]], rtol=1e-9, atol=1e-9)
        assert np.allclose(vr[:, [0, 2]], v[:, [0, 2]], rtol=1e-9, atol=1e-9)

    def test_gradient_matches_im_log_derivative(self):
        # independent route: complex-step-free central differences of psi itself
        q = random_far_points(np.random.default_rng(9), 200)
        g = self.model.grad_phase(0.0, q)
        for i in range(4):
            hstep = 1e-6
            dq = np.zeros_like(q)
            dq[:, i] = hstep
            dpsi = (self.model.psi(0.0, q + dq) - self.model.psi(0.0, q - dq)) / (2 * hstep)
            expected = IP.hbar * np.imag(dpsi / self.model.psi(0.0, q))
            assert np.allclose(g[:, i], expected, rtol=1e-5, atol=1e-5)

    def test_gradient_consistency_10k_points(self):
        # central differences of the phase, relative error < 1e-6. The step
        # follows the sqrt-epsilon rule with the configuration size |q| as the
        # typical magnitude: the phase is ~k|q| radians, so a step scaled by a
        # small coordinate alone would be dominated by phase round-off.
        q = random_far_points(np.random.default_rng(10), 10_000)
        g = self.model.grad_phase(0.0, q)
        size = np.linalg.norm(q, axis=1)
        worst = 0.0
        for i in range(4):
            hstep = math.sqrt(np.finfo(float).eps) * np.maximum(1.0, size)
            dq = np.zeros_like(q)
            dq[:, i] = hstep
            # phase differences taken on the continuous branch around each point
            dS = np.angle(self.model.psi(0.0, q + dq) / self.model.psi(0.0, q - dq)) * IP.hbar
            fd = dS / (2 * hstep)
            scale = np.maximum(np.abs(g[:, i]), IP.hbar * IP.k)
            worst = max(worst, float(np.max(np.abs(fd - g[:, i]) / scale)))
        assert worst < 1e-6

    def test_node_detected(self):
        # solve 1 + rho = 0 for (x2, y2) with particle 1 fixed: an exact node
        from scipy.optimize import fsolve

        m = self.model
        x1, y1 = 5.0, 0.8

        def resid(v):
            _, rho = m._terms(np.array([[x1, y1, v[0], v[1]]]))
            return [1.0 + rho[0].real, rho[0].imag]

        best = None
        for x2 in np.linspace(3.0, 7.0, 9):
            for y2 in np.linspace(-2.0, 2.0, 9):
                sol, info, ier, _ = fsolve(resid, [x2, y2], full_output=True, xtol=1e-15)
                if ier == 1:
                    best = sol
                    break
            if best is not None:
                break
        assert best is not None
        q = np.array([[x1, y1, best[0], best[1]]])
        _, bad = m.velocity_masked(0.0, q)
        assert bad[0]
        with pytest.raises(NodeError):
            m.grad_phase(0.0, q)
        # Born density vanishes there relative to a single term's density
        single = 1.0 / (slit_r(x1, y1 - IP.a) * slit_r(best[0], best[1] + IP.a)) ** 2
        assert m.born_density(0.0, q)[0] < 1e-20 * single

    def test_phase_raises_at_node(self, monkeypatch):
        m = self.model
        monkeypatch.setattr(type(m), "_nodes", lambda self, rho: np.ones(np.shape(rho), dtype=bool))
        with pytest.raises(NodeError):
            phase(m, Configuration(0.0, (3.0, 1.0, 3.0, -1.0)))
        with pytest.raises(NodeError):
            m.velocity(0.0, np.array([[3.0, 1.0, 3.0, -1.0]]))

    def test_scaling_psi_leaves_gradient(self):
        q = random_far_points(np.random.default_rng(11), 50)
        doubled = SphericalBosonic(IP, norm=0.5)
        assert abs(doubled.psi(0.0, q[0])) == pytest.approx(2 * abs(self.model.psi(0.0, q[0])))
        assert np.array_equal(doubled.grad_phase(0.0, q), self.model.grad_phase(0.0, q))


@pytest.fixture(scope="module")
def small_window():
    return Window(x_max=3.0, y_max=3.0)


class TestNormalization:
    def test_bosonic_normalization_against_brute_force(self, small_window):
        # oracle: scipy adaptive quadrature of the single-particle integrals in Cartesian form
        from scipy import integrate

        p = InterferometerParams(k=2.0, epsilon_r=0.05)
        a, k, eps = p.a, p.k, p.epsilon_r
        W = small_window

        def excluded(x, y):
            return math.hypot(x, y - a) < eps or math.hypot(x, y + a) < eps

        def single(fn):
            def g(y, x):
                return 0.0 if excluded(x, y) else fn(x, y)
            opts = {"limit": 200, "epsrel": 1e-7, "epsabs": 0}
            val = 0.0
            # split at the slit ordinates so the peaks sit on panel edges
            for lo, hi in ((-W.y_max, -a), (-a, 0.0), (0.0, a), (a, W.y_max)):
                val += integrate.nquad(g, [[lo, hi], [0.0, W.x_max]], opts=[opts, opts])[0]
            return val

        IA = single(lambda x, y: 1.0 / (x * x + (y - a) ** 2))
        IB = single(lambda x, y: 1.0 / (x * x + (y + a) ** 2))
        C = single(lambda x, y: math.cos(k * (math.hypot(x, y - a) - math.hypot(x, y + a)))
                   / (math.hypot(x, y - a) * math.hypot(x, y + a)))
        expected = math.sqrt(2 * IA * IB + 2 * C * C)
        assert normalize_numeric(SphericalBosonic(p), W, rtol=1e-9) == pytest.approx(expected, rel=1e-4)

    def test_far_window_cross_term_small(self):
        # window far off-axis: the cross term is small, N^2 ~ sum of two non-overlap norms
        p = InterferometerParams(k=20.0, epsilon_r=0.01)
        W = Window(x_max=1.0, y_max=1.5)
        n_bos = normalize_numeric(SphericalBosonic(p), W, rtol=1e-8)
        n_non = normalize_numeric(SphericalNonOverlap(p), W, rtol=1e-8)
        # non-overlap carries the 1/(2 pi) prefactor
        sum_non = 2 * (2 * math.pi * n_non) ** 2
        assert n_bos**2 == pytest.approx(sum_non, rel=0.02)

    def test_window_required(self):
        with pytest.raises(DomainError):
            normalize_numeric(SphericalBosonic(IP))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 25.0), st.floats(-10, 10), st.floats(0.05, 25.0), st.floats(-10, 10))
def test_bosonic_density_nonnegative_and_symmetric(x1, y1, x2, y2):
    m = SphericalBosonic(IP)
    q = np.array([x1, y1, x2, y2])
    try:
        d = m.born_density(0.0, q)
    except DomainError:
        return
    assert d >= 0
    assert m.psi(0.0, q) == m.psi(0.0, q[[2, 3, 0, 1]])
