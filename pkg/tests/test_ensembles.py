import math

import numpy as np
import pytest
from scipy import stats

from pilotwave.dynamics import COMPLETED, integrate
from pilotwave.ensembles import (
    TIME_ENSEMBLE, EnsembleSpec, batch_manifest, evolve_batch, launch_pair, pair_with_separation,
    round_generator, sample_initial,
)
from pilotwave.errors import SamplingError
from pilotwave.wavefunctions import (
    InterferometerParams, OscillatorParams, OscillatorProduct, SphericalBosonic, SphericalNonOverlap, Window,
)

P = OscillatorParams(omega1=1.0, omega2=2.0, a1=1.0, a2=1.0)
OSC = OscillatorProduct(P)
IP = InterferometerParams()


class TestSpec:
    @pytest.mark.parametrize("kw", [{"count": 0}, {"delta0": -1}, {"kind": "other"}, {"seed": -1}, {"count": 1.5}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EnsembleSpec(**kw)


class TestOscillatorSampling:
    def test_mean_of_q1(self):
        n = 100_000
        b = sample_initial(OSC, EnsembleSpec(count=n, seed=3))
        assert abs(b.q[:, 0].mean() - P.a1) < 3 * P.sigma1 / math.sqrt(n)
        assert abs(b.q[:, 1].mean() + P.a2) < 3 * P.sigma2 / math.sqrt(n)

    def test_marginal_ks(self):
        b = sample_initial(OSC, EnsembleSpec(count=20_000, seed=4))
        d1 = stats.kstest(b.q[:, 0], "norm", args=(P.a1, P.sigma1)).statistic
        d2 = stats.kstest(b.q[:, 1], "norm", args=(-P.a2, P.sigma2)).statistic
        assert d1 < 1.63 / math.sqrt(20_000) and d2 < 1.63 / math.sqrt(20_000)

    def test_positive_density(self):
        b = sample_initial(OSC, EnsembleSpec(count=1000, seed=5))
        assert np.all(OSC.born_density(0.0, b.q) > 0)

    def test_acceptance_rate(self):
        b = sample_initial(OSC, EnsembleSpec(count=20_000, seed=6))
        # envelope 1.25 sigma per axis accepts 1 / 1.25^2 = 0.64 of proposals
        assert b.acceptance_rate == pytest.approx(0.64, abs=0.01)

    def test_determinism_and_prefix_stability(self):
        a = sample_initial(OSC, EnsembleSpec(count=500, seed=11))
        b = sample_initial(OSC, EnsembleSpec(count=500, seed=11))
        c = sample_initial(OSC, EnsembleSpec(count=200, seed=11))
        d = sample_initial(OSC, EnsembleSpec(count=500, seed=12))
        assert np.array_equal(a.q, b.q) and a.provenance == b.provenance
        assert np.array_equal(a.q[:200], c.q)
        assert not np.array_equal(a.q, d.q)

    def test_window_too_small(self):
        w = Window(xlim=(50.0, 51.0), ylim=(50.0, 51.0))
        with pytest.raises(SamplingError):
            sample_initial(OSC, EnsembleSpec(count=2, seed=0, window=w))

    def test_round_generator_independent_streams(self):
        a = round_generator(1, 0, 0).random(4)
        b = round_generator(1, 0, 1).random(4)
        c = round_generator(1, 1, 0).random(4)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestInterferometerSampling:
    def test_mirror_pairs(self):
        b = sample_initial(SphericalBosonic(IP), EnsembleSpec(kind=TIME_ENSEMBLE, count=1000, seed=1))
        assert np.array_equal(b.q[:, 0], b.q[:, 2])
        assert np.array_equal(b.q[:, 1], -b.q[:, 3])
        assert b.t0 == pytest.approx(IP.epsilon_r / IP.v)

    def test_on_launch_circles(self):
        b = sample_initial(SphericalNonOverlap(IP),
                           EnsembleSpec(kind=TIME_ENSEMBLE, count=1000, seed=2, delta0=3e-4, sigma0=3e-4))
        r1 = np.hypot(b.q[:, 0], b.q[:, 1] - IP.a)
        r2 = np.hypot(b.q[:, 2], b.q[:, 3] + IP.a)
        assert np.allclose(r1, IP.epsilon_r, rtol=1e-12) and np.allclose(r2, IP.epsilon_r, rtol=1e-12)
        assert np.all(b.q[:, 0] > 0) and np.all(b.q[:, 2] > 0)
        assert np.allclose(b.delta, b.q[:, 0] - b.q[:, 2])

    def test_uniform_launch_angle(self):
        b = sample_initial(SphericalBosonic(IP), EnsembleSpec(kind=TIME_ENSEMBLE, count=20_000, seed=3))
        theta = np.arctan2(b.q[:, 1] - IP.a, b.q[:, 0])
        assert stats.kstest(theta, "uniform", args=(-math.pi / 2, math.pi)).statistic < 1.63 / math.sqrt(20_000)

    def test_offsets_prefix_stable(self):
        s = dict(kind=TIME_ENSEMBLE, seed=9, delta0=2e-4, sigma0=1e-4)
        a = sample_initial(SphericalNonOverlap(IP), EnsembleSpec(count=300, **s))
        b = sample_initial(SphericalNonOverlap(IP), EnsembleSpec(count=100, **s))
        assert np.array_equal(a.q[:100], b.q)

    def test_pair_with_separation(self):
        p = InterferometerParams(epsilon_r=1e-2)
        q = pair_with_separation(p, 0.5, 1e-3)
        assert q[0] - q[2] == pytest.approx(1e-3, rel=1e-12)
        assert math.hypot(q[2], q[3] + p.a) == pytest.approx(p.epsilon_r, rel=1e-12)
        with pytest.raises(ValueError):
            pair_with_separation(p, 0.0, -1e-3)

    def test_launch_zero_offsets_exact_mirror(self):
        q = launch_pair(IP, np.linspace(-1.5, 1.5, 7))
        assert np.array_equal(q[:, 0], q[:, 2]) and np.array_equal(q[:, 1], -q[:, 3])


class TestEvolve:
    def test_period_return(self):
        b = sample_initial(OSC, EnsembleSpec(count=200, seed=7))
        trajs = evolve_batch(OSC, b, 1e-3, 2 * math.pi / P.omega1)
        err = max(np.max(np.abs(tr.q[-1] - tr.q[0])) for tr in trajs)
        assert err < 1e-6

    def test_zero_horizon(self):
        b = sample_initial(OSC, EnsembleSpec(count=5, seed=7))
        trajs = evolve_batch(OSC, b, 0.01, 0.0)
        assert all(len(tr) == 1 for tr in trajs)

    def test_single_member_matches_integrate(self):
        b = sample_initial(OSC, EnsembleSpec(count=1, seed=8))
        tr = evolve_batch(OSC, b, 0.01, 2.0)[0]
        ref = integrate(OSC, b.members[0], 0.01, 2.0)
        assert np.array_equal(tr.q, ref.q) and np.array_equal(tr.times, ref.times)

    def test_workers_do_not_change_results(self):
        m = SphericalBosonic(IP)
        b = sample_initial(m, EnsembleSpec(kind=TIME_ENSEMBLE, count=12, seed=2))
        serial = evolve_batch(m, b, 5e-3, 0.5)
        parallel = evolve_batch(m, b, 5e-3, 0.5, workers=3)
        for s, p in zip(serial, parallel):
            assert np.array_equal(s.q, p.q) and s.status == p.status

    def test_manifest(self):
        b = sample_initial(OSC, EnsembleSpec(count=50, seed=1))
        trajs = evolve_batch(OSC, b, 0.01, 1.0)
        man = batch_manifest(OSC, b, [t.status for t in trajs])
        assert man["status_counts"][COMPLETED] == 50
        assert man["spec"]["seed"] == 1 and 0 < man["acceptance_rate"] <= 1
