import math

import numpy as np
import pytest
from scipy import integrate, stats

from morphguard.embeddings import angles_between
from morphguard.errors import InvalidKappa, InvalidParameter
from morphguard.simulator import (
    SimulationParams,
    identity_rng,
    sample_kappa,
    sample_uniform_direction,
    sample_vmf,
    simulate,
    simulate_population,
)


def truncated_normal_mean(mu, sigma, floor):
    """Mean of N(mu, sigma) conditioned on >= floor, by quadrature."""
    pdf = lambda x: stats.norm.pdf(x, mu, sigma)
    mass, _ = integrate.quad(pdf, floor, np.inf)
    first, _ = integrate.quad(lambda x: x * pdf(x), floor, np.inf)
    return first / mass


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(dimension=1),
            dict(n_identities=1),
            dict(samples_per_identity=0),
            dict(kappa_floor=0.0),
            dict(kappa_mu=1.0, kappa_floor=1.0),
            dict(kappa_sigma=-1.0),
            dict(seed=-1),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(InvalidParameter):
            SimulationParams(**kw)


class TestUniformDirection:
    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        for d in (2, 3, 8, 128):
            assert abs(np.linalg.norm(sample_uniform_direction(d, rng)) - 1) <= 1e-9

    def test_mean_near_zero(self):
        rng = np.random.default_rng(1)
        draws = np.array([sample_uniform_direction(8, rng) for _ in range(100_000)])
        assert np.linalg.norm(draws.mean(axis=0)) < 0.02

    def test_pairwise_angles_concentrate_at_right_angle(self):
        rng = np.random.default_rng(2)
        draws = np.array([sample_uniform_direction(128, rng) for _ in range(10_000)])
        a, b = draws[0::2], draws[1::2]
        theta = np.arccos(np.clip(np.sum(a * b, axis=1), -1, 1))
        assert abs(theta.mean() - math.pi / 2) < 0.05


class TestKappa:
    def test_degenerate(self):
        rng = np.random.default_rng(0)
        assert {sample_kappa(200.0, 0.0, 1.0, rng) for _ in range(10)} == {200.0}

    def test_truncation(self):
        rng = np.random.default_rng(0)
        draws = [sample_kappa(3.0, 5.0, 1.0, rng) for _ in range(5000)]
        assert min(draws) >= 1.0

    def test_mean_matches_quadrature(self):
        rng = np.random.default_rng(5)
        draws = np.array([sample_kappa(200.0, 60.0, 1.0, rng) for _ in range(100_000)])
        assert abs(draws.mean() - truncated_normal_mean(200.0, 60.0, 1.0)) < 1.0

    def test_heavy_truncation_mean_matches_quadrature(self):
        # a floor that actually bites checks the redraw logic, not just N(mu, sigma)
        rng = np.random.default_rng(6)
        draws = np.array([sample_kappa(5.0, 10.0, 1.0, rng) for _ in range(100_000)])
        assert abs(draws.mean() - truncated_normal_mean(5.0, 10.0, 1.0)) < 0.1


class TestVmf:
    def test_invalid_kappa(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidKappa):
            sample_vmf(np.eye(4)[0], 0.0, rng)

    def test_single_draw_shape(self):
        rng = np.random.default_rng(0)
        x = sample_vmf(np.eye(5)[2], 10.0, rng)
        assert x.shape == (5,) and abs(np.linalg.norm(x) - 1) <= 1e-9

    def test_extreme_concentration(self):
        # expected deviation is ~sqrt((d-1)/kappa); d=16 keeps all draws < 1e-3
        rng = np.random.default_rng(3)
        mu = sample_uniform_direction(16, rng)
        x = sample_vmf(mu, 1e8, rng, size=1000)
        assert angles_between(x, mu[None, :]).max() < 1e-3

    def test_deviation_decreases_with_kappa(self):
        rng = np.random.default_rng(4)
        mu = sample_uniform_direction(128, rng)
        means = [angles_between(sample_vmf(mu, k, rng, size=10_000), mu[None, :]).mean() for k in (50, 200, 800)]
        assert means[0] > means[1] > means[2]

    def test_mean_direction(self):
        rng = np.random.default_rng(8)
        mu = sample_uniform_direction(16, rng)
        m = sample_vmf(mu, 200.0, rng, size=100_000).mean(axis=0)
        assert angles_between(m, mu)[0, 0] < 0.01

    def test_circle_matches_von_mises_cdf(self):
        # on the circle the vMF is the von Mises distribution
        rng = np.random.default_rng(9)
        x = sample_vmf(np.array([1.0, 0.0]), 3.0, rng, size=20_000)
        phi = np.arctan2(x[:, 1], x[:, 0])
        assert stats.kstest(phi, stats.vonmises(3.0).cdf).pvalue > 1e-3

    def test_sphere_matches_closed_form_mean_cosine(self):
        # d=3: E[cos] = coth(kappa) - 1/kappa
        rng = np.random.default_rng(10)
        k = 5.0
        x = sample_vmf(np.array([0.0, 0.0, 1.0]), k, rng, size=100_000)
        assert abs(x[:, 2].mean() - (1 / math.tanh(k) - 1 / k)) < 0.005


class TestPopulation:
    def test_counts(self, fig3_middle):
        assert len(fig3_middle) == 6250
        assert len(fig3_middle.subjects) == 250
        assert (fig3_middle.roles == "enroll").sum() == 250

    def test_unit_norm(self, fig3_middle):
        assert np.max(np.abs(np.linalg.norm(fig3_middle.embeddings, axis=1) - 1)) <= 1e-9

    def test_deterministic(self):
        p = SimulationParams(16, 20, 5, 100.0, 20.0, 1.0, 99)
        a, b = simulate_population(p), simulate_population(p)
        assert np.array_equal(a.embeddings, b.embeddings)
        assert list(a.subject_ids) == list(b.subject_ids)

    def test_independent_of_thread_count(self, monkeypatch):
        p = SimulationParams(16, 30, 4, 100.0, 20.0, 1.0, 5)
        monkeypatch.setenv("MORPHGUARD_THREADS", "1")
        serial = simulate_population(p)
        monkeypatch.setenv("MORPHGUARD_THREADS", "8")
        monkeypatch.setattr("os.cpu_count", lambda: 8)
        threaded = simulate_population(p)
        assert np.array_equal(serial.embeddings, threaded.embeddings)

    def test_identity_substreams_are_independent_of_n(self):
        # identity i gets the same cluster whatever the population size
        small, c_small = simulate(SimulationParams(8, 3, 2, 50.0, 5.0, 1.0, 1))
        big, c_big = simulate(SimulationParams(8, 10, 2, 50.0, 5.0, 1.0, 1))
        assert np.array_equal(c_small[2].mean_direction, c_big[2].mean_direction)
        assert c_small[2].kappa == c_big[2].kappa
        assert np.array_equal(identity_rng(1, 2).random(3), identity_rng(1, 2).random(3))

    def test_nonmated_centred_at_right_angle(self, fig3_middle):
        enroll = fig3_middle.embeddings[fig3_middle.roles == "enroll"]
        theta = angles_between(enroll, enroll)[np.triu_indices(250, 1)]
        assert abs(theta.mean() - math.pi / 2) < 0.05

    def test_within_identity_smaller_than_across(self):
        ds, _ = simulate(SimulationParams(32, 40, 6, 100.0, 10.0, 1.0, 12))
        allx = ds.embeddings
        for s in ds.subjects:
            ix = ds.sample_indices(s)
            x = allx[ix]
            within = angles_between(x, x)[np.triu_indices(len(ix), 1)].mean()
            others = np.setdiff1d(np.arange(len(ds)), ix)
            across = angles_between(x, allx[others]).mean()
            assert within < across

    def test_mated_angle_decreases_with_mu(self):
        means = []
        for mu, sd in ((200, 60), (250, 50), (500, 25)):
            ds = simulate_population(SimulationParams(64, 40, 10, mu, sd, 1.0, 21))
            vals = []
            for s in ds.subjects:
                x = ds.samples(s)
                vals.append(angles_between(x, x)[np.triu_indices(10, 1)])
            means.append(np.concatenate(vals).mean())
        assert means[0] > means[1] > means[2]
