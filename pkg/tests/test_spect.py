"""Tomography test-bed: projector geometry, simulation, MAP, plug-in posterior."""

import numpy as np
import pytest
import scipy.sparse as sp

from bvmlimits.boundary import classify, local_quadratic
from bvmlimits.exceptions import DomainError, GeometryError
from bvmlimits.families import flat_prior
from bvmlimits.spect import (SpectGeometry, SpectInstance, SpectPosterior,
                             _halfplane_area, build_system_matrix, default_prior,
                             disk_phantom, map_estimate, plugin_approx,
                             plugin_logdensity, plugin_log_normalizer, plugin_sample,
                             simulate)


@pytest.fixture(scope="module")
def small_setup():
    g = SpectGeometry(8, 8, n_angles=12, n_bins=12, exposure=1000.0)
    A = build_system_matrix(g)
    return g, A, disk_phantom(g)


class TestProjector:
    def test_single_pixel_single_ray(self):
        g = SpectGeometry(1, 1, pixel_size=2.5, n_angles=1, n_bins=1)
        A = build_system_matrix(g).toarray()
        assert A.shape == (1, 1)
        assert A[0, 0] == pytest.approx(2.5, rel=1e-12)

    def test_halfplane_area_against_mc_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a, b = rng.normal(size=2)
            c = 0.5 * rng.normal()
            x0, y0, h = rng.normal(), rng.normal(), abs(rng.normal()) + 0.3
            pts = rng.uniform(size=(200_000, 2))
            mc = float((a * (x0 + pts[:, 0] * h) + b * (y0 + pts[:, 1] * h) <= c).mean()) * h * h
            exact = _halfplane_area(np.array([x0]), np.array([y0]), h, a, b, c)[0]
            assert exact == pytest.approx(mc, abs=4 * h * h / np.sqrt(200_000))

    def test_every_pixel_seen_in_default_config(self):
        g = SpectGeometry(16, 16, n_angles=32, n_bins=24)
        A = build_system_matrix(g)
        colsum = np.asarray(A.sum(axis=0)).ravel()
        assert np.all(colsum > 0)

    def test_quarter_turn_symmetry(self):
        N, na, nb = 6, 8, 10
        g = SpectGeometry(N, N, n_angles=na, n_bins=nb)
        A = build_system_matrix(g).toarray()
        pix = np.empty(N * N, dtype=int)
        for r in range(N):
            for c in range(N):
                pix[r * N + c] = (N - 1 - c) * N + r  # quarter-turn image rotation
        src = np.empty(na * nb, dtype=int)
        for k in range(na):
            for i in range(nb):
                if k >= na // 2:
                    src[k * nb + i] = (k - na // 2) * nb + i
                else:
                    src[k * nb + i] = (k + na // 2) * nb + (nb - 1 - i)
        assert np.allclose(A[:, pix], A[src, :], atol=1e-12)

    def test_attenuation_damps_far_pixels(self):
        g0 = SpectGeometry(4, 4, n_angles=2, n_bins=4, attenuation=0.0)
        g1 = SpectGeometry(4, 4, n_angles=2, n_bins=4, attenuation=0.4)
        A0 = build_system_matrix(g0).toarray()
        A1 = build_system_matrix(g1).toarray()
        assert np.all(A1 <= A0 + 1e-12)
        assert A1.sum() < A0.sum()

    def test_invalid_geometry(self):
        with pytest.raises(GeometryError):
            SpectGeometry(0, 4)
        with pytest.raises(GeometryError):
            SpectGeometry(4, 4, attenuation=-1.0)

    def test_threaded_build_matches(self, small_setup):
        g, A, _ = small_setup
        B = build_system_matrix(g, n_jobs=4)
        assert (A != B).nnz == 0


class TestSimulate:
    def test_zero_intensity_gives_zero_counts(self, small_setup):
        g, A, _ = small_setup
        inst = simulate(g, np.zeros(g.p), np.random.default_rng(1), A=A)
        assert np.all(inst.counts == 0)

    def test_zero_mean_rays_never_count(self, small_setup):
        g, A, ph = small_setup
        y_star = A @ ph
        dark = np.flatnonzero(y_star == 0)
        assert dark.size > 0
        for seed in range(5):
            inst = simulate(g, ph, np.random.default_rng(seed), A=A)
            assert np.all(inst.counts[dark] == 0)

    def test_poisson_mean(self):
        g = SpectGeometry(2, 2, n_angles=2, n_bins=2, exposure=50.0)
        A = build_system_matrix(g)
        theta = np.array([0.5, 1.0, 0.0, 2.0])
        lam = g.exposure * (A @ theta)
        reps = 10_000
        rng = np.random.default_rng(2)
        tot = np.zeros(g.n)
        for _ in range(reps):
            tot += rng.poisson(lam)
        emp = tot / reps
        assert np.all(np.abs(emp - lam) <= 4 * np.sqrt(np.maximum(lam, 1e-12) / reps) + 1e-9)

    def test_save_load_round_trip(self, small_setup, tmp_path):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(3), A=A)
        inst.save(tmp_path / "inst")
        back = SpectInstance.load(tmp_path / "inst")
        assert (back.A != inst.A).nnz == 0
        assert np.array_equal(back.counts, inst.counts)
        assert back.geometry == inst.geometry
        assert np.array_equal(back.theta_true, ph)


class TestMapEstimate:
    def test_noise_free_recovery(self, small_setup):
        g, A, ph = small_setup
        inst = SpectInstance(g, A, g.exposure * (A @ ph), prior=flat_prior())
        theta = map_estimate(inst, tol=1e-8, max_iter=4000)
        assert np.max(np.abs(theta - ph)) < 1e-6

    def test_all_zero_data_maps_to_zero(self, small_setup):
        g, A, _ = small_setup
        inst = SpectInstance(g, A, np.zeros(g.n), prior=flat_prior())
        assert np.max(map_estimate(inst, tol=1e-10)) == 0.0

    def test_kkt_conditions(self, small_setup):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(4), A=A)
        tol = 1e-7
        theta = map_estimate(inst, tol=tol, max_iter=4000)
        from bvmlimits.spect import _kernel_grad
        grad = _kernel_grad(inst.model(), inst.prior, theta)
        assert np.all(theta >= 0)
        assert np.all(np.abs(grad[theta > 0]) <= tol)
        assert np.all(grad[theta == 0] <= tol)

    def test_em_matches_projected_gradient_flat_prior(self, small_setup):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(5), A=A, prior=flat_prior())
        pg = map_estimate(inst, tol=1e-7, max_iter=4000)
        em = map_estimate(inst, tol=1e-5, max_iter=150_000, method="em")
        assert np.max(np.abs(pg - em)) < 1e-6

    def test_em_rejects_nonflat_prior(self, small_setup):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(6), A=A)
        with pytest.raises(DomainError):
            map_estimate(inst, method="em")


class TestPlugin:
    def test_unseen_region_is_the_nonregular_set(self):
        # two pixels, second never hit by the only positive-count ray
        g = SpectGeometry(1, 2, n_angles=1, n_bins=2, exposure=100.0)
        A = build_system_matrix(g)
        theta = np.array([2.0, 0.0])
        inst = SpectInstance(g, A, g.exposure * (A @ theta), prior=flat_prior())
        pa = plugin_approx(inst, theta)
        assert list(pa.nonregular) == [1]
        assert list(pa.zero_rays) == [1]

    def test_no_zero_counts_means_empty_nonregular(self):
        # power-of-two exposure keeps counts/exposure bitwise equal to A @ theta,
        # so the score at the exact mode is exactly zero
        g = SpectGeometry(8, 8, n_angles=12, n_bins=12, exposure=1024.0)
        A = build_system_matrix(g)
        theta = np.full(g.p, 0.7)
        inst = SpectInstance(g, A, g.exposure * (A @ theta), prior=flat_prior())
        pa = plugin_approx(inst, theta)
        assert pa.zero_rays.size == 0
        assert pa.nonregular.size == 0
        assert pa.regular_boundary.size == 0

    def test_rate_is_zero_ray_column_sum(self):
        A = sp.csr_matrix(np.array([[0.3], [0.5], [0.0]]))
        g = SpectGeometry(1, 1, n_angles=3, n_bins=1, exposure=10.0)
        inst = SpectInstance(g, A, np.zeros(3), prior=flat_prior())
        pa = plugin_approx(inst, np.array([0.0]))
        assert pa.rates[0] == pytest.approx(0.8)

    def test_noise_free_information_formula(self, small_setup):
        g, A, ph = small_setup
        inst = SpectInstance(g, A, g.exposure * (A @ ph), prior=flat_prior())
        pa = plugin_approx(inst, ph)
        yhat = A @ ph
        keep = np.flatnonzero(yhat > 1e-12)
        Ar = A[keep][:, pa.regular].toarray()
        expected = (Ar.T * (1.0 / yhat[keep])) @ Ar
        assert np.allclose(pa.information, expected, atol=1e-12)

    def test_rates_match_local_quadratic(self, small_setup):
        g, A, ph = small_setup
        inst = SpectInstance(g, A, g.exposure * (A @ ph), prior=flat_prior())
        model = inst.model()
        part = classify(ph, model.limit_gradient(ph, ph))
        lq = local_quadratic(model, part, ph)
        pa = plugin_approx(inst, ph)
        assert np.array_equal(np.sort(pa.nonregular), np.array(part.nonregular))
        order = np.argsort(pa.nonregular)
        assert np.allclose(pa.rates[order], lq.gamma_rates, atol=0, rtol=0)

    def test_logdensity_constant_and_ratio(self):
        g = SpectGeometry(1, 2, n_angles=1, n_bins=2, exposure=100.0)
        A = build_system_matrix(g)
        theta = np.array([2.0, 0.0])
        inst = SpectInstance(g, A, g.exposure * (A @ theta), prior=flat_prior())
        pa = plugin_approx(inst, theta)
        # z = 0 gives exactly the displayed constant
        assert plugin_logdensity(pa, np.zeros(2)) == pytest.approx(plugin_log_normalizer(pa))
        # changing only the regular block reproduces the Gaussian kernel ratio
        z1 = np.array([0.01, 0.002])
        z2 = np.array([-0.03, 0.002])
        s2 = pa.sigma ** 2
        q = lambda z: -0.5 * z[pa.regular] @ pa.information @ z[pa.regular] / s2
        expected = q(z1) - q(z2)
        got = plugin_logdensity(pa, z1) - plugin_logdensity(pa, z2)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_support_violation(self):
        g = SpectGeometry(1, 2, n_angles=1, n_bins=2, exposure=100.0)
        A = build_system_matrix(g)
        theta = np.array([2.0, 0.0])
        inst = SpectInstance(g, A, g.exposure * (A @ theta), prior=flat_prior())
        pa = plugin_approx(inst, theta)
        assert plugin_logdensity(pa, np.array([0.0, -0.01])) == -np.inf

    def test_exponential_marginal_mean(self):
        g = SpectGeometry(1, 2, n_angles=1, n_bins=2, exposure=100.0)
        A = build_system_matrix(g)
        theta = np.array([2.0, 0.0])
        inst = SpectInstance(g, A, g.exposure * (A @ theta), prior=flat_prior())
        pa = plugin_approx(inst, theta)
        z = plugin_sample(pa, np.random.default_rng(7), 200_000)
        j = pa.nonregular[0]
        expect = pa.sigma ** 2 / pa.rates[0]
        se = z[:, j].std() / np.sqrt(len(z))
        assert z[:, j].mean() == pytest.approx(expect, abs=4 * se)

    def test_zero_rate_guard(self, small_setup):
        # raw threshold admits boundary pixels whose only evidence is O(sigma)
        # score noise; a positive eps (scores of covered pixels are well below
        # -0.8 here) restores positive rates and moves those pixels into the
        # truncated regular block
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(8), A=A)
        theta = map_estimate(inst, tol=1e-7, max_iter=4000)
        pa = plugin_approx(inst, theta)
        assert pa.rates.min() <= 0  # spurious members under eps = 0
        with pytest.raises(DomainError, match="eps"):
            plugin_sample(pa, np.random.default_rng(9), 10)
        # genuine dark-pixel scores here are below -0.8 while score noise at
        # uncovered boundary pixels is O(sigma * column scale) ~ 0.1
        pa2 = plugin_approx(inst, theta, eps=0.5)
        assert pa2.rates.size and pa2.rates.min() > 0
        assert pa2.regular_boundary.size > 0


class TestSpectPosterior:
    def test_delta_matches_full_kernel(self, small_setup):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(10), A=A)
        post = SpectPosterior(inst)
        rng = np.random.default_rng(11)
        theta = np.abs(rng.normal(0.5, 0.3, size=g.p))
        state = post.make_state(theta)
        base = post.logpdf(theta)
        for _ in range(60):
            j = int(rng.integers(g.p))
            new = abs(theta[j] + rng.normal(0.0, 0.2))
            d, aux = post.delta_logpdf(state, j, new)
            other = theta.copy()
            other[j] = new
            assert d == pytest.approx(post.logpdf(other) - base, rel=1e-9, abs=1e-9)

    def test_commit_updates_cache(self, small_setup):
        g, A, ph = small_setup
        inst = simulate(g, ph, np.random.default_rng(12), A=A)
        post = SpectPosterior(inst)
        theta = np.full(g.p, 0.5)
        state = post.make_state(theta)
        d, aux = post.delta_logpdf(state, 3, 1.25)
        post.commit(state, 3, 1.25, aux)
        assert state["theta"][3] == 1.25
        assert np.allclose(state["mu"], post.A_csc @ state["theta"], atol=1e-12)


class TestPropriety:
    def test_posterior_mass_stable_under_box_growth(self):
        # improper pairwise prior, proper posterior once a ray has positive weight
        from scipy import integrate as si
        g = SpectGeometry(1, 2, n_angles=1, n_bins=2, exposure=5.0)
        A = build_system_matrix(g)
        inst = SpectInstance(g, A, np.array([3.0, 1.0]), prior=default_prior(g, gamma=5.0, zeta=2.0))
        post = SpectPosterior(inst)
        vals = []
        for B in [20.0, 40.0, 80.0]:
            v, _ = si.dblquad(lambda b, a: np.exp(post.logpdf(np.array([a, b]))),
                              0, B, 0, B, epsabs=1e-12, epsrel=1e-8)
            vals.append(v)
        assert vals[-1] == pytest.approx(vals[-2], rel=1e-6)
        assert np.isfinite(vals[-1]) and vals[-1] > 0
