import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from goodsubset.belief import (InvalidConfigurationError, PriorSpec, UndefinedPosteriorError,
                               VarianceMode, init_beliefs, top_split, update)

from conftest import fill_state


def grid_posterior(xs, sigma2, prior_mean=None, prior_var=None, half_width=12.0, n=200_001):
    """Posterior of the mean on a dense grid, by brute-force Bayes."""
    xs = np.asarray(xs)
    center = xs.mean()
    width = half_width * math.sqrt(sigma2 / len(xs))
    if prior_var is not None:
        width = max(width, half_width * math.sqrt(prior_var))
    theta = np.linspace(center - width, center + width, n)
    loglik = -0.5 * ((xs[None, :] - theta[:, None]) ** 2).sum(axis=1) / sigma2
    if prior_var is not None:
        loglik += -0.5 * (theta - prior_mean) ** 2 / prior_var
    w = np.exp(loglik - loglik.max())
    return theta, w / w.sum()


def total_variation(theta, weights, mean, var):
    # cell masses of the candidate normal on the same grid
    edges = np.concatenate(([theta[0]], 0.5 * (theta[1:] + theta[:-1]), [theta[-1]]))
    mass = np.diff(norm.cdf(edges, mean, math.sqrt(var)))
    return 0.5 * np.abs(mass / mass.sum() - weights).sum()


class TestConjugateUpdate:
    @pytest.mark.parametrize("case", range(20))
    def test_matches_grid_bayes(self, case):
        rng = np.random.default_rng(1000 + case)
        n = int(rng.integers(1, 12))
        sigma2 = float(rng.uniform(0.2, 5.0))
        xs = rng.normal(rng.normal(0, 3), math.sqrt(sigma2), size=n)
        informative = case % 2 == 0
        prior = PriorSpec.informative(rng.normal(), rng.uniform(0.5, 4.0)) if informative \
            else PriorSpec.uninformative()
        state = init_beliefs(2, prior, VarianceMode.known([sigma2, 1.0]))
        for x in xs:
            state.observe(0, x)
        theta, w = grid_posterior(xs, sigma2, prior.mean if informative else None,
                                  prior.variance if informative else None)
        tv = total_variation(theta, w, state.posterior_mean[0], state.posterior_var[0])
        assert tv < 1e-4

    def test_incremental_matches_batch(self, rng):
        xs = rng.normal(1e3, 2.0, size=500)
        prior = PriorSpec.informative(3.0, 2.0)
        state = init_beliefs(3, prior, VarianceMode.known([4.0, 1.0, 1.0]))
        for x in xs:
            state.observe(1, x)
        var = 1.0 / (1 / 2.0 + len(xs) / 1.0)
        mean = var * (3.0 / 2.0 + xs.sum() / 1.0)
        assert state.posterior_mean[1] == pytest.approx(mean, rel=1e-10)
        assert state.posterior_var[1] == pytest.approx(var, rel=1e-10)

    def test_uninformative_is_sample_mean(self, rng):
        xs = rng.normal(5, 3, size=40)
        state = init_beliefs(2, var_mode=VarianceMode.plugin())
        for x in xs:
            state.observe(0, x)
        assert state.posterior_mean[0] == pytest.approx(xs.mean(), rel=1e-12)
        assert state.sampling_var[0] == pytest.approx(xs.var(ddof=1), rel=1e-10)
        assert state.posterior_var[0] == pytest.approx(xs.var(ddof=1) / 40, rel=1e-10)

    def test_plugin_variance_large_offset(self):
        # values near 1e9 with unit spread: naive sum-of-squares would lose all digits
        xs = 1e9 + np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        state = init_beliefs(2)
        for x in xs:
            state.observe(0, x)
        assert state.sampling_var[0] == pytest.approx(2.5, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=15), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, xs, rnd):
        prior = PriorSpec.informative(0.5, 3.0)
        a = init_beliefs(2, prior, VarianceMode.plugin())
        b = init_beliefs(2, prior, VarianceMode.plugin())
        shuffled = list(xs)
        rnd.shuffle(shuffled)
        for x in xs:
            a.observe(0, x)
        for x in shuffled:
            b.observe(0, x)
        scale = max(1.0, max(abs(x) for x in xs))
        assert a.posterior_mean[0] == pytest.approx(b.posterior_mean[0], rel=1e-10, abs=1e-10 * scale)
        assert a.posterior_var[0] == pytest.approx(b.posterior_var[0], rel=1e-10, abs=1e-12)

    def test_update_leaves_input_untouched(self):
        state = init_beliefs(3, var_mode=VarianceMode.known([1, 1, 1]))
        new = update(state, 2, 4.0)
        assert state.counts.tolist() == [0, 0, 0]
        assert new.counts.tolist() == [0, 0, 1]
        assert new.posterior_mean[2] == 4.0

    def test_constant_observations_hit_floor(self):
        state = init_beliefs(2)
        for _ in range(5):
            state.observe(0, 2.0)
        assert state.sampling_var[0] == VarianceMode().floor
        assert math.isfinite(state.posterior_var[0])

    def test_plugin_undefined_below_two(self):
        state = init_beliefs(2)
        state.observe(0, 1.0)
        assert not state.defined[0]
        state.observe(0, 2.0)
        assert state.defined[0]

    def test_freeze_keeps_variance(self):
        state = init_beliefs(2)
        for x in (0.0, 2.0):
            state.observe(0, x)
        state.freeze_variances()
        state.observe(0, 100.0)
        assert state.sampling_var[0] == 2.0
        assert state.posterior_var[0] == pytest.approx(2.0 / 3)

    def test_beliefs_view_raw_moments(self):
        state = init_beliefs(2, var_mode=VarianceMode.known([1, 1]))
        for x in (3.0, 5.0):
            state.observe(1, x)
        view = state.beliefs[1]
        assert (view.count, view.sum, view.sum_sq) == (2, 8.0, 34.0)
        assert view.defined and not state.beliefs[0].defined


class TestErrors:
    def test_bad_index(self):
        with pytest.raises(IndexError):
            init_beliefs(3).observe(3, 0.0)

    @pytest.mark.parametrize("x", [math.nan, math.inf])
    def test_non_finite(self, x):
        with pytest.raises(ValueError):
            init_beliefs(3).observe(0, x)

    def test_too_few_alternatives(self):
        with pytest.raises(InvalidConfigurationError):
            init_beliefs(1)

    def test_known_variance_length(self):
        with pytest.raises(InvalidConfigurationError):
            init_beliefs(3, var_mode=VarianceMode.known([1.0, 1.0]))

    @pytest.mark.parametrize("v", [0.0, -1.0, math.inf])
    def test_bad_prior_variance(self, v):
        with pytest.raises(InvalidConfigurationError):
            PriorSpec.informative(0.0, v)

    def test_top_split_before_init(self):
        with pytest.raises(UndefinedPosteriorError):
            top_split(init_beliefs(3), 1)


class TestTopSplit:
    def _state(self, means):
        state = init_beliefs(len(means), var_mode=VarianceMode.known([1.0] * len(means)))
        for i, mu in enumerate(means):
            state.observe(i, mu)
        return state

    def test_sorting(self):
        top, comp = top_split(self._state([3, 1, 2]), 1)
        assert top.tolist() == [0] and sorted(comp.tolist()) == [1, 2]

    def test_tie_goes_to_lower_index(self):
        top, _ = top_split(self._state([1, 1, 0]), 1)
        assert top.tolist() == [0]

    def test_cardinality(self, rng):
        state = fill_state(rng.normal(size=50), np.arange(50, 0, -1), 2, rng)
        top, comp = top_split(state, 5)
        assert len(top) == 5 and len(comp) == 45
        assert set(top) | set(comp) == set(range(50))

    @pytest.mark.parametrize("m", [0, 3])
    def test_bad_m(self, m):
        with pytest.raises(InvalidConfigurationError):
            top_split(self._state([1, 2, 3]), m)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-20, 20), min_size=3, max_size=9),
           st.integers(-1000, 1000), st.data())
    def test_shift_invariance(self, means, c, data):
        m = data.draw(st.integers(1, len(means) - 1))
        a = top_split(self._state(means), m)
        b = top_split(self._state([x + c for x in means]), m)
        assert a[0].tolist() == b[0].tolist() and a[1].tolist() == b[1].tolist()
