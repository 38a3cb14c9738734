import numpy as np
import pytest

from fedcache.common.exceptions import ConfigurationError, UsageError
from fedcache.diffusion import build_schedule, q_sample


def test_linear_schedule_endpoints():
    schedule = build_schedule(50)

    assert schedule.beta[0] == pytest.approx(1e-4)
    assert schedule.beta[-1] == pytest.approx(0.02)
    np.testing.assert_allclose(schedule.alpha, 1.0 - schedule.beta)
    np.testing.assert_allclose(schedule.alpha_bar, np.cumprod(schedule.alpha))
    assert np.all(np.diff(schedule.alpha_bar) < 0)


def test_single_step_schedule():
    schedule = build_schedule(1)

    assert schedule.alpha_bar[0] == pytest.approx(1.0 - 1e-4)
    assert schedule.posterior_var[0] == 0.0


def test_posterior_variance_lies_below_beta():
    schedule = build_schedule(100)

    assert np.all(schedule.posterior_var[1:] > 0)
    assert np.all(schedule.posterior_var <= schedule.beta)


@pytest.mark.parametrize(("T", "beta_start", "beta_end"), (
    (0, 1e-4, 0.02),
    (10, 0.0, 0.02),
    (10, 0.02, 1e-4),
    (10, 1e-4, 1.0),
))
def test_invalid_schedules(T: int, beta_start: float, beta_end: float):
    with pytest.raises(ConfigurationError):
        build_schedule(T, beta_start, beta_end)


@pytest.mark.parametrize("t", (0, 51))
def test_q_sample_rejects_out_of_range_steps(t: int):
    with pytest.raises(UsageError):
        q_sample(build_schedule(50), np.zeros(2), t, np.zeros(2))


def test_q_sample_with_zero_noise_scales_the_input():
    schedule = build_schedule(50)
    x0 = np.array([1.0, -2.0])

    np.testing.assert_allclose(q_sample(schedule, x0, 10, np.zeros(2)), np.sqrt(schedule.alpha_bar[9]) * x0)


def test_q_sample_accepts_per_row_steps():
    schedule = build_schedule(50)
    x0 = np.ones((2, 3))
    noised = q_sample(schedule, x0, np.array([1, 50]), np.zeros((2, 3)))

    np.testing.assert_allclose(noised[:, 0], np.sqrt(schedule.alpha_bar[[0, 49]]))


@pytest.mark.parametrize("t", (1, 25, 50))
def test_q_sample_moments(t: int, rng: np.random.Generator):
    schedule = build_schedule(50)
    x0 = np.array([0.8, -1.5])
    draws = 100_000
    samples = q_sample(schedule, np.tile(x0, (draws, 1)), t, rng.standard_normal((draws, 2)))

    alpha_bar = schedule.alpha_bar[t - 1]
    np.testing.assert_allclose(samples.mean(axis=0), np.sqrt(alpha_bar) * x0, rtol=0.05)
    np.testing.assert_allclose(samples.var(axis=0), np.full(2, 1.0 - alpha_bar), rtol=0.05)


def test_two_step_alpha_bar():
    schedule = build_schedule(2)

    assert abs(schedule.alpha_bar[1] - (1 - 1e-4) * (1 - 0.02)) < 1e-10


@pytest.mark.parametrize("t", (1, 7, 20))
def test_noising_zero_latents_scales_the_noise(t: int):
    schedule = build_schedule(20)
    epsilon = np.random.default_rng(t).standard_normal((5, 4))

    noised = q_sample(schedule, np.zeros((5, 4)), t, epsilon)

    np.testing.assert_allclose(noised, np.sqrt(1.0 - schedule.alpha_bar[t - 1]) * epsilon, rtol=0.0, atol=1e-12)
