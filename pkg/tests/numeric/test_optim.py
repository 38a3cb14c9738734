import numpy as np
import pytest

from fedcache.common.exceptions import ConfigurationError, NumericError
from fedcache.numeric import Adam, ParameterSet, mse_loss, sgd_step


@pytest.fixture()
def params() -> ParameterSet:
    params = ParameterSet([("w", np.array([1.0, -2.0]))])
    params.parameter("w").grad[...] = [0.5, 0.25]
    return params


def test_sgd_step_updates_and_zeroes_gradients(params: ParameterSet):
    sgd_step(params, 0.1)

    np.testing.assert_allclose(params["w"], [0.95, -2.025])
    assert not params.parameter("w").grad.any()


def test_sgd_step_with_zero_learning_rate_is_identity(params: ParameterSet):
    before = params.clone()
    sgd_step(params, 0.0)

    assert params.equals(before)


def test_sgd_step_rejects_negative_learning_rate(params: ParameterSet):
    with pytest.raises(ConfigurationError):
        sgd_step(params, -0.1)


def test_sgd_step_rejects_non_finite_gradients(params: ParameterSet):
    params.parameter("w").grad[0] = np.nan

    with pytest.raises(NumericError):
        sgd_step(params, 0.1)


def test_adam_first_step_moves_by_learning_rate(params: ParameterSet):
    Adam(params, learning_rate=0.01).step()

    np.testing.assert_allclose(params["w"], [0.99, -2.01], rtol=1e-6)


@pytest.mark.parametrize(("reduction", "expected_loss"), (
    ("mean", 3.5),
    ("sample", 7.0),
))
def test_mse_loss(reduction: str, expected_loss: float):
    prediction = np.array([[1.0, 2.0], [3.0, 4.0]])
    target = np.array([[0.0, 0.0], [3.0, 1.0]])

    loss, grad = mse_loss(prediction, target, reduction=reduction)

    assert loss == pytest.approx(expected_loss)
    assert grad.shape == prediction.shape


def test_mse_loss_shape_mismatch():
    with pytest.raises(ConfigurationError):
        mse_loss(np.zeros(2), np.zeros(3))
