import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cvmp import CartesianSampler, CVMPSampler, MagnitudeOnlySampler
from cvmp.exceptions import ConfigError, DataError
from cvmp.model import ComplexImageSeries, build_design


def tiny_problem(seed=0, n=12, T=40):
    rng = np.random.default_rng(seed)
    x = np.sin(np.linspace(0, 6, T))
    b1 = np.r_[np.full(4, 0.4), np.zeros(n - 4)]
    y = ((1 + b1[:, None] * x) * np.exp(0.3j)
         + 0.1 * (rng.normal(size=(n, T)) + 1j * rng.normal(size=(n, T))))
    return y, x


def test_params_and_clone():
    est = CVMPSampler(n_iter=50, burn_in=10, mh_step=(0.1, 0.2))
    params = est.get_params()
    assert params["mh_step"] == (0.1, 0.2) and params["n_parcels"] == 16
    c = clone(est)
    assert c.get_params() == params
    est.set_params(threshold=0.9)
    assert est.threshold == 0.9
    for cls in (MagnitudeOnlySampler, CartesianSampler):
        assert clone(cls(n_iter=20)).get_params()["n_iter"] == 20


@pytest.mark.parametrize("cls", [CVMPSampler, MagnitudeOnlySampler,
                                 CartesianSampler])
def test_fit_predict_on_array(cls):
    y, x = tiny_problem()
    est = cls(n_parcels=1, n_iter=200, burn_in=50, random_state=1)
    labels = est.fit_predict(y, x)
    assert labels.shape == (12,)
    assert np.array_equal(est.predict(), labels)
    proba = est.predict_proba()
    assert np.all((0 <= proba) & (proba <= 1))
    assert labels[:4].sum() >= 3
    again = clone(est).fit(y, x)
    assert np.array_equal(again.prob_lambda_, est.prob_lambda_)


def test_attributes():
    y, x = tiny_problem()
    est = CVMPSampler(n_parcels=1, n_iter=40, burn_in=10).fit(y, x)
    assert est.phase_coef_.shape == (12, 2)
    assert est.prob_omega_.shape == (12,)
    assert est.acceptance_rate_.shape == (12,)
    cart = CartesianSampler(n_parcels=1, n_iter=40, burn_in=10).fit(y, x)
    assert cart.coef_.shape == (12, 4)


def test_series_input_and_errors():
    y, x = tiny_problem()
    data = ComplexImageSeries(y.real, y.imag, (3, 4))
    est = CVMPSampler(n_parcels=2, n_iter=30, burn_in=10)
    est.fit(data, build_design(x))
    assert est.dims_ == (3, 4)
    with pytest.raises(DataError):
        est.predict(np.zeros((5, 40)))
    with pytest.raises(NotFittedError):
        CVMPSampler().predict()
    with pytest.raises(DataError):
        CVMPSampler().fit(y.real, x)
    with pytest.raises(DataError):
        CVMPSampler().fit(y, x[:10])
    with pytest.raises(ConfigError):
        CVMPSampler(n_iter=10, burn_in=10).fit(y, x)
    with pytest.raises(ConfigError):
        CVMPSampler(n_jobs=0).fit(y, x)
