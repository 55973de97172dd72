"""scikit-learn style front end for the three activation models.

The estimators are transductive: ``fit`` takes a complex image series and
its design and stores per-voxel results; ``fit_predict`` returns the
activation map of the fitted voxels.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DataError
from .experiments import default_config, fit_model
from .model import ComplexImageSeries, DesignPair

_UNSET = None


def check_series(data, design=None):
    """Coerce ``data`` to a ComplexImageSeries and ``design`` to a DesignPair.

    ``data`` may be a ComplexImageSeries or a complex ``(V, T)`` array (a
    1-D voxel grid is assumed then). ``design`` may be a DesignPair or the
    regressor ``x``.
    """
    if not isinstance(data, ComplexImageSeries):
        arr = np.asarray(data)
        if not np.iscomplexobj(arr) or arr.ndim != 2:
            raise DataError("expected a ComplexImageSeries or a complex "
                            "(V, T) array")
        data = ComplexImageSeries(arr.real, arr.imag, (arr.shape[0],))
    if design is None:
        raise DataError("a design is required")
    if not isinstance(design, DesignPair):
        design = DesignPair(np.asarray(design, dtype=float))
    if design.n_times != data.n_times:
        raise DataError("design has {} time points, data has {}".format(
            design.n_times, data.n_times))
    return data, design


class _ActivationSampler(BaseEstimator):
    _model = None

    def _config(self):
        params = dict(n_iter=self.n_iter, burn_in=self.burn_in,
                      seed=self.random_state,
                      indicator_update=self.indicator_update)
        for name in ("psi_lambda", "threshold"):
            value = getattr(self, name)
            if value is not _UNSET:
                params[name] = value
        params.update(self._extra_params())
        return default_config(self._model, **params).validate()

    def _extra_params(self):
        return {}

    def fit(self, data, design=None):
        """Run the sampler on every parcel of ``data``."""
        data, design = check_series(data, design)
        if self.n_parcels < 1 or self.n_jobs < 1:
            raise ConfigError("n_parcels and n_jobs must be >= 1")
        summary = fit_model(self._model, data, design, self.n_parcels,
                            self._config(), self.n_jobs, self.q,
                            self.neighborhood)
        self.summary_ = summary
        self.n_voxels_ = data.n_voxels
        self.dims_ = data.dims
        self.prob_lambda_ = summary.prob_lambda
        self.labels_ = summary.active_any
        self.coef_ = summary.mean_beta
        self.runtime_ = summary.runtime_seconds
        self._set_model_attributes(summary)
        return self

    def _set_model_attributes(self, summary):
        pass

    def fit_predict(self, data, design=None):
        return self.fit(data, design).labels_

    def predict_proba(self, data=None):
        """Per-voxel activation score of the fitted data."""
        check_is_fitted(self, "summary_")
        self._check_same(data)
        return self.summary_.score

    def predict(self, data=None):
        """Activation map of the fitted data (the model is transductive)."""
        check_is_fitted(self, "summary_")
        self._check_same(data)
        return self.labels_

    def _check_same(self, data):
        if data is None:
            return
        n = data.n_voxels if isinstance(data, ComplexImageSeries) else len(
            data)
        if n != self.n_voxels_:
            raise DataError("predict only covers the fitted voxels")


class CVMPSampler(_ActivationSampler):
    """Polar magnitude-and-phase model with separate activation maps.

    After ``fit``: ``prob_lambda_``/``prob_omega_`` hold indicator
    probabilities, ``active_mag_``/``active_phase_`` the thresholded maps,
    ``labels_`` their union, ``coef_``/``phase_coef_`` the posterior means
    of ``(b0, b1)`` and ``(g0, g1)``, and ``summary_`` everything else.
    """

    _model = "cvmp"

    def __init__(self, n_parcels=16, n_iter=1000, burn_in=200,
                 psi_lambda=_UNSET, psi_omega=_UNSET, threshold=_UNSET,
                 mh_step=(0.05, 0.05), adapt_mh=False,
                 indicator_update="conditional", q=None,
                 neighborhood="edge+corner", random_state=0, n_jobs=1):
        self.n_parcels = n_parcels
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.psi_lambda = psi_lambda
        self.psi_omega = psi_omega
        self.threshold = threshold
        self.mh_step = mh_step
        self.adapt_mh = adapt_mh
        self.indicator_update = indicator_update
        self.q = q
        self.neighborhood = neighborhood
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _extra_params(self):
        params = dict(mh_step=tuple(np.broadcast_to(self.mh_step, (2,))),
                      adapt_mh=self.adapt_mh)
        if self.psi_omega is not _UNSET:
            params["psi_omega"] = self.psi_omega
        return params

    def _set_model_attributes(self, summary):
        self.prob_omega_ = summary.prob_omega
        self.active_mag_ = summary.active_mag
        self.active_phase_ = summary.active_phase
        self.phase_coef_ = summary.mean_gamma
        self.acceptance_rate_ = summary.acceptance_rate


class MagnitudeOnlySampler(_ActivationSampler):
    """Spike-and-slab regression of the magnitude series."""

    _model = "mo"

    def __init__(self, n_parcels=16, n_iter=1000, burn_in=200,
                 psi_lambda=_UNSET, threshold=_UNSET,
                 indicator_update="conditional", q=None,
                 neighborhood="edge+corner", random_state=0, n_jobs=1):
        self.n_parcels = n_parcels
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.psi_lambda = psi_lambda
        self.threshold = threshold
        self.indicator_update = indicator_update
        self.q = q
        self.neighborhood = neighborhood
        self.random_state = random_state
        self.n_jobs = n_jobs


class CartesianSampler(MagnitudeOnlySampler):
    """Joint spike-and-slab regression of the real and imaginary series.

    ``coef_`` columns are ``(bR0, bR1, bI0, bI1)``.
    """

    _model = "cvri"


__all__ = ["CVMPSampler", "MagnitudeOnlySampler", "CartesianSampler",
           "check_series"]
