"""Comparison models: magnitude-only and real/imaginary linear regressions.

Both are linear-Gaussian spike-and-slab regressions on ``X = [1, x]`` with
the same spatial indicator prior as the polar model, so every draw is
conjugate. The magnitude-only model regresses ``|y|``; the real/imaginary
model regresses the two channels jointly under one activation indicator.
"""

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigError
from .model import arctan4
from .sampler import conditionals as cond
from .sampler.chain import (SIGMA2_FLOOR, ParcelChain, SamplerConfig,
                            fit_parcels, parcel_rng)
from .spatial import build_parcel_graphs

MO_PSI = float(norm.ppf(0.35))
CVRI_PSI = float(norm.ppf(0.30))
BASELINE_THRESHOLD = 0.8722


def magnitude_series(data):
    """Elementwise modulus of the complex series."""
    return np.hypot(data.real, data.imag)


def baseline_config(model, **overrides):
    """SamplerConfig with the probit offset and threshold of a baseline."""
    psi = {"mo": MO_PSI, "cvri": CVRI_PSI}[model]
    params = dict(psi_lambda=psi, psi_omega=psi,
                  threshold=BASELINE_THRESHOLD)
    params.update(overrides)
    return SamplerConfig(**params)


class LinearParcelChain(ParcelChain):
    """Spike-and-slab regression of ``c`` channels sharing one indicator.

    ``channels`` is ``(n_vox, c, T)``. The noise variance has a Jeffreys
    prior and is shared across channels.
    """

    def __init__(self, channels, design, graph, config, rng):
        super().__init__(graph, config, rng)
        channels = np.asarray(channels, dtype=float)
        self.design = design
        self.gram = cond.design_gram(design)
        self.proj = channels @ design.X
        self.yy = np.sum(channels ** 2, axis=(1, 2))
        n, c, t = channels.shape
        self.n_obs = c * t
        coef = np.linalg.solve(self.gram, self.proj[..., None])[..., 0]
        self.beta = coef
        rss = cond.residual_sum_squares(self.yy, coef, self.proj, self.gram)
        self.sigma2 = np.maximum(rss / self.n_obs, SIGMA2_FLOOR)
        self.tau2 = 1.0
        self.lam = np.ones(n, dtype=np.int64)
        init = config.init
        if "sigma2" in init:
            self.sigma2 = np.broadcast_to(np.asarray(init["sigma2"], float),
                                          (n,)).copy()
        self.tau2 = float(init.get("tau2", self.tau2))
        if "eta_lambda" in init:
            self.prior_lambda.eta = np.broadcast_to(
                np.asarray(init["eta_lambda"], float), (n,)).copy()
        if "kappa" in init:
            self.prior_lambda.kappa = float(init["kappa"])

    def sweep(self, it=0):
        cfg = self.config
        if cfg.indicator_update == "marginal":
            log_ratio = cond.marginal_slope_log_ratio(
                self.proj, self.gram, self.sigma2, self.tau2)
        else:
            log_ratio = cond.slope_log_ratio(self.beta, self.proj, self.gram,
                                             self.sigma2, self.tau2)
        prob = cond.inclusion_probability(log_ratio, cfg.psi_lambda,
                                          self.prior_lambda.eta)
        self.lam = (self.rng.random(self.n_vox) < prob).astype(np.int64)
        self.beta = cond.draw_coefficients(self.lam, self.proj, self.gram,
                                           self.sigma2, self.tau2, self.rng)
        if "sigma2" not in cfg.fixed:
            rss = cond.residual_sum_squares(self.yy, self.beta, self.proj,
                                            self.gram)
            self.sigma2 = cond.draw_noise_variance(rss, self.n_obs, self.rng,
                                                   SIGMA2_FLOOR)
        if "spatial" not in cfg.fixed:
            self.prior_lambda.update_eta(self.lam, self.rng)
        if "tau2" not in cfg.fixed:
            self.tau2 = cond.draw_slab_variance(self.beta[..., 0],
                                                self.beta[..., 1], self.lam,
                                                self.rng)
        if "spatial" not in cfg.fixed:
            self.prior_lambda.update_parcel(self.rng, cfg.a_kappa,
                                            cfg.b_kappa)

    def record(self):
        return {"beta": self.beta.reshape(self.n_vox, -1),
                "sigma2": self.sigma2}


def _run_linear(channels, data, design, parcellation, config, model,
                graphs, threads, q, neighborhood):
    config = config.validate()
    if graphs is None:
        graphs = build_parcel_graphs(data.voxel_coords(), parcellation, q,
                                     neighborhood)

    def make_chain(g):
        ix = parcellation.indices[g]
        return LinearParcelChain(channels[ix], design, graphs[g], config,
                                 parcel_rng(config.seed, g))

    return fit_parcels(make_chain, data, design, parcellation, config, model,
                       threads)


def run_mo(data, design, parcellation, config=None, graphs=None, threads=1,
           q=None, neighborhood="edge+corner"):
    """Magnitude-only fit; ``mean_beta`` columns are ``(b0, b1)``."""
    config = config or baseline_config("mo")
    channels = magnitude_series(data)[:, None, :]
    return _run_linear(channels, data, design, parcellation, config, "mo",
                       graphs, threads, q, neighborhood)


def run_cvri(data, design, parcellation, config=None, graphs=None,
             threads=1, q=None, neighborhood="edge+corner"):
    """Real/imaginary fit; ``mean_beta`` columns are ``(bR0, bR1, bI0, bI1)``."""
    config = config or baseline_config("cvri")
    channels = np.stack([data.real, data.imag], axis=1)
    return _run_linear(channels, data, design, parcellation, config, "cvri",
                       graphs, threads, q, neighborhood)


def derived_estimates(summary):
    """Magnitude and phase slope estimates implied by a fitted summary.

    Magnitude-only: the magnitude slope and no phase estimate.
    Real/imaginary: the modulus of the two slopes, and their angle for
    voxels declared active (0 elsewhere). The polar model reports its own
    posterior means.
    """
    if summary.model == "mo":
        return summary.mean_beta[:, 1].copy(), None
    if summary.model == "cvmp":
        return summary.mean_beta[:, 1].copy(), summary.mean_gamma[:, 1].copy()
    if summary.model != "cvri":
        raise ConfigError("unknown model {!r}".format(summary.model))
    br1 = summary.mean_beta[:, 1]
    bi1 = summary.mean_beta[:, 3]
    beta1 = np.hypot(br1, bi1)
    gamma1 = np.zeros_like(beta1)
    for v in np.flatnonzero(summary.active_mag == 1):
        if br1[v] != 0 or bi1[v] != 0:
            gamma1[v] = arctan4(bi1[v], br1[v])
    return beta1, gamma1


__all__ = ["magnitude_series", "baseline_config", "LinearParcelChain",
           "run_mo", "run_cvri", "derived_estimates", "MO_PSI", "CVRI_PSI",
           "BASELINE_THRESHOLD"]
