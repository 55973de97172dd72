"""Parcel-wise Gibbs sampling for the polar magnitude/phase model."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.stats import norm

from ..exceptions import ConfigError, DataError, NumericalError
from ..model import wrap_angle
from ..spatial import build_parcel_graphs
from . import conditionals as cond
from .diagnostics import batch_means_mcse
from .phase import PhaseProjector

logger = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-8
INDICATOR_UPDATES = ("conditional", "marginal")
NEWTON_STEPS = 8


@dataclass
class SamplerConfig:
    """Tuning constants and run length of a parcel chain.

    ``mh_step`` holds the proposal standard deviations of the phase
    intercept and slope. ``indicator_update`` selects how the activation
    indicators move: ``"conditional"`` draws each from its full
    conditional given the current slope, ``"marginal"`` integrates the
    slope out (exactly for the magnitude, through a Laplace-proposal
    Metropolis step for the phase). ``fixed`` names conditionals that are skipped so
    their parameters keep the initial values (any of ``"sigma2"``,
    ``"tau2"``, ``"xi2"``, ``"spatial"``); it exists for diagnostics.
    """

    psi_lambda: float = float(norm.ppf(0.42))
    psi_omega: float = float(norm.ppf(0.42))
    a_kappa: float = 0.5
    b_kappa: float = 2000.0
    n_iter: int = 1000
    burn_in: int = 200
    mh_step: tuple = (0.05, 0.05)
    adapt_mh: bool = False
    adapt_target: float = 0.35
    threshold: float = 0.925
    mcse_target: float = 0.05
    seed: int = 0
    indicator_update: str = "conditional"
    fixed: tuple = ()
    init: dict = field(default_factory=dict)

    def validate(self):
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must be in (0, 1)")
        if not self.n_iter > self.burn_in >= 0:
            raise ConfigError("need n_iter > burn_in >= 0")
        if self.n_iter - self.burn_in < 4:
            raise ConfigError("need at least 4 retained iterations")
        if self.a_kappa <= 0 or self.b_kappa <= 0:
            raise ConfigError("kappa hyperparameters must be positive")
        if np.any(np.asarray(self.mh_step, dtype=float) <= 0):
            raise ConfigError("mh_step must be positive")
        if self.indicator_update not in INDICATOR_UPDATES:
            raise ConfigError("indicator_update must be one of {}".format(
                INDICATOR_UPDATES))
        unknown = set(self.fixed) - {"sigma2", "tau2", "xi2", "spatial"}
        if unknown:
            raise ConfigError("unknown fixed blocks: {}".format(unknown))
        return self


@dataclass
class VoxelState:
    """Per-voxel parameters of one parcel, one row per voxel."""

    beta: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    omega: np.ndarray
    sigma2: np.ndarray
    eta_lambda: np.ndarray
    eta_omega: np.ndarray

    def check_invariants(self):
        if np.any(self.beta[self.lam == 0, 1] != 0):
            raise NumericalError("inactive magnitude slope is nonzero")
        if np.any(self.gamma[self.omega == 0, 1] != 0):
            raise NumericalError("inactive phase slope is nonzero")
        if np.any(self.sigma2 <= 0):
            raise NumericalError("non-positive noise variance")


@dataclass
class ParcelState:
    tau2: float
    xi2: float
    delta_lambda: np.ndarray
    delta_omega: np.ndarray
    kappa_lambda: float
    kappa_omega: float


@dataclass
class PosteriorSummary:
    """Posterior means, indicator probabilities and activation calls.

    ``mean_beta`` holds ``(b0, b1)`` for the polar and magnitude-only
    models and ``(bR0, bR1, bI0, bI1)`` for the real/imaginary model.
    ``mean_gamma`` and the phase entries are ``None`` for models without a
    separate phase indicator.
    """

    model: str
    mean_beta: np.ndarray
    prob_lambda: np.ndarray
    active_mag: np.ndarray
    mcse_lambda: np.ndarray
    threshold: float
    mean_gamma: np.ndarray = None
    prob_omega: np.ndarray = None
    active_phase: np.ndarray = None
    mcse_omega: np.ndarray = None
    acceptance_rate: np.ndarray = None
    mean_sigma2: np.ndarray = None
    runtime_seconds: float = 0.0
    n_iter: int = 0
    burn_in: int = 0

    mcse_target: float = 0.05

    @property
    def converged(self):
        ok = self.mcse_lambda < self.mcse_target
        if self.mcse_omega is not None:
            ok &= self.mcse_omega < self.mcse_target
        return ok

    @property
    def active_any(self):
        if self.active_phase is None:
            return self.active_mag
        return np.maximum(self.active_mag, self.active_phase)

    @property
    def score(self):
        """Per-voxel activation score: the larger indicator probability."""
        if self.prob_omega is None:
            return self.prob_lambda
        return np.maximum(self.prob_lambda, self.prob_omega)


class SpatialIndicatorPrior:
    """Probit auxiliaries, spatial effect and smoothing for one indicator."""

    def __init__(self, graph, kappa):
        self.basis = graph.basis
        self.spread = 1.0 + graph.leverage()
        self.cov_factor = graph.delta_covariance_factor()
        n = graph.n_voxels
        self.eta = np.zeros(n)
        self.delta = np.zeros(graph.q)
        self.kappa = float(kappa)

    def update_eta(self, indicator, rng):
        self.eta = cond.draw_eta(indicator, self.spread, self.kappa, rng)

    def update_parcel(self, rng, a_kappa, b_kappa):
        self.delta = cond.draw_delta(self.eta, self.basis, self.cov_factor,
                                     self.kappa, rng)
        self.kappa = cond.draw_kappa(self.eta, self.spread, rng, a_kappa,
                                     b_kappa)


class ParcelChain:
    """Base class of a single-parcel sampler.

    Subclasses implement ``sweep`` and ``record`` and expose the indicator
    arrays used for traces.
    """

    has_phase = False

    def __init__(self, graph, config, rng):
        self.config = config
        self.rng = rng
        kappa0 = config.a_kappa * config.b_kappa
        self.prior_lambda = SpatialIndicatorPrior(graph, kappa0)
        self.n_vox = graph.n_voxels

    def run(self):
        cfg = self.config
        n_keep = cfg.n_iter - cfg.burn_in
        self.lam_trace = np.zeros((self.n_vox, n_keep), dtype=np.int8)
        if self.has_phase:
            self.omega_trace = np.zeros((self.n_vox, n_keep), dtype=np.int8)
        self._sums = None
        for it in range(cfg.n_iter):
            self.sweep(it)
            if it >= cfg.burn_in:
                k = it - cfg.burn_in
                self.lam_trace[:, k] = self.lam
                if self.has_phase:
                    self.omega_trace[:, k] = self.omega
                self._accumulate(self.record())
        return self

    def _accumulate(self, values):
        if self._sums is None:
            self._sums = {k: np.array(v, dtype=float)
                          for k, v in values.items()}
        else:
            for k, v in values.items():
                self._sums[k] += v

    def means(self):
        n_keep = self.config.n_iter - self.config.burn_in
        return {k: v / n_keep for k, v in self._sums.items()}


class PolarParcelChain(ParcelChain):
    """Gibbs/Metropolis sampler for one parcel of the polar model.

    A sweep updates, for all voxels of the parcel: the magnitude indicator,
    the magnitude coefficients, the phase indicator, the phase
    coefficients (random-walk Metropolis), the noise variance and the two
    probit auxiliaries; then the parcel-level slab variances, spatial
    effects and smoothing parameters.
    """

    has_phase = True

    def __init__(self, real, imag, design, graph, config, rng):
        super().__init__(graph, config, rng)
        self.prior_omega = SpatialIndicatorPrior(
            graph, config.a_kappa * config.b_kappa)
        self.design = design
        self.gram = cond.design_gram(design)
        self.n_obs = 2 * design.n_times
        self.yy = np.sum(real ** 2, axis=1) + np.sum(imag ** 2, axis=1)
        self.proj = PhaseProjector(real, imag, design)
        self.step = np.tile(np.asarray(config.mh_step, dtype=float),
                            (self.n_vox, 1))
        self.n_accept = np.zeros(self.n_vox)
        self.n_accept_omega = np.zeros(self.n_vox)
        self.n_proposed = 0
        self._window_accept = np.zeros(self.n_vox)
        self._window = 0
        self.state, self.parcel = initialize_state(real, imag, design,
                                                   config)
        self.prior_lambda.eta = self.state.eta_lambda.copy()
        self.prior_omega.eta = self.state.eta_omega.copy()
        init = config.init
        if "kappa" in init:
            self.prior_lambda.kappa = self.prior_omega.kappa = init["kappa"]
        self._p = self._project(self.state.gamma, self.state.omega)

    @property
    def lam(self):
        return self.state.lam

    @property
    def omega(self):
        return self.state.omega

    def _project(self, gamma, omega):
        p0, p1 = self.proj(gamma[:, 0], omega * gamma[:, 1])
        return np.stack([p0, p1], axis=-1)[:, None, :]

    def update_lambda(self):
        s, ps = self.state, self.parcel
        if self.config.indicator_update == "marginal":
            log_ratio = cond.marginal_slope_log_ratio(self._p, self.gram,
                                                      s.sigma2, ps.tau2)
        else:
            log_ratio = cond.slope_log_ratio(s.beta[:, None, :], self._p,
                                             self.gram, s.sigma2, ps.tau2)
        prob = cond.inclusion_probability(log_ratio, self.config.psi_lambda,
                                          s.eta_lambda)
        s.lam = (self.rng.random(self.n_vox) < prob).astype(np.int64)

    def update_beta(self):
        s, ps = self.state, self.parcel
        s.beta = cond.draw_coefficients(s.lam, self._p, self.gram, s.sigma2,
                                        ps.tau2, self.rng)[:, 0, :]

    def update_omega(self):
        if self.config.indicator_update == "marginal":
            return self.update_omega_marginal()
        s, ps = self.state, self.parcel
        off = np.stack(self.proj.at_zero_slope(s.gamma[:, 0]),
                       axis=-1)[:, None, :]
        log_ratio = cond.phase_slope_log_ratio(
            s.beta, s.lam, off[:, 0], self._p[:, 0],
            s.omega * s.gamma[:, 1], s.sigma2, ps.xi2)
        prob = cond.inclusion_probability(log_ratio, self.config.psi_omega,
                                          s.eta_omega)
        s.omega = (self.rng.random(self.n_vox) < prob).astype(np.int64)
        s.gamma[s.omega == 0, 1] = 0.0
        self._p = np.where((s.omega == 0)[:, None, None], off, self._p)

    def _slope_laplace(self, gamma0, w0, w1, xi2):
        """Mode and curvature of the phase-slope conditional (safeguarded)."""
        lim = 0.9 * self.proj.slope_limit
        m = np.zeros(self.n_vox)
        for _ in range(NEWTON_STEPS):
            _, d1, d2 = self.proj.slope_profile(gamma0, m, w0, w1)
            curv = np.minimum(d2 - 1.0 / xi2, -1.0 / xi2)
            step = np.clip((d1 - m / xi2) / -curv, -0.5, 0.5)
            m = np.clip(m + step, -lim, lim)
        f, _, d2 = self.proj.slope_profile(gamma0, m, w0, w1)
        var = -1.0 / np.minimum(d2 - 1.0 / xi2, -1.0 / xi2)
        return m, var, f

    def update_omega_marginal(self):
        """Joint Metropolis move of (omega, phase slope).

        The proposal draws omega from a Laplace approximation of its
        marginal conditional and, when on, the slope from the matching
        normal; it does not depend on the current values, and the exact
        target corrects the approximation.
        """
        s, ps = self.state, self.parcel
        xi2 = ps.xi2
        g0 = s.gamma[:, 0]
        w0 = s.beta[:, 0] / s.sigma2
        w1 = s.lam * s.beta[:, 1] / s.sigma2
        m, var, f_mode = self._slope_laplace(g0, w0, w1, xi2)
        off = np.stack(self.proj.at_zero_slope(g0), axis=-1)[:, None, :]
        f_off = w0 * off[:, 0, 0] + w1 * off[:, 0, 1]
        a = self.config.psi_omega + s.eta_omega
        prior_logit = special.log_ndtr(a) - special.log_ndtr(-a)
        logit = (prior_logit + f_mode - m ** 2 / (2 * xi2)
                 + 0.5 * np.log(var / xi2) - f_off)
        z = self.rng.standard_normal(self.n_vox)
        u = self.rng.random((2, self.n_vox))
        new_om = (u[0] < special.expit(logit)).astype(np.int64)
        new_g1 = np.where(new_om == 1, m + np.sqrt(var) * z, 0.0)
        p_new = self._project(np.column_stack([g0, new_g1]), new_om)
        f_new = w0 * p_new[:, 0, 0] + w1 * p_new[:, 0, 1]
        f_cur = w0 * self._p[:, 0, 0] + w1 * self._p[:, 0, 1]

        def log_target(om, g1, f):
            slab = -0.5 * (cond.LOG_2PI + np.log(xi2)) - g1 ** 2 / (2 * xi2)
            return (f + np.where(om == 1, special.log_ndtr(a) + slab,
                                 special.log_ndtr(-a)))

        def log_proposal(om, g1):
            normal = (-0.5 * (cond.LOG_2PI + np.log(var))
                      - (g1 - m) ** 2 / (2 * var))
            return np.where(om == 1, special.log_expit(logit) + normal,
                            special.log_expit(-logit))

        log_r = (log_target(new_om, new_g1, f_new)
                 - log_target(s.omega, s.gamma[:, 1], f_cur)
                 + log_proposal(s.omega, s.gamma[:, 1])
                 - log_proposal(new_om, new_g1))
        if not np.all(np.isfinite(log_r)):
            raise NumericalError("non-finite Metropolis ratio")
        accept = np.log(u[1]) < log_r
        s.omega = np.where(accept, new_om, s.omega)
        s.gamma[:, 1] = np.where(accept, new_g1, s.gamma[:, 1])
        self._p = np.where(accept[:, None, None], p_new, self._p)
        self.n_accept_omega += accept

    def update_gamma(self):
        s, ps = self.state, self.parcel
        z = self.rng.standard_normal((self.n_vox, 2))
        u = self.rng.random(self.n_vox)
        prop = s.gamma + self.step * z
        prop[:, 1] *= s.omega
        p_new = self._project(prop, s.omega)
        log_r = cond.phase_mh_log_ratio(s.beta, s.lam, s.omega, s.gamma,
                                        prop, self._p[:, 0], p_new[:, 0],
                                        s.sigma2, ps.xi2)
        if not np.all(np.isfinite(log_r)):
            raise NumericalError("non-finite Metropolis ratio")
        accept = np.log(u) < log_r
        s.gamma = np.where(accept[:, None], prop, s.gamma)
        self._p = np.where(accept[:, None, None], p_new, self._p)
        self.n_accept += accept
        self.n_proposed += 1
        self._window_accept += accept
        self._window += 1

    def _adapt(self, it):
        cfg = self.config
        if not cfg.adapt_mh or it >= cfg.burn_in or self._window < 25:
            return
        rate = self._window_accept / self._window
        gain = 1.0 / np.sqrt(1.0 + it / 25.0)
        self.step *= np.exp(gain * (rate - cfg.adapt_target))[:, None]
        self._window_accept[:] = 0
        self._window = 0

    def update_sigma2(self):
        s = self.state
        if "sigma2" in self.config.fixed:
            return
        beta = s.beta.copy()
        beta[:, 1] *= s.lam
        rss = cond.residual_sum_squares(self.yy, beta[:, None, :], self._p,
                                        self.gram)
        s.sigma2 = cond.draw_noise_variance(rss, self.n_obs, self.rng,
                                            SIGMA2_FLOOR)

    def update_auxiliaries(self):
        if "spatial" in self.config.fixed:
            return
        self.prior_lambda.update_eta(self.state.lam, self.rng)
        self.prior_omega.update_eta(self.state.omega, self.rng)
        self.state.eta_lambda = self.prior_lambda.eta
        self.state.eta_omega = self.prior_omega.eta

    def update_parcel(self):
        s, ps, cfg = self.state, self.parcel, self.config
        if "tau2" not in cfg.fixed:
            ps.tau2 = cond.draw_slab_variance(s.beta[:, 0], s.beta[:, 1],
                                              s.lam, self.rng)
        if "xi2" not in cfg.fixed:
            ps.xi2 = cond.draw_slab_variance(s.gamma[:, 0], s.gamma[:, 1],
                                             s.omega, self.rng)
        if "spatial" not in cfg.fixed:
            self.prior_lambda.update_parcel(self.rng, cfg.a_kappa,
                                            cfg.b_kappa)
            self.prior_omega.update_parcel(self.rng, cfg.a_kappa,
                                           cfg.b_kappa)
            ps.delta_lambda = self.prior_lambda.delta
            ps.kappa_lambda = self.prior_lambda.kappa
            ps.delta_omega = self.prior_omega.delta
            ps.kappa_omega = self.prior_omega.kappa

    def sweep(self, it=0):
        self.update_lambda()
        self.update_beta()
        self.update_omega()
        self.update_gamma()
        self.update_sigma2()
        self.update_auxiliaries()
        self.update_parcel()
        self._adapt(it)
        return self.state

    def record(self):
        s = self.state
        return {"beta": s.beta, "gamma": s.gamma, "sigma2": s.sigma2}


def initialize_state(real, imag, design, config=None):
    """Deterministic starting point from simple per-voxel estimates.

    Magnitude coefficients come from least squares of the magnitude series
    on ``X``; the phase intercept is the angle of the mean signal and the
    phase slope starts at zero. Both indicators start on.
    """
    real = np.atleast_2d(real)
    imag = np.atleast_2d(imag)
    n, t = real.shape
    X = design.X
    mag = np.hypot(real, imag)
    coef, *_ = np.linalg.lstsq(X, mag.T, rcond=None)
    beta = coef.T.copy()
    mr = real.mean(axis=1)
    mi = imag.mean(axis=1)
    zero = (mr == 0) & (mi == 0)
    gamma0 = np.where(zero, 0.0, np.arctan2(mi, np.where(zero, 1.0, mr)))
    gamma0 = np.where(gamma0 <= -np.pi, np.pi, gamma0)
    gamma = np.column_stack([gamma0, np.zeros(n)])
    fitted = (beta[:, :1] + beta[:, 1:] * design.x)
    res_r = real - fitted * np.cos(gamma0)[:, None]
    res_i = imag - fitted * np.sin(gamma0)[:, None]
    sigma2 = (np.sum(res_r ** 2, axis=1) + np.sum(res_i ** 2, axis=1)) / (2 * t)
    sigma2 = np.maximum(sigma2, SIGMA2_FLOOR)
    ones = np.ones(n, dtype=np.int64)
    state = VoxelState(beta, gamma, ones.copy(), ones.copy(), sigma2,
                       np.zeros(n), np.zeros(n))
    kappa = 1000.0 if config is None else config.a_kappa * config.b_kappa
    parcel = ParcelState(1.0, 1.0, None, None, kappa, kappa)
    if config is not None and config.init:
        init = config.init
        for key in ("sigma2",):
            if key in init:
                state.sigma2 = np.broadcast_to(
                    np.asarray(init[key], dtype=float), (n,)).copy()
        for key in ("tau2", "xi2"):
            if key in init:
                setattr(parcel, key, float(init[key]))
        for key in ("eta_lambda", "eta_omega"):
            if key in init:
                setattr(state, key, np.broadcast_to(
                    np.asarray(init[key], dtype=float), (n,)).copy())
    return state, parcel


def parcel_rng(seed, parcel_id):
    """Independent stream for one parcel, fixed by (seed, parcel id)."""
    return np.random.default_rng([int(seed), int(parcel_id)])


def run_parcels(make_chain, n_parcels, threads=1):
    """Run ``make_chain(g).run()`` for every parcel, optionally threaded.

    Results come back in parcel order, so the merge does not depend on the
    number of workers.
    """
    if threads < 1:
        raise ConfigError("threads must be >= 1")

    def task(g):
        return make_chain(g).run()

    if threads == 1 or n_parcels == 1:
        return [task(g) for g in range(n_parcels)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(n_parcels)))


def check_inputs(data, design, parcellation):
    if data.n_times != design.n_times:
        raise DataError("data has {} time points, design has {}".format(
            data.n_times, design.n_times))
    if parcellation.labels.size != data.n_voxels:
        raise DataError("parcellation covers {} voxels, data has {}".format(
            parcellation.labels.size, data.n_voxels))


def _merge(chains, parcellation, n_vox, key):
    out = None
    for ix, ch in zip(parcellation.indices, chains):
        vals = ch.means()[key]
        if out is None:
            out = np.zeros((n_vox,) + vals.shape[1:])
        out[ix] = vals
    return out


def _merge_trace_stats(chains, parcellation, n_vox, attr):
    prob = np.zeros(n_vox)
    mcse = np.zeros(n_vox)
    for ix, ch in zip(parcellation.indices, chains):
        trace = getattr(ch, attr)
        prob[ix] = trace.mean(axis=1)
        mcse[ix] = batch_means_mcse(trace)
    return prob, mcse


def activation_calls(prob, threshold):
    """Indicator map ``prob > threshold`` as integers."""
    return (np.asarray(prob) > threshold).astype(int)


def summarize(chains, parcellation, config, model, elapsed):
    """Merge per-parcel chains into one PosteriorSummary."""
    n = parcellation.labels.size
    mean_beta = _merge(chains, parcellation, n, "beta")
    mean_sigma2 = _merge(chains, parcellation, n, "sigma2")
    p_lam, mcse_lam = _merge_trace_stats(chains, parcellation, n,
                                         "lam_trace")
    extra = {}
    if chains[0].has_phase:
        mean_gamma = _merge(chains, parcellation, n, "gamma")
        mean_gamma[:, 0] = wrap_angle(mean_gamma[:, 0])
        p_om, mcse_om = _merge_trace_stats(chains, parcellation, n,
                                           "omega_trace")
        accept = np.zeros(n)
        for ix, ch in zip(parcellation.indices, chains):
            accept[ix] = ch.n_accept / max(ch.n_proposed, 1)
        extra = dict(mean_gamma=mean_gamma, prob_omega=p_om,
                     active_phase=activation_calls(p_om, config.threshold),
                     mcse_omega=mcse_om, acceptance_rate=accept)
    summary = PosteriorSummary(
        model=model, mean_beta=mean_beta, prob_lambda=p_lam,
        active_mag=activation_calls(p_lam, config.threshold),
        mcse_lambda=mcse_lam, threshold=config.threshold,
        mean_sigma2=mean_sigma2, runtime_seconds=elapsed,
        n_iter=config.n_iter, burn_in=config.burn_in,
        mcse_target=config.mcse_target, **extra)
    n_bad = int(np.sum(~summary.converged))
    if n_bad:
        logger.info("%s: %d voxels with indicator MCSE >= %g", model, n_bad,
                    config.mcse_target)
    return summary


def fit_parcels(make_chain, data, design, parcellation, config, model,
                threads=1):
    """Validate inputs, run one chain per parcel and summarise."""
    config.validate()
    check_inputs(data, design, parcellation)
    start = time.perf_counter()
    chains = run_parcels(make_chain, parcellation.n_parcels, threads)
    return summarize(chains, parcellation, config, model,
                     time.perf_counter() - start)


def run_chain(data, design, parcellation, config=None, graphs=None,
              threads=1, q=None, neighborhood="edge+corner"):
    """Fit the polar model parcel by parcel and summarise the posterior."""
    config = (config or SamplerConfig()).validate()
    check_inputs(data, design, parcellation)
    if graphs is None:
        graphs = build_parcel_graphs(data.voxel_coords(), parcellation, q,
                                     neighborhood)

    def make_chain(g):
        ix = parcellation.indices[g]
        return PolarParcelChain(data.real[ix], data.imag[ix], design,
                                graphs[g], config,
                                parcel_rng(config.seed, g))

    return fit_parcels(make_chain, data, design, parcellation, config,
                       "cvmp", threads)


__all__ = ["SamplerConfig", "VoxelState", "ParcelState", "PosteriorSummary",
           "PolarParcelChain", "initialize_state", "run_chain",
           "run_parcels", "parcel_rng", "summarize", "fit_parcels",
           "activation_calls"]
