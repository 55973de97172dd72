"""Full-conditional draws shared by the polar sampler and the baselines.

All functions are vectorized over the voxels of one parcel. Linear pieces
are written for ``c`` channels that share the design ``X = [1, x]`` and one
activation indicator: the polar model and the magnitude-only model use one
channel, the real/imaginary model two. A channel is summarised by the
projections ``P = (1'y_c, x'y_c)``; for the polar model ``y_c`` is the
signal projected on the current phase direction.
"""

import numpy as np
from scipy import special

from ..exceptions import NumericalError

LOG_2PI = np.log(2.0 * np.pi)


def design_gram(design):
    """``X'X`` for ``X = [1, x]``."""
    x = design.x
    return np.array([[x.size, x.sum()], [x.sum(), x @ x]], dtype=float)


def _check_finite(values, what):
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values.reshape(values.shape[0], -1)
                                          .sum(axis=1)))
        raise NumericalError("non-finite {} at voxel(s) {}".format(
            what, bad[:10].tolist()))


def inclusion_probability(log_ratio, psi, eta):
    """``Phi / (Phi + exp(log_ratio) (1 - Phi))`` with ``Phi = Phi(psi+eta)``.

    Evaluated as a logistic of log-odds so neither the ratio nor the normal
    tails overflow.
    """
    _check_finite(log_ratio, "indicator log-ratio")
    a = psi + np.asarray(eta, dtype=float)
    log_odds = special.log_ndtr(a) - special.log_ndtr(-a)
    return special.expit(log_odds - log_ratio)


def slope_log_ratio(beta, proj, gram, sigma2, slab_var):
    """``log(L0 / L1)`` for switching the shared slope indicator off.

    ``beta`` and ``proj`` are ``(n, c, 2)``; the slopes in ``beta`` are the
    current values (zero when the indicator is off).
    """
    b0 = beta[..., 0]
    b1 = beta[..., 1]
    gain = (b1 * proj[..., 1] - b0 * b1 * gram[0, 1]
            - 0.5 * b1 ** 2 * gram[1, 1]).sum(axis=-1) / sigma2
    n_slopes = beta.shape[-2]
    return (0.5 * n_slopes * (LOG_2PI + np.log(slab_var)) - gain
            + (b1 ** 2).sum(axis=-1) / (2.0 * slab_var))


def phase_fit(beta, lam, proj, sigma2):
    """Phase-dependent log-likelihood term ``(b0 P0 + lam b1 P1) / sigma2``.

    ``proj`` is ``(n, 2)``; the remaining terms of ``-||y - mean||^2 / 2
    sigma2`` do not involve the phase because the phase basis has unit
    modulus at every time point.
    """
    beta = np.atleast_2d(beta)
    proj = np.atleast_2d(proj)
    return (beta[:, 0] * proj[:, 0]
            + np.asarray(lam) * beta[:, 1] * proj[:, 1]) / sigma2


def phase_slope_log_ratio(beta, lam, proj_off, proj_on, gamma1, sigma2,
                          slab_var):
    """``log(L0 / L1)`` for switching the phase indicator off.

    ``proj_off`` are the projections with the phase slope masked,
    ``proj_on`` those at the current slope ``gamma1``.
    """
    return (0.5 * (LOG_2PI + np.log(slab_var))
            + phase_fit(beta, lam, proj_off, sigma2)
            - phase_fit(beta, lam, proj_on, sigma2)
            + np.asarray(gamma1) ** 2 / (2.0 * slab_var))


def phase_mh_log_ratio(beta, lam, omega, gamma, proposal, proj, proj_prop,
                       sigma2, slab_var):
    """Log acceptance ratio of a random-walk move of the phase coefficients.

    The slope enters the prior only when ``omega`` is on; both ``gamma``
    and ``proposal`` are ``(n, 2)`` with the slope already masked.
    """
    gamma = np.atleast_2d(gamma)
    proposal = np.atleast_2d(proposal)
    omega = np.asarray(omega)
    prior = (proposal[:, 0] ** 2 - gamma[:, 0] ** 2
             + omega * (proposal[:, 1] ** 2 - gamma[:, 1] ** 2))
    return (phase_fit(beta, lam, proj_prop, sigma2)
            - phase_fit(beta, lam, proj, sigma2)
            - prior / (2.0 * slab_var))


def marginal_slope_log_ratio(proj, gram, sigma2, slab_var):
    """``log(L0 / L1)`` with the coefficients integrated out.

    Each channel is a Gaussian linear model with a ``N(0, slab_var)``
    prior on its coefficients; under the spike only the intercept enters.
    ``proj`` is ``(n, c, 2)``.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    r = (sigma2 / slab_var)[:, None]
    b11 = gram[0, 0] + r
    b12 = gram[0, 1]
    b22 = gram[1, 1] + r
    det = b11 * b22 - b12 ** 2
    p0 = proj[..., 0]
    p1 = proj[..., 1]
    fit1 = (b22 * p0 ** 2 - 2 * b12 * p0 * p1 + b11 * p1 ** 2) / det
    fit0 = p0 ** 2 / b11
    # log det(I + G/r) for the full and intercept-only designs
    logdet1 = np.log(det) - 2 * np.log(r)
    logdet0 = np.log(b11) - np.log(r)
    log_l1_l0 = (-0.5 * (logdet1 - logdet0)
                 + (fit1 - fit0) / (2.0 * sigma2[:, None]))
    return -log_l1_l0.sum(axis=-1)


def draw_coefficients(lam, proj, gram, sigma2, slab_var, rng):
    """Conjugate normal draw of ``(intercept, slope)`` per channel.

    Active voxels draw both coefficients from
    ``N((X'X + r I)^-1 P, sigma2 (X'X + r I)^-1)`` with ``r = sigma2 /
    slab_var``; inactive voxels draw the intercept alone and pin the slope
    at zero.
    """
    n, c, _ = proj.shape
    z = rng.standard_normal((n, c, 2))
    r = (sigma2 / slab_var)[:, None]
    b11 = gram[0, 0] + r
    b12 = gram[0, 1]
    b22 = gram[1, 1] + r
    det = b11 * b22 - b12 ** 2
    if np.any(det <= 0):
        raise NumericalError("singular coefficient system")
    s2 = sigma2[:, None]
    m0 = (b22 * proj[..., 0] - b12 * proj[..., 1]) / det
    m1 = (b11 * proj[..., 1] - b12 * proj[..., 0]) / det
    c11 = s2 * b22 / det
    c12 = -s2 * b12 / det
    c22 = s2 * b11 / det
    l11 = np.sqrt(c11)
    l21 = c12 / l11
    l22 = np.sqrt(np.maximum(c22 - l21 ** 2, 0.0))
    on0 = m0 + l11 * z[..., 0]
    on1 = m1 + l21 * z[..., 0] + l22 * z[..., 1]
    off0 = proj[..., 0] / b11 + np.sqrt(s2 / b11) * z[..., 0]
    active = np.asarray(lam, dtype=bool)[:, None]
    out = np.empty((n, c, 2))
    out[..., 0] = np.where(active, on0, off0)
    out[..., 1] = np.where(active, on1, 0.0)
    return out


def residual_sum_squares(yy, beta, proj, gram):
    """``||y - fitted||^2`` expanded through the projections.

    ``beta`` must already have inactive slopes zeroed.
    """
    b0 = beta[..., 0]
    b1 = beta[..., 1]
    cross = (b0 * proj[..., 0] + b1 * proj[..., 1]).sum(axis=-1)
    quad = (b0 ** 2 * gram[0, 0] + 2 * b0 * b1 * gram[0, 1]
            + b1 ** 2 * gram[1, 1]).sum(axis=-1)
    return yy - 2.0 * cross + quad


def draw_inverse_gamma(shape, scale, rng):
    """``IG(shape, scale)`` draws (density proportional to x^-(a+1) e^(-b/x))."""
    scale = np.asarray(scale, dtype=float)
    return scale / rng.standard_gamma(shape, size=scale.shape)


def draw_noise_variance(rss, n_obs, rng, floor=1e-8):
    """Noise variance under a Jeffreys prior: ``IG(n_obs/2, rss/2)``.

    Draws are floored at ``floor``; a non-positive residual (noiseless
    input, or round-off of an exact fit) yields the floor.
    """
    rss = np.asarray(rss, dtype=float)
    _check_finite(rss, "residual sum of squares")
    draw = draw_inverse_gamma(0.5 * n_obs, np.maximum(rss, 0.0) * 0.5, rng)
    return np.maximum(draw, floor)


def slab_variance_params(intercepts, slopes, lam):
    """Shape and scale of the slab-variance conditional.

    ``intercepts`` and ``slopes`` are ``(n, c)``; every intercept and the
    slopes of active voxels contribute.
    """
    intercepts = np.atleast_2d(intercepts.T).T
    slopes = np.atleast_2d(slopes.T).T
    lam = np.asarray(lam, dtype=float)
    c = intercepts.shape[1]
    shape = 0.5 * c * (lam.size + lam.sum())
    scale = 0.5 * (np.sum(intercepts ** 2)
                   + np.sum((lam[:, None] * slopes) ** 2))
    return shape, scale


def draw_slab_variance(intercepts, slopes, lam, rng):
    shape, scale = slab_variance_params(intercepts, slopes, lam)
    return float(draw_inverse_gamma(shape, scale, rng))


def draw_eta(indicator, spread, kappa, rng):
    """Half-normal auxiliary draw, positive iff the indicator is on.

    ``spread`` is ``1 + m_v' Qs^-1 m_v``; the variance is ``spread/kappa``.
    """
    sd = np.sqrt(np.asarray(spread, dtype=float) / kappa)
    mag = np.abs(rng.standard_normal(sd.shape)) * sd
    return np.where(np.asarray(indicator, dtype=bool), mag, -mag)


def draw_delta(eta, basis, cov_factor, kappa, rng):
    """Spatial effect ``N(H^-1 M' eta / kappa, H^-1 / kappa)``, ``H = Qs + M'M``.

    ``cov_factor`` is the Cholesky factor of ``H^-1``.
    """
    h_inv = cov_factor @ cov_factor.T
    mean = h_inv @ (basis.T @ eta) / kappa
    z = rng.standard_normal(basis.shape[1])
    return mean + cov_factor @ z / np.sqrt(kappa)


def kappa_params(eta, spread, a_kappa=0.5, b_kappa=2000.0):
    """Shape and scale of the smoothing-parameter Gamma conditional."""
    eta = np.asarray(eta, dtype=float)
    shape = a_kappa + 0.5 * eta.size
    scale = 1.0 / (0.5 * np.sum(eta ** 2 / spread) + 1.0 / b_kappa)
    return shape, scale


def draw_kappa(eta, spread, rng, a_kappa=0.5, b_kappa=2000.0):
    shape, scale = kappa_params(eta, spread, a_kappa, b_kappa)
    return float(rng.gamma(shape, scale))
