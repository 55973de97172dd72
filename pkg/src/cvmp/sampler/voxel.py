"""Single-voxel versions of the polar-model updates.

These evaluate the phase basis directly through the Hadamard form rather
than the moment expansion used by the parcel chain, and work on one
stacked signal ``y = [y_R; y_I]`` at a time. They are handy for checking
the vectorized sampler and for experimenting with one voxel.
"""

import numpy as np

from ..model import phase_basis
from . import conditionals as cond


def voxel_projections(y, gamma, omega, design):
    """``(a'y, (x* . a)'y)`` for the phase basis ``a`` at ``gamma``."""
    a = phase_basis(gamma, omega, design)
    return np.array([a @ y, (design.x_star * a) @ y])


def lambda_log_ratio(y, beta, gamma, omega, design, sigma2, tau2):
    """``log(L0 / L1)`` of the magnitude indicator at the current slope."""
    proj = voxel_projections(y, gamma, omega, design)
    return float(cond.slope_log_ratio(
        np.asarray(beta, dtype=float)[None, None, :], proj[None, None, :],
        cond.design_gram(design), np.atleast_1d(sigma2), tau2)[0])


def omega_log_ratio(y, beta, lam, gamma, design, sigma2, xi2):
    """``log(L0 / L1)`` of the phase indicator at the current slope."""
    off = voxel_projections(y, gamma, 0, design)
    on = voxel_projections(y, gamma, 1, design)
    return float(cond.phase_slope_log_ratio(beta, lam, off, on, gamma[1],
                                            sigma2, xi2)[0])


def gamma_log_ratio(y, beta, lam, omega, gamma, proposal, design, sigma2,
                    xi2):
    """Log Metropolis ratio of moving the phase coefficients to ``proposal``."""
    gamma = np.array(gamma, dtype=float)
    proposal = np.array(proposal, dtype=float)
    gamma[1] *= omega
    proposal[1] *= omega
    cur = voxel_projections(y, gamma, omega, design)
    new = voxel_projections(y, proposal, omega, design)
    return float(cond.phase_mh_log_ratio(beta, lam, omega, gamma, proposal,
                                         cur, new, sigma2, xi2)[0])


def sample_lambda(y, beta, gamma, omega, design, sigma2, tau2, psi, eta, rng):
    log_ratio = lambda_log_ratio(y, beta, gamma, omega, design, sigma2, tau2)
    prob = cond.inclusion_probability(np.array([log_ratio]), psi, eta)[0]
    return int(rng.random() < prob)


def sample_omega(y, beta, lam, gamma, design, sigma2, xi2, psi, eta, rng):
    log_ratio = omega_log_ratio(y, beta, lam, gamma, design, sigma2, xi2)
    prob = cond.inclusion_probability(np.array([log_ratio]), psi, eta)[0]
    return int(rng.random() < prob)


def sample_beta(y, lam, gamma, omega, design, sigma2, tau2, rng):
    proj = voxel_projections(y, gamma, omega, design)
    return cond.draw_coefficients(np.array([lam]), proj[None, None, :],
                                  cond.design_gram(design),
                                  np.atleast_1d(float(sigma2)), tau2,
                                  rng)[0, 0]


def sample_gamma_mh(y, beta, lam, omega, gamma, design, sigma2, xi2, step,
                    rng):
    """Random-walk Metropolis move; returns ``(gamma, accepted)``.

    With ``omega == 0`` the slope proposal is pinned at zero.
    """
    gamma = np.array(gamma, dtype=float)
    gamma[1] *= omega
    proposal = gamma + np.asarray(step, dtype=float) * rng.standard_normal(2)
    proposal[1] *= omega
    log_r = gamma_log_ratio(y, beta, lam, omega, gamma, proposal, design,
                            sigma2, xi2)
    if np.log(rng.random()) < log_r:
        return proposal, True
    return gamma, False


def sample_sigma2(y, beta, lam, gamma, omega, design, rng, floor=1e-8):
    proj = voxel_projections(y, gamma, omega, design)
    b = np.array([beta[0], lam * beta[1]], dtype=float)
    rss = cond.residual_sum_squares(np.array([y @ y]), b[None, None, :],
                                    proj[None, None, :],
                                    cond.design_gram(design))
    return float(cond.draw_noise_variance(rss, y.size, rng, floor)[0])


__all__ = ["voxel_projections", "lambda_log_ratio", "omega_log_ratio",
           "gamma_log_ratio", "sample_lambda", "sample_omega", "sample_beta",
           "sample_gamma_mh", "sample_sigma2"]
