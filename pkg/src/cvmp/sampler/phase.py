"""Projections of voxel signals onto the phase direction.

Every likelihood term of the polar model reduces to two numbers per voxel,

    P0 = a' y           = sum_t  cos(th_t) y_R,t + sin(th_t) y_I,t
    P1 = (x* . a)' y    = sum_t x_t (cos(th_t) y_R,t + sin(th_t) y_I,t)

with ``th_t = g0 + u_t g1``. Writing ``z_t = y_R,t + i y_I,t`` these are
real parts of ``exp(-i g0) sum_t w_t exp(-i g1 u_t) z_t``. Expanding the
last exponential in powers of ``g1`` turns the per-voxel O(T) sum into an
O(K) dot product with precomputed moments ``sum_t w_t u_t^k z_t``.
"""

import numpy as np

from ..exceptions import NumericalError

N_TERMS = 28
SERIES_RADIUS = 2.0


class PhaseProjector:
    """Evaluate ``(P0, P1)`` for many voxels at arbitrary phase coefficients.

    The power series is used where ``|g1| * max|u| <= radius``; its
    truncation error is below ``radius**K / K!`` (about 1e-21 relative with
    the defaults). Other voxels fall back to direct trigonometric sums.
    """

    def __init__(self, real, imag, design, n_terms=N_TERMS,
                 radius=SERIES_RADIUS):
        self.z = np.asarray(real, dtype=float) + 1j * np.asarray(imag,
                                                                 dtype=float)
        self.x = design.x
        self.u = design.u
        self.n_terms = int(n_terms)
        self.radius = float(radius)
        self.u_max = float(np.max(np.abs(self.u)))
        # two extra moments serve the first and second derivatives
        powers = self.u[:, None] ** np.arange(self.n_terms + 2)[None, :]
        self.m0 = self.z @ powers
        self.m1 = (self.z * self.x) @ powers
        self._k = np.arange(1, self.n_terms, dtype=float)

    @property
    def n_voxels(self):
        return self.z.shape[0]

    def at_zero_slope(self, gamma0, index=slice(None)):
        """Projections with the phase slope masked (``g1 = 0``)."""
        e = np.exp(-1j * np.asarray(gamma0, dtype=float))
        return (e * self.m0[index, 0]).real, (e * self.m1[index, 0]).real

    def direct(self, gamma0, gamma1, index=slice(None)):
        theta = (np.asarray(gamma0)[:, None]
                 + np.asarray(gamma1)[:, None] * self.u)
        w = (np.exp(-1j * theta) * self.z[index]).real
        return w.sum(axis=1), w @ self.x

    def _coef(self, gamma1):
        factors = (-1j * gamma1)[:, None] / self._k
        coef = np.empty((gamma1.size, self.n_terms), dtype=complex)
        coef[:, 0] = 1.0
        np.cumprod(factors, axis=1, out=coef[:, 1:])
        return coef

    def __call__(self, gamma0, gamma1):
        gamma0 = np.asarray(gamma0, dtype=float)
        gamma1 = np.asarray(gamma1, dtype=float)
        if not (np.all(np.isfinite(gamma0)) and np.all(np.isfinite(gamma1))):
            raise NumericalError("invalid phase coefficients")
        coef = self._coef(gamma1)
        k = self.n_terms
        e = np.exp(-1j * gamma0)
        p0 = (e * np.einsum("ij,ij->i", coef, self.m0[:, :k])).real
        p1 = (e * np.einsum("ij,ij->i", coef, self.m1[:, :k])).real
        far = np.abs(gamma1) * self.u_max > self.radius
        if np.any(far):
            idx = np.flatnonzero(far)
            p0[idx], p1[idx] = self.direct(gamma0[idx], gamma1[idx], idx)
        return p0, p1

    def slope_profile(self, gamma0, gamma1, w0, w1):
        """``w0 P0 + w1 P1`` and its first two derivatives in ``g1``.

        Only valid inside the series radius; callers keep ``g1`` there.
        """
        coef = self._coef(np.asarray(gamma1, dtype=float))
        mix = w0[:, None] * self.m0 + w1[:, None] * self.m1
        e = np.exp(-1j * np.asarray(gamma0, dtype=float))
        k = self.n_terms
        f = (e * np.einsum("ij,ij->i", coef, mix[:, :k])).real
        d1 = (-1j * e * np.einsum("ij,ij->i", coef, mix[:, 1:k + 1])).real
        d2 = (-e * np.einsum("ij,ij->i", coef, mix[:, 2:k + 2])).real
        return f, d1, d2

    @property
    def slope_limit(self):
        """Largest ``|g1|`` for which the series is used."""
        return self.radius / max(self.u_max, 1e-300)
