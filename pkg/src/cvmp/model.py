"""Polar magnitude/phase signal model and shared numeric primitives.

A voxel's complex time series is modelled as

    y_R,t = (b0 + x_t b1) cos(g0 + u_t g1) + noise
    y_I,t = (b0 + x_t b1) sin(g0 + u_t g1) + noise

and stacked as ``y = [y_R; y_I]`` of length ``2T``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError


def wrap_angle(theta):
    """Wrap angles to the half-open interval (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.pi - np.mod(np.pi - theta, 2.0 * np.pi)
    return wrapped if wrapped.ndim else float(wrapped)


def arctan4(y, x):
    """Four-quadrant arctangent with codomain (-pi, pi].

    Raises DataError when any (x, y) pair is (0, 0).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any((x == 0) & (y == 0)):
        raise DataError("undefined angle: arctan4(0, 0)")
    angle = np.arctan2(y, x)
    angle = np.where(angle <= -np.pi, np.pi, angle)
    return angle if angle.ndim else float(angle)


@dataclass
class ComplexImageSeries:
    """Real and imaginary voxel time series on a regular grid.

    ``real`` and ``imag`` are ``(V, T)``; ``V`` equals ``prod(dims)`` or,
    when ``mask`` is given, the number of ``True`` grid cells (voxels are
    in C order of the grid).
    """

    real: np.ndarray
    imag: np.ndarray
    dims: tuple
    mask: np.ndarray = None

    def __post_init__(self):
        self.real = np.atleast_2d(np.asarray(self.real, dtype=float))
        self.imag = np.atleast_2d(np.asarray(self.imag, dtype=float))
        self.dims = tuple(int(d) for d in self.dims)
        if self.real.shape != self.imag.shape:
            raise DataError(
                "real and imag shapes differ: {} vs {}".format(
                    self.real.shape, self.imag.shape))
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.dims)
            n_vox = int(self.mask.sum())
        else:
            n_vox = int(np.prod(self.dims))
        if self.real.shape[0] != n_vox:
            raise DataError(
                "expected {} voxels for grid {}, got {}".format(
                    n_vox, self.dims, self.real.shape[0]))
        if not (np.all(np.isfinite(self.real))
                and np.all(np.isfinite(self.imag))):
            raise DataError("image series contains non-finite values")

    @property
    def n_voxels(self):
        return self.real.shape[0]

    @property
    def n_times(self):
        return self.real.shape[1]

    @property
    def stacked(self):
        """``(V, 2T)`` array of ``[y_R, y_I]`` rows."""
        return np.hstack([self.real, self.imag])

    @property
    def magnitude(self):
        return np.hypot(self.real, self.imag)

    def voxel_coords(self):
        """Integer grid coordinates ``(V, ndim)`` of the stored voxels."""
        grid = np.indices(self.dims).reshape(len(self.dims), -1).T
        if self.mask is not None:
            grid = grid[self.mask.ravel()]
        return grid

    def to_grid(self, values, fill=0.0):
        """Scatter a length-V vector back onto the image grid."""
        values = np.asarray(values)
        out = np.full(int(np.prod(self.dims)), fill, dtype=values.dtype)
        if self.mask is None:
            out[:] = values
        else:
            out[self.mask.ravel()] = values
        return out.reshape(self.dims)


@dataclass
class DesignPair:
    """Magnitude regressor ``x`` and phase regressor ``u`` (both length T)."""

    x: np.ndarray
    u: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.u = (self.x.copy() if self.u is None
                  else np.asarray(self.u, dtype=float).ravel())
        if self.x.shape != self.u.shape:
            raise DataError("x and u must have the same length")
        if self.x.size < 2:
            raise DataError("design needs at least two time points")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.u))):
            raise DataError("design contains non-finite values")
        if np.ptp(self.x) == 0:
            raise DataError("rank-deficient design: x is constant")

    @property
    def n_times(self):
        return self.x.size

    @property
    def X(self):
        return np.column_stack([np.ones_like(self.x), self.x])

    @property
    def U(self):
        return np.column_stack([np.ones_like(self.u), self.u])

    @property
    def x_star(self):
        """``x`` repeated to length 2T to match the stacked signal."""
        return np.concatenate([self.x, self.x])


def build_design(stimulus_convolved, u="same-as-x"):
    """Assemble a DesignPair; ``u`` is ``"same-as-x"`` or an explicit vector."""
    x = np.asarray(stimulus_convolved, dtype=float)
    if isinstance(u, str):
        if u != "same-as-x":
            raise ValueError("unknown u mode: {!r}".format(u))
        return DesignPair(x)
    return DesignPair(x, u)


@dataclass
class PolarCoefficients:
    beta0: float
    beta1: float
    gamma0: float
    gamma1: float

    def __post_init__(self):
        vals = [self.beta0, self.beta1, self.gamma0, self.gamma1]
        if not np.all(np.isfinite(vals)):
            raise DataError("coefficients must be finite")
        self.gamma0 = wrap_angle(self.gamma0)

    @property
    def beta(self):
        return np.array([self.beta0, self.beta1])

    @property
    def gamma(self):
        return np.array([self.gamma0, self.gamma1])


def phase_basis(gamma, omega, design):
    """Stacked ``[cos(U Omega g); sin(U Omega g)]`` of length 2T.

    ``gamma`` may be ``(2,)`` or ``(n, 2)`` with matching ``omega``;
    ``omega == 0`` masks the phase slope.
    """
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(gamma)):
        raise DataError("invalid phase coefficients")
    omega = np.asarray(omega, dtype=float)
    theta = (gamma[..., 0, None]
             + (omega * gamma[..., 1])[..., None] * design.u)
    return np.concatenate([np.cos(theta), np.sin(theta)], axis=-1)


def polar_mean(beta, lam, gamma, omega, design):
    """Noiseless stacked mean ``A X Lambda beta`` via the Hadamard form."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] != 2 or np.shape(gamma)[-1] != 2:
        raise DataError("beta and gamma must have a trailing axis of 2")
    lam = np.asarray(lam, dtype=float)
    rho = (beta[..., 0, None]
           + (lam * beta[..., 1])[..., None] * design.x_star)
    return rho * phase_basis(gamma, omega, design)
