"""Synthetic complex-valued fMRI data: stimulus, BOLD response, truth maps."""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .exceptions import ConfigError, DataError
from .model import ComplexImageSeries, DesignPair

MAG_SCALE = 0.04909
PHASE_SCALE = np.pi / 36
ASSIGNMENTS = ("mag-only", "phase-only", "both")
MAX_PLACEMENT_TRIES = 1000


@dataclass(frozen=True)
class StimulusSpec:
    epochs: int = 5
    on_len: int = 20
    off_len: int = 20
    active_first: bool = True

    @property
    def n_times(self):
        return self.epochs * (self.on_len + self.off_len)


def make_stimulus(spec=StimulusSpec()):
    """Binary boxcar of ``epochs`` repetitions of on/off blocks."""
    if spec.epochs < 1 or spec.on_len < 1 or spec.off_len < 1:
        raise ConfigError("epochs and block lengths must be positive")
    on = np.ones(spec.on_len)
    off = np.zeros(spec.off_len)
    epoch = np.concatenate([on, off] if spec.active_first else [off, on])
    return np.tile(epoch, spec.epochs)


def double_gamma_hrf(t, peak=6.0, undershoot=16.0, peak_disp=1.0,
                     under_disp=1.0, ratio=1 / 6, onset=0.0):
    """Canonical two-gamma haemodynamic response evaluated at ``t`` seconds.

    Each lobe is a gamma density with shape ``lobe / disp`` and scale
    ``disp``; the undershoot lobe is weighted by ``ratio``.
    """
    if peak_disp <= 0 or under_disp <= 0:
        raise ConfigError("HRF dispersions must be positive")
    t = np.asarray(t, dtype=float) - onset
    pos = stats.gamma.pdf(t, peak / peak_disp, scale=peak_disp)
    neg = stats.gamma.pdf(t, undershoot / under_disp, scale=under_disp)
    h = np.where(t >= 0, pos - ratio * neg, 0.0)
    return h if h.ndim else float(h)


def expected_bold(stimulus, tr=1.0, **hrf_params):
    """Causal convolution of ``stimulus`` with the sampled HRF, max-scaled to 1.

    An all-zero stimulus returns zeros.
    """
    s = np.asarray(stimulus, dtype=float).ravel()
    if s.size == 0:
        raise ConfigError("stimulus is empty")
    kernel = double_gamma_hrf(np.arange(s.size) * tr, **hrf_params)
    response = np.convolve(s, kernel)[:s.size]
    peak = np.max(np.abs(response))
    return response / peak if peak > 0 else response


def default_design():
    """Five 20-on/20-off epochs convolved with the HRF, with ``u = x``."""
    return DesignPair(expected_bold(make_stimulus(StimulusSpec())))


@dataclass(frozen=True)
class RegionSpec:
    center: tuple
    radius: int
    shape: str = "circle"
    decay: float = 0.0

    def __post_init__(self):
        if self.shape not in ("circle", "square"):
            raise ConfigError("shape must be 'circle' or 'square'")
        if self.decay < 0:
            raise ConfigError("decay must be non-negative")
        if self.radius < 0:
            raise ConfigError("radius must be non-negative")


def _region_distance(grid, region):
    offsets = grid - np.asarray(region.center, dtype=float)
    if region.shape == "circle":
        return np.sqrt(np.sum(offsets ** 2, axis=-1))
    return np.max(np.abs(offsets), axis=-1)


def _check_inside(dims, region):
    c = np.asarray(region.center)
    if c.size != len(dims):
        raise ConfigError("region center dimension does not match grid")
    lo = c - region.radius
    hi = c + region.radius
    if np.any(lo < 0) or np.any(hi > np.asarray(dims) - 1):
        raise ConfigError("region {} out of bounds".format(region))


def strength_map(dims, regions):
    """Per-voxel strength in [0, 1]: ``max(0, 1 - decay * d)`` inside regions.

    ``d`` is the Euclidean distance to the center for circles and the
    Chebyshev distance for squares; membership is ``d <= radius``.
    """
    dims = tuple(int(d) for d in dims)
    grid = np.indices(dims).reshape(len(dims), -1).T
    out = np.zeros(grid.shape[0])
    taken = np.zeros(grid.shape[0], dtype=bool)
    for region in regions:
        _check_inside(dims, region)
        d = _region_distance(grid, region)
        inside = d <= region.radius
        if np.any(inside & taken):
            raise ConfigError("overlapping regions")
        taken |= inside
        out[inside] = np.clip(1.0 - region.decay * d[inside], 0.0, 1.0)
    return out


@dataclass
class TruthMaps:
    """True slope maps; indicator maps follow from their support."""

    beta1_true: np.ndarray
    gamma1_true: np.ndarray
    dims: tuple = None
    regions: tuple = field(default=())

    def __post_init__(self):
        self.beta1_true = np.asarray(self.beta1_true, dtype=float).ravel()
        self.gamma1_true = np.asarray(self.gamma1_true, dtype=float).ravel()
        if self.beta1_true.shape != self.gamma1_true.shape:
            raise DataError("truth maps must have equal length")

    @property
    def active_mag(self):
        return (self.beta1_true != 0).astype(int)

    @property
    def active_phase(self):
        return (self.gamma1_true != 0).astype(int)

    @property
    def active_any(self):
        return np.maximum(self.active_mag, self.active_phase)

    def assign(self, assignment):
        """Zero the slope map(s) excluded by ``assignment``."""
        if assignment == "both":
            return self
        if assignment == "mag-only":
            return replace(self, gamma1_true=np.zeros_like(self.gamma1_true))
        if assignment == "phase-only":
            return replace(self, beta1_true=np.zeros_like(self.beta1_true))
        raise ConfigError("assignment must be one of {}".format(ASSIGNMENTS))


@dataclass(frozen=True)
class SimConfig:
    beta0: float = 0.4909
    gamma0: float = np.pi / 4
    sigma: float = 0.04909
    mag_scale: float = MAG_SCALE
    phase_scale: float = PHASE_SCALE
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")

    @property
    def snr_mag(self):
        return self.beta0 / self.sigma

    def cnr_mag(self, truth):
        return np.max(truth.beta1_true) / self.sigma

    def cnr_phase(self, truth):
        return np.max(truth.gamma1_true) / self.snr_mag


# Layout of the three-region single-simulation map on a 50x50 panel:
# (center, radius, shape, decay, magnitude-active, phase-active).
SINGLE_SIM_REGIONS = (
    ((14, 14), 5, "circle", 0.05, True, False),
    ((14, 35), 5, "circle", 0.05, False, True),
    ((35, 24), 5, "square", 0.15, True, True),
)


def single_truth_maps(config=SimConfig()):
    """Single-simulation truth: magnitude-only, phase-only and joint regions."""
    dims = (50, 50)
    beta1 = np.zeros(2500)
    gamma1 = np.zeros(2500)
    regions = []
    for center, radius, shape, decay, mag, ph in SINGLE_SIM_REGIONS:
        region = RegionSpec(center, radius, shape, decay)
        regions.append(region)
        s = strength_map(dims, [region])
        if mag:
            beta1 += config.mag_scale * s
        if ph:
            gamma1 += config.phase_scale * s
    return TruthMaps(beta1, gamma1, dims, tuple(regions))


def _place_regions(rng, dims, n_regions, radius_range, decay_range, shapes):
    placed = []
    taken = np.zeros(int(np.prod(dims)), dtype=bool)
    grid = np.indices(dims).reshape(len(dims), -1).T
    for _ in range(n_regions):
        for _attempt in range(MAX_PLACEMENT_TRIES):
            radius = int(rng.integers(radius_range[0], radius_range[1] + 1))
            shape = shapes[int(rng.integers(len(shapes)))]
            decay = float(rng.uniform(*decay_range))
            center = tuple(int(rng.integers(radius, d - radius))
                           for d in dims)
            region = RegionSpec(center, radius, shape, decay)
            inside = _region_distance(grid, region) <= radius
            if not np.any(inside & taken):
                taken |= inside
                placed.append(region)
                break
        else:
            raise ConfigError("cannot place regions")
    return placed


def random_truth_maps(n_maps, seed=0, dims=(50, 50), n_regions=3,
                      radius_range=(2, 6), decay_range=(0.0, 0.3),
                      mag_scale=MAG_SCALE, phase_scale=PHASE_SCALE):
    """Random three-region strength maps scaled into beta1/gamma1 truth maps.

    Map ``i`` is drawn from its own stream seeded by ``(seed, i)``, so the
    result does not depend on how many maps are requested.
    """
    if n_maps < 1:
        raise ConfigError("n_maps must be at least 1")
    maps = []
    for i in range(n_maps):
        rng = np.random.default_rng([int(seed), i])
        regions = _place_regions(rng, dims, n_regions, radius_range,
                                 decay_range, ("circle", "square"))
        s = strength_map(dims, regions)
        maps.append(TruthMaps(mag_scale * s, phase_scale * s, tuple(dims),
                              tuple(regions)))
    return maps


def noiseless_signal(truth, config, design):
    """Noiseless ``(real, imag)`` arrays for the given truth maps."""
    if design.n_times < 2:
        raise DataError("design too short")
    rho = config.beta0 + np.outer(truth.beta1_true, design.x)
    theta = config.gamma0 + np.outer(truth.gamma1_true, design.u)
    return rho * np.cos(theta), rho * np.sin(theta)


def simulate_signal(truth, config, design, assignment="both"):
    """Draw a complex image series from the polar model with iid noise.

    Returns the series and the truth maps restricted to ``assignment``.
    """
    truth = truth.assign(assignment)
    real, imag = noiseless_signal(truth, config, design)
    rng = np.random.default_rng(config.seed)
    real = real + config.sigma * rng.standard_normal(real.shape)
    imag = imag + config.sigma * rng.standard_normal(imag.shape)
    dims = truth.dims if truth.dims is not None else (real.shape[0],)
    return ComplexImageSeries(real, imag, dims), truth
