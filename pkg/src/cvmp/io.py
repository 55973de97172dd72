"""Text formats for datasets and results, and simple map images.

A dataset directory holds ``real.csv`` and ``imag.csv`` (one row per voxel,
one column per time point), ``design.csv`` (header ``t,x,u``), optional
truth maps ``truth_beta1.csv`` / ``truth_gamma1.csv`` and a ``manifest``
of ``key=value`` lines. Floats are written with 17 significant digits so
a read/write cycle reproduces the file byte for byte.
"""

import os
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError
from .model import ComplexImageSeries, DesignPair
from .simulate import TruthMaps

FORMAT_VERSION = "1"
FLOAT_FMT = "%.17g"
MANIFEST = "manifest"


def write_matrix(path, values, fmt=FLOAT_FMT, header=None):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        np.savetxt(fh, values, fmt=fmt, delimiter=",")


def read_matrix(path, skip_header=False):
    path = Path(path)
    if not path.exists():
        raise DataError("missing file {}".format(path))
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2,
                            skiprows=1 if skip_header else 0)
    except ValueError as exc:
        raise DataError("cannot parse {}: {}".format(path, exc)) from exc
    return values


def write_vector(path, values, fmt=FLOAT_FMT):
    write_matrix(path, np.asarray(values).ravel(), fmt=fmt)


def read_vector(path):
    return read_matrix(path).ravel()


def write_manifest(path, entries):
    with open(path, "w", newline="\n") as fh:
        for key, value in entries.items():
            if isinstance(value, (tuple, list)):
                value = "x".join(str(v) for v in value)
            fh.write("{}={}\n".format(key, value))


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise DataError("missing manifest {}".format(path))
    entries = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError("bad manifest line {!r}".format(line))
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def parse_dims(text):
    try:
        dims = tuple(int(v) for v in str(text).split("x"))
    except ValueError as exc:
        raise DataError("bad dims {!r}".format(text)) from exc
    if not dims or min(dims) < 1:
        raise DataError("bad dims {!r}".format(text))
    return dims


def write_dataset(directory, data, design, truth=None, extra=None):
    """Write a dataset directory; returns its path."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("cannot create {}: {}".format(directory, exc))
    write_matrix(directory / "real.csv", data.real)
    write_matrix(directory / "imag.csv", data.imag)
    t = np.arange(design.n_times)
    write_matrix(directory / "design.csv",
                 np.column_stack([t, design.x, design.u]),
                 header=("t", "x", "u"))
    entries = {"format_version": FORMAT_VERSION, "dims": data.dims,
               "T": data.n_times, "V": data.n_voxels,
               "real": "real.csv", "imag": "imag.csv",
               "design": "design.csv"}
    if truth is not None:
        write_vector(directory / "truth_beta1.csv", truth.beta1_true)
        write_vector(directory / "truth_gamma1.csv", truth.gamma1_true)
        entries["truth_beta1"] = "truth_beta1.csv"
        entries["truth_gamma1"] = "truth_gamma1.csv"
    if data.mask is not None:
        write_vector(directory / "mask.csv", data.mask.ravel().astype(int),
                     fmt="%d")
        entries["mask"] = "mask.csv"
    entries.update(extra or {})
    write_manifest(directory / MANIFEST, entries)
    return directory


def load_dataset(directory):
    """Read and validate a dataset directory.

    Returns ``(data, design, truth, manifest)``; ``truth`` is ``None`` when
    the manifest names no truth maps. Every shape is checked against the
    manifest before anything is returned.
    """
    directory = Path(directory)
    man = read_manifest(directory / MANIFEST)
    for key in ("dims", "T", "real", "imag", "design"):
        if key not in man:
            raise DataError("manifest lacks {!r}".format(key))
    dims = parse_dims(man["dims"])
    n_times = int(man["T"])
    real = read_matrix(directory / man["real"])
    imag = read_matrix(directory / man["imag"])
    n_vox = int(man.get("V", np.prod(dims)))
    for name, arr in (("real", real), ("imag", imag)):
        if arr.shape != (n_vox, n_times):
            raise DataError("{} has shape {}, manifest says {}x{}".format(
                name, arr.shape, n_vox, n_times))
    table = read_matrix(directory / man["design"], skip_header=True)
    if table.shape != (n_times, 3):
        raise DataError("design has shape {}, expected {}x3".format(
            table.shape, n_times))
    design = DesignPair(table[:, 1], table[:, 2])
    mask = None
    if "mask" in man:
        mask = read_vector(directory / man["mask"]).astype(bool)
    data = ComplexImageSeries(real, imag, dims, mask=mask)
    truth = None
    if "truth_beta1" in man:
        b1 = read_vector(directory / man["truth_beta1"])
        g1 = read_vector(directory / man["truth_gamma1"])
        if b1.size != n_vox or g1.size != n_vox:
            raise DataError("truth maps do not match the voxel count")
        truth = TruthMaps(b1, g1, dims)
    return data, design, truth, man


def write_results(directory, summary, data=None, images=True, png=False,
                  extra=None):
    """Write a fitted summary as CSV files plus map images.

    Everything except ``timing.txt`` is a deterministic function of the
    data and sampler settings.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("cannot create {}: {}".format(directory, exc))
    write_vector(directory / "prob_lambda.csv", summary.prob_lambda)
    write_vector(directory / "active_mag.csv", summary.active_mag, fmt="%d")
    write_matrix(directory / "mean_beta.csv", summary.mean_beta)
    if summary.mean_sigma2 is not None:
        write_vector(directory / "mean_sigma2.csv", summary.mean_sigma2)
    mcse = [summary.mcse_lambda]
    if summary.prob_omega is not None:
        write_vector(directory / "prob_omega.csv", summary.prob_omega)
        write_vector(directory / "active_phase.csv", summary.active_phase,
                     fmt="%d")
        write_matrix(directory / "mean_gamma.csv", summary.mean_gamma)
        mcse.append(summary.mcse_omega)
    write_matrix(directory / "mcse.csv", np.column_stack(mcse))
    entries = {"model": summary.model, "n_iter": summary.n_iter,
               "burn_in": summary.burn_in, "threshold": summary.threshold,
               "mcse_target": summary.mcse_target,
               "unconverged_voxels": int(np.sum(~summary.converged)),
               "max_mcse": FLOAT_FMT % max(float(m.max()) for m in mcse)}
    if summary.acceptance_rate is not None:
        entries["mean_acceptance"] = FLOAT_FMT % float(
            summary.acceptance_rate.mean())
    entries.update(extra or {})
    write_manifest(directory / "summary.txt", entries)
    write_manifest(directory / "timing.txt", {
        "runtime_seconds": "{:.3f}".format(summary.runtime_seconds)})
    if images and data is not None:
        maps = [("active_mag", summary.active_mag, "binary"),
                ("prob_lambda", summary.prob_lambda, "gray"),
                ("beta1", summary.mean_beta[:, 1], "diverging")]
        if summary.prob_omega is not None:
            maps += [("active_phase", summary.active_phase, "binary"),
                     ("prob_omega", summary.prob_omega, "gray"),
                     ("gamma1", summary.mean_gamma[:, 1], "diverging")]
        for name, values, palette in maps:
            emit_map_image(directory / (name + ".ppm"),
                           data.to_grid(values), data.dims, palette=palette,
                           png=png)
    return directory


def load_results(directory):
    """Read the arrays written by :func:`write_results` into a dict."""
    directory = Path(directory)
    out = {"summary": read_manifest(directory / "summary.txt")}
    if (directory / "timing.txt").exists():
        out["summary"].update(read_manifest(directory / "timing.txt"))
    for name in ("prob_lambda", "active_mag", "prob_omega", "active_phase",
                 "mean_sigma2"):
        path = directory / (name + ".csv")
        if path.exists():
            out[name] = read_vector(path)
    for name in ("mean_beta", "mean_gamma", "mcse"):
        path = directory / (name + ".csv")
        if path.exists():
            out[name] = read_matrix(path)
    return out


def load_summary(directory):
    """Rebuild a PosteriorSummary from a results directory."""
    from .sampler.chain import PosteriorSummary

    res = load_results(directory)
    info = res["summary"]
    mcse = res["mcse"]
    has_phase = "prob_omega" in res
    return PosteriorSummary(
        model=info["model"], mean_beta=res["mean_beta"],
        prob_lambda=res["prob_lambda"],
        active_mag=res["active_mag"].astype(int),
        mcse_lambda=mcse[:, 0], threshold=float(info["threshold"]),
        mean_gamma=res.get("mean_gamma"), prob_omega=res.get("prob_omega"),
        active_phase=(res["active_phase"].astype(int) if has_phase
                      else None),
        mcse_omega=mcse[:, 1] if has_phase else None,
        mean_sigma2=res.get("mean_sigma2"),
        mcse_target=float(info.get("mcse_target", 0.05)),
        runtime_seconds=float(info.get("runtime_seconds", 0.0)),
        n_iter=int(info.get("n_iter", 0)),
        burn_in=int(info.get("burn_in", 0)))


PALETTES = ("binary", "diverging", "gray")


def map_to_rgb(values, dims, palette="binary"):
    """Render a voxel map as an ``(rows, cols, 3)`` uint8 image.

    Only 2-D grids are rendered directly; 3-D grids are tiled slice by
    slice along the last axis.
    """
    values = np.asarray(values, dtype=float).ravel()
    dims = tuple(int(d) for d in dims)
    if values.size != int(np.prod(dims)):
        raise DataError("map has {} values for dims {}".format(values.size,
                                                               dims))
    if len(dims) == 3:
        grid = values.reshape(dims)
        grid = np.concatenate([grid[:, :, k] for k in range(dims[2])], axis=1)
    elif len(dims) == 2:
        grid = values.reshape(dims)
    else:
        grid = values.reshape(1, -1)
    if palette == "binary":
        on = grid != 0
        rgb = np.where(on[..., None], np.array([255, 210, 0]),
                       np.array([20, 20, 40]))
    elif palette == "gray":
        level = np.clip(np.round(255 * grid), 0, 255)
        rgb = np.repeat(level[..., None], 3, axis=2)
    elif palette == "diverging":
        scale = np.max(np.abs(grid))
        s = grid / scale if scale > 0 else np.zeros_like(grid)
        white = np.array([255.0, 255.0, 255.0])
        red = np.array([180.0, 20.0, 30.0])
        blue = np.array([30.0, 60.0, 180.0])
        pos = np.clip(s, 0, 1)[..., None]
        neg = np.clip(-s, 0, 1)[..., None]
        rgb = white + pos * (red - white) + neg * (blue - white)
        rgb = np.round(rgb)
    else:
        raise ConfigError("palette must be one of {}".format(PALETTES))
    return rgb.astype(np.uint8)


def write_ppm(path, rgb):
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    rows, cols, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write("P6\n{} {}\n255\n".format(cols, rows).encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P6":
        raise DataError("not a binary PPM file")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise DataError("unsupported PPM depth {}".format(maxval))
    pixels = np.frombuffer(raw[pos + 1:pos + 1 + rows * cols * 3],
                           dtype=np.uint8)
    return pixels.reshape(rows, cols, 3)


def emit_map_image(path, values, dims, palette="binary", png=False):
    """Write a map as a binary PPM and, if Pillow is installed, a PNG."""
    rgb = map_to_rgb(values, dims, palette)
    path = Path(path)
    write_ppm(path, rgb)
    if png:
        try:
            from PIL import Image
        except ImportError:
            return path
        Image.fromarray(rgb).save(os.fspath(path.with_suffix(".png")))
    return path


__all__ = ["write_matrix", "read_matrix", "write_vector", "read_vector",
           "write_manifest", "read_manifest", "write_dataset",
           "load_dataset", "write_results", "load_results", "load_summary",
           "map_to_rgb",
           "write_ppm", "read_ppm", "emit_map_image", "FORMAT_VERSION"]
