"""End-to-end simulation studies: simulate, fit all models, score.

The single study fits one three-region map; the multi study draws random
maps and simulates each under the three activation assignments.
"""

import logging

import numpy as np

from .baselines import baseline_config, run_cvri, run_mo
from .exceptions import ConfigError
from .metrics import aggregate, evaluate
from .sampler.chain import SamplerConfig, run_chain
from .simulate import (ASSIGNMENTS, SimConfig, default_design,
                       single_truth_maps, random_truth_maps, simulate_signal)
from .spatial import build_parcel_graphs, parcellate

logger = logging.getLogger(__name__)

MODELS = ("mo", "cvri", "cvmp")
DEFAULT_PARCELS = 16


def default_config(model, **overrides):
    """Sampler settings used for a model unless overridden."""
    if model == "cvmp":
        return SamplerConfig(**overrides)
    if model in ("mo", "cvri"):
        return baseline_config(model, **overrides)
    raise ConfigError("model must be one of {}".format(MODELS))


def fit_model(model, data, design, n_parcels=DEFAULT_PARCELS, config=None,
              threads=1, q=None, neighborhood="edge+corner"):
    """Fit ``model`` on ``data``; returns a PosteriorSummary."""
    config = config or default_config(model)
    parcellation = parcellate(data.dims, n_parcels, data.mask)
    graphs = build_parcel_graphs(data.voxel_coords(), parcellation, q,
                                 neighborhood)
    runner = {"mo": run_mo, "cvri": run_cvri, "cvmp": run_chain}[model]
    return runner(data, design, parcellation, config, graphs=graphs,
                  threads=threads)


def noise_seed(seed, *keys):
    """Integer seed for dataset noise derived from ``seed`` and indices."""
    seq = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(seq.generate_state(1)[0])


def single_dataset(seed=0, assignment="both"):
    truth = single_truth_maps()
    config = SimConfig(seed=noise_seed(seed))
    data, truth = simulate_signal(truth, config, default_design(), assignment)
    return data, default_design(), truth


def multi_datasets(n_maps=10, seed=0, assignments=ASSIGNMENTS):
    """Yield ``(map index, assignment, data, design, truth)`` tuples."""
    design = default_design()
    for i, truth in enumerate(random_truth_maps(n_maps, seed=seed)):
        for j, assignment in enumerate(ASSIGNMENTS):
            if assignment not in assignments:
                continue
            config = SimConfig(seed=noise_seed(seed, i, j))
            data, t = simulate_signal(truth, config, design, assignment)
            yield i, assignment, data, design, t


def _configs(seed, overrides):
    overrides = dict(overrides or {})
    return {m: default_config(m, seed=seed, **overrides.get(m, {}))
            for m in MODELS}


def run_table1(seed=0, models=MODELS, threads=1, overrides=None):
    """Fit every model on the single-simulation map; returns reports.

    ``overrides`` maps a model name to SamplerConfig keyword overrides.
    """
    data, design, truth = single_dataset(seed)
    configs = _configs(seed, overrides)
    reports, summaries = {}, {}
    for model in models:
        summaries[model] = fit_model(model, data, design,
                                     config=configs[model], threads=threads)
        reports[model] = evaluate(summaries[model], truth)
        logger.info("table1 seed=%s %s: %s", seed, model,
                    reports[model].as_dict())
    return reports, summaries


def run_table3(n_maps=10, seed=0, models=MODELS, threads=1, overrides=None,
               assignments=ASSIGNMENTS):
    """Fit every model on ``n_maps`` random maps under each assignment.

    Returns ``(rows, table)``: one dict per fit, and the aggregate per
    (assignment, model).
    """
    rows = []
    for i, assignment, data, design, truth in multi_datasets(
            n_maps, seed, assignments):
        configs = _configs(noise_seed(seed, i), overrides)
        for model in models:
            summary = fit_model(model, data, design, config=configs[model],
                                threads=threads)
            report = evaluate(summary, truth)
            rows.append({"map": i, "assignment": assignment, "model": model,
                         "report": report})
            logger.info("table3 map=%d %s %s: %s", i, assignment, model,
                        report.as_dict())
    table = {}
    for assignment in assignments:
        for model in models:
            sel = [r["report"] for r in rows
                   if r["assignment"] == assignment and r["model"] == model]
            if sel:
                table[assignment, model] = aggregate(sel)
    return rows, table


__all__ = ["MODELS", "default_config", "fit_model", "single_dataset",
           "multi_datasets", "run_table1", "run_table3",
           "noise_seed"]
