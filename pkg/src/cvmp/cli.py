"""Command-line driver: ``cvmp simulate | fit | metrics | repro``.

Every option can also be set through an environment variable named
``CVMP_<COMMAND>_<OPTION>`` (for example ``CVMP_FIT_THREADS=4``).
Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure.
"""

import csv
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import experiments, io
from .exceptions import ConfigError, DataError, NumericalError
from .metrics import REPORT_FIELDS, aggregate, evaluate
from .simulate import ASSIGNMENTS, SimConfig

logger = logging.getLogger("cvmp")

EXIT_CODES = {ConfigError: 1, DataError: 2, NumericalError: 3}
TABLE_HEADER = ("model",) + REPORT_FIELDS


def _fmt(value):
    return "NA" if value is None else io.FLOAT_FMT % value


def _parse_step(text):
    try:
        parts = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError("bad --mh-step {!r}".format(text))
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError("--mh-step takes one or two values")
    return tuple(parts)


def sampler_options(func):
    """Options shared by ``fit`` and ``repro``."""
    options = [
        click.option("--parcels", default=16, show_default=True,
                     help="Number of parcels G."),
        click.option("--iters", default=1000, show_default=True,
                     help="Sweeps per parcel, burn-in included."),
        click.option("--burnin", default=200, show_default=True),
        click.option("--seed", default=0, show_default=True),
        click.option("--threads", default=1, show_default=True,
                     help="Worker threads for parcels."),
        click.option("--psi-lambda", type=float, default=None,
                     help="Magnitude probit offset (model default if unset)."),
        click.option("--psi-omega", type=float, default=None,
                     help="Phase probit offset (model default if unset)."),
        click.option("--threshold", type=float, default=None,
                     help="Activation threshold (model default if unset)."),
        click.option("--mh-step", default="0.05,0.05", show_default=True,
                     help="Phase proposal sd, one value or 'g0,g1'."),
        click.option("--indicator-update", default="conditional",
                     show_default=True,
                     type=click.Choice(["conditional", "marginal"])),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(model, iters, burnin, seed, psi_lambda, psi_omega,
                 threshold, mh_step, indicator_update):
    overrides = dict(n_iter=iters, burn_in=burnin, seed=seed,
                     mh_step=_parse_step(mh_step),
                     indicator_update=indicator_update)
    if psi_lambda is not None:
        overrides["psi_lambda"] = psi_lambda
    if psi_omega is not None:
        overrides["psi_omega"] = psi_omega
    if threshold is not None:
        overrides["threshold"] = threshold
    return experiments.default_config(model, **overrides).validate()


@click.group(context_settings={"auto_envvar_prefix": "CVMP"})
@click.option("-v", "--verbose", count=True, help="More logging.")
def cli(verbose):
    """Bayesian magnitude/phase activation mapping for complex fMRI."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")


@cli.command()
@click.argument("out", type=click.Path(file_okay=False))
@click.option("--mode", type=click.Choice(["single", "multi"]),
              default="single", show_default=True)
@click.option("--n-maps", default=100, show_default=True,
              help="Random maps in multi mode.")
@click.option("--assignment", type=click.Choice(ASSIGNMENTS + ("all",)),
              default=None, help="Activation type ('all' in multi mode).")
@click.option("--seed", default=0, show_default=True)
def simulate(out, mode, n_maps, assignment, seed):
    """Write simulated dataset directories under OUT."""
    base = SimConfig()
    meta = {"seed": seed, "beta0": base.beta0, "gamma0": base.gamma0,
            "sigma": base.sigma, "mag_scale": base.mag_scale,
            "phase_scale": base.phase_scale}
    if mode == "single":
        assignment = assignment or "both"
        if assignment == "all":
            raise ConfigError("single mode takes one assignment")
        data, design, truth = experiments.single_dataset(seed, assignment)
        io.write_dataset(out, data, design, truth,
                         dict(meta, assignment=assignment))
        click.echo(out)
        return
    wanted = ASSIGNMENTS if assignment in (None, "all") else (assignment,)
    count = 0
    for i, assign, data, design, truth in experiments.multi_datasets(
            n_maps, seed, wanted):
        path = Path(out) / "map{:03d}_{}".format(i, assign)
        io.write_dataset(path, data, design, truth,
                         dict(meta, assignment=assign, map=i))
        count += 1
    click.echo("{} datasets in {}".format(count, out))


@cli.command()
@click.argument("dataset", type=click.Path(file_okay=False))
@click.argument("out", type=click.Path(file_okay=False))
@click.option("--model", type=click.Choice(experiments.MODELS),
              default="cvmp", show_default=True)
@sampler_options
@click.option("--png/--no-png", default=False, help="Also write PNG maps.")
@click.option("--images/--no-images", default=True, show_default=True)
def fit(dataset, out, model, parcels, iters, burnin, seed, threads,
        psi_lambda, psi_omega, threshold, mh_step, indicator_update, png,
        images):
    """Fit MODEL to DATASET and write results to OUT."""
    config = build_config(model, iters, burnin, seed, psi_lambda, psi_omega,
                          threshold, mh_step, indicator_update)
    data, design, _, _ = io.load_dataset(dataset)
    summary = experiments.fit_model(model, data, design, parcels, config,
                                    threads)
    io.write_results(out, summary, data, images=images, png=png,
                     extra={"dataset": Path(dataset).resolve(),
                            "parcels": parcels, "seed": seed})
    n_bad = int(np.sum(~summary.converged))
    if n_bad:
        click.echo("warning: {} voxels above the MCSE target".format(n_bad),
                   err=True)
    click.echo("{} fit in {:.1f} s -> {}".format(model,
                                                 summary.runtime_seconds, out))


def write_report_table(path, rows, header=TABLE_HEADER):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def report_row(label, report):
    return [label] + [_fmt(v) for v in
                      (report.as_dict()[k] for k in REPORT_FIELDS)]


def aggregate_rows(table):
    """Rows ``(data type, model, metric...)`` of ``mean (min, max, sd)``."""
    rows = []
    for (assignment, model), stats in table.items():
        cells = [("NA" if stats[k] is None else stats[k].format())
                 for k in REPORT_FIELDS]
        rows.append([assignment, model] + cells)
    return rows


@cli.command()
@click.argument("results", nargs=-1, required=True,
                type=click.Path(file_okay=False))
@click.option("--truth", type=click.Path(file_okay=False),
              default=None, help="Dataset with truth maps (default: the "
              "dataset recorded by fit).")
@click.option("--aggregate", "do_aggregate", is_flag=True,
              help="Summarise runs per data type and model.")
@click.option("--slope-voxels", type=click.Choice(["all", "active"]),
              default="all", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False),
              default="metrics_report.csv", show_default=True)
def metrics(results, truth, do_aggregate, slope_voxels, out):
    """Score fitted RESULTS directories against truth maps."""
    rows, grouped = [], {}
    for res in results:
        summary = io.load_summary(res)
        info = io.read_manifest(Path(res) / "summary.txt")
        source = truth or info.get("dataset")
        if source is None:
            raise DataError("no truth dataset for {}".format(res))
        _, _, t, man = io.load_dataset(source)
        if t is None:
            raise DataError("dataset {} has no truth maps".format(source))
        if t.beta1_true.size != summary.prob_lambda.size:
            raise DataError("truth and results differ in voxel count")
        report = evaluate(summary, t, slope_voxels)
        rows.append(report_row(summary.model, report))
        key = (man.get("assignment", "unknown"), summary.model)
        grouped.setdefault(key, []).append(report)
    if do_aggregate:
        table = {k: aggregate(v) for k, v in grouped.items()}
        write_report_table(out, aggregate_rows(table),
                           ("data_type",) + TABLE_HEADER)
    else:
        write_report_table(out, rows)
    click.echo(out)


@cli.command()
@click.argument("table", type=click.Choice(["table1", "table3-scaled"]))
@click.argument("out", type=click.Path(file_okay=False))
@click.option("--n-maps", default=10, show_default=True,
              help="Random maps for table3-scaled.")
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--burnin", default=200, show_default=True)
def repro(table, out, n_maps, seed, threads, iters, burnin):
    """Run a simulation study end to end and write its table under OUT."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {m: {"n_iter": iters, "burn_in": burnin}
                 for m in experiments.MODELS}
    if table == "table1":
        reports, summaries = experiments.run_table1(seed, threads=threads,
                                                    overrides=overrides)
        data, _, _ = experiments.single_dataset(seed)
        for model, summary in summaries.items():
            io.write_results(out / model, summary, data)
        write_report_table(out / "table1.csv",
                           [report_row(m, r) for m, r in reports.items()])
        click.echo(out / "table1.csv")
        return
    rows, agg = experiments.run_table3(n_maps, seed, threads=threads,
                                       overrides=overrides)
    write_report_table(
        out / "table3_runs.csv",
        [[r["map"], r["assignment"]] + report_row(r["model"], r["report"])
         for r in rows], ("map", "data_type") + TABLE_HEADER)
    write_report_table(out / "table3.csv", aggregate_rows(agg),
                       ("data_type",) + TABLE_HEADER)
    click.echo(out / "table3.csv")


def main(argv=None):
    """Console entry point mapping library errors to exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ConfigError, DataError, NumericalError) as exc:
        click.echo("error: {}".format(exc), err=True)
        for kind, code in EXIT_CODES.items():
            if isinstance(exc, kind):
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
