import csv

import pytest

from cvmp.cli import main
from cvmp.metrics import REPORT_FIELDS


def files(directory, skip=("timing.txt",)):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())
            if p.name not in skip}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "single"
    assert main(["simulate", str(out), "--seed", "2"]) == 0
    return out


def test_simulate_single_is_reproducible(dataset, tmp_path):
    names = files(dataset)
    assert {"real.csv", "imag.csv", "design.csv", "truth_beta1.csv",
            "truth_gamma1.csv", "manifest"} <= set(names)
    with open(dataset / "real.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2500 and len(rows[0]) == 200
    assert (dataset / "design.csv").read_text().startswith("t,x,u\n")
    again = tmp_path / "again"
    assert main(["simulate", str(again), "--seed", "2"]) == 0
    assert files(again) == names


def test_simulate_multi(tmp_path):
    assert main(["simulate", str(tmp_path), "--mode", "multi",
                 "--n-maps", "2"]) == 0
    dirs = sorted(p.name for p in tmp_path.iterdir())
    assert len(dirs) == 6
    assert "map000_mag-only" in dirs and "map001_both" in dirs


def test_fit_is_thread_independent(dataset, tmp_path):
    outputs = []
    for threads in (1, 4, 8):
        out = tmp_path / "t{}".format(threads)
        assert main(["fit", str(dataset), str(out), "--iters", "30",
                     "--burnin", "10", "--threads", str(threads)]) == 0
        outputs.append(files(out))
    assert outputs[0] == outputs[1] == outputs[2]
    assert {"prob_lambda.csv", "prob_omega.csv", "active_mag.csv",
            "active_phase.csv", "mean_beta.csv", "mean_gamma.csv",
            "mcse.csv", "summary.txt", "gamma1.ppm"} <= set(outputs[0])
    assert (tmp_path / "t1" / "timing.txt").exists()


def test_fit_baseline_and_metrics(dataset, tmp_path):
    mo = tmp_path / "mo"
    assert main(["fit", str(dataset), str(mo), "--model", "mo", "--iters",
                 "30", "--burnin", "10", "--no-images"]) == 0
    assert not (mo / "prob_omega.csv").exists()
    assert not list(mo.glob("*.ppm"))
    cv = tmp_path / "cv"
    assert main(["fit", str(dataset), str(cv), "--iters", "30", "--burnin",
                 "10", "--no-images"]) == 0
    report = tmp_path / "report.csv"
    assert main(["metrics", str(mo), str(cv), "--out", str(report)]) == 0
    with open(report) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["model"] + list(REPORT_FIELDS)
    assert [r[0] for r in rows[1:]] == ["mo", "cvmp"]
    assert rows[1][REPORT_FIELDS.index("gamma1_slope") + 1] == "NA"
    agg = tmp_path / "agg.csv"
    assert main(["metrics", str(cv), str(cv), "--aggregate", "--truth",
                 str(dataset), "--out", str(agg)]) == 0
    with open(agg) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["data_type", "model"]
    assert rows[1][:2] == ["both", "cvmp"]
    assert "(" in rows[1][2] and rows[1][2].count(",") == 2


def test_perfect_prediction_metrics(dataset, tmp_path):
    import numpy as np
    from cvmp import io
    from cvmp.sampler.chain import PosteriorSummary
    _, _, truth, _ = io.load_dataset(dataset)
    n = truth.beta1_true.size
    act = truth.active_any.astype(float)
    s = PosteriorSummary("cvmp", np.column_stack([np.zeros(n),
                                                  truth.beta1_true]),
                         act, truth.active_any, np.zeros(n), 0.5,
                         mean_gamma=np.column_stack([np.zeros(n),
                                                     truth.gamma1_true]),
                         prob_omega=act, active_phase=truth.active_any,
                         mcse_omega=np.zeros(n))
    io.write_results(tmp_path / "perfect", s, images=False,
                     extra={"dataset": dataset})
    out = tmp_path / "m.csv"
    assert main(["metrics", str(tmp_path / "perfect"), "--out",
                 str(out)]) == 0
    with open(out) as fh:
        row = list(csv.reader(fh))[1]
    assert float(row[1]) == 1.0 and float(row[5]) == 1.0
    assert float(row[6]) == pytest.approx(1.0)


def test_repro_tables(tmp_path):
    assert main(["repro", "table1", str(tmp_path / "t1"), "--iters", "12",
                 "--burnin", "4"]) == 0
    with open(tmp_path / "t1" / "table1.csv") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["mo", "cvri", "cvmp"]
    assert main(["repro", "table3-scaled", str(tmp_path / "t3"),
                 "--n-maps", "1", "--iters", "12", "--burnin", "4"]) == 0
    with open(tmp_path / "t3" / "table3.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 9
    assert {(r[0], r[1]) for r in rows[1:]} == {
        (a, m) for a in ("mag-only", "phase-only", "both")
        for m in ("mo", "cvri", "cvmp")}


def test_exit_codes(tmp_path, dataset):
    assert main(["fit", str(tmp_path / "missing"), str(tmp_path / "o")]) == 2
    assert main(["fit", str(dataset), str(tmp_path / "o"), "--iters", "5",
                 "--burnin", "10"]) == 1
    assert main(["fit", str(dataset), str(tmp_path / "o"), "--mh-step",
                 "a,b"]) == 1
    assert main(["fit", str(dataset), str(tmp_path / "o"), "--model",
                 "xyz"]) == 1
    assert main(["metrics", str(tmp_path / "nothing")]) == 2
