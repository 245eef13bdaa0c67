import io
import json

import numpy as np
import pytest

from rsac import tail_sums
from rsac.baselines import fit_ztp, rsac_ztp
from rsac.cli import main, read_truth
from rsac.counts import read_histogram

from conftest import SHAKESPEARE_TAIL

NEW_WORDS = {2: 11459, 4: 26494, 6: 37215, 11: 55501, 21: 75894}


def run(argv, capsys=None):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def shakes_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "shakespeare.hist"
    S = SHAKESPEARE_TAIL
    path.write_text("".join(f"{j + 1} {S[j] - S[j + 1]}\n" for j in range(19)) + f"20 {S[19]}\n")
    return str(path)


def _rows(tsv):
    lines = [ln for ln in tsv.splitlines() if not ln.startswith("#")]
    header = lines[0].split("\t")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]


def test_fit_shakespeare(shakes_file):
    code, out = run(["fit", shakes_file])
    assert code == 0
    doc = json.loads(out)
    assert doc["estimator"]["m"] == 3
    c = sorted((t["c"][0] for t in doc["estimator"]["terms"]), reverse=True)
    np.testing.assert_allclose(c, [120357.66, 24934.99, 13453.12], rtol=1e-5)
    assert doc["report"]["rejections"][0] == {"m": 10, "reason": "positive_real_part_pole"}


def test_fit_m1(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("1 3\n2 2\n3 1\n")
    code, out = run(["fit", str(p)])
    assert code == 0 and json.loads(out)["estimator"]["m"] == 1


def test_fit_no_singletons(tmp_path, capsys):
    p = tmp_path / "h.txt"
    p.write_text("2 4\n5 1\n")
    code, out = run(["fit", str(p)])
    assert code == 2 and out == ""
    assert "N_1 > 0 and N_2 > 0" in capsys.readouterr().err


def test_missing_file_and_bad_args(capsys):
    assert run(["fit", "/nonexistent/file"])[0] == 2
    assert run(["extrapolate"])[0] == 2
    assert run(["extrapolate", "x", "--method", "bogus"])[0] == 2


def test_extrapolate_new_words(shakes_file):
    code, out = run(["extrapolate", shakes_file, "--method", "rfa", "--t", "1,2,4,6,11,21",
                     "--r", "1,2"])
    assert code == 0
    rows = {(int(r["r"]), float(r["t"])): float(r["estimate"]) for r in _rows(out)}
    for t, want in NEW_WORDS.items():
        assert rows[(1, float(t))] - SHAKESPEARE_TAIL[0] == pytest.approx(want, rel=0.01)
    assert rows[(2, 2.0)] == pytest.approx(24101, rel=0.01)
    assert rows[(1, 1.0)] == pytest.approx(SHAKESPEARE_TAIL[0], rel=1e-6)
    assert rows[(2, 1.0)] == pytest.approx(SHAKESPEARE_TAIL[1], rel=1e-5)


def test_extrapolate_range_grid(shakes_file):
    code, out = run(["extrapolate", shakes_file, "--method", "rfa", "--r", "1:3",
                     "--t-start", "1", "--t-stop", "2", "--t-step", "0.25"])
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 3 * 5
    assert [float(r["t"]) for r in rows[:5]] == [1.0, 1.25, 1.5, 1.75, 2.0]


def test_extrapolate_auto_header(shakes_file):
    code, out = run(["extrapolate", shakes_file, "--t", "2"])
    assert code == 0
    assert out.startswith("# method=auto->rfa cv=")


def test_extrapolate_ztp_matches_closed_form(tmp_path):
    code, _ = run(["simulate", "--model", "P", "--L", "20000", "--seed", "4",
                   "--out-hist", str(tmp_path / "p.hist")])
    assert code == 0
    code, out = run(["extrapolate", str(tmp_path / "p.hist"), "--method", "ztp", "--r", "1,3",
                     "--t", "1,5"])
    fit = fit_ztp(read_histogram(tmp_path / "p.hist"))
    for row in _rows(out):
        assert float(row["estimate"]) == rsac_ztp(fit, int(row["r"]), float(row["t"]))


def test_bootstrap_bit_reproducible(shakes_file):
    argv = ["extrapolate", shakes_file, "--method", "rfa", "--t", "2,4", "--bootstrap", "8",
            "--seed", "11", "--format", "json"]
    a, b = run(argv)[1], run(argv)[1]
    assert a == b
    doc = json.loads(a)
    assert doc["meta"]["bootstrap"] == 8
    for row in doc["rows"]:
        lo, hi, est = row["ci_low"], row["ci_high"], row["estimate"]
        assert hi / est == pytest.approx(est / lo, rel=1e-12)


def test_simulate_deterministic(tmp_path):
    for k in (1, 2):
        code, out = run(["simulate", "--model", "P", "--L", "100", "--seed", "3",
                         "--out-hist", str(tmp_path / f"h{k}"), "--out-truth", str(tmp_path / f"t{k}")])
        assert code == 0
    assert (tmp_path / "h1").read_bytes() == (tmp_path / "h2").read_bytes()
    assert (tmp_path / "t1").read_bytes() == (tmp_path / "t2").read_bytes()
    summary = json.loads(out)
    assert summary["cv"] == 0.0
    r, t, truth = read_truth(tmp_path / "t1")
    assert truth.shape == (100, 100) and truth[0, 0] == pytest.approx(100 * (1 - np.exp(-1)))


def test_simulate_individuals_mean():
    totals = []
    for seed in range(100):
        code, out = run(["simulate", "--model", "P", "--L", "100", "--t", "0.5", "--seed", str(seed)])
        totals.append(json.loads(out[: out.index("}\n") + 1])["n_individuals"])
    assert abs(np.mean(totals) - 50) < 3 * np.sqrt(50 / 100)


def test_simulate_zipf_cv(tmp_path):
    code, out = run(["simulate", "--model", "Z", "--L", "1000000", "--seed", "0",
                     "--out-hist", str(tmp_path / "z")])
    assert code == 0 and json.loads(out)["cv"] == pytest.approx(10.79, abs=0.01)


def test_compare_from_files(tmp_path):
    run(["simulate", "--model", "NB1", "--L", "3000", "--seed", "2",
         "--out-hist", str(tmp_path / "h"), "--out-truth", str(tmp_path / "t")])
    code, out = run(["compare", "--input", str(tmp_path / "h"), "--truth", str(tmp_path / "t"),
                     "--methods", "rfa,ztnb"])
    assert code == 0
    means = {ln.split("\t")[0]: float(ln.split("\t")[2]) for ln in out.splitlines()
             if "\tmean\t" in ln}
    assert set(means) == {"rfa", "ztnb"} and all(0 <= v < 1 for v in means.values())


def test_compare_model_mode():
    code, out = run(["compare", "--model", "NB1", "--L", "2000", "--reps", "2", "--methods", "ztnb"])
    assert code == 0 and "ztnb\tfailures\t0" in out


def test_compare_needs_inputs():
    assert run(["compare"])[0] == 2


def test_histogram_file_tail(shakes_file):
    np.testing.assert_array_equal(tail_sums(read_histogram(shakes_file), 20), SHAKESPEARE_TAIL)
