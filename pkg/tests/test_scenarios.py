import csv
import json
import math

import pytest

from tentlab.cli import main
from tentlab.exceptions import SchemaMismatchError
from tentlab.scenarios import REGISTRY, REPORT_KEYS, ConfigError, golden_diff, load_config, run


def _rows(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture(scope="module")
def equality_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("eq")
    code = main(["run", "equality_family", "--out", str(out)])
    return code, out


def test_bundled_equality_family(equality_run):
    code, out = equality_run
    assert code == 0
    rows = _rows(out / "equality_family.jsonl")
    assert len(rows) == 1000
    assert all(abs(r["gap"]) <= 1e-8 for r in rows)
    assert all(list(r) == list(REPORT_KEYS) for r in rows)
    assert {r["seed"] for r in rows} == {20240101}


def test_summary_has_one_row_per_case(equality_run):
    _, out = equality_run
    with open(out / "summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1000


def test_bundled_counterexample_expected_violation(tmp_path, capsys):
    assert main(["run", "noncentered_counterexample", "--out", str(tmp_path)]) == 0
    row, = _rows(tmp_path / "noncentered_counterexample.jsonl")
    assert row["verdict"] == "Violated"
    assert row["expect"] == "violated" and row["status"] == "pass"
    assert row["lhs"] == pytest.approx(4.0) and row["rhs"] == pytest.approx(2.0)


def test_unexpected_violation_fails(tmp_path):
    cfg = _write(tmp_path, "[scenario:bad]\nchecker = noncentered_counterexample\nm1 = 1.0\nm2 = -1.0\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("text, where", [
    ("[scenario:x]\nchecker = no_such_checker\n", "checker"),
    ("[scenario:x]\nchecker = santalo_gaussian\ndim = two\n", "dim"),
    ("[scenario:x]\nchecker = santalo_gaussian\nbogus = 1\n", "bogus"),
    ("[scenario:x\nchecker = santalo_gaussian\n", "c.cfg"),
    ("[scenario:x]\nchecker = santalo_gaussian\nexpect = maybe\n", "expect"),
])
def test_malformed_config_exit_2_with_location(tmp_path, capsys, text, where):
    cfg = _write(tmp_path, text)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and where in err
    assert "c.cfg" in err


def test_config_error_names_the_line(tmp_path):
    cfg = _write(tmp_path, "[run]\nseed = 1\n\n[scenario:x]\nchecker = santalo_gaussian\ndim = two\n")
    with pytest.raises(ConfigError, match=r"c\.cfg:6"):
        load_config(cfg)


def test_checker_error_is_recorded(tmp_path):
    cfg = _write(tmp_path, "[scenario:broken]\nchecker = moment_map\ntarget = nonsense\n"
                           "[scenario:fine]\nchecker = santalo_gaussian\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    broken, = _rows(tmp_path / "o" / "broken.jsonl")
    assert broken["status"] == "error" and "nonsense" in broken["details"]["error"]
    fine, = _rows(tmp_path / "o" / "fine.jsonl")
    assert fine["status"] == "pass"


def test_seed_reproduces_reports_bit_for_bit(tmp_path):
    cfg = _write(tmp_path, "[scenario:sweep]\nchecker = talagrand_sweep\ncases = 6\n"
                           "[scenario:ball]\nchecker = concentration_mc\nkind = ball\nsamples = 100000\n")
    outs = []
    for k in range(2):
        assert main(["run", str(cfg), "--out", str(tmp_path / f"o{k}"), "--seed", "99"]) == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / f"o{k}").iterdir()})
    assert outs[0] == outs[1]
    assert all(r["seed"] == 99 for r in _rows(tmp_path / "o0" / "sweep.jsonl"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o2"), "--seed", "100"]) == 0
    assert (tmp_path / "o2" / "sweep.jsonl").read_bytes() != outs[0]["sweep.jsonl"]


def test_parallel_jobs_keep_order_and_values(tmp_path):
    cfg = _write(tmp_path, "[scenario:b_santalo]\nchecker = santalo_gaussian\n"
                           "[scenario:a_sweep]\nchecker = talagrand_sweep\ncases = 4\n"
                           "[scenario:c_km]\nchecker = km_product\nn = 4097\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "s"), "--jobs", "1"]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "p"), "--jobs", "2"]) == 0
    for name in ("summary.csv", "a_sweep.jsonl", "b_santalo.jsonl", "c_km.jsonl"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()
    with open(tmp_path / "s" / "summary.csv") as fh:
        names = [r["scenario"] for r in csv.DictReader(fh)]
    assert names == sorted(names)


def test_reports_are_strict_json(tmp_path):
    cfg = _write(tmp_path, "[scenario:disc]\nchecker = transport_backends\ncases = 2\n")
    run(cfg, tmp_path / "o")
    text = (tmp_path / "o" / "disc.jsonl").read_text()
    for line in text.splitlines():
        json.loads(line, parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))


# --- golden files --------------------------------------------------------------------------

@pytest.fixture
def golden(tmp_path):
    cfg = _write(tmp_path, "[run]\ntol = 1e-9\n[scenario:pair]\nchecker = noncentered_counterexample\n"
                           "m1 = 1.0\nm2 = 0.5\n")
    run(cfg, tmp_path / "g")
    return tmp_path / "g" / "pair.jsonl"


def _mutate(path, out, fn):
    rows = _rows(path)
    for r in rows:
        fn(r)
    out.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return out


def test_identical_files_pass(golden, capsys):
    assert golden_diff(golden, golden)[0]
    assert main(["diff", str(golden), str(golden)]) == 0
    assert capsys.readouterr().out.startswith("pass")


def test_tiny_numeric_drift_passes(golden, tmp_path):
    drift = _mutate(golden, tmp_path / "d.jsonl", lambda r: r.update(gap=r["gap"] + 1e-12))
    assert golden_diff(drift, golden)[0]
    big = _mutate(golden, tmp_path / "b.jsonl", lambda r: r.update(gap=r["gap"] + 1e-6))
    ok, msg = golden_diff(big, golden)
    assert not ok and "gap" in msg


def test_verdict_flip_fails_naming_scenario(golden, tmp_path, capsys):
    flip = _mutate(golden, tmp_path / "f.jsonl", lambda r: r.update(verdict="Violated"))
    ok, msg = golden_diff(flip, golden)
    assert not ok and "pair" in msg
    assert main(["diff", str(flip), str(golden)]) == 1
    assert "pair" in capsys.readouterr().out


def test_schema_mismatch_raises(golden, tmp_path):
    extra = _mutate(golden, tmp_path / "e.jsonl", lambda r: r.update(extra=1))
    with pytest.raises(SchemaMismatchError):
        golden_diff(extra, golden)
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(SchemaMismatchError):
        golden_diff(tmp_path / "empty.jsonl", golden)
    assert main(["diff", str(extra), str(golden)]) == 2


def test_list_checkers(capsys):
    assert main(["list-checkers"]) == 0
    out = capsys.readouterr().out
    for name in REGISTRY:
        assert f"{name}:" in out
    assert "cases (int) = 1000" in out


def test_acceptance_config_parses():
    names = [s.name for s in load_config("acceptance")]
    assert names == sorted(names) and len(names) >= 12
    assert all(not math.isnan(s.seed) for s in load_config("smoke"))


def test_bundled_name_wins_over_a_directory(tmp_path, monkeypatch):
    (tmp_path / "noncentered_counterexample").mkdir()
    monkeypatch.chdir(tmp_path)
    assert main(["run", "noncentered_counterexample", "--out", "out"]) == 0
