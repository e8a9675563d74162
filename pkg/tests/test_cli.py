import numpy as np
import pytest

from evcorner.cli import main, read_labels
from evcorner.events import read_events
from evcorner.pipeline import Stage

SCENE = """[scene]
width = 64
height = 48
duration = 0.3
noise_rate = 0.05
seed = 2
multiplicity = 3
edge_width = 1.5

[shape a]
vertices = 10,10 26,10 26,26 10,26
velocity = 80, 45
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "scene.ini").write_text(SCENE)
    assert main(["synth", "--spec", str(d / "scene.ini"), "--out", str(d / "ev.bin"),
                 "--truth", str(d / "truth.csv")]) == 0
    return d


def test_synth_writes_stream_and_truth(workdir):
    events, geom = read_events(workdir / "ev.bin")
    assert events.size > 1000 and (geom.width, geom.height) == (64, 48)
    assert (workdir / "truth.csv").read_text().startswith("vertex_id,t_us,x,y\n")


def test_detect_then_eval(workdir, capsys):
    labels, summary = workdir / "labels.csv", workdir / "summary.txt"
    assert main(["detect", "--in", str(workdir / "ev.bin"), "--detector", "esusan",
                 "--out", str(labels), "--summary", str(summary)]) == 0
    events, stages, header = read_labels(labels)
    assert header["detector"] == "esusan" and len(header["config_hash"]) == 16
    assert header["geometry"] == "64x48" and float(header["harris_threshold"]) == 16
    assert events.size == read_events(workdir / "ev.bin")[0].size
    assert np.any(stages == Stage.CORNER)
    capsys.readouterr()
    assert main(["eval", "--labels", str(labels), "--truth", str(workdir / "truth.csv"),
                 "--summary", str(summary)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("# config_hash=")
    assert "# tpr_denominator=post-filter signal events" in out
    row = out[-1].split(",")
    assert row[0] == "esusan" and 0 < float(row[1]) < 100


def test_detect_is_byte_identical(workdir):
    outs = []
    for i in range(2):
        path = workdir / f"same{i}.csv"
        assert main(["detect", "--in", str(workdir / "ev.bin"), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_config_and_set_change_hash(workdir):
    a, b = workdir / "a.csv", workdir / "b.csv"
    main(["detect", "--in", str(workdir / "ev.bin"), "--out", str(a)])
    main(["detect", "--in", str(workdir / "ev.bin"), "--out", str(b), "--set", "tgf.lambda=2"])
    assert read_labels(a)[2]["config_hash"] != read_labels(b)[2]["config_hash"]


def test_convert_and_filter(workdir):
    txt = workdir / "ev.txt"
    assert main(["convert", "--in", str(workdir / "ev.bin"), "--out", str(txt)]) == 0
    back, _ = read_events(txt, geometry=read_events(workdir / "ev.bin")[1])
    np.testing.assert_array_equal(back, read_events(workdir / "ev.bin")[0])
    assert main(["filter", "--in", str(txt), "--geometry", "64x48",
                 "--out", str(workdir / "f.bin")]) == 0
    kept, _ = read_events(workdir / "f.bin")
    assert 0 < kept.size < back.size


@pytest.mark.parametrize("method", ["minmax", "aed", "binary", "sits", "exp"])
def test_normalize_prints_patch(workdir, capsys, method):
    assert main(["normalize", "--in", str(workdir / "ev.bin"), "--method", method,
                 "--index", "2000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith(f"# method={method} index=2000")
    assert len(lines) == 10 and all(len(r.split(",")) == 9 for r in lines[1:])


def test_bench_orders_rows(workdir, capsys):
    out = workdir / "bench.csv"
    assert main(["bench", "--in", str(workdir / "ev.bin"), "--runs", "1",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[3:]
    times = [float(r.split(",")[1]) for r in rows]
    assert len(rows) == 4 and times == sorted(times)


@pytest.mark.parametrize("argv, code", [
    (["detect", "--in", "x.bin", "--detector", "fast"], 1),
    (["nonsense"], 1),
    (["detect", "--in", "missing.bin"], 2),
    (["bench", "--in", "missing.bin", "--runs", "0"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_bad_config_key_exits_one(workdir):
    assert main(["detect", "--in", str(workdir / "ev.bin"), "--set", "tgf.nope=1"]) == 1
    cfg = workdir / "bad.cfg"
    cfg.write_text("esusan.g = 1 2 3\n")
    assert main(["detect", "--in", str(workdir / "ev.bin"), "--config", str(cfg)]) == 1


def test_malformed_input_exits_two(workdir, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0.1 1 1 1\n0.05 1 1 1\n")
    assert main(["detect", "--in", str(bad), "--geometry", "64x48"]) == 2
    assert main(["detect", "--in", str(bad)]) == 2
    labels = tmp_path / "labels.csv"
    labels.write_text("t_us,x,y\n")
    assert main(["eval", "--labels", str(labels), "--truth", str(workdir / "truth.csv")]) == 2
