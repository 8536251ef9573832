import subprocess
import sys

import numpy as np
import pytest

from filtann.cli import main
from filtann.oracle import read_ground_truth
from filtann.prefilter import read_mask


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--n", "1500", "--dim", "8", "--clusters", "4", "--spread", "0.3",
                 "--out", str(d / "d.fvecs")]) == 0
    assert main(["build", "--dataset", str(d / "d.fvecs"), "--m", "6", "--ef-construction", "32",
                 "--index-dir", str(d / "idx"), "--out", str(d / "g.npz")]) == 0
    return d


def test_help_exits_zero(capsys):
    assert main(["bench", "--help"]) == 0
    assert "--selectivities" in capsys.readouterr().out


def test_usage_errors_exit_two(capsys, workdir):
    assert main([]) == 2
    assert main(["query", "--bogus"]) == 2
    assert main(["query", "--index-dir", str(workdir / "idx"), "--pred", "weird"]) == 2
    assert main(["build", "--dataset", str(workdir / "d.fvecs")]) == 2


def test_runtime_errors_exit_one(tmp_path, capsys):
    assert main(["query", "--index-dir", str(tmp_path / "missing")]) == 1
    (tmp_path / "bad.fvecs").write_bytes(b"\x01\x00")
    assert main(["build", "--dataset", str(tmp_path / "bad.fvecs"), "--out", str(tmp_path / "g.npz")]) == 1


def test_persist_from_snapshot_matches_direct(workdir):
    assert main(["persist", "--dataset", str(workdir / "d.fvecs"), "--graph", str(workdir / "g.npz"),
                 "--index-dir", str(workdir / "idx2")]) == 0
    for name in ("vectors.nvx", "lower.csr", "upper.gph", "attrs.bin"):
        assert (workdir / "idx" / name).read_bytes() == (workdir / "idx2" / name).read_bytes()


def test_mask_and_query(workdir, capsys):
    assert main(["mask", "--index-dir", str(workdir / "idx"), "--pred", "label=1", "--out",
                 str(workdir / "m.bin")]) == 0
    mask = read_mask(workdir / "m.bin")
    assert mask.selected_count == 375
    capsys.readouterr()
    assert main(["query", "--index-dir", str(workdir / "idx"), "--mask", str(workdir / "m.bin"),
                 "--row", "3", "--k", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "rank,id,distance" and len(out) == 7 and out[-1].startswith("# t_dc=")
    assert all(mask.bits[int(line.split(",")[1])] for line in out[1:6])


def test_query_with_k_above_selection_warns(workdir, capsys):
    assert main(["query", "--index-dir", str(workdir / "idx"), "--pred", "id in [0,3)", "--k", "10",
                 "--heuristic", "blind", "--row", "1"]) == 0
    cap = capsys.readouterr()
    rows = [line for line in cap.out.splitlines() if line and line[0].isdigit()]
    assert len(rows) == 3 and "warning" in cap.err


def test_gt_file(workdir):
    assert main(["gt", "--dataset", str(workdir / "d.fvecs"), "--pred", "id<0.5", "--queries", "4", "--k", "7",
                 "--out", str(workdir / "gt.bin")]) == 0
    rows = read_ground_truth(workdir / "gt.bin")
    assert rows.shape == (4, 7) and (rows < 750).all()


def test_bench_csv(workdir, capsys):
    out = workdir / "b.csv"
    assert main(["bench", "--index-dir", str(workdir / "idx"), "--selectivities", "0.1,1.0", "--heuristic",
                 "blind,adaptive-l", "--queries", "4", "--repeats", "1", "--efs", "30", "--page-budget", "32k",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# index=") and "budget=32768" in lines[0]
    assert lines[1].startswith("dataset,heuristic,sigma") and len(lines) == 6


def test_module_entry_point(workdir):
    r = subprocess.run([sys.executable, "-m", "filtann", "mask", "--index-dir", str(workdir / "idx"),
                        "--pred", "rand:0.2:1", "--out", str(workdir / "r.bin")], capture_output=True, text=True)
    assert r.returncode == 0 and "selected 300 of 1500" in r.stdout
