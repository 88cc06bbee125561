import json
import subprocess
import sys

import pytest

from linres.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, main

SMALL_GREENS = """
comment = "small greens run for tests"
experiment = "greens"
[model]
n = 4
mu = 5.0
delta = [0.0, 0.4]
boundary = "periodic"
[run]
t_max = 20.0
tau = 5.0
verify = true
tolerance = {tol}
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_dir(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_compress_reproduces_block_counts(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["compress", "--n", "8", "--steps", "40", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "compression.json").read_text())
    assert rep["blocks"] == 28
    assert rep["pruned_blocks"] == 7
    assert rep["cnots_pruned"] == 14
    assert rep["residual"] < 1e-8
    assert "pruned_blocks: 7" in capsys.readouterr().out


def test_greens_writes_traces_spectra_and_peak_table(tmp_path):
    out = tmp_path / "g"
    cfg = write(tmp_path, SMALL_GREENS.format(tol=0.1))
    assert main(["greens", "--config", cfg, "--out", str(out)]) == EXIT_OK
    names = set(p.name for p in out.iterdir())
    assert {"trace_d0_k0.csv", "spectrum_d0.4_k3.csv", "peaks.json", "summary.json"} <= names
    assert (out / "trace_d0_k1.csv").read_text().splitlines()[0] == "t,value"
    assert (out / "spectrum_d0_k1.csv").read_text().splitlines()[0] == "omega,re,im,abs2,valid"
    peaks = json.loads((out / "peaks.json").read_text())
    assert len(peaks) == 8
    assert {"k", "omega_peak", "height", "width"} <= set(peaks[0])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verified"] is True
    assert summary["config"]["model"]["n"] == 4  # effective config is echoed
    assert set(summary["versions"]) >= {"linres", "numpy", "scipy", "python"}
    assert set(summary["files"]) == names - {"summary.json"}


def test_identical_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL_GREENS.format(tol=0.1))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["greens", "--config", cfg, "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["greens", "--config", cfg, "--out", str(b), "--threads", "3"]) == EXIT_OK
    assert read_dir(a) == read_dir(b)


def test_seed_changes_the_summary_hash(tmp_path):
    cfg = write(tmp_path, SMALL_GREENS.format(tol=0.1))
    hashes = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        main(["greens", "--config", cfg, "--out", str(out), "--seed", str(seed)])
        hashes.append(json.loads((out / "summary.json").read_text())["config_hash"])
    assert hashes[0] != hashes[1]


def test_failed_verification_exits_3_and_still_writes(tmp_path, capsys):
    out = tmp_path / "v"
    cfg = write(tmp_path, SMALL_GREENS.format(tol=1e-9))
    assert main(["greens", "--config", cfg, "--out", str(out)]) == EXIT_VERIFY
    assert "verification FAILED" in capsys.readouterr().err
    assert json.loads((out / "summary.json").read_text())["verified"] is False


def test_unknown_key_exits_2_with_path(tmp_path, capsys):
    cfg = write(tmp_path, 'comment = "x"\nexperiment = "greens"\n[model]\nspin = 1\n')
    assert main(["greens", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "model" in err and "spin" in err
    assert not (tmp_path / "o").exists()


def test_bad_type_exits_2_with_path(tmp_path, capsys):
    cfg = write(tmp_path, 'comment = "x"\nexperiment = "greens"\n[run]\ndt = "small"\n')
    assert main(["greens", "--config", cfg]) == EXIT_CONFIG
    assert "run/dt" in capsys.readouterr().err


def test_subcommand_must_match_config(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_GREENS.format(tol=0.1))
    assert main(["polarizability", "--config", cfg]) == EXIT_CONFIG
    assert "greens" in capsys.readouterr().err


def test_config_required_for_physics_runs(capsys):
    assert main(["greens"]) == EXIT_CONFIG
    assert "--config" in capsys.readouterr().err


def test_backend_mismatch_is_a_descriptive_error(tmp_path, capsys):
    text = SMALL_GREENS.format(tol=0.1).replace("[run]", '[run]\nbackend = "compressed"')
    assert main(["greens", "--config", write(tmp_path, text),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "open chains" in capsys.readouterr().err


def test_oracle_runs_with_defaults(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "oracle.json").read_text())
    assert len(data[0]["energies"]) == 8


@pytest.mark.parametrize("argv", [["--help"], ["compress", "--help"]])
def test_help(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 0
    assert "--out" in capsys.readouterr().out or argv == ["--help"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "linres.cli", "compress", "--n", "4",
                           "--steps", "40", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "compression.json").read_text())["pruned_blocks"] == 3


def test_polarizability_reports_mask_bounds(tmp_path):
    text = """
comment = "small Gaussian-drive polarizability"
experiment = "polarizability"
[model]
n = 8
mu = 0.9
boundary = "periodic"
[drive]
kind = "gaussian"
[run]
backend = "covariance"
t_max = 60.0
tau = 10.0
verify = true
tolerance = 0.05
"""
    out = tmp_path / "p"
    assert main(["polarizability", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    meta = json.loads((out / "chi_meta.json").read_text())
    assert len(meta["mask_bounds"]) == 1
    lo, hi = meta["mask_bounds"][0]
    assert lo < 0 < 1.5 < hi
    assert meta["max_im_chi_q0"] < 1e-10
    rows = (out / "chi.csv").read_text().splitlines()
    assert rows[0] == "q,omega,re,im,valid"
    assert any(r.endswith(",,,0") for r in rows[1:])  # masked bins carry no value


def test_compare_writes_metrics(tmp_path):
    text = """
comment = "small noisy comparison"
experiment = "compare"
[model]
n = 4
mu = 2.0
boundary = "open"
[run]
t_max = 10.0
sample_every = 5
tau = 5.0
[noise]
presets = ["p1=0.1%,p2=10%"]
seeds = 3
window = 0.5
"""
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["compare", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
        outs.append(read_dir(out))
    assert outs[0] == outs[1]
    rec = json.loads(outs[0]["metrics.json"])["presets"]["p1=0.1%,p2=10%"]
    assert 0.0 <= rec["ordering_fraction"] <= 1.0
    assert 0.0 <= rec["leakage_fraction"] <= 1.0
    for key in ("median_snr", "median_leakage"):
        assert {m: len(v) for m, v in rec[key].items()} == {
            "momentum": 3, "position": 3, "hadamard": 3}
