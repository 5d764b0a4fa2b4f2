import csv
import json
from pathlib import Path

import pytest

from gradinn import cli
from gradinn import experiments as ex


def run_cli(*argv):
    try:
        return cli.main([str(a) for a in argv])
    except SystemExit as exc:  # argparse exits on usage errors
        return exc.code


def run_dirs(root):
    return sorted((Path(root) / "runs").iterdir())


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run_cli("--out", root, "train", "toy1d", "snn", "--epochs", 25, "--seed", 2) == cli.EXIT_OK
    return root, run_dirs(root)[0]


class TestUsage:
    def test_no_command(self):
        assert run_cli() == cli.EXIT_USAGE

    def test_bad_preset(self, tmp_path):
        assert run_cli("--out", tmp_path, "train", "nope") == cli.EXIT_USAGE

    def test_bad_method(self, tmp_path):
        assert run_cli("--out", tmp_path, "train", "toy1d", "sobolev") == cli.EXIT_USAGE

    def test_missing_preset(self, tmp_path):
        assert run_cli("--out", tmp_path, "train") == cli.EXIT_USAGE

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"preset": "toy1d", "hidden": [3]}))
        assert run_cli("--out", tmp_path, "train", "--config", cfg) == cli.EXIT_USAGE

    def test_invalid_json(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{not json")
        assert run_cli("--out", tmp_path, "train", "--config", cfg) == cli.EXIT_USAGE

    def test_reproduce_needs_target(self, tmp_path):
        assert run_cli("--out", tmp_path, "reproduce") == cli.EXIT_USAGE

    def test_reproduce_bad_target(self, tmp_path):
        assert run_cli("--out", tmp_path, "reproduce", "table9") == cli.EXIT_USAGE

    def test_unknown_check(self):
        assert run_cli("verify", "--check", "nope") == cli.EXIT_USAGE


class TestConfigMerge:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"preset": "toy1d", "method": "snn", "epochs": 3, "seed": 9}))
        assert run_cli("--out", tmp_path, "train", "--config", cfg, "--epochs", 4) == cli.EXIT_OK
        man = ex.load_manifest(run_dirs(tmp_path)[0])
        assert man["config"]["epochs"] == 4 and man["config"]["seed"] == 9

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envroot"))
        assert run_cli("train", "toy1d", "snn", "--epochs", 2) == cli.EXIT_OK
        assert len(run_dirs(tmp_path / "envroot")) == 1


class TestGenerate:
    def test_friedman_files(self, tmp_path, capsys):
        assert run_cli("--out", tmp_path, "generate", "friedman", "--n", 40, "--m", 60) == cli.EXIT_OK
        (d,) = (tmp_path / "datasets").iterdir()
        man = ex.load_manifest(d)
        assert man["status"] == "generated"
        counts = {k: sum(1 for _ in csv.reader(open(d / f))) - 1 for k, f in man["inputs"]["files"].items()}
        assert counts["train"] == 40 and counts["collocation"] == 60 and counts["test"] == ex.N_TEST_FRIEDMAN


class TestTrainAndVerify:
    def test_printed_metrics(self, trained):
        root, d = trained
        assert (d / "U.bin").exists()
        assert ex.load_manifest(d)["config"]["epochs"] == 25

    def test_replay(self, trained, tmp_path, capsys):
        _, d = trained
        assert run_cli("--out", tmp_path, "train", "--manifest", d / "manifest.json") == cli.EXIT_OK
        assert "identical" in capsys.readouterr().out

    def test_verify_replay(self, trained, tmp_path):
        _, d = trained
        assert run_cli("--out", tmp_path, "verify", "--manifest", d / "manifest.json") == cli.EXIT_OK

    def test_verify_artifact(self, trained, capsys):
        _, d = trained
        assert run_cli("verify", "--artifact", d) == cli.EXIT_OK
        assert run_cli("verify", "--artifact", d / "U.bin") == cli.EXIT_OK

    def test_corrupted_artifact(self, trained, tmp_path, capsys):
        _, d = trained
        bad = tmp_path / "bad"
        bad.mkdir()
        for f in d.iterdir():
            if f.is_file():
                (bad / f.name).write_bytes(f.read_bytes())
        (bad / "data").mkdir()
        for f in (d / "data").iterdir():
            (bad / "data" / f.name).write_bytes(f.read_bytes())
        blob = bytearray((bad / "U.bin").read_bytes())
        blob[-3] ^= 0xFF
        (bad / "U.bin").write_bytes(bytes(blob))
        capsys.readouterr()
        assert run_cli("verify", "--artifact", bad) == cli.EXIT_VERIFY
        out = capsys.readouterr().out
        assert "FAIL" in out and "params_U" in out

    def test_truncated_parameter_file(self, trained, tmp_path):
        _, d = trained
        bad = tmp_path / "U.bin"
        bad.write_bytes((d / "U.bin").read_bytes()[:20])
        assert run_cli("verify", "--artifact", bad) == cli.EXIT_VERIFY

    def test_missing_artifact(self, tmp_path):
        assert run_cli("verify", "--artifact", tmp_path / "absent.bin") == cli.EXIT_IO

    def test_missing_manifest(self, tmp_path):
        assert run_cli("--out", tmp_path, "train", "--manifest", tmp_path / "absent.json") == cli.EXIT_IO


class TestVerifyChecks:
    def test_list(self, capsys):
        assert run_cli("verify", "--list") == cli.EXIT_OK
        names = capsys.readouterr().out.split()
        assert "autodiff.primitive_gradients" in names

    def test_named_check(self, capsys):
        assert run_cli("verify", "--check", "problems.friedman") == cli.EXIT_OK
        assert "1/1 checks passed" in capsys.readouterr().out


def test_divergence_exit_code(tmp_path):
    code = run_cli("--out", tmp_path, "train", "toy1d", "snn", "--epochs", 20, "--learning-rate", 1e200)
    assert code == cli.EXIT_DIVERGED
    (d,) = run_dirs(tmp_path)
    assert ex.load_manifest(d)["status"] == "diverged"
