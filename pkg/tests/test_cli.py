"""Command line front end: happy paths, exit codes, manifest hashing."""

import json

import pytest

from trajpref.cli import (
    DecodeOptions,
    RankOptions,
    RunConfig,
    config_hash,
    load_config,
    main,
)
from trajpref.errors import ParameterError
from trajpref.pipeline import VERDICTS_FORMAT

SMALL_SYNTH = {
    "seed": 5,
    "n_tasks": 2,
    "noise_sigma_uv": 0.2,
    "obs_cov_shift": 4000.0,
    "button_flip_prob": 0.0,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulated+decoded+ranked run shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.json"
    cfg.write_text(json.dumps({"synth": SMALL_SYNTH}))
    data = root / "data"
    data.mkdir()
    assert main(["simulate", "--config", str(cfg), "--out", str(data)]) == 0
    dec = root / "dec"
    dec.mkdir()
    assert (
        main(
            [
                "decode",
                "--config", str(cfg),
                "--dataset", str(data),
                "--out", str(dec),
            ]
        )
        == 0
    )
    rank = root / "rank"
    rank.mkdir()
    assert (
        main(
            [
                "rank",
                "--config", str(cfg),
                "--dataset", str(data),
                "--verdicts", str(dec / "verdicts.json"),
                "--out", str(rank),
            ]
        )
        == 0
    )
    return root


# ------------------------------------------------------------- config layer

def test_load_config_defaults_when_missing():
    cfg = load_config(None)
    assert cfg.synth.seed == 7
    assert cfg.decode.folds == 5
    assert cfg.rank.methods == ("borda", "borda_conf", "feature", "tpp")


def test_load_config_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"synth": {"seed": 3}, "decode": {"folds": 4}}))
    cfg = load_config(str(p), seed=42, methods="borda, tpp")
    assert cfg.synth.seed == 42
    assert cfg.decode.folds == 4
    assert cfg.rank.methods == ("borda", "tpp")


def test_load_config_rejects_unknown_section(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"synthesis": {}}))
    with pytest.raises(ParameterError):
        load_config(str(p))


def test_load_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"decode": {"folds": 4, "bogus": 1}}))
    with pytest.raises(ParameterError):
        load_config(str(p))


def test_option_validation():
    with pytest.raises(ParameterError):
        DecodeOptions(folds=1)
    with pytest.raises(ParameterError):
        RankOptions(methods=("elo",))
    with pytest.raises(ParameterError):
        RankOptions(methods=())
    with pytest.raises(ParameterError):
        RankOptions(ndcg_ks=(0,))


def test_config_hash_deterministic_and_seed_sensitive():
    a = RunConfig()
    b = RunConfig()
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    c = load_config(None, seed=99)
    assert config_hash(c) != config_hash(a)


# -------------------------------------------------------------- happy paths

def test_simulate_outputs_and_manifest(workspace):
    data = workspace / "data"
    for name in ("session.json", "trajectories.json", "scenes.json", "manifest.json"):
        assert (data / name).exists()
    assert sorted(p.name for p in (data / "recordings").iterdir()) == [
        "t00.rec",
        "t01.rec",
    ]
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert len(manifest["config_hash"]) == 64
    assert manifest["config"]["synth"]["seed"] == 5
    assert {"trajpref", "numpy", "scipy"} <= set(manifest["versions"])


def test_simulate_reruns_bitwise_identical(workspace, tmp_path):
    cfg = workspace / "config.json"
    again = tmp_path / "again"
    again.mkdir()
    assert main(["simulate", "--config", str(cfg), "--out", str(again)]) == 0
    for name in ("session.json", "trajectories.json", "scenes.json", "manifest.json"):
        assert (again / name).read_bytes() == (workspace / "data" / name).read_bytes()
    ma = json.loads((again / "manifest.json").read_text())
    mb = json.loads((workspace / "data" / "manifest.json").read_text())
    assert ma["config_hash"] == mb["config_hash"]


def test_decode_outputs(workspace):
    dec = workspace / "dec"
    payload = json.loads((dec / "verdicts.json").read_text())
    assert payload["format"] == VERDICTS_FORMAT
    assert payload["accuracy"]["button"] == 1.0
    assert json.loads((dec / "manifest.json").read_text())["command"] == "decode"


def test_rank_outputs(workspace):
    rank = workspace / "rank"
    for name in ("rankings.json", "report.json", "report.txt", "per_task.csv", "manifest.json"):
        assert (rank / name).exists()
    report = json.loads((rank / "report.json").read_text())
    assert report["format"] == "trajpref-report-v1"
    assert report["comparison_accuracy"]["button"] == 1.0
    rankings = json.loads((rank / "rankings.json").read_text())
    assert rankings["format"] == "trajpref-rankings-v1"
    # 2 tasks x 4 sources x 4 methods
    assert len(rankings["rankings"]) == 32
    text = (rank / "report.txt").read_text()
    assert "comparison accuracy" in text


def test_report_prints_table(workspace, capsys):
    assert main(["report", "--report", str(workspace / "rank" / "report.json")]) == 0
    out = capsys.readouterr().out
    assert "comparison accuracy" in out
    assert "borda" in out


def test_seed_flag_overrides_manifest(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": dict(SMALL_SYNTH, n_tasks=1)}))
    out = tmp_path / "out"
    out.mkdir()
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "123"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["synth"]["seed"] == 123


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("trajpref ")


# --------------------------------------------------------------- exit codes

def test_exit_usage_on_bad_method(workspace, tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    code = main(
        [
            "rank",
            "--dataset", str(workspace / "data"),
            "--verdicts", str(workspace / "dec" / "verdicts.json"),
            "--out", str(out),
            "--methods", "elo",
        ]
    )
    assert code == 4


def test_exit_usage_on_missing_required_flag():
    assert main(["simulate"]) == 4


def test_exit_usage_on_negative_seed(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    assert main(["simulate", "--out", str(out), "--seed", "-1"]) == 4


def test_exit_usage_on_bad_config_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{oops")
    out = tmp_path / "o"
    out.mkdir()
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 4


def test_exit_io_on_missing_out_dir(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "missing")]) == 2


def test_exit_io_on_missing_report(tmp_path):
    assert main(["report", "--report", str(tmp_path / "none.json")]) == 2


def test_exit_data_on_bad_dataset(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    out = tmp_path / "o"
    out.mkdir()
    assert main(["decode", "--dataset", str(empty), "--out", str(out)]) == 3


def test_exit_data_on_bad_verdicts(workspace, tmp_path):
    bad = tmp_path / "v.json"
    bad.write_text(json.dumps({"format": "nope"}))
    out = tmp_path / "o"
    out.mkdir()
    code = main(
        [
            "rank",
            "--dataset", str(workspace / "data"),
            "--verdicts", str(bad),
            "--out", str(out),
        ]
    )
    assert code == 3


def test_exit_data_on_non_report_file(workspace):
    code = main(["report", "--report", str(workspace / "dec" / "verdicts.json")])
    assert code == 3
