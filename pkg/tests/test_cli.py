"""Command-line behaviour: config resolution, the full pipeline, exit codes.

The pipeline fixture drives synthesize -> prepare -> run -> report through
main() exactly as a shell user would, on a population small enough to train
in a couple of seconds.
"""

import json
import subprocess
import sys

import pytest

from fedcast.cli import main, resolve_config, run_identity
from fedcast.errors import ValidationError

SMALL_OVERRIDES = {"epochs_cap": 2, "fl_rounds_cap": 2, "patience": 1,
                   "lft_epochs_cap": 1}


def base_config(data="cache", **extra):
    raw = {
        "data": data,
        "seed": 5,
        "k": 6,
        "weather": False,
        "scenarios": [
            {"kind": "centralised"},
            {"kind": "fl", "client_fraction": 0.5, "local_epochs": 1},
        ],
        "overrides": dict(SMALL_OVERRIDES),
    }
    raw.update(extra)
    return raw


# ----------------------------------------------------------- config expansion

def test_grid_expansion_counts():
    raw = base_config(k=[6, 12], scenarios=[
        {"kind": "fl", "client_fraction": [0.1, 0.2, 0.3],
         "local_epochs": [1, 3, 5]},
    ])
    seed, entries = resolve_config(raw)
    assert seed == 5
    assert len(entries) == 9 * 2
    assert len({cfg.entry_id for cfg in entries}) == len(entries)
    ids = [cfg.entry_id for cfg in entries]
    assert ids == sorted(ids)


def test_clustered_grid_expansion():
    raw = base_config(scenarios=[
        {"kind": "fl_hc", "hc_threshold": [0.8, 1.4], "hc_rounds": [3, 5],
         "hc_linkage": ["ward", "single"]},
    ])
    _, entries = resolve_config(raw)
    assert len(entries) == 8
    # the pre-clustering phase settings are fixed, not swept
    assert all(cfg.client_fraction == 0.1 and cfg.local_epochs == 3
               for cfg in entries)


def test_scalars_are_singleton_grids():
    _, entries = resolve_config(base_config())
    assert len(entries) == 2
    assert entries[0].kind == "centralised"
    assert entries[0].epochs_cap == 2  # overrides reach every entry


def test_weather_expands_variants():
    raw = base_config(weather=[False, True],
                      scenarios=[{"kind": "localised"}])
    _, entries = resolve_config(raw)
    assert {(c.k, c.with_weather) for c in entries} == {(6, False), (6, True)}


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("FEDCAST_SEED", "99")
    seed, entries = resolve_config(base_config())
    assert seed == 99
    assert all(cfg.seed == 99 for cfg in entries)
    monkeypatch.setenv("FEDCAST_SEED", "not-a-number")
    with pytest.raises(ValidationError):
        resolve_config(base_config())


@pytest.mark.parametrize("mangle", [
    lambda raw: raw.pop("data"),
    lambda raw: raw.pop("scenarios"),
    lambda raw: raw.update(extra_key=1),
    lambda raw: raw.update(scenarios=[{"kind": "mystery"}]),
    lambda raw: raw.update(scenarios=[{}]),
    lambda raw: raw.update(scenarios=[{"kind": "centralised", "client_fraction": 0.5}]),
    lambda raw: raw.update(scenarios=[{"kind": "fl"}, {"kind": "fl"}]),
    lambda raw: raw.update(overrides={"optimizer": "sgd"}),
    lambda raw: raw.update(weather="yes"),
    lambda raw: raw.update(seed=-1),
])
def test_bad_configs_are_rejected(mangle):
    raw = base_config()
    mangle(raw)
    with pytest.raises(ValidationError):
        resolve_config(raw)


def test_run_identity_depends_on_all_parts():
    _, entries = resolve_config(base_config())
    base = run_identity(5, entries, "digest")
    assert len(base) == 12
    assert run_identity(5, entries, "digest") == base
    assert run_identity(6, entries, "digest") != base
    assert run_identity(5, entries, "other") != base
    assert run_identity(5, entries[:1], "digest") != base


# --------------------------------------------------------------- the pipeline

@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    assert main(["synthesize", "--n", "3", "--days", "10", "--seed", "7",
                 "--out", str(root / "synth")]) == 0
    assert main(["prepare", "--meters", str(root / "synth" / "meters.csv"),
                 "--weather", str(root / "synth" / "weather.csv"),
                 "--out", str(root / "cache"), "--k", "6"]) == 0
    (root / "config.json").write_text(json.dumps(base_config(data="cache")))
    assert main(["run", "--config", str(root / "config.json"),
                 "--out", str(root / "runs")]) == 0
    run_dirs = [p for p in (root / "runs").iterdir() if p.is_dir()]
    assert len(run_dirs) == 1
    return root, run_dirs[0]


def test_synthesize_writes_deterministic_csvs(pipeline, tmp_path):
    root, _ = pipeline
    assert main(["synthesize", "--n", "3", "--days", "10", "--seed", "7",
                 "--out", str(tmp_path)]) == 0
    for name in ("meters.csv", "weather.csv", "archetypes.json"):
        assert (tmp_path / name).read_bytes() == \
            (root / "synth" / name).read_bytes()
    meta = json.loads((tmp_path / "archetypes.json").read_text())
    assert len(meta["assignment"]) == 3


def test_prepare_manifest_lists_every_variant(pipeline):
    root, _ = pipeline
    manifest = json.loads((root / "cache" / "manifest.json").read_text())
    # 3 households x 1 window length x (with, without weather)
    assert len(manifest["datasets"]) == 6
    assert manifest["k_values"] == [6]
    assert sorted(manifest["variants"]) == ["base", "weather"]


def test_run_directory_layout(pipeline):
    root, run_dir = pipeline
    for name in ("results.json", "results.csv", "tables.txt", "manifest.json"):
        assert (run_dir / name).is_file()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["run_id"] == run_dir.name
    assert manifest["seed"] == 5
    listed = set(manifest["files"])
    assert "manifest.json" in listed
    for rel in listed - {"manifest.json"}:
        assert (run_dir / rel).is_file()
    results = json.loads((run_dir / "results.json").read_text())
    assert len(results["entries"]) == 2
    assert results["run_id"] == run_dir.name
    assert {e["scenario"] for e in results["entries"]} == {"centralised", "fl"}
    # per-entry logs and model vectors landed as well
    assert len(list((run_dir / "logs").glob("*.json"))) == 2
    assert len(list((run_dir / "models").glob("*/*.npy"))) == 2


def test_rerun_is_byte_identical(pipeline):
    root, run_dir = pipeline
    before = {name: (run_dir / name).read_bytes()
              for name in ("results.json", "results.csv", "tables.txt")}
    assert main(["run", "--config", str(root / "config.json"),
                 "--out", str(root / "runs")]) == 0
    # same config and data -> same run id, same bytes
    for name, blob in before.items():
        assert (run_dir / name).read_bytes() == blob


def test_parallel_run_matches_serial(pipeline, tmp_path):
    root, run_dir = pipeline
    assert main(["run", "--config", str(root / "config.json"),
                 "--out", str(tmp_path), "--jobs", "4"]) == 0
    other = tmp_path / run_dir.name  # identical run id
    assert other.is_dir()
    assert (other / "results.json").read_bytes() == \
        (run_dir / "results.json").read_bytes()


def test_seed_env_changes_the_run(pipeline, tmp_path, monkeypatch):
    root, run_dir = pipeline
    monkeypatch.setenv("FEDCAST_SEED", "1234")
    assert main(["run", "--config", str(root / "config.json"),
                 "--out", str(tmp_path)]) == 0
    produced = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert len(produced) == 1
    assert produced[0].name != run_dir.name
    results = json.loads((produced[0] / "results.json").read_text())
    assert results["seed"] == 1234


def test_report_aggregates_a_run(pipeline, tmp_path, capsys):
    _, run_dir = pipeline
    assert main(["report", str(run_dir), "--out", str(tmp_path / "agg")]) == 0
    out = capsys.readouterr().out
    assert "Centralised" in out and "FL" in out
    agg = json.loads((tmp_path / "agg" / "results.json").read_text())
    assert agg["source_runs"] == [str(run_dir)]
    assert agg["seeds"] == [5]
    assert len(agg["entries"]) == 2


def test_report_rejects_duplicate_entries(pipeline, capsys):
    _, run_dir = pipeline
    assert main(["report", str(run_dir), str(run_dir)]) == 2
    assert "duplicate entry" in capsys.readouterr().err


# ----------------------------------------------------------------- exit codes

def test_missing_config_is_a_usage_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_unparseable_config_is_a_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_bad_synthesize_arguments_fail_cleanly(tmp_path, capsys):
    assert main(["synthesize", "--n", "0", "--out", str(tmp_path)]) == 2
    capsys.readouterr()
    assert main(["synthesize", "--n", "2", "--start", "someday",
                 "--out", str(tmp_path)]) == 2
    assert "--start" in capsys.readouterr().err


def test_prepare_without_inputs_fails_cleanly(tmp_path, capsys):
    assert main(["prepare", "--meters", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path / "c"), "--k", "6",
                 "--weather-variant", "without"]) == 2
    capsys.readouterr()
    # weather variants need a weather file
    assert main(["prepare", "--meters", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path / "c"), "--k", "6"]) == 2
    assert "--weather" in capsys.readouterr().err


def test_report_refuses_non_run_directories(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    assert "not a run directory" in capsys.readouterr().err


def test_console_script_is_wired_up():
    proc = subprocess.run([sys.executable, "-m", "fedcast.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip()
