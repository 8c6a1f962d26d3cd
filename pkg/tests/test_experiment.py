import csv
import json
import logging

import pytest

from optimized_flooding import Region, ScenarioConfig, emit_config, render_skew, run_experiment
from optimized_flooding.config import CiPolicy, Placement
from optimized_flooding.exceptions import ConfigError, ExperimentIOError
from optimized_flooding.experiment import CSV_COLUMNS, apply_overrides, load_manifest, resolve_source

logger = logging.getLogger("test")

IDEAL = ScenarioConfig(
    name="ideal/2R",
    region=Region.circle(600.0),
    density=None,
    placement=Placement.IDEAL,
    ci=CiPolicy(min_trials=2, max_trials=2),
    seed_base=1,
)
SMALL = ScenarioConfig(name="small/ofp", region=Region.rectangle(900.0, 900.0), density=4.0, ci=CiPolicy(min_trials=2, max_trials=3))


def write_config(tmp_path, config: ScenarioConfig, name: str = "scenario.conf"):
    path = tmp_path / name
    path.write_text(emit_config(config))
    return path


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_apply_overrides():
    config = apply_overrides(SMALL, seed=40, max_trials=2)
    assert config.seed_base == 40
    assert config.ci.max_trials == 2
    assert config.ci.min_trials == 2
    assert apply_overrides(SMALL) == SMALL


def test_resolve_source(tmp_path):
    source = resolve_source("error_sweep")
    assert source.label == "error_sweep"
    assert len(source.configs) == 14
    assert "1800m X 1800m" in source.caption

    source = resolve_source(write_config(tmp_path, SMALL))
    assert source.label == "scenario"
    assert source.configs == [SMALL]

    with pytest.raises(FileNotFoundError):
        resolve_source(tmp_path / "missing.conf")


@pytest.mark.asyncio
async def test_run_config_file(tmp_path):
    path = write_config(tmp_path, IDEAL, "ideal.conf")
    result = await run_experiment(path, tmp_path / "out")
    assert result.converged
    assert result.csv_path == tmp_path / "out" / "ideal.csv"

    schema, rows = read_rows(result.csv_path)
    assert schema == "# optimized_flooding results schema 1"
    assert len(rows) == 1
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[0]["config"] == "ideal/2R"
    assert rows[0]["protocol"] == "ofp th=0.4"
    assert float(rows[0]["mean_retransmissions"]) == 12.0
    assert rows[0]["converged"] == "true"
    assert rows[0]["density"] == ""
    assert rows[0]["trials"] == "2"

    manifest = json.loads(result.manifest_path.read_text())
    assert manifest["schema"] == 1
    assert manifest["complete"] is True
    assert manifest["seeds"] == [{"config": "ideal/2R", "seed_base": 1, "trials": 2, "converged": True}]


@pytest.mark.asyncio
async def test_manifest_rerun_is_identical(tmp_path):
    path = write_config(tmp_path, SMALL, "small.conf")
    first = await run_experiment(path, tmp_path / "first", seed=17)
    source = load_manifest(first.manifest_path)
    assert source.label == "small"
    assert source.configs[0].seed_base == 17

    second = await run_experiment(first.manifest_path, tmp_path / "second")
    assert second.csv_path.name == first.csv_path.name
    assert second.csv_path.read_bytes() == first.csv_path.read_bytes()
    assert second.manifest_path.read_bytes() == first.manifest_path.read_bytes()


def test_bad_manifest(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_manifest(path)
    path.write_text(json.dumps({"schema": 99, "configs": []}))
    with pytest.raises(ConfigError):
        load_manifest(path)


@pytest.mark.asyncio
async def test_event_logs_and_skew(tmp_path):
    path = write_config(tmp_path, IDEAL, "ideal.conf")
    result = await run_experiment(path, tmp_path, event_logs=True)
    assert result.event_log_paths == [tmp_path / "logs" / "ideal__2R.jsonl"]

    out = tmp_path / "skew.csv"
    rows = await render_skew(result.event_log_paths[0], out)
    assert rows == 13
    lines = out.read_text().splitlines()
    assert lines[0] == "# R = 300.0"
    assert lines[1] == "role,x,y,parent_x,parent_y"
    assert lines[2] == "source,0.0,0.0,,"
    # every first ring node relays straight from the source
    assert all(line.startswith("transmitter,") and line.endswith(",0.0,0.0") for line in lines[3:9])


@pytest.mark.asyncio
async def test_skew_of_empty_log(tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    out = tmp_path / "skew.csv"
    assert await render_skew(log, out) == 0
    assert out.read_text().splitlines()[1] == "role,x,y,parent_x,parent_y"


@pytest.mark.asyncio
async def test_unwritable_result(tmp_path, caplog):
    path = write_config(tmp_path, IDEAL, "ideal.conf")
    out_dir = tmp_path / "out"
    # a directory where the CSV should go
    (out_dir / "ideal.csv").mkdir(parents=True)
    with pytest.raises(ExperimentIOError):
        await run_experiment(path, out_dir)
    manifest = json.loads((out_dir / "ideal.manifest.json").read_text())
    assert manifest["configs"][0]["name"] == "ideal/2R"
    assert manifest["complete"] is False
    assert "Writing" in caplog.text
