"""
Experiment runner: expands a preset, a configuration file or a manifest into
scenario configurations, runs each until its confidence interval converges,
and writes a CSV table plus a JSON manifest that reproduces the run.
"""

import asyncio
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, replace
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Optional, Union

import aiofiles
from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .config import ScenarioConfig, config_from_dict, config_to_dict, load_config
from .exceptions import ConfigError, ExperimentIOError
from .presets import get_preset, is_preset
from .sim import EventLog, run_trial
from .stats import AggregateMetrics, run_until_ci
from .version import __version__

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "config",
    "protocol",
    "region",
    "R",
    "density",
    "node_count",
    "placement",
    "th_fraction",
    "p",
    "hello_interval",
    "mean_speed",
    "error_rate",
    "distortion",
    "seed_base",
    "trials",
    "converged",
    "mean_transmissions",
    "ci_transmissions",
    "mean_retransmissions",
    "mean_delivery_ratio",
    "ci_delivery_ratio",
    "retransmit_fraction",
    "control_packets",
    "control_bytes",
    "overhead_bytes",
    "broadcast_latency",
    "min_delivery_ratio",
    "max_delivery_ratio",
    "sweep_min_delivery_ratio",
    "sweep_max_delivery_ratio",
    "truncated_trials",
)


@dataclass
class ExperimentSource:
    label: str
    configs: list[ScenarioConfig]
    caption: str = ""
    notes: list[str] = field(default_factory=list)
    reference: dict[str, dict[str, float]] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    source: ExperimentSource
    results: list[AggregateMetrics]
    csv_path: Path
    manifest_path: Path
    event_log_paths: list[Path] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)


def _slug(name: str) -> str:
    return name.replace("/", "__").replace(" ", "_")


def load_manifest(path: Union[str, Path]) -> ExperimentSource:
    """
    Configurations recorded in a manifest, to rerun them bit exactly
    :raises ConfigError: if the file is not a manifest of a known schema
    """
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}")
    if manifest.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported manifest schema {manifest.get('schema')!r}")
    configs = [config_from_dict(item) for item in manifest["configs"]]
    return ExperimentSource(
        label=manifest.get("source", Path(path).stem),
        configs=configs,
        caption=manifest.get("caption", ""),
        notes=list(manifest.get("notes", [])),
        reference=manifest.get("reference", {}),
    )


def resolve_source(source: Union[str, Path]) -> ExperimentSource:
    """
    Preset name, configuration file or manifest
    """
    if isinstance(source, str) and is_preset(source):
        experiment = get_preset(source)
        return ExperimentSource(
            label=experiment.name,
            configs=list(experiment.configs),
            caption=experiment.caption,
            notes=list(experiment.notes),
            reference=experiment.reference,
        )
    path = Path(source)
    if path.suffix == ".json":
        return load_manifest(path)
    config = load_config(path)
    return ExperimentSource(label=path.stem, configs=[config])


def apply_overrides(config: ScenarioConfig, seed: Optional[int] = None, max_trials: Optional[int] = None) -> ScenarioConfig:
    if seed is not None:
        config = replace(config, seed_base=seed)
    if max_trials is not None:
        ci = replace(
            config.ci,
            max_trials=max_trials,
            min_trials=max(2, min(config.ci.min_trials, max_trials)),
        )
        config = replace(config, ci=ci)
    return config


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def result_rows(configs: list[ScenarioConfig], results: list[AggregateMetrics]) -> list[dict[str, str]]:
    """
    One row per configuration, sweep wide min / max delivery on every row
    """
    sweep_min = min((r.min_delivery for r in results), default=math.nan)
    sweep_max = max((r.max_delivery for r in results), default=math.nan)
    rows = []
    for config, result in zip(configs, results):
        row = {
            "config": config.name,
            "protocol": config.build_protocol().describe(),
            "region": config.region.describe(),
            "R": config.R,
            "density": config.density,
            "node_count": result.node_count,
            "placement": config.placement.value,
            "th_fraction": config.protocol.th_fraction,
            "p": config.protocol.p,
            "hello_interval": config.protocol.hello_interval,
            "mean_speed": config.mobility.mean_speed,
            "error_rate": config.radio.error_rate,
            "distortion": config.radio.distortion,
            "seed_base": config.seed_base,
            "trials": result.trials,
            "converged": result.converged,
            "mean_transmissions": result.transmissions.mean,
            "ci_transmissions": result.transmissions.half_width,
            "mean_retransmissions": result.retransmissions,
            "mean_delivery_ratio": result.delivery_ratio.mean,
            "ci_delivery_ratio": result.delivery_ratio.half_width,
            "retransmit_fraction": result.retransmit_fraction,
            "control_packets": result.control_packets,
            "control_bytes": result.control_bytes,
            "overhead_bytes": result.overhead_bytes,
            "broadcast_latency": result.broadcast_latency,
            "min_delivery_ratio": result.min_delivery,
            "max_delivery_ratio": result.max_delivery,
            "sweep_min_delivery_ratio": sweep_min,
            "sweep_max_delivery_ratio": sweep_max,
            "truncated_trials": result.truncated_trials,
        }
        rows.append({key: _fmt(value) for key, value in row.items()})
    return rows


def format_csv(configs: list[ScenarioConfig], results: list[AggregateMetrics]) -> str:
    out = io.StringIO()
    out.write(f"# optimized_flooding results schema {SCHEMA_VERSION}\n")
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(result_rows(configs, results))
    return out.getvalue()


def format_manifest(
    source: ExperimentSource,
    configs: list[ScenarioConfig],
    results: list[AggregateMetrics],
    complete: Optional[bool] = None,
) -> str:
    """
    Manifest JSON. complete defaults to every configuration having a result,
    the manifest written when a result file fails is never complete.
    """
    manifest = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "source": source.label,
        "caption": source.caption,
        "notes": source.notes,
        "reference": source.reference,
        "configs": [config_to_dict(c) for c in configs],
        "seeds": [
            {"config": c.name, "seed_base": c.seed_base, "trials": r.trials, "converged": r.converged}
            for c, r in zip(configs, results)
        ],
        "complete": len(results) == len(configs) if complete is None else complete,
    }
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, max=2.0),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
async def write_text(path: Path, text: str) -> None:
    """
    Write a result file, retried on transient OS errors
    """
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(text)


async def _write_or_abort(path: Path, text: str, manifest_path: Path, partial_manifest: str) -> None:
    try:
        await write_text(path, text)
    except OSError as e:
        logger.error(f"Writing {path} failed: {e}")
        if path != manifest_path:
            try:
                await write_text(manifest_path, partial_manifest)
            except OSError:
                logger.error(f"Writing partial manifest {manifest_path} failed too")
        raise ExperimentIOError(f"Could not write {path}: {e}") from e


def _logged_trial(config: ScenarioConfig) -> str:
    event_log = EventLog()
    run_trial(config, config.seed_base, event_log=event_log)
    return event_log.dumps()


async def run_experiment(
    source: Union[str, Path],
    out_dir: Union[str, Path],
    seed: Optional[int] = None,
    max_trials: Optional[int] = None,
    jobs: int = 1,
    event_logs: bool = False,
) -> ExperimentResult:
    """
    Run every configuration of a source to its confidence target.
    :param source: preset name, configuration file or manifest
    :param out_dir: directory for the CSV, the manifest and the event logs
    :param seed: overrides seed_base of every configuration
    :param max_trials: overrides the trial cap of every configuration
    :param jobs: configurations run in parallel worker processes
    :param event_logs: also write the event log of the first trial of each configuration
    :return: ExperimentResult
    :raises ExperimentIOError: if a result file cannot be written
    """
    experiment = resolve_source(source)
    configs = [apply_overrides(c, seed=seed, max_trials=max_trials) for c in experiment.configs]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{_slug(experiment.label)}.csv"
    manifest_path = out_dir / f"{_slug(experiment.label)}.manifest.json"
    logger.info(f"Running {experiment.label}: {len(configs)} configurations, {jobs} job(s)")

    loop = asyncio.get_running_loop()
    results: list[AggregateMetrics] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(await asyncio.gather(*(loop.run_in_executor(pool, run_until_ci, c) for c in configs)))
    else:
        for config in configs:
            results.append(await loop.run_in_executor(None, run_until_ci, config))
            logger.info(f"{config.name}: {results[-1].trials} trials, converged {results[-1].converged}")

    partial = format_manifest(experiment, configs[: len(results)], results, complete=False)
    await _write_or_abort(csv_path, format_csv(configs, results), manifest_path, partial)
    await _write_or_abort(manifest_path, format_manifest(experiment, configs, results), manifest_path, partial)

    log_paths: list[Path] = []
    if event_logs:
        log_dir = out_dir / "logs"
        log_dir.mkdir(exist_ok=True)
        for config in configs:
            text = await loop.run_in_executor(None, _logged_trial, config)
            log_path = log_dir / f"{_slug(config.name)}.jsonl"
            await _write_or_abort(log_path, text, manifest_path, partial)
            log_paths.append(log_path)

    not_converged = [r.config_name for r in results if not r.converged]
    if not_converged:
        logger.warning(f"{len(not_converged)} configuration(s) did not converge: {', '.join(not_converged)}")
    logger.info(f"Wrote {csv_path} and {manifest_path}")
    return ExperimentResult(
        source=experiment,
        results=results,
        csv_path=csv_path,
        manifest_path=manifest_path,
        event_log_paths=log_paths,
    )


async def render_skew(log_path: Union[str, Path], out_path: Union[str, Path]) -> int:
    """
    Plot data of one trial: every transmitter with the node it relayed from
    (the L1 header field). Coverage circles have radius R, given in the header.
    :param log_path: JSON lines event log
    :param out_path: CSV to write
    :return: number of transmitter rows
    """
    async with aiofiles.open(log_path, "r", encoding="utf-8") as f:
        records = EventLog.parse(await f.readlines())

    R = next((r["R"] for r in records if r.get("record") == "trial"), None)
    out = io.StringIO()
    out.write(f"# R = {_fmt(R)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("role", "x", "y", "parent_x", "parent_y"))
    rows = 0
    for record in records:
        if record.get("record") != "transmit":
            continue
        source = record["l1x"] == record["l2x"] and record["l1y"] == record["l2y"]
        if source:
            writer.writerow(("source", _fmt(record["l2x"]), _fmt(record["l2y"]), "", ""))
        else:
            writer.writerow(
                ("transmitter", _fmt(record["l2x"]), _fmt(record["l2y"]), _fmt(record["l1x"]), _fmt(record["l1y"]))
            )
        rows += 1
    await write_text(Path(out_path), out.getvalue())
    logger.info(f"Wrote {rows} transmitter rows to {out_path}")
    return rows
