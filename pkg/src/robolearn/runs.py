"""Run orchestration: training and evaluation runs, their output artifacts,
and replay verification.

Every successful run writes a manifest next to its outputs holding the fully
resolved config, the seed, map checksums and output paths. Re-running from a
manifest must reproduce the metrics CSV (and q-table, for training runs)
byte for byte; `replay` checks exactly that.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

from . import __version__
from .config import ConfigError, RunConfig, config_to_doc, parse_config
from .metrics import EpochMetrics, render_charts, write_csv
from .qcore import QTable, epsilon_for_epoch, load_qtable, save_qtable
from .rng import RngStreams
from .tasks import (
    ACTION_SETS,
    EpisodeConfig,
    evaluate,
    new_qtable,
    run_curriculum_task1,
    run_epoch,
)
from .perception import STATE_SETS
from .worldsim import map_source_bytes, resolve_map

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


class ManifestError(ValueError):
    """Manifest missing, malformed, or from an unsupported format version."""


@dataclass
class RunResult:
    command: str
    config: RunConfig
    records: list[EpochMetrics]
    qtable_path: str | None
    metrics_path: str
    chart_paths: list[str]
    manifest_path: str


@dataclass
class ReplayOutcome:
    match: bool
    detail: str
    first_divergence: str | None = None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _map_checksums(episode: EpisodeConfig) -> dict[str, str]:
    return {name: _sha256(map_source_bytes(name)) for name in episode.maps}


def _check_table_matches_task(table: QTable, task: int) -> None:
    expected_states = STATE_SETS[task]
    expected_actions = tuple(a.label for a in ACTION_SETS[task])
    if table.state_labels != expected_states or table.action_labels != expected_actions:
        raise ConfigError(
            f"q-table labels do not match task {task}: "
            f"{len(table.state_labels)} states x {len(table.action_labels)} actions"
        )


def _initial_table(cfg: RunConfig) -> QTable:
    if cfg.qtable_in:
        table = load_qtable(cfg.qtable_in)
        _check_table_matches_task(table, cfg.episode.task)
        return table
    return new_qtable(cfg.episode.task)


def _epoch_epsilons(episode: EpisodeConfig, command: str, episodes: int = 0) -> list[float]:
    if command == "eval":
        return [0.0] * episodes
    hp = episode.hyperparams
    per_map = [epsilon_for_epoch(hp, i) for i in range(hp.epochs)]
    if episode.task == 1 and len(episode.maps) > 1:
        return per_map * len(episode.maps)
    return per_map


def _write_outputs(command: str, cfg: RunConfig, records: list[EpochMetrics],
                   table: QTable | None, out_dir: str,
                   extra: dict | None = None) -> RunResult:
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = cfg.metrics_out or os.path.join(out_dir, "metrics.csv")
    os.makedirs(os.path.dirname(os.path.abspath(metrics_path)), exist_ok=True)
    write_csv(records, metrics_path)

    qtable_path = None
    if table is not None:
        qtable_path = cfg.qtable_out or os.path.join(out_dir, "qtable.json")
        os.makedirs(os.path.dirname(os.path.abspath(qtable_path)), exist_ok=True)
        save_qtable(table, qtable_path)

    chart_paths = render_charts(records, cfg.episode.task,
                                os.path.join(out_dir, "charts"))

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    rel = lambda p: os.path.relpath(os.path.abspath(p), os.path.abspath(out_dir))
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "tool_version": __version__,
        "command": command,
        "seed": cfg.episode.seed,
        "config": config_to_doc(cfg),
        "map_checksums": _map_checksums(cfg.episode),
        "epoch_epsilons": _epoch_epsilons(cfg.episode, command, len(records)),
        "outputs": {
            "metrics_csv": rel(metrics_path),
            "qtable": rel(qtable_path) if qtable_path else None,
            "charts": [rel(p) for p in chart_paths],
        },
    }
    if extra:
        manifest.update(extra)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return RunResult(command=command, config=cfg, records=records,
                     qtable_path=qtable_path, metrics_path=metrics_path,
                     chart_paths=chart_paths, manifest_path=manifest_path)


def train_run(cfg: RunConfig, out_dir: str) -> RunResult:
    """Train per the config (curriculum for multi-map task 1) and write the
    q-table, metrics CSV, charts and manifest."""
    episode = cfg.episode
    table = _initial_table(cfg)
    if episode.task == 1 and len(episode.maps) > 1:
        table, records = run_curriculum_task1(episode)
    else:
        streams = RngStreams(episode.seed)
        world_map = resolve_map(episode.maps[0])
        records = []
        for epoch in range(episode.hyperparams.epochs):
            table, metrics = run_epoch(episode, table, epoch, streams, world_map)
            records.append(metrics)
    return _write_outputs("train", cfg, records, table, out_dir)


def eval_run(cfg: RunConfig, episodes: int, out_dir: str) -> RunResult:
    """Greedy evaluation of a trained table; writes metrics and manifest."""
    if not cfg.qtable_in:
        raise ConfigError("evaluation requires qtable_in")
    table = load_qtable(cfg.qtable_in)
    _check_table_matches_task(table, cfg.episode.task)
    records = evaluate(table, cfg.episode, episodes)
    return _write_outputs("eval", cfg, records, None, out_dir,
                          extra={"episodes": episodes})


def load_manifest(path: str) -> dict:
    if not os.path.exists(path):
        raise ManifestError(f"manifest {path!r}: no such file")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path!r}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"manifest {path!r}: top level must be an object")
    version = doc.get("manifest_version")
    if version != MANIFEST_VERSION:
        raise ManifestError(
            f"manifest {path!r}: unsupported version {version!r} "
            f"(expected {MANIFEST_VERSION})"
        )
    for key in ("command", "config", "outputs"):
        if key not in doc:
            raise ManifestError(f"manifest {path!r}: missing field {key!r}")
    return doc


def _first_divergent_row(original: bytes, reproduced: bytes) -> str:
    a_lines = original.decode("utf-8", "replace").splitlines()
    b_lines = reproduced.decode("utf-8", "replace").splitlines()
    for i, (a, b) in enumerate(zip(a_lines, b_lines)):
        if a != b:
            return f"row {i}: {a!r} != {b!r}"
    if len(a_lines) != len(b_lines):
        return (f"row {min(len(a_lines), len(b_lines))}: "
                f"original has {len(a_lines)} rows, replay has {len(b_lines)}")
    return "byte-level difference outside row content"


def replay_run(manifest_path: str) -> ReplayOutcome:
    """Re-execute a run from its manifest and compare outputs byte-for-byte."""
    manifest = load_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    cfg = parse_config(manifest["config"])
    outputs = manifest["outputs"]

    original_csv_path = os.path.join(base, outputs["metrics_csv"])
    if not os.path.exists(original_csv_path):
        raise ManifestError(f"original metrics file missing: {original_csv_path}")
    with open(original_csv_path, "rb") as fh:
        original_csv = fh.read()
    original_qtable = None
    if outputs.get("qtable"):
        qpath = os.path.join(base, outputs["qtable"])
        if not os.path.exists(qpath):
            raise ManifestError(f"original q-table file missing: {qpath}")
        with open(qpath, "rb") as fh:
            original_qtable = fh.read()

    for name, recorded in manifest.get("map_checksums", {}).items():
        current = _sha256(map_source_bytes(name))
        if current != recorded:
            return ReplayOutcome(
                match=False,
                detail=f"map {name!r} changed since the original run",
                first_divergence=f"map checksum {recorded} != {current}",
            )

    with tempfile.TemporaryDirectory(prefix="robolearn-replay-") as tmp:
        # re-run into the temp dir regardless of the recorded absolute paths
        cfg.metrics_out = None
        cfg.qtable_out = None
        if manifest["command"] == "train":
            result = train_run(cfg, tmp)
        elif manifest["command"] == "eval":
            result = eval_run(cfg, int(manifest.get("episodes", 5)), tmp)
        else:
            raise ManifestError(
                f"manifest {manifest_path!r}: unknown command {manifest['command']!r}"
            )
        with open(result.metrics_path, "rb") as fh:
            replay_csv = fh.read()
        replay_qtable = None
        if result.qtable_path:
            with open(result.qtable_path, "rb") as fh:
                replay_qtable = fh.read()

    if replay_csv != original_csv:
        return ReplayOutcome(match=False, detail="metrics CSV diverged",
                             first_divergence=_first_divergent_row(original_csv,
                                                                   replay_csv))
    if original_qtable is not None and replay_qtable != original_qtable:
        return ReplayOutcome(match=False, detail="q-table diverged",
                             first_divergence=_first_divergent_row(original_qtable,
                                                                   replay_qtable))
    return ReplayOutcome(match=True, detail="replay matches original outputs")
