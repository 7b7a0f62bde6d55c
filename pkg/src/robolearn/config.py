"""Experiment config files: parsing, validation, presets.

A config document is UTF-8 JSON selecting the task, map(s), hyperparameters,
seed, perception thresholds, prey policy and artifact paths. Packaged presets
task1/task2/task3 carry the standard parameters for each experiment; the
ROBOLEARN_PRESETS environment variable points preset-name lookup elsewhere.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

from .perception import PerceptionConfig
from .qcore import Hyperparams, TASK_HYPERPARAMS
from .tasks import EpisodeConfig, PreyPolicy

PRESET_ENV_VAR = "ROBOLEARN_PRESETS"
PRESET_NAMES = ("task1", "task2", "task3")

_TOP_KEYS = {
    "task", "map", "maps", "hyperparams", "seed", "food_count", "food_goal",
    "catch_distance", "perception", "prey", "ir_noise", "crash_threshold",
    "qtable_in", "qtable_out", "metrics_out",
}
_HP_KEYS = {"alpha", "gamma", "epsilon_start", "epsilon_floor",
            "epsilon_decrement", "epochs", "steps"}
_PERCEPTION_KEYS = {"detect_threshold", "close_area_threshold",
                    "side_left_boundary", "side_right_boundary", "min_blob_pixels"}
_PREY_KEYS = {"mode", "flee_trigger_distance", "speed_scale"}


class ConfigError(ValueError):
    """Config document failed to parse or validate; message names the field."""


@dataclass
class RunConfig:
    """A fully resolved config: episode parameters plus artifact paths."""

    episode: EpisodeConfig
    qtable_in: str | None = None
    qtable_out: str | None = None
    metrics_out: str | None = None


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown field {key!r}")


def _number(doc: dict, key: str, where: str, default):
    v = doc.get(key, default)
    if v is None:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: must be a number")
    return v


def _integer(doc: dict, key: str, where: str, default):
    v = doc.get(key, default)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: must be an integer")
    return v


def _path(doc: dict, key: str) -> str | None:
    v = doc.get(key)
    if v is None:
        return None
    if not isinstance(v, str) or not v:
        raise ConfigError(f"config.{key}: must be a non-empty string path")
    return v


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed config document and fill every default."""
    if not isinstance(doc, dict):
        raise ConfigError("config document: top level must be an object")
    _check_keys(doc, _TOP_KEYS, "config")

    task = doc.get("task")
    if task not in (1, 2, 3):
        raise ConfigError("config.task: must be 1, 2 or 3")

    if "map" in doc and "maps" in doc:
        raise ConfigError("config: give either 'map' or 'maps', not both")
    maps: tuple[str, ...] = ()
    if "map" in doc:
        if not isinstance(doc["map"], str) or not doc["map"]:
            raise ConfigError("config.map: must be a non-empty string")
        maps = (doc["map"],)
    elif "maps" in doc:
        raw = doc["maps"]
        if not (isinstance(raw, list) and raw
                and all(isinstance(m, str) and m for m in raw)):
            raise ConfigError("config.maps: must be a non-empty array of strings")
        maps = tuple(raw)

    defaults = TASK_HYPERPARAMS[task]
    hp_doc = doc.get("hyperparams", {})
    if not isinstance(hp_doc, dict):
        raise ConfigError("config.hyperparams: must be an object")
    _check_keys(hp_doc, _HP_KEYS, "config.hyperparams")
    try:
        hp = Hyperparams(
            alpha=_number(hp_doc, "alpha", "config.hyperparams", defaults.alpha),
            gamma=_number(hp_doc, "gamma", "config.hyperparams", defaults.gamma),
            epsilon_start=_number(hp_doc, "epsilon_start", "config.hyperparams",
                                  defaults.epsilon_start),
            epsilon_floor=_number(hp_doc, "epsilon_floor", "config.hyperparams",
                                  defaults.epsilon_floor),
            epsilon_decrement=_number(hp_doc, "epsilon_decrement",
                                      "config.hyperparams", defaults.epsilon_decrement),
            epochs=_integer(hp_doc, "epochs", "config.hyperparams", defaults.epochs),
            steps_per_epoch=_integer(hp_doc, "steps", "config.hyperparams",
                                     defaults.steps_per_epoch),
        )
    except ValueError as e:
        raise ConfigError(f"config.hyperparams: {e}") from None

    perception_doc = doc.get("perception", {})
    if not isinstance(perception_doc, dict):
        raise ConfigError("config.perception: must be an object")
    _check_keys(perception_doc, _PERCEPTION_KEYS, "config.perception")
    base = PerceptionConfig()
    try:
        perception = PerceptionConfig(
            detect_threshold=_number(perception_doc, "detect_threshold",
                                     "config.perception", base.detect_threshold),
            close_area_threshold=_number(perception_doc, "close_area_threshold",
                                         "config.perception", base.close_area_threshold),
            side_left_boundary=_number(perception_doc, "side_left_boundary",
                                       "config.perception", base.side_left_boundary),
            side_right_boundary=_number(perception_doc, "side_right_boundary",
                                        "config.perception", base.side_right_boundary),
            min_blob_pixels=_integer(perception_doc, "min_blob_pixels",
                                     "config.perception", base.min_blob_pixels),
        )
    except ValueError as e:
        raise ConfigError(f"config.perception: {e}") from None

    prey_doc = doc.get("prey", {})
    if not isinstance(prey_doc, dict):
        raise ConfigError("config.prey: must be an object")
    _check_keys(prey_doc, _PREY_KEYS, "config.prey")
    prey_defaults = PreyPolicy()
    mode = prey_doc.get("mode", prey_defaults.mode)
    if not isinstance(mode, str):
        raise ConfigError("config.prey.mode: must be a string")
    try:
        prey = PreyPolicy(
            mode=mode,
            flee_trigger_distance=_number(prey_doc, "flee_trigger_distance",
                                          "config.prey",
                                          prey_defaults.flee_trigger_distance),
            speed_scale=_number(prey_doc, "speed_scale", "config.prey",
                                prey_defaults.speed_scale),
        )
    except ValueError as e:
        raise ConfigError(f"config.prey: {e}") from None

    seed = _integer(doc, "seed", "config", 0)
    food_count = _integer(doc, "food_count", "config", 7)
    food_goal = _integer(doc, "food_goal", "config", 6)
    catch_distance = _number(doc, "catch_distance", "config", 0.13)
    ir_noise = doc.get("ir_noise", False)
    if not isinstance(ir_noise, bool):
        raise ConfigError("config.ir_noise: must be a boolean")
    crash_threshold = _number(doc, "crash_threshold", "config", 0.95)

    try:
        episode = EpisodeConfig(
            task=task, maps=maps, hyperparams=hp, seed=seed,
            food_count=food_count, food_goal=food_goal,
            catch_distance=catch_distance, perception=perception, prey=prey,
            ir_noise=ir_noise, crash_threshold=crash_threshold,
        )
    except ValueError as e:
        raise ConfigError(f"config: {e}") from None

    return RunConfig(
        episode=episode,
        qtable_in=_path(doc, "qtable_in"),
        qtable_out=_path(doc, "qtable_out"),
        metrics_out=_path(doc, "metrics_out"),
    )


def config_to_doc(cfg: RunConfig) -> dict:
    """Serialize back to the config file schema (parse_config's inverse)."""
    ep = cfg.episode
    doc = {
        "task": ep.task,
        "maps": list(ep.maps),
        "hyperparams": {
            "alpha": ep.hyperparams.alpha,
            "gamma": ep.hyperparams.gamma,
            "epsilon_start": ep.hyperparams.epsilon_start,
            "epsilon_floor": ep.hyperparams.epsilon_floor,
            "epsilon_decrement": ep.hyperparams.epsilon_decrement,
            "epochs": ep.hyperparams.epochs,
            "steps": ep.hyperparams.steps_per_epoch,
        },
        "seed": ep.seed,
        "food_count": ep.food_count,
        "food_goal": ep.food_goal,
        "catch_distance": ep.catch_distance,
        "perception": {
            "detect_threshold": ep.perception.detect_threshold,
            "close_area_threshold": ep.perception.close_area_threshold,
            "side_left_boundary": ep.perception.side_left_boundary,
            "side_right_boundary": ep.perception.side_right_boundary,
            "min_blob_pixels": ep.perception.min_blob_pixels,
        },
        "prey": {
            "mode": ep.prey.mode,
            "flee_trigger_distance": ep.prey.flee_trigger_distance,
            "speed_scale": ep.prey.speed_scale,
        },
        "ir_noise": ep.ir_noise,
        "crash_threshold": ep.crash_threshold,
    }
    if cfg.qtable_in:
        doc["qtable_in"] = cfg.qtable_in
    if cfg.qtable_out:
        doc["qtable_out"] = cfg.qtable_out
    if cfg.metrics_out:
        doc["metrics_out"] = cfg.metrics_out
    return doc


def resolve_config_source(value: str) -> dict:
    """Load a config document from a path, or from the preset directory when
    `value` names a preset like "task2"."""
    candidates = []
    if os.path.exists(value):
        with open(value, "r", encoding="utf-8") as fh:
            text = fh.read()
        where = value
    else:
        stem = value[:-5] if value.endswith(".json") else value
        preset_dir = os.environ.get(PRESET_ENV_VAR)
        if preset_dir:
            candidate = os.path.join(preset_dir, f"{stem}.json")
            candidates.append(candidate)
            if not os.path.exists(candidate):
                raise ConfigError(f"config {value!r}: not found (also tried {candidate})")
            with open(candidate, "r", encoding="utf-8") as fh:
                text = fh.read()
            where = candidate
        else:
            res = resources.files("robolearn").joinpath(f"presets/{stem}.json")
            if not res.is_file():
                raise ConfigError(f"config {value!r}: no such file or preset")
            text = res.read_text(encoding="utf-8")
            where = f"preset {stem}"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{where}: invalid JSON ({e})") from None
    return doc


def load_config(source: str | dict, *, seed: int | None = None,
                epochs: int | None = None, steps: int | None = None,
                qtable_in: str | None = None, qtable_out: str | None = None,
                metrics_out: str | None = None) -> RunConfig:
    """Parse a config (path, preset name or dict) and apply CLI overrides."""
    doc = dict(source) if isinstance(source, dict) else resolve_config_source(source)
    if seed is not None:
        doc["seed"] = seed
    if epochs is not None or steps is not None:
        hp = dict(doc.get("hyperparams", {}))
        if epochs is not None:
            hp["epochs"] = epochs
        if steps is not None:
            hp["steps"] = steps
        doc["hyperparams"] = hp
    if qtable_in is not None:
        doc["qtable_in"] = qtable_in
    if qtable_out is not None:
        doc["qtable_out"] = qtable_out
    if metrics_out is not None:
        doc["metrics_out"] = metrics_out
    return parse_config(doc)
