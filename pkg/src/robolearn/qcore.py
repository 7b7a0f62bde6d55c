"""Tabular Q-learning core.

The controller is a plain state x action value matrix. The update rule is the
standard TD form  Q <- (1-alpha)*Q + alpha*(r + gamma*max_a' Q(s',a')), with
the next-state maximum taken as 0 on terminal transitions. Action selection is
epsilon-greedy with deterministic lowest-index tie-breaking.

Q-tables persist as versioned UTF-8 JSON and round-trip bit-exactly, which is
what makes transferring a learned table between environments safe.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Union

import numpy as np

QTABLE_FORMAT_VERSION = 1


class QTableLoadError(ValueError):
    """Base class for q-table file problems."""


class QTableFormatError(QTableLoadError):
    """Malformed document: bad JSON, missing fields, bad value types."""


class QTableVersionError(QTableLoadError):
    """The file's format version is not supported."""


class QTableDimensionError(QTableLoadError):
    """The value matrix does not match the declared label lists."""


@dataclass
class QTable:
    """Ordered state x action matrix of action values."""

    state_labels: tuple[str, ...]
    action_labels: tuple[str, ...]
    values: np.ndarray
    version: int = QTABLE_FORMAT_VERSION

    def __post_init__(self):
        self.state_labels = tuple(self.state_labels)
        self.action_labels = tuple(self.action_labels)
        if len(set(self.state_labels)) != len(self.state_labels):
            raise ValueError("duplicate state labels")
        if len(set(self.action_labels)) != len(self.action_labels):
            raise ValueError("duplicate action labels")
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.state_labels), len(self.action_labels))
        if self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} does not match labels {expected}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("q-table values must be finite")
        self._state_index = {s: i for i, s in enumerate(self.state_labels)}
        self._action_index = {a: i for i, a in enumerate(self.action_labels)}

    @classmethod
    def zeros(cls, state_labels, action_labels) -> "QTable":
        """Fresh all-zero table (the paper's empty starting controller)."""
        return cls(
            tuple(state_labels),
            tuple(action_labels),
            np.zeros((len(tuple(state_labels)), len(tuple(action_labels)))),
        )

    def state_index(self, label: str) -> int:
        try:
            return self._state_index[label]
        except KeyError:
            raise KeyError(f"unknown state label: {label!r}") from None

    def action_index(self, label: str) -> int:
        try:
            return self._action_index[label]
        except KeyError:
            raise KeyError(f"unknown action label: {label!r}") from None

    def copy(self) -> "QTable":
        return QTable(self.state_labels, self.action_labels,
                      self.values.copy(), self.version)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return (self.version == other.version
                and self.state_labels == other.state_labels
                and self.action_labels == other.action_labels
                and np.array_equal(self.values, other.values))


@dataclass
class Hyperparams:
    """Learning-run parameters, including the per-epoch epsilon schedule."""

    alpha: float
    gamma: float
    epsilon_start: float
    epsilon_floor: float
    epsilon_decrement: float
    epochs: int
    steps_per_epoch: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        for name in ("epsilon_start", "epsilon_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.epsilon_floor > self.epsilon_start:
            raise ValueError("epsilon_floor must not exceed epsilon_start")
        if self.epsilon_decrement < 0.0:
            raise ValueError("epsilon_decrement must be >= 0")
        if self.epochs < 1 or self.steps_per_epoch < 1:
            raise ValueError("epochs and steps_per_epoch must be positive")


# Main learning parameters for the three tasks. Task 1 runs its epoch count
# per sub-environment (walls, obstacles, maze), 15 epochs in total.
TASK_HYPERPARAMS = {
    1: Hyperparams(alpha=0.1, gamma=0.9, epsilon_start=0.6, epsilon_floor=0.1,
                   epsilon_decrement=0.1, epochs=5, steps_per_epoch=1000),
    2: Hyperparams(alpha=0.1, gamma=0.9, epsilon_start=1.0, epsilon_floor=0.1,
                   epsilon_decrement=0.1, epochs=10, steps_per_epoch=1000),
    3: Hyperparams(alpha=0.1, gamma=0.9, epsilon_start=1.0, epsilon_floor=0.1,
                   epsilon_decrement=0.1, epochs=10, steps_per_epoch=500),
}


@dataclass
class TransitionRecord:
    """One observed (s, a, r, s') step; `terminal` flags s' as end-of-episode."""

    state: str
    action: str
    reward: float
    next_state: str
    terminal: bool = False


def q_update(table: QTable, rec: TransitionRecord, alpha: float, gamma: float) -> float:
    """Apply one TD update in place and return the new Q(s, a) entry.

    Terminal transitions use 0 for the next-state maximum.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if not math.isfinite(rec.reward):
        raise ValueError(f"reward must be finite, got {rec.reward}")
    si = table.state_index(rec.state)
    ai = table.action_index(rec.action)
    ni = table.state_index(rec.next_state)
    best_next = 0.0 if rec.terminal else float(np.max(table.values[ni]))
    new_value = (1.0 - alpha) * float(table.values[si, ai]) \
        + alpha * (rec.reward + gamma * best_next)
    table.values[si, ai] = new_value
    return new_value


def select_action(table: QTable, state: str, epsilon: float,
                  rng: np.random.Generator | None = None) -> str:
    """Epsilon-greedy action for `state`; argmax ties go to the lowest index.

    With epsilon == 0 no randomness is consumed, so `rng` may be omitted.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    si = table.state_index(state)
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("rng is required when epsilon > 0")
        if rng.random() < epsilon:
            return table.action_labels[int(rng.integers(len(table.action_labels)))]
    return table.action_labels[int(np.argmax(table.values[si]))]


def epsilon_for_epoch(schedule: Hyperparams, epoch_index: int) -> float:
    """Linear per-epoch decrement from epsilon_start, clamped at epsilon_floor."""
    if not 0 <= epoch_index < schedule.epochs:
        raise ValueError(
            f"epoch_index {epoch_index} out of range [0, {schedule.epochs})"
        )
    return max(schedule.epsilon_floor,
               schedule.epsilon_start - epoch_index * schedule.epsilon_decrement)


def qtable_to_json(table: QTable) -> str:
    doc = {
        "version": table.version,
        "states": list(table.state_labels),
        "actions": list(table.action_labels),
        "values": [[float(v) for v in row] for row in table.values],
    }
    return json.dumps(doc, indent=2) + "\n"


def save_qtable(table: QTable, destination: Union[str, "IO[str]"]) -> None:
    """Write the versioned JSON q-table document to a path or text stream."""
    text = qtable_to_json(table)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise QTableFormatError(f"{where}: missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise QTableFormatError(
            f"{where}: field {key!r} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def load_qtable(source: Union[str, "IO[str]"]) -> QTable:
    """Parse a q-table document; never returns a partial table.

    Raises QTableFormatError / QTableVersionError / QTableDimensionError with
    the offending position in the message.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise QTableFormatError(f"q-table document: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise QTableFormatError("q-table document: top level must be an object")

    version = _require(doc, "version", int, "q-table document")
    if version != QTABLE_FORMAT_VERSION:
        raise QTableVersionError(
            f"q-table document: unsupported version {version} "
            f"(expected {QTABLE_FORMAT_VERSION})"
        )
    states = _require(doc, "states", list, "q-table document")
    actions = _require(doc, "actions", list, "q-table document")
    values = _require(doc, "values", list, "q-table document")

    for name, labels in (("states", states), ("actions", actions)):
        for i, label in enumerate(labels):
            if not isinstance(label, str):
                raise QTableFormatError(f"{name}[{i}]: label must be a string")
        if len(set(labels)) != len(labels):
            raise QTableFormatError(f"{name}: duplicate labels")

    if len(values) != len(states):
        raise QTableDimensionError(
            f"values: has {len(values)} rows, expected {len(states)}"
        )
    matrix = np.zeros((len(states), len(actions)))
    for i, row in enumerate(values):
        if not isinstance(row, list):
            raise QTableFormatError(f"values[{i}]: row must be an array")
        if len(row) != len(actions):
            raise QTableDimensionError(
                f"values[{i}]: has {len(row)} columns, expected {len(actions)}"
            )
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise QTableFormatError(f"values[{i}][{j}]: not a number")
            if not math.isfinite(v):
                raise QTableFormatError(f"values[{i}][{j}]: not finite")
            matrix[i, j] = v
    return QTable(tuple(states), tuple(actions), matrix, version)
