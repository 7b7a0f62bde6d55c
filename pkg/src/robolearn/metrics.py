"""Per-epoch experiment counters and their CSV/SVG outputs.

Counters back the per-epoch figures: crashes (any IR reading at or above the
crash threshold), bad decisions (turning toward a detected wall), foraging
progress, and the prey-visibility series. Charts are hand-built SVG so that
identical inputs give byte-identical files.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

CSV_HEADER = ("task,sub_env,epoch,cum_reward,crashes,bad_decisions,"
              "food_collected,steps_used,avg_steps_per_food,prey_seen,"
              "prey_seen_close,max_consecutive,catches")

DEFAULT_CRASH_THRESHOLD = 0.95

# Actions that turn toward the detected object, per object state. Left and
# right rules mirror each other exactly.
BAD_DECISION_ACTIONS: dict[str, frozenset[str]] = {
    "Object Front": frozenset({"Forwards", "Up Left", "Up Right"}),
    "Object Left": frozenset({"Up Left", "Back Left"}),
    "Object Right": frozenset({"Up Right", "Back Right"}),
    "Object Back Left": frozenset({"Backwards", "Back Left"}),
    "Object Back Right": frozenset({"Backwards", "Back Right"}),
    "Object Back Left & Back Right": frozenset({"Backwards", "Back Left", "Back Right"}),
}


@dataclass
class EpochMetrics:
    task: int
    epoch_index: int
    sub_environment: str = ""
    cumulative_reward: float = 0.0
    crashes: int = 0
    bad_decisions: int = 0
    food_collected: int = 0
    steps_used: int = 0
    avg_steps_per_food: float | None = None
    prey_seen_steps: int = 0
    prey_seen_close_steps: int = 0
    max_consecutive_seen: int = 0
    catches: int = 0


class StepRecorder:
    """Accumulates one epoch's counters step by step."""

    def __init__(self, task: int, epoch_index: int, sub_environment: str = "",
                 crash_threshold: float = DEFAULT_CRASH_THRESHOLD):
        self.metrics = EpochMetrics(task=task, epoch_index=epoch_index,
                                    sub_environment=sub_environment)
        self.crash_threshold = crash_threshold
        self._seen_streak = 0
        self._finalized = False

    def record_step(self, state: str, action: str, reward: float, ir,
                    events: dict | None = None) -> EpochMetrics:
        """Fold one step into the counters.

        `state` is the state the action was chosen in; `ir` is the reading
        vector observed after the move (crashes are scored on arrival).
        """
        if self._finalized:
            raise RuntimeError("epoch already finalized")
        m = self.metrics
        m.steps_used += 1
        m.cumulative_reward += reward
        if any(r >= self.crash_threshold for r in ir):
            m.crashes += 1
        if action in BAD_DECISION_ACTIONS.get(state, frozenset()):
            m.bad_decisions += 1
        if state.startswith("Target "):
            m.prey_seen_steps += 1
            self._seen_streak += 1
            if self._seen_streak > m.max_consecutive_seen:
                m.max_consecutive_seen = self._seen_streak
            if state.startswith("Target Close"):
                m.prey_seen_close_steps += 1
        else:
            self._seen_streak = 0
        if events:
            m.food_collected += int(events.get("food_eaten", 0))
            if events.get("catch"):
                m.catches += 1
        return m

    def finalize(self) -> EpochMetrics:
        """Freeze counters and derive the per-food average."""
        m = self.metrics
        if m.food_collected > 0:
            m.avg_steps_per_food = m.steps_used / m.food_collected
        self._finalized = True
        return m


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_to_row(m: EpochMetrics) -> str:
    return ",".join([
        str(m.task), m.sub_environment, str(m.epoch_index),
        _format_value(float(m.cumulative_reward)),
        str(m.crashes), str(m.bad_decisions), str(m.food_collected),
        str(m.steps_used), _format_value(m.avg_steps_per_food),
        str(m.prey_seen_steps), str(m.prey_seen_close_steps),
        str(m.max_consecutive_seen), str(m.catches),
    ])


def csv_text(records: list[EpochMetrics]) -> str:
    if not records:
        raise ValueError("no epoch records to write")
    return "\n".join([CSV_HEADER] + [metrics_to_row(m) for m in records]) + "\n"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(records: list[EpochMetrics], destination: str) -> None:
    """Write the fixed-header per-epoch CSV atomically; empty input is an
    error and creates no file."""
    _atomic_write(destination, csv_text(records))


def read_csv(source: str) -> list[EpochMetrics]:
    """Parse a metrics CSV back into records (inverse of write_csv)."""
    with open(source, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("metrics CSV: bad or missing header")
    out = []
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != 13:
            raise ValueError(f"metrics CSV row {i}: expected 13 fields, got {len(parts)}")
        out.append(EpochMetrics(
            task=int(parts[0]), sub_environment=parts[1], epoch_index=int(parts[2]),
            cumulative_reward=float(parts[3]), crashes=int(parts[4]),
            bad_decisions=int(parts[5]), food_collected=int(parts[6]),
            steps_used=int(parts[7]),
            avg_steps_per_food=float(parts[8]) if parts[8] else None,
            prey_seen_steps=int(parts[9]), prey_seen_close_steps=int(parts[10]),
            max_consecutive_seen=int(parts[11]), catches=int(parts[12]),
        ))
    return out


# ---------------------------------------------------------------------------
# SVG charts

_CHART_W, _CHART_H = 800, 500
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 30, 50, 60
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")

# (file stem, chart title / y-axis label, metrics attribute)
_CHARTS_BY_TASK = {
    1: (
        ("crashes", "Number of crashes per epoch", "crashes"),
        ("bad_decisions", "Number of wrong actions per epoch", "bad_decisions"),
        ("cumulative_reward", "Cumulative reward", "cumulative_reward"),
    ),
    2: (
        ("cumulative_reward", "Cumulative reward", "cumulative_reward"),
        ("food_collected", "Number of food collected", "food_collected"),
        ("avg_steps_per_food", "Average time needed to collect a food",
         "avg_steps_per_food"),
    ),
    3: (
        ("prey_seen", "Time steps the prey was seen", "prey_seen_steps"),
        ("prey_seen_close", "Time steps the prey was seen closely",
         "prey_seen_close_steps"),
        ("max_consecutive_seen", "Prey seen consecutively per epoch",
         "max_consecutive_seen"),
        ("cumulative_reward", "Cumulative reward", "cumulative_reward"),
    ),
}


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _fmt(v: float) -> str:
    return f"{v:g}"


def _svg_chart(title: str, series: list[tuple[str, list[tuple[float, float]]]]) -> str:
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    if not xs:
        xs, ys = [0.0], [0.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _CHART_W - _MARGIN_L - _MARGIN_R
    plot_h = _CHART_H - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" '
        f'height="{_CHART_H}" viewBox="0 0 {_CHART_W} {_CHART_H}">',
        f'<rect width="{_CHART_W}" height="{_CHART_H}" fill="white"/>',
        f'<text x="{_CHART_W / 2:.2f}" y="28" text-anchor="middle" '
        f'font-family="sans-serif" font-size="18">{title}</text>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#333" stroke-width="1"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(f'<line x1="{x:.2f}" y1="{_MARGIN_T + plot_h}" x2="{x:.2f}" '
                     f'y2="{_MARGIN_T + plot_h + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x:.2f}" y="{_MARGIN_T + plot_h + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{y:.2f}" x2="{_MARGIN_L}" '
                     f'y2="{y:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{_MARGIN_L - 9}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="12">{_fmt(t)}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_CHART_H - 15}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="14">Epoch</text>')

    for idx, (label, pts) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        if len(pts) > 1:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        if label:
            lx = _MARGIN_L + plot_w - 10
            ly = _MARGIN_T + 18 + 18 * idx
            parts.append(f'<text x="{lx}" y="{ly}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="13" '
                         f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_charts(records: list[EpochMetrics], task: int, destination: str) -> list[str]:
    """Write one SVG per figure-analog for the task; returns the paths."""
    if not records:
        raise ValueError("no epoch records to chart")
    if task not in _CHARTS_BY_TASK:
        raise ValueError(f"unknown task id: {task}")
    os.makedirs(destination, exist_ok=True)
    sub_envs: list[str] = []
    for m in records:
        if m.sub_environment and m.sub_environment not in sub_envs:
            sub_envs.append(m.sub_environment)

    written = []
    for stem, title, attr in _CHARTS_BY_TASK[task]:
        if sub_envs:
            series = []
            for env in sub_envs:
                pts = [(float(m.epoch_index), float(getattr(m, attr)))
                       for m in records
                       if m.sub_environment == env and getattr(m, attr) is not None]
                series.append((env, pts))
        else:
            pts = [(float(m.epoch_index), float(getattr(m, attr)))
                   for m in records if getattr(m, attr) is not None]
            series = [("", pts)]
        path = os.path.join(destination, f"{stem}.svg")
        _atomic_write(path, _svg_chart(title, series))
        written.append(path)
    return written
