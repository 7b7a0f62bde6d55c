"""From raw sensor snapshots to the discrete task states.

Blob detection runs 4-connected component labeling over the synthetic color
frame; the dominant blob is banded into far/close x left/center/right. IR
readings are grouped by bearing with fixed precedence. The thresholds are
declared assumptions and sit in PerceptionConfig.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .worldsim import COLOR_CODES, CameraFrame

TASK1_STATES = (
    "Object Front",
    "Object Left",
    "Object Right",
    "Object Back Left",
    "Object Back Right",
    "Object Back Left & Back Right",
    "Nothing Detected",
)

TASK23_STATES = (
    "Target Far Left",
    "Target Far Center",
    "Target Far Right",
    "Target Close Left",
    "Target Close Center",
    "Target Close Right",
    "Object Front",
    "Object Left",
    "Object Right",
    "Nothing Detected but last seen Left",
    "Nothing Detected but last seen Right",
    "Nothing Detected",
)

STATE_SETS = {1: TASK1_STATES, 2: TASK23_STATES, 3: TASK23_STATES}


@dataclass(frozen=True)
class PerceptionConfig:
    detect_threshold: float = 0.15        # IR group fires at or above this
    close_area_threshold: float = 0.02    # blob area fraction for "close"
    side_left_boundary: float = 1.0 / 3.0
    side_right_boundary: float = 2.0 / 3.0
    min_blob_pixels: int = 4


@dataclass(frozen=True)
class Blob:
    color: str
    centroid_x: float    # fraction of frame width, 0 = left edge
    area: float          # fraction of frame pixels
    pixel_count: int


@dataclass(frozen=True)
class TargetSighting:
    distance: str   # "far" | "close"
    side: str       # "left" | "center" | "right"


@dataclass(frozen=True)
class PerceptionMemory:
    """Which side the target was last seen on: "left", "right" or "none"."""

    last_seen_side: str = "none"


def detect_blobs(frame: CameraFrame, color: str,
                 min_blob_pixels: int = PerceptionConfig.min_blob_pixels) -> list[Blob]:
    """4-connected components of `color`, largest first.

    Components below min_blob_pixels are dropped. Centroids are unweighted
    means of member cell centres; sort ties break toward the leftmost
    centroid. Integer accumulation keeps results independent of scan order.
    """
    code = COLOR_CODES[color]
    grid = frame.cells
    h, w = grid.shape
    mask = grid == code
    if not mask.any():
        return []
    rows = mask.tolist()
    seen = [[False] * w for _ in range(h)]
    blobs: list[Blob] = []
    total = w * h
    for r0 in range(h):
        row0 = rows[r0]
        for c0 in range(w):
            if not row0[c0] or seen[r0][c0]:
                continue
            seen[r0][c0] = True
            stack = [(r0, c0)]
            count = 0
            col_sum = 0
            while stack:
                r, c = stack.pop()
                count += 1
                col_sum += c
                if r > 0 and rows[r - 1][c] and not seen[r - 1][c]:
                    seen[r - 1][c] = True
                    stack.append((r - 1, c))
                if r + 1 < h and rows[r + 1][c] and not seen[r + 1][c]:
                    seen[r + 1][c] = True
                    stack.append((r + 1, c))
                if c > 0 and rows[r][c - 1] and not seen[r][c - 1]:
                    seen[r][c - 1] = True
                    stack.append((r, c - 1))
                if c + 1 < w and rows[r][c + 1] and not seen[r][c + 1]:
                    seen[r][c + 1] = True
                    stack.append((r, c + 1))
            if count >= min_blob_pixels:
                centroid_x = (col_sum + 0.5 * count) / count / w
                blobs.append(Blob(color=color, centroid_x=centroid_x,
                                  area=count / total, pixel_count=count))
    blobs.sort(key=lambda b: (-b.pixel_count, b.centroid_x))
    return blobs


def classify_target(blobs: list[Blob],
                    cfg: PerceptionConfig = PerceptionConfig()) -> TargetSighting | None:
    """Band the largest blob into distance and side, or None without blobs."""
    if not blobs:
        return None
    top = blobs[0]
    if top.centroid_x < cfg.side_left_boundary:
        side = "left"
    elif top.centroid_x > cfg.side_right_boundary:
        side = "right"
    else:
        side = "center"
    distance = "close" if top.area >= cfg.close_area_threshold else "far"
    return TargetSighting(distance=distance, side=side)


def _check_ir(ir) -> np.ndarray:
    ir = np.asarray(ir, dtype=float)
    if ir.shape != (8,):
        raise ValueError(f"expected 8 IR readings, got shape {ir.shape}")
    if not np.isfinite(ir).all() or (ir < 0).any() or (ir > 1).any():
        raise ValueError("IR readings must be finite and within [0, 1]")
    return ir


def _ir_groups(ir: np.ndarray, threshold: float) -> dict[str, bool]:
    # Bearing order: 0, +25, -25, +50, -50, +135, -135, 180 degrees.
    # The rear 180 sensor feeds both back groups at half weight.
    half_back = ir[7] / 2.0
    return {
        "front": ir[0] >= threshold,
        "left": ir[1] >= threshold or ir[3] >= threshold,
        "right": ir[2] >= threshold or ir[4] >= threshold,
        "back_left": ir[5] >= threshold or half_back >= threshold,
        "back_right": ir[6] >= threshold or half_back >= threshold,
    }


def discretize_task1(ir, cfg: PerceptionConfig = PerceptionConfig()) -> str:
    """Obstacle-avoidance state from IR alone; front-first precedence."""
    g = _ir_groups(_check_ir(ir), cfg.detect_threshold)
    if g["front"]:
        return "Object Front"
    if g["left"]:
        return "Object Left"
    if g["right"]:
        return "Object Right"
    if g["back_left"] and g["back_right"]:
        return "Object Back Left & Back Right"
    if g["back_left"]:
        return "Object Back Left"
    if g["back_right"]:
        return "Object Back Right"
    return "Nothing Detected"


def _update_memory(blobs: list[Blob], mem: PerceptionMemory) -> PerceptionMemory:
    if not blobs:
        return mem
    side = "left" if blobs[0].centroid_x < 0.5 else "right"
    return replace(mem, last_seen_side=side)


def _target_label(sighting: TargetSighting) -> str:
    return (f"Target {'Close' if sighting.distance == 'close' else 'Far'} "
            f"{sighting.side.capitalize()}")


def _memory_label(mem: PerceptionMemory) -> str:
    if mem.last_seen_side == "left":
        return "Nothing Detected but last seen Left"
    if mem.last_seen_side == "right":
        return "Nothing Detected but last seen Right"
    return "Nothing Detected"


def discretize_task2(ir, blobs: list[Blob], mem: PerceptionMemory,
                     cfg: PerceptionConfig = PerceptionConfig()) -> tuple[str, PerceptionMemory]:
    """Foraging state: obstacles override a visible target (being stuck is the
    dominant hazard); back IR groups have no states here and are ignored."""
    g = _ir_groups(_check_ir(ir), cfg.detect_threshold)
    mem = _update_memory(blobs, mem)
    if g["front"]:
        return "Object Front", mem
    if g["left"]:
        return "Object Left", mem
    if g["right"]:
        return "Object Right", mem
    sighting = classify_target(blobs, cfg)
    if sighting is not None:
        return _target_label(sighting), mem
    return _memory_label(mem), mem


def discretize_task3(ir, blobs: list[Blob], mem: PerceptionMemory,
                     cfg: PerceptionConfig = PerceptionConfig()) -> tuple[str, PerceptionMemory]:
    """Predator state: a visible prey wins over IR (the prey itself trips the
    IR at close range, and contact must stay a target state)."""
    g = _ir_groups(_check_ir(ir), cfg.detect_threshold)
    mem = _update_memory(blobs, mem)
    sighting = classify_target(blobs, cfg)
    if sighting is not None:
        return _target_label(sighting), mem
    if g["front"]:
        return "Object Front", mem
    if g["left"]:
        return "Object Left", mem
    if g["right"]:
        return "Object Right", mem
    return _memory_label(mem), mem
