"""Low-level 2D geometry used by the world simulator.

Segments are float arrays of shape (N, 4) as [x1, y1, x2, y2]; polygons are
(M, 2) vertex arrays. Angles are radians, normalized to (-pi, pi].
"""
from __future__ import annotations

import math

import numpy as np

_EPS = 1e-12


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def point_segments_distance(px: float, py: float, segs: np.ndarray) -> np.ndarray:
    """Distance from a point to each segment in `segs`."""
    if segs.size == 0:
        return np.empty(0)
    ax, ay, bx, by = segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3]
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    t = ((px - ax) * abx + (py - ay) * aby) / np.where(denom > _EPS, denom, 1.0)
    t = np.clip(np.where(denom > _EPS, t, 0.0), 0.0, 1.0)
    return np.hypot(px - (ax + t * abx), py - (ay + t * aby))


def ray_segments_hit(ox: float, oy: float, dx: float, dy: float, segs: np.ndarray) -> float:
    """Distance along the ray (ox,oy)+(dx,dy)t to the nearest segment, or inf.

    Direction must be a unit vector; parallel/degenerate segments never hit.
    """
    if segs.size == 0:
        return math.inf
    ax, ay, bx, by = segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3]
    ex, ey = bx - ax, by - ay
    denom = dx * ey - dy * ex
    ok = np.abs(denom) > _EPS
    denom_safe = np.where(ok, denom, 1.0)
    aox, aoy = ax - ox, ay - oy
    t = (aox * ey - aoy * ex) / denom_safe
    s = (aox * dy - aoy * dx) / denom_safe
    hit = ok & (t >= -_EPS) & (s >= -_EPS) & (s <= 1.0 + _EPS)
    if not hit.any():
        return math.inf
    return float(max(np.min(t[hit]), 0.0))


def ray_circle_hit(ox: float, oy: float, dx: float, dy: float,
                   cx: float, cy: float, r: float) -> float:
    """Distance along a unit-direction ray to a circle, inf if missed.

    An origin inside the circle reports distance 0.
    """
    fx, fy = ox - cx, oy - cy
    c0 = fx * fx + fy * fy - r * r
    if c0 < 0.0:
        return 0.0
    b = dx * fx + dy * fy
    disc = b * b - c0
    if disc < 0.0:
        return math.inf
    root = math.sqrt(disc)
    t = -b - root
    if t < 0.0:
        t = -b + root
    return t if t >= 0.0 else math.inf


def polygon_edges(poly: np.ndarray) -> np.ndarray:
    """Closed edge list of a polygon as a (M, 4) segment array."""
    nxt = np.roll(poly, -1, axis=0)
    return np.hstack([poly, nxt])


def point_in_polygon(px: float, py: float, poly: np.ndarray) -> bool:
    """Even-odd rule; boundary points may land on either side."""
    inside = False
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > py) != (yj > py):
            x_cross = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < x_cross:
                inside = not inside
        j = i
    return inside


def point_polygon_distance(px: float, py: float, poly: np.ndarray) -> float:
    """Distance to the polygon: 0 inside, else distance to the boundary."""
    if point_in_polygon(px, py, poly):
        return 0.0
    return float(np.min(point_segments_distance(px, py, polygon_edges(poly))))


def integrate_arc(x: float, y: float, heading: float,
                  v: float, omega: float, dt: float) -> tuple[float, float, float]:
    """Exact unicycle integration over one interval of constant (v, omega)."""
    if abs(omega) < 1e-9:
        return (x + v * dt * math.cos(heading),
                y + v * dt * math.sin(heading),
                normalize_angle(heading))
    h2 = heading + omega * dt
    radius = v / omega
    return (x + radius * (math.sin(h2) - math.sin(heading)),
            y - radius * (math.cos(h2) - math.cos(heading)),
            normalize_angle(h2))
