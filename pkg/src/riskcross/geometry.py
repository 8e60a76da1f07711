"""Planar geometry primitives: arc-length parametrized polylines and
oriented-rectangle overlap tests used for vehicle footprints.
"""

from __future__ import annotations

import math

import numpy as np


class Polyline:
    """A simple polyline parametrized by arc length.

    Points are an (n, 2) array in meters. Arc length is measured along the
    vertex order, which is also the travel direction.
    """

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs an (n, 2) array with n >= 2")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("polyline has zero-length segment")
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self.cum_s = np.concatenate(([0.0], np.cumsum(seg_len)))

    @property
    def length(self) -> float:
        return float(self.cum_s[-1])

    def _locate(self, s: float) -> tuple[int, float]:
        """Segment index and fraction for arc length s, clamped to the ends."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum_s, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        frac = (s - self.cum_s[i]) / self._seg_len[i]
        return i, frac

    def point_at(self, s: float) -> np.ndarray:
        i, frac = self._locate(s)
        return self.points[i] + frac * self._seg[i]

    def heading_at(self, s: float) -> float:
        """Tangent direction in radians, in (-pi, pi]."""
        i, _ = self._locate(s)
        return math.atan2(self._seg[i, 1], self._seg[i, 0])

    def sample(self, step: float) -> np.ndarray:
        """Arc lengths at roughly `step` spacing, always including both ends."""
        n = max(int(math.ceil(self.length / step)), 1)
        return np.linspace(0.0, self.length, n + 1)

    def points_at(self, s_values: np.ndarray) -> np.ndarray:
        s_values = np.clip(np.asarray(s_values, dtype=float), 0.0, self.length)
        idx = np.clip(
            np.searchsorted(self.cum_s, s_values, side="right") - 1,
            0,
            len(self._seg_len) - 1,
        )
        frac = (s_values - self.cum_s[idx]) / self._seg_len[idx]
        return self.points[idx] + frac[:, None] * self._seg[idx]


def arc_points(
    center: tuple[float, float],
    radius: float,
    start_angle: float,
    end_angle: float,
    step: float = 0.5,
) -> np.ndarray:
    """Sampled circular arc from start_angle to end_angle (radians, signed sweep)."""
    sweep = end_angle - start_angle
    n = max(int(math.ceil(abs(sweep) * radius / step)), 2)
    ang = np.linspace(start_angle, end_angle, n + 1)
    cx, cy = center
    return np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)


class OrientedRect:
    """Rectangle footprint: center, heading (radians) and length x width extents."""

    __slots__ = ("center", "heading", "length", "width")

    def __init__(self, center: np.ndarray, heading: float, length: float, width: float):
        self.center = np.asarray(center, dtype=float)
        self.heading = float(heading)
        self.length = float(length)
        self.width = float(width)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        ax_l, ax_w = self.axes()
        hl, hw = 0.5 * self.length, 0.5 * self.width
        return np.array(
            [
                self.center + hl * ax_l + hw * ax_w,
                self.center + hl * ax_l - hw * ax_w,
                self.center - hl * ax_l - hw * ax_w,
                self.center - hl * ax_l + hw * ax_w,
            ]
        )

    def inflated(self, margin: float) -> "OrientedRect":
        return OrientedRect(
            self.center, self.heading, self.length + 2.0 * margin, self.width + 2.0 * margin
        )

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the rectangle (boundary inclusive)."""
        ax_l, ax_w = self.axes()
        rel = np.asarray(pts, dtype=float) - self.center
        return (np.abs(rel @ ax_l) <= 0.5 * self.length + 1e-12) & (
            np.abs(rel @ ax_w) <= 0.5 * self.width + 1e-12
        )


def rects_overlap(a: OrientedRect, b: OrientedRect) -> bool:
    """Separating-axis overlap test for two oriented rectangles.

    Touching rectangles count as overlapping. Symmetric by construction:
    the four candidate axes are the same regardless of argument order.
    """
    ca = a.corners()
    cb = b.corners()
    for rect in (a, b):
        for axis in rect.axes():
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def rect_overlaps_many(
    rect: OrientedRect, centers: np.ndarray, headings: np.ndarray, length: float, width: float
) -> np.ndarray:
    """Vectorized SAT: one rectangle against many with shared extents.

    Returns a boolean mask over the candidate rectangles. Used for conflict
    zone precomputation where thousands of pose pairs are screened.
    """
    centers = np.asarray(centers, dtype=float)
    headings = np.asarray(headings, dtype=float)
    n = centers.shape[0]
    alive = np.ones(n, dtype=bool)

    cos_h, sin_h = np.cos(headings), np.sin(headings)
    hl, hw = 0.5 * length, 0.5 * width
    # corners of the many rectangles: (n, 4, 2)
    ax_l = np.stack([cos_h, sin_h], axis=1)
    ax_w = np.stack([-sin_h, cos_h], axis=1)
    corners_many = (
        centers[:, None, :]
        + np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]])[None, :, 0:1] * hl * ax_l[:, None, :]
        + np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]])[None, :, 1:2] * hw * ax_w[:, None, :]
    )
    corners_one = rect.corners()

    # axes of the single rectangle
    for axis in rect.axes():
        pa_min, pa_max = (corners_one @ axis).min(), (corners_one @ axis).max()
        pb = corners_many @ axis
        alive &= ~((pa_max < pb.min(axis=1)) | (pb.max(axis=1) < pa_min))
    # axes of the many rectangles
    for ax in (ax_l, ax_w):
        pa = corners_one @ ax.T  # (4, n)
        pb = np.einsum("nij,nj->ni", corners_many, ax)  # (n, 4)
        alive &= ~(
            (pa.max(axis=0) < pb.min(axis=1)) | (pb.max(axis=1) < pa.min(axis=0))
        )
    return alive
