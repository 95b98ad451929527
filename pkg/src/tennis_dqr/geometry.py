"""Directions on the unit circle, response projections and halfplane regions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

BOUNDARY_TOL = 1e-9
DEFAULT_BOX = 10.0


@dataclass(frozen=True)
class Direction:
    u: np.ndarray
    index: int

    def __post_init__(self):
        if abs(np.linalg.norm(self.u) - 1.0) > 1e-12:
            raise ValueError("direction must have unit norm")


@dataclass(frozen=True)
class Halfplane:
    """The closed set {y : normal . y >= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        if not np.linalg.norm(self.normal) > 0:
            raise ValueError("halfplane normal must be nonzero")

    def slack(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.normal - self.offset


class Polygon:
    """Convex polygon with counterclockwise vertices; may be empty."""

    def __init__(self, vertices=()):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.vertices = v

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"Polygon({len(self)} vertices, area={self.area:.4g})"

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) < 3

    @property
    def area(self) -> float:
        if self.is_empty:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def centroid(self) -> np.ndarray:
        if self.is_empty:
            return np.full(2, np.nan)
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2
        return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6 * a)

    def map(self, scale: np.ndarray, shift: np.ndarray) -> "Polygon":
        """Image under y -> scale * y + shift with positive per-axis scale."""
        if self.is_empty:
            return Polygon()
        return Polygon(self.vertices * scale + shift)

    def to_list(self) -> list[list[float]]:
        return self.vertices.tolist()


def box(half_width: float = DEFAULT_BOX) -> Polygon:
    h = half_width
    return Polygon([[-h, -h], [h, -h], [h, h], [-h, h]])


def direction_grid(m: int) -> list[Direction]:
    if m < 3:
        raise ValueError(f"need at least 3 directions, got {m}")
    angles = 2 * np.pi * np.arange(m) / m
    return [Direction(np.array([np.cos(a), np.sin(a)]), j) for j, a in enumerate(angles)]


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """The +90 degree rotation of u, so (u, gamma) is a right-handed basis."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("u must be a unit vector")
    return np.array([-u[1], u[0]])


def _as_vector(u) -> np.ndarray:
    return u.u if isinstance(u, Direction) else np.asarray(u, dtype=float)


def project(Z: np.ndarray, u) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of each row of Z along u and along its complement."""
    u = _as_vector(u)
    gamma = orthonormal_complement(u)
    Z = np.asarray(Z, dtype=float)
    return Z @ u, Z @ gamma


def halfplane_from_fit(u, b_hat: float, xbeta: float) -> Halfplane:
    """{y : u'y - b_hat * gamma'y >= xbeta} for a fitted directional quantile."""
    u = _as_vector(u)
    return Halfplane(u - b_hat * orthonormal_complement(u), float(xbeta))


def _dedupe(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(v) == 0:
        return v
    step = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1)
    scale = max(1.0, float(np.abs(v).max()))
    return v[step > tol * scale]


def clip(poly: Polygon, hp: Halfplane) -> Polygon:
    """Cut a convex polygon with one halfplane (one Sutherland-Hodgman pass)."""
    if poly.is_empty:
        return Polygon()
    v = poly.vertices
    s = v @ hp.normal - hp.offset
    if np.all(s >= 0):
        return poly
    if np.all(s <= 0):
        return Polygon()
    out = []
    k = len(v)
    for i in range(k):
        j = (i + 1) % k
        if s[i] >= 0:
            out.append(v[i])
        if (s[i] > 0 and s[j] < 0) or (s[i] < 0 and s[j] > 0):
            t = s[i] / (s[i] - s[j])
            out.append(v[i] + t * (v[j] - v[i]))
    res = _dedupe(np.array(out))
    if len(res) < 3:
        return Polygon()
    return Polygon(res)


def intersect_halfplanes(hs: Iterable[Halfplane], bbox: Polygon | None = None) -> Polygon:
    poly = box() if bbox is None else bbox
    for hp in hs:
        poly = clip(poly, hp)
        if poly.is_empty:
            return Polygon()
    if poly.area <= 0:
        return Polygon()
    return poly


def contains(poly: Polygon, y: Sequence[float], tol: float = BOUNDARY_TOL) -> bool:
    """Closed membership with a small boundary tolerance."""
    if poly.is_empty:
        return False
    y = np.asarray(y, dtype=float)
    v = poly.vertices
    edges = np.roll(v, -1, axis=0) - v
    rel = y - v
    cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    dist = cross / np.linalg.norm(edges, axis=1)
    return bool(np.all(dist >= -tol))


def satisfies_all(hs: Sequence[Halfplane], y: np.ndarray) -> np.ndarray:
    """Direct evaluation of every inequality; returns a boolean per point and the
    smallest normalized slack (distance to the nearest bounding line)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    C = np.array([h.normal for h in hs])
    d = np.array([h.offset for h in hs])
    slack = (y @ C.T - d) / np.linalg.norm(C, axis=1)
    return np.all(slack >= 0, axis=1), slack.min(axis=1)


def symmetric_difference_area(a: Polygon, b: Polygon) -> float:
    """Area of the symmetric difference of two convex polygons."""
    if a.is_empty or b.is_empty:
        return a.area + b.area
    inter = a
    v = b.vertices
    for i in range(len(v)):
        edge = v[(i + 1) % len(v)] - v[i]
        # inward normal of a counterclockwise edge
        normal = np.array([-edge[1], edge[0]])
        inter = clip(inter, Halfplane(normal, float(normal @ v[i])))
        if inter.is_empty:
            break
    return a.area + b.area - 2 * inter.area
