"""Analytic ray/primitive intersection.

Every primitive exposes ``intersect(origins, dirs) -> (t, normals)`` over
arrays of rays (``(N, 3)`` each, unit directions).  Misses have ``t = inf``.
Normals are unit length and point out of the solid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS = 1e-6


@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple

    def __post_init__(self):
        n = math.sqrt(sum(c * c for c in self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, got |d| = {n}")


@dataclass(frozen=True)
class Hit:
    t: float
    point: tuple
    normal: tuple
    instance_id: int = 0
    material: object = None


def _pick_root(t0, t1):
    t = np.where(t0 > EPS, t0, np.where(t1 > EPS, t1, np.inf))
    return t


class Sphere:
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def bounding_sphere(self):
        return self.center, self.radius

    def intersect(self, o, d):
        oc = o - self.center
        b = np.einsum("ij,ij->i", oc, d)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius * self.radius
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t = np.where(hit, _pick_root(-b - sq, -b + sq), np.inf)
        p = o + d * np.where(np.isfinite(t), t, 0.0)[:, None]
        n = (p - self.center) / self.radius
        return t, n


class Box:
    """Box with half extents ``half``, rotated by ``yaw`` about the z axis."""

    def __init__(self, center, half, yaw=0.0):
        self.center = np.asarray(center, dtype=np.float64)
        self.half = np.asarray(half, dtype=np.float64)
        self.yaw = float(yaw)
        self._c = math.cos(self.yaw)
        self._s = math.sin(self.yaw)

    def bounding_sphere(self):
        return self.center, float(np.linalg.norm(self.half))

    def _to_local(self, v):
        c, s = self._c, self._s
        return np.stack([c * v[:, 0] + s * v[:, 1], -s * v[:, 0] + c * v[:, 1], v[:, 2]], axis=1)

    def _to_world(self, v):
        c, s = self._c, self._s
        return np.stack([c * v[:, 0] - s * v[:, 1], s * v[:, 0] + c * v[:, 1], v[:, 2]], axis=1)

    def intersect(self, o, d):
        p = self._to_local(o - self.center)
        ld = self._to_local(d)
        h = self.half
        parallel = ld == 0.0
        safe = np.where(parallel, 1.0, ld)
        ta = (-h - p) / safe
        tb = (h - p) / safe
        inside_slab = np.abs(p) <= h
        # parallel rays: unbounded slab if inside it, empty otherwise
        ta = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), ta)
        tb = np.where(parallel, np.where(inside_slab, np.inf, np.inf), tb)
        tlo = np.minimum(ta, tb)
        thi = np.maximum(ta, tb)
        tnear = tlo.max(axis=1)
        tfar = thi.min(axis=1)
        hit = (tnear <= tfar) & (tfar > EPS)
        entering = tnear > EPS
        t = np.where(hit, np.where(entering, tnear, tfar), np.inf)
        axis_in = tlo.argmax(axis=1)
        axis_out = thi.argmin(axis=1)
        axis = np.where(entering, axis_in, axis_out)
        rows = np.arange(len(axis))
        comp = ld[rows, axis]
        sign = np.where(entering, -np.sign(comp), np.sign(comp))
        n_local = np.zeros_like(p)
        n_local[rows, axis] = sign
        return t, self._to_world(n_local)


class Cylinder:
    """Upright capped cylinder; ``base`` is the center of the bottom disc."""

    def __init__(self, base, radius, height):
        self.base = np.asarray(base, dtype=np.float64)
        self.radius = float(radius)
        self.height = float(height)

    def bounding_sphere(self):
        c = self.base + np.array([0.0, 0.0, self.height / 2])
        return c, math.hypot(self.radius, self.height / 2)

    def intersect(self, o, d):
        p = o - self.base
        r, hgt = self.radius, self.height
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = p[:, 0] * d[:, 0] + p[:, 1] * d[:, 1]
        c = p[:, 0] ** 2 + p[:, 1] ** 2 - r * r
        disc = b * b - a * c
        ok = (a > 1e-15) & (disc >= 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        safe_a = np.where(ok, a, 1.0)
        best = np.full(len(p), np.inf)
        normal = np.zeros_like(p)
        for root in ((-b - sq) / safe_a, (-b + sq) / safe_a):
            z = p[:, 2] + root * d[:, 2]
            valid = ok & (root > EPS) & (z >= 0) & (z <= hgt) & (root < best)
            best = np.where(valid, root, best)
            hx = p[:, 0] + root * d[:, 0]
            hy = p[:, 1] + root * d[:, 1]
            side = np.stack([hx / r, hy / r, np.zeros_like(hx)], axis=1)
            normal = np.where(valid[:, None], side, normal)
        safe_dz = np.where(d[:, 2] == 0.0, 1.0, d[:, 2])
        for zc, nz in ((0.0, -1.0), (hgt, 1.0)):
            tc = (zc - p[:, 2]) / safe_dz
            hx = p[:, 0] + tc * d[:, 0]
            hy = p[:, 1] + tc * d[:, 1]
            valid = (d[:, 2] != 0.0) & (tc > EPS) & (hx * hx + hy * hy <= r * r) & (tc < best)
            best = np.where(valid, tc, best)
            normal = np.where(valid[:, None], np.array([0.0, 0.0, nz]), normal)
        return best, normal


class Cone:
    """Upright cone with a base disc of ``radius`` at ``base`` and apex above it."""

    def __init__(self, base, radius, height):
        self.base = np.asarray(base, dtype=np.float64)
        self.radius = float(radius)
        self.height = float(height)

    def bounding_sphere(self):
        c = self.base + np.array([0.0, 0.0, self.height / 2])
        return c, math.hypot(self.radius, self.height / 2)

    def intersect(self, o, d):
        p = o - self.base
        R, H = self.radius, self.height
        k2 = (R / H) ** 2
        q = H - p[:, 2]
        a = d[:, 0] ** 2 + d[:, 1] ** 2 - k2 * d[:, 2] ** 2
        b = p[:, 0] * d[:, 0] + p[:, 1] * d[:, 1] + k2 * q * d[:, 2]
        c = p[:, 0] ** 2 + p[:, 1] ** 2 - k2 * q * q
        quad = np.abs(a) > 1e-12
        disc = b * b - a * c
        ok_q = quad & (disc >= 0)
        sq = np.sqrt(np.where(ok_q, disc, 0.0))
        safe_a = np.where(quad, a, 1.0)
        safe_b = np.where(b == 0.0, 1.0, b)
        r0 = np.where(ok_q, (-b - sq) / safe_a, np.where(~quad & (b != 0.0), -c / (2 * safe_b), np.inf))
        r1 = np.where(ok_q, (-b + sq) / safe_a, np.inf)
        best = np.full(len(p), np.inf)
        normal = np.zeros_like(p)
        for root in (r0, r1):
            finite = np.isfinite(root)
            rr = np.where(finite, root, 0.0)
            z = p[:, 2] + rr * d[:, 2]
            valid = finite & (root > EPS) & (z >= 0) & (z <= H) & (root < best)
            best = np.where(valid, root, best)
            hx = p[:, 0] + rr * d[:, 0]
            hy = p[:, 1] + rr * d[:, 1]
            radial = np.sqrt(hx * hx + hy * hy)
            g = np.stack([hx, hy, (R / H) * radial], axis=1)
            gn = np.linalg.norm(g, axis=1)
            apex = gn < 1e-12
            g = np.where(apex[:, None], np.array([0.0, 0.0, 1.0]), g / np.where(apex, 1.0, gn)[:, None])
            normal = np.where(valid[:, None], g, normal)
        safe_dz = np.where(d[:, 2] == 0.0, 1.0, d[:, 2])
        tc = -p[:, 2] / safe_dz
        hx = p[:, 0] + tc * d[:, 0]
        hy = p[:, 1] + tc * d[:, 1]
        valid = (d[:, 2] != 0.0) & (tc > EPS) & (hx * hx + hy * hy <= R * R) & (tc < best)
        best = np.where(valid, tc, best)
        normal = np.where(valid[:, None], np.array([0.0, 0.0, -1.0]), normal)
        return best, normal


class RoomInterior:
    """Inside faces of an axis-aligned box; normals point into the room."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)

    def bounding_sphere(self):
        return None

    def intersect(self, o, d):
        safe = np.where(d == 0.0, 1.0, d)
        wall = np.where(d > 0, self.hi, self.lo)
        te = np.where(d == 0.0, np.inf, (wall - o) / safe)
        axis = te.argmin(axis=1)
        rows = np.arange(len(axis))
        t = te[rows, axis]
        t = np.where(t > EPS, t, np.inf)
        n = np.zeros_like(o)
        n[rows, axis] = -np.sign(d[rows, axis])
        return t, n


def primitive_for_object(obj):
    """Analytic primitive for a :class:`~countscene.scenegen.SceneObject`."""
    x, y, z = obj.position
    s = obj.size
    if obj.shape == "sphere":
        return Sphere((x, y, z + s / 2), s / 2)
    if obj.shape == "cube":
        return Box((x, y, z + s / 2), (s / 2, s / 2, s / 2), obj.yaw)
    if obj.shape == "cylinder":
        return Cylinder((x, y, z), s / 2, s)
    if obj.shape == "cone":
        return Cone((x, y, z), s / 2, s)
    raise ValueError(f"unknown shape {obj.shape!r}")


def intersect_primitive(ray, prim, instance_id=None, material=None):
    """Nearest positive hit of a single ray, or ``None``.

    ``prim`` is a primitive instance or a scene object (converted with
    :func:`primitive_for_object`, its ``object_id`` becoming the instance id).
    """
    if hasattr(prim, "shape") and hasattr(prim, "object_id"):
        if instance_id is None:
            instance_id = prim.object_id
        prim = primitive_for_object(prim)
    o = np.asarray(ray.origin, dtype=np.float64)[None, :]
    d = np.asarray(ray.direction, dtype=np.float64)[None, :]
    t, n = prim.intersect(o, d)
    if not np.isfinite(t[0]):
        return None
    tt = float(t[0])
    point = tuple(float(v) for v in (o[0] + tt * d[0]))
    return Hit(tt, point, tuple(float(v) for v in n[0]), instance_id or 0, material)
