"""Rooms, source/receiver placements and randomized scenario sampling."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import GeometryError, InfeasibleAbsorptionError, PlacementError

MARGIN = 0.05
MIN_SEPARATION = 0.5
HEIGHT_RANGE = (1.0, 2.0)
RETRY_BUDGET = 10_000
# Sabine constant used for both the absorption mapping and feasibility checks.
SABINE = 0.161


def _as_absorption(value):
    if value is None:
        return None
    if np.isscalar(value):
        return float(value)
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class Room:
    """A shoebox or a convex polyhedron with surface absorption.

    ``absorption`` is a scalar or a per-band tuple applied to every surface;
    ``surface_absorption`` optionally overrides it per surface (same entry
    shapes). ``None`` everywhere means "derive from the scenario RT60".
    """

    kind: str
    dims: Optional[tuple] = None
    faces: Optional[tuple] = None
    absorption: Optional[object] = None
    surface_absorption: Optional[tuple] = None
    _planes: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "shoebox":
            if self.dims is None or len(self.dims) != 3:
                raise GeometryError("shoebox needs three dimensions")
            dims = tuple(float(d) for d in self.dims)
            if not all(np.isfinite(dims)) or min(dims) <= 0:
                raise GeometryError(f"shoebox dimensions must be positive, got {dims}")
            object.__setattr__(self, "dims", dims)
            object.__setattr__(self, "_planes", _shoebox_planes(dims))
        elif self.kind == "polyhedron":
            if not self.faces:
                raise GeometryError("polyhedron needs faces")
            faces = tuple(tuple(tuple(float(c) for c in v) for v in face) for face in self.faces)
            object.__setattr__(self, "faces", faces)
            object.__setattr__(self, "_planes", _polyhedron_planes(faces))
        else:
            raise GeometryError(f"unknown room kind {self.kind!r}")
        object.__setattr__(self, "absorption", _as_absorption(self.absorption))
        if self.surface_absorption is not None:
            surf = tuple(_as_absorption(a) for a in self.surface_absorption)
            if len(surf) != self.n_surfaces:
                raise GeometryError(
                    f"{len(surf)} surface absorptions for {self.n_surfaces} surfaces")
            object.__setattr__(self, "surface_absorption", surf)
        for a in self._absorption_values():
            if not 0.0 <= a <= 1.0:
                raise GeometryError(f"absorption coefficient {a} outside [0, 1]")

    @classmethod
    def shoebox(cls, length, width, height, absorption=None, surface_absorption=None):
        return cls("shoebox", dims=(length, width, height), absorption=absorption,
                   surface_absorption=surface_absorption)

    @classmethod
    def polyhedron(cls, faces, absorption=None, surface_absorption=None):
        return cls("polyhedron", faces=faces, absorption=absorption,
                   surface_absorption=surface_absorption)

    @property
    def n_surfaces(self):
        return 6 if self.kind == "shoebox" else len(self.faces)

    @property
    def normals(self):
        return self._planes[0]

    @property
    def offsets(self):
        return self._planes[1]

    @property
    def areas(self):
        return self._planes[2]

    def _absorption_values(self):
        vals = []
        for a in (self.absorption, *(self.surface_absorption or ())):
            if a is None:
                continue
            vals.extend([a] if isinstance(a, float) else a)
        return vals

    @property
    def has_absorption(self):
        surf = self.surface_absorption or (None,) * self.n_surfaces
        return all(a is not None or self.absorption is not None for a in surf)

    def with_absorption(self, absorption):
        return replace(self, absorption=absorption, surface_absorption=None)

    def absorption_matrix(self, n_bands=1):
        """Absorption as ``(n_surfaces, n_bands)``; per-band data is averaged when ``n_bands == 1``."""
        rows = []
        for s in range(self.n_surfaces):
            a = self.absorption
            if self.surface_absorption is not None and self.surface_absorption[s] is not None:
                a = self.surface_absorption[s]
            if a is None:
                raise GeometryError("room has no absorption; derive it from an RT60 target first")
            if isinstance(a, float):
                rows.append([a] * n_bands)
            elif n_bands == 1:
                rows.append([float(np.mean(a))])
            elif len(a) == n_bands:
                rows.append(list(a))
            else:
                raise GeometryError(f"absorption has {len(a)} bands, model expects {n_bands}")
        return np.array(rows, dtype=np.float64)

    def contains(self, point, margin=0.0):
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(self.offsets - self.normals @ p >= margin))

    def as_polyhedron(self):
        """The same shoebox expressed as six explicit faces (wall order preserved)."""
        if self.kind != "shoebox":
            return self
        L, W, H = self.dims
        faces = (
            ((0, 0, 0), (0, 0, H), (0, W, H), (0, W, 0)),
            ((L, 0, 0), (L, W, 0), (L, W, H), (L, 0, H)),
            ((0, 0, 0), (L, 0, 0), (L, 0, H), (0, 0, H)),
            ((0, W, 0), (0, W, H), (L, W, H), (L, W, 0)),
            ((0, 0, 0), (0, W, 0), (L, W, 0), (L, 0, 0)),
            ((0, 0, H), (L, 0, H), (L, W, H), (0, W, H)),
        )
        return Room.polyhedron(faces, absorption=self.absorption,
                               surface_absorption=self.surface_absorption)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "shoebox":
            d["dims"] = list(self.dims)
        else:
            d["faces"] = [[list(v) for v in f] for f in self.faces]
        if self.absorption is not None:
            d["absorption"] = self.absorption if isinstance(self.absorption, float) else list(self.absorption)
        if self.surface_absorption is not None:
            d["surface_absorption"] = [a if a is None or isinstance(a, float) else list(a)
                                       for a in self.surface_absorption]
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "shoebox":
            return cls.shoebox(*d["dims"], absorption=d.get("absorption"),
                               surface_absorption=d.get("surface_absorption"))
        if kind == "polyhedron":
            return cls.polyhedron(d["faces"], absorption=d.get("absorption"),
                                  surface_absorption=d.get("surface_absorption"))
        raise GeometryError(f"unknown room kind {kind!r}")


def _shoebox_planes(dims):
    L, W, H = dims
    normals = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]],
                       dtype=np.float64)
    offsets = np.array([0.0, L, 0.0, W, 0.0, H])
    areas = np.array([W * H, W * H, L * H, L * H, L * W, L * W])
    return normals, offsets, areas


def _polyhedron_planes(faces):
    verts = np.array([v for f in faces for v in f])
    scale = float(np.ptp(verts, axis=0).max())
    if scale <= 0:
        raise GeometryError("degenerate polyhedron")
    tol = 1e-9 * max(scale, 1.0)
    centre = verts.mean(axis=0)

    edges = {}
    key = lambda v: tuple(np.round(np.asarray(v) / tol).astype(np.int64))  # noqa: E731
    normals, offsets, areas = [], [], []
    for fi, face in enumerate(faces):
        if len(face) < 3:
            raise GeometryError(f"face {fi} has fewer than 3 vertices")
        pts = np.array(face)
        # Newell's method: robust normal and twice-area vector for planar loops
        nxt = np.roll(pts, -1, axis=0)
        vec = 0.5 * np.sum(np.cross(pts, nxt), axis=0)
        area = float(np.linalg.norm(vec))
        if area <= tol * scale:
            raise GeometryError(f"face {fi} has zero area")
        n = vec / area
        off = float(n @ pts.mean(axis=0))
        if np.any(np.abs(pts @ n - off) > 1e-6 * max(scale, 1.0)):
            raise GeometryError(f"face {fi} is not planar")
        if n @ centre > off:
            n, off = -n, -off
        normals.append(n)
        offsets.append(off)
        areas.append(area)
        for a, b in zip(face, face[1:] + face[:1]):
            e = tuple(sorted((key(a), key(b))))
            edges[e] = edges.get(e, 0) + 1
    bad = [e for e, cnt in edges.items() if cnt != 2]
    if bad:
        raise GeometryError(f"polyhedron is not watertight: {len(bad)} edges not shared by exactly two faces")
    normals = np.array(normals)
    offsets = np.array(offsets)
    if np.any(verts @ normals.T - offsets[None, :] > 1e-6 * max(scale, 1.0)):
        raise GeometryError("polyhedron is not convex")
    return normals, offsets, np.array(areas)


def surface_and_volume(room):
    """Total surface area (m^2) and volume (m^3)."""
    if room.kind == "shoebox":
        L, W, H = room.dims
        return 2.0 * (L * W + L * H + W * H), L * W * H
    S = float(np.sum(room.areas))
    # divergence theorem: V = 1/3 sum_f (n_f . x_f) A_f
    V = float(np.sum(room.offsets * room.areas)) / 3.0
    return S, V


def min_rt60(room):
    """Shortest RT60 the Sabine bound allows (all surfaces fully absorbing)."""
    S, V = surface_and_volume(room)
    return SABINE * V / S


@dataclass(frozen=True)
class Scenario:
    room: Room
    source_pos: tuple
    receiver_pos: tuple
    rt60_target: Optional[float]
    scenario_id: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "source_pos", tuple(float(v) for v in self.source_pos))
        object.__setattr__(self, "receiver_pos", tuple(float(v) for v in self.receiver_pos))
        if self.rt60_target is not None:
            object.__setattr__(self, "rt60_target", float(self.rt60_target))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def distance(self):
        return float(np.linalg.norm(np.subtract(self.source_pos, self.receiver_pos)))

    def swapped(self):
        return replace(self, source_pos=self.receiver_pos, receiver_pos=self.source_pos)

    def to_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "room": self.room.to_dict(),
            "source_pos": list(self.source_pos),
            "receiver_pos": list(self.receiver_pos),
            "rt60_target": self.rt60_target,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(Room.from_dict(d["room"]), d["source_pos"], d["receiver_pos"],
                   d.get("rt60_target"), d["scenario_id"], d["seed"])


@dataclass(frozen=True)
class SimParams:
    """Propagation and rendering parameters. ``rir_length=None`` picks a length per scenario."""

    c: float = 343.0
    sample_rate: int = 16000
    rir_length: Optional[float] = None

    def __post_init__(self):
        if not self.c > 0 or not self.sample_rate > 0:
            raise ValueError("speed of sound and sample rate must be positive")
        if self.rir_length is not None and not self.rir_length > 0:
            raise ValueError("rir_length must be positive")

    def length_for(self, scenario):
        if self.rir_length is not None:
            return self.rir_length
        rt = scenario.rt60_target or 0.0
        return max(1.2 * rt, 0.25)

    def n_samples(self, scenario):
        return int(round(self.length_for(scenario) * self.sample_rate))


def validate_placement(room, source, receiver, margin=MARGIN, min_separation=MIN_SEPARATION):
    """Check the placement invariants; returns ``(ok, violations)``."""
    violations = []
    src = np.asarray(source, dtype=np.float64)
    rcv = np.asarray(receiver, dtype=np.float64)
    if not room.contains(src, margin):
        violations.append(f"source not at least {margin} m inside every surface")
    if not room.contains(rcv, margin):
        violations.append(f"receiver not at least {margin} m inside every surface")
    sep = float(np.linalg.norm(src - rcv))
    if sep < min_separation:
        violations.append(f"source-receiver separation {sep:.3f} m < {min_separation} m")
    return not violations, violations


def scenario_seed(seed, room_index, placement_index):
    digest = hashlib.blake2b(f"{room_index}:{placement_index}".encode(), digest_size=8).digest()
    return (int(seed) ^ int.from_bytes(digest, "little")) & 0xFFFFFFFFFFFFFFFF


def _check_range(name, rng_):
    lo, hi = (float(v) for v in rng_)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi < lo:
        raise ValueError(f"{name} must satisfy 0 < low <= high, got {rng_}")
    return lo, hi


def _sample_room(i, n_place, dim_range, rt60_range, seed):
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, i])
    dims = rng.uniform(dim_range[0], dim_range[1], size=3)
    room = Room.shoebox(*dims)
    t_min = min_rt60(room)
    lo, hi = rt60_range
    if hi <= t_min:
        raise InfeasibleAbsorptionError(
            f"room {i} ({dims[0]:.2f} x {dims[1]:.2f} x {dims[2]:.2f} m) cannot reach RT60 "
            f"<= {hi:g} s; minimum achievable RT60 is {t_min:.3f} s", min_rt60=t_min)
    rt60 = rng.uniform(max(lo, t_min), hi)
    while rt60 <= t_min:
        rt60 = rng.uniform(max(lo, t_min), hi)

    L, W, H = dims
    zlo, zhi = max(HEIGHT_RANGE[0], MARGIN), min(HEIGHT_RANGE[1], H - MARGIN)
    if zhi < zlo or min(L, W) <= 2 * MARGIN:
        raise PlacementError(f"room {i} is too small for the placement constraints", room_index=i)
    out = []
    attempts = 0
    for p in range(n_place):
        while True:
            attempts += 1
            if attempts > RETRY_BUDGET:
                raise PlacementError(
                    f"room {i}: no valid placement after {RETRY_BUDGET} attempts", room_index=i)
            pts = rng.uniform([MARGIN, MARGIN, zlo], [L - MARGIN, W - MARGIN, zhi], size=(2, 3))
            if np.linalg.norm(pts[0] - pts[1]) >= MIN_SEPARATION:
                break
        out.append(Scenario(room, pts[0], pts[1], rt60, f"r{i:03d}_p{p:02d}",
                            scenario_seed(seed, i, p)))
    return out


def sample_scenarios(n_rooms, placements_per_room, dim_range=(3.0, 20.0),
                     rt60_range=(0.1, 1.0), seed=0):
    """Draw ``n_rooms`` random shoeboxes with ``placements_per_room`` placements each.

    Room dimensions are i.i.d. uniform per axis. The RT60 target is drawn once
    per room, uniformly over the part of ``rt60_range`` above the room's Sabine
    minimum; a room whose minimum exceeds the whole range raises
    :class:`InfeasibleAbsorptionError`. Every room draws from its own seeded
    stream, so the result does not depend on generation order.
    """
    if int(n_rooms) < 1 or int(placements_per_room) < 1:
        raise ValueError("n_rooms and placements_per_room must be >= 1")
    dim_range = _check_range("dim_range", dim_range)
    rt60_range = _check_range("rt60_range", rt60_range)
    out = []
    for i in range(int(n_rooms)):
        out.extend(_sample_room(i, int(placements_per_room), dim_range, rt60_range, seed))
    return out


def load_room(path):
    with open(path) as fh:
        return Room.from_dict(json.load(fh))


def save_room(room, path):
    Path(path).write_text(json.dumps(room.to_dict(), indent=2) + "\n")


def write_scenarios(scenarios: Sequence[Scenario], path):
    with open(path, "w") as fh:
        for s in scenarios:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def read_scenarios(path):
    with open(path) as fh:
        return [Scenario.from_dict(json.loads(line)) for line in fh if line.strip()]
