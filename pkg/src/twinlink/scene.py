"""Desk-scale geometric twin of a microcell.

A base station (BS) sits above a flat area populated with axis-aligned box
obstacles. User positions come either from a regular grid (static snapshot)
or from vehicles moving along lanes; for every position the LoS ray and the
first-order specular reflections off box faces are traced with the image
method, producing timestamped, labeled path lists.

Coordinates are meters in a right-handed world frame with z up; the scene
extent spans ``[0, width] x [0, depth]`` on the ground plane.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0

# RNG stream tags; each sample draws from SeedSequence([seed, stream, index]).
_GRID_STREAM = 0
_VEHICULAR_STREAM = 1


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


class PathKind(str, enum.Enum):
    LOS = "los"
    REFLECTED = "refl"


class Source(str, enum.Enum):
    GRID = "grid"
    VEHICULAR = "veh"


@dataclass(frozen=True)
class Blocker:
    """Axis-aligned box obstacle; every face is a potential specular reflector."""

    min_corner: Vec3
    max_corner: Vec3
    reflection_loss_db: float = 10.0
    id: str = ""

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float)
        hi = np.asarray(self.max_corner, dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError(f"blocker {self.id!r}: corners must be finite")
        if np.any(lo > hi):
            raise ValueError(f"blocker {self.id!r}: min_corner must be <= max_corner componentwise")
        if not math.isfinite(self.reflection_loss_db) or self.reflection_loss_db < 0:
            raise ValueError(f"blocker {self.id!r}: reflection_loss_db must be finite and >= 0")
        object.__setattr__(self, "min_corner", Vec3(*map(float, lo)))
        object.__setattr__(self, "max_corner", Vec3(*map(float, hi)))


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear vehicle motion.

    Waypoint positions are the ground-level center of the vehicle footprint.
    The vehicle occupies an axis-aligned box of ``vehicle_blocker_dims``
    (length, width, height), with length along the direction of travel, and its
    antenna sits at the center of the roof.
    """

    waypoints: tuple[tuple[float, Vec3], ...]
    vehicle_blocker_dims: Vec3 = Vec3(4.5, 1.8, 1.5)
    reflection_loss_db: float = 3.0
    id: str = ""

    def __post_init__(self):
        wps = tuple((float(t), Vec3(*map(float, p))) for t, p in self.waypoints)
        if len(wps) < 1:
            raise ValueError("trajectory needs at least one waypoint")
        times = [t for t, _ in wps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "vehicle_blocker_dims", Vec3(*map(float, self.vehicle_blocker_dims)))

    @property
    def t_start(self) -> float:
        return self.waypoints[0][0]

    @property
    def t_end(self) -> float:
        return self.waypoints[-1][0]

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray] | None:
        """Position and unit heading at time ``t``, or None outside the waypoint span."""
        if t < self.t_start or t > self.t_end:
            return None
        times = np.array([w[0] for w in self.waypoints])
        pts = np.array([w[1] for w in self.waypoints])
        if len(times) == 1:
            return pts[0], np.array([1.0, 0.0, 0.0])
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        frac = (t - times[k]) / (times[k + 1] - times[k])
        pos = pts[k] + frac * (pts[k + 1] - pts[k])
        heading = _heading(pts, k)
        return pos, heading

    def box_at(self, t: float) -> Blocker | None:
        state = self.state_at(t)
        if state is None:
            return None
        return vehicle_box(state[0], state[1], self.vehicle_blocker_dims,
                           self.reflection_loss_db, self.id)


def _heading(pts: np.ndarray, k: int) -> np.ndarray:
    # A vehicle that is standing still keeps the heading of its last motion.
    for j in list(range(k, -1, -1)) + list(range(k + 1, len(pts) - 1)):
        d = pts[j + 1] - pts[j]
        n = np.linalg.norm(d[:2])
        if n > 0:
            return np.array([d[0] / n, d[1] / n, 0.0])
    return np.array([1.0, 0.0, 0.0])


def vehicle_box(center, heading, dims, reflection_loss_db=3.0, id="") -> Blocker:
    """Axis-aligned bounding box of a vehicle footprint rotated to ``heading``."""
    length, width, height = dims
    c, s = abs(heading[0]), abs(heading[1])
    half_x = 0.5 * (length * c + width * s)
    half_y = 0.5 * (length * s + width * c)
    return Blocker(
        Vec3(center[0] - half_x, center[1] - half_y, center[2]),
        Vec3(center[0] + half_x, center[1] + half_y, center[2] + height),
        reflection_loss_db,
        id,
    )


def lane_trajectories(
    start: Sequence[float],
    end: Sequence[float],
    speed: float,
    n_vehicles: int,
    duration: float,
    dims: Sequence[float] = (4.5, 1.8, 1.5),
    reflection_loss_db: float = 3.0,
    phase: float = 0.0,
    id_prefix: str = "veh",
) -> list[Trajectory]:
    """Vehicles shuttling back and forth along a straight lane.

    Vehicles are spread evenly over one round trip; ``phase`` (fraction of a
    round trip) shifts all of them. Waypoints are emitted at every turnaround
    so the piecewise-linear interpolation is exact.
    """
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length <= 0 or speed <= 0:
        raise ValueError("lane needs positive length and speed")
    leg = length / speed
    period = 2.0 * leg
    out = []
    for v in range(n_vehicles):
        offset = ((v / n_vehicles + phase) % 1.0) * period
        # position along the round trip at t = 0 is `offset` seconds into it
        times = [0.0]
        t_next = (leg - offset) if offset < leg else (period - offset)
        while t_next < duration:
            times.append(t_next)
            t_next += leg
        times.append(duration)
        wps = []
        for t in times:
            s = (offset + t) % period
            frac = s / leg if s <= leg else 2.0 - s / leg
            wps.append((t, Vec3(*(a + frac * (b - a)))))
        out.append(Trajectory(tuple(wps), Vec3(*dims), reflection_loss_db, f"{id_prefix}{v}"))
    return out


@dataclass(frozen=True)
class SceneConfig:
    bs_position: Vec3 = Vec3(0.0, 0.0, 21.7)
    bs_boresight_azimuth: float = math.radians(45.0)
    bs_downtilt: float = math.radians(2.0)
    extent: tuple[float, float] = (60.0, 60.0)
    grid_cell: float = 2.0
    ue_height: float = 1.5
    static_blockers: tuple[Blocker, ...] = ()
    lanes: tuple[Trajectory, ...] = ()
    sim_duration: float = 300.0
    sample_period: float = 0.1
    los_dropout_prob: float = 0.1
    max_paths: int = 6
    rng_seed: int = 0
    carrier_frequency: float = 28e9

    def __post_init__(self):
        if self.grid_cell <= 0:
            raise ValueError("grid_cell must be > 0")
        if not 0.0 <= self.los_dropout_prob <= 1.0:
            raise ValueError("los_dropout_prob must be in [0, 1]")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be > 0")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        object.__setattr__(self, "bs_position", Vec3(*map(float, self.bs_position)))
        object.__setattr__(self, "static_blockers", tuple(self.static_blockers))
        object.__setattr__(self, "lanes", tuple(self.lanes))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def inside(self, p) -> bool:
        w, d = self.extent
        return 0.0 <= p[0] <= w and 0.0 <= p[1] <= d


@dataclass(frozen=True)
class PathRecord:
    gain: complex
    delay: float
    azimuth: float
    elevation: float
    kind: PathKind = PathKind.REFLECTED


@dataclass
class Sample:
    id: str
    paths: list[PathRecord]
    label: int
    timestamp: float
    source: Source = Source.GRID

    @property
    def has_los(self) -> bool:
        return any(p.kind is PathKind.LOS for p in self.paths)


@dataclass
class GenerationStats:
    emitted: int = 0
    dropped_no_path: int = 0
    dropped_inside_blocker: int = 0
    skipped_outside: int = 0
    per_step: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# geometry


def _box_arrays(blockers: Sequence[Blocker]) -> tuple[np.ndarray, np.ndarray]:
    if not blockers:
        return np.zeros((0, 3)), np.zeros((0, 3))
    lo = np.array([b.min_corner for b in blockers], dtype=float)
    hi = np.array([b.max_corner for b in blockers], dtype=float)
    return lo, hi


def segment_hits(p0, p1, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Slab test of the open segment (p0, p1) against each box; returns a bool per box.

    Boxes are closed, the segment is open: a segment that merely ends on a
    face is not a hit, a zero-thickness box is a plane that can still be hit.
    """
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    if lo.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p0) / d
        t2 = (hi - p0) / d
    t_near = np.minimum(t1, t2)
    t_far = np.maximum(t1, t2)
    parallel = d == 0.0
    inside_slab = (p0 >= lo) & (p0 <= hi)
    t_near = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), t_near)
    t_far = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), t_far)
    t_enter = t_near.max(axis=1)
    t_exit = t_far.min(axis=1)
    return (t_enter <= t_exit) & (t_enter < 1.0) & (t_exit > 0.0)


def los_blocked(bs, ue, blockers: Sequence[Blocker]) -> bool:
    """True iff the open segment between ``bs`` and ``ue`` crosses any blocker."""
    if np.array_equal(np.asarray(bs, dtype=float), np.asarray(ue, dtype=float)):
        raise ValueError("bs and ue coincide")
    lo, hi = _box_arrays(blockers)
    return bool(segment_hits(bs, ue, lo, hi).any())


def point_inside_any(p, blockers: Sequence[Blocker]) -> bool:
    """Strict interior test (points on faces are outside)."""
    lo, hi = _box_arrays(blockers)
    if lo.shape[0] == 0:
        return False
    p = np.asarray(p, dtype=float)
    return bool(np.any(np.all((p > lo) & (p < hi), axis=1)))


def bs_local_angles(bs_azimuth: float, downtilt: float, direction) -> tuple[float, float]:
    """Azimuth/elevation of a world-frame ``direction`` in the tilted BS array frame.

    The array boresight is local +x; it points at ``bs_azimuth`` in the
    horizontal plane and ``downtilt`` radians below the horizon.
    """
    v = np.asarray(direction, dtype=float)
    ca, sa = math.cos(bs_azimuth), math.sin(bs_azimuth)
    x1 = ca * v[0] + sa * v[1]
    y1 = -sa * v[0] + ca * v[1]
    z1 = v[2]
    cd, sd = math.cos(downtilt), math.sin(downtilt)
    x2 = x1 * cd - z1 * sd
    z2 = x1 * sd + z1 * cd
    norm = math.sqrt(x2 * x2 + y1 * y1 + z2 * z2)
    az = math.atan2(y1, x2)
    if az == -math.pi:
        az = math.pi
    el = math.asin(max(-1.0, min(1.0, z2 / norm)))
    return az, el


def _reflection_candidates(bs: np.ndarray, ue: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Image-method reflection points off every box face.

    Returns (box index, reflection point, total length) for faces that both
    endpoints see from the outside and whose specular point lies on the face.
    """
    out = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for plane, sign in ((lo[:, axis], -1.0), (hi[:, axis], 1.0)):
            front = (sign * (bs[axis] - plane) > 0) & (sign * (ue[axis] - plane) > 0)
            idx = np.nonzero(front)[0]
            if idx.size == 0:
                continue
            c = plane[idx]
            image_axis = 2.0 * c - bs[axis]
            t = (c - image_axis) / (ue[axis] - image_axis)
            r = np.empty((idx.size, 3))
            r[:, axis] = c
            for a in others:
                r[:, a] = bs[a] + t * (ue[a] - bs[a])
            on_face = np.ones(idx.size, dtype=bool)
            for a in others:
                on_face &= (r[:, a] >= lo[idx, a]) & (r[:, a] <= hi[idx, a])
            for n in np.nonzero(on_face)[0]:
                image = bs.copy()
                image[axis] = image_axis[n]
                out.append((int(idx[n]), r[n], float(np.linalg.norm(ue - image))))
    return out


def trace_paths(
    scene: SceneConfig,
    ue,
    blockers_at_t: Sequence[Blocker],
    rng: np.random.Generator,
    exclude: Sequence[Blocker] = (),
) -> list[PathRecord]:
    """LoS plus first-order reflections between the BS and ``ue``.

    ``exclude`` lists boxes that neither reflect nor occlude for this
    receiver (the receiving vehicle's own body). The LoS path, when
    geometrically clear, is removed with probability ``scene.los_dropout_prob``.
    An empty result means the sample should be dropped.
    """
    bs = np.asarray(scene.bs_position, dtype=float)
    ue = np.asarray(ue, dtype=float)
    excluded = {id(b) for b in exclude}
    active = [b for b in blockers_at_t if id(b) not in excluded]
    lo, hi = _box_arrays(active)
    lam = scene.wavelength
    fc = scene.carrier_frequency

    def make(length, loss_db, first_hop, kind):
        tau = length / SPEED_OF_LIGHT
        amp = lam / (4.0 * math.pi * length) * 10.0 ** (-loss_db / 20.0)
        gain = amp * complex(math.cos(-2 * math.pi * fc * tau), math.sin(-2 * math.pi * fc * tau))
        az, el = bs_local_angles(scene.bs_boresight_azimuth, scene.bs_downtilt, first_hop - bs)
        return PathRecord(gain, tau, az, el, kind)

    paths = []
    # the dropout draw happens for every receiver so the stream layout is fixed
    drop_los = rng.random() < scene.los_dropout_prob
    if not segment_hits(bs, ue, lo, hi).any() and not drop_los:
        paths.append(make(float(np.linalg.norm(ue - bs)), 0.0, ue, PathKind.LOS))

    for k, r, length in _reflection_candidates(bs, ue, lo, hi):
        mask = np.ones(lo.shape[0], dtype=bool)
        mask[k] = False
        if segment_hits(bs, r, lo[mask], hi[mask]).any():
            continue
        if segment_hits(r, ue, lo[mask], hi[mask]).any():
            continue
        paths.append(make(length, active[k].reflection_loss_db, r, PathKind.REFLECTED))

    paths.sort(key=lambda p: (-abs(p.gain), p.delay))
    return paths[: scene.max_paths]


def _label(paths: Sequence[PathRecord]) -> int:
    return 0 if any(p.kind is PathKind.LOS for p in paths) else 1


def grid_positions(scene: SceneConfig) -> np.ndarray:
    w, d = scene.extent
    nx = int(math.floor(w / scene.grid_cell + 1e-9))
    ny = int(math.floor(d / scene.grid_cell + 1e-9))
    xs = (np.arange(nx) + 0.5) * scene.grid_cell
    ys = (np.arange(ny) + 0.5) * scene.grid_cell
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, scene.ue_height)])


def sample_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), stream, index]))


def generate_grid_dataset(scene: SceneConfig, stats: GenerationStats | None = None) -> list[Sample]:
    """One sample per grid-cell center at ``ue_height``, all stamped t = 0.

    Cells whose center lies inside a blocker, or that receive no path, are
    dropped and counted in ``stats``.
    """
    stats = stats if stats is not None else GenerationStats()
    out = []
    for j, pos in enumerate(grid_positions(scene)):
        if point_inside_any(pos, scene.static_blockers):
            stats.dropped_inside_blocker += 1
            continue
        paths = trace_paths(scene, pos, scene.static_blockers, sample_rng(scene.rng_seed, _GRID_STREAM, j))
        if not paths:
            stats.dropped_no_path += 1
            continue
        out.append(Sample(f"g{j:06d}", paths, _label(paths), 0.0, Source.GRID))
    stats.emitted += len(out)
    log.info("grid dataset: %d samples, %d inside blockers, %d without paths",
             len(out), stats.dropped_inside_blocker, stats.dropped_no_path)
    return out


def timesteps(scene: SceneConfig) -> np.ndarray:
    n = int(math.floor(scene.sim_duration / scene.sample_period + 1e-9))
    return np.arange(n + 1) * scene.sample_period


def generate_vehicular_dataset(scene: SceneConfig, stats: GenerationStats | None = None) -> list[Sample]:
    """Trace every vehicle's roof antenna at every sampling instant.

    Vehicles outside their waypoint span are absent; vehicles whose position
    leaves the scene extent are skipped (and counted) for that step. All other
    vehicles act as moving blockers for each other.
    """
    if not scene.lanes:
        raise ValueError("vehicular dataset needs at least one lane")
    stats = stats if stats is not None else GenerationStats()
    out = []
    n_veh = len(scene.lanes)
    for k, t in enumerate(timesteps(scene)):
        t = float(t)
        boxes = []
        for traj in scene.lanes:
            state = traj.state_at(t)
            if state is None:
                boxes.append(None)
                continue
            if not scene.inside(state[0]):
                stats.skipped_outside += 1
                boxes.append(None)
                continue
            boxes.append(traj.box_at(t))
        moving = [b for b in boxes if b is not None]
        blockers = list(scene.static_blockers) + moving
        for v, box in enumerate(boxes):
            if box is None:
                continue
            ue = np.array([
                0.5 * (box.min_corner.x + box.max_corner.x),
                0.5 * (box.min_corner.y + box.max_corner.y),
                box.max_corner.z,
            ])
            rng = sample_rng(scene.rng_seed, _VEHICULAR_STREAM, k * n_veh + v)
            paths = trace_paths(scene, ue, blockers, rng, exclude=(box,))
            if not paths:
                stats.dropped_no_path += 1
                continue
            out.append(Sample(f"v{k:05d}-{v:03d}", paths, _label(paths), round(t, 9), Source.VEHICULAR))
    stats.emitted += len(out)
    log.info("vehicular dataset: %d samples, %d skipped outside extent, %d without paths",
             len(out), stats.skipped_outside, stats.dropped_no_path)
    return out
