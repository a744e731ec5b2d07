"""World description: area, building, base stations, users, protection points.

Everything here is immutable after construction and safe to share between
concurrently running simulation iterations.  Coordinates are 2-D (meters);
device height enters only through the z component of base-station positions
and the configured receiver height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Point, Polygon

from .errors import ConfigurationError

OUTDOOR = "outdoor"
INDOOR = "indoor"

FULL_BELT = "full_belt"
RESTRICTED_AREA = "restricted_area"
PAL_AREA = "pal_area"

# Near-duplicate and exact-offset tolerances for belt construction (meters).
_GEOM_EPS = 1e-9


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, bounds inclusive."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigurationError(f"degenerate rectangle {self}")

    def contains(self, x, y):
        return (self.x_min <= x) & (x <= self.x_max) & (self.y_min <= y) & (y <= self.y_max)

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min


@dataclass(frozen=True)
class BsConfig:
    """One base station: fixed position, TX gain and power ceiling."""

    id: int
    position: tuple[float, float, float]  # (x, y, z) m
    max_power_dbm: float
    antenna_gain_dbi: float
    network: str  # OUTDOOR or INDOOR

    def __post_init__(self):
        if not math.isfinite(self.max_power_dbm):
            raise ConfigurationError(f"BS {self.id}: max_power_dbm must be finite")
        if self.network not in (OUTDOOR, INDOOR):
            raise ConfigurationError(f"BS {self.id}: unknown network {self.network!r}")

    @property
    def max_power_mw(self):
        return 10.0 ** (self.max_power_dbm / 10.0)


@dataclass(frozen=True)
class UeConfig:
    """One user terminal."""

    id: int
    position: tuple[float, float]
    technology: str  # "4G" or "5G"
    speed_kmh: float
    antenna_gain_dbi: float
    noise_figure_db: float
    network: str

    def __post_init__(self):
        if self.speed_kmh < 0:
            raise ConfigurationError(f"UE {self.id}: speed_kmh must be >= 0")
        if self.noise_figure_db < 0:
            raise ConfigurationError(f"UE {self.id}: noise_figure_db must be >= 0")
        if self.technology not in ("4G", "5G"):
            raise ConfigurationError(f"UE {self.id}: unknown technology {self.technology!r}")


@dataclass(frozen=True)
class ProtectionGeometry:
    """Set of points outside the building where interference is constrained."""

    points: np.ndarray  # (N, 2)
    kind: str  # FULL_BELT, RESTRICTED_AREA or PAL_AREA

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if pts.shape[0] == 0:
            raise ConfigurationError("protection geometry must contain at least one point")

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class Scenario:
    """Immutable description of the simulated world."""

    area_width_m: float
    area_height_m: float
    building: tuple[tuple[float, float], ...]  # simple polygon, CCW or CW
    outdoor_bs: tuple[BsConfig, ...]
    indoor_bs: tuple[BsConfig, ...]
    outdoor_region: Rect
    carrier_hz: float = 3.5e9
    bandwidth_hz: float = 20e6
    n_rb: int = 108
    ue_height_m: float = 1.5
    _polygon: Polygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = [tuple(map(float, v)) for v in self.building]
        if len(verts) < 3:
            raise ConfigurationError("building polygon needs at least 3 vertices")
        poly = Polygon(verts)
        if not poly.is_simple or poly.area <= 0:
            raise ConfigurationError("building polygon must be simple with positive area")
        object.__setattr__(self, "building", tuple(verts))
        object.__setattr__(self, "_polygon", poly)

        minx, miny, maxx, maxy = poly.bounds
        if minx < 0 or miny < 0 or maxx > self.area_width_m or maxy > self.area_height_m:
            raise ConfigurationError("building polygon must lie inside the area")
        for bs in self.indoor_bs:
            if bs.network != INDOOR:
                raise ConfigurationError(f"BS {bs.id} listed as indoor but tagged {bs.network}")
            if not poly.contains(Point(bs.position[0], bs.position[1])):
                raise ConfigurationError(f"indoor BS {bs.id} is not inside the building")
        for bs in self.outdoor_bs:
            if bs.network != OUTDOOR:
                raise ConfigurationError(f"BS {bs.id} listed as outdoor but tagged {bs.network}")
            if poly.contains(Point(bs.position[0], bs.position[1])):
                raise ConfigurationError(f"outdoor BS {bs.id} is inside the building")
        region_poly = shapely.box(
            self.outdoor_region.x_min,
            self.outdoor_region.y_min,
            self.outdoor_region.x_max,
            self.outdoor_region.y_max,
        )
        if region_poly.intersection(poly).area > 1e-9:
            raise ConfigurationError("outdoor region overlaps the building interior")
        if self.n_rb < 3:
            raise ConfigurationError("n_rb must be at least 3")

    @property
    def polygon(self) -> Polygon:
        return self._polygon

    @property
    def all_bs(self) -> tuple[BsConfig, ...]:
        return self.outdoor_bs + self.indoor_bs

    def inside_building(self, x, y):
        """Vectorized point-in-building test (boundary counts as inside)."""
        return shapely.intersects_xy(self._polygon, x, y)

    def bs_by_id(self, bs_id: int) -> BsConfig:
        for bs in self.all_bs:
            if bs.id == bs_id:
                return bs
        raise KeyError(f"no BS with id {bs_id}")


def _ccw_vertices(verts):
    """Return vertices in counter-clockwise order (shoelace test)."""
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return v if area2 > 0 else v[::-1]


def _boundary_distance(poly: Polygon, pts: np.ndarray) -> np.ndarray:
    boundary = poly.exterior
    return np.array([boundary.distance(Point(p[0], p[1])) for p in pts])


def generate_protection_belt(scenario: Scenario, spacing_m: float = 1.0,
                             offset_m: float = 0.5) -> ProtectionGeometry:
    """Place points on the outward offset curve of the building boundary.

    Every returned point lies at distance exactly ``offset_m`` from the
    building polygon (the offset curve is sampled exactly: per-edge parallel
    segments plus circular arcs around convex corners, then filtered against
    the true point-to-polygon distance so overlapping segments near reflex
    corners are discarded).  Consecutive points along the curve are at most
    ``spacing_m`` apart and every wall contributes at least one point.
    """
    if spacing_m <= 0:
        raise ConfigurationError("spacing_m must be > 0")
    if offset_m < 0:
        raise ConfigurationError("offset_m must be >= 0")
    verts = _ccw_vertices(scenario.building)
    n = len(verts)
    if n < 3:
        raise ConfigurationError("degenerate building polygon")

    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    normals = []
    for p, q in edges:
        d = q - p
        length = float(np.hypot(*d))
        if length <= 0:
            raise ConfigurationError("building polygon has a zero-length edge")
        normals.append(np.array([d[1], -d[0]]) / length)  # outward for CCW

    candidates = []
    for i, (p, q) in enumerate(edges):
        # Arc around the starting vertex of this edge (between edge i-1 and i).
        v = p
        a0 = math.atan2(*normals[i - 1][::-1])
        a1 = math.atan2(*normals[i][::-1])
        sweep = (a1 - a0) % (2 * math.pi)
        if 1e-12 < sweep < math.pi and offset_m > 0:  # convex corner
            arc_len = offset_m * sweep
            m = max(1, math.ceil(arc_len / spacing_m))
            for k in range(m + 1):
                ang = a0 + sweep * k / m
                candidates.append(v + offset_m * np.array([math.cos(ang), math.sin(ang)]))
        # Parallel offset of the edge itself.
        a = p + offset_m * normals[i]
        b = q + offset_m * normals[i]
        length = float(np.hypot(*(q - p)))
        m = max(1, math.ceil(length / spacing_m))
        for k in range(m + 1):
            candidates.append(a + (b - a) * k / m)

    pts = np.array(candidates)
    dist = _boundary_distance(scenario.polygon, pts)
    inside = scenario.inside_building(pts[:, 0], pts[:, 1])
    keep = (np.abs(dist - offset_m) <= _GEOM_EPS) & ~inside
    if offset_m == 0:
        keep = dist <= _GEOM_EPS
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise ConfigurationError("belt construction produced no valid points")

    # Drop near-duplicates (shared endpoints of adjacent edges/arcs).
    dedup = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - dedup[-1])) > _GEOM_EPS:
            dedup.append(p)
    if np.hypot(*(dedup[-1] - dedup[0])) <= _GEOM_EPS and len(dedup) > 1:
        dedup.pop()
    return ProtectionGeometry(points=np.array(dedup), kind=FULL_BELT)


def restrict_to_protection_area(belt: ProtectionGeometry, region: Rect) -> ProtectionGeometry:
    """Keep only the belt points inside the known activity area of outdoor users."""
    if belt.kind != FULL_BELT:
        raise ConfigurationError("restriction expects a full protection belt")
    mask = region.contains(belt.points[:, 0], belt.points[:, 1])
    if not np.any(mask):
        raise ConfigurationError("protection area contains no belt point; nothing to protect")
    return ProtectionGeometry(points=belt.points[mask], kind=RESTRICTED_AREA)


@dataclass(frozen=True)
class PlacementCounts:
    """How many users of each kind to place."""

    indoor_uniform: int = 25
    indoor_cluster: int = 10
    outdoor: int = 15
    cluster_radius_m: float = 3.0
    cluster_bs_id: int | None = None  # default: first indoor BS


# Indoor speed mix: 80 % quasi-static, 20 % walking.
_INDOOR_SPEEDS_KMH = (0.36, 3.0)
_INDOOR_SPEED_SPLIT = 0.8
# Outdoor users are pedestrians; their positions stay fixed, the speed only
# drives the fading coherence time.
_OUTDOOR_SPEED_KMH = 3.0
_DEFAULT_NOISE_FIGURE_DB = 9.0


def _sample_in_polygon(scenario: Scenario, count: int, rng: np.random.Generator) -> np.ndarray:
    poly = scenario.polygon
    minx, miny, maxx, maxy = poly.bounds
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        m = max(4 * (count - filled), 16)
        x = rng.uniform(minx, maxx, m)
        y = rng.uniform(miny, maxy, m)
        ok = shapely.contains_xy(poly, x, y)
        take = min(int(ok.sum()), count - filled)
        out[filled:filled + take, 0] = x[ok][:take]
        out[filled:filled + take, 1] = y[ok][:take]
        filled += take
    return out


def _sample_in_cluster(scenario: Scenario, center: np.ndarray, radius: float,
                       count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from disk(center, radius) ∩ building, by resampling."""
    out = np.empty((count, 2))
    filled = 0
    attempts = 0
    while filled < count:
        m = max(4 * (count - filled), 16)
        r = radius * np.sqrt(rng.uniform(0, 1, m))
        th = rng.uniform(0, 2 * math.pi, m)
        x = center[0] + r * np.cos(th)
        y = center[1] + r * np.sin(th)
        ok = shapely.contains_xy(scenario.polygon, x, y)
        take = min(int(ok.sum()), count - filled)
        out[filled:filled + take, 0] = x[ok][:take]
        out[filled:filled + take, 1] = y[ok][:take]
        filled += take
        attempts += 1
        if attempts > 1000:
            raise ConfigurationError("cluster disk lies (almost) entirely outside the building")
    return out


def place_users(scenario: Scenario, counts: PlacementCounts,
                rng: np.random.Generator,
                noise_figure_db: float = _DEFAULT_NOISE_FIGURE_DB) -> list[UeConfig]:
    """Draw user positions, technologies and speeds.

    Pure function of (scenario, counts, rng state): indoor users uniform over
    the building interior, cluster users uniform over a disk around the
    cluster BS (resampled into the building if the disk sticks out), outdoor
    users uniform over the outdoor region.  Every user is 5G with probability
    0.5, the rest 4G.
    """
    ues: list[UeConfig] = []
    uid = 0

    def _tech():
        return "5G" if rng.random() < 0.5 else "4G"

    uniform_pts = _sample_in_polygon(scenario, counts.indoor_uniform, rng)
    for p in uniform_pts:
        speed = _INDOOR_SPEEDS_KMH[0] if rng.random() < _INDOOR_SPEED_SPLIT else _INDOOR_SPEEDS_KMH[1]
        ues.append(UeConfig(uid, (float(p[0]), float(p[1])), _tech(), speed,
                            0.0, noise_figure_db, INDOOR))
        uid += 1

    if counts.indoor_cluster > 0:
        if not scenario.indoor_bs:
            raise ConfigurationError("cluster users requested but no indoor BS present")
        bs_id = counts.cluster_bs_id if counts.cluster_bs_id is not None else scenario.indoor_bs[0].id
        center = np.array(scenario.bs_by_id(bs_id).position[:2])
        cluster_pts = _sample_in_cluster(scenario, center, counts.cluster_radius_m,
                                         counts.indoor_cluster, rng)
        for p in cluster_pts:
            ues.append(UeConfig(uid, (float(p[0]), float(p[1])), _tech(), 0.36,
                                0.0, noise_figure_db, INDOOR))
            uid += 1

    region = scenario.outdoor_region
    for _ in range(counts.outdoor):
        x = rng.uniform(region.x_min, region.x_max)
        y = rng.uniform(region.y_min, region.y_max)
        ues.append(UeConfig(uid, (float(x), float(y)), _tech(), _OUTDOOR_SPEED_KMH,
                            0.0, noise_figure_db, OUTDOOR))
        uid += 1
    return ues


def default_scenario() -> Scenario:
    """Representative world: L-shaped building north of a protected street.

    Two outdoor BSs serve a street strip (y < 60 m) where outdoor users
    appear; five indoor BSs cover the L-shaped building above it.
    """
    building = ((20.0, 60.0), (50.0, 60.0), (50.0, 90.0),
                (80.0, 90.0), (80.0, 120.0), (20.0, 120.0))
    outdoor = tuple(
        BsConfig(i + 1, pos, 21.0, 0.0, OUTDOOR)
        for i, pos in enumerate([(10.0, 45.0, 10.0), (90.0, 45.0, 10.0)])
    )
    indoor = tuple(
        BsConfig(i + 3, pos, 21.0, 0.0, INDOOR)
        for i, pos in enumerate([
            (35.0, 68.0, 3.0),
            (35.0, 90.0, 3.0),
            (35.0, 112.0, 3.0),
            (60.0, 105.0, 3.0),
            (74.0, 112.0, 3.0),
        ])
    )
    return Scenario(
        area_width_m=100.0,
        area_height_m=130.0,
        building=building,
        outdoor_bs=outdoor,
        indoor_bs=indoor,
        outdoor_region=Rect(0.0, 35.0, 100.0, 60.0),
    )
