"""Two-step freeway / surface-street classification.

Step one matches the crash's coded road name against known freeway
routes: route-number patterns (I-#, US-#, SR-#, LOOP-#) plus an alias
table for local names.  Routes that are freeway along their entire
extent classify immediately; routes that change functional class along
their length are ambiguous and fall to step two, a proximity test of
the crash coordinates against the route's polylines (within the
threshold, 400 m by default and inclusive, the crash is on the
freeway).

Geometry: point-to-polyline distance uses a local planar
(equirectangular) projection per leg to find the nearest point (vertex
or perpendicular foot), then the haversine distance to that point.
Sub-meter accurate at city scale.  Coordinates are (lat, lon) degrees;
no antimeridian handling (the study areas are far from it).
"""

from __future__ import annotations

import json
import math
import re
from configparser import ConfigParser
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .model import ConfigError, CrashBenchError, CrashRecord, DataError, LatLon, RoadClass

EARTH_RADIUS_M = 6371000.0
METERS_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0
DEFAULT_PROXIMITY_THRESHOLD_M = 400.0


class NoSegmentsError(CrashBenchError):
    """Distance query over an empty (possibly filtered) segment set."""


def haversine_m(a: LatLon, b: LatLon) -> float:
    """Great-circle distance between two points, meters."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def point_leg_distance_m(point: LatLon, v1: LatLon, v2: LatLon) -> float:
    """Distance from a point to one polyline leg.

    The leg's neighborhood is projected to a plane (equirectangular,
    centered on the leg midpoint), the nearest point on the leg is found
    there (clamped perpendicular foot), mapped back, and measured with
    the haversine.  The projection is affine in (lat, lon), so the foot
    always lies between the input vertices.
    """
    lat0 = math.radians((v1.lat + v2.lat) / 2.0)
    lon0 = math.radians((v1.lon + v2.lon) / 2.0)
    cos0 = math.cos(math.radians((v1.lat + v2.lat) / 2.0))

    def project(p: LatLon) -> tuple[float, float]:
        return (
            EARTH_RADIUS_M * (math.radians(p.lon) - lon0) * cos0,
            EARTH_RADIUS_M * (math.radians(p.lat) - lat0),
        )

    px, py = project(point)
    x1, y1 = project(v1)
    x2, y2 = project(v2)
    dx, dy = x2 - x1, y2 - y1
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return haversine_m(point, v1)
    t = ((px - x1) * dx + (py - y1) * dy) / length_sq
    t = min(1.0, max(0.0, t))
    foot = LatLon(
        lat=v1.lat + t * (v2.lat - v1.lat),
        lon=v1.lon + t * (v2.lon - v1.lon),
    )
    return haversine_m(point, foot)


def polyline_distance_m(point: LatLon, polyline: Sequence[LatLon]) -> float:
    """Minimum distance from a point to a polyline, meters."""
    if len(polyline) < 2:
        raise ValueError("polyline needs at least two vertices")
    return min(
        point_leg_distance_m(point, polyline[i], polyline[i + 1])
        for i in range(len(polyline) - 1)
    )


@dataclass(frozen=True)
class FreewaySegment:
    """A named freeway polyline feature."""

    route_id: str
    polyline: tuple[LatLon, ...]
    display_names: tuple[str, ...] = ()
    always_freeway: bool = False

    def __post_init__(self):
        if len(self.polyline) < 2:
            raise DataError(f"segment {self.route_id}: fewer than 2 vertices")
        for a, b in zip(self.polyline, self.polyline[1:]):
            if a == b:
                raise DataError(f"segment {self.route_id}: repeated consecutive vertex {a}")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lats = [v.lat for v in self.polyline]
        lons = [v.lon for v in self.polyline]
        return min(lats), min(lons), max(lats), max(lons)


# --- road-name normalization and route patterns ---------------------------

_DIRECTIONAL_TOKENS = frozenset(
    "N S E W NB SB EB WB NORTHBOUND SOUTHBOUND EASTBOUND WESTBOUND "
    "NORTH SOUTH EAST WEST".split()
)

# Route-number recognition: each pattern maps a normalized name to a
# canonical route key.  Order matters (interstate and US forms before the
# generic state-prefix form).  Replaceable per index for other regions.
DEFAULT_ROUTE_PATTERNS: tuple[tuple[str, str], ...] = (
    (r"^(?:I|IH|INTERSTATE)\s*0*(\d+)$", "I-{0}"),
    (r"^(?:US|U\s*S|US\s*HWY|US\s*HIGHWAY|US\s*ROUTE|US\s*RTE)\s*0*(\d+)$", "US-{0}"),
    (r"^(?:LOOP|LP)\s*0*(\d+)$", "LOOP-{0}"),
    (
        r"^(?:SR|SH|STATE\s*ROUTE|STATE\s*RTE|STATE\s*HWY|STATE\s*HIGHWAY|"
        r"ROUTE|RTE|HWY|HIGHWAY|[A-Z]{2})\s*0*(\d+)$",
        "SR-{0}",
    ),
)


def normalize_road_name(name: str) -> str:
    """Uppercase, fold punctuation to spaces, and strip trailing
    directional suffixes ("I-280 N/B" -> "I 280")."""
    text = name.upper()
    text = re.sub(r"([NSEW])\s*/\s*B\b", r"\1B", text)  # N/B -> NB
    text = re.sub(r"[^A-Z0-9]+", " ", text).strip()
    tokens = text.split()
    while tokens and tokens[-1] in _DIRECTIONAL_TOKENS and len(tokens) > 1:
        tokens.pop()
    return " ".join(tokens)


class MatchKind(Enum):
    NON_FREEWAY = "NonFreeway"
    ALWAYS_FREEWAY = "AlwaysFreeway"
    AMBIGUOUS = "Ambiguous"


@dataclass(frozen=True)
class NameMatch:
    kind: MatchKind
    route_id: Optional[str] = None


class Provenance(Enum):
    BY_NAME_ALWAYS = "ByNameAlways"
    BY_PROXIMITY = "ByProximity"
    BY_NAME_NON_FREEWAY = "ByNameNonFreeway"
    UNRESOLVABLE = "Unresolvable"


@dataclass(frozen=True)
class RoadClassification:
    road_class: RoadClass
    provenance: Provenance
    route_id: Optional[str] = None
    distance_m: Optional[float] = None


# --- spatial grid over segment bounding boxes ------------------------------


class _SegmentGrid:
    """Uniform lat/lon grid of segment bounding boxes.

    Queries return a superset of every segment having any point within
    the given distance of the query point: latitude padding uses the
    exact meridian bound (distance >= R * |dlat|) and longitude padding
    a conservative pi/2 factor on the parallel bound, so no true
    neighbor is ever pruned.
    """

    def __init__(self, segments: Sequence[FreewaySegment], cell_deg: float = 0.02):
        self.cell_deg = cell_deg
        self.cells: dict[tuple[int, int], list[int]] = {}
        for idx, seg in enumerate(segments):
            lat_lo, lon_lo, lat_hi, lon_hi = seg.bbox
            for ci in range(self._c(lat_lo), self._c(lat_hi) + 1):
                for cj in range(self._c(lon_lo), self._c(lon_hi) + 1):
                    self.cells.setdefault((ci, cj), []).append(idx)

    def _c(self, deg: float) -> int:
        return math.floor(deg / self.cell_deg)

    def query(self, point: LatLon, radius_m: float) -> set[int]:
        lat_pad = radius_m / METERS_PER_DEG
        lat_reach = min(89.99, abs(point.lat) + lat_pad)
        cos_bound = max(math.cos(math.radians(lat_reach)), 1e-6)
        lon_pad = radius_m / (METERS_PER_DEG * cos_bound) * (math.pi / 2.0) + 1e-9
        found: set[int] = set()
        for ci in range(self._c(point.lat - lat_pad), self._c(point.lat + lat_pad) + 1):
            for cj in range(self._c(point.lon - lon_pad), self._c(point.lon + lon_pad) + 1):
                found.update(self.cells.get((ci, cj), ()))
        return found


class FreewaySegmentIndex:
    """Freeway polylines plus the machinery to query them: a name
    matcher (alias table + route-number patterns) and a spatial grid for
    proximity tests."""

    def __init__(
        self,
        segments: Iterable[FreewaySegment],
        aliases: Optional[dict[str, Sequence[str]]] = None,
        patterns: tuple[tuple[str, str], ...] = DEFAULT_ROUTE_PATTERNS,
        cell_deg: float = 0.02,
    ):
        self.segments: tuple[FreewaySegment, ...] = tuple(segments)
        self._patterns = [(re.compile(rx), tpl) for rx, tpl in patterns]

        self._route_segments: dict[str, list[int]] = {}
        for idx, seg in enumerate(self.segments):
            self._route_segments.setdefault(seg.route_id, []).append(idx)
        # A route is always-freeway only if every one of its features is.
        self._route_always = {
            rid: all(self.segments[i].always_freeway for i in idxs)
            for rid, idxs in self._route_segments.items()
        }

        self._canonical: dict[str, str] = {}
        for rid in self._route_segments:
            key = self._canonical_key(normalize_road_name(rid))
            if key is None:
                key = normalize_road_name(rid)
            self._register_canonical(key, rid)

        self._aliases: dict[str, str] = {}
        for seg in self.segments:
            for name in seg.display_names:
                self._register_alias(name, seg.route_id)
        for rid, names in (aliases or {}).items():
            if rid not in self._route_segments:
                raise ConfigError(f"alias table references unknown route {rid!r}")
            for name in names:
                self._register_alias(name, rid)

        self._grid = _SegmentGrid(self.segments, cell_deg=cell_deg)
        if self.segments:
            lat_lo = min(s.bbox[0] for s in self.segments)
            lat_hi = max(s.bbox[2] for s in self.segments)
            lon_lo = min(s.bbox[1] for s in self.segments)
            lon_hi = max(s.bbox[3] for s in self.segments)
            span_deg = max(lat_hi - lat_lo, lon_hi - lon_lo, 1.0)
            self._cover_radius_m = 4.0 * span_deg * METERS_PER_DEG
        else:
            self._cover_radius_m = 0.0

    def _register_canonical(self, key: str, route_id: str) -> None:
        existing = self._canonical.get(key)
        if existing is not None and existing != route_id:
            raise ConfigError(f"routes {existing!r} and {route_id!r} collide on key {key!r}")
        self._canonical[key] = route_id

    def _register_alias(self, name: str, route_id: str) -> None:
        norm = normalize_road_name(name)
        if not norm:
            return
        existing = self._aliases.get(norm)
        if existing is not None and existing != route_id:
            raise ConfigError(
                f"alias {name!r} resolves to both {existing!r} and {route_id!r}"
            )
        self._aliases[norm] = route_id

    def _canonical_key(self, normalized: str) -> Optional[str]:
        for rx, template in self._patterns:
            m = rx.match(normalized)
            if m:
                return template.format(*m.groups())
        return None

    @property
    def route_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._route_segments))

    def match_road_name(self, name: str) -> NameMatch:
        """Resolve a free-text road name to a freeway route, if any.

        Alias table first, then route-number patterns; anything
        unmatched is a non-freeway name.
        """
        norm = normalize_road_name(name or "")
        if not norm:
            return NameMatch(MatchKind.NON_FREEWAY)
        route_id = self._aliases.get(norm)
        if route_id is None:
            key = self._canonical_key(norm)
            if key is not None:
                route_id = self._canonical.get(key)
        if route_id is None:
            return NameMatch(MatchKind.NON_FREEWAY)
        if self._route_always[route_id]:
            return NameMatch(MatchKind.ALWAYS_FREEWAY, route_id)
        return NameMatch(MatchKind.AMBIGUOUS, route_id)

    def distance_to_nearest(
        self, point: LatLon, route_id: Optional[str] = None
    ) -> float:
        """Minimum distance from the point to any segment (optionally
        restricted to one route), meters.  Exact: equals the exhaustive
        minimum over the same segments."""
        if route_id is None:
            allowed = range(len(self.segments))
        else:
            allowed = self._route_segments.get(route_id, [])
        allowed = set(allowed)
        if not allowed:
            raise NoSegmentsError(
                f"no segments for route {route_id!r}" if route_id else "empty index"
            )

        radius = max(4.0 * DEFAULT_PROXIMITY_THRESHOLD_M, 1000.0)
        candidates: set[int] = set()
        while True:
            candidates = self._grid.query(point, radius) & allowed
            if candidates:
                break
            radius *= 4.0
            if radius > self._cover_radius_m:
                candidates = allowed
                break
        best = min(self._segment_distance(point, i) for i in candidates)
        if best > radius and candidates is not allowed:
            # The nearest candidate lies beyond the query box; re-query at
            # that distance so no closer segment outside the box is missed.
            candidates = self._grid.query(point, best) & allowed or allowed
            best = min(self._segment_distance(point, i) for i in candidates)
        return best

    def _segment_distance(self, point: LatLon, idx: int) -> float:
        return polyline_distance_m(point, self.segments[idx].polyline)


def distance_to_nearest_freeway(
    point: LatLon, index: FreewaySegmentIndex, route_id: Optional[str] = None
) -> float:
    return index.distance_to_nearest(point, route_id=route_id)


def classify_road(
    record: CrashRecord,
    index: FreewaySegmentIndex,
    threshold_m: float = DEFAULT_PROXIMITY_THRESHOLD_M,
    any_route: bool = False,
) -> RoadClassification:
    """Classify one crash as freeway or surface street.

    Non-freeway names classify immediately, as do names of routes that
    are freeway everywhere.  An ambiguous name needs coordinates: the
    crash is on the freeway iff it lies within threshold_m (inclusive)
    of the matched route's polylines (or of any freeway, with
    any_route).  Ambiguous names without coordinates fall to surface
    street, tagged unresolvable so the bucket can be quantified.
    """
    match = index.match_road_name(record.primary_road_name)
    if match.kind is MatchKind.NON_FREEWAY:
        return RoadClassification(RoadClass.SURFACE_STREET, Provenance.BY_NAME_NON_FREEWAY)
    if match.kind is MatchKind.ALWAYS_FREEWAY:
        return RoadClassification(
            RoadClass.FREEWAY, Provenance.BY_NAME_ALWAYS, route_id=match.route_id
        )
    if record.location is None:
        return RoadClassification(
            RoadClass.SURFACE_STREET, Provenance.UNRESOLVABLE, route_id=match.route_id
        )
    distance = index.distance_to_nearest(
        record.location, route_id=None if any_route else match.route_id
    )
    road = RoadClass.FREEWAY if distance <= threshold_m else RoadClass.SURFACE_STREET
    return RoadClassification(
        road, Provenance.BY_PROXIMITY, route_id=match.route_id, distance_m=distance
    )


# --- input files ------------------------------------------------------------


def load_segments_geojson(path: str | Path) -> list[FreewaySegment]:
    """Read freeway segments from a GeoJSON FeatureCollection of
    LineStrings with properties route_id, names[], always_freeway.
    GeoJSON coordinate order is (lon, lat)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    features = doc.get("features")
    if features is None:
        raise ConfigError(f"{path}: not a FeatureCollection")
    segments = []
    for feature in features:
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise ConfigError(f"{path}: only LineString features are supported")
        props = feature.get("properties") or {}
        route_id = props.get("route_id")
        if not route_id:
            raise ConfigError(f"{path}: feature missing route_id")
        polyline = tuple(LatLon(lat=c[1], lon=c[0]) for c in geom.get("coordinates", ()))
        segments.append(
            FreewaySegment(
                route_id=str(route_id),
                polyline=polyline,
                display_names=tuple(props.get("names", ()) or ()),
                always_freeway=bool(props.get("always_freeway", False)),
            )
        )
    return segments


def load_alias_table(path: str | Path) -> dict[str, list[str]]:
    """Read the route alias table: an [aliases] section mapping
    route_id -> comma-separated local names."""
    parser = ConfigParser()
    parser.optionxform = str  # route ids are case-sensitive keys
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"alias table not found: {path}")
    if not parser.has_section("aliases"):
        raise ConfigError(f"{path}: missing [aliases] section")
    return {
        route_id: [alias.strip() for alias in raw.split(",") if alias.strip()]
        for route_id, raw in parser.items("aliases")
    }
