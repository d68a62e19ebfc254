"""Parse delimited crash and VMT sources into canonical records.

Crash, vehicle, and person tables are joined by crash id.  Parsing is
deterministic: identical source bytes and config yield the identical
record list and report, and record order follows crash-row input order.
Rows are never silently dropped; every skip lands in the ingest report,
and rows read always equals records emitted plus rows skipped.

Records missing coordinates can be filled by a pluggable geocoder
client.  Only stub and file-cache (replay) clients ship here; a live
client is the caller's concern and is exercised through the same
interface.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Protocol, Union

from .mapping import (
    CRASH_REQUIRED,
    MappingConfig,
    VMT_REQUIRED,
    parse_bool_token,
    parse_enum_token,
)
from .model import (
    COMPASS_OCTANTS,
    CrashBenchError,
    CrashRecord,
    DataError,
    FunctionalClass,
    JunctionRelation,
    KabcoLevel,
    LatLon,
    MannerOfCollision,
    PassengerShareTable,
    VehicleClass,
    VehicleUnit,
    VmtRecord,
    VRU_CLASSES,
    build_event_sequence,
    worst_injury,
)

RowSource = Union[str, Path, io.TextIOBase, Iterable[str]]


class InconsistentVmtError(DataError):
    """Freeway VMT exceeds (or exhausts) the all-roads total."""


@dataclass
class SkippedRow:
    table: str
    row_number: int  # 1-based, excluding the header
    reason: str


@dataclass
class IngestReport:
    """Accounting for one load: row counts, skips, and degradations."""

    source: str
    rows_read: dict[str, int] = field(default_factory=dict)
    records_emitted: int = 0
    skipped: list[SkippedRow] = field(default_factory=list)
    unknown_counts: dict[str, int] = field(default_factory=dict)
    missing_location: int = 0

    def count_unknown(self, fname: str) -> None:
        self.unknown_counts[fname] = self.unknown_counts.get(fname, 0) + 1

    def skip(self, table: str, row_number: int, reason: str) -> None:
        self.skipped.append(SkippedRow(table, row_number, reason))

    def conserves_rows(self, table: str = "crash") -> bool:
        skipped = sum(1 for s in self.skipped if s.table == table)
        return self.rows_read.get(table, 0) == self.records_emitted + skipped


def _open_rows(source: RowSource, delimiter: str) -> Iterator[dict[str, str]]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            yield from csv.DictReader(fh, delimiter=delimiter)
    else:
        yield from csv.DictReader(source, delimiter=delimiter)


def _header_of(source: RowSource, delimiter: str) -> list[str]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            return next(reader, [])
    reader = csv.reader(source, delimiter=delimiter)
    return next(reader, [])


def _check_header(
    table: str,
    source: RowSource,
    config: MappingConfig,
    required_fields: tuple[str, ...],
    prefix: str = "",
) -> list[str]:
    """Hard-error when the header is unreadable or lacks a column bound
    to a required field.  Columns bound to optional fields may be absent
    (those fields simply come out empty)."""
    header = _header_of(source, config.delimiter)
    if not header:
        raise DataError(f"{config.name}/{table}: empty or malformed header")
    present = set(header)
    for fname in required_fields:
        binding = config.columns.get(fname)
        if binding is None:
            continue  # validate() already guarantees required bindings
        if hasattr(binding, "name") and binding.name not in present:
            raise DataError(
                f"{config.name}/{table}: header missing column {binding.name!r} "
                f"(bound to {fname})"
            )
    return header


def _materialize(source: RowSource) -> RowSource:
    """File paths can be re-opened; streams must be buffered to allow
    the header check plus the real parse."""
    if isinstance(source, (str, Path)):
        return source
    return list(source)


def _float_or_none(raw: Optional[str]) -> Optional[float]:
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        return None


def _int_or_none(raw: Optional[str]) -> Optional[int]:
    if raw is None or raw == "":
        return None
    try:
        return int(float(raw))
    except ValueError:
        return None


def _parse_unit(
    row: Mapping[str, str], config: MappingConfig, report: IngestReport
) -> Optional[VehicleUnit]:
    unit_id_raw, _ = config.resolve("unit.unit_id", row)
    unit_id = _int_or_none(unit_id_raw)
    if unit_id is None:
        return None

    class_token, was_unknown = config.resolve("unit.vehicle_class", row)
    if class_token is None:
        vehicle_class = VehicleClass.UNKNOWN
        report.count_unknown("unit.vehicle_class")
    else:
        vehicle_class = parse_enum_token("unit.vehicle_class", class_token)
        if was_unknown or vehicle_class is VehicleClass.UNKNOWN:
            report.count_unknown("unit.vehicle_class")

    transport_token, was_unknown = config.resolve("unit.in_transport", row)
    in_transport = parse_bool_token(transport_token) if transport_token else None
    if in_transport is None:
        if "unit.in_transport" in config.columns or "unit.in_transport" in config.derives:
            report.count_unknown("unit.in_transport")
        in_transport = False  # conservative: unknown transport status is excluded
    if vehicle_class in VRU_CLASSES:
        in_transport = False  # non-motorists are never in-transport vehicles

    airbag_token, _ = config.resolve("unit.airbag", row)
    airbag = parse_bool_token(airbag_token) if airbag_token else None

    direction_token, _ = config.resolve("unit.travel_direction", row)
    direction = (
        direction_token.upper()
        if direction_token and direction_token.upper() in COMPASS_OCTANTS
        else None
    )

    maneuver_token, _ = config.resolve("unit.maneuver", row)
    event_raw, _ = config.resolve("unit.first_contact_event", row)

    return VehicleUnit(
        unit_id=unit_id,
        vehicle_class=vehicle_class,
        in_transport=in_transport,
        airbag_deployed=airbag,
        maneuver=maneuver_token or "",
        travel_direction=direction,
        first_contact_event_index=_int_or_none(event_raw),
    )


def load_crash_table(
    crash_source: RowSource,
    config: MappingConfig,
    units_source: Optional[RowSource] = None,
    persons_source: Optional[RowSource] = None,
) -> tuple[list[CrashRecord], IngestReport]:
    """Join crash, vehicle, and person tables into CrashRecords.

    One record per crash row; vehicle and person rows attach by the
    crash key.  A crash row lacking its key or year is skipped and
    reported.  Field-level junk degrades instead: unmapped codes go to
    Unknown, an unparseable coordinate leaves the location absent (to be
    geocoded), both counted in the report.
    """
    config.validate(CRASH_REQUIRED)
    report = IngestReport(source=config.name)

    crash_source = _materialize(crash_source)
    _check_header("crash", crash_source, config, CRASH_REQUIRED)

    units_by_crash: dict[str, list[VehicleUnit]] = {}
    if units_source is not None:
        units_source = _materialize(units_source)
        _check_header("unit", units_source, config, ("unit.crash_id", "unit.unit_id"))
        for number, row in enumerate(_open_rows(units_source, config.delimiter), start=1):
            report.rows_read["unit"] = report.rows_read.get("unit", 0) + 1
            key_raw, _ = config.resolve("unit.crash_id", row)
            unit = _parse_unit(row, config, report) if key_raw else None
            if key_raw is None or unit is None:
                report.skip("unit", number, "missing crash or unit key")
                continue
            units_by_crash.setdefault(key_raw, []).append(unit)

    injuries_by_crash: dict[str, list[KabcoLevel]] = {}
    airbags_by_unit: dict[tuple[str, int], list[bool]] = {}
    if persons_source is not None:
        persons_source = _materialize(persons_source)
        _check_header("person", persons_source, config, ("person.crash_id",))
        for number, row in enumerate(_open_rows(persons_source, config.delimiter), start=1):
            report.rows_read["person"] = report.rows_read.get("person", 0) + 1
            key_raw, _ = config.resolve("person.crash_id", row)
            if key_raw is None:
                report.skip("person", number, "missing crash key")
                continue
            injury_token, was_unknown = config.resolve("person.injury", row)
            if injury_token is not None:
                level = parse_enum_token("person.injury", injury_token)
                if was_unknown or level is KabcoLevel.UNKNOWN:
                    report.count_unknown("person.injury")
                injuries_by_crash.setdefault(key_raw, []).append(level)
            airbag_token, _ = config.resolve("person.airbag", row)
            unit_raw, _ = config.resolve("person.unit_id", row)
            unit_id = _int_or_none(unit_raw)
            airbag = parse_bool_token(airbag_token) if airbag_token else None
            if unit_id is not None and airbag is not None:
                airbags_by_unit.setdefault((key_raw, unit_id), []).append(airbag)

    records: list[CrashRecord] = []
    for number, row in enumerate(_open_rows(crash_source, config.delimiter), start=1):
        report.rows_read["crash"] = report.rows_read.get("crash", 0) + 1

        crash_id, _ = config.resolve("crash_id", row)
        if crash_id is None:
            report.skip("crash", number, "missing crash_id")
            continue
        year_raw, _ = config.resolve("year", row)
        year = _int_or_none(year_raw)
        if year is None:
            report.skip("crash", number, f"unparseable year {year_raw!r}")
            continue
        state, _ = config.resolve("state", row)
        county, _ = config.resolve("county", row)
        if not state or not county:
            report.skip("crash", number, "missing state or county")
            continue

        lat = _float_or_none(config.resolve("latitude", row)[0])
        lon = _float_or_none(config.resolve("longitude", row)[0])
        location = LatLon(lat, lon) if lat is not None and lon is not None else None
        if location is None:
            report.missing_location += 1

        units = list(units_by_crash.get(crash_id, ()))
        units.sort(key=lambda u: u.unit_id)
        units = [
            replace(
                unit,
                airbag_deployed=(
                    unit.airbag_deployed
                    if unit.airbag_deployed is not None
                    else _fold_airbags(airbags_by_unit.get((crash_id, unit.unit_id)))
                ),
            )
            for unit in units
        ]

        person_injuries = injuries_by_crash.get(crash_id)
        if person_injuries:
            worst = worst_injury(person_injuries)
        else:
            injury_token, was_unknown = config.resolve("worst_injury", row)
            if injury_token is None:
                worst = KabcoLevel.UNKNOWN
                report.count_unknown("worst_injury")
            else:
                worst = parse_enum_token("worst_injury", injury_token)
                if was_unknown or worst is KabcoLevel.UNKNOWN:
                    report.count_unknown("worst_injury")

        junction_token, was_unknown = config.resolve("junction_relation", row)
        junction = (
            parse_enum_token("junction_relation", junction_token)
            if junction_token
            else None
        )
        if junction is None:
            junction = JunctionRelation.UNKNOWN
            report.count_unknown("junction_relation")
        elif was_unknown:
            report.count_unknown("junction_relation")

        manner_token, was_unknown = config.resolve("manner_of_collision", row)
        manner = (
            parse_enum_token("manner_of_collision", manner_token)
            if manner_token
            else None
        )
        if manner is None:
            manner = MannerOfCollision.UNKNOWN
            report.count_unknown("manner_of_collision")
        elif was_unknown:
            report.count_unknown("manner_of_collision")

        primary, _ = config.resolve("primary_road", row)
        secondary, _ = config.resolve("secondary_road", row)

        records.append(
            CrashRecord(
                crash_id=crash_id,
                state=state.strip().upper(),
                county=county.strip().upper(),
                year=year,
                worst_injury=worst,
                location=location,
                primary_road_name=primary or "",
                secondary_road_name=secondary,
                units=tuple(units),
                event_sequence=build_event_sequence(units),
                junction_relation=junction,
                manner_of_collision=manner,
            )
        )
        report.records_emitted += 1

    return records, report


def _fold_airbags(values: Optional[list[bool]]) -> Optional[bool]:
    if not values:
        return None
    return True if any(values) else False


# --- geocoding ----------------------------------------------------------------


class GeocodeTransportError(CrashBenchError):
    """The geocoding backend failed in a retryable way."""


@dataclass(frozen=True)
class GeocodeRequest:
    state: str
    locator: str  # city or county locator
    primary_road: str
    secondary_road: str = ""

    def key(self) -> str:
        parts = (self.state, self.locator, self.primary_road, self.secondary_road)
        return "|".join(" ".join(p.upper().split()) for p in parts)


class GeocoderClient(Protocol):
    def locate(self, request: GeocodeRequest) -> Optional[LatLon]: ...


class StubGeocoder:
    """Fixed-answer client for tests and offline runs."""

    def __init__(self, answers: Mapping[str, LatLon] | Mapping[GeocodeRequest, LatLon]):
        self._answers: dict[str, LatLon] = {}
        for key, value in answers.items():
            if isinstance(key, GeocodeRequest):
                key = key.key()
            self._answers[key] = LatLon(*value)

    def locate(self, request: GeocodeRequest) -> Optional[LatLon]:
        return self._answers.get(request.key())


class FileCachedGeocoder:
    """Append-only file cache in front of an optional inner client.

    With no inner client this is replay mode: only previously cached
    requests resolve, which keeps runs deterministic and offline.
    Cache lines are 'key<TAB>lat<TAB>lon'.
    """

    def __init__(self, path: str | Path, inner: Optional[GeocoderClient] = None):
        self.path = Path(path)
        self.inner = inner
        self._cache: dict[str, LatLon] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    key, lat, lon = line.split("\t")
                    self._cache[key] = LatLon(float(lat), float(lon))

    def locate(self, request: GeocodeRequest) -> Optional[LatLon]:
        key = request.key()
        if key in self._cache:
            return self._cache[key]
        if self.inner is None:
            return None
        result = self.inner.locate(request)
        if result is not None:
            self._cache[key] = result
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(f"{key}\t{result.lat!r}\t{result.lon!r}\n")
        return result


@dataclass
class GeocodeReport:
    resolved: int = 0
    unresolved: int = 0
    failed: list[tuple[str, str]] = field(default_factory=list)  # (crash_id, error)


def geocode_missing(
    records: Iterable[CrashRecord], client: GeocoderClient
) -> tuple[list[CrashRecord], GeocodeReport]:
    """Fill locations for records that lack them.

    Records with a location pass through untouched.  A client transport
    failure is recorded against the record and the run continues;
    unresolved records stay location-absent and are counted.
    """
    report = GeocodeReport()
    out: list[CrashRecord] = []
    for record in records:
        if record.location is not None:
            out.append(record)
            continue
        request = GeocodeRequest(
            state=record.state,
            locator=record.county,
            primary_road=record.primary_road_name,
            secondary_road=record.secondary_road_name or "",
        )
        try:
            located = client.locate(request)
        except GeocodeTransportError as exc:
            report.failed.append((record.crash_id, str(exc)))
            report.unresolved += 1
            out.append(record)
            continue
        if located is None:
            report.unresolved += 1
            out.append(record)
        else:
            report.resolved += 1
            out.append(replace(record, location=LatLon(*located)))
    return out, report


# --- VMT and share tables -------------------------------------------------------


def load_vmt_table(
    source: RowSource,
    config: MappingConfig,
    sidecar_source: Optional[RowSource] = None,
    sidecar_config: Optional[MappingConfig] = None,
) -> list[VmtRecord]:
    """Parse a VMT table, optionally merging a freeway-only sidecar.

    Sources that report only all-roads totals get SurfaceStreet rows
    derived per county-year as AllRoads minus Freeway; a non-positive
    difference (or freeway exceeding the total) is a hard
    InconsistentVmtError.  Unlike crash rows, a malformed VMT row is a
    hard error: exposure tables are small and authoritative.
    """
    records = _parse_vmt_rows(source, config)
    if sidecar_source is not None:
        records.extend(_parse_vmt_rows(sidecar_source, sidecar_config or config))
    return derive_surface_street_vmt(records)


def _parse_vmt_rows(source: RowSource, config: MappingConfig) -> list[VmtRecord]:
    config.validate(VMT_REQUIRED)
    source = _materialize(source)
    _check_header("vmt", source, config, VMT_REQUIRED)
    records = []
    for number, row in enumerate(_open_rows(source, config.delimiter), start=1):
        class_token, _ = config.resolve("functional_class", row)
        state, _ = config.resolve("state", row)
        county, _ = config.resolve("county", row)
        year = _int_or_none(config.resolve("year", row)[0])
        miles = _float_or_none(config.resolve("vmt_miles", row)[0])
        if not state or not county or year is None or miles is None or not class_token:
            raise DataError(f"{config.name}/vmt row {number}: incomplete row")
        try:
            fclass = FunctionalClass(class_token)
        except ValueError:
            raise DataError(
                f"{config.name}/vmt row {number}: unknown functional class "
                f"{class_token!r}"
            ) from None
        records.append(
            VmtRecord(
                state=state,
                county=county,
                functional_class=fclass,
                year=year,
                vmt_miles=miles * config.vmt_scale,
            )
        )
    return records


def derive_surface_street_vmt(records: list[VmtRecord]) -> list[VmtRecord]:
    """Emit SurfaceStreet = AllRoads - Freeway where only totals exist."""
    by_key: dict[tuple[str, str, int], dict[FunctionalClass, VmtRecord]] = {}
    for rec in records:
        by_key.setdefault((rec.state, rec.county, rec.year), {})[rec.functional_class] = rec
    out = list(records)
    for (state, county, year), classes in sorted(by_key.items()):
        total = classes.get(FunctionalClass.ALL_ROADS)
        freeway = classes.get(FunctionalClass.FREEWAY)
        if total is None or freeway is None:
            continue
        if freeway.vmt_miles >= total.vmt_miles:
            raise InconsistentVmtError(
                f"{state}/{county}/{year}: freeway VMT {freeway.vmt_miles} "
                f">= all-roads VMT {total.vmt_miles}"
            )
        if FunctionalClass.SURFACE_STREET in classes:
            continue
        out.append(
            VmtRecord(
                state=state,
                county=county,
                functional_class=FunctionalClass.SURFACE_STREET,
                year=year,
                vmt_miles=total.vmt_miles - freeway.vmt_miles,
            )
        )
    return out


def load_share_table(path: str | Path) -> PassengerShareTable:
    """Read the passenger-VMT share table: delimited text with columns
    state, functional_class, urban, share."""
    shares: dict[tuple[str, FunctionalClass, bool], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            fclass = parse_enum_token("functional_class", row["functional_class"].strip())
            urban = row["urban"].strip().lower() in ("true", "1", "yes", "urban")
            shares[(row["state"].strip(), fclass, urban)] = float(row["share"])
    return PassengerShareTable(shares)
