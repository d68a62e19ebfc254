import random

import pytest

from crashbench.model import (
    ConfigError,
    CrashRecord,
    DataError,
    FunctionalClass,
    GeoArea,
    KabcoLevel,
    LatLon,
    MissingShareError,
    PassengerShareTable,
    VehicleClass,
    VehicleUnit,
    VmtRecord,
    build_event_sequence,
    validate_record,
    worst_injury,
)


def make_record(**overrides) -> CrashRecord:
    base = dict(
        crash_id="X1",
        state="TX",
        county="TRAVIS",
        year=2023,
        worst_injury=KabcoLevel.O,
        location=LatLon(30.3, -97.7),
        primary_road_name="MAIN ST",
        units=(VehicleUnit(unit_id=1, vehicle_class=VehicleClass.PASSENGER, in_transport=True),),
    )
    base.update(overrides)
    return CrashRecord(**base)


class TestKabco:
    def test_severity_order(self):
        ranks = [KabcoLevel.K, KabcoLevel.A, KabcoLevel.B, KabcoLevel.C, KabcoLevel.O]
        values = [level.severity_rank for level in ranks]
        assert values == sorted(values, reverse=True)
        assert KabcoLevel.UNKNOWN.severity_rank is None

    def test_worst_injury_reduction(self):
        levels = [KabcoLevel.C, KabcoLevel.K, KabcoLevel.O, KabcoLevel.B]
        assert worst_injury(levels) is KabcoLevel.K

    def test_worst_injury_order_independent_and_idempotent(self):
        rng = random.Random(7)
        levels = [rng.choice(list(KabcoLevel)) for _ in range(30)]
        baseline = worst_injury(levels)
        for _ in range(20):
            rng.shuffle(levels)
            assert worst_injury(levels) is baseline
        assert worst_injury([baseline]) is baseline

    def test_unknown_never_compares(self):
        assert worst_injury([KabcoLevel.UNKNOWN, KabcoLevel.C]) is KabcoLevel.C
        assert worst_injury([KabcoLevel.UNKNOWN]) is KabcoLevel.UNKNOWN
        assert worst_injury([]) is KabcoLevel.UNKNOWN


class TestValidateRecord:
    def test_valid_record_has_no_violations(self):
        assert validate_record(make_record()) == []

    def test_latitude_out_of_range(self):
        record = make_record(location=LatLon(91.0, -97.7))
        rules = [v.rule for v in validate_record(record)]
        assert rules == ["LatitudeOutOfRange"]

    def test_longitude_out_of_range(self):
        record = make_record(location=LatLon(30.0, -200.0))
        assert [v.rule for v in validate_record(record)] == ["LongitudeOutOfRange"]

    def test_no_units(self):
        record = make_record(units=())
        assert [v.rule for v in validate_record(record)] == ["NoUnits"]

    def test_vru_in_transport_flagged(self):
        unit = VehicleUnit(unit_id=1, vehicle_class=VehicleClass.PEDESTRIAN, in_transport=True)
        record = make_record(units=(unit,))
        assert "VruInTransport" in [v.rule for v in validate_record(record)]

    def test_duplicate_unit_ids_flagged(self):
        units = (
            VehicleUnit(unit_id=1, vehicle_class=VehicleClass.PASSENGER, in_transport=True),
            VehicleUnit(unit_id=1, vehicle_class=VehicleClass.PASSENGER, in_transport=True),
        )
        assert "DuplicateUnitId" in [v.rule for v in validate_record(make_record(units=units))]

    def test_bad_event_index_flagged(self):
        unit = VehicleUnit(unit_id=1, first_contact_event_index=0)
        assert "BadEventIndex" in [v.rule for v in validate_record(make_record(units=(unit,)))]

    def test_violations_name_field_and_rule(self):
        violation = validate_record(make_record(units=()))[0]
        assert violation.field == "units"
        assert "NoUnits" in str(violation)


class TestGeoArea:
    def test_counties_required(self):
        with pytest.raises(ValueError):
            GeoArea("Nowhere", "TX", frozenset())

    def test_contains_normalizes_case(self):
        area = GeoArea("Austin", "tx", frozenset({"Travis"}))
        assert area.contains("TX", "travis")
        assert not area.contains("TX", "HAYS")
        assert not area.contains("CA", "TRAVIS")


class TestVmtAndShares:
    def test_vmt_must_be_positive(self):
        with pytest.raises(DataError):
            VmtRecord("TX", "TRAVIS", FunctionalClass.FREEWAY, 2023, 0.0)

    def test_share_lookup(self):
        table = PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 0.92})
        assert table.share_for("tx", FunctionalClass.FREEWAY, True) == 0.92

    def test_missing_share_raises(self):
        table = PassengerShareTable({})
        with pytest.raises(MissingShareError):
            table.share_for("TX", FunctionalClass.FREEWAY, True)

    def test_share_range_enforced(self):
        with pytest.raises(ConfigError):
            PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 1.5})
        with pytest.raises(ConfigError):
            PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 0.0})


def test_build_event_sequence_groups_and_orders():
    units = (
        VehicleUnit(unit_id=3, first_contact_event_index=2),
        VehicleUnit(unit_id=1, first_contact_event_index=1),
        VehicleUnit(unit_id=2, first_contact_event_index=1),
        VehicleUnit(unit_id=4, first_contact_event_index=None),
    )
    events = build_event_sequence(units)
    assert [e.index for e in events] == [1, 2]
    assert events[0].unit_ids == (1, 2)
    assert events[1].unit_ids == (3,)
