import random

import pytest

from crashbench.cohort import (
    ImputationBasisMissingError,
    allocate_unknown,
    filter_in_transport_passenger,
    impute_unknown_vehicles,
    known_class_histogram,
    passenger_fraction,
    passenger_vmt,
)
from crashbench.model import (
    FunctionalClass,
    MissingShareError,
    PassengerShareTable,
    VehicleClass,
    VmtRecord,
)

from corpus import make_corpus
from test_model import make_record
from test_taxonomy import vehicle


class TestFilter:
    def test_parked_passenger_excluded(self):
        record = make_record(units=(vehicle(1, in_transport=False),))
        selection = filter_in_transport_passenger([record])[0]
        assert selection.passenger_units == ()
        assert selection.unknown_units == ()

    def test_in_transport_motorcycle_excluded(self):
        record = make_record(units=(vehicle(1, cls=VehicleClass.MOTORCYCLE),))
        selection = filter_in_transport_passenger([record])[0]
        assert selection.passenger_units == ()

    def test_in_transport_sedan_included(self):
        record = make_record(units=(vehicle(1),))
        selection = filter_in_transport_passenger([record])[0]
        assert [u.unit_id for u in selection.passenger_units] == [1]

    def test_unknown_class_separated(self):
        record = make_record(
            units=(vehicle(1), vehicle(2, cls=VehicleClass.UNKNOWN))
        )
        selection = filter_in_transport_passenger([record])[0]
        assert [u.unit_id for u in selection.passenger_units] == [1]
        assert [u.unit_id for u in selection.unknown_units] == [2]

    def test_order_invariant_totals(self):
        records = make_corpus(300, seed=3)
        forward = filter_in_transport_passenger(records)
        backward = filter_in_transport_passenger(list(reversed(records)))
        count = lambda sels: (
            sum(len(s.passenger_units) for s in sels),
            sum(len(s.unknown_units) for s in sels),
        )
        assert count(forward) == count(backward)


class TestImputation:
    def test_proportional_allocation(self):
        hist = {VehicleClass.PASSENGER: 90, VehicleClass.HEAVY_VEHICLE: 10}
        assert impute_unknown_vehicles(hist, 10) == pytest.approx(9.0)

    def test_zero_unknown_is_zero(self):
        assert impute_unknown_vehicles({}, 0) == 0.0
        assert impute_unknown_vehicles({VehicleClass.PASSENGER: 5}, 0) == 0.0

    def test_all_passenger_degenerate(self):
        assert impute_unknown_vehicles({VehicleClass.PASSENGER: 12}, 7) == pytest.approx(7.0)

    def test_empty_histogram_with_unknowns_raises(self):
        with pytest.raises(ImputationBasisMissingError):
            impute_unknown_vehicles({}, 3)

    def test_mass_conservation(self):
        rng = random.Random(99)
        classes = list(VehicleClass)[:5]
        for _ in range(50):
            hist = {cls: rng.randint(0, 40) for cls in classes}
            if sum(hist.values()) == 0:
                hist[VehicleClass.PASSENGER] = 1
            unknown = rng.randint(0, 25)
            allocation = allocate_unknown(hist, unknown)
            assert sum(allocation.values()) == pytest.approx(unknown, abs=1e-9)

    def test_final_counts_bounded(self):
        hist = {VehicleClass.PASSENGER: 30, VehicleClass.MOTORCYCLE: 10}
        known = hist[VehicleClass.PASSENGER]
        unknown = 8
        imputed = impute_unknown_vehicles(hist, unknown)
        assert known <= known + imputed <= known + unknown

    def test_histogram_counts_in_transport_known_only(self):
        record = make_record(
            units=(
                vehicle(1),
                vehicle(2, cls=VehicleClass.UNKNOWN),
                vehicle(3, cls=VehicleClass.HEAVY_VEHICLE, in_transport=False),
                vehicle(4, cls=VehicleClass.MOTORCYCLE),
            )
        )
        hist = known_class_histogram([record])
        assert hist == {VehicleClass.PASSENGER: 1, VehicleClass.MOTORCYCLE: 1}
        assert passenger_fraction(hist) == pytest.approx(0.5)


class TestPassengerVmt:
    def test_share_applied(self):
        vmt = VmtRecord("TX", "TRAVIS", FunctionalClass.FREEWAY, 2023, 1_000e6)
        shares = PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 0.92})
        assert passenger_vmt(vmt, shares) == pytest.approx(920e6)

    def test_share_of_one_is_identity(self):
        vmt = VmtRecord("TX", "TRAVIS", FunctionalClass.FREEWAY, 2023, 123.0)
        shares = PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 1.0})
        assert passenger_vmt(vmt, shares) == 123.0

    def test_missing_key_raises(self):
        vmt = VmtRecord("GA", "FULTON", FunctionalClass.FREEWAY, 2023, 10.0)
        shares = PassengerShareTable({("TX", FunctionalClass.FREEWAY, True): 0.9})
        with pytest.raises(MissingShareError):
            passenger_vmt(vmt, shares)
