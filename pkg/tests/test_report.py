import json

from crashbench.model import GeoArea, RoadClass
from crashbench.rates import RateCell
from crashbench.report import (
    BenchmarkReport,
    METHODOLOGY_NOTES,
    NOTE_MILEAGE_SCALE,
    NOTE_PHOENIX_FATAL,
    emit_report,
    parse_rate_table,
)
from crashbench.taxonomy import CrashType, OutcomeLevel

ATLANTA = GeoArea("Atlanta", "GA", frozenset({"FULTON", "DEKALB", "CLAYTON"}))
AUSTIN = GeoArea("Austin", "TX", frozenset({"TRAVIS"}))


def sample_cells() -> list[RateCell]:
    return [
        RateCell(ATLANTA, RoadClass.FREEWAY, OutcomeLevel.POLICE_REPORTED, 57103.0, 10_180e6),
        RateCell(ATLANTA, RoadClass.FREEWAY, OutcomeLevel.FATAL, 140.0, 10_180e6),
        RateCell(AUSTIN, RoadClass.FREEWAY, OutcomeLevel.ANY_INJURY_REPORTED,
                 19.647058823529413, 1.84e9),
        RateCell(AUSTIN, RoadClass.FREEWAY, OutcomeLevel.POLICE_REPORTED, 20.930232558139537,
                 1.84e9, crash_type=CrashType.V2V_FRONT_TO_REAR),
    ]


def sample_report(cells=None) -> BenchmarkReport:
    return BenchmarkReport(
        metadata={"tool_version": "0.1.0", "config_digest": "abc", "input_digests": {}},
        cells=cells if cells is not None else sample_cells(),
        distributions=[
            (ATLANTA, RoadClass.FREEWAY, OutcomeLevel.POLICE_REPORTED,
             {CrashType.V2V_FRONT_TO_REAR: 0.5, CrashType.SINGLE_VEHICLE: 0.5})
        ],
        power_grid=[
            {
                "geo": "Atlanta",
                "road": "Freeway",
                "outcome": "PoliceReported",
                "effect_ratio": 0.75,
                "required_miles": 4323348.338954176,
                "expected_ads_crashes": 18.18,
                "target_power_miles": 20623436.022149596,
            }
        ],
        diagnostics={"records_outside_areas": 0},
    )


def read_all(paths) -> dict[str, bytes]:
    return {name: path.read_bytes() for name, path in paths.items()}


class TestEmission:
    def test_same_inputs_twice_identical_bytes(self, tmp_path):
        first = emit_report(sample_report(), tmp_path / "a", tag="2023")
        second = emit_report(sample_report(), tmp_path / "b", tag="2023")
        assert read_all(first) == read_all(second)

    def test_cell_order_does_not_matter(self, tmp_path):
        cells = sample_cells()
        first = emit_report(sample_report(cells), tmp_path / "a", tag="x")
        second = emit_report(sample_report(list(reversed(cells))), tmp_path / "b", tag="x")
        assert read_all(first) == read_all(second)

    def test_table5_style_display_cell(self, tmp_path):
        paths = emit_report(sample_report(), tmp_path, tag="2023")
        text = paths["rates"].read_text()
        assert "57103 (5.609)" in text

    def test_fatal_formats_scientific_below_threshold(self, tmp_path):
        cells = [RateCell(AUSTIN, RoadClass.FREEWAY, OutcomeLevel.FATAL, 1.0, 2e9)]
        paths = emit_report(sample_report(cells), tmp_path, tag="t")
        assert "(5.000e-04)" in paths["rates"].read_text()

    def test_empty_cells_header_only(self, tmp_path):
        report = BenchmarkReport(metadata={}, cells=[], distributions=[], power_grid=[])
        paths = emit_report(report, tmp_path, tag="e")
        rates = paths["rates"].read_text().splitlines()
        assert len(rates) == 1
        assert rates[0].startswith("geo,")

    def test_file_names_carry_tag(self, tmp_path):
        paths = emit_report(sample_report(), tmp_path, tag="2023")
        assert paths["rates"].name == "benchmark_rates_2023.csv"
        assert paths["report"].name == "report_2023.json"


class TestRoundTrip:
    def test_rate_table_round_trips_exactly(self, tmp_path):
        cells = sample_cells()
        paths = emit_report(sample_report(cells), tmp_path, tag="rt")
        recovered = parse_rate_table(paths["rates"]) + parse_rate_table(paths["typed_rates"])
        original = sorted(cells, key=lambda c: (c.geo.name, c.outcome.value,
                                                c.crash_type.value if c.crash_type else ""))
        recovered = sorted(recovered, key=lambda c: (c.geo.name, c.outcome.value,
                                                     c.crash_type.value if c.crash_type else ""))
        assert recovered == original  # exact: counts, VMT, geography, strata

    def test_fractional_counts_survive(self, tmp_path):
        fractional = RateCell(
            AUSTIN, RoadClass.SURFACE_STREET, OutcomeLevel.ANY_INJURY_REPORTED,
            15.705882352941176, 2.85e9,
        )
        paths = emit_report(sample_report([fractional]), tmp_path, tag="f")
        (cell,) = parse_rate_table(paths["rates"])
        assert cell.count == fractional.count
        assert cell.rate_ipmm == fractional.rate_ipmm


class TestMethodologyNotes:
    def test_notes_in_report_json(self, tmp_path):
        paths = emit_report(sample_report(), tmp_path, tag="n")
        doc = json.loads(paths["report"].read_text())
        assert NOTE_MILEAGE_SCALE in doc["methodology_notes"]
        assert NOTE_PHOENIX_FATAL in doc["methodology_notes"]

    def test_note_content_anchors(self):
        assert "4.77x" in NOTE_MILEAGE_SCALE
        assert "target_power_miles" in NOTE_MILEAGE_SCALE
        assert "21-75 million" in NOTE_MILEAGE_SCALE
        assert "5.4 per billion" in NOTE_PHOENIX_FATAL
        assert len(METHODOLOGY_NOTES) == 2
