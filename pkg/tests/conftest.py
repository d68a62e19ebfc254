from pathlib import Path

import pytest

from crashbench.roadclass import (
    FreewaySegmentIndex,
    load_alias_table,
    load_segments_geojson,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def road_index() -> FreewaySegmentIndex:
    segments = load_segments_geojson(FIXTURES / "roadclass_segments.geojson")
    aliases = load_alias_table(FIXTURES / "roadclass_aliases.ini")
    return FreewaySegmentIndex(segments, aliases=aliases)
