import pytest

from remshare.controllers import SchemeConfig
from remshare.link import CqiTable, RateMapper
from remshare.propagation import PathlossModel
from remshare.scenario import (BsConfig, PlacementCounts, Rect, Scenario,
                               default_scenario)
from remshare.simcore import CampaignConfig


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def model(scenario):
    return PathlossModel.default(scenario.carrier_hz, scenario.polygon)


@pytest.fixture(scope="session")
def table():
    return CqiTable.load_default()


@pytest.fixture(scope="session")
def mapper(table):
    return RateMapper(table=table)


def square_scenario(side=10.0, origin=(10.0, 10.0)):
    """Small world with a square building, for geometry tests."""
    x0, y0 = origin
    building = ((x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side))
    return Scenario(
        area_width_m=40.0,
        area_height_m=40.0,
        building=building,
        outdoor_bs=(BsConfig(1, (5.0, 3.0, 10.0), 21.0, 0.0, "outdoor"),),
        indoor_bs=(BsConfig(2, (x0 + side / 2, y0 + side / 2, 3.0), 21.0, 0.0, "indoor"),),
        outdoor_region=Rect(0.0, 0.0, 40.0, 8.0),
    )


def fast_campaign(scenario, scheme="dynamic", *, iterations=1, horizon_ms=60,
                  seed=7, fading="awgn", indoor_enabled=True, counts=None, **scheme_kw):
    counts = counts or PlacementCounts(indoor_uniform=6, indoor_cluster=0, outdoor=4)
    return CampaignConfig(
        scenario=scenario,
        scheme=SchemeConfig(scheme=scheme, **scheme_kw),
        counts=counts,
        iterations=iterations,
        horizon_ms=horizon_ms,
        seed=seed,
        fading_mode=fading,
        indoor_enabled=indoor_enabled,
    )
