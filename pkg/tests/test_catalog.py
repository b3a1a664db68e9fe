from __future__ import annotations

import pytest

from hearth.catalog import (
    ActionDef,
    Catalog,
    EnumDomain,
    IntRangeDomain,
    KindDef,
    PercentDomain,
    TimeOfDayDomain,
    default_catalog,
    parse_time_of_day,
)
from hearth.errors import CatalogError


def test_default_catalog_loads_expected_kinds():
    cat = default_catalog()
    assert {"lamp", "smart-plug", "contact-sensor", "temperature-sensor",
            "wall-switch", "domicube", "clock-service", "weather-service"} <= set(cat.kinds)
    lamp = cat.kind("lamp")
    assert set(lamp.actions) == {"switch-on", "switch-off", "blink", "set-color"}
    assert lamp.actions["switch-off"].effect == {"power": "off"}
    # YAML on/off must have survived as strings
    assert cat.kind("smart-plug").state_vars["power"].members == ("on", "off")
    assert cat.kind("smart-plug").actions["switch-off"].power_removing


def test_domicube_vocabulary():
    cube = default_catalog().kind("domicube")
    assert isinstance(cube.state_vars["face"], IntRangeDomain)
    assert (cube.state_vars["face"].lo, cube.state_vars["face"].hi) == (1, 6)
    assert isinstance(cube.state_vars["battery"], PercentDomain)
    assert cube.events["face-changed"].trigger_param == "face"


def test_effect_must_write_declared_vars():
    with pytest.raises(CatalogError, match="undeclared variable"):
        Catalog(
            {
                "thing": KindDef(
                    name="thing",
                    state_vars={},
                    actions={
                        "zap": ActionDef(name="zap", display="zap", effect={"ghost": 1})
                    },
                    events={},
                )
            }
        )


def test_state_changing_action_must_emit():
    with pytest.raises(CatalogError, match="emits no event"):
        Catalog(
            {
                "thing": KindDef(
                    name="thing",
                    state_vars={"x": IntRangeDomain(0, 5)},
                    actions={
                        "bump": ActionDef(name="bump", display="bump", effect={"x": 1})
                    },
                    events={},
                )
            }
        )


def test_validate_state_requires_complete_in_domain_values(catalog):
    catalog.validate_state("lamp", {"power": "on", "color": "red"})
    with pytest.raises(CatalogError):
        catalog.validate_state("lamp", {"power": "on"})  # color missing
    with pytest.raises(CatalogError):
        catalog.validate_state("lamp", {"power": "dim", "color": "red"})
    with pytest.raises(CatalogError):
        catalog.validate_state("lamp", {"power": "on", "color": "red", "bogus": 1})


def test_time_of_day_parsing():
    assert parse_time_of_day("7:05") == "07:05"
    assert parse_time_of_day("23:00") == "23:00"
    assert parse_time_of_day("24:00") is None
    assert parse_time_of_day("12:60") is None
    dom = TimeOfDayDomain()
    assert dom.contains("07:05") and not dom.contains("7:05")


def test_domain_option_enumeration():
    assert IntRangeDomain(1, 6).option_values() == tuple(range(1, 7))
    assert IntRangeDomain(0, 2500).option_values() is None
    assert PercentDomain().option_values() is None
    assert EnumDomain(members=("a", "b")).option_values() == ("a", "b")
