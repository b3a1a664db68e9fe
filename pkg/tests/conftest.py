from __future__ import annotations

import pytest

from hearth.catalog import default_catalog
from hearth.registry import DeviceDescriptor, Registry
from hearth.runtime import Runtime


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


def make_home(registry: Registry) -> None:
    """A small household shared by many tests."""
    registry.register_device(
        DeviceDescriptor(id="lamp-blue", kind="lamp", display_name="blue-lamp", location="bedroom"),
        {"power": "off", "color": "blue"},
    )
    registry.register_device(
        DeviceDescriptor(id="lamp-desk", kind="lamp", display_name="desk-lamp", location="bedroom"),
        {"power": "on", "color": "white"},
    )
    registry.register_device(
        DeviceDescriptor(id="lamp-tree", kind="lamp", display_name="tree-lamp", location="salon"),
        {"power": "off", "color": "green"},
    )
    registry.register_device(
        DeviceDescriptor(id="plug-tv", kind="smart-plug", display_name="tv-plug", location="salon"),
        {"power": "on", "watts": 120},
    )
    registry.register_device(
        DeviceDescriptor(
            id="plug-fridge",
            kind="smart-plug",
            display_name="fridge-plug",
            location="kitchen",
            critical=True,
        ),
        {"power": "on", "watts": 150},
    )
    registry.register_device(
        DeviceDescriptor(id="cube", kind="domicube", display_name="DomiCube", location="salon"),
        {"face": 1, "battery": 80},
    )
    registry.register_device(
        DeviceDescriptor(id="door", kind="contact-sensor", display_name="front-door", location="hall"),
        {"open": False},
    )
    registry.register_device(
        DeviceDescriptor(id="clock", kind="clock-service", display_name="clock", location=""),
        {},
    )


@pytest.fixture
def registry(catalog):
    reg = Registry(catalog)
    make_home(reg)
    return reg


@pytest.fixture
def runtime(catalog):
    rt = Runtime(catalog)
    make_home(rt.registry)
    return rt
