from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from placesynth.topology import (
    ConfigError, LevelSpec, SystemModel, device_count, load_system, parse_system, serialize_system,
)


def _cfg(*levels) -> str:
    return json.dumps({"levels": [dict(zip(("name", "count", "bandwidth_GBps"), lv)) for lv in levels]})


def test_parse_sixteen_gpu_example():
    text = _cfg(("rack", 1), ("server", 2, 8.0), ("CPU", 2, 32.0), ("GPU", 4, 135.0))
    sys_ = parse_system(text)
    assert sys_.cardinalities == (1, 2, 2, 4)
    assert sys_.names == ("rack", "server", "CPU", "GPU")
    assert device_count(sys_) == 16


def test_single_device_system():
    sys_ = parse_system(_cfg(("gpu", 1)))
    assert len(sys_.levels) == 1 and device_count(sys_) == 1


def test_root_prepended_and_bandwidth_converted():
    sys_ = parse_system(_cfg(("node", 2, 8.0), ("gpu", 16, 270.0)))
    assert sys_.cardinalities == (1, 2, 16)
    assert sys_.names[0] == "root"
    assert device_count(sys_) == 32
    assert sys_.levels[1].bandwidth == 8e9
    assert sys_.levels[2].bandwidth == 270e9


@pytest.mark.parametrize("text, msg", [
    ("{not json", "malformed"),
    (_cfg(("node", 0, 8.0)), "positive"),
    (_cfg(("node", 2)), "bandwidth"),
    (json.dumps({"levels": [{"name": "n", "count": 2, "bandwidth_GBps": 1, "links": []}]}), "unsupported"),
    (json.dumps({"levels": [{"name": "n", "count": 2.5, "bandwidth_GBps": 1}]}), "integer"),
    (json.dumps({"tiers": []}), "levels"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_system(text)


def test_duplicate_names_rejected():
    with pytest.raises(ConfigError):
        SystemModel((LevelSpec("root", 1), LevelSpec("x", 2, 1e9), LevelSpec("x", 2, 1e9)))


@pytest.mark.parametrize("cards, k", [((1, 2, 2, 4), 16), ((1,), 1), ((1, 4, 16), 64)])
def test_device_count(cards, k):
    assert device_count(SystemModel.from_cardinalities(cards)) == k


def test_hardware_coordinate_mixed_radix():
    sys_ = SystemModel.from_cardinalities((1, 2, 2, 4))
    coords = [sys_.hardware_coordinate(i) for i in range(16)]
    assert coords[0] == (0, 0, 0, 0)
    assert coords[5] == (0, 0, 1, 1)
    assert coords[15] == (0, 1, 1, 3)
    assert len(set(coords)) == 16


@pytest.mark.parametrize("name, cards", [
    ("a100_2node", (1, 2, 16)), ("a100_4node", (1, 4, 16)),
    ("v100_2node", (1, 2, 8)), ("v100_4node", (1, 4, 8)),
])
def test_shipped_configs(name, cards):
    sys_ = load_system(name)
    assert sys_.cardinalities == cards
    assert sys_.levels[1].bandwidth == 8e9
    assert load_system(name + ".json") == sys_


def test_missing_config():
    with pytest.raises(ConfigError, match="not found"):
        load_system("/nonexistent/nowhere.json")


level = st.tuples(
    st.integers(1, 8),
    st.sampled_from([1.0, 8.0, 32.0, 135.0, 270.0, 12.5]),
    st.sampled_from([0.0, 1e-6, 5e-5]),
)


@given(st.lists(level, min_size=1, max_size=5))
def test_serialize_round_trip(levels):
    specs = [LevelSpec(f"l{i}", c, bw * 1e9, lat) for i, (c, bw, lat) in enumerate(levels)]
    sys_ = SystemModel(tuple(specs))
    assert parse_system(serialize_system(sys_)) == sys_


@given(st.lists(st.integers(1, 6), min_size=1, max_size=4))
def test_coordinates_enumerate_every_device(cards):
    sys_ = SystemModel.from_cardinalities([1] + cards)
    k = device_count(sys_)
    assert len({sys_.hardware_coordinate(i) for i in range(k)}) == k
