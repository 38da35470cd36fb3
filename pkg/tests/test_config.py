import pytest
import yaml

from feesim.config import (
    ConfigError,
    build_scenario,
    bundled_configs,
    load_config,
    parse_config,
    to_wei,
)
from feesim.fee_mechanism import ETHER, GWEI


def test_defaults_parse():
    cfg = parse_config({})
    sc = build_scenario(cfg)
    assert sc.slots == cfg.run.warmup + cfg.demand.trace.slots
    assert sc.min_tip == 2 * GWEI and sc.block_reward == 2 * ETHER
    assert sc.initial_base_fee > 0


def test_unknown_key_names_path():
    with pytest.raises(ConfigError) as e:
        parse_config({"demand": {"trace": {"slotz": 3}}})
    assert e.value.key == "demand.trace.slotz"


@pytest.mark.parametrize("data,key", [
    ({"mechanism": {"controller": "pid"}}, "mechanism.controller"),
    ({"mechanism": {"d": "1.5"}}, "mechanism"),
    ({"run": {"runs": 0}}, "run.runs"),
    ({"demand": {"legacy_fraction": 2}}, "demand.legacy_fraction"),
    ({"demand": {"legacy_fraction": "dataset"}}, "demand.legacy_fraction"),
    ({"demand": {"trace": {"source": "replay"}}}, "demand.trace.from_height"),
    ({"mechanism": {"block_gas_limit": 3}}, "mechanism.block_gas_limit"),
    ({"demand": {"gas_multiplier": -1}}, "demand.gas_multiplier"),
])
def test_invalid_values_name_key(data, key):
    with pytest.raises(ConfigError) as e:
        parse_config(data)
    assert e.value.key == key


def test_to_wei_exact():
    assert to_wei("0.1", GWEI, "k") == 10**8
    assert to_wei(2, ETHER, "k") == 2 * 10**18
    with pytest.raises(ConfigError):
        to_wei("1e-10", GWEI, "k")
    with pytest.raises(ConfigError):
        to_wei("abc", GWEI, "k")


def test_fixed_initial_base_fee():
    cfg = parse_config({"mechanism": {"initial_base_fee_gwei": "30.5"}})
    assert build_scenario(cfg).initial_base_fee == 30_500_000_000


def test_dataset_base_fee_needs_replay():
    cfg = parse_config({"mechanism": {"initial_base_fee_gwei": "dataset"}})
    with pytest.raises(ConfigError):
        build_scenario(cfg)


def test_bundled_configs_all_load():
    names = bundled_configs()
    for window in ("stable", "burst", "full"):
        for mech in ("d00625", "d0125", "d025", "aimd"):
            assert f"{window}_{mech}" in names
    for name in names:
        load_config(name)


def test_bundled_replay_ranges():
    t = load_config("stable_d0125").demand.trace
    assert (t.from_height, t.to_height) == (13_026_000, 13_026_449)
    t = load_config("burst_aimd").demand.trace
    assert t.to_height - t.from_height + 1 == 450


def test_synthetic_mechanisms_share_trace():
    scs = [build_scenario(load_config(f"synthetic_burst_{m}")) for m in ("d00625", "d0125", "d025", "aimd")]
    assert all(scs[0].trace.same_as(s.trace) for s in scs[1:])
    assert [s.controller.label for s in scs] == ["d=0.0625", "d=0.125", "d=0.25", "AIMD"]


def test_load_from_path(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"name": "mine", "run": {"runs": 2}}))
    assert load_config(str(p)).run.runs == 2
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))
