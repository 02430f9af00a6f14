import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiwicache.config import (
    InvalidConfig,
    NetworkConfig,
    config_from_mapping,
    config_hash,
    load_config,
    resolve_field,
    save_config,
    trial_rng,
    validate_config,
)


def fields_of(exc):
    return {f for f, _ in exc.value.violations}


class TestDefaults:
    def test_table_values(self, cfg):
        assert cfg.num_aps == 16 and cfg.num_files == 1000
        assert cfg.subchannel_bw == 10e6
        assert cfg.backhaul_capacity == 15e9
        assert cfg.cache_size == 320e9  # 40 GB
        assert cfg.file_size == 800e6  # 100 MB
        assert (cfg.max_power, cfg.circuit_power) == (8.0, 2.0)
        assert (cfg.nakagami_los, cfg.nakagami_nlos) == (3, 2)
        assert (cfg.pathloss_los, cfg.pathloss_nlos) == (2.0, 4.0)

    def test_accepted(self, cfg):
        assert validate_config(cfg) is cfg

    def test_unpublished_defaults(self, cfg):
        assert cfg.beam_gain == pytest.approx(63.0957, rel=1e-5)
        # -95 dBm
        assert 10 * math.log10(cfg.noise_power * 1e3) == pytest.approx(-95.0)

    def test_derived(self, cfg):
        assert cfg.transmit_budget == 6.0
        assert cfg.max_cached_files == 400
        assert cfg.ues_per_cell == pytest.approx(4e-4 * math.pi * 100**2)

    def test_idempotent(self, cfg):
        assert validate_config(validate_config(cfg)) is cfg


class TestValidation:
    def test_nakagami_order_one(self, cfg):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(nakagami_los=1))
        (field, reason), = exc.value.violations
        assert field == "nakagami_los" and "requires N_i>1" in reason

    def test_power_below_circuit(self, cfg):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(max_power=1.0))
        assert ("max_power", "P_M must exceed P_cc") in exc.value.violations

    def test_all_violations_at_once(self, cfg):
        bad = cfg.replace(power_amp_coeff=0.5, zipf_delta=-1.0, cache_size=-1.0, cell_radius=0.5)
        with pytest.raises(InvalidConfig) as exc:
            validate_config(bad)
        assert {"power_amp_coeff", "zipf_delta", "cache_size", "min_distance"} <= fields_of(exc)

    @pytest.mark.parametrize("name", ["subchannel_bw", "noise_power", "beam_gain", "file_size"])
    def test_strictly_positive(self, cfg, name):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(**{name: 0.0}))
        assert name in fields_of(exc)

    def test_nan_rejected(self, cfg):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(blockage_beta=float("nan")))
        assert "blockage_beta" in fields_of(exc)

    def test_non_integer_count(self, cfg):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(num_aps=16.5))
        assert "num_aps" in fields_of(exc)

    def test_dp_resolution(self, cfg):
        with pytest.raises(InvalidConfig) as exc:
            validate_config(cfg.replace(dp_bandwidth_unit=1e9))
        assert "dp_bandwidth_unit" in fields_of(exc)

    def test_seed_range(self, cfg):
        with pytest.raises(InvalidConfig):
            validate_config(cfg.replace(rng_seed=2**64))
        validate_config(cfg.replace(rng_seed=2**64 - 1))

    def test_zero_density_allowed(self, cfg):
        validate_config(cfg.replace(ue_density=0.0))


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        cfg = NetworkConfig(blockage_beta=0.1 + 0.2, noise_power=1 / 3, rng_seed=2**63 + 11)
        path = tmp_path / "c.json"
        save_config(cfg, path)
        back = load_config(path)
        for f in dataclasses.fields(cfg):
            assert getattr(back, f.name) == getattr(cfg, f.name), f.name
        assert config_hash(back) == config_hash(cfg)

    @given(st.floats(min_value=1e-6, max_value=1.0, allow_nan=False),
           st.floats(min_value=1e-14, max_value=1e-9, allow_nan=False))
    def test_round_trip_floats(self, beta, noise):
        cfg = NetworkConfig(blockage_beta=beta, noise_power=noise)
        blob = json.dumps(dataclasses.asdict(cfg))
        assert config_from_mapping(json.loads(blob)) == cfg

    def test_partial_file_and_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"C": 5e9, "zipf_delta": 1.2}))
        cfg = load_config(path, {"delta": "0.4", "N": "9"})
        assert cfg.backhaul_capacity == 5e9
        assert cfg.zipf_delta == 0.4
        assert cfg.num_aps == 9 and isinstance(cfg.num_aps, int)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"warp_factor": 9}))
        with pytest.raises(InvalidConfig) as exc:
            load_config(path)
        assert "warp_factor" in fields_of(exc)

    def test_aliases(self):
        assert resolve_field("λ") == resolve_field("lambda") == "ue_density"
        assert resolve_field("β") == "blockage_beta"
        assert resolve_field("cell_radius") == "cell_radius"
        with pytest.raises(KeyError):
            resolve_field("nope")

    def test_hash_sensitive(self, cfg):
        assert config_hash(cfg) != config_hash(cfg.replace(zipf_delta=0.81))
        assert config_hash(cfg) == config_hash(NetworkConfig())


class TestRadiusChange:
    def test_holds_ue_count(self, cfg):
        c = cfg.with_radius(60.0)
        assert c.ues_per_cell == pytest.approx(cfg.ues_per_cell)
        assert c.ue_density * c.area_side**2 == pytest.approx(cfg.ue_density * cfg.area_side**2)
        validate_config(c)

    def test_plain(self, cfg):
        c = cfg.with_radius(60.0, hold_ue_count=False)
        assert c.area_side == cfg.area_side and c.ue_density == cfg.ue_density


class TestSeeding:
    def test_reproducible(self):
        a = trial_rng(5, 1, 2).random(4)
        np.testing.assert_array_equal(a, trial_rng(5, 1, 2).random(4))

    def test_streams_differ(self):
        draws = {tuple(trial_rng(5, p, t).random(2)) for p in range(3) for t in range(3)}
        assert len(draws) == 9
