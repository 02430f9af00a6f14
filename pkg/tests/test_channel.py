import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiwicache.channel import (
    LinkState,
    NegativeDistance,
    NegativePower,
    blockage_probability,
    link_rate,
    realize_channel,
    sample_fading,
)
from fiwicache.config import trial_rng
from fiwicache.geometry import associate, deploy, deploy_aps


class TestBlockage:
    @pytest.mark.parametrize("r, los", [(0.0, 1.0), (500.0, 0.36787944117144233), (100.0, 0.8187307530779818)])
    def test_values(self, r, los):
        p_los, p_nlos = blockage_probability(r, 0.002)
        assert p_los == pytest.approx(los, rel=1e-12)
        assert p_los + p_nlos == 1.0

    def test_negative(self):
        with pytest.raises(NegativeDistance):
            blockage_probability(-1.0, 0.002)

    def test_vector(self):
        p, q = blockage_probability(np.array([0.0, 100.0]), 0.002)
        np.testing.assert_allclose(p + q, 1.0)

    def test_empirical_los_fraction(self, cfg):
        # 2e4 UEs at exactly 300 m from AP 0
        aps = deploy_aps(cfg.replace(num_aps=1, area_side=700.0))
        c = cfg.replace(num_aps=1)
        ues = np.tile([[350.0 + 300.0, 350.0]], (20000, 1))
        dep = associate(aps, ues, c)
        ch = realize_channel(dep, c, trial_rng(9))
        frac = ch.los[0].mean()
        p = math.exp(-c.blockage_beta * 300.0)
        assert abs(frac - p) < 2 * math.sqrt(p * (1 - p) / 20000)


class TestFading:
    def test_unit_mean(self):
        h = sample_fading(3, np.random.default_rng(0), size=100_000)
        assert h.mean() == pytest.approx(1.0, abs=0.02)

    def test_inverse_mean(self):
        h = sample_fading(3, np.random.default_rng(1), size=100_000)
        assert (1 / h).mean() == pytest.approx(1.5, abs=0.02)


class TestRealization:
    def test_gain_structure(self, cfg):
        dep = deploy(cfg, trial_rng(11))
        ch = realize_channel(dep, cfg, trial_rng(12))
        for n in range(cfg.num_aps):
            alpha = np.where(ch.los[n], cfg.pathloss_los, cfg.pathloss_nlos)
            np.testing.assert_allclose(ch.gains[n], dep.distances[n] ** (-alpha) * ch.fading[n])
            assert np.all(ch.gains[n] > 0)
            states = ch.states(n)
            assert all((s is LinkState.LOS) == bool(x) for s, x in zip(states, ch.los[n]))

    def test_deterministic(self, cfg):
        dep = deploy(cfg, trial_rng(11))
        a = realize_channel(dep, cfg, trial_rng(13))
        b = realize_channel(dep, cfg, trial_rng(13))
        for x, y in zip(a.gains, b.gains):
            np.testing.assert_array_equal(x, y)


class TestLinkRate:
    def test_zero_power(self, cfg):
        assert link_rate(0.0, 1e-6, cfg) == (0.0, 0.0)

    def test_unit_snr(self, cfg):
        g = cfg.noise_power / cfg.beam_gain  # P = 1 W gives snr 1
        snr, rate = link_rate(1.0, g, cfg)
        assert snr == pytest.approx(1.0)
        assert rate == pytest.approx(10e6)

    def test_snr_three(self, cfg):
        g = 3 * cfg.noise_power / (0.5 * cfg.beam_gain)
        snr, rate = link_rate(0.5, g, cfg)
        assert snr == pytest.approx(3.0)
        assert rate == pytest.approx(20e6)

    def test_negative(self, cfg):
        with pytest.raises(NegativePower):
            link_rate(-0.1, 1.0, cfg)

    @given(st.floats(min_value=1e-9, max_value=1e-3))
    def test_increasing_concave(self, g):
        from fiwicache.config import NetworkConfig
        cfg = NetworkConfig()
        p = np.linspace(0.0, 5.0, 101)
        _, r = link_rate(p, np.full_like(p, g), cfg)
        d = np.diff(r)
        assert np.all(d > 0)
        assert np.all(np.diff(d) <= 1e-9 * r.max())
