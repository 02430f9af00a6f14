import csv
import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from fiwicache import analysis
from fiwicache.analysis import (
    IntegrationFailure,
    analysis_curve,
    analytic_cached_files,
    analytic_hit_ratio,
    average_rate,
    backhaul_load,
    cell_rate,
    expected_inverse_gain,
    golden_section_max,
    maximize_upper_bound,
    rate_model,
    upper_bound,
    write_analysis_csv,
)
from fiwicache.caching import zipf_popularity
from fiwicache.config import NetworkConfig
from oracles import inner_exp_integral, tau_monte_carlo


class TestRateModel:
    def test_constants(self, cfg):
        m = rate_model(2.0, cfg)
        assert m.eta[0] == pytest.approx(3 * 6 ** (-1 / 3))
        assert m.eta[1] == pytest.approx(math.sqrt(2))
        G = cfg.beam_gain
        assert m.U[0] == pytest.approx(G * 3 * 50.0**2 / 2)
        assert m.U[1] == pytest.approx(G * 2 * 50.0**4 / 1)
        assert m.V == pytest.approx(G / (cfg.noise_power * 4e-4 * math.pi * 1e4))

    def test_level_matches_mean_inverse_gain(self, cfg):
        # U + V P_T is G W / sigma^2 for the water level W fed by the mean floors
        P = 3.0
        m = rate_model(P, cfg)
        for i, s in enumerate(expected_inverse_gain(cfg)):
            level = (P + s) / cfg.ues_per_cell
            assert m.U[i] + m.V * P == pytest.approx(cfg.beam_gain * level / cfg.noise_power, rel=1e-12)


class TestInverseGain:
    def test_formula(self, cfg):
        los, nlos = expected_inverse_gain(cfg)
        k = cfg.ues_per_cell * cfg.noise_power
        assert los == pytest.approx(k * 50.0**2 * 1.5)
        assert nlos == pytest.approx(k * 50.0**4 * 2.0)

    def test_order_one(self, cfg):
        with pytest.raises(ValueError):
            expected_inverse_gain(cfg.replace(nakagami_nlos=1))

    @pytest.mark.parametrize("N", [2, 3])
    def test_sampled(self, N):
        h = np.random.default_rng(N).gamma(N, 1.0 / N, 1_000_000)
        assert (1 / h).mean() == pytest.approx(N / (N - 1), rel=0.01)


class TestAverageRate:
    @pytest.mark.parametrize("x, N", [(1e-3, 1), (0.2, 1), (1e-4, 3), (5e-2, 2)])
    def test_inner_integral_closed_form(self, cfg, x, N):
        G = cfg.beam_gain
        t_max = math.log2(40.0 / x - G + 1.0) if 40.0 / x - G + 1.0 > 2 else 1.0
        got = analysis._t_integral(x, N, G, max(t_max, 8.0), 1e-10)
        expect = sum((-1) ** (m + 1) * math.comb(N, m) * inner_exp_integral(m * x, G) for m in range(1, N + 1))
        assert got == pytest.approx(expect, rel=1e-6)

    def test_positive_without_power(self, cfg):
        c = cfg.replace(beam_gain=1.0)
        assert average_rate(rate_model(0.0, c), c) > 0

    def test_increasing(self, cfg):
        taus = [average_rate(rate_model(p, cfg), cfg) for p in (1.0, 2.0, 4.0)]
        assert taus[0] < taus[1] < taus[2]

    def test_negative_power(self, cfg):
        with pytest.raises(ValueError):
            average_rate(rate_model(-1.0, cfg), cfg)

    def test_tolerance_halving(self, cfg):
        m = rate_model(2.5, cfg)
        a = average_rate(m, cfg, epsrel=1e-6)
        b = average_rate(m, cfg, epsrel=5e-7)
        assert abs(a - b) / a < 1e-3

    def test_monte_carlo(self, cfg):
        m = rate_model(2.0, cfg)
        mc = tau_monte_carlo(m, cfg, 100_000, np.random.default_rng(7))
        assert average_rate(m, cfg) == pytest.approx(mc, rel=0.03)

    def test_integration_failure(self, cfg, monkeypatch):
        def noisy(*a, **k):
            warnings.warn("roundoff", integrate.IntegrationWarning)
            return 0.0, 0.0
        monkeypatch.setattr(integrate, "quad", noisy)
        with pytest.raises(IntegrationFailure):
            analysis._quad(math.exp, 0.0, 1.0, 1e-6)


class TestCachingSide:
    def test_counts(self, cfg, pop):
        assert analytic_cached_files(0.0, cfg) == 400
        assert analytic_cached_files(cfg.transmit_budget, cfg) == 0
        assert analytic_hit_ratio(cfg.transmit_budget, cfg, pop) == 0.0
        assert analytic_hit_ratio(0.0, cfg, pop) == pop.prefix_hit(400)

    def test_hit_nonincreasing(self, cfg, pop):
        h = [analytic_hit_ratio(p, cfg, pop) for p in np.linspace(0, 6, 301)]
        assert np.all(np.diff(h) <= 0)

    def test_no_miss_traffic_with_full_catalog(self):
        c = NetworkConfig(num_files=400)
        pop = zipf_popularity(400, 0.8)
        assert backhaul_load(0.0, c, pop) == 0.0


class TestBound:
    def test_full_hit_branch(self):
        c = NetworkConfig(num_files=400)
        pop = zipf_popularity(400, 0.8)
        assert upper_bound(0.0, c, pop) == pytest.approx(c.num_aps * cell_rate(0.0, c))

    def test_backhaul_branch(self, cfg, pop):
        assert upper_bound(cfg.transmit_budget, cfg, pop) == cfg.backhaul_capacity

    def test_golden_section(self):
        x, fx = golden_section_max(lambda t: -(t - 1.3) ** 2, 0.0, 4.0, 1e-6)
        assert x == pytest.approx(1.3, abs=1e-6) and fx <= 0
        x, _ = golden_section_max(lambda t: t, 0.0, 4.0)
        assert x == 4.0

    def test_unlimited_backhaul(self, cfg):
        r = maximize_upper_bound(cfg.replace(backhaul_capacity=math.inf))
        assert r.P_T_star == cfg.transmit_budget
        assert r.cache_utilization == 0.0

    def test_defaults(self, cfg):
        r = maximize_upper_bound(cfg)
        assert 0.0 < r.cache_utilization < 1.0
        assert 0.0 <= r.P_T_star <= cfg.transmit_budget
        assert r.rate_at_star == pytest.approx(cfg.subchannel_bw * r.tau_at_star)
        grid = np.linspace(0, cfg.transmit_budget, 61)
        pop = zipf_popularity(cfg.num_files, cfg.zipf_delta)
        assert r.R_plus >= max(upper_bound(p, cfg, pop) for p in grid) - 1e-6 * r.R_plus

    def test_smaller_cells_cache_more(self, cfg):
        small = maximize_upper_bound(cfg.with_radius(80.0))
        large = maximize_upper_bound(cfg.with_radius(120.0))
        assert small.cache_utilization > large.cache_utilization


class TestCurve:
    def test_rows_and_csv(self, cfg, tmp_path):
        rows = analysis_curve(cfg, 2)
        assert len(rows) == 2
        assert rows[0]["P_T_watts"] == 0.0 and rows[1]["P_T_watts"] == cfg.transmit_budget
        path = tmp_path / "a.csv"
        write_analysis_csv(rows, path, "hello")
        lines = path.read_text().splitlines()
        assert lines[0] == "# hello"
        back = list(csv.DictReader(lines[1:]))
        assert float(back[1]["R_plus_bps"]) == rows[1]["R_plus_bps"]

    def test_bad_grid(self, cfg):
        with pytest.raises(ValueError):
            analysis_curve(cfg, 0)
