import dataclasses
import math

import numpy as np
import pytest

from mimocast.closed_form import (DownlinkPowers, sinr_mrt_multicast,
                                  sinr_mrt_unicast)
from mimocast.errors import DegenerateInputError
from mimocast.model import FadingProfile, estimation_variances
from mimocast.montecarlo import (build_mrt_precoders, build_zf_precoders,
                                 draw_channels, empirical_sinr, mmse_estimate,
                                 trial_rng, validate_closed_form)

from test_model import make_config


def small_system(n_antennas=64, n_unicast=2, group_sizes=(2,), cap=3.0, seed=5):
    cfg = make_config(n_unicast=n_unicast, group_sizes=group_sizes,
                      pilot_length=n_unicast + len(group_sizes),
                      n_antennas=n_antennas, cap=cap)
    rng = np.random.default_rng(seed)
    fading = FadingProfile(
        unicast_gains=tuple(rng.uniform(0.2, 1.5, n_unicast)),
        multicast_gains=tuple(tuple(rng.uniform(0.2, 1.5, k)) for k in group_sizes),
    )
    return cfg, fading


def cap_pilots(cfg):
    tau = cfg.pilot_length
    return ([e / tau for e in cfg.unicast_energy_caps],
            [[e / tau for e in caps] for caps in cfg.multicast_energy_caps])


class TestDrawChannels:
    def test_seed_reproducible(self):
        cfg, fading = small_system()
        a = draw_channels(cfg, fading, 77)
        b = draw_channels(cfg, fading, 77)
        assert np.array_equal(a.unicast_channels, b.unicast_channels)
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.multicast_channels, b.multicast_channels))

    def test_sample_covariance_is_scaled_identity(self):
        # Entries are i.i.d. across antennas, so one tall draw yields many
        # independent 4-antenna vectors after reshaping.
        n_vectors, n_ant = 50_000, 4
        cfg, _ = small_system(n_antennas=n_vectors * n_ant, n_unicast=1, group_sizes=(1,))
        beta = 0.8
        fading = FadingProfile(unicast_gains=(beta,), multicast_gains=((1.0,),))
        draw = draw_channels(cfg, fading, 3)
        f = draw.unicast_channels[:, 0].reshape(n_vectors, n_ant)
        cov = f.T.conj() @ f / n_vectors
        err = np.linalg.norm(cov - beta * np.eye(n_ant)) / np.linalg.norm(beta * np.eye(n_ant))
        assert err <= 0.02


class TestMmseEstimate:
    def test_consistency_at_huge_pilot_energy(self):
        cfg, fading = small_system(n_antennas=32)
        draw = draw_channels(cfg, fading, 9)
        pilots_un = [1e12 / cfg.pilot_length] * cfg.n_unicast
        pilots_mu = [[0.5] * k for k in cfg.group_sizes]
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 10)
        err = np.abs(est.unicast_estimates - draw.unicast_channels).max()
        assert err <= 1e-5

    def test_empirical_variances_match_formulas(self):
        # One tall draw = 10^5 independent per-component samples.
        n = 100_000
        cfg, _ = small_system(n_antennas=n, n_unicast=1, group_sizes=(2,))
        fading = FadingProfile(unicast_gains=(0.9,), multicast_gains=((0.6, 1.2),))
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        draw = draw_channels(cfg, fading, 21)
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 22)
        assert np.mean(np.abs(est.unicast_estimates[:, 0]) ** 2) \
            == pytest.approx(stats.unicast_var[0], rel=0.02)
        assert np.mean(np.abs(est.group_estimates[:, 0]) ** 2) \
            == pytest.approx(stats.group_var[0], rel=0.02)
        for k in range(2):
            assert np.mean(np.abs(est.multicast_estimate(0, k)) ** 2) \
                == pytest.approx(stats.multicast_var[0][k], rel=0.02)

    def test_error_orthogonal_to_estimate(self):
        n = 200_000
        cfg, _ = small_system(n_antennas=n, n_unicast=1, group_sizes=(1,))
        fading = FadingProfile(unicast_gains=(0.9,), multicast_gains=((1.0,),))
        pilots_un, pilots_mu = cap_pilots(cfg)
        draw = draw_channels(cfg, fading, 31)
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 32)
        f_hat = est.unicast_estimates[:, 0]
        err = f_hat - draw.unicast_channels[:, 0]
        inner = np.mean(err.conj() * f_hat)
        # 3-sigma band around zero for the sample mean of the product
        scale = np.std(err.conj() * f_hat) / math.sqrt(n)
        assert abs(inner) <= 3.0 * scale


class TestMrtPrecoders:
    def test_mean_column_power_matches_requested(self):
        cfg, fading = small_system(n_antennas=64)
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(2.5, 1.0), multicast=(4.0,))
        acc_v = np.zeros(cfg.n_unicast)
        acc_w = np.zeros(cfg.n_groups)
        n_draws = 3000
        for t in range(n_draws):
            rng = trial_rng(500, t)
            draw = draw_channels(cfg, fading, rng)
            est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, rng)
            V, W = build_mrt_precoders(cfg, est, powers, stats)
            acc_v += np.sum(np.abs(V) ** 2, axis=0)
            acc_w += np.sum(np.abs(W) ** 2, axis=0)
        assert acc_v / n_draws == pytest.approx(powers.unicast, rel=0.02)
        assert acc_w / n_draws == pytest.approx(powers.multicast, rel=0.02)

    def test_zero_power_gives_zero_column(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(0.0, 1.0), multicast=(1.0,))
        draw = draw_channels(cfg, fading, 8)
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 9)
        V, _ = build_mrt_precoders(cfg, est, powers, stats)
        assert np.all(V[:, 0] == 0.0)

    def test_multicast_column_collinear_with_group_estimate(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(1.0, 1.0), multicast=(2.0,))
        draw = draw_channels(cfg, fading, 8)
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 9)
        _, W = build_mrt_precoders(cfg, est, powers, stats)
        g = est.group_estimates[:, 0]
        ratio = W[:, 0] / g
        assert np.allclose(ratio, ratio[0])

    def test_power_without_estimate_rejected(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        pilots_un[0] = 0.0
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(1.0, 1.0), multicast=(2.0,))
        draw = draw_channels(cfg, fading, 8)
        est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, 9)
        with pytest.raises(DegenerateInputError):
            build_mrt_precoders(cfg, est, powers, stats)


class TestZfPrecoders:
    def test_nulling_per_draw(self):
        cfg, fading = small_system(n_antennas=32)
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(2.0, 1.0), multicast=(3.0,))
        for t in range(10):
            rng = trial_rng(600, t)
            draw = draw_channels(cfg, fading, rng)
            est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, rng)
            V, W = build_zf_precoders(cfg, est, powers, stats)
            C = np.concatenate([est.unicast_estimates, est.group_estimates], axis=1)
            cross = C.conj().T @ np.concatenate([V, W], axis=1)
            diag = np.abs(np.diag(cross))
            off = np.abs(cross - np.diag(np.diag(cross)))
            assert off.max() <= 1e-10 * diag.max()

    def test_mean_column_power_matches_requested(self):
        cfg, fading = small_system(n_antennas=32)
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(2.5, 1.0), multicast=(4.0,))
        acc_v = np.zeros(cfg.n_unicast)
        acc_w = np.zeros(cfg.n_groups)
        n_draws = 4000
        for t in range(n_draws):
            rng = trial_rng(700, t)
            draw = draw_channels(cfg, fading, rng)
            est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, rng)
            V, W = build_zf_precoders(cfg, est, powers, stats)
            acc_v += np.sum(np.abs(V) ** 2, axis=0)
            acc_w += np.sum(np.abs(W) ** 2, axis=0)
        assert acc_v / n_draws == pytest.approx(powers.unicast, rel=0.02)
        assert acc_w / n_draws == pytest.approx(powers.multicast, rel=0.02)

    def test_minimal_antenna_margin_keeps_rank(self):
        # One spatial degree of freedom left: the Gram must stay invertible
        # in every one of 10^4 draws.
        cfg, fading = small_system(n_antennas=4, n_unicast=2, group_sizes=(2,))
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        powers = DownlinkPowers(unicast=(1.0, 1.0), multicast=(1.0,))
        for t in range(10_000):
            rng = trial_rng(800, t)
            draw = draw_channels(cfg, fading, rng)
            est = mmse_estimate(cfg, fading, pilots_un, pilots_mu, draw, rng)
            build_zf_precoders(cfg, est, powers, stats)  # must not raise


class TestEmpiricalSinr:
    def test_too_few_trials_rejected(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        powers = DownlinkPowers(unicast=(1.0, 1.0), multicast=(2.0,))
        with pytest.raises(ValueError):
            empirical_sinr(cfg, fading, pilots_un, pilots_mu, powers, "mrt",
                           "unicast", 0, 99, 1)

    def test_zero_power_target_reads_zero(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        powers = DownlinkPowers(unicast=(0.0, 1.0), multicast=(2.0,))
        ts = empirical_sinr(cfg, fading, pilots_un, pilots_mu, powers, "mrt",
                            "unicast", 0, 200, 2)
        assert ts.empirical_sinr == 0.0

    def test_pilot_length_invariant_at_fixed_energy(self):
        # Estimates depend on pilot power only through energy = tau * power,
        # so halving powers while doubling tau reproduces the trials bit for
        # bit and the empirical SINR exactly.
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        powers = DownlinkPowers(unicast=(1.5, 1.0), multicast=(2.0,))
        a = empirical_sinr(cfg, fading, pilots_un, pilots_mu, powers, "mrt",
                           "multicast", (0, 1), 300, 77)
        cfg2 = dataclasses.replace(cfg, pilot_length=cfg.pilot_length * 2)
        pilots_un2 = [p / 2.0 for p in pilots_un]
        pilots_mu2 = [[q / 2.0 for q in row] for row in pilots_mu]
        b = empirical_sinr(cfg2, fading, pilots_un2, pilots_mu2, powers, "mrt",
                           "multicast", (0, 1), 300, 77)
        assert a.empirical_sinr == b.empirical_sinr
        assert a.confidence_halfwidth == b.confidence_halfwidth

    def test_interference_scaling_tracks_closed_form(self):
        # Doubling every downlink power doubles the numerator but also the
        # interference; the empirical SINR must track the closed-form ratio
        # at both operating points.
        cfg, fading = small_system(cap=2.0)
        cfg = dataclasses.replace(cfg, total_power=40.0)
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        lo = DownlinkPowers(unicast=(2.0, 1.0), multicast=(3.0,))
        hi = DownlinkPowers(unicast=(4.0, 2.0), multicast=(6.0,))
        for powers in (lo, hi):
            cf = sinr_mrt_unicast(cfg, stats, fading, powers, 0)
            ts = empirical_sinr(cfg, fading, pilots_un, pilots_mu, powers, "mrt",
                                "unicast", 0, 3000, 41)
            assert ts.confidence_halfwidth > 0.0
            assert ts.n_trials == 3000
            assert abs(ts.empirical_sinr - cf) <= 3.0 * ts.confidence_halfwidth / 1.96


class TestValidateClosedForm:
    def test_report_reproducible(self):
        cfg, fading = small_system()
        pilots_un, pilots_mu = cap_pilots(cfg)
        powers = DownlinkPowers(unicast=(1.0, 1.0), multicast=(2.0,))
        a = validate_closed_form(cfg, fading, pilots_un, pilots_mu, powers,
                                 "mrt", 300, 5)
        b = validate_closed_form(cfg, fading, pilots_un, pilots_mu, powers,
                                 "mrt", 300, 5)
        assert a == b

    @pytest.mark.parametrize("precoder", ["mrt", "zf"])
    def test_twenty_combo_equivalence_matrix(self, precoder):
        # Ten (topology, power-split) combinations per precoder; every
        # per-user empirical SINR must sit within 3 half-widths of its
        # closed form.
        topologies = [
            dict(n_antennas=24, n_unicast=1, group_sizes=(1,)),
            dict(n_antennas=48, n_unicast=2, group_sizes=(2,)),
            dict(n_antennas=64, n_unicast=3, group_sizes=(1, 2)),
            dict(n_antennas=32, n_unicast=0, group_sizes=(3,)),
            dict(n_antennas=96, n_unicast=4, group_sizes=(2, 2)),
        ]
        for t_idx, topo in enumerate(topologies):
            cfg, fading = small_system(**topo, seed=100 + t_idx)
            pilots_un, pilots_mu = cap_pilots(cfg)
            for s_idx, un_share in enumerate((0.3, 0.6)):
                u, g = cfg.n_unicast, cfg.n_groups
                powers = DownlinkPowers.equal_split(
                    cfg.total_power * un_share if u else 0.0, u,
                    cfg.total_power * (1.0 - un_share), g)
                report = validate_closed_form(
                    cfg, fading, pilots_un, pilots_mu, powers, precoder,
                    n_trials=600, seed=9000 + 10 * t_idx + s_idx)
                worst = max(abs(r.z) for r in report.records)
                assert worst <= 3.0, (topo, un_share, precoder, worst)

    @pytest.mark.parametrize("precoder", ["mrt", "zf"])
    def test_mmf_operating_point_end_to_end(self, precoder):
        # Solve the max-min problem, then simulate at exactly its operating
        # point: every multicast UT's empirical SINR must agree with the
        # common optimum value the solver promises.
        from mimocast.allocation import solve_mmf
        cfg, fading = small_system(n_antennas=48, n_unicast=2, group_sizes=(2, 1))
        p_un = 3.0
        sol = solve_mmf(cfg, fading, p_un, precoder)
        cfg_at = dataclasses.replace(cfg, pilot_length=sol.pilot_length)
        pilots_un = [e / sol.pilot_length for e in cfg.unicast_energy_caps]
        powers = DownlinkPowers(unicast=(p_un / 2.0, p_un / 2.0),
                                multicast=sol.downlink_powers)
        report = validate_closed_form(cfg_at, fading, pilots_un,
                                      sol.uplink_pilot_powers, powers, precoder,
                                      n_trials=1000, seed=303)
        assert report.passed
        for rec in report.records:
            if rec.kind == "multicast":
                assert rec.closed_form == pytest.approx(sol.gamma, rel=1e-9)
                assert abs(rec.empirical - sol.gamma) <= 3.0 * rec.ci_halfwidth / 1.96

    def test_misscaled_power_is_detected(self):
        # Injected defect: simulate with an amplitude-1.1 (power 1.21)
        # mis-scaled precoder while the closed form keeps nominal powers.
        # Weak gains make the link noise-limited so the extra power shows
        # up almost fully in the SINR; z-scores must blow up.
        cfg, _ = small_system(n_antennas=64)
        cfg = dataclasses.replace(cfg, total_power=20.0)
        fading = FadingProfile(unicast_gains=(0.05, 0.05),
                               multicast_gains=((0.05, 0.05),))
        pilots_un, pilots_mu = cap_pilots(cfg)
        stats = estimation_variances(cfg, fading, pilots_un, pilots_mu)
        nominal = DownlinkPowers(unicast=(2.0, 1.0), multicast=(3.0,))
        inflated = DownlinkPowers(unicast=(2.42, 1.21), multicast=(3.63,))
        cf = sinr_mrt_multicast(cfg, stats, fading, nominal, 0, 0)
        ts = empirical_sinr(cfg, fading, pilots_un, pilots_mu, inflated, "mrt",
                            "multicast", (0, 0), 8000, 11)
        z = (ts.empirical_sinr - cf) / (ts.confidence_halfwidth / 1.96)
        assert z > 4.0
