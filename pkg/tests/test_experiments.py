import math

import numpy as np
import pytest

from dosfluct.engine import simulate_theta_checkpoints
from dosfluct.errors import ConfigError, DomainError
from dosfluct.experiments import (
    ExperimentConfig,
    SubsequenceSpec,
    build_joint_subsequence,
    build_subsequence,
    default_D,
    normality_stats,
    run_critical,
    run_dc,
    run_subcritical,
    run_supercritical,
    scaling_regression,
)
from dosfluct.paths import EnvelopeProfile, sample_path
from dosfluct.pruefer import integrate_theta
from dosfluct.torusfield import TorusFunction

COS = TorusFunction.cosine(1)
ZERO = TorusFunction.zero()


def make_config(**over):
    base = dict(
        model="decaying_potential",
        regime="subcritical",
        F=COS,
        alpha=0.3,
        kappa_pairs=((0.8, 1.3),),
        n_list=(200,),
        t_grid=(1.0,),
        paths=40,
        dt=5e-3,
        seed=7,
    )
    base.update(over)
    return ExperimentConfig(**base)


class TestDefaultD:
    @pytest.mark.parametrize("alpha,expected", [
        (0.45, 1), (0.3, 1), (0.25, 2), (0.2, 2), (0.15, 3), (0.1, 5),
    ])
    def test_values(self, alpha, expected):
        assert default_D(alpha) == expected


class TestConfigValidation:
    def test_regime_alpha_consistency(self):
        with pytest.raises(ConfigError, match="inconsistent"):
            make_config(regime="critical")
        with pytest.raises(ConfigError, match="inconsistent"):
            make_config(regime="supercritical", alpha=0.3)
        make_config(regime="critical", alpha=0.5)
        make_config(regime="supercritical", alpha=0.8)

    def test_paths_floor(self):
        with pytest.raises(ConfigError, match="paths"):
            make_config(paths=1)

    def test_pair_ordering(self):
        with pytest.raises(ConfigError, match="kappa pair"):
            make_config(kappa_pairs=((1.3, 0.8),))

    def test_alpha_xor_delta(self):
        with pytest.raises(ConfigError):
            make_config(alpha=None)
        with pytest.raises(ConfigError):
            make_config(delta=1.0)

    def test_default_D_filled(self):
        assert make_config(alpha=0.3).D == 1
        assert make_config(alpha=0.2).D == 2

    def test_mean_zero_F_required(self):
        with pytest.raises(ConfigError, match="mean-zero"):
            make_config(F=TorusFunction.constant(1.0) + COS)

    def test_t_grid_range(self):
        with pytest.raises(ConfigError, match="t_grid"):
            make_config(t_grid=(0.5, 1.5))


class TestNormalityStats:
    def test_gaussian_self_test(self):
        rng = np.random.default_rng(2)
        s = normality_stats(rng.standard_normal(10_000), predicted_variance=1.0)
        assert abs(s.skewness) < 0.08
        assert abs(s.excess_kurtosis) < 0.16
        assert not s.degenerate

    def test_degenerate(self):
        s = normality_stats(np.ones(50))
        assert s.degenerate

    def test_shifted_gaussian_detected(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal(1000) + 0.5
        s = normality_stats(samples, predicted_variance=1.0)
        assert s.ks_statistic > 1.63 / math.sqrt(1000)

    def test_sample_floor(self):
        with pytest.raises(DomainError):
            normality_stats(np.zeros(10))


class TestScalingRegression:
    def test_exact_power_law(self):
        ns = np.array([100.0, 200.0, 400.0, 800.0])
        reg = scaling_regression(ns, ns**0.4, mode="power")
        assert reg.exponent == pytest.approx(0.4, abs=1e-12)
        assert reg.r2 == pytest.approx(1.0, abs=1e-12)

    def test_log_mode_slope(self):
        ns = np.array([1e2, 1e3, 1e4])
        reg = scaling_regression(ns, 3.0 * np.log(ns) + 1.0, mode="log")
        assert reg.exponent == pytest.approx(3.0, abs=1e-10)

    def test_two_points_rejected(self):
        with pytest.raises(DomainError):
            scaling_regression([1.0, 2.0], [1.0, 2.0])

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            scaling_regression([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


class TestBuildSubsequence:
    def test_rational_even(self):
        spec = build_subsequence(math.pi / 2, 0.0, 5, 100)
        assert spec.members == (2, 4, 6, 8, 10)
        assert all(abs(r) < 1e-9 for r in spec.residues)

    def test_rational_odd(self):
        spec = build_subsequence(math.pi / 2, math.pi / 2, 5, 100)
        assert spec.members == (1, 3, 5, 7, 9)
        assert all(abs(r - math.pi / 2) < 1e-9 for r in spec.residues)

    def test_irrational_scan(self):
        spec = build_subsequence(1.0, 0.5, 20, 100_000)
        assert len(spec.members) == 20
        assert spec.tolerance <= 1e-3
        assert list(spec.members) == sorted(spec.members)

    def test_shortfall_reported(self):
        spec = build_subsequence(1.0, 0.5, 10, 50, tolerance=1e-4)
        assert spec.shortfall > 0

    def test_joint_shared_members(self):
        s1, s2 = build_joint_subsequence(1.0, 0.5, 1.7, 1.0, 10, 20_000)
        assert s1.members == s2.members
        assert s1.tolerance < 0.2 and s2.tolerance < 0.2

    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            build_subsequence(1.0, math.pi, 5, 100)


class TestEngineConsistency:
    def test_engine_matches_dense_integration_exactly(self):
        env = EnvelopeProfile.power_decay(0.3)
        kappas = [0.8, 1.3]
        dt = 1e-2
        theta = simulate_theta_checkpoints(COS, env, kappas, dt, [2.0, 5.0],
                                           paths=3, seed=99, chunk_steps=64)
        for p in range(3):
            path = sample_path(5.0, dt, (99, p))
            for j, kappa in enumerate(kappas):
                traj = integrate_theta(path, env, kappa, F=COS)
                i2 = int(round(2.0 / dt))
                assert traj.theta[i2] == theta[p, j, 0]
                assert traj.theta[-1] == theta[p, j, 1]

    def test_checkpoint_validation(self):
        env = EnvelopeProfile.power_decay(0.3)
        with pytest.raises(DomainError):
            simulate_theta_checkpoints(COS, env, [1.0], 1e-2, [0.505], 2, 0)
        with pytest.raises(DomainError):
            simulate_theta_checkpoints(COS, env, [1.0], 1e-2, [2.0, 1.0], 2, 0)

    def test_chunking_invariance(self):
        env = EnvelopeProfile.power_decay(0.5)
        a = simulate_theta_checkpoints(COS, env, [1.0], 1e-2, [3.0], 2, 5,
                                       chunk_steps=7)
        b = simulate_theta_checkpoints(COS, env, [1.0], 1e-2, [3.0], 2, 5,
                                       chunk_steps=300)
        assert np.array_equal(a, b)


class TestRunSubcritical:
    def test_free_case_degenerate(self):
        cfg = make_config(F=ZERO, n_list=(10_000,), paths=4, dt=1e-2)
        summary = run_subcritical(cfg)
        cell = summary.cells[0]
        assert cell.predicted_variance == 0.0
        assert cell.variance < 1e-3
        assert np.all(np.abs(cell.normalized) <= 1.0 / 10_000 ** 0.2 + 1e-12)

    def test_smoke_structure_and_predictions(self):
        cfg = make_config(n_list=(150, 300), t_grid=(0.5, 1.0), paths=60,
                          kappa_pairs=((0.8, 1.3), (0.4, 1.6)))
        summary = run_subcritical(cfg)
        assert len(summary.cells) == 2 * 2 * 2
        cell = summary.cell((0.8, 1.3), 300, 1.0)
        assert cell.normalization == pytest.approx(300 ** 0.2)
        assert cell.predicted_variance > 0
        assert cell.raw_counts.shape == (60,)
        # leading term dominates: all counts near nt(k2-k1)/pi
        assert np.all(np.abs(cell.raw_counts - cell.leading_term) < 40)
        assert len(summary.cross_pairs) == 4
        assert len(summary.time_covariances) == 2 * 2
        for tc in summary.time_covariances:
            assert tc.prediction > 0

    def test_determinism(self):
        cfg = make_config(paths=8)
        a = run_subcritical(cfg)
        b = run_subcritical(cfg)
        assert a.to_json_obj() == b.to_json_obj()
        assert np.array_equal(a.cells[0].raw_counts, b.cells[0].raw_counts)

    def test_regime_guard(self):
        cfg = make_config(regime="critical", alpha=0.5)
        with pytest.raises(ConfigError):
            run_subcritical(cfg)


class TestRunCritical:
    def test_smoke(self):
        cfg = make_config(regime="critical", alpha=0.5, n_list=(100, 200, 400),
                          paths=50, dt=5e-3)
        summary = run_critical(cfg)
        assert len(summary.cells) == 3
        cell = summary.cell((0.8, 1.3), 400, 1.0)
        assert cell.normalization == pytest.approx(math.sqrt(math.log(400)))
        key = "variance_per_log_n_0.8_1.3"
        assert key in summary.regressions
        assert summary.regressions[key]["expected"] > 0
        assert "drift_coefficient_0.8_1.3" in summary.notes

    def test_dc_rejected(self):
        cfg = make_config(model="dc", regime="critical", alpha=0.5)
        with pytest.raises(ConfigError):
            run_critical(cfg)


class TestRunSupercritical:
    def test_free_case_identity_exact(self):
        # kappa1 = pi/2, kappa2 = 3pi/2 on odd boxes: residues are pi/2 for
        # both, the phase correction vanishes, and the identity holds exactly
        k1, k2 = math.pi / 2, 3 * math.pi / 2
        s1, s2 = build_joint_subsequence(k1, math.pi / 2, k2, math.pi / 2, 8, 40)
        assert all(n % 2 == 1 for n in s1.members)
        cfg = make_config(regime="supercritical", alpha=0.8, F=ZERO,
                          kappa_pairs=((k1, k2),), paths=3, dt=1e-2,
                          n_list=(40,))
        summary = run_supercritical(cfg, s1, s2)
        rep = summary.supercritical
        assert rep.fraction_identity_ok == 1.0
        assert rep.fraction_tail_ok == 1.0
        assert np.all(rep.discrepancies == 0)

    def test_random_smoke(self):
        s1, s2 = build_joint_subsequence(1.5, 1.0, 2.0, 1.0, 6, 400)
        cfg = make_config(regime="supercritical", alpha=0.8,
                          kappa_pairs=((1.5, 2.0),), paths=20, dt=5e-3,
                          n_list=(400,))
        summary = run_supercritical(cfg, s1, s2)
        rep = summary.supercritical
        assert 0.0 <= rep.fraction_identity_ok <= 1.0
        assert rep.tail_scale_estimate > 0
        assert rep.discrepancies.shape == (20, 6)

    def test_kappa_mismatch(self):
        s1, s2 = build_joint_subsequence(1.5, 1.0, 2.0, 1.0, 4, 200)
        cfg = make_config(regime="supercritical", alpha=0.8,
                          kappa_pairs=((1.4, 2.0),), paths=4, n_list=(200,))
        with pytest.raises(ConfigError, match="do not match"):
            run_supercritical(cfg, s1, s2)


class TestRunDc:
    def test_subcritical_smoke(self):
        cfg = make_config(model="dc", n_list=(200,), paths=40)
        summary = run_dc(cfg)
        cell = summary.cells[0]
        # dc drift: constant coupling integral lam^(j+1) * nt
        lam = 200.0 ** -0.3
        assert cell.drift != 0.0
        assert abs(cell.drift) < 1.0
        assert cell.predicted_variance > 0
        env = cfg.envelope_for(200)
        assert env.power_integral(2, 200.0) == pytest.approx(lam**2 * 200.0)

    def test_critical_stabilization_report(self):
        s1, s2 = build_joint_subsequence(1.5, 1.0, 2.0, 1.0, 6, 300)
        cfg = make_config(model="dc", regime="critical", alpha=0.5,
                          kappa_pairs=((1.5, 2.0),), paths=60, dt=5e-3,
                          n_list=(300,))
        summary = run_dc(cfg, s1, s2)
        rep = summary.dc_critical
        assert 0.0 <= rep.tv_distance <= 1.0
        assert len(rep.pmfs) == 2
        assert rep.discrepancies.shape == (60, 6)

    def test_supercritical_needs_nonzero_gamma(self):
        s1, s2 = build_joint_subsequence(1.5, 0.0, 2.0, 1.0, 4, 200)
        cfg = make_config(model="dc", regime="supercritical", alpha=0.8,
                          kappa_pairs=((1.5, 2.0),), paths=4, n_list=(200,))
        with pytest.raises(ConfigError, match="gamma != 0"):
            run_dc(cfg, s1, s2)

    def test_free_case_zero_discrepancy(self):
        k1, k2 = math.pi / 2, 3 * math.pi / 2
        s1, s2 = build_joint_subsequence(k1, math.pi / 2, k2, math.pi / 2, 6, 30)
        cfg = make_config(model="dc", regime="supercritical", alpha=0.8, F=ZERO,
                          kappa_pairs=((k1, k2),), paths=3, dt=1e-2,
                          n_list=(30,))
        summary = run_dc(cfg, s1, s2)
        assert summary.supercritical.fraction_zero_discrepancy == 1.0
