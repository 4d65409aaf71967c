"""Acceptance suite: one test per criterion, heavy ensembles shared via
module-scoped fixtures, fixed seeds throughout.

Each criterion appends a PASS/FAIL line to acceptance_report.txt in the
repository root (also printed, visible with -s / -rA or on failure).
"""

import json
import math
import os
import pathlib
import subprocess
import sys
import time

import numpy as np
import pytest

from dosfluct.constants import (
    compute_Ck,
    covariance_constants,
    critical_variance_per_log_n,
    cross_pair_covariance_prediction,
    enumerate_Sk,
)
from dosfluct.experiments import (
    ExperimentConfig,
    build_joint_subsequence,
    run_critical,
    run_dc,
    run_subcritical,
    run_supercritical,
)
from dosfluct.paths import EnvelopeProfile, sample_path
from dosfluct.pruefer import count_interval, fd_count_interval, integrate_theta
from dosfluct.torusfield import (
    TorusFunction,
    random_real_trig_poly,
    resolvent_shifted,
)

pytestmark = pytest.mark.acceptance

COS = TorusFunction.cosine(1)
ZERO = TorusFunction.zero()
HALF_PI = math.pi / 2

REPORT_PATH = pathlib.Path(__file__).resolve().parent.parent / "acceptance_report.txt"

# pre-registered seeds, one per Monte Carlo criterion
SEED_SUBCRITICAL = 101
SEED_CRITICAL = 102
SEED_SUPERCRITICAL = 103
SEED_DC_SUB = 104
SEED_DC_SUPER = 105
SEED_DC_CRIT = 106
SEED_ORACLE = 100
SEED_DETERMINISM = 9

HEADLINE_PAIR = (0.8, 1.3)      # pinned by the criterion
SCALING_PAIR = (0.5, 2.0)
CRITICAL_PAIR = (0.55, 3.0)
SUPER_PAIR = (2.5, 3.5)
DC_CRIT_PAIR = (1.5, 2.5)


def record(lines, text):
    lines.append(text)
    print(text)


@pytest.fixture(scope="module")
def report():
    lines = []
    yield lines
    REPORT_PATH.write_text("\n".join(lines) + "\n")


def check(report_lines, criterion, ok, detail):
    record(report_lines, f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# -- heavy shared runs ---------------------------------------------------------


@pytest.fixture(scope="module")
def subcritical_run():
    cfg = ExperimentConfig(
        model="decaying_potential", regime="subcritical", F=COS, alpha=0.3,
        kappa_pairs=(HEADLINE_PAIR, SCALING_PAIR),
        n_list=(1000, 2000, 4000), t_grid=(0.25, 0.5, 0.75, 1.0),
        paths=400, dt=2e-3, seed=SEED_SUBCRITICAL,
    )
    started = time.monotonic()
    summary = run_subcritical(cfg)
    return summary, time.monotonic() - started


@pytest.fixture(scope="module")
def critical_run():
    cfg = ExperimentConfig(
        model="decaying_potential", regime="critical", F=COS, alpha=0.5,
        kappa_pairs=(CRITICAL_PAIR,), n_list=(1000, 10_000, 100_000),
        t_grid=(1.0,), paths=300, dt=5e-3, seed=SEED_CRITICAL,
    )
    started = time.monotonic()
    summary = run_critical(cfg)
    return summary, time.monotonic() - started


@pytest.fixture(scope="module")
def supercritical_run():
    s1, s2 = build_joint_subsequence(SUPER_PAIR[0], HALF_PI, SUPER_PAIR[1], HALF_PI,
                                     count=12, n_max=10_000, n_min=2500)
    cfg = ExperimentConfig(
        model="decaying_potential", regime="supercritical", F=COS, alpha=0.8,
        kappa_pairs=(SUPER_PAIR,), n_list=(10_000,), t_grid=(1.0,),
        paths=200, dt=2e-3, seed=SEED_SUPERCRITICAL,
    )
    started = time.monotonic()
    summary = run_supercritical(cfg, s1, s2)
    return summary, time.monotonic() - started


@pytest.fixture(scope="module")
def dc_runs():
    out = {}
    cfg = ExperimentConfig(
        model="dc", regime="subcritical", F=COS, alpha=0.3,
        kappa_pairs=(SCALING_PAIR,), n_list=(4000,), t_grid=(1.0,),
        paths=400, dt=2e-3, seed=SEED_DC_SUB,
    )
    out["sub"] = run_dc(cfg)

    s1, s2 = build_joint_subsequence(SUPER_PAIR[0], HALF_PI, SUPER_PAIR[1], HALF_PI,
                                     count=6, n_max=2000, n_min=500)
    cfg = ExperimentConfig(
        model="dc", regime="supercritical", F=COS, alpha=0.8,
        kappa_pairs=(SUPER_PAIR,), n_list=(2000,), t_grid=(1.0,),
        paths=400, dt=1e-2, seed=SEED_DC_SUPER,
    )
    out["super"] = run_dc(cfg, s1, s2)

    s1, s2 = build_joint_subsequence(DC_CRIT_PAIR[0], HALF_PI, DC_CRIT_PAIR[1], HALF_PI,
                                     count=8, n_max=2500, n_min=400)
    cfg = ExperimentConfig(
        model="dc", regime="critical", F=COS, alpha=0.5,
        kappa_pairs=(DC_CRIT_PAIR,), n_list=(2500,), t_grid=(1.0,),
        paths=400, dt=1e-2, seed=SEED_DC_CRIT,
    )
    out["crit"] = run_dc(cfg, s1, s2)
    return out


# -- criteria ------------------------------------------------------------------


def test_criterion_1_resolvent_identity(report):
    started = time.monotonic()
    rng = np.random.default_rng(20240901)
    worst = 0.0
    for _ in range(100):
        h = random_real_trig_poly(rng, max_degree=8)
        kappa = float(rng.uniform(0.05, 5.0))
        beta = int(rng.choice([2, 4, 6, 8]))
        out = resolvent_shifted(h, kappa, beta)
        back = TorusFunction(
            {k: (-0.5 * k * k + 1j * beta * kappa) * c for k, c in out.coeffs.items()}
        )
        worst = max(worst, back.max_abs_coeff_diff(h))
    elapsed = time.monotonic() - started
    check(report, 1, worst < 1e-12 and elapsed < 1.0,
          f"max resolvent residual {worst:.2e} over 100 random polynomials "
          f"({elapsed:.2f}s)")


def test_criterion_2_drift_constants(report):
    started = time.monotonic()
    motzkin = [1, 1, 2, 4, 9, 21, 51]
    counts = [len(enumerate_Sk(k)) for k in range(1, 8)]
    ok = counts == motzkin

    # hand-coded instances of the two displayed compositions, independent of
    # the enumeration machinery
    from dosfluct.torusfield import mean, multiply

    def t_pm(F, h, beta, kappa):
        return multiply(F, resolvent_shifted(h, kappa, beta)).scale(
            -1j * beta / (2 * kappa) * 0.5)

    def t_0(F, h, beta, kappa):
        return multiply(F, resolvent_shifted(h, kappa, beta)).scale(
            1j * beta / (2 * kappa))

    worst = 0.0
    for F in (COS, TorusFunction.cosine(1) + TorusFunction.cosine(2, 0.5)):
        for kappa in (0.5, 1.0, 1.7):
            table = compute_Ck(F, kappa, 3)
            c2 = mean(t_pm(F, t_0(F, F, 2, kappa), 2, kappa))
            c3 = mean(t_pm(F, t_pm(F, t_pm(F, F, 2, kappa), 4, kappa), 2, kappa)) \
                + mean(t_pm(F, t_0(F, t_0(F, F, 2, kappa), 2, kappa), 2, kappa))
            worst = max(worst, abs(table[2] - c2), abs(table[3] - c3))
    ok = ok and worst < 1e-12

    worst_c1 = max(
        abs(compute_Ck(COS, kappa, 1)[1].real + 2.0 / (16 * kappa**2 + 1))
        for kappa in (0.3, 0.8, 1.0, 1.3, 2.5)
    )
    ok = ok and worst_c1 < 1e-12
    elapsed = time.monotonic() - started
    check(report, 2, ok and elapsed < 1.0,
          f"Motzkin counts {counts}, C2/C3 vs hand formulas {worst:.2e}, "
          f"Re C1 closed form {worst_c1:.2e} ({elapsed:.2f}s)")


def test_criterion_3_covariance_constants(report):
    worst_k = max(
        abs(covariance_constants(COS, [k]).sigma2_of_kappa[k]
            - 2.0 / (1.0 + 16.0 * k * k))
        for k in (0.5, 0.8, 1.0, 1.3, 3.0)
    )
    worst_0 = abs(covariance_constants(COS, [1.0]).sigma2_zero - 2.0)
    check(report, 3, worst_k < 1e-12 and worst_0 < 1e-12,
          f"corrector energies vs closed forms: kappa {worst_k:.2e}, zero {worst_0:.2e}")


def test_criterion_4_counting_oracles(report):
    started = time.monotonic()
    env1 = EnvelopeProfile.constant(1.0)

    # free case, exact floors
    path = sample_path(10.0, 1e-2, (1, 0))
    t1 = integrate_theta(path, env1, 1.0, F=ZERO)
    t2 = integrate_theta(path, env1, 2.0, F=ZERO)
    free_ok = count_interval(t1, t2, 10.0).count == (
        math.floor(20 / math.pi) - math.floor(10 / math.pi)) == 3

    # constant potential, exact zero spacing pi/sqrt{k^2-q}
    path = sample_path(100.0, 1e-3, (2, 0))
    const_ok = True
    for q, kappa, n in ((0.5, 1.0, 100.0), (0.25, 1.5, 100.0)):
        traj = integrate_theta(path, env1, kappa, F=TorusFunction.constant(q))
        expected = math.floor(n * math.sqrt(kappa**2 - q) / math.pi)
        const_ok = const_ok and math.floor(traj.final_theta() / math.pi) == expected

    # cross-method on 20 seeded paths
    env = EnvelopeProfile.power_decay(0.3)
    n, dt = 100.0, 1e-3
    k1, k2 = 0.8, 1.3
    base_ok = 0
    refined_equal = 0
    for idx in range(20):
        path = sample_path(n, dt, (SEED_ORACLE, idx))
        c_pr = count_interval(
            integrate_theta(path, env, k1, F=COS),
            integrate_theta(path, env, k2, F=COS), n).count
        c_fd = fd_count_interval(path, env, n, dt, k1**2, k2**2, F=COS)
        if abs(c_pr - c_fd) <= 1:
            base_ok += 1
        c_pr2 = count_interval(
            integrate_theta(path, env, k1, substeps=2, F=COS),
            integrate_theta(path, env, k2, substeps=2, F=COS), n).count
        c_fd2 = fd_count_interval(path, env, n, dt / 2, k1**2, k2**2, F=COS)
        if c_pr2 == c_fd2:
            refined_equal += 1
    elapsed = time.monotonic() - started
    ok = (free_ok and const_ok and base_ok == 20 and refined_equal >= 18
          and elapsed < 60.0)
    check(report, 4, ok,
          f"free exact {free_ok}, constant-q exact {const_ok}, "
          f"|pruefer-fd|<=1 on {base_ok}/20, refined equal {refined_equal}/20 "
          f"({elapsed:.1f}s)")


def test_criterion_5_subcritical_headline(report, subcritical_run):
    summary, elapsed = subcritical_run
    cell = summary.cell(HEADLINE_PAIR, 4000, 1.0)
    mean_ok = abs(cell.mean) <= 3 * cell.mean_se
    ratio = cell.variance / cell.predicted_variance
    var_ok = abs(ratio - 1.0) <= 0.20
    stats = cell.normality
    shape_ok = abs(stats.skewness) < 0.3 and abs(stats.excess_kurtosis) < 0.6
    runtime_ok = elapsed <= 15 * 60
    check(report, 5, mean_ok and var_ok and shape_ok and runtime_ok,
          f"drift dev {cell.mean / cell.mean_se:+.2f} SE, variance/prediction "
          f"{ratio:.3f}, skew {stats.skewness:+.3f}, kurtosis "
          f"{stats.excess_kurtosis:+.3f} ({elapsed:.0f}s, 400 paths, n=4000)")


def test_criterion_6_subcritical_scaling(report, subcritical_run):
    summary, _ = subcritical_run
    key = f"variance_exponent_{SCALING_PAIR[0]}_{SCALING_PAIR[1]}"
    reg = summary.regressions[key]
    ok = abs(reg["exponent"] - 0.4) < 0.1
    check(report, 6, ok,
          f"variance exponent {reg['exponent']:.3f} vs 1-2a=0.4 "
          f"(r2={reg['r2']:.4f}, n in 1000/2000/4000)")


def test_criterion_7_critical(report, critical_run):
    summary, elapsed = critical_run
    cell = summary.cell(CRITICAL_PAIR, 100_000, 1.0)
    ratio = cell.variance / cell.predicted_variance
    var_ok = abs(ratio - 1.0) <= 0.25
    drift_ok = abs(cell.mean) <= 3 * cell.mean_se
    runtime_ok = elapsed <= 30 * 60
    check(report, 7, var_ok and drift_ok and runtime_ok,
          f"variance/log n over prediction {ratio:.3f} at n=1e5, drift dev "
          f"{cell.mean / cell.mean_se:+.2f} SE vs arcsinh(n) centering "
          f"({elapsed:.0f}s, 300 paths)")


def test_criterion_8_supercritical(report, supercritical_run):
    summary, elapsed = supercritical_run
    rep = summary.supercritical
    tail_ok = rep.fraction_tail_ok >= 0.95
    id_ok = rep.fraction_identity_ok >= 0.95
    check(report, 8, tail_ok and id_ok,
          f"tail oscillation < {rep.tail_threshold} for "
          f"{100 * rep.fraction_tail_ok:.1f}% of paths (scale estimate "
          f"{rep.tail_scale_estimate:.3f}), integer identity at last "
          f"{rep.identity_window} members for {100 * rep.fraction_identity_ok:.1f}% "
          f"({elapsed:.0f}s, 200 paths, n_K=1e4)")


def test_criterion_9_dc_model(report, dc_runs):
    sub = dc_runs["sub"].cells[0]
    ratio = sub.variance / sub.predicted_variance
    sub_ok = abs(ratio - 1.0) <= 0.20
    sup = dc_runs["super"].supercritical
    sup_ok = sup.fraction_zero_discrepancy >= 0.95
    crit = dc_runs["crit"].dc_critical
    crit_ok = crit.tv_distance < 0.1
    check(report, 9, sub_ok and sup_ok and crit_ok,
          f"dc variance/prediction {ratio:.3f} at n=4000; zero-discrepancy "
          f"{100 * sup.fraction_zero_discrepancy:.1f}%; discrepancy-law TV drift "
          f"{crit.tv_distance:.3f} between members {crit.compare_members}")


def test_criterion_10_determinism(report, tmp_path):
    config = {
        "model": "decaying_potential", "regime": "subcritical", "F": "cos",
        "alpha": 0.3, "kappas": [[0.8, 1.3]], "n_list": [200],
        "t_grid": [1.0], "paths": 8, "dt": 0.005,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    blobs = []
    for tag, workers in (("w1", "1"), ("w2", "2"), ("w1b", "1")):
        out = tmp_path / tag
        env = {**os.environ, "NUMBA_NUM_THREADS": "2", "DOSFLUCT_WORKERS": workers}
        res = subprocess.run(
            [sys.executable, "-m", "dosfluct.cli", "experiment",
             "--config", str(cfg_path), "--seed", str(SEED_DETERMINISM),
             "--out-dir", str(out)],
            env=env, capture_output=True, text=True, timeout=900,
        )
        assert res.returncode == 0, res.stderr
        blobs.append(b"".join((out / name).read_bytes()
                              for name in ("summary.json", "samples.csv",
                                           "plotdata.csv")))
    ok = blobs[0] == blobs[1] == blobs[2]
    check(report, 10, ok,
          "summary/samples/plotdata byte-identical across reruns and worker "
          "counts 1 vs 2")


# -- cross-checks attached to the shared ensembles ------------------------------


def test_extra_cross_pair_covariance(report, subcritical_run):
    summary, _ = subcritical_run
    paths = summary.config.paths
    worst = 0.0
    for cp in summary.cross_pairs:
        if cp.n == 4000 and cp.t == 1.0:
            dev = abs(cp.covariance - cp.prediction) / cp.covariance_se
            worst = max(worst, dev)
            cell_a = summary.cell(cp.pair_a, cp.n, cp.t)
            cell_b = summary.cell(cp.pair_b, cp.n, cp.t)
            resid = abs(cp.covariance - cp.prediction) / math.sqrt(
                cell_a.variance * cell_b.variance)
            assert resid < 3.0 / math.sqrt(paths)
    record(report, f"extra: cross-pair covariance within {worst:.2f} SE of the "
                   "shared-field prediction")
    assert worst <= 3.0


def test_extra_time_covariance_structure(report, subcritical_run):
    summary, _ = subcritical_run
    worst = 0.0
    for tc in summary.time_covariances:
        if tc.n == 4000 and (tc.kappa1, tc.kappa2) == HEADLINE_PAIR:
            worst = max(worst, abs(tc.covariance - tc.prediction) / tc.covariance_se)
    record(report, f"extra: (t^s)^(1-2a) covariance structure within {worst:.2f} SE")
    assert worst <= 3.0
