"""Tests for the two-phase fitting pipeline and its objective/metrics."""

import numpy as np
import pytest

from repscale import (
    AddPenalty1,
    AddPenalty4,
    ChinchillaParams,
    FitConfig,
    LawSpec,
    RunRecord,
    RunPoint,
    SyntheticSpec,
    compute_metrics,
    fit_phase2,
    generate_synthetic,
    huber_log_objective,
    preset_grid,
)
from repscale.errors import IdentifiabilityError, InsufficientDataError
from repscale.fit import fit_phase1, huber
from repscale.reference import STANDARD_WD_ADD4_SPEC, STANDARD_WD_BASE

# A trimmed start grid keeps the unit tests fast; the full default grid is
# exercised by the acceptance suite.
FAST_PHASE1 = FitConfig(
    init_grid={
        "E": (1.5, 2.0),
        "A": (1e2, 1e3),
        "alpha": (0.25, 0.4),
        "B": (1e3, 1e4),
        "beta": (0.4,),
    }
)


def synth_records(spec, preset, sigma=0.0, seed=0):
    ds = generate_synthetic(
        SyntheticSpec(generating_law=spec, grid=preset_grid(preset), noise_sigma=sigma, seed=seed)
    )
    return list(ds.records)


def rel_err(a, b):
    return abs(a - b) / abs(b)


def test_huber_values():
    delta = 0.1
    # Quadratic inside the corridor, linear outside, continuous at the joint.
    assert huber(np.array([0.05]), delta)[0] == pytest.approx(0.00125, rel=1e-15)
    assert huber(np.array([0.1]), delta)[0] == pytest.approx(0.005, rel=1e-15)
    # |r| = 2*delta lands at delta*(2*delta - delta/2) = 1.5*delta^2.
    assert huber(np.array([0.2]), delta)[0] == pytest.approx(1.5 * delta**2, rel=1e-15)
    assert huber(np.array([-0.2]), delta)[0] == pytest.approx(1.5 * delta**2, rel=1e-15)


def test_objective_zero_on_exact_data():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi")
    assert huber_log_objective(STANDARD_WD_ADD4_SPEC, runs) <= 1e-12


def test_objective_permutation_invariant():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi", sigma=0.02, seed=4)
    fwd = huber_log_objective(STANDARD_WD_ADD4_SPEC, runs)
    rev = huber_log_objective(STANDARD_WD_ADD4_SPEC, runs[::-1])
    assert fwd == pytest.approx(rev, rel=1e-15)


def test_metrics_perfect_fit():
    runs = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single")
    m = compute_metrics(LawSpec(base=STANDARD_WD_BASE), runs)
    assert m["r2_all"] == pytest.approx(1.0, abs=1e-12)
    assert m["r2_single"] == pytest.approx(1.0, abs=1e-12)
    assert m["r2_multi"] is None  # no multi-epoch runs in this sweep
    assert m["huber"] <= 1e-15


def test_metrics_constant_predictor_r2_zero():
    # Predictions collapse to ~E when A and B are negligible; choosing E as
    # the sample mean makes R^2 vanish by construction.
    losses = [3.0, 3.2, 3.4, 3.6]
    runs = [RunRecord(point=RunPoint(1e8, 1e9, 1), loss=l) for l in losses]
    flat = ChinchillaParams(E=float(np.mean(losses)), A=1e-280, alpha=0.5, B=1e-280, beta=0.5)
    m = compute_metrics(LawSpec(base=flat), runs)
    assert m["r2_all"] == pytest.approx(0.0, abs=1e-9)


def test_metrics_degenerate_subsets_are_none():
    one = [RunRecord(point=RunPoint(1e8, 1e9, 2), loss=3.0)]
    m = compute_metrics(STANDARD_WD_ADD4_SPEC, one)
    assert m["r2_single"] is None  # empty subset
    assert m["r2_multi"] is None  # single point has zero variance
    two_equal = one + [RunRecord(point=RunPoint(2e8, 5e8, 2), loss=3.0)]
    assert compute_metrics(STANDARD_WD_ADD4_SPEC, two_equal)["r2_multi"] is None


def test_phase1_rejects_multi_epoch_and_tiny_samples():
    multi = [RunRecord(point=RunPoint(1e8, 1e9, 2), loss=3.0)] * 8
    with pytest.raises(ValueError):
        fit_phase1(multi)
    few = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single")[:5]
    with pytest.raises(InsufficientDataError):
        fit_phase1(few)


def test_phase1_noiseless_recovery():
    runs = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single")
    report = fit_phase1(runs, FAST_PHASE1)
    got = report.spec.base
    for name in ("E", "A", "alpha", "B", "beta"):
        assert rel_err(getattr(got, name), getattr(STANDARD_WD_BASE, name)) < 0.01
    assert report.objective < 1e-10
    assert report.n_single == len(runs) and report.n_multi == 0
    assert report.metrics["r2_all"] > 0.9999


def test_phase1_duplication_invariance():
    # The mean objective is unchanged by duplicating every record, up to
    # floating-point summation order, so the optimum is too.
    runs = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single", sigma=0.01, seed=2)
    a = fit_phase1(runs, FAST_PHASE1).spec.base
    b = fit_phase1(runs + runs, FAST_PHASE1).spec.base
    for name in ("E", "A", "alpha", "B", "beta"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-4)


def test_phase1_beats_truth_on_noisy_data():
    runs = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single", sigma=0.01, seed=3)
    report = fit_phase1(runs, FAST_PHASE1)
    at_truth = huber_log_objective(LawSpec(base=STANDARD_WD_BASE), runs)
    assert report.objective <= at_truth + 1e-15


def test_phase2_noiseless_recovery_add1():
    truth = LawSpec(base=STANDARD_WD_BASE, rep=AddPenalty1(p=0.02305))
    runs = synth_records(truth, "grid-std-multi")
    report = fit_phase2(STANDARD_WD_BASE, "add1", runs)
    assert rel_err(report.spec.rep.p, 0.02305) < 1e-6
    assert report.objective < 1e-12


def test_phase2_noiseless_recovery_add4():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi")
    report = fit_phase2(STANDARD_WD_BASE, "add4", runs)
    rep = report.spec.rep
    truth = STANDARD_WD_ADD4_SPEC.rep
    assert rel_err(rep.p, truth.p) < 1e-3
    assert rel_err(rep.delta, truth.delta) < 1e-6
    assert rel_err(rep.kappa, truth.kappa) < 1e-6
    assert rel_err(rep.gamma, truth.gamma) < 1e-6


def test_phase2_noiseless_recovery_exp_decay():
    from repscale import ExpDecayData

    truth = LawSpec(base=STANDARD_WD_BASE, rep=ExpDecayData(r_star_d=7.756))
    runs = synth_records(truth, "grid-std-multi")
    report = fit_phase2(STANDARD_WD_BASE, "exp-decay", runs)
    assert rel_err(report.spec.rep.r_star_d, 7.756) < 1e-6


def test_phase2_base_is_locked():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi", sigma=0.02, seed=9)
    report = fit_phase2(STANDARD_WD_BASE, "add4", runs)
    assert report.spec.base == STANDARD_WD_BASE


def test_phase2_chinchilla_is_metrics_only():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi")
    report = fit_phase2(STANDARD_WD_BASE, "chinchilla", runs)
    assert report.spec.rep.kind == "chinchilla"
    assert report.starts_tried == 0
    assert report.objective == pytest.approx(
        huber_log_objective(LawSpec(base=STANDARD_WD_BASE), runs), rel=1e-15
    )


def test_phase2_unidentifiable_without_repetition():
    single = synth_records(LawSpec(base=STANDARD_WD_BASE), "grid-std-single")
    with pytest.raises(IdentifiabilityError):
        fit_phase2(STANDARD_WD_BASE, "add1", single)


def test_phase2_unknown_variant():
    runs = synth_records(STANDARD_WD_ADD4_SPEC, "grid-std-multi")
    with pytest.raises(ValueError):
        fit_phase2(STANDARD_WD_BASE, "add3", runs)


def test_phase2_error_grows_with_noise():
    # Median recovery error of the one-parameter penalty must not improve
    # as the observation noise grows.
    truth = LawSpec(base=STANDARD_WD_BASE, rep=AddPenalty1(p=0.02305))
    medians = []
    for sigma in (0.0, 0.005, 0.02, 0.08):
        errs = []
        for seed in range(5):
            runs = synth_records(truth, "grid-std-multi", sigma=sigma, seed=seed)
            report = fit_phase2(STANDARD_WD_BASE, "add1", runs)
            errs.append(rel_err(report.spec.rep.p, 0.02305))
        medians.append(float(np.median(errs)))
    assert all(b >= a for a, b in zip(medians, medians[1:]))


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(huber_delta=0.0)
    with pytest.raises(ValueError):
        RunRecord(point=RunPoint(1e8, 1e9, 1), loss=-1.0)
