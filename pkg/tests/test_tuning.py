import json
import math

import numpy as np
import pytest

from satsynth.errors import InfeasibleError, ValidationError
from satsynth.table import CellSizeDistribution
from satsynth.taumetrics import tau1_expected, tau4_expected
from satsynth.tuning import (
    TargetKind,
    TuningTarget,
    alpha_star_match_zeros,
    solve,
    solve_alpha_for_tau4_target,
)

HALF = CellSizeDistribution.from_proportions({0: 0.5, 1: 0.5})


def test_poisson_zero_match_closed_form():
    alpha = alpha_star_match_zeros(HALF, "poisson", 0.0)
    assert alpha == pytest.approx(-math.log(1 - math.exp(-1)), rel=1e-12)
    assert alpha == pytest.approx(0.458675, abs=1e-6)


def test_nbi_zero_match_hand_value():
    # s = (1/0.5) * (1+1)^(-1) * 0.5 = 0.5; alpha* = (1-s)^(-1) - 1 = 1
    assert alpha_star_match_zeros(HALF, "nbi", 1.0) == pytest.approx(1.0, rel=1e-12)


def test_zero_match_with_no_nonzero_cells():
    empty = CellSizeDistribution.from_proportions({0: 1.0})
    for fam, sigma in (("poisson", 0.0), ("nbi", 2.0), ("pig", 2.0)):
        assert alpha_star_match_zeros(empty, fam, sigma) == 0.0


def test_zero_match_roundtrip_random_distributions():
    rng = np.random.default_rng(12)
    for trial in range(50):
        support = rng.integers(1, 9)
        props = rng.dirichlet(np.ones(support + 1))
        props[0] = props[0] + 0.5  # keep plenty of zeros so targets are feasible
        props /= props.sum()
        dist = CellSizeDistribution.from_proportions(
            {k: float(p) for k, p in enumerate(props)}
        )
        for fam, sigma in (("poisson", 0.0), ("nbi", 0.7), ("pig", 1.3)):
            alpha = alpha_star_match_zeros(dist, fam, sigma)
            assert alpha >= 0.0
            t10 = tau1_expected(dist, fam, sigma, alpha, 0)
            assert t10 == pytest.approx(dist.proportion(0), abs=1e-10), (fam, trial)


def test_zero_match_infeasible_no_zeros():
    with pytest.raises(InfeasibleError, match="tau2"):
        alpha_star_match_zeros(CellSizeDistribution.from_proportions({1: 1.0}), "poisson")


def test_zero_match_infeasible_too_few_zeros():
    thin = CellSizeDistribution.from_proportions({0: 0.01, 1: 0.99})
    with pytest.raises(InfeasibleError, match="shrink"):
        alpha_star_match_zeros(thin, "poisson", 0.0)


def test_sigma_limit_matches_poisson():
    pois = alpha_star_match_zeros(HALF, "poisson", 0.0)
    for fam in ("nbi", "pig"):
        near = alpha_star_match_zeros(HALF, fam, 1e-9)
        assert near == pytest.approx(pois, abs=1e-6)


def test_tau4_target_no_zero_cells_alpha_irrelevant():
    ones = CellSizeDistribution.from_proportions({1: 1.0})
    for fam in ("poisson", "nbi", "pig"):
        res = solve_alpha_for_tau4_target(ones, fam, 0.0, 1.0)
        assert res.alpha_star == 0.0
        assert abs(res.residual) <= 1e-10


def test_tau4_target_against_fine_grid_scan():
    dist = CellSizeDistribution.from_proportions({0: 0.9, 1: 0.1})
    p = 0.5
    res = solve_alpha_for_tau4_target(dist, "poisson", 0.0, p)

    # independent oracle: direct algebraic scan of the target equation
    grid = np.linspace(0.0, 0.2, 2_000_001)
    f = (math.exp(-1) * 0.1) / (grid * np.exp(-grid) * 0.9 + math.exp(-1) * 0.1)
    i = int(np.searchsorted(-f, -p))  # f decreasing
    a0, a1 = grid[i - 1], grid[i]
    f0, f1 = f[i - 1], f[i]
    alpha_scan = a0 + (f0 - p) / (f0 - f1) * (a1 - a0)
    assert res.alpha_star == pytest.approx(alpha_scan, abs=1e-8)


def test_tau4_target_roundtrip_all_families():
    rng = np.random.default_rng(99)
    for fam, sigma in (("poisson", 0.0), ("nbi", 1.0), ("pig", 0.5)):
        for _ in range(10):
            props = rng.dirichlet([8.0, 1.0, 0.5, 0.25])
            dist = CellSizeDistribution.from_proportions(
                {k: float(p) for k, p in enumerate(props)}
            )
            # take the target from a known pseudocount inside the monotone
            # region, then require the solver to reproduce it
            alpha_true = float(rng.uniform(0.01, 0.6))
            p = tau4_expected(dist, fam, sigma, alpha_true, 1)
            res = solve_alpha_for_tau4_target(dist, fam, sigma, p)
            achieved = tau4_expected(dist, fam, sigma, res.alpha_star, 1)
            assert achieved == pytest.approx(p, abs=1e-9), (fam, sigma)
            assert res.alpha_star == pytest.approx(alpha_true, abs=1e-6)


def test_tau4_target_infeasible_above_maximum():
    dist = CellSizeDistribution.from_proportions({0: 0.5, 1: 0.25, 2: 0.25})
    top = tau4_expected(dist, "poisson", 0.0, 0.0, 1)
    with pytest.raises(InfeasibleError, match="achievable maximum"):
        solve_alpha_for_tau4_target(dist, "poisson", 0.0, min(top * 1.5, 0.999))


def test_tau4_target_below_monotone_region_aborts():
    dist = CellSizeDistribution.from_proportions({0: 0.9, 1: 0.1})
    # the alpha-term weight peaks and turns; targets below the dip abort
    with pytest.raises(InfeasibleError, match="stopped decreasing|no bracket"):
        solve_alpha_for_tau4_target(dist, "poisson", 0.0, 0.05)


def test_target_validation_and_dispatch():
    with pytest.raises(ValidationError):
        TuningTarget(TargetKind.TAU4_EQUALS, 0.0, p=1.5)
    with pytest.raises(ValidationError):
        TuningTarget(TargetKind.TAU4_EQUALS, 0.0, p=None)
    res = solve(HALF, "poisson", TuningTarget(TargetKind.MATCH_ZEROS, 0.0))
    assert res.alpha_star == pytest.approx(0.458675, abs=1e-6)
    assert abs(res.residual) < 1e-12
    data = json.loads(res.to_json())
    assert data["target"] == "match-zeros"
    assert data["family"] == "poisson"

    res2 = solve(HALF, "nbi", TuningTarget(TargetKind.TAU4_EQUALS, 1.0, p=0.9))
    assert json.loads(res2.to_json())["p"] == 0.9
