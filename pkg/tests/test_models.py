import math

import numpy as np
import pytest

from satsynth.errors import ValidationError
from satsynth.models import (
    CountModelSpec,
    Family,
    logpmf,
    moments,
    pig_c,
    pmf,
    pmf_range,
    truncation_for_mass,
)

from oracles import nbi_pmf_direct, pig_pmf_quadrature


def test_poisson_pmf_one_given_one():
    assert pmf("poisson", 1, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_degenerate_zero_mean_all_families():
    for fam in Family:
        assert pmf(fam, 0, 0.0, 1.0) == 1.0
        assert pmf(fam, 3, 0.0, 1.0) == 0.0


def test_nbi_pmf_zero_given_one():
    # (1/(1 + sigma*mu))^(1/sigma) at sigma=1, mu=1
    assert pmf("nbi", 0, 1.0, 1.0) == pytest.approx(0.5, rel=1e-14)


def test_nbi_pmf_matches_independent_form():
    rng = np.random.default_rng(3)
    for _ in range(40):
        k = int(rng.integers(0, 30))
        mu = float(rng.uniform(0.01, 20))
        sigma = float(rng.uniform(0.05, 8))
        assert pmf("nbi", k, mu, sigma) == pytest.approx(
            nbi_pmf_direct(k, mu, sigma), rel=1e-12
        )


def test_pig_pmf_zero_given_one_against_quadrature():
    # exp(1/sigma - c) with c = sqrt(3); quadrature of the mixture agrees
    val = pmf("pig", 0, 1.0, 1.0)
    assert val == pytest.approx(math.exp(1.0 - math.sqrt(3.0)), rel=1e-14)
    assert val == pytest.approx(pig_pmf_quadrature(0, 1.0, 1.0), rel=1e-9)
    assert val == pytest.approx(0.480922, abs=5e-7)


def test_pig_pmf_grid_against_quadrature():
    for k in (0, 1, 2, 5, 11):
        for mu, sigma in ((0.5, 0.3), (1.0, 1.0), (4.0, 2.0), (9.0, 0.1)):
            assert pmf("pig", k, mu, sigma) == pytest.approx(
                pig_pmf_quadrature(k, mu, sigma), rel=1e-8
            ), (k, mu, sigma)


def test_pmf_normalizes_all_families():
    for fam, sigma in (("poisson", 0.0), ("nbi", 1.0), ("nbi", 10.0), ("pig", 1.0), ("pig", 10.0)):
        for mu in (0.02, 1.0, 8.0, 50.0):
            kstar = truncation_for_mass(fam, mu, sigma, tail=1e-9)
            total = pmf_range(fam, kstar, mu, sigma).sum()
            assert total >= 1 - 1e-9, (fam, sigma, mu)
            assert total <= 1 + 1e-9


def test_poisson_limit_of_two_parameter_families():
    ks = np.arange(0, 51)
    for mu in (0.5, 5.0, 20.0):
        base = pmf("poisson", ks, mu)
        for fam in ("nbi", "pig"):
            near = pmf(fam, ks, mu, 1e-8)
            assert np.max(np.abs(near - base)) < 1e-6, (fam, mu)


def test_sigma_zero_dispatches_to_poisson():
    ks = np.arange(0, 20)
    for fam in ("nbi", "pig"):
        np.testing.assert_allclose(pmf(fam, ks, 3.0, 0.0), pmf("poisson", ks, 3.0))
    assert CountModelSpec("nbi", sigma=0.0).effective_family is Family.POISSON


def test_moments_values():
    assert moments("nbi", 5.0, 0.5) == (5.0, pytest.approx(17.5))
    assert moments("poisson", 3.0) == (3.0, 3.0)
    assert moments("pig", 2.0, 2.0) == (2.0, pytest.approx(10.0))


def test_logpmf_matches_log_of_pmf():
    ks = np.arange(0, 15)
    for fam, sigma in (("poisson", 0.0), ("nbi", 0.7), ("pig", 0.7)):
        lp = logpmf(fam, ks, 2.5, sigma)
        np.testing.assert_allclose(np.exp(lp), pmf(fam, ks, 2.5, sigma), rtol=1e-12)


def test_pig_c_definition_and_bounds():
    assert pig_c(1.0, 1.0) == pytest.approx(math.sqrt(3.0))
    assert pig_c(0.0, 2.0) == pytest.approx(0.5)
    for mu, sigma in ((0.1, 0.2), (50.0, 10.0)):
        assert pig_c(mu, sigma) >= 1.0 / sigma


def test_input_validation():
    with pytest.raises(ValidationError):
        pmf("poisson", -1, 1.0)
    with pytest.raises(ValidationError):
        pmf("poisson", 1, -1.0)
    with pytest.raises(ValidationError):
        pmf("nbi", 1, 1.0, -0.5)
    with pytest.raises(ValidationError):
        moments("poisson", -2.0)
    with pytest.raises(ValidationError):
        Family.coerce("weibull")
    with pytest.raises(ValidationError):
        CountModelSpec("poisson", alpha=-0.1)
