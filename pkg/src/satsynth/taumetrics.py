"""Cell-size agreement metrics between original and synthetic tables.

Four per-size quantities drive the risk assessment:

* tau1(k) — proportion of cells of size k in the synthetic data;
* tau2(k) — proportion of cells of size k in the original data;
* tau3(k) — proportion of original size-k cells synthesized to k;
* tau4(k) — proportion of synthetic size-k cells that came from size-k
  cells.  tau4(1), the share of synthetic uniques that are real
  uniques, is the headline disclosure-risk number.

Because cells are synthesized independently with known mass functions,
expected values of all four are available in closed form before any
data are generated; this module provides those analytic values for all
three families and the post-hoc empirical counterparts.  Structural
zeros sit outside every bucket: size-0 quantities refer to random zeros.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bessel import log_bessel_k_half
from .errors import UndefinedResultError, ValidationError
from .models import Family, logpmf, pig_c, pmf, pmf_range
from .synthesis import SyntheticTable
from .table import CellSizeDistribution, SparseContingencyTable, cell_size_distribution


def _zero_pmf_weights(family: Family, sigma: float, js: np.ndarray) -> np.ndarray:
    """p(draw = 0 | mean j) for each j, the shrink-to-zero weights."""
    return pmf(family, np.zeros(js.shape, dtype=np.int64), js.astype(np.float64), sigma)


def tau1_expected(
    dist: CellSizeDistribution,
    family: Family | str,
    sigma: float,
    alpha: float,
    k: int,
) -> float:
    """Expected proportion of synthetic cells of size k.

    Total-probability sum over the original size distribution: the
    alpha-smoothed zeros contribute pmf(k | alpha) * tau2(0) and each
    occupied size j contributes pmf(k | j) * tau2(j).  The sum is over
    the finite support of the original table, hence exact.
    """
    family = Family.coerce(family)
    if k < 0:
        raise ValidationError("k must be >= 0")
    js = dist.nonzero_sizes.astype(np.float64)
    ps = dist.nonzero_proportions
    total = float(pmf(family, k, alpha, sigma)) * dist.proportion(0)
    if js.size:
        kk = np.full(js.shape, k, dtype=np.int64)
        total += float(np.dot(pmf(family, kk, js, sigma), ps))
    return total


def tau1_expected_range(
    dist: CellSizeDistribution,
    family: Family | str,
    sigma: float,
    alpha: float,
    k_max: int,
) -> np.ndarray:
    """tau1 for every k in 0..k_max in one pass.

    Shares per-mean pmf ladders across all k, so summing the synthetic
    size distribution to check its mass costs O(support * k_max) rather
    than O(support * k_max^2).
    """
    family = Family.coerce(family)
    total = pmf_range(family, k_max, float(alpha), sigma) * dist.proportion(0)
    for j, p in zip(dist.nonzero_sizes, dist.nonzero_proportions):
        total = total + pmf_range(family, k_max, float(j), sigma) * float(p)
    return total


def tau3_expected(family: Family | str, sigma: float, alpha: float, k: int) -> float:
    """Expected proportion of original size-k cells synthesized to k.

    Independent of the table's size distribution: pmf(0 | alpha) for
    k = 0 (a random zero must stay zero) and pmf(k | k) for k >= 1.
    """
    family = Family.coerce(family)
    if k < 0:
        raise ValidationError("k must be >= 0")
    if k == 0:
        return float(pmf(family, 0, alpha, sigma))
    return float(pmf(family, k, float(k), sigma))


def tau4_expected(
    dist: CellSizeDistribution,
    family: Family | str,
    sigma: float,
    alpha: float,
    k: int,
    method: str = "bayes",
) -> float:
    """Expected proportion of synthetic size-k cells originating from size k.

    ``method='bayes'`` evaluates tau3(k) * tau2(k) / tau1(k).
    ``method='reduced'`` evaluates the algebraically reduced ratio in
    which all k-only factors are cancelled; both must agree to near
    machine precision and the reduced form is the cheaper route for
    root-finding.
    """
    family = Family.coerce(family)
    if method == "bayes":
        t1 = tau1_expected(dist, family, sigma, alpha, k)
        if t1 <= 0.0:
            raise UndefinedResultError(
                f"tau4({k}) undefined: no synthetic cells of size {k} are expected"
            )
        return tau3_expected(family, sigma, alpha, k) * dist.proportion(k) / t1
    if method == "reduced":
        return _tau4_reduced(dist, family, sigma, alpha, k)
    raise ValidationError("method must be 'bayes' or 'reduced'")


def _tau4_reduced(
    dist: CellSizeDistribution, family: Family, sigma: float, alpha: float, k: int
) -> float:
    """Cancelled-ratio form of tau4.

    Every term shares the same k-only constants, which cancel between
    numerator and denominator; only the mean-dependent weight survives.
    Weights are handled in log space with a common reference, so the
    route stays finite for large sizes.
    """
    if k < 0:
        raise ValidationError("k must be >= 0")
    t20 = dist.proportion(0)
    js = dist.nonzero_sizes.astype(np.float64)
    ps = dist.nonzero_proportions

    if family is Family.POISSON or sigma == 0.0:
        if k == 0:
            logw = lambda mu: -mu
        else:
            logw = lambda mu: k * np.log(mu) - mu
    elif family is Family.NBI:
        if k == 0:
            logw = lambda mu: -np.log1p(sigma * mu) / sigma
        else:
            logw = lambda mu: k * np.log(mu) - (k + 1.0 / sigma) * np.log1p(sigma * mu)
    elif family is Family.PIG:
        if k == 0:
            logw = lambda mu: -pig_c(mu, sigma)
        else:
            logw = lambda mu: (
                (0.5 - k) * np.log(pig_c(mu, sigma))
                + k * np.log(mu)
                + log_bessel_k_half(k, pig_c(mu, sigma))
            )
    else:  # pragma: no cover
        raise ValidationError(f"unhandled family {family}")

    log_terms: list[float] = []
    weights: list[float] = []
    if k == 0 or alpha > 0.0:  # mean 0 cannot reach k >= 1
        log_terms.append(float(logw(float(alpha))))
        weights.append(t20)
    for j, p in zip(js, ps):
        log_terms.append(float(logw(float(j))))
        weights.append(float(p))
    if k == 0:
        log_num = log_terms[0]
        w_num = t20
    else:
        log_num = float(logw(float(k)))
        w_num = dist.proportion(k)
    terms = np.asarray(log_terms)
    ref = terms.max() if terms.size else 0.0
    den = float(np.dot(np.exp(terms - ref), np.asarray(weights)))
    if den <= 0.0:
        raise UndefinedResultError(
            f"tau4({k}) undefined: no synthetic cells of size {k} are expected"
        )
    return math.exp(log_num - ref) * w_num / den


# -- reports -------------------------------------------------------------------


@dataclass(frozen=True)
class TauReport:
    """Per-size tau values, either analytic expectations or empirical rates.

    Absent empirical values (0/0 buckets) are NaN, not 0.
    """

    mode: str  # "analytic" | "empirical"
    family: str | None
    sigma: float | None
    alpha: float | None
    ks: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray
    tau4: np.ndarray

    def to_rows(self) -> list[dict]:
        rows = []
        for i, k in enumerate(self.ks):
            rows.append(
                {
                    "k": int(k),
                    "tau1": float(self.tau1[i]),
                    "tau2": float(self.tau2[i]),
                    "tau3": float(self.tau3[i]),
                    "tau4": float(self.tau4[i]),
                }
            )
        return rows

    def to_csv(self, header_comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_comments:
            buf.write(f"# {line}\n")
        buf.write(f"# mode: {self.mode}\n")
        if self.family is not None:
            buf.write(f"# model: family={self.family} sigma={self.sigma} alpha={self.alpha}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "tau1", "tau2", "tau3", "tau4"])
        for row in self.to_rows():
            writer.writerow(
                [row["k"]] + ["" if math.isnan(row[c]) else repr(row[c]) for c in ("tau1", "tau2", "tau3", "tau4")]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "family": self.family,
                "sigma": self.sigma,
                "alpha": self.alpha,
                "values": [
                    {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                    for row in self.to_rows()
                ],
            },
            indent=2,
        )


def tau_analytic(
    dist: CellSizeDistribution,
    family: Family | str,
    sigma: float,
    alpha: float,
    k_report: int = 3,
) -> TauReport:
    """Analytic TauReport over k = 0..k_report."""
    family = Family.coerce(family)
    ks = np.arange(k_report + 1)
    t1 = np.array([tau1_expected(dist, family, sigma, alpha, int(k)) for k in ks])
    t2 = np.array([dist.proportion(int(k)) for k in ks])
    t3 = np.array([tau3_expected(family, sigma, alpha, int(k)) for k in ks])
    t4 = np.empty(ks.size)
    for i, k in enumerate(ks):
        try:
            t4[i] = tau4_expected(dist, family, sigma, alpha, int(k))
        except UndefinedResultError:
            t4[i] = np.nan
    return TauReport("analytic", family.value, float(sigma), float(alpha), ks, t1, t2, t3, t4)


# -- empirical ------------------------------------------------------------------


def _counts_of_size(table: SparseContingencyTable, k: int) -> np.ndarray:
    return table.index[table.count == k]


def _empirical_one(
    original: SparseContingencyTable, syn: SparseContingencyTable, ks: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    k_eff = original.num_cells - original.num_structural_zeros
    t1 = np.empty(ks.size)
    t2 = np.empty(ks.size)
    t3 = np.empty(ks.size)
    t4 = np.empty(ks.size)
    union_nonzero = np.union1d(original.index, syn.index).size
    for i, k in enumerate(ks):
        k = int(k)
        if k == 0:
            n_orig = k_eff - original.num_nonzero
            n_syn = k_eff - syn.num_nonzero
            stayed = k_eff - union_nonzero
        else:
            orig_k = _counts_of_size(original, k)
            syn_k = _counts_of_size(syn, k)
            n_orig = orig_k.size
            n_syn = syn_k.size
            stayed = np.intersect1d(orig_k, syn_k, assume_unique=True).size
        t1[i] = n_syn / k_eff
        t2[i] = n_orig / k_eff
        t3[i] = stayed / n_orig if n_orig else np.nan
        t4[i] = stayed / n_syn if n_syn else np.nan
    return t1, t2, t3, t4


def tau_empirical(
    original: SparseContingencyTable,
    synthetic: SyntheticTable | SparseContingencyTable | Sequence,
    k_report: int = 3,
) -> TauReport:
    """Empirical tau values, averaged over replicates when several are given.

    Structural zeros are excluded from every bucket.  A bucket with no
    qualifying cells in any replicate reports NaN.
    """
    if isinstance(synthetic, (SyntheticTable, SparseContingencyTable)):
        synthetic = [synthetic]
    if not synthetic:
        raise ValidationError("need at least one synthetic table")
    tables = []
    family = sigma = alpha = None
    for s in synthetic:
        if isinstance(s, SyntheticTable):
            tables.append(s.table)
            family, sigma, alpha = s.provenance.family, s.provenance.sigma, s.provenance.alpha
        else:
            tables.append(s)
    for t in tables:
        if t.schema != original.schema:
            raise ValidationError("synthetic table schema does not match the original")
    ks = np.arange(k_report + 1)
    acc = [np.zeros((len(tables), ks.size)) for _ in range(4)]
    for r, t in enumerate(tables):
        vals = _empirical_one(original, t, ks)
        for a, v in zip(acc, vals):
            a[r] = v
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN buckets stay NaN
        t1, t2, t3, t4 = (np.nanmean(a, axis=0) for a in acc)
    return TauReport("empirical", family, sigma, alpha, ks, t1, t2, t3, t4)


def tau2_of_table(table: SparseContingencyTable) -> CellSizeDistribution:
    """The original table's size distribution (random-zero basis)."""
    return cell_size_distribution(table, zero_basis="random")
