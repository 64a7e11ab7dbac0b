import math

import numpy as np
import pytest
from scipy import stats

from satsynth.errors import ValidationError
from satsynth.models import CountModelSpec
from satsynth.schema import CategoricalSchema
from satsynth.synthesis import (
    Provenance,
    SynthesisJob,
    SyntheticTable,
    expected_grand_total,
    synthesize,
)
from satsynth.table import SparseContingencyTable


def line_schema(k: int) -> CategoricalSchema:
    return CategoricalSchema([("cell", [f"c{i}" for i in range(k)])])


def small_table() -> SparseContingencyTable:
    schema = CategoricalSchema([("A", ["a", "b", "c", "d"]), ("B", ["w", "x", "y", "z"])])
    counts = {(0, 0): 3, (0, 3): 1, (1, 1): 7, (2, 2): 2, (3, 0): 1}
    return SparseContingencyTable.from_dict(schema, counts, structural=[(3, 3)])


def test_alpha_zero_keeps_all_zero_cells_zero():
    table = small_table()
    job = SynthesisJob(CountModelSpec("nbi", sigma=2.0, alpha=0.0), master_seed=5, m=4)
    for rep in synthesize(table, job):
        extra = np.setdiff1d(rep.table.index, table.index)
        assert extra.size == 0


def test_structural_zeros_fixed_even_with_alpha():
    table = small_table()
    job = SynthesisJob(CountModelSpec("poisson", alpha=5.0), master_seed=9, m=6)
    for rep in synthesize(table, job):
        assert rep.table[(3, 3)] == 0
        assert np.array_equal(rep.table.structural, table.structural)


def test_single_unique_cell_poisson_rate():
    table = SparseContingencyTable.from_dict(line_schema(1), {(0,): 1})
    job = SynthesisJob(CountModelSpec("poisson"), master_seed=17, m=4000)
    reps = synthesize(table, job)
    stayed = sum(1 for r in reps if r.table[(0,)] == 1)
    p = math.exp(-1)
    se = math.sqrt(p * (1 - p) / len(reps))
    assert abs(stayed / len(reps) - p) < 3 * se


def test_expected_grand_total():
    table = small_table()
    assert expected_grand_total(table, SynthesisJob(CountModelSpec("poisson"), master_seed=0)) == table.n
    job = SynthesisJob(CountModelSpec("poisson", alpha=0.02), master_seed=0)
    assert expected_grand_total(table, job) == pytest.approx(table.n + 0.02 * table.num_random_zeros)
    one = SparseContingencyTable.from_dict(line_schema(1), {(0,): 7})
    assert expected_grand_total(one, SynthesisJob(CountModelSpec("nbi", sigma=3.0), master_seed=1)) == 7.0


def test_deterministic_across_threads_and_chunking():
    schema = line_schema(5000)
    rng = np.random.default_rng(0)
    idx = np.sort(rng.choice(5000, 800, replace=False))
    table = SparseContingencyTable(schema, idx, rng.integers(1, 30, 800))
    job = SynthesisJob(CountModelSpec("pig", sigma=1.0, alpha=0.05), master_seed=123, m=2)
    base = synthesize(table, job, threads=1, chunk_cells=512)
    for threads, chunk in ((1, 5000), (4, 512), (3, 100), (2, 977)):
        other = synthesize(table, job, threads=threads, chunk_cells=chunk)
        for a, b in zip(base, other):
            assert a.table.same_contents(b.table), (threads, chunk)


def test_replicates_differ_and_seeds_matter():
    table = small_table()
    job = SynthesisJob(CountModelSpec("poisson", alpha=0.5), master_seed=1, m=2)
    r0, r1 = synthesize(table, job)
    assert not r0.table.same_contents(r1.table)
    other = synthesize(table, SynthesisJob(CountModelSpec("poisson", alpha=0.5), master_seed=2, m=1))[0]
    assert not r0.table.same_contents(other.table)


def test_per_cell_unbiasedness_over_replicates():
    table = small_table()
    m = 10_000
    job = SynthesisJob(CountModelSpec("nbi", sigma=0.8, alpha=0.1), master_seed=33, m=m)
    reps = synthesize(table, job)
    k = table.num_cells
    sums = np.zeros(k)
    sq = np.zeros(k)
    for r in reps:
        dense = r.table.to_dense().ravel().astype(float)
        sums += dense
        sq += dense**2
    means = sums / m
    variances = sq / m - means**2
    dense_mu = table.to_dense().ravel().astype(float)
    mu = np.where(dense_mu > 0, dense_mu, 0.1)
    mu[table.structural.astype(np.int64)] = 0.0
    se = np.sqrt(np.maximum(variances, 1e-12) / m)
    live = mu > 0
    assert np.all(np.abs(means[live] - mu[live]) < 4 * se[live])
    assert not means[~live].any()


def test_cells_uncorrelated_across_replicates():
    table = small_table()
    m = 4000
    job = SynthesisJob(CountModelSpec("poisson", alpha=0.0), master_seed=77, m=m)
    reps = synthesize(table, job)
    a = np.array([r.table[(0, 0)] for r in reps], dtype=float)
    b = np.array([r.table[(1, 1)] for r in reps], dtype=float)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 4 / math.sqrt(m)


def test_poisson_grand_total_dispersion():
    # with independent Poisson cells the replicate totals are Poisson(n)
    schema = line_schema(64)
    counts = {(i,): 8 for i in range(64)}
    table = SparseContingencyTable.from_dict(schema, counts)
    m = 400
    job = SynthesisJob(CountModelSpec("poisson"), master_seed=55, m=m)
    totals = np.array([r.n_syn for r in synthesize(table, job)], dtype=float)
    disp = (m - 1) * totals.var(ddof=1) / totals.mean()
    lo, hi = stats.chi2.ppf([0.0005, 0.9995], m - 1)
    assert lo < disp < hi


def test_provenance_roundtrip_and_fields():
    table = small_table()
    job = SynthesisJob(CountModelSpec("pig", sigma=2.0, alpha=0.02), master_seed=4, m=3)
    reps = synthesize(table, job)
    assert [r.provenance.replicate for r in reps] == [0, 1, 2]
    p = reps[1].provenance
    assert Provenance.from_json(p.to_json()) == p
    assert p.family == "pig" and p.m == 3 and p.master_seed == 4


def test_job_validation():
    with pytest.raises(ValidationError):
        SynthesisJob(CountModelSpec("poisson"), master_seed=0, m=0)
    table = small_table()
    job = SynthesisJob(CountModelSpec("poisson"), master_seed=0)
    with pytest.raises(ValidationError):
        synthesize(table, job, threads=0)
