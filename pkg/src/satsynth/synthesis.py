"""Whole-table synthesis under the saturated count-model mechanism.

Every cell is drawn independently from the chosen family with mean equal
to its original count; random zeros get mean ``alpha`` instead, and
structural zeros stay zero.  Replicates are independent.  A cell's draw
depends only on (master seed, replicate index, cell flat index) — never
on chunking or worker count — because each cell owns a fixed counter
block of the keyed Philox stream (see :mod:`satsynth.sampling`).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .models import CountModelSpec, Family
from .sampling import draw_counts, uniform_block
from .table import SparseContingencyTable

DEFAULT_CHUNK_CELLS = 1 << 20


@dataclass(frozen=True)
class SynthesisJob:
    """Parameters of one synthesis run: model, replicate count, seed."""

    model: CountModelSpec
    master_seed: int
    m: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("replicate count m must be >= 1")
        if not isinstance(self.master_seed, int):
            raise ValidationError("master_seed must be an integer")


@dataclass(frozen=True)
class Provenance:
    """How a synthetic table was produced; serialised as the JSON sidecar."""

    family: str
    sigma: float
    alpha: float
    m: int
    master_seed: int
    replicate: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Provenance":
        data = json.loads(text)
        return cls(**data)


@dataclass(frozen=True)
class SyntheticTable:
    """A synthesized table plus the provenance of its draw."""

    table: SparseContingencyTable
    provenance: Provenance

    @property
    def n_syn(self) -> int:
        return self.table.n

    @property
    def schema(self):
        return self.table.schema


def expected_grand_total(table: SparseContingencyTable, job: SynthesisJob) -> float:
    """E[n_syn] = n + alpha * (number of random zeros)."""
    return float(table.n) + job.model.alpha * table.num_random_zeros


def _chunk_draw(
    table: SparseContingencyTable,
    family: Family,
    sigma: float,
    alpha: float,
    master_seed: int,
    replicate: int,
    start: int,
    stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw cells [start, stop); returns (flat indices, counts) of nonzero draws."""
    lo = int(np.searchsorted(table.index, np.uint64(start)))
    hi = int(np.searchsorted(table.index, np.uint64(stop))) if stop < 2**64 else table.index.size
    # subtract in uint64 first: chunk-relative offsets are small, raw indices may not be
    nz_pos = (table.index[lo:hi] - np.uint64(start)).astype(np.int64)
    nz_cnt = table.count[lo:hi]

    if alpha == 0.0:
        # only originally nonzero cells can produce nonzero draws
        if nz_pos.size == 0:
            return np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.int64)
        u = uniform_block(master_seed, replicate, start, stop - start)
        counts = draw_counts(family, nz_cnt.astype(np.float64), sigma, u[nz_pos])
        keep = counts > 0
        return (nz_pos[keep] + start).astype(np.uint64), counts[keep]

    mu = np.full(stop - start, alpha, dtype=np.float64)
    s_lo = int(np.searchsorted(table.structural, np.uint64(start)))
    s_hi = int(np.searchsorted(table.structural, np.uint64(stop))) if stop < 2**64 else table.structural.size
    if s_hi > s_lo:
        mu[(table.structural[s_lo:s_hi] - np.uint64(start)).astype(np.int64)] = 0.0
    mu[nz_pos] = nz_cnt
    u = uniform_block(master_seed, replicate, start, stop - start)
    counts = draw_counts(family, mu, sigma, u)
    keep = counts > 0
    return (np.flatnonzero(keep) + start).astype(np.uint64), counts[keep]


def synthesize(
    table: SparseContingencyTable,
    job: SynthesisJob,
    threads: int = 1,
    chunk_cells: int = DEFAULT_CHUNK_CELLS,
) -> list[SyntheticTable]:
    """Generate ``job.m`` independent synthetic replicates of ``table``.

    Cells are processed in fixed flat-index chunks; with ``threads > 1``
    chunks are dispatched to a thread pool.  Output is identical for any
    thread count and chunk size.
    """
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    if chunk_cells < 1:
        raise ValidationError("chunk_cells must be >= 1")
    spec = job.model
    family = spec.effective_family
    sigma = spec.sigma if family is not Family.POISSON else 0.0
    k = table.num_cells
    starts = list(range(0, k, chunk_cells))
    out: list[SyntheticTable] = []
    for rep in range(job.m):
        def work(start: int, rep: int = rep):
            return _chunk_draw(
                table, family, sigma, spec.alpha,
                job.master_seed, rep, start, min(start + chunk_cells, k),
            )

        if threads == 1 or len(starts) == 1:
            pieces = [work(s) for s in starts]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                pieces = list(pool.map(work, starts))
        idx = np.concatenate([p[0] for p in pieces]) if pieces else np.empty(0, np.uint64)
        cnt = np.concatenate([p[1] for p in pieces]) if pieces else np.empty(0, np.int64)
        syn = SparseContingencyTable(table.schema, idx, cnt, table.structural)
        prov = Provenance(
            family=spec.family.value,
            sigma=float(spec.sigma),
            alpha=float(spec.alpha),
            m=job.m,
            master_seed=job.master_seed,
            replicate=rep,
        )
        out.append(SyntheticTable(syn, prov))
    return out
