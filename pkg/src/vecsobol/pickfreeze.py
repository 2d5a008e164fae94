"""Pick-freeze designs, paired evaluation, and the sensitivity estimator.

The estimator follows the un-normalized sums literally, with the 1/N factor
exactly where the defining formula puts it:

    numerator   = sum_l [ sum_i Y_il Yu_il - (1/N) (sum_i (Y_il + Yu_il)/2)^2 ]
    denominator = sum_l [ sum_i (Y_il^2 + Yu_il^2)/2
                          - (1/N) (sum_i (Y_il + Yu_il)/2)^2 ]

Both are diagonal sums of the empirical covariance matrices built by
empirical_covariances(), which is how the general weighted estimator
Tr(M C_hat)/Tr(M Sigma_hat) reduces to the plain ratio at M = identity,
bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ContractError, DegenerateSampleError, IllPosedIndexError
from .models import VectorModel
from .spaces import InputSpace, SeedLike, SubsetIndex, as_seed_sequence, sample_marginals


@dataclass
class PickFreezeDesign:
    """Paired input design: a base matrix and a redraw of the complement columns.

    x and x_prime come from disjoint spawned streams of the same seed, so the
    design is a pure function of (space, subset, n, seed).
    """

    x: np.ndarray  # (n, p)
    x_prime: np.ndarray  # (n, p - r), marginals of the complement coordinates
    subset: SubsetIndex
    seed: Optional[int] = None

    def __post_init__(self):
        if self.x.shape[0] != self.x_prime.shape[0]:
            raise ContractError("x and x_prime must have the same number of rows")
        if self.x_prime.shape[1] != len(self.subset.complement):
            raise ContractError(
                f"x_prime must have {len(self.subset.complement)} columns, "
                f"got {self.x_prime.shape[1]}"
            )
        self.x.flags.writeable = False
        self.x_prime.flags.writeable = False

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass
class PickFreezeSample:
    """Paired outputs (Y_i, Y_i^u); the pair shares the subset coordinates."""

    y: np.ndarray  # (n, k)
    y_u: np.ndarray  # (n, k)
    subset: Optional[SubsetIndex] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        y_u = np.asarray(self.y_u, dtype=float)
        if y.ndim != 2 or y.shape != y_u.shape:
            raise ContractError(f"y and y_u must be equal-shape 2-D matrices, got {y.shape} vs {y_u.shape}")
        y = y.copy()
        y_u = y_u.copy()
        y.flags.writeable = False
        y_u.flags.writeable = False
        self.y = y
        self.y_u = y_u

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def out_dims(self) -> int:
        return self.y.shape[1]

    def left_compose(self, matrix: np.ndarray) -> "PickFreezeSample":
        """Apply a linear output map to every paired observation."""
        o = np.asarray(matrix, dtype=float)
        if o.shape != (self.out_dims, self.out_dims):
            raise ContractError(f"matrix must be {self.out_dims}x{self.out_dims}, got {o.shape}")
        return PickFreezeSample(self.y @ o.T, self.y_u @ o.T, self.subset)


@dataclass
class EmpiricalCovariances:
    """Un-normalized plug-in covariance matrices of a pick-freeze sample.

    total and subset are N times the usual covariance estimates; their
    diagonal sums are exactly the estimator's denominator and numerator.
    Divide by n for entrywise covariance estimates.
    """

    total: np.ndarray  # (k, k)
    subset: np.ndarray  # (k, k)
    n: int


def generate_design(
    space: InputSpace, subset: SubsetIndex, n: int, seed: SeedLike
) -> PickFreezeDesign:
    """Draw the pick-freeze design; deterministic in (space, subset, n, seed)."""
    if subset.dims != space.dims:
        raise ContractError(
            f"subset is over {subset.dims} inputs but the space has {space.dims}"
        )
    if n < 2:
        raise ContractError(f"pick-freeze needs n >= 2, got {n}")
    root = as_seed_sequence(seed)
    ss_x, ss_prime = root.spawn(2)
    x = sample_marginals(space.marginals, n, ss_x)
    comp_marginals = tuple(space.marginals[j] for j in subset.complement)
    x_prime = sample_marginals(comp_marginals, n, ss_prime)
    seed_int = int(seed) if isinstance(seed, (int, np.integer)) else None
    return PickFreezeDesign(x=x, x_prime=x_prime, subset=subset, seed=seed_int)


def evaluate_pairs(model: VectorModel, design: PickFreezeDesign) -> PickFreezeSample:
    """Evaluate (Y, Y^u): the second run keeps the subset columns and swaps in
    the redrawn complement columns, in the original coordinate order."""
    if model.in_dims != design.x.shape[1]:
        raise ContractError(
            f"model expects {model.in_dims} inputs but the design has {design.x.shape[1]}"
        )
    y = model.evaluate(design.x)
    mixed = design.x.copy()
    comp = list(design.subset.complement)
    if comp:
        mixed[:, comp] = design.x_prime
    y_u = model.evaluate(mixed)
    return PickFreezeSample(y=y, y_u=y_u, subset=design.subset)


def _degeneracy_floor(sample: PickFreezeSample) -> float:
    """Denominator floor: scales with N and the squared sample magnitude so a
    constant model is rejected while a genuinely small-variance one is not."""
    scale = max(
        float(np.max(np.abs(sample.y), initial=0.0)),
        float(np.max(np.abs(sample.y_u), initial=0.0)),
    )
    return 1e-14 * scale * scale * sample.n


def empirical_covariances(sample: PickFreezeSample) -> EmpiricalCovariances:
    """Plug-in matrices whose traces reproduce the estimator's numerator and
    denominator exactly; the cross matrix is symmetrized by construction.

    All four Gram blocks go through one einsum contraction with a fixed
    summation order, so coincident pairs (y_u identical to y) give
    total == subset bit for bit, and each matrix is exactly symmetric.
    """
    if sample.n < 2:
        raise ContractError(f"need at least 2 paired rows, got {sample.n}")
    y, y_u, n = sample.y, sample.y_u, sample.n
    m = (y + y_u).sum(axis=0) / (2.0 * n)
    centering = n * np.outer(m, m)
    g_yy = np.einsum("il,im->lm", y, y)
    g_uu = np.einsum("il,im->lm", y_u, y_u)
    g_yu = np.einsum("il,im->lm", y, y_u)
    g_uy = np.einsum("il,im->lm", y_u, y)
    total = 0.5 * (g_yy + g_uu) - centering
    cross = 0.5 * (g_yu + g_uy) - centering
    return EmpiricalCovariances(total=total, subset=cross, n=n)


def estimate_index(sample: PickFreezeSample) -> float:
    """The pick-freeze estimate of the identity-weighted index for this subset."""
    emp = empirical_covariances(sample)
    denominator = float(np.trace(emp.total))
    if denominator <= _degeneracy_floor(sample):
        raise DegenerateSampleError(
            f"sample denominator {denominator:.3e} is at the degeneracy floor; "
            "the model output appears constant"
        )
    return float(np.trace(emp.subset)) / denominator


def estimate_index_general(sample: PickFreezeSample, m: np.ndarray) -> float:
    """Plug-in weighted estimate Tr(M C_hat)/Tr(M Sigma_hat).

    With the identity weighting this returns exactly estimate_index(sample).
    """
    m = np.asarray(m, dtype=float)
    k = sample.out_dims
    if m.shape != (k, k):
        raise ContractError(f"weight matrix must be {k}x{k}, got {m.shape}")
    emp = empirical_covariances(sample)
    denominator = float(np.trace(m @ emp.total))
    m_scale = float(np.max(np.abs(m)))
    if abs(denominator) <= _degeneracy_floor(sample) * max(m_scale, 1e-300):
        raise IllPosedIndexError(
            f"Tr(M Sigma_hat) = {denominator:.3e} is too close to zero for this weighting"
        )
    return float(np.trace(m @ emp.subset)) / denominator


# ---------------------------------------------------------------------------
# CSV interchange: paired outputs for external auditing / estimator-only runs
# ---------------------------------------------------------------------------


def sample_header(k: int) -> list[str]:
    return [f"y_{i}" for i in range(1, k + 1)] + [f"yu_{i}" for i in range(1, k + 1)]


def write_sample_csv(sample: PickFreezeSample, path: str) -> None:
    """Write the paired outputs with header y_1..y_k,yu_1..yu_k.

    Floats are written with repr so the file round-trips bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(sample_header(sample.out_dims))
        for i in range(sample.n):
            writer.writerow(
                [repr(float(v)) for v in sample.y[i]]
                + [repr(float(v)) for v in sample.y_u[i]]
            )


def read_sample_csv(path: str, subset: Optional[SubsetIndex] = None) -> PickFreezeSample:
    """Read paired outputs written by write_sample_csv (or an external tool)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty sample file") from None
        header = [h.strip() for h in header]
        if len(header) % 2 != 0:
            raise ConfigurationError(f"{path}: sample header must have 2k columns")
        k = len(header) // 2
        if header != sample_header(k):
            raise ConfigurationError(
                f"{path}: sample header must be y_1..y_{k},yu_1..yu_{k}, got {','.join(header)}"
            )
        rows = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 * k:
                raise ConfigurationError(f"{path}:{row_num}: expected {2 * k} columns")
            rows.append([float(v) for v in row])
    if not rows:
        raise ConfigurationError(f"{path}: sample file has no data rows")
    data = np.asarray(rows)
    return PickFreezeSample(y=data[:, :k], y_u=data[:, k:], subset=subset)
