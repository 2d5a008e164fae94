"""Vector-valued models, output transforms, and the built-in test corpus.

A model is a deterministic map from p inputs to k outputs, evaluated row-wise
on n-by-p matrices. Corpus entries carry a default input space and, where the
model family admits one, an exact covariance oracle hook used by the CLI's
``oracle: auto`` mode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ContractError
from .spaces import InputSpace

EvalFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OutputTransform:
    """Left-composition applied to model outputs.

    kind 'isometry' requires an orthogonal matrix (checked to 1e-10 per entry),
    'homothety' a nonzero scalar, 'general_linear' any square matrix.
    """

    kind: str
    matrix: Optional[np.ndarray] = None
    scale: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("isometry", "homothety", "general_linear"):
            raise ConfigurationError(f"unknown transform kind {self.kind!r}")
        if self.kind == "homothety":
            if self.scale is None or self.scale == 0:
                raise ConfigurationError("homothety requires a nonzero scale")
        else:
            if self.matrix is None:
                raise ConfigurationError(f"{self.kind} requires a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigurationError(f"transform matrix must be square, got shape {m.shape}")
            if self.kind == "isometry":
                defect = np.max(np.abs(m.T @ m - np.eye(m.shape[0])))
                if defect > 1e-10:
                    raise ConfigurationError(
                        f"declared isometry is not orthogonal (max |O^t O - I| = {defect:.3e})"
                    )
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    @property
    def out_dims(self) -> Optional[int]:
        return None if self.kind == "homothety" else self.matrix.shape[0]

    def as_matrix(self, k: int) -> np.ndarray:
        """The k-by-k matrix this transform multiplies outputs by."""
        if self.kind == "homothety":
            return float(self.scale) * np.eye(k)
        return self.matrix


@dataclass(frozen=True)
class VectorModel:
    """Deterministic map R^p -> R^k plus corpus metadata.

    evaluate() is vectorized over rows and must be bit-stable: identical input
    matrices give identical output matrices.
    """

    in_dims: int
    out_dims: int
    kind: str  # 'linear' | 'builtin' | 'external'
    eval_fn: EvalFn
    name: str = ""
    matrix: Optional[np.ndarray] = None  # set iff kind == 'linear'
    default_space: Optional[InputSpace] = None
    exact_cov: Optional[Callable] = None  # (space, subset) -> CovarianceTriple
    params: dict = field(default_factory=dict)

    def evaluate(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2:
            raise ContractError(f"inputs must be a 2-D matrix, got ndim={inputs.ndim}")
        if inputs.shape[1] != self.in_dims:
            raise ContractError(
                f"model expects {self.in_dims} input columns, got {inputs.shape[1]}"
            )
        out = np.asarray(self.eval_fn(inputs), dtype=float)
        if out.shape != (inputs.shape[0], self.out_dims):
            raise ContractError(
                f"model produced shape {out.shape}, expected {(inputs.shape[0], self.out_dims)}"
            )
        return out

    def space(self) -> InputSpace:
        if self.default_space is None:
            raise ConfigurationError(f"model {self.name!r} has no default input space")
        return self.default_space


def eval_model(model: VectorModel, inputs: np.ndarray) -> np.ndarray:
    """Row-wise evaluation: output row i is the model applied to input row i."""
    return model.evaluate(inputs)


def linear_model(
    matrix: np.ndarray,
    default_space: Optional[InputSpace] = None,
    name: str = "linear",
) -> VectorModel:
    """Model x -> A x for a k-by-p matrix A."""
    a = np.array(matrix, dtype=float)
    if a.ndim != 2:
        raise ConfigurationError(f"linear model matrix must be 2-D, got ndim={a.ndim}")
    a.flags.writeable = False
    k, p = a.shape

    def _eval(x: np.ndarray) -> np.ndarray:
        return x @ a.T

    from .oracle import covariances_linear  # deferred: oracle imports this module

    def _exact(space: InputSpace, subset) -> object:
        return covariances_linear(a, space.variances(), subset)

    return VectorModel(
        in_dims=p,
        out_dims=k,
        kind="linear",
        eval_fn=_eval,
        name=name,
        matrix=a,
        default_space=default_space or InputSpace.normal(p),
        exact_cov=_exact,
    )


def apply_transform(model: VectorModel, transform: OutputTransform) -> VectorModel:
    """Left-compose the model with an output transform.

    Linear models stay linear (the matrices are folded); other kinds get a
    wrapped evaluator. Any attached exact covariance oracle is composed too.
    """
    if transform.out_dims is not None and transform.out_dims != model.out_dims:
        raise ContractError(
            f"transform is {transform.out_dims}x{transform.out_dims} but model has "
            f"{model.out_dims} outputs"
        )
    o = transform.as_matrix(model.out_dims)

    if model.kind == "linear":
        return linear_model(
            o @ model.matrix,
            default_space=model.default_space,
            name=f"{model.name}+{transform.kind}",
        )

    base_eval = model.eval_fn
    if transform.kind == "homothety":
        lam = float(transform.scale)

        def _eval(x: np.ndarray) -> np.ndarray:
            return lam * base_eval(x)

    else:

        def _eval(x: np.ndarray) -> np.ndarray:
            return base_eval(x) @ o.T

    base_oracle = model.exact_cov
    composed_oracle = None
    if base_oracle is not None:
        def composed_oracle(space, subset):
            return base_oracle(space, subset).left_compose(o)

    return VectorModel(
        in_dims=model.in_dims,
        out_dims=model.out_dims,
        kind=model.kind,
        eval_fn=_eval,
        name=f"{model.name}+{transform.kind}",
        default_space=model.default_space,
        exact_cov=composed_oracle,
        params=dict(model.params),
    )


# ---------------------------------------------------------------------------
# built-in corpus
# ---------------------------------------------------------------------------


def _make_identity_2() -> VectorModel:
    # the two-input, two-output identity map; unit-variance inputs give
    # total covariance Id_2, the textbook counterexample configuration
    return linear_model(np.eye(2), default_space=InputSpace.normal(2), name="identity_2")


def _make_linear(matrix=None) -> VectorModel:
    if matrix is None:
        raise ConfigurationError("corpus model 'linear' requires a 'matrix' parameter")
    return linear_model(np.asarray(matrix, dtype=float))


def _make_sum_prod() -> VectorModel:
    def _eval(x: np.ndarray) -> np.ndarray:
        return np.stack([x[:, 0] + x[:, 1], x[:, 0] * x[:, 1]], axis=1)

    return VectorModel(
        in_dims=2,
        out_dims=2,
        kind="builtin",
        eval_fn=_eval,
        name="sum_prod",
        default_space=InputSpace.uniform(2),
    )


def _make_u_only(dims: int = 2, coords=(0,)) -> VectorModel:
    """Model whose outputs depend only on the given coordinates: (sum over coords, 0).

    The zero-padded second output makes the total covariance singular, so this
    entry is meant for estimator edge tests (frozen pair equals the original),
    not for exact-index oracles.
    """
    coords = tuple(sorted(int(c) for c in coords))
    if not coords or coords[0] < 0 or coords[-1] >= dims:
        raise ConfigurationError(f"u_only coords {coords} out of range for dims={dims}")

    def _eval(x: np.ndarray) -> np.ndarray:
        g = x[:, coords].sum(axis=1)
        return np.stack([g, np.zeros_like(g)], axis=1)

    return VectorModel(
        in_dims=dims,
        out_dims=2,
        kind="builtin",
        eval_fn=_eval,
        name="u_only",
        default_space=InputSpace.uniform(dims),
        params={"dims": dims, "coords": coords},
    )


def _make_constant(values=(1.0, 2.0), dims: int = 2) -> VectorModel:
    values = tuple(float(v) for v in values)

    def _eval(x: np.ndarray) -> np.ndarray:
        return np.tile(values, (x.shape[0], 1))

    return VectorModel(
        in_dims=dims,
        out_dims=len(values),
        kind="builtin",
        eval_fn=_eval,
        name="constant",
        default_space=InputSpace.uniform(dims),
        params={"values": values, "dims": dims},
    )


_CORPUS: dict[str, Callable[..., VectorModel]] = {
    "identity_2": _make_identity_2,
    "linear": _make_linear,
    "sum_prod": _make_sum_prod,
    "u_only": _make_u_only,
    "constant": _make_constant,
}


def corpus_names() -> tuple[str, ...]:
    return tuple(sorted(_CORPUS))


def get_model(name: str, **params) -> VectorModel:
    """Instantiate a corpus model by name; unknown names raise ConfigurationError."""
    try:
        factory = _CORPUS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; corpus: {', '.join(corpus_names())}"
        ) from None
    return factory(**params)


# ---------------------------------------------------------------------------
# external tabulated models
# ---------------------------------------------------------------------------


def load_external_model(path: str) -> VectorModel:
    """Read a tabulated model from CSV with header x1..xp,y1..yk.

    Evaluation is an exact lookup of previously tabulated rows; asking for an
    input that is not in the table is a contract error. Repeated x rows must
    agree (the map has to be deterministic).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty external model file") from None
        header = [h.strip() for h in header]
        p = sum(1 for h in header if h.startswith("x"))
        k = sum(1 for h in header if h.startswith("y"))
        expected = [f"x{i}" for i in range(1, p + 1)] + [f"y{i}" for i in range(1, k + 1)]
        if p == 0 or k == 0 or header != expected:
            raise ConfigurationError(
                f"{path}: external model header must be x1..xp,y1..yk, got {','.join(header)}"
            )
        table: dict[bytes, np.ndarray] = {}
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = np.array([float(v) for v in row])
            if vals.shape[0] != p + k:
                raise ConfigurationError(f"{path}:{row_num}: expected {p + k} columns")
            key = vals[:p].tobytes()
            y = vals[p:]
            if key in table and not np.array_equal(table[key], y):
                raise ConfigurationError(
                    f"{path}:{row_num}: conflicting outputs for a repeated input row"
                )
            table[key] = y
    if not table:
        raise ConfigurationError(f"{path}: external model has no data rows")

    def _eval(x: np.ndarray) -> np.ndarray:
        out = np.empty((x.shape[0], k))
        for i in range(x.shape[0]):
            key = np.ascontiguousarray(x[i]).tobytes()
            try:
                out[i] = table[key]
            except KeyError:
                raise ContractError(
                    f"input row {x[i].tolist()} is not among the tabulated evaluations"
                ) from None
        return out

    return VectorModel(
        in_dims=p, out_dims=k, kind="external", eval_fn=_eval, name=path, params={"rows": len(table)}
    )
