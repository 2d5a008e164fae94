import numpy as np
import pytest

from vecsobol import (
    ConfigurationError,
    ContractError,
    OutputTransform,
    apply_transform,
    corpus_names,
    eval_model,
    get_model,
    linear_model,
    load_external_model,
    sample_inputs,
)


def test_identity_model_eval():
    model = linear_model(np.eye(2))
    assert np.array_equal(eval_model(model, [[3.0, 4.0]]), [[3.0, 4.0]])


def test_diagonal_linear_eval():
    model = linear_model([[2.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(eval_model(model, [[1.0, 1.0]]), [[2.0, 1.0]])


def test_sum_prod_eval():
    model = get_model("sum_prod")
    assert np.array_equal(eval_model(model, [[0.5, 0.5]]), [[1.0, 0.25]])


def test_eval_is_bit_stable():
    model = get_model("sum_prod")
    x = sample_inputs(model.space(), 100, 5)
    assert np.array_equal(model.evaluate(x), model.evaluate(x.copy()))


def test_eval_dimension_contract():
    model = get_model("sum_prod")
    with pytest.raises(ContractError):
        eval_model(model, np.zeros((3, 3)))


def test_corpus_contents():
    names = corpus_names()
    for expected in ("identity_2", "linear", "sum_prod", "u_only", "constant"):
        assert expected in names
    with pytest.raises(ConfigurationError):
        get_model("nope")
    with pytest.raises(ConfigurationError):
        get_model("linear")  # matrix parameter is required


def test_u_only_ignores_complement():
    model = get_model("u_only", dims=3, coords=(0, 2))
    out = eval_model(model, [[1.0, 99.0, 2.0], [1.0, -5.0, 2.0]])
    assert np.array_equal(out[0], out[1])
    assert out[0, 0] == 3.0 and out[0, 1] == 0.0


def test_constant_model():
    model = get_model("constant")
    out = eval_model(model, np.zeros((4, 2)))
    assert np.array_equal(out, np.tile([1.0, 2.0], (4, 1)))


def test_swap_isometry_exchanges_coordinates():
    # the isometry that exchanges the two canonical basis vectors
    swap = OutputTransform(kind="isometry", matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
    model = apply_transform(linear_model(np.eye(2)), swap)
    assert np.array_equal(eval_model(model, [[1.0, 2.0]]), [[2.0, 1.0]])


def test_unit_homothety_is_identity():
    model = get_model("sum_prod")
    t = apply_transform(model, OutputTransform(kind="homothety", scale=1.0))
    x = sample_inputs(model.space(), 50, 1)
    assert np.array_equal(eval_model(t, x), eval_model(model, x))


def test_homothety_scales_outputs():
    model = apply_transform(get_model("sum_prod"), OutputTransform(kind="homothety", scale=2.0))
    assert np.array_equal(eval_model(model, [[0.5, 0.5]]), [[2.0, 0.5]])


def test_isometry_roundtrip_recovers_outputs():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    for model in (get_model("sum_prod"), get_model("identity_2")):
        fwd = apply_transform(model, OutputTransform(kind="isometry", matrix=q))
        back = apply_transform(fwd, OutputTransform(kind="isometry", matrix=q.T))
        x = sample_inputs(model.space(), 200, 8)
        assert np.max(np.abs(eval_model(back, x) - eval_model(model, x))) < 1e-12


def test_transform_validation():
    with pytest.raises(ConfigurationError):
        OutputTransform(kind="homothety", scale=0.0)
    with pytest.raises(ConfigurationError):
        OutputTransform(kind="isometry", matrix=np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        OutputTransform(kind="weird", scale=1.0)
    swap3 = OutputTransform(kind="isometry", matrix=np.eye(3))
    with pytest.raises(ContractError):
        apply_transform(get_model("sum_prod"), swap3)


def test_external_model_roundtrip(tmp_path):
    base = get_model("sum_prod")
    x = sample_inputs(base.space(), 20, 4)
    y = base.evaluate(x)
    path = tmp_path / "table.csv"
    rows = ["x1,x2,y1,y2"]
    for xi, yi in zip(x, y):
        rows.append(",".join(repr(float(v)) for v in (*xi, *yi)))
    path.write_text("\n".join(rows) + "\n")

    model = load_external_model(str(path))
    assert model.in_dims == 2 and model.out_dims == 2 and model.kind == "external"
    assert np.array_equal(model.evaluate(x), y)
    with pytest.raises(ContractError):
        model.evaluate(np.array([[123.0, 456.0]]))


def test_external_model_header_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        load_external_model(str(path))
