"""Architecture construction: parameter counts, shape walks, and errors."""

import numpy as np
import pytest

from bayesprune.models import ModelSpec, build_cnn, build_fcn, build_model, conv_stack_output
from bayesprune.nn import Dense


def test_fcn_mnist_parameter_count():
    # closed-form oracle: 784*256 + 256 + 256*128 + 128 + 128*10 + 10
    closed_form = 784 * 256 + 256 + 256 * 128 + 128 + 128 * 10 + 10
    assert closed_form == 235146
    net = build_fcn(ModelSpec(kind="fcn", input_shape=(1, 28, 28)))
    assert net.n_parameters() == closed_form
    assert sum(p.size for p in net.parameters().values()) == closed_form


def test_fcn_cifar_first_dense_shape():
    net = build_fcn(ModelSpec(kind="fcn", input_shape=(3, 32, 32)))
    first = next(l for l in net.layers if isinstance(l, Dense))
    assert first.params["w"].shape == (3072, 256)


def test_fcn_rejects_zero_hidden():
    with pytest.raises(ValueError, match="positive"):
        build_fcn(ModelSpec(kind="fcn", input_shape=(1, 28, 28), hidden_sizes=(0, 128)))


def test_cnn_mnist_flat_size():
    # shape walk: 28 -> 26 -> 13 -> 11 -> 5, so 64*5*5 = 1600
    assert conv_stack_output((1, 28, 28)) == (64, 5, 5)
    net = build_cnn(ModelSpec(kind="cnn", input_shape=(1, 28, 28)))
    head = next(l for l in net.layers if isinstance(l, Dense))
    assert head.params["w"].shape == (1600, 128)
    # verified by an actual forward pass
    out = net.forward(np.zeros((2, 1, 28, 28)))
    assert out.shape == (2, 10)


def test_cnn_cifar_flat_size():
    # 32 -> 30 -> 15 -> 13 -> 6, so 64*6*6 = 2304
    assert conv_stack_output((3, 32, 32)) == (64, 6, 6)
    net = build_cnn(ModelSpec(kind="cnn", input_shape=(3, 32, 32)))
    head = next(l for l in net.layers if isinstance(l, Dense))
    assert head.params["w"].shape == (2304, 128)


def test_cnn_input_too_small():
    with pytest.raises(ValueError, match="too small"):
        build_cnn(ModelSpec(kind="cnn", input_shape=(1, 4, 4)))


@pytest.mark.parametrize(
    "kind,shape",
    [("fcn", (1, 28, 28)), ("fcn", (3, 32, 32)), ("cnn", (1, 28, 28)), ("cnn", (3, 32, 32))],
)
def test_forward_shape_is_batch_by_classes(kind, shape):
    rng = np.random.default_rng(0)
    net = build_model(ModelSpec(kind=kind, input_shape=shape), rng)
    out = net.forward(rng.normal(size=(3,) + shape))
    assert out.shape == (3, 10)
    assert np.isfinite(out).all()


def test_parameter_enumeration_stable():
    spec = ModelSpec(kind="cnn", input_shape=(1, 28, 28))
    names_a = list(build_cnn(spec).parameters())
    names_b = list(build_cnn(spec, np.random.default_rng(5)).parameters())
    assert names_a == names_b
    assert names_a == [
        "conv1.w",
        "conv1.b",
        "conv2.w",
        "conv2.b",
        "fc1.w",
        "fc1.b",
        "fc2.w",
        "fc2.b",
    ]
    assert list(build_cnn(spec).prunable_weights()) == ["conv1.w", "conv2.w", "fc1.w", "fc2.w"]


def test_seeded_init_is_reproducible():
    spec = ModelSpec(kind="fcn", input_shape=(1, 8, 8), hidden_sizes=(16, 8))
    a = build_fcn(spec, np.random.default_rng(3)).parameters()
    b = build_fcn(spec, np.random.default_rng(3)).parameters()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])


def test_kaiming_bound_and_zero_bias():
    spec = ModelSpec(kind="fcn", input_shape=(1, 8, 8), hidden_sizes=(16, 8))
    net = build_fcn(spec, np.random.default_rng(4))
    params = net.parameters()
    bound = np.sqrt(6.0 / 64)
    assert np.abs(params["fc1.w"]).max() <= bound
    np.testing.assert_array_equal(params["fc1.b"], np.zeros(16))


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown model kind"):
        build_model(ModelSpec(kind="mlp", input_shape=(1, 8, 8)))
