import numpy as np
import pytest

from conftest import assert_grad_matches
from protoaudio import autodiff as ad


def test_conv_identity_kernel(rng):
    x = ad.Tensor(rng.standard_normal((2, 1, 4, 4)))
    w = ad.Tensor(np.ones((1, 1, 1, 1)))
    b = ad.Tensor(np.zeros(1))
    out = ad.conv2d(x, w, b, stride=1, pad=0)
    np.testing.assert_array_equal(out.data, x.data)


def test_conv_zero_weight_zero_output(rng):
    x = ad.Tensor(rng.standard_normal((1, 3, 6, 6)))
    w = ad.Tensor(np.zeros((4, 3, 3, 3)))
    b = ad.Tensor(np.zeros(4))
    out = ad.conv2d(x, w, b, stride=1, pad=1)
    assert np.all(out.data == 0.0)


def conv_loop_oracle(x, w, b, stride, pad):
    """Nested-loop cross-correlation, independent of the kernel backends."""
    bs, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((bs, cout, oh, ow))
    for n in range(bs):
        for co in range(cout):
            for r in range(oh):
                for c in range(ow):
                    patch = xp[n, :, r * stride : r * stride + kh, c * stride : c * stride + kw]
                    out[n, co, r, c] = (patch * w[co]).sum() + b[co]
    return out


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1)])
def test_conv_matches_loop_oracle(rng, stride, pad):
    x = rng.standard_normal((1, 1, 5, 5)) if stride == 2 else rng.standard_normal((1, 1, 4, 4))
    w = rng.standard_normal((2, 1, 3, 3))
    b = rng.standard_normal(2)
    out = ad.conv2d(ad.Tensor(x), ad.Tensor(w), ad.Tensor(b), stride=stride, pad=pad)
    np.testing.assert_allclose(out.data, conv_loop_oracle(x, w, b, stride, pad), atol=1e-12)


def test_conv_backward_finite_differences(rng):
    x = rng.standard_normal((1, 1, 4, 4))
    w = rng.standard_normal((2, 1, 3, 3))
    b = rng.standard_normal(2)
    assert_grad_matches(
        lambda xt, wt, bt: ad.sum_all(ad.mul(ad.conv2d(xt, wt, bt, 1, 1), ad.conv2d(xt, wt, bt, 1, 1))),
        [x, w, b],
    )


def test_conv_shape_mismatch_names_both_shapes(rng):
    x = ad.Tensor(rng.standard_normal((1, 3, 4, 4)))
    w = ad.Tensor(rng.standard_normal((2, 4, 3, 3)))
    b = ad.Tensor(np.zeros(2))
    with pytest.raises(ValueError) as exc:
        ad.conv2d(x, w, b)
    assert "(1, 3, 4, 4)" in str(exc.value) and "(2, 4, 3, 3)" in str(exc.value)


def test_relu_definition():
    out = ad.relu(ad.Tensor(np.array([-1.0, 0.0, 2.0])))
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])


def test_global_avg_pool_constant():
    x = ad.Tensor(np.full((2, 3, 4, 4), 2.5))
    out = ad.global_avg_pool(x)
    assert out.data.shape == (2, 3)
    np.testing.assert_allclose(out.data, 2.5)


def test_maxpool_requires_even_dims(rng):
    with pytest.raises(ValueError, match="even"):
        ad.maxpool2(ad.Tensor(rng.standard_normal((1, 1, 3, 4))))


def test_maxpool_values(rng):
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out = ad.maxpool2(ad.Tensor(x))
    np.testing.assert_array_equal(out.data[0, 0], [[5, 7], [13, 15]])


@pytest.mark.parametrize(
    "name,fn,shapes",
    [
        ("relu", lambda x: ad.sum_all(ad.mul(ad.relu(x), ad.relu(x))), [(5,)]),
        ("maxpool2", lambda x: ad.sum_all(ad.mul(ad.maxpool2(x), ad.maxpool2(x))), [(1, 1, 4, 4)]),
        ("gap", lambda x: ad.sum_all(ad.mul(ad.global_avg_pool(x), ad.global_avg_pool(x))), [(1, 2, 2, 2)]),
        (
            "linear",
            lambda x, w, b: ad.sum_all(ad.mul(ad.linear(x, w, b), ad.linear(x, w, b))),
            [(2, 3), (4, 3), (4,)],
        ),
        (
            "pairwise_sqdist",
            lambda q, c: ad.sum_all(ad.mul(ad.pairwise_sqdist(q, c), ad.pairwise_sqdist(q, c))),
            [(3, 2), (2, 2)],
        ),
        (
            "group_mean",
            lambda x: ad.sum_all(
                ad.mul(
                    ad.group_mean(x, np.array([0, 0, 1, 1]), 2),
                    ad.group_mean(x, np.array([0, 0, 1, 1]), 2),
                )
            ),
            [(4, 3)],
        ),
        ("slice_rows", lambda x: ad.sum_all(ad.mul(ad.slice_rows(x, 1, 3), ad.slice_rows(x, 1, 3))), [(4, 2)]),
    ],
)
def test_operator_backward_finite_differences(rng, name, fn, shapes):
    # relu needs inputs away from the kink for a clean finite-difference check.
    arrays = [rng.standard_normal(s) + (0.3 if name == "relu" else 0.0) for s in shapes]
    if name == "maxpool2":
        arrays = [a + np.linspace(0, 1, a.size).reshape(a.shape) for a in arrays]
    assert_grad_matches(fn, arrays)


def test_backward_sum_gives_ones(rng):
    x = ad.Tensor(rng.standard_normal(7), requires_grad=True)
    ad.backward(ad.sum_all(x))
    np.testing.assert_array_equal(x.grad, np.ones(7))


def test_backward_square_analytic():
    x = ad.Tensor(np.array([1.0, 2.0]), requires_grad=True)
    ad.backward(ad.sum_all(ad.mul(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_backward_accumulates_on_second_call():
    x = ad.Tensor(np.array([1.0, 2.0]), requires_grad=True)
    loss = ad.sum_all(ad.mul(x, x))
    ad.backward(loss)
    ad.backward(loss)
    np.testing.assert_allclose(x.grad, [4.0, 8.0])


def test_backward_requires_scalar(rng):
    x = ad.Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(ad.mul(x, x))


def test_composed_graph_finite_differences(rng):
    x = rng.standard_normal((2, 1, 4, 4))
    w = rng.standard_normal((2, 1, 3, 3)) * 0.5
    b = rng.standard_normal(2) * 0.1
    lw = rng.standard_normal((3, 2)) * 0.5
    lb = rng.standard_normal(3) * 0.1

    def network(xt, wt, bt, lwt, lbt):
        hidden = ad.global_avg_pool(ad.maxpool2(ad.relu(ad.conv2d(xt, wt, bt, 1, 1))))
        out = ad.linear(hidden, lwt, lbt)
        return ad.cross_entropy_logits(out, np.array([0, 2]))

    assert_grad_matches(network, [x, w, b, lw, lb])


def test_cross_entropy_uniform_logits():
    logits = ad.Tensor(np.zeros((4, 3)))
    loss = ad.cross_entropy_logits(logits, np.array([0, 1, 2, 0]))
    assert float(loss.data) == pytest.approx(np.log(3.0), rel=1e-12)


def test_no_grad_disables_graph(rng):
    x = ad.Tensor(rng.standard_normal(4), requires_grad=True)
    with ad.no_grad():
        out = ad.sum_all(ad.mul(x, x))
    assert not out.requires_grad
    assert out._parents == ()


# --- Adam -------------------------------------------------------------------

def test_adam_zero_gradient_no_update():
    p = ad.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.zeros(2)
    ad.adam_step([p], [ad.AdamState.for_param(p)])
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert p.grad is None


def test_adam_first_step_magnitude():
    p = ad.Tensor(np.array([0.5]), requires_grad=True)
    p.grad = np.ones(1)
    ad.adam_step([p], [ad.AdamState.for_param(p, lr=1e-3)])
    delta = p.data[0] - 0.5
    assert delta == pytest.approx(-1e-3, rel=1e-6)


def scalar_adam_oracle(theta, grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook scalar Adam, written independently of the module under test."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr * mhat / (vhat**0.5 + eps)
    return theta


def test_adam_two_steps_match_scalar_oracle():
    p = ad.Tensor(np.array([0.7]), requires_grad=True)
    state = ad.AdamState.for_param(p, lr=1e-3)
    for g in (0.3, -1.2):
        p.grad = np.array([g])
        ad.adam_step([p], [state])
    expected = scalar_adam_oracle(0.7, [0.3, -1.2])
    assert p.data[0] == pytest.approx(expected, abs=1e-12)


def test_adam_missing_gradient_errors():
    p = ad.Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError, match="missing gradient"):
        ad.adam_step([p], [ad.AdamState.for_param(p)])


# --- checkpoints --------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path, rng):
    params = {
        "conv.weight": ad.Tensor(rng.standard_normal((2, 1, 3, 3)), requires_grad=True),
        "conv.bias": ad.Tensor(rng.standard_normal(2), requires_grad=True),
    }
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(path, params)
    raw = path.read_bytes()
    assert raw[:4] == b"PSHT"
    loaded = ad.load_checkpoint(path)
    assert set(loaded) == set(params)
    for name in params:
        np.testing.assert_array_equal(loaded[name].data, params[name].data)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        ad.load_checkpoint(path)
