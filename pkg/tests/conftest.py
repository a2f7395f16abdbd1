import numpy as np
import pytest

from protoaudio import autodiff as ad


def finite_difference(fn, arrays, h=1e-4):
    """Central-difference gradients of a scalar function of numpy arrays."""
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = fn(*arrays)
            flat[i] = orig - h
            lo = fn(*arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    denom = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return np.abs(analytic - numeric).max() / denom


def assert_grad_matches(fn_tensor, arrays, rtol=1e-4, h=1e-4):
    """Check every analytic gradient of a scalar-valued tensor function
    against central finite differences."""
    tensors = [ad.Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = fn_tensor(*tensors)
    ad.backward(loss)

    def scalar_fn(*arrs):
        with ad.no_grad():
            return float(fn_tensor(*[ad.Tensor(a) for a in arrs]).data)

    numeric = finite_difference(scalar_fn, [a.copy() for a in arrays], h=h)
    for t, num in zip(tensors, numeric):
        assert t.grad is not None
        err = relative_error(t.grad, num)
        assert err < rtol, f"gradient mismatch: relative error {err:.2e}"


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
