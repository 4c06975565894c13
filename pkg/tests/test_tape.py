import numpy as np
import pytest

from aec import tape

from oracles import finite_difference


def check_grad(build, *arrays, step=1e-6, tol=1e-6):
    """Compare tape gradients of a scalar graph against central differences."""
    tensors = [tape.Tensor(a) for a in arrays]
    out = build(*tensors)
    out.backward()
    for tensor, array in zip(tensors, arrays):
        fd = finite_difference(lambda: float(build(*[tape.Tensor(a) for a in arrays]).data),
                               array, step=step)
        assert np.abs(tensor.grad - fd).max() < tol


def test_add_mul_broadcast():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(3,))
    check_grad(lambda x, y: tape.tsum(tape.mul(tape.add(x, y), tape.add(x, y))), a, b)


def test_div_sqrt_exp_log():
    rng = np.random.default_rng(1)
    a = rng.uniform(0.5, 2.0, size=(5,))
    b = rng.uniform(0.5, 2.0, size=(5,))
    check_grad(
        lambda x, y: tape.tsum(tape.log(tape.add(tape.div(tape.exp(x), tape.sqrt(y)), 1.0))),
        a, b,
    )


def test_linear_layer():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 4))
    w = rng.normal(size=(3, 4))
    check_grad(lambda xx, ww: tape.tsum(tape.mul(tape.linear(xx, ww), tape.linear(xx, ww))), x, w)


def test_relu_sigmoid():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(10,)) + 0.05  # keep clear of the relu kink
    check_grad(lambda x: tape.tsum(tape.mul(tape.relu(x), tape.sigmoid(x))), a)


def test_mean_axis():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(7, 2))
    check_grad(lambda x: tape.tsum(tape.mul(tape.tmean(x, axis=0), tape.tmean(x, axis=0))), a)


def test_batch_normalize_values_and_grad():
    rng = np.random.default_rng(5)
    a = rng.normal(loc=3.0, scale=2.0, size=(20, 4))
    normalized, mean, var = tape.batch_normalize(tape.Tensor(a), 1e-6)
    assert np.abs(normalized.data.mean(axis=0)).max() < 1e-12
    assert np.abs(normalized.data.var(axis=0) - 1.0).max() < 1e-5
    assert mean.data == pytest.approx(a.mean(axis=0))
    assert var.data == pytest.approx(a.var(axis=0))
    check_grad(
        lambda x: tape.tsum(tape.mul(tape.batch_normalize(x, 1e-6)[0],
                                     tape.batch_normalize(x, 1e-6)[0])),
        a, tol=1e-5,
    )


def test_cross_entropy_matches_direct():
    rng = np.random.default_rng(6)
    logits = rng.normal(size=(9, 4))
    labels = rng.integers(0, 4, size=9)
    ce = tape.cross_entropy(tape.Tensor(logits), labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    direct = -np.log(probs[np.arange(9), labels]).mean()
    assert float(ce.data) == pytest.approx(direct)
    # gradient equals (softmax - onehot) / n
    t = tape.Tensor(logits)
    out = tape.cross_entropy(t, labels)
    out.backward()
    expected = probs.copy()
    expected[np.arange(9), labels] -= 1.0
    expected /= 9
    assert np.abs(t.grad - expected).max() < 1e-12


def test_shared_node_accumulates():
    a = tape.Tensor(np.array([2.0]))
    b = tape.mul(a, a)  # uses the same tensor twice
    c = tape.add(b, a)
    c.backward()
    assert a.grad == pytest.approx([2 * 2.0 + 1.0])


def test_backward_needs_scalar():
    with pytest.raises(ValueError):
        tape.Tensor(np.ones(3)).backward()
