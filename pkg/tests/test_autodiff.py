import itertools

import numpy as np
import pytest

from e2ecc import autodiff as ad
from e2ecc.autodiff import Tensor, finite_diff_check
from e2ecc.gf2 import gf2_matmul
from e2ecc.gradcheck import run_suite


def leaf(x):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)


def test_softmax_rows_sum_to_one(rng):
    p = ad.softmax(Tensor(rng.standard_normal((3, 5, 5))))
    assert np.allclose(p.data.sum(-1), 1.0)


def test_masked_softmax_zeroes_masked_entries(rng):
    mask = np.zeros((4, 4))
    np.fill_diagonal(mask, -np.inf)
    p = ad.softmax(Tensor(rng.standard_normal((2, 4, 4))), mask=mask)
    assert np.all(np.diagonal(p.data, axis1=-2, axis2=-1) == 0)


def test_bce_at_zero_logit():
    assert ad.bce_with_logits(Tensor([0.0]), np.array([0.5])).item() == pytest.approx(np.log(2))


def test_bce_stable_for_large_logits():
    v = ad.bce_with_logits(Tensor([800.0, -800.0]), np.array([1.0, 0.0])).item()
    assert v == pytest.approx(0.0, abs=1e-12)


def test_sum_grad_is_one(rng):
    x = leaf(rng.standard_normal((3, 4)))
    ad.sum(x).backward()
    assert np.array_equal(x.grad, np.ones((3, 4)))


def test_quadratic_grad(rng):
    A = rng.standard_normal((5, 3))
    x = leaf(rng.standard_normal(3))
    r = Tensor(A) @ ad.reshape(x, (3, 1))
    ad.sum(r * r).backward()
    assert np.allclose(x.grad, 2 * A.T @ A @ x.data)


def test_diamond_accumulates():
    x = leaf(3.0)
    y = x * 2.0
    (y * y + y).backward()
    # d/dx (4x^2 + 2x) = 8x + 2
    assert x.grad == pytest.approx(26.0)


def test_leaf_grads_accumulate_across_calls():
    x = leaf([1.0, 2.0])
    ad.sum(x).backward()
    ad.sum(x * 3.0).backward()
    assert np.array_equal(x.grad, [4.0, 4.0])


def test_nonscalar_backward_rejected():
    with pytest.raises(ValueError):
        (leaf([1.0, 2.0]) * 2.0).backward()


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        leaf(np.ones((2, 3))) @ leaf(np.ones((2, 3)))


def test_no_grad_builds_no_graph():
    x = leaf([1.0])
    with ad.no_grad():
        y = x * 2.0
    assert not y.requires_grad and not ad.grad_enabled() is False


def test_finite_diff_linear_is_exact(rng):
    A = rng.standard_normal((4, 3))
    # a linear map has no truncation error, so a large step only cuts rounding
    err = finite_diff_check(lambda x: Tensor(A) @ x, [rng.standard_normal((3, 2))], eps=1e-2)
    assert err <= 1e-9


def test_gradient_suite_passes():
    results = run_suite(seed=0)
    bad = [(r.name, r.error) for r in results if not r.ok]
    assert not bad


# -- straight-through operators -------------------------------------------

def test_ste_examples():
    u = leaf([0.3, -0.2, 0.0])
    y = ad.ste_binarize(u)
    assert np.array_equal(y.data, [0, 1, 0])
    y.backward(np.array([2.0, 2.0, 2.0]))
    assert np.array_equal(u.grad, [-1.0, -1.0, -1.0])
    u = leaf([0.7])
    ad.ste_binarize(u, tau=0.5).backward(np.ones(1))
    assert u.grad[0] == 0.0


def test_modulo_ste_gate_closed_above_one():
    G = leaf(np.ones((3, 1)))
    x = ad.modulo_ste_encode(np.ones(3), G)
    assert x.data[0] == 1.0  # 3 mod 2
    x.backward(np.ones(1))
    assert not G.grad.any()


def test_polar_encode_equals_gf2(rng):
    for k in (1, 3, 6):
        msgs = np.array(list(itertools.product([0, 1], repeat=k)))
        for _ in range(5):
            G = rng.integers(0, 2, (k, 9))
            x = ad.polar_encode(msgs, Tensor(G.astype(float)))
            assert np.array_equal(x.data, gf2_matmul(msgs, G))


def test_polar_encode_zero_message_zero_gradient(rng):
    G = leaf(rng.integers(0, 2, (4, 7)))
    x = ad.polar_encode(np.zeros(4), G)
    assert not x.data.any()
    x.backward(rng.standard_normal(7))
    assert not G.grad.any()


def test_polar_encode_rejects_non_binary():
    with pytest.raises(ValueError):
        ad.polar_encode([0.5, 1.0], Tensor(np.ones((2, 3))))


def _rep_code_syndrome(c, m, noise):
    """Repetition (3,1): G = (1 c1 c2), H = [[c1,1,0],[c2,0,1]], y = mG xor n."""
    one = Tensor(np.ones(1))
    G = ad.reshape(ad.concat([one, c], axis=0), (1, 3))
    x = ad.polar_encode(np.array([m]), G)
    stack = Tensor(np.vstack([np.eye(3), np.eye(3)]))
    y = ad.polar_matmul(ad.concat([x, Tensor(noise)], axis=0), stack)
    H = ad.concat([ad.reshape(c, (2, 1)), Tensor(np.eye(2))], axis=1)
    return ad.polar_matmul(y, H.T), y


@pytest.mark.parametrize("m,n1,n2", list(itertools.product([0, 1], repeat=3)))
@pytest.mark.parametrize("c1,c2", list(itertools.product([0, 1], repeat=2)))
def test_repetition_syndrome_gradient_closed_form(m, n1, n2, c1, c2):
    c = leaf([c1, c2])
    s, y = _rep_code_syndrome(c, m, np.array([n1, n2, 0.0]))
    s[0].backward()
    y1, y2 = y.data[0], y.data[1]
    want = y1 * (1 - 2 * y2) + m * (1 - 2 * c1 * y1) * (1 - 2 * n2)
    assert c.grad[0] == want
    assert c.grad[1] == 0.0
    if m == 0:
        assert c.grad[0] == y1 * (1 - 2 * y2)
