import numpy as np
import pytest

from uavsec import autodiff as ad


def central_diff_grads(fn, params, step=1e-5):
    """Independent oracle: central finite differences of fn() w.r.t. each
    parameter tensor, elementwise."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn()
            flat[i] = orig - step
            lo = fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b))))


def check_grads(build, params, tol=1e-6):
    loss = build()
    for p in params:
        p.zero_grad()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = central_diff_grads(lambda: build().item(), params)
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n) <= tol


def test_matmul_identity():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    out = ad.matmul(ad.tensor(a), ad.tensor(np.eye(4)))
    np.testing.assert_array_equal(out.data, a)


def test_reduce_max_over_set_values():
    out = ad.reduce_max_over_set([ad.tensor([1.0, 5.0]), ad.tensor([3.0, 2.0])])
    np.testing.assert_array_equal(out.data, [3.0, 5.0])


def test_concat_values():
    out = ad.concat([ad.tensor([1.0, 2.0]), ad.tensor([3.0])], axis=0)
    np.testing.assert_array_equal(out.data, [1.0, 2.0, 3.0])


def test_prelu_values_and_slope_grad():
    slope = ad.param(np.array(0.25))
    assert ad.prelu(ad.tensor(2.0), slope).item() == 2.0
    out = ad.prelu(ad.tensor(-2.0), slope)
    assert out.item() == -0.5
    out.backward()
    assert slope.grad == pytest.approx(-2.0)


def test_square_root_gradient():
    x = ad.param(np.array(3.0))
    ad.square(x).backward()
    assert x.grad == pytest.approx(6.0)


def test_fanout_accumulates():
    x = ad.param(np.array(1.0))
    ad.add(x, x).backward()
    assert x.grad == pytest.approx(2.0)


def test_backward_requires_scalar_root():
    x = ad.param(np.ones(3))
    y = ad.square(x)
    with pytest.raises(ad.GradientError):
        y.backward()


def test_tanh_matmul_grad_matches_central_differences():
    rng = np.random.default_rng(1)
    w = ad.param(rng.standard_normal((3, 4)))
    x = ad.param(rng.standard_normal((4, 2)))

    def build():
        return ad.reduce_sum(ad.tanh(ad.matmul(w, x)))

    check_grads(build, [w, x])


def test_max_tie_breaks_to_lowest_index():
    a = ad.param(np.array([1.0, 7.0]))
    b = ad.param(np.array([1.0, 2.0]))
    out = ad.reduce_max_over_set([a, b])
    ad.reduce_sum(out).backward()
    np.testing.assert_array_equal(a.grad, [1.0, 1.0])  # tie at index 0 goes to a
    np.testing.assert_array_equal(b.grad, [0.0, 0.0])


def test_clamp_min_zero_subgradient_at_kink():
    x = ad.param(np.array([-1.0, 0.0, 2.0]))
    ad.reduce_sum(ad.clamp_min(x, 0.0)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])


def test_log_domain_error():
    with pytest.raises(ValueError):
        ad.log(ad.tensor([1.0, -2.0]))
    with pytest.raises(ValueError):
        ad.sqrt(ad.tensor(0.0))


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        ad.matmul(ad.tensor(np.ones((2, 3))), ad.tensor(np.ones((2, 3))))
    with pytest.raises(ValueError):
        ad.reduce_max_over_set([ad.tensor(np.ones(2)), ad.tensor(np.ones(3))])


def test_sgd_step():
    p = ad.param(np.array([1.0]))
    ad.sgd_step([p], [np.array([2.0])], lr=0.1)
    assert p.data[0] == pytest.approx(0.8)
    ad.sgd_step([p], [np.array([0.0])], lr=0.1)
    assert p.data[0] == pytest.approx(0.8)
    with pytest.raises(ValueError):
        ad.sgd_step([p], [np.zeros(3)], lr=0.1)


def test_no_grad_blocks_graph():
    x = ad.param(np.array(2.0))
    with ad.no_grad():
        y = ad.square(x)
    assert not y.requires_grad
    assert y._parents == ()


def test_tape_determinism():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 6))
    b = rng.standard_normal((6, 6))

    def run():
        x = ad.param(a.copy())
        y = ad.param(b.copy())
        out = ad.reduce_sum(ad.tanh(ad.matmul(x, y)))
        out.backward()
        return out.item(), x.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)


# --- random composite graphs over every primitive ------------------------

GRAPH_OPS = [
    "matmul", "add", "sub", "mul", "scalar_mul", "concat_slice", "reduce_sum",
    "max_set", "square", "sqrt", "log", "exp", "tanh", "prelu", "clamp_min",
]


def random_graph_value(mats, slope, rng):
    """Random DAG over all primitives; the pool holds (2, 4) tensors so every
    op is shape-preserving. Domain guards: log/sqrt see shifted squares, and
    kink ops (prelu, clamp, max ties) are offset away from their kinks."""
    pool = list(mats)

    def pick():
        return pool[int(rng.integers(len(pool)))]

    for _ in range(int(rng.integers(8, 14))):
        op = GRAPH_OPS[int(rng.integers(len(GRAPH_OPS)))]
        x = pick()
        if op == "matmul":
            pool.append(ad.matmul(x, ad.tensor(rng.standard_normal((4, 4)))))
        elif op == "add":
            pool.append(ad.add(x, pick()))
        elif op == "sub":
            pool.append(ad.sub(x, pick()))
        elif op == "mul":
            pool.append(ad.mul(x, pick()))
        elif op == "max_set":
            # shift one side so elementwise gaps stay > the fd step
            pool.append(ad.reduce_max_over_set([x, ad.add(pick(), 0.37)]))
        elif op == "scalar_mul":
            pool.append(ad.scalar_mul(x, float(rng.uniform(0.5, 2.0))))
        elif op == "concat_slice":
            left = ad.slice_axis(x, -1, 0, 2)
            right = ad.slice_axis(x, -1, 2, 4)
            pool.append(ad.concat([right, left], axis=-1))
        elif op == "reduce_sum":
            row = ad.reduce_sum(x, axis=-1, keepdims=True)
            pool.append(ad.add(pick(), row))  # broadcast back to (2, 4)
        elif op == "square":
            pool.append(ad.square(x))
        elif op == "sqrt":
            pool.append(ad.sqrt(ad.add(ad.square(x), 0.5)))
        elif op == "log":
            pool.append(ad.log(ad.add(ad.square(x), 0.5)))
        elif op == "exp":
            pool.append(ad.exp(ad.scalar_mul(ad.tanh(x), 2.0)))
        elif op == "tanh":
            pool.append(ad.tanh(x))
        elif op == "prelu":
            pool.append(ad.prelu(ad.add(x, 0.21), slope))
        elif op == "clamp_min":
            pool.append(ad.clamp_min(ad.add(x, 0.13), -0.4))
    total = ad.reduce_sum(ad.tanh(ad.scalar_mul(pool[-1], 0.5)))
    for t in pool[len(mats):-1]:
        total = ad.add(total, ad.reduce_sum(ad.tanh(ad.scalar_mul(t, 0.5))))
    return total


@pytest.mark.parametrize("trial", range(100))
def test_random_composite_graph_gradients(trial):
    rng = np.random.default_rng(1000 + trial)
    mats = [
        ad.param(rng.uniform(-1.2, 1.2, size=(2, 4))),
        ad.param(rng.uniform(-1.2, 1.2, size=(2, 4))),
    ]
    slope = ad.param(rng.uniform(0.1, 0.4, size=()))
    params = mats + [slope]

    def build():
        graph_rng = np.random.default_rng(2000 + trial)
        return random_graph_value(mats, slope, graph_rng)

    loss = build()
    for p in params:
        p.zero_grad()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = central_diff_grads(lambda: build().item(), params)
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n) <= 1e-5
