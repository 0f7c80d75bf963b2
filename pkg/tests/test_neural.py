import numpy as np
import pytest

from movant.neural import (
    AdamState,
    Mlp,
    adam_step,
    backward,
    forward,
    load_arrays,
    net_from,
    net_header,
    save_arrays,
    soft_update,
)
from movant.validation import gradient_check


def test_zero_net_outputs():
    net = Mlp(4, 3)
    assert np.array_equal(forward(net, np.ones(4)), np.zeros(3))
    (_, _, b), = net.layer_slices()[-1:]
    net.theta[b] = [0.1, -0.2, 0.3]
    np.testing.assert_array_equal(forward(net, np.ones(4)), [0.1, -0.2, 0.3])


def test_tanh_range():
    net = Mlp(5, 4, head="tanh", rng=np.random.default_rng(0))
    net.theta *= 20
    y = forward(net, np.random.default_rng(1).standard_normal((100, 5)) * 10)
    assert np.all(np.abs(y) <= 1.0)
    assert y.shape == (100, 4)


def test_batch_matches_single():
    net = Mlp(3, 2, hidden=(8, 6), rng=np.random.default_rng(2))
    X = np.random.default_rng(3).standard_normal((5, 3))
    np.testing.assert_allclose(forward(net, X), np.stack([forward(net, x) for x in X]), rtol=1e-12, atol=1e-15)


def test_linear_region_input_gradient():
    net = Mlp(3, 2, hidden=(4, 4))
    r = np.random.default_rng(4)
    mats = []
    for w, shape, b in net.layer_slices():
        W = np.abs(r.standard_normal(shape))
        net.theta[w] = W.ravel()
        net.theta[b] = 1.0
        mats.append(W)
    x = np.abs(r.standard_normal(3))
    g = r.standard_normal(2)
    _, gx = backward(net, x, g)
    np.testing.assert_allclose(gx, mats[0] @ mats[1] @ mats[2] @ g, rtol=1e-12)


def test_zero_upstream_gradient():
    net = Mlp(3, 2, rng=np.random.default_rng(5))
    grad, gx = backward(net, np.ones(3), np.zeros(2))
    assert not np.any(grad) and not np.any(gx)


@pytest.mark.parametrize("head", ["tanh", "identity"])
@pytest.mark.parametrize("seed", range(10))
def test_finite_difference(head, seed):
    assert gradient_check(np.random.default_rng(seed), head) <= 1e-4


def test_adam_first_step():
    st = AdamState(1, lr=0.01)
    p = np.zeros(1)
    adam_step(st, p, np.ones(1))
    assert p[0] == pytest.approx(-0.01, rel=1e-6)
    assert st.step == 1


def test_adam_zero_gradient_and_shape():
    st = AdamState(4)
    p = np.arange(4.0)
    for _ in range(10):
        adam_step(st, p, np.zeros(4))
    np.testing.assert_array_equal(p, np.arange(4.0))
    with pytest.raises(ValueError):
        adam_step(st, p, np.zeros(3))


def test_adam_deterministic():
    def run():
        r = np.random.default_rng(7)
        st = AdamState(6)
        p = r.standard_normal(6)
        for _ in range(20):
            adam_step(st, p, r.standard_normal(6))
        return p
    assert np.array_equal(run(), run())


def test_soft_update():
    r = np.random.default_rng(8)
    a, b = Mlp(3, 2, rng=r), Mlp(3, 2, rng=r)
    t = b.copy()
    soft_update(t, a, 0.0)
    assert np.array_equal(t.theta, b.theta)
    soft_update(t, a, 0.5)
    np.testing.assert_allclose(t.theta, 0.5 * (a.theta + b.theta), rtol=1e-15)
    soft_update(t, a, 1.0)
    assert np.array_equal(t.theta, a.theta)
    with pytest.raises(ValueError):
        soft_update(Mlp(3, 3), a, 0.5)
    with pytest.raises(ValueError):
        soft_update(Mlp(3, 2, head="tanh"), a, 0.5)


def test_init_is_seeded():
    a = Mlp(4, 2, rng=np.random.default_rng(11))
    b = Mlp(4, 2, rng=np.random.default_rng(11))
    assert np.array_equal(a.theta, b.theta)
    w, shape, _ = a.layer_slices()[0]
    assert np.all(np.abs(a.theta[w]) <= 1 / np.sqrt(shape[0]))


def test_checkpoint_roundtrip(tmp_path):
    net = Mlp(4, 2, hidden=(5, 3), head="tanh", rng=np.random.default_rng(12))
    save_arrays(tmp_path / "n.bin", {"net": net_header(net), "step": 17}, [("theta", net.theta)])
    header, arrays = load_arrays(tmp_path / "n.bin")
    back = net_from(header["net"], arrays["theta"])
    assert header["step"] == 17
    assert back.same_shape(net)
    assert back.theta.tobytes() == net.theta.tobytes()
    (tmp_path / "bad.bin").write_bytes(b"junk")
    with pytest.raises(ValueError):
        load_arrays(tmp_path / "bad.bin")
