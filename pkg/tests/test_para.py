import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catarch import functor as fk
from catarch import para as pa
from catarch.errors import ShapeMismatch
from catarch.nngraph import GraphBuilder


def layer(n_in, n_out, act="tanh", name="W"):
    b = GraphBuilder()
    x = b.input("x", (n_in,))
    h = b.bias(b.linear(b.param(name, (n_out, n_in)), x), b.param(name + "_b", (n_out,)))
    b.output("y", b.pointwise(act, h))
    param = pa.ParamShape(((name, (n_out, n_in)), (name + "_b", (n_out,))))
    return pa.para_from_builder(b, param, [("x", (n_in,))], [("y", (n_out,))])


def direct(p, x, n_in, n_out):
    W = p[: n_out * n_in].reshape(n_out, n_in)
    return np.tanh(W @ x + p[n_out * n_in:])


seeds = st.integers(0, 2 ** 31 - 1)


@given(seeds)
def test_compose_matches_direct(seed):
    rng = np.random.default_rng(seed)
    f, g = layer(3, 4), layer(4, 2)
    h = pa.para_compose(g, f)
    assert h.param.size() == f.param.size() + g.param.size()
    assert h.param.names == ("g.W", "g.W_b", "f.W", "f.W_b")
    q, p, x = rng.standard_normal(10), rng.standard_normal(16), rng.standard_normal(3)
    want = direct(q, direct(p, x, 3, 4), 4, 2)
    assert np.allclose(h(np.concatenate([q, p]), x), want, atol=1e-14, rtol=0)


@given(seeds)
def test_associativity(seed):
    rng = np.random.default_rng(seed)
    f, g, h = layer(2, 3), layer(3, 3), layer(3, 1)
    left = pa.para_compose(pa.para_compose(h, g), f)
    right = pa.para_compose(h, pa.para_compose(g, f))
    assert left.param.shapes == right.param.shapes
    p = rng.standard_normal(left.param.size())
    x = rng.standard_normal(2)
    assert np.array_equal(left(p, x), right(p, x))


@given(seeds)
def test_unit_laws(seed):
    rng = np.random.default_rng(seed)
    f = layer(3, 2)
    left = pa.para_compose(pa.para_identity([(2,)]), f)
    right = pa.para_compose(f, pa.para_identity([(3,)]))
    p, x = rng.standard_normal(8), rng.standard_normal(3)
    assert np.array_equal(left(p, x), f(p, x))
    assert np.array_equal(right(p, x), f(p, x))


def test_embed_is_functorial():
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    B = np.array([[3.0, 1.0]])
    composed = pa.para_compose(pa.para_embed(B), pa.para_embed(A))
    assert composed.param.size() == 0
    x = np.array([0.5, -2.0])
    assert np.array_equal(composed([], x), (B @ A) @ x)
    with pytest.raises(ShapeMismatch):
        pa.para_embed(layer(1, 1))


def test_compose_type_error():
    with pytest.raises(ShapeMismatch):
        pa.para_compose(layer(3, 1), layer(2, 2))


@given(seeds)
def test_reparam_contravariance(seed):
    rng = np.random.default_rng(seed)
    f = layer(2, 1)
    sq = pa.ParamShape((("W", (1, 2)), ("W_b", (1,))))
    r = pa.reparam_identity(sq)
    s = pa.reparam_swap(pa.ParamShape((("W_b", (1,)),)), pa.ParamShape((("W", (1, 2)),)))
    # s: (W_b ++ W) -> (W ++ W_b), then r; applying in sequence equals applying the composite
    seq = pa.reparam_apply(s, pa.reparam_apply(r, f))
    once = pa.reparam_apply(pa.reparam_compose(r, s), f)
    q, x = rng.standard_normal(3), rng.standard_normal(2)
    assert np.array_equal(seq(q, x), once(q, x))
    assert np.allclose(seq(q, x), np.tanh(q[1:] @ x + q[0]), atol=1e-14)


def test_linear_reparam_triangle():
    f = layer(2, 1)
    M = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    r = pa.reparam_linear("q", M, "flat")
    flat_f = pa.reparam_apply(pa.reparam_compose(_unflatten(), pa.reparam_identity(pa.ParamShape((("flat", (3,)),)))), f)
    tied = pa.reparam_apply(r, flat_f)
    assert tied.param.size() == 2
    rep = pa.check_reparam_triangle(r, flat_f, tied, samples=100)
    assert rep["holds"] and rep["max_residual"] == 0.0


def _unflatten():
    shape = pa.ParamShape((("W", (1, 2)), ("W_b", (1,))))
    return pa._reparam(shape, pa.ParamShape((("flat", (3,)),)),
                       lambda b, ins: b.split(ins["flat"], [(1, 2), (1,)]))


@given(seeds)
def test_weight_tie(seed):
    rng = np.random.default_rng(seed)
    f = layer(3, 3)
    twice = pa.para_compose(f, f)
    tied = pa.weight_tie(twice)
    assert tied.param.size() == f.param.size() == 12
    p, x = rng.standard_normal(12), rng.standard_normal(3)
    assert np.array_equal(tied(p, x), f(p, f(p, x)))
    assert np.array_equal(tied(p, x), twice(np.concatenate([p, p]), x))
    assert sum(n.op == "copy" for n in tied.body.nodes) == 2


def test_tie_counts():
    f = layer(4, 5)
    assert pa.para_compose(f, layer(5, 4)).param.size() == 2 * 4 * 5 + 9
    assert pa.weight_tie(pa.para_compose(layer(4, 4), layer(4, 4))).param.size() == 20
    with pytest.raises(ShapeMismatch):
        pa.weight_tie(layer(2, 2))
    with pytest.raises(ShapeMismatch):
        pa.weight_tie(pa.para_compose(layer(3, 4), layer(4, 3)))


class TestComonoid:
    P = pa.ParamShape((("w", (2,)), ("m", (2, 2))))

    def test_counit(self):
        copy, delete, ident = pa.reparam_copy(self.P), pa.reparam_delete(self.P), pa.reparam_identity(self.P)
        rng = np.random.default_rng(3)
        q = rng.standard_normal(self.P.size())
        # (delete x id) after copy == id, and likewise on the right
        left = pa.reparam_compose(pa.reparam_tensor(delete, ident), copy)
        right = pa.reparam_compose(pa.reparam_tensor(ident, delete), copy)
        assert np.array_equal(left.flat(q), ident.flat(q))
        assert np.array_equal(right.flat(q), ident.flat(q))

    def test_coassociative(self):
        copy, ident = pa.reparam_copy(self.P), pa.reparam_identity(self.P)
        q = np.arange(self.P.size(), dtype=float)
        a = pa.reparam_compose(pa.reparam_tensor(copy, ident), copy)
        b = pa.reparam_compose(pa.reparam_tensor(ident, copy), copy)
        assert np.array_equal(a.flat(q), b.flat(q))
        assert np.array_equal(a.flat(q), np.tile(q, 3))

    def test_cocommutative(self):
        copy = pa.reparam_copy(self.P)
        swap = pa.reparam_swap(self.P, self.P)
        q = np.linspace(0, 1, self.P.size())
        assert np.array_equal(pa.reparam_compose(swap, copy).flat(q), copy.flat(q))

    def test_delete_ignores_parameter(self):
        f = pa.para_embed(np.eye(2))
        g = pa.reparam_apply(pa.reparam_delete(self.P), f)
        assert g.param.size() == 6
        x = np.array([1.0, 2.0])
        assert np.array_equal(g(np.zeros(6), x), g(np.ones(6), x))


def test_json_roundtrip():
    f = pa.weight_tie(pa.para_compose(layer(2, 2), layer(2, 2)))
    d = json.loads(json.dumps(f.to_dict()))
    g = pa.ParaMap.from_dict(d)
    p, x = np.linspace(-1, 1, 6), np.array([0.3, -0.7])
    assert np.array_equal(f(p, x), g(p, x))


class TestLift:
    def test_list_lift(self):
        shape = fk.list_shape()
        f = layer(1, 1)
        lf = pa.para_lift(shape, f)
        p = np.array([0.5, 0.1])
        assert lf(p, fk.Inl(fk.UNIT)) == fk.Inl(fk.UNIT)
        out = lf(p, fk.Inr(("a", np.array([2.0]))))
        assert out.value[0] == "a" and np.allclose(out.value[1], np.tanh(0.5 * 2 + 0.1))

    @given(seeds)
    def test_functoriality(self, seed):
        rng = np.random.default_rng(seed)
        shape = fk.tree_shape()
        f, g = layer(2, 3), layer(3, 2)
        whole = pa.para_lift(shape, pa.para_compose(g, f))
        parts = pa.lifted_compose(pa.para_lift(shape, g), pa.para_lift(shape, f))
        p = rng.standard_normal(whole.param.size())
        assert parts.param.shapes == whole.param.shapes
        v = fk.Inr((rng.standard_normal(2), rng.standard_normal(2)))
        a, b = whole(p, v).value, parts(p, v).value
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_shared_parameter_at_every_position(self):
        shape = fk.tree_shape()
        lf = pa.para_lift(shape, pa.para_embed(np.array([[2.0]])))
        out = lf([], fk.Inr((np.array([1.0]), np.array([3.0])))).value
        assert [float(o[0]) for o in out] == [2.0, 6.0]

    def test_lift_requires_single_port(self):
        with pytest.raises(ShapeMismatch):
            pa.para_lift(fk.list_shape(), pa.para_identity([(1,), (1,)]))
