import json

import pytest
from hypothesis import given, strategies as st

from catarch import functor as fk
from catarch.errors import CapExceeded, ShapeMismatch

LIST = fk.list_shape()
TREE = fk.tree_shape()


def brute_tree_max(t):
    # independent recursion over the raw layers
    if isinstance(t.layer, fk.Inl):
        return t.layer.value
    left, right = t.layer.value
    return max(brute_tree_max(left), brute_tree_max(right))


class TestFmap:
    def test_acts_only_at_id(self):
        assert fk.fmap(LIST, lambda x: 2 * x, fk.Inr(("a", 3))) == fk.Inr(("a", 6))

    def test_constant_arm_fixed(self):
        assert fk.fmap(LIST, lambda x: 2 * x, fk.Inl(fk.UNIT)) == fk.Inl(fk.UNIT)

    def test_product_arm_componentwise(self):
        assert fk.fmap(TREE, lambda x: x + 1, fk.Inr((2, 5))) == fk.Inr((3, 6))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fk.fmap(LIST, abs, (1, 2))
        with pytest.raises(ShapeMismatch):
            fk.fmap(fk.list_shape(("a",)), abs, fk.Inr(("b", 1)))

    def test_pow_table(self):
        shape = fk.mealy_shape(("0", "1"), ("x", "y"))
        assert fk.fmap(shape, str, (("x", 1), ("y", 2))) == (("x", "1"), ("y", "2"))


class TestStrength:
    def test_list_nil(self):
        assert fk.strength(LIST, "p", fk.Inl(fk.UNIT)) == fk.Inl(fk.UNIT)

    def test_list_cons(self):
        assert fk.strength(LIST, "p", fk.Inr(("a", "x"))) == fk.Inr(("a", ("p", "x")))

    def test_tree_node(self):
        assert fk.strength(TREE, "p", fk.Inr(("x", "y"))) == fk.Inr((("p", "x"), ("p", "y")))


class TestFold:
    def test_sum(self):
        alg = lambda v: 0 if isinstance(v, fk.Inl) else v.value[0] + v.value[1]
        assert fk.fold(LIST, alg, fk.from_list([1, 2, 3])) == 6

    def test_nil_is_r0(self):
        assert fk.fold(LIST, lambda v: "r0" if isinstance(v, fk.Inl) else "r1", fk.nil(LIST)) == "r0"

    def test_tree_max(self):
        t = fk.node(TREE, fk.leaf(TREE, 2), fk.node(TREE, fk.leaf(TREE, 7), fk.leaf(TREE, 1)))
        alg = lambda v: v.value if isinstance(v, fk.Inl) else max(v.value)
        assert fk.fold(TREE, alg, t) == 7 == brute_tree_max(t)

    def test_wrong_shape(self):
        with pytest.raises(ShapeMismatch):
            fk.fold(TREE, lambda v: 0, fk.nil(LIST))


int_algebras = st.tuples(st.integers(-5, 5), st.integers(-3, 3), st.integers(-5, 5))


@given(int_algebras)
def test_list_fold_equations_exact(params):
    r0, c, d = params
    shape = fk.list_shape(("a", "b"))
    r1 = lambda a, x: c * x + d + (1 if a == "a" else -1)
    alg = lambda v: r0 if isinstance(v, fk.Inl) else r1(*v.value)
    for t in fk.enumerate_terms(shape, 6):
        if isinstance(t.layer, fk.Inl):
            assert fk.fold(shape, alg, t) == r0
        else:
            a, rest = t.layer.value
            assert fk.fold(shape, alg, t) == r1(a, fk.fold(shape, alg, rest))


@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_list_fold_equations_float(r0, w, b):
    shape = fk.list_shape(("a", "b"))
    r1 = lambda a, x: w * x + b * (a == "a")
    alg = lambda v: r0 if isinstance(v, fk.Inl) else r1(*v.value)
    for t in fk.enumerate_terms(shape, 5):
        if isinstance(t.layer, fk.Inr):
            a, rest = t.layer.value
            assert abs(fk.fold(shape, alg, t) - r1(a, fk.fold(shape, alg, rest))) <= 1e-12


@given(st.integers(-4, 4), st.integers(-3, 3))
def test_tree_fold_equations(k, m):
    shape = fk.tree_shape((1, 2))
    r0 = lambda a: k * a
    r1 = lambda x, y: m * x - y
    alg = lambda v: r0(v.value) if isinstance(v, fk.Inl) else r1(*v.value)
    for t in fk.enumerate_terms(shape, 5):
        if isinstance(t.layer, fk.Inl):
            assert fk.fold(shape, alg, t) == r0(t.layer.value)
        else:
            left, right = t.layer.value
            assert fk.fold(shape, alg, t) == r1(fk.fold(shape, alg, left), fk.fold(shape, alg, right))


class TestUnfold:
    def test_counting_stream(self):
        p = fk.unfold(fk.stream_shape(), lambda x: (x, x + 1), 0, 4)
        assert fk.stream_outputs(p) == [0, 1, 2, 3]

    def test_depth_zero(self):
        p = fk.unfold(fk.tree_shape(), lambda x: fk.Inr((x, x)), 0, 0)
        assert p.depth == 0 and p.root is fk.TRUNCATED

    def test_weight_scheme(self):
        w_o, w_n = 3, -2
        p = fk.unfold(fk.stream_shape(), lambda x: (w_o * x, w_n * x), 1, 3)
        assert fk.stream_outputs(p) == [w_o, w_n * w_o, w_n ** 2 * w_o]

    def test_pow_layer_has_child_per_index(self):
        shape = fk.mealy_shape(("0", "1"))
        p = fk.unfold(shape, lambda s: ((s, s + 1), (s, 2 * s)), 1, 2)
        assert len(p.root) == 2
        assert fk.mealy_run(p, ["0", "1"]) == [1, 2]
        assert fk.mealy_run(p, ["1", "0"]) == [1, 2]
        with pytest.raises(ValueError):
            fk.mealy_run(p, ["0", "0", "0"])

    def test_moore_run(self):
        shape = fk.moore_shape(("+", "-"))
        step = lambda s: (s, (s + 1, s - 1))
        p = fk.unfold(shape, step, 0, 3)
        assert fk.moore_run(p, ["+", "+"]) == [0, 1, 2]
        assert fk.moore_run(p, []) == [0]

    def test_bad_depth_claim(self):
        with pytest.raises(ShapeMismatch):
            fk.CoPrefix(fk.stream_shape(), 2, (0, fk.TRUNCATED))


@given(st.integers(0, 6), st.integers(-3, 3), st.integers(-3, 3))
def test_unfold_prefix_consistency(d, a, b):
    shape = fk.tree_shape()
    coalg = lambda x: fk.Inr((a * x + 1, b * x - 1))
    big = fk.unfold(shape, coalg, 1, d + 1)
    small = fk.unfold(shape, coalg, 1, d)
    assert fk.truncate(big, d) == small


@given(st.integers(0, 8), st.integers(-3, 3))
def test_stream_prefix_consistency(d, w):
    coalg = lambda x: (x, w * x + 1)
    big = fk.unfold(fk.stream_shape(), coalg, 1, d + 3)
    assert fk.stream_outputs(big)[:d] == fk.stream_outputs(fk.unfold(fk.stream_shape(), coalg, 1, d))


class TestEnumerate:
    def test_lists_up_to_four_constructors(self):
        shape = fk.list_shape(("a",))
        got = [fk.to_list(t) for t in fk.enumerate_terms(shape, 4)]
        assert got == [[], ["a"], ["a", "a"], ["a", "a", "a"]]

    def test_catalan(self):
        shape = fk.tree_shape(("a",))
        counts = [0] * 6
        for t in fk.enumerate_terms(shape, 9):
            counts[len(fk.tree_leaves(t))] += 1
        c = [1]
        for k in range(1, 5):
            c.append(sum(c[i] * c[k - 1 - i] for i in range(k)))
        assert counts[1:] == c == [1, 1, 2, 5, 14]

    def test_empty_label_arm_avoided(self):
        shape = fk.Sum(fk.Const((), "E"), fk.Sum(fk.ONE, fk.Prod(fk.Const(("a",)), fk.ID)))
        terms = fk.enumerate_terms(shape, 4)
        assert len(terms) == 4
        assert all(isinstance(t.layer, fk.Inr) for t in terms)

    def test_duplicate_free_and_ordered(self):
        terms = fk.enumerate_terms(fk.tree_shape(("a", "b")), 5)
        assert len(set(terms)) == len(terms)
        sizes = [t.size() for t in terms]
        assert sizes == sorted(sizes)
        assert fk.enumerate_terms(fk.tree_shape(("a", "b")), 5) == terms

    def test_opaque_constant_not_enumerable(self):
        with pytest.raises(ValueError):
            fk.enumerate_terms(fk.list_shape(), 2)

    def test_cap(self, monkeypatch):
        monkeypatch.setattr(fk, "ENUM_CAP", 50)
        with pytest.raises(CapExceeded):
            fk.enumerate_terms(fk.tree_shape(("a", "b", "c")), 7)


@pytest.mark.parametrize("shape", [fk.list_shape(("a", "b")), fk.tree_shape(("a",)),
                                   fk.Pow(("0", "1"), fk.Sum(fk.ONE, fk.ID))])
@pytest.mark.parametrize("s", range(6))
def test_approximants_stabilize(shape, s):
    target = set(fk.enumerate_terms(shape, s))
    for k in range(s, s + 4):
        assert fk.approximants(shape, k, s) == target


def test_approximants_grow_before_stabilizing():
    shape = fk.list_shape(("a",))
    assert len(fk.approximants(shape, 2, 5)) == 2
    with pytest.raises(CapExceeded):
        fk.approximants(shape, 65, 3)


class TestFreeMonad:
    Z = ("x", "y")

    def test_pure_list(self):
        t = fk.free_pure(fk.list_shape(("a",)), "x", self.Z)
        assert fk.is_var(t) and fk.free_variables(t) == ["x"]

    def test_pure_rejects_unknown_variable(self):
        with pytest.raises(ShapeMismatch):
            fk.free_pure(fk.list_shape(("a",)), "q", self.Z)

    def test_join_pure(self):
        base = fk.tree_shape(("a",))
        for t in fk.enumerate_terms(fk.free_shape(base, self.Z), 4):
            assert fk.free_join(base, fk.free_pure(base, t, (t,)), self.Z) == t

    def test_grafting_matches_substitution(self):
        base = fk.tree_shape(("a",))
        fs = fk.free_shape(base, self.Z)
        terms = fk.enumerate_terms(fs, 3)

        def substitute(t, sub):
            # direct substitution on raw layers
            if isinstance(t.layer, fk.Inr):
                return sub[t.layer.value]
            inner = t.layer.value
            if isinstance(inner, fk.Inl):
                return t
            l, r = inner.value
            return fk.Term(fs, fk.Inl(fk.Inr((substitute(l, sub), substitute(r, sub)))))

        cases = 0
        for t in terms:
            for sx in terms[:3]:
                for sy in terms[-2:]:
                    sub = {"x": sx, "y": sy}
                    assert fk.free_bind(base, t, sub.__getitem__, self.Z) == substitute(t, sub)
                    cases += 1
        assert cases >= 20

    def test_join_depth_cap(self):
        base = fk.list_shape(("a",))
        Z = ("x",)
        inner = fk.free_pure(base, "x", Z)
        fs = fk.free_shape(base, (inner,))
        t = fk.Term(fs, fk.Inr(inner))
        for _ in range(65):
            t = fk.Term(fs, fk.Inl(fk.Inr(("a", t))))
        with pytest.raises(CapExceeded):
            fk.free_join(base, t, Z)


def test_json_roundtrip():
    shapes = [fk.list_shape(("a", "b")), fk.tree_shape((1, 2)), fk.mealy_shape(("0", "1"), ("x",)),
              fk.moore_shape(("0",), ("o",))]
    for shape in shapes:
        d = fk.shape_to_json(shape)
        assert fk.shape_from_json(json.loads(json.dumps(d))) == shape
    for t in fk.enumerate_terms(fk.tree_shape(("a", "b")), 5):
        d = json.loads(json.dumps(fk.term_to_json(t)))
        assert fk.term_from_json(t.shape, d) == t
    t = fk.from_list(["a", "b"], fk.list_shape(("a", "b")))
    assert fk.term_to_json(t) == {"arm": 1, "children": ["a", {"arm": 1, "children": ["b", {"arm": 0, "children": [fk.UNIT]}]}]}
    assert fk.shape_to_json(fk.tree_shape())["kind"] == "sum"
