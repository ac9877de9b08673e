"""Parametric (co)algebra cells and their weight-tied unrollings.

Five cell kinds are supported:

================  ==========================  =============================
kind              structure map               pieces
================  ==========================  =============================
folding_rnn       P x (1 + A x S) -> S        init: P -> S, step: P x A x S -> S
unfolding_rnn     P x S -> O x S              output, next
recursive_nn      P x (A + S^2) -> S          leaf: P x A -> S, node: P x S x S -> S
mealy             P x S x I -> O x S          step
moore             P x S -> O x (I -> S)       output: P x S -> O, next: P x S x I -> S
================  ==========================  =============================

Every piece is an affine map followed by the cell's nonlinearity (the
folding cell's learned initial state is used as is).  An unrolled network
holds one parameter node ``P``; a single copy node fans it out to each cell
instance, which splits it into the named weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from . import functor as fk
from .errors import ShapeMismatch, ValidationError
from .nngraph import GraphBuilder, backward, finite_diff_check, forward, random_seed
from .para import ParamShape, ParaMap, para_from_builder

KINDS = ("folding_rnn", "unfolding_rnn", "recursive_nn", "mealy", "moore")
REQUIRED_DIMS = {
    "folding_rnn": ("a", "s"),
    "unfolding_rnn": ("s", "o"),
    "recursive_nn": ("a", "s"),
    "mealy": ("s", "i", "o"),
    "moore": ("s", "i", "o"),
}
NONLINEARITIES = ("identity", "tanh")


@dataclass(frozen=True)
class CellSpec:
    kind: str
    dims: Mapping[str, int]
    nonlinearity: str = "tanh"
    bias: bool = True
    initial_state: str = "param"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown cell kind {self.kind!r}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValidationError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.initial_state not in ("param", "zero"):
            raise ValidationError("initial_state must be 'param' or 'zero'")
        dims = dict(self.dims)
        for key in REQUIRED_DIMS[self.kind]:
            if key not in dims:
                raise ValidationError(f"{self.kind} needs dimension {key!r}")
        for key, v in dims.items():
            if key not in REQUIRED_DIMS[self.kind]:
                raise ValidationError(f"{self.kind} does not use dimension {key!r}")
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ValidationError(f"dimension {key!r} must be a positive integer")
        object.__setattr__(self, "dims", tuple(sorted((k, int(v)) for k, v in dims.items())))

    def dim(self, key: str) -> int:
        return dict(self.dims)[key]


def _layout(spec: CellSpec) -> list[tuple[str, tuple, int]]:
    """``(name, shape, fan_in)`` for every weight of the cell."""
    d = dict(spec.dims)
    s = d["s"]
    out: list = []
    if spec.kind == "folding_rnn":
        a = d["a"]
        out += [("W_a", (s, a), a + s), ("W_s", (s, s), a + s)]
        if spec.bias:
            out.append(("b", (s,), a + s))
        if spec.initial_state == "param":
            out.append(("s0", (s,), s))
    elif spec.kind == "unfolding_rnn":
        o = d["o"]
        out.append(("W_o", (o, s), s))
        if spec.bias:
            out.append(("b_o", (o,), s))
        out.append(("W_n", (s, s), s))
        if spec.bias:
            out.append(("b_n", (s,), s))
    elif spec.kind == "recursive_nn":
        a = d["a"]
        out.append(("W_leaf", (s, a), a))
        if spec.bias:
            out.append(("b_leaf", (s,), a))
        out += [("W_l", (s, s), 2 * s), ("W_r", (s, s), 2 * s)]
        if spec.bias:
            out.append(("b", (s,), 2 * s))
    elif spec.kind in ("mealy", "moore"):
        i, o = d["i"], d["o"]
        o_in = s + i if spec.kind == "mealy" else s
        out.append(("W_o", (o, o_in), o_in))
        if spec.bias:
            out.append(("b_o", (o,), o_in))
        out.append(("W_s", (s, s + i), s + i))
        if spec.bias:
            out.append(("b_s", (s,), s + i))
    return out


@dataclass(frozen=True)
class Cell:
    spec: CellSpec
    param: ParamShape
    pieces: tuple = field(repr=False)
    fan_in: tuple = field(repr=False, default=())

    @property
    def kind(self) -> str:
        return self.spec.kind

    def piece(self, name: str) -> ParaMap:
        return dict(self.pieces)[name]

    def init_params(self, seed: int | None = None) -> np.ndarray:
        """Uniform on ``(-1/sqrt(fan_in), 1/sqrt(fan_in))`` per weight, seeded."""
        rng = np.random.default_rng(self.spec.seed if seed is None else seed)
        parts = []
        for (name, shape), fan in zip(self.param.entries, self.fan_in):
            bound = 1.0 / np.sqrt(fan)
            parts.append(rng.uniform(-bound, bound, size=shape).ravel())
        return np.concatenate(parts)

    def unpack(self, p) -> dict:
        return self.param.unpack(p)

    # direct evaluation of the structure map

    def __call__(self, p, *args):
        kind = self.kind
        if kind == "folding_rnn":
            (v,) = args
            fk.validate(fk.list_shape(), v)
            if isinstance(v, fk.Inl):
                return self.piece("init")(p)
            a, s = v.value
            return self.piece("step")(p, a, s)
        if kind == "recursive_nn":
            (v,) = args
            if isinstance(v, fk.Inl):
                return self.piece("leaf")(p, v.value)
            left, right = v.value
            return self.piece("node")(p, left, right)
        if kind == "unfolding_rnn":
            (s,) = args
            return self.piece("output")(p, s), self.piece("next")(p, s)
        if kind == "mealy":
            s, i = args
            return self.piece("step")(p, s, i)
        if kind == "moore":
            s, i = args
            return self.piece("output")(p, s), self.piece("next")(p, s, i)
        raise ValidationError(kind)


def _affine(b: GraphBuilder, spec, w, x, bias, hint):
    y = b.linear(w, x, hint=f"{hint}_lin")
    if bias is not None:
        y = b.bias(y, bias, hint=f"{hint}_bias")
    return b.pointwise(spec.nonlinearity, y, hint=f"{hint}_act")


def _piece(spec: CellSpec, param: ParamShape, ins, outs, build) -> ParaMap:
    b = GraphBuilder()
    for name, shape in param.entries:
        b.param(name, shape)
    refs = {n.attr("name"): (n.id, 0) for n in b.nodes}
    xs = [b.input(n, s) for n, s in ins]
    for (name, _), ref in zip(outs, build(b, refs, *xs)):
        b.output(name, ref)
    return para_from_builder(b, param, ins, outs)


def make_cell(spec: CellSpec) -> Cell:
    layout = _layout(spec)
    param = ParamShape(tuple((n, s) for n, s, _ in layout))
    fan_in = tuple(f for _, _, f in layout)
    d = dict(spec.dims)
    s = (d["s"],)
    has = set(param.names)
    bias = lambda P, name: P[name] if name in has else None  # noqa: E731
    pieces = {}
    if spec.kind == "folding_rnn":
        a = (d["a"],)
        if spec.initial_state == "param":
            pieces["init"] = _piece(spec, param, [], [("s", s)], lambda b, P: [P["s0"]])
        else:
            pieces["init"] = _piece(spec, param, [], [("s", s)], lambda b, P: [b.const(np.zeros(s), "s0")])
        pieces["step"] = _piece(
            spec, param, [("a", a), ("s", s)], [("s_next", s)],
            lambda b, P, x_a, x_s: [b.pointwise(spec.nonlinearity, _add(b, [
                b.linear(P["W_a"], x_a, hint="in"), b.linear(P["W_s"], x_s, hint="rec")], bias(P, "b")), hint="act")],
        )
    elif spec.kind == "unfolding_rnn":
        o = (d["o"],)
        pieces["output"] = _piece(spec, param, [("s", s)], [("o", o)],
                                  lambda b, P, x: [_affine(b, spec, P["W_o"], x, bias(P, "b_o"), "out")])
        pieces["next"] = _piece(spec, param, [("s", s)], [("s_next", s)],
                                lambda b, P, x: [_affine(b, spec, P["W_n"], x, bias(P, "b_n"), "next")])
    elif spec.kind == "recursive_nn":
        a = (d["a"],)
        pieces["leaf"] = _piece(spec, param, [("a", a)], [("s", s)],
                                lambda b, P, x: [_affine(b, spec, P["W_leaf"], x, bias(P, "b_leaf"), "leaf")])
        pieces["node"] = _piece(
            spec, param, [("left", s), ("right", s)], [("s", s)],
            lambda b, P, l, r: [b.pointwise(spec.nonlinearity, _add(b, [
                b.linear(P["W_l"], l, hint="left"), b.linear(P["W_r"], r, hint="right")], bias(P, "b")), hint="act")],
        )
    elif spec.kind == "mealy":
        i, o = (d["i"],), (d["o"],)

        def step(b, P, x_s, x_i):
            si = b.concat([x_s, x_i], hint="si")
            return [_affine(b, spec, P["W_o"], si, bias(P, "b_o"), "out"),
                    _affine(b, spec, P["W_s"], si, bias(P, "b_s"), "next")]

        pieces["step"] = _piece(spec, param, [("s", s), ("i", i)], [("o", o), ("s_next", s)], step)
    elif spec.kind == "moore":
        i, o = (d["i"],), (d["o"],)
        pieces["output"] = _piece(spec, param, [("s", s)], [("o", o)],
                                  lambda b, P, x: [_affine(b, spec, P["W_o"], x, bias(P, "b_o"), "out")])
        pieces["next"] = _piece(
            spec, param, [("s", s), ("i", i)], [("s_next", s)],
            lambda b, P, x_s, x_i: [_affine(b, spec, P["W_s"], b.concat([x_s, x_i], hint="si"), bias(P, "b_s"), "next")],
        )
    return Cell(spec, param, tuple(pieces.items()), fan_in)


def _add(b, terms, bias_ref):
    y = b.sum(terms, hint="pre")
    if bias_ref is not None:
        y = b.bias(y, bias_ref, hint="bias")
    return y


# --------------------------------------------------------------------------
# unrolled networks


@dataclass(frozen=True)
class UnrolledNet:
    kind: str
    graph: Any
    cell: Cell = field(repr=False)
    structure: Any = field(repr=False)
    instances: int = 0
    default_inputs: tuple = field(default=(), repr=False, compare=False)

    def store(self, p):
        return {"P": self.cell.param.flat(p)}

    def forward(self, p, inputs: Mapping | None = None) -> dict:
        inputs = dict(self.default_inputs) | dict(inputs or {})
        return forward(self.graph, self.store(p), inputs)

    def gradient(self, p, inputs: Mapping | None = None, seed: Mapping | None = None) -> np.ndarray:
        inputs = dict(self.default_inputs) | dict(inputs or {})
        return np.array(backward(self.graph, self.store(p), inputs, seed).values)

    def finite_diff_check(self, p, inputs=None, *, eps=1e-5, tol=1e-4, rng=None) -> dict:
        rng = rng if rng is not None else np.random.default_rng(0)
        inputs = dict(self.default_inputs) | dict(inputs or {})
        return finite_diff_check(self.graph, self.store(p), inputs, eps, tol, seed=random_seed(self.graph, rng))

    def census(self) -> dict:
        cons = self.graph.consumers()
        params = [n for n in self.graph.nodes if n.op == "param"]
        copies = [n for n in self.graph.nodes if n.op == "copy"]
        tie_fanout = sum(len(cons[n.id]) for n in copies)
        return {
            "param_stores": len(params),
            "param_count": int(self.cell.param.size()),
            "copy_nodes": len(copies),
            "cell_reads": tie_fanout,
            "instances": self.instances,
            "nodes": len(self.graph.nodes),
            "outputs": self.graph.output_names,
        }

    def check_tying(self) -> bool:
        """One store, one copy node whose fan-out equals the instance count."""
        c = self.census()
        if c["param_stores"] != 1:
            return False
        if self.instances == 0:
            return c["copy_nodes"] == 0
        return c["copy_nodes"] == 1 and c["cell_reads"] == self.instances


class _Tied:
    def __init__(self, cell: Cell, instances: int):
        self.cell = cell
        self.b = GraphBuilder()
        size = cell.param.size()
        self.P = self.b.param("P", (size,))
        self.tie = self.b.copy(self.P, hint="tie") if instances else None
        self.expected = instances
        self.used = 0

    def instance(self, tag: str) -> dict:
        """One read of the shared store, split into the named weights."""
        self.used += 1
        parts = self.b.split(self.tie, self.cell.param.shapes, hint=f"{tag}/P")
        return dict(zip(self.cell.param.names, parts))

    def apply(self, piece: str, weights: dict, inputs: dict, tag: str) -> dict:
        return self.b.splice(self.cell.piece(piece).body, f"{tag}/", inputs=inputs, params=weights)

    def finish(self, kind, structure, defaults=()) -> UnrolledNet:
        assert self.used == self.expected, (self.used, self.expected)
        return UnrolledNet(kind, self.b.build(), self.cell, structure, self.used, tuple(defaults))


def _require(cell: Cell, kind: str):
    if cell.kind != kind:
        raise ShapeMismatch(f"expected a {kind} cell, got {cell.kind}")


def _vec(x, n):
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    if v.shape != (n,):
        raise ShapeMismatch(f"expected a vector of length {n}, got shape {np.shape(x)}")
    return v


def _labels_numeric(labels) -> bool:
    try:
        return all(a is not None and np.asarray(a, dtype=np.float64).size > 0 for a in labels)
    except (TypeError, ValueError):
        return False


def unroll_fold(cell: Cell, term) -> UnrolledNet:
    """``f(p, Nil) = init(p)``, ``f(p, Cons(a, as)) = step(p, a, f(p, as))``.

    ``term`` is a list term, a Python sequence, or a length.
    """
    _require(cell, "folding_rnn")
    if isinstance(term, (int, np.integer)):
        items = [None] * int(term)
        structure = int(term)
    else:
        if isinstance(term, fk.Term):
            if not (isinstance(term.shape, fk.Sum) and term.shape.left == fk.ONE):
                raise ShapeMismatch("unroll_fold expects a list term")
            items = fk.to_list(term)
        else:
            items = list(term)
        structure = term
    n = len(items)
    a_dim, s_dim = cell.spec.dim("a"), cell.spec.dim("s")
    t = _Tied(cell, n + 1)
    xs = [t.b.input(f"a{k}", (a_dim,)) for k in range(n)]
    state = t.apply("init", t.instance("init"), {}, "init")["s"]
    for k in reversed(range(n)):
        w = t.instance(f"step{k}")
        state = t.apply("step", w, {"a": xs[k], "s": state}, f"step{k}")["s_next"]
    t.b.output("s", state)
    defaults = []
    if n and _labels_numeric(items):
        defaults = [(f"a{k}", _vec(a, a_dim)) for k, a in enumerate(items)]
    return t.finish("folding_rnn", structure, defaults)


def unroll_stream(cell: Cell, steps: int) -> UnrolledNet:
    """Outputs ``o_k = output(p, next^k(p, x))`` for ``k < steps``."""
    _require(cell, "unfolding_rnn")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    t = _Tied(cell, steps)
    state = t.b.input("x", (cell.spec.dim("s"),))
    for k in range(steps):
        w = t.instance(f"step{k}")
        t.b.output(f"o{k}", t.apply("output", w, {"s": state}, f"out{k}")["o"])
        if k + 1 < steps:
            state = t.apply("next", w, {"s": state}, f"next{k}")["s_next"]
    return t.finish("unfolding_rnn", steps)


def unroll_tree(cell: Cell, tree: fk.Term) -> UnrolledNet:
    """``f(Leaf a) = leaf(p, a)``, ``f(Node(l, r)) = node(p, f(l), f(r))``; leaves are inputs ``a0, a1, ...``."""
    _require(cell, "recursive_nn")
    if not isinstance(tree, fk.Term):
        raise ShapeMismatch("unroll_tree expects a tree term")
    leaves = fk.tree_leaves(tree)
    t = _Tied(cell, tree.size())
    a_dim = cell.spec.dim("a")
    xs = [t.b.input(f"a{k}", (a_dim,)) for k in range(len(leaves))]
    counter = iter(range(len(leaves)))
    node_ids = iter(range(tree.size()))

    def go(term):
        if isinstance(term.layer, fk.Inl):
            k = next(counter)
            tag = f"leaf{k}"
            return t.apply("leaf", t.instance(tag), {"a": xs[k]}, tag)["s"]
        left, right = term.layer.value
        ls, rs = go(left), go(right)
        tag = f"node{next(node_ids)}"
        return t.apply("node", t.instance(tag), {"left": ls, "right": rs}, tag)["s"]

    t.b.output("s", go(tree))
    defaults = []
    if _labels_numeric(leaves):
        defaults = [(f"a{k}", _vec(a, a_dim)) for k, a in enumerate(leaves)]
    return t.finish("recursive_nn", tree, defaults)


def _seq_len(inputs) -> tuple[int, list]:
    if isinstance(inputs, (int, np.integer)):
        return int(inputs), []
    seq = list(inputs)
    return len(seq), seq


def unroll_mealy(cell: Cell, inputs) -> UnrolledNet:
    """``(o_k, s_{k+1}) = step(p, s_k, i_k)``; outputs ``o0..``, ``s_final``."""
    _require(cell, "mealy")
    n, seq = _seq_len(inputs)
    s_dim, i_dim = cell.spec.dim("s"), cell.spec.dim("i")
    t = _Tied(cell, n)
    state = t.b.input("s0", (s_dim,))
    xs = [t.b.input(f"i{k}", (i_dim,)) for k in range(n)]
    for k in range(n):
        out = t.apply("step", t.instance(f"step{k}"), {"s": state, "i": xs[k]}, f"step{k}")
        t.b.output(f"o{k}", out["o"])
        state = out["s_next"]
    t.b.output("s_final", state)
    defaults = [(f"i{k}", _vec(x, i_dim)) for k, x in enumerate(seq)] if seq and _labels_numeric(seq) else []
    return t.finish("mealy", n, defaults)


def unroll_moore(cell: Cell, inputs) -> UnrolledNet:
    """``o_k = output(p, s_k)`` for ``k <= n``; ``s_{k+1} = next(p, s_k, i_k)``."""
    _require(cell, "moore")
    n, seq = _seq_len(inputs)
    s_dim, i_dim = cell.spec.dim("s"), cell.spec.dim("i")
    t = _Tied(cell, n + 1)
    state = t.b.input("s0", (s_dim,))
    xs = [t.b.input(f"i{k}", (i_dim,)) for k in range(n)]
    for k in range(n + 1):
        w = t.instance(f"step{k}")
        t.b.output(f"o{k}", t.apply("output", w, {"s": state}, f"out{k}")["o"])
        if k < n:
            state = t.apply("next", w, {"s": state, "i": xs[k]}, f"next{k}")["s_next"]
    t.b.output("s_final", state)
    defaults = [(f"i{k}", _vec(x, i_dim)) for k, x in enumerate(seq)] if seq and _labels_numeric(seq) else []
    return t.finish("moore", n, defaults)


def moore_as_mealy(cell: Cell) -> tuple[Cell, Any]:
    """A Mealy cell whose output head ignores the input.

    Returns the cell and a function mapping Moore parameters to Mealy ones
    (the output weight is padded with zero columns for the input).
    """
    _require(cell, "moore")
    spec = cell.spec
    mealy = make_cell(CellSpec("mealy", dict(spec.dims), spec.nonlinearity, spec.bias, seed=spec.seed))
    i_dim = spec.dim("i")

    def convert(p):
        w = dict(cell.unpack(p))
        w["W_o"] = np.hstack([w["W_o"], np.zeros((w["W_o"].shape[0], i_dim))])
        return mealy.param.flat(w)

    return mealy, convert


# --------------------------------------------------------------------------
# homomorphism squares


TOLERANCE = {"integer": 0.0, "identity": 1e-12, "tanh": 1e-6}


@lru_cache(maxsize=512)
def _cached_fold(cell, n):
    return unroll_fold(cell, n)


@lru_cache(maxsize=512)
def _cached_stream(cell, n):
    return unroll_stream(cell, n)


@lru_cache(maxsize=512)
def _cached_mealy(cell, n):
    return unroll_mealy(cell, n)


@lru_cache(maxsize=512)
def _cached_moore(cell, n):
    return unroll_moore(cell, n)


def run_fold(cell, p, items):
    net = _cached_fold(cell, len(items))
    return net.forward(p, {f"a{k}": a for k, a in enumerate(items)})["s"]


def run_stream(cell, p, x, steps):
    net = _cached_stream(cell, steps)
    outs = net.forward(p, {"x": x})
    return [outs[f"o{k}"] for k in range(steps)]


def run_tree(cell, p, tree, leaves):
    net = unroll_tree(cell, tree)
    return net.forward(p, {f"a{k}": a for k, a in enumerate(leaves)})["s"]


def run_mealy(cell, p, s0, seq):
    net = _cached_mealy(cell, len(seq))
    outs = net.forward(p, {"s0": s0} | {f"i{k}": x for k, x in enumerate(seq)})
    return [outs[f"o{k}"] for k in range(len(seq))], outs["s_final"]


def run_moore(cell, p, s0, seq):
    net = _cached_moore(cell, len(seq))
    outs = net.forward(p, {"s0": s0} | {f"i{k}": x for k, x in enumerate(seq)})
    return [outs[f"o{k}"] for k in range(len(seq) + 1)], outs["s_final"]


def random_tree(rng, leaves: int) -> fk.Term:
    shape = fk.tree_shape()
    if leaves == 1:
        return fk.leaf(shape, None)
    k = int(rng.integers(1, leaves))
    return fk.node(shape, random_tree(rng, k), random_tree(rng, leaves - k))


def _diff(a, b) -> float:
    if isinstance(a, (list, tuple)):
        return max([_diff(x, y) for x, y in zip(a, b)], default=0.0)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


def check_square(kind: str, cell: Cell, trials: int = 1000, *, seed: int = 0, integer: bool = False,
                 untied: bool = False, max_len: int = 4, tol: float | None = None) -> dict:
    """Check the (co)algebra homomorphism equations for the unrolled map.

    Each trial draws parameters and data and compares the unrolled network
    at a structure against one cell application over the unrolled network at
    its substructure(s).  ``integer`` draws small integers (identity cells
    then give exact arithmetic).  ``untied`` evaluates the substructure with
    independent parameters, which should break the square.
    """
    _require(cell, kind)
    if integer and cell.spec.nonlinearity != "identity":
        raise ValidationError("integer checks need the identity nonlinearity")
    rng = np.random.default_rng(seed)
    d = dict(cell.spec.dims)
    if tol is None:
        tol = TOLERANCE["integer" if integer else cell.spec.nonlinearity]

    def draw(shape):
        if integer:
            return rng.integers(-2, 3, size=shape).astype(np.float64)
        return rng.uniform(-1.0, 1.0, size=shape)

    def params():
        return draw(cell.param.size())

    worst, total = 0.0, 0.0
    for _ in range(trials):
        p = params()
        q = params() if untied else p
        n = int(rng.integers(0, max_len + 1))
        if kind == "folding_rnn":
            items = [draw(d["a"]) for _ in range(n + 1)]
            r = max(
                _diff(run_fold(cell, p, []), cell(p, fk.Inl(fk.UNIT))),
                _diff(run_fold(cell, p, items), cell(p, fk.Inr((items[0], run_fold(cell, q, items[1:]))))),
            )
        elif kind == "unfolding_rnn":
            x = draw(d["s"])
            o, x_next = cell(p, x)
            outs = run_stream(cell, p, x, n + 1)
            r = max(_diff(outs[0], o), _diff(outs[1:], run_stream(cell, q, x_next, n)))
        elif kind == "recursive_nn":
            leaves = n + 1
            tree = random_tree(rng, leaves)
            data = [draw(d["a"]) for _ in range(leaves)]
            if isinstance(tree.layer, fk.Inl):
                r = _diff(run_tree(cell, p, tree, data), cell(p, fk.Inl(data[0])))
            else:
                left, right = tree.layer.value
                k = len(fk.tree_leaves(left))
                lhs = run_tree(cell, p, tree, data)
                rhs = cell(p, fk.Inr((run_tree(cell, q, left, data[:k]), run_tree(cell, q, right, data[k:]))))
                r = _diff(lhs, rhs)
        elif kind == "mealy":
            s, seq = draw(d["s"]), [draw(d["i"]) for _ in range(n + 1)]
            o, s1 = cell(p, s, seq[0])
            outs, final = run_mealy(cell, p, s, seq)
            outs_rest, final_rest = run_mealy(cell, q, s1, seq[1:])
            r = max(_diff(outs[0], o), _diff(outs[1:], outs_rest), _diff(final, final_rest))
        elif kind == "moore":
            s, seq = draw(d["s"]), [draw(d["i"]) for _ in range(n + 1)]
            o, s1 = cell(p, s, seq[0])
            outs, final = run_moore(cell, p, s, seq)
            outs_rest, final_rest = run_moore(cell, q, s1, seq[1:])
            r = max(_diff(outs[0], o), _diff(outs[1:], outs_rest), _diff(final, final_rest))
        else:
            raise ValidationError(kind)
        if np.isnan(r):
            r = np.inf
        worst = max(worst, r)
        total += r
    return {
        "kind": kind,
        "nonlinearity": cell.spec.nonlinearity,
        "integer": integer,
        "untied": untied,
        "trials": trials,
        "max_residual": worst,
        "mean_residual": total / trials if trials else 0.0,
        "tolerance": tol,
        "passed": worst <= tol,
    }


def spec_from_dict(d: Mapping) -> CellSpec:
    return CellSpec(
        kind=d["kind"],
        dims=d["dims"],
        nonlinearity=d.get("nonlinearity", "tanh"),
        bias=d.get("bias", True),
        initial_state=d.get("initial_state", "param"),
        seed=d.get("seed", 0),
    )


def structure_inputs(net: UnrolledNet, rng) -> dict:
    """Random values for every graph input."""
    return {n.attr("name"): rng.uniform(-1, 1, size=n.shape) for n in net.graph.nodes if n.op == "input"}


def build_from_structure(cell: Cell, structure: Mapping) -> UnrolledNet:
    """Unroll over a JSON structure description (``list_len``, ``steps``,
    ``tree`` / ``tree_depth``, ``seq_len``)."""
    kind = cell.kind
    if kind == "folding_rnn":
        return unroll_fold(cell, int(structure["list_len"]))
    if kind == "unfolding_rnn":
        return unroll_stream(cell, int(structure["steps"]))
    if kind == "recursive_nn":
        if "tree" in structure:
            return unroll_tree(cell, fk.term_from_json(fk.tree_shape(), structure["tree"]))
        return unroll_tree(cell, perfect_tree(int(structure["tree_depth"])))
    if kind == "mealy":
        return unroll_mealy(cell, int(structure["seq_len"]))
    return unroll_moore(cell, int(structure["seq_len"]))


def perfect_tree(depth: int, label=None) -> fk.Term:
    shape = fk.tree_shape()
    if depth == 0:
        return fk.leaf(shape, label)
    sub = perfect_tree(depth - 1, label)
    return fk.node(shape, sub, sub)


def manual_fold(cell: Cell, p, items: Sequence):
    """Direct recursion through the cell, bypassing unrolled graphs."""
    if not items:
        return cell(p, fk.Inl(fk.UNIT))
    return cell(p, fk.Inr((items[0], manual_fold(cell, p, items[1:]))))
