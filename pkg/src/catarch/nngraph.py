"""A small computation-graph runtime: dense float64 tensors, forward
evaluation, reverse-mode gradients, finite differences and JSON/DOT export.

Graphs are immutable once built.  Node inputs are ``(node_id, port)`` pairs;
only ``split`` nodes have more than one output port.  Evaluation keeps its
activations in a per-call dict, so one graph can be evaluated concurrently.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ShapeMismatch, ValidationError

SCHEMA = "catarch-graph/1"
OPS = ("input", "param", "const", "linear", "bias", "pointwise", "concat", "split", "copy", "sum")
POINTWISE = {
    "identity": (lambda x: x, lambda x, y: np.ones_like(y)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
}


class NaNError(FloatingPointError):
    pass


def _size(shape) -> int:
    return int(math.prod(shape))


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    inputs: tuple = ()
    attrs: tuple = ()
    shapes: tuple = ((),)

    @property
    def shape(self) -> tuple:
        return self.shapes[0]

    def attr(self, key, default=None):
        return dict(self.attrs).get(key, default)


@dataclass(frozen=True)
class Graph:
    nodes: tuple
    outputs: tuple = ()
    params: tuple = ()

    def __post_init__(self):
        index = {}
        for n in self.nodes:
            if n.id in index:
                raise ValidationError(f"duplicate node id {n.id!r}")
            for src, port in n.inputs:
                if src not in index:
                    raise ValidationError(f"node {n.id!r} reads {src!r} before it is defined")
                if port >= len(index[src].shapes):
                    raise ValidationError(f"node {n.id!r} reads missing port {port} of {src!r}")
            index[n.id] = n
        for name, (src, port) in self.outputs:
            if src not in index:
                raise ValidationError(f"output {name!r} refers to unknown node {src!r}")
        manifest = dict(self.params)
        for n in self.nodes:
            if n.op == "param" and n.attr("name") not in manifest:
                raise ValidationError(f"param node {n.id!r} is not in the manifest")
        object.__setattr__(self, "_index", index)

    def node(self, node_id: str) -> Node:
        return self._index[node_id]

    def shape_of(self, ref) -> tuple:
        src, port = ref
        return self._index[src].shapes[port]

    @property
    def input_names(self) -> list[str]:
        return [n.attr("name") for n in self.nodes if n.op == "input"]

    @property
    def output_names(self) -> list[str]:
        return [name for name, _ in self.outputs]

    def consumers(self) -> dict:
        """``node_id -> [(consumer_id or 'output:name', input_index)]``."""
        out = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for k, (src, _) in enumerate(n.inputs):
                out[src].append((n.id, k))
        for name, (src, _) in self.outputs:
            out[src].append((f"output:{name}", 0))
        return out

    def count(self, op: str) -> int:
        return sum(1 for n in self.nodes if n.op == op)

    def edges(self) -> list[tuple]:
        return [((src, port), n.id, k) for n in self.nodes for k, (src, port) in enumerate(n.inputs)]


class GraphBuilder:
    """Append-only builder; every method returns a ``(node_id, port)`` ref."""

    def __init__(self, prefix: str = ""):
        self.nodes: list[Node] = []
        self.outputs: list = []
        self.params: list = []
        self._shapes: dict = {}
        self._ids: set = set()
        self._counter = 0
        self.prefix = prefix

    def _new_id(self, op, hint=None):
        base = f"{self.prefix}{hint or op}"
        nid = base
        while nid in self._ids:
            self._counter += 1
            nid = f"{base}#{self._counter}"
        self._ids.add(nid)
        return nid

    def add(self, op, inputs=(), attrs=None, shapes=((),), hint=None):
        if op not in OPS:
            raise ValidationError(f"unknown op {op!r}")
        nid = self._new_id(op, hint)
        inputs = tuple((s, int(p)) for s, p in inputs)
        node = Node(nid, op, inputs, tuple(sorted((attrs or {}).items())), tuple(tuple(s) for s in shapes))
        self.nodes.append(node)
        self._shapes[nid] = node.shapes
        return (nid, 0)

    def shape(self, ref) -> tuple:
        return self._shapes[ref[0]][ref[1]]

    def input(self, name, shape, node_id=None):
        return self.add("input", attrs={"name": name}, shapes=(shape,), hint=node_id or name)

    def param(self, name, shape, node_id=None):
        if name not in dict(self.params):
            self.params.append((name, tuple(shape)))
        return self.add("param", attrs={"name": name}, shapes=(shape,), hint=node_id or name)

    def const(self, value, hint=None):
        value = np.asarray(value, dtype=np.float64)
        return self.add("const", attrs={"value": tuple(value.ravel().tolist())}, shapes=(value.shape,),
                        hint=hint or "const")

    def linear(self, w, x, hint=None):
        ws, xs = self.shape(w), self.shape(x)
        if len(ws) != 2 or xs != (ws[1],):
            raise ShapeMismatch(f"linear: weight {ws} vs input {xs}")
        return self.add("linear", (w, x), shapes=((ws[0],),), hint=hint or "linear")

    def bias(self, x, b, hint=None):
        if self.shape(x) != self.shape(b):
            raise ShapeMismatch(f"bias: {self.shape(x)} vs {self.shape(b)}")
        return self.add("bias", (x, b), shapes=(self.shape(x),), hint=hint or "bias")

    def pointwise(self, fn, x, hint=None):
        if fn not in POINTWISE:
            raise ValidationError(f"unknown nonlinearity {fn!r}")
        return self.add("pointwise", (x,), {"fn": fn}, shapes=(self.shape(x),), hint=hint or fn)

    def concat(self, xs, hint=None):
        shapes = [self.shape(x) for x in xs]
        if any(len(s) != 1 for s in shapes):
            raise ShapeMismatch("concat expects vectors")
        return self.add("concat", xs, shapes=((sum(s[0] for s in shapes),),), hint=hint or "concat")

    def split(self, x, parts, hint=None) -> list:
        """Cut a flat vector into consecutive pieces of the given shapes."""
        total = _size(self.shape(x))
        offsets, off = [], 0
        for s in parts:
            offsets.append(off)
            off += _size(s)
        if off != total:
            raise ShapeMismatch(f"split parts cover {off} of {total} entries")
        attrs = {"offsets": tuple(offsets)}
        nid, _ = self.add("split", (x,), attrs, shapes=tuple(tuple(s) for s in parts), hint=hint or "split")
        return [(nid, k) for k in range(len(parts))]

    def copy(self, x, hint=None):
        return self.add("copy", (x,), shapes=(self.shape(x),), hint=hint or "copy")

    def sum(self, xs, hint=None):
        shapes = {self.shape(x) for x in xs}
        if len(shapes) != 1:
            raise ShapeMismatch(f"sum of mismatched shapes {shapes}")
        return self.add("sum", xs, shapes=(shapes.pop(),), hint=hint or "sum")

    def output(self, name, ref):
        if name in dict(self.outputs):
            raise ValidationError(f"duplicate output {name!r}")
        self.outputs.append((name, (ref[0], int(ref[1]))))

    def build(self) -> Graph:
        return Graph(tuple(self.nodes), tuple(self.outputs), tuple(self.params))

    def splice(self, graph: Graph, prefix: str, inputs: Mapping | None = None,
               params: Mapping | None = None) -> dict:
        """Copy ``graph`` into this builder.

        Input and param nodes named in ``inputs`` / ``params`` are replaced by
        the given refs; the rest are recreated here.  Returns the spliced
        graph's outputs as ``{name: ref}``.
        """
        inputs, params = inputs or {}, params or {}
        manifest = dict(graph.params)
        remap: dict = {}
        for n in graph.nodes:
            name = n.attr("name")
            if n.op == "input" and name in inputs:
                remap[n.id] = inputs[name]
                continue
            if n.op == "param" and name in params:
                remap[n.id] = params[name]
                continue
            if n.op == "param":
                ref = self.param(name, manifest[name], node_id=prefix + n.id)
            else:
                ins = [_port(remap[src], port) for src, port in n.inputs]
                ref = self.add(n.op, ins, dict(n.attrs), n.shapes, hint=prefix + n.id)
            remap[n.id] = ref
        return {name: _port(remap[src], port) for name, (src, port) in graph.outputs}


def _port(ref, port):
    # a replaced node stands for a single-output ref
    return ref if port == 0 else (ref[0], port)


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ParamStore:
    """Flat float64 vector plus a ``(name, shape)`` manifest."""

    manifest: tuple
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        manifest = tuple((str(n), tuple(s)) for n, s in self.manifest)
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size != sum(_size(s) for _, s in manifest):
            raise ShapeMismatch(f"store has {values.size} values for manifest {manifest}")
        values.setflags(write=False)
        object.__setattr__(self, "manifest", manifest)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, manifest) -> "ParamStore":
        return cls(manifest, np.zeros(sum(_size(s) for _, s in manifest)))

    @classmethod
    def from_arrays(cls, manifest, arrays: Mapping) -> "ParamStore":
        parts = []
        for name, shape in manifest:
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != tuple(shape):
                raise ShapeMismatch(f"param {name!r}: got {a.shape}, want {tuple(shape)}")
            parts.append(a.ravel())
        return cls(manifest, np.concatenate(parts) if parts else np.zeros(0))

    def offsets(self) -> dict:
        out, off = {}, 0
        for name, shape in self.manifest:
            out[name] = (off, shape)
            off += _size(shape)
        return out

    def get(self, name) -> np.ndarray:
        off, shape = self.offsets()[name]
        return self.values[off:off + _size(shape)].reshape(shape)

    def as_dict(self) -> dict:
        return {name: self.get(name) for name, _ in self.manifest}

    def with_values(self, values) -> "ParamStore":
        return ParamStore(self.manifest, values)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return (
            isinstance(other, ParamStore)
            and self.manifest == other.manifest
            and np.array_equal(self.values, other.values)
        )


def _as_store(graph: Graph, params) -> ParamStore:
    if isinstance(params, ParamStore):
        if params.manifest != tuple(graph.params):
            raise ShapeMismatch(f"param manifest {params.manifest} does not match graph {graph.params}")
        return params
    if params is None:
        params = np.zeros(0)
    if isinstance(params, Mapping):
        return ParamStore.from_arrays(graph.params, params)
    return ParamStore(graph.params, params)


# --------------------------------------------------------------------------
# evaluation


def _eval(graph: Graph, store: ParamStore, inputs: Mapping, nan_policy: str) -> dict:
    vals: dict = {}
    offsets = store.offsets()
    for n in graph.nodes:
        args = [vals[src][port] for src, port in n.inputs]
        if n.op == "input":
            name = n.attr("name")
            if name not in inputs:
                raise ShapeMismatch(f"missing input {name!r}")
            x = np.asarray(inputs[name], dtype=np.float64)
            if x.shape != n.shape:
                raise ShapeMismatch(f"input {name!r}: got {x.shape}, want {n.shape}")
            out = (x,)
        elif n.op == "param":
            off, shape = offsets[n.attr("name")]
            out = (store.values[off:off + _size(shape)].reshape(shape),)
        elif n.op == "const":
            out = (np.asarray(n.attr("value"), dtype=np.float64).reshape(n.shape),)
        elif n.op == "linear":
            out = (args[0] @ args[1],)
        elif n.op == "bias":
            out = (args[0] + args[1],)
        elif n.op == "pointwise":
            out = (POINTWISE[n.attr("fn")][0](args[0]),)
        elif n.op == "concat":
            out = (np.concatenate(args),)
        elif n.op == "split":
            flat = args[0].ravel()
            out = tuple(
                flat[off:off + _size(s)].reshape(s) for off, s in zip(n.attr("offsets"), n.shapes)
            )
        elif n.op == "copy":
            out = (args[0],)
        elif n.op == "sum":
            acc = args[0]
            for a in args[1:]:
                acc = acc + a
            out = (acc,)
        else:
            raise ValidationError(f"unknown op {n.op!r}")
        if nan_policy == "error" and n.op not in ("input", "param", "const"):
            for o in out:
                if np.isnan(o).any():
                    raise NaNError(f"NaN produced at node {n.id!r}")
        vals[n.id] = out
    return vals


def forward(graph: Graph, params=None, inputs: Mapping | None = None, *, nan_policy: str = "error") -> dict:
    """Evaluate every output; returns ``{output_name: array}``."""
    store = _as_store(graph, params)
    vals = _eval(graph, store, inputs or {}, nan_policy)
    return {name: vals[src][port] for name, (src, port) in graph.outputs}


@dataclass
class Gradients:
    params: ParamStore
    inputs: dict
    # (consumer_id, input_index) -> contribution sent back along that edge
    edges: dict


def backward(graph: Graph, params=None, inputs: Mapping | None = None, seed: Mapping | None = None,
             *, nan_policy: str = "error", full: bool = False):
    """Reverse-mode gradient of ``sum_k <seed[k], output[k]>``.

    ``seed`` defaults to ones for every output.  Copy nodes accumulate the
    adjoints of all their consumers, which is where tied weights pick up the
    sum of per-use gradients.  Returns a ParamStore, or a :class:`Gradients`
    record when ``full`` is set.
    """
    store = _as_store(graph, params)
    inputs = inputs or {}
    vals = _eval(graph, store, inputs, nan_policy)
    adj: dict = {}

    def push(ref, g, consumer, k, edges):
        src, port = ref
        slot = adj.setdefault(src, [None] * len(graph.node(src).shapes))
        slot[port] = g if slot[port] is None else slot[port] + g
        edges[(consumer, k)] = g

    edges: dict = {}
    for name, ref in graph.outputs:
        g = np.ones(graph.shape_of(ref)) if seed is None or name not in seed else np.asarray(seed[name], dtype=np.float64)
        if g.shape != graph.shape_of(ref):
            raise ShapeMismatch(f"seed for {name!r} has shape {g.shape}")
        push(ref, g, f"output:{name}", 0, edges)

    grad = np.zeros(len(store))
    offsets = store.offsets()
    input_grads: dict = {}
    for n in reversed(graph.nodes):
        if n.id not in adj:
            continue
        gs = [g if g is not None else np.zeros(s) for g, s in zip(adj[n.id], n.shapes)]
        g = gs[0]
        args = [vals[src][port] for src, port in n.inputs]
        if n.op == "input":
            input_grads[n.attr("name")] = g
        elif n.op == "param":
            off, shape = offsets[n.attr("name")]
            grad[off:off + _size(shape)] += g.ravel()
        elif n.op == "const":
            pass
        elif n.op == "linear":
            w, x = args
            push(n.inputs[0], np.outer(g, x), n.id, 0, edges)
            push(n.inputs[1], w.T @ g, n.id, 1, edges)
        elif n.op == "bias":
            push(n.inputs[0], g, n.id, 0, edges)
            push(n.inputs[1], g, n.id, 1, edges)
        elif n.op == "pointwise":
            y = vals[n.id][0]
            push(n.inputs[0], g * POINTWISE[n.attr("fn")][1](args[0], y), n.id, 0, edges)
        elif n.op == "concat":
            off = 0
            for k, (ref, a) in enumerate(zip(n.inputs, args)):
                push(ref, g[off:off + a.size], n.id, k, edges)
                off += a.size
        elif n.op == "split":
            total = np.zeros(args[0].size)
            for off, s, gk in zip(n.attr("offsets"), n.shapes, gs):
                total[off:off + _size(s)] += gk.ravel()
            push(n.inputs[0], total.reshape(args[0].shape), n.id, 0, edges)
        elif n.op == "copy":
            push(n.inputs[0], g, n.id, 0, edges)
        elif n.op == "sum":
            for k, ref in enumerate(n.inputs):
                push(ref, g, n.id, k, edges)
    result = store.with_values(grad)
    if full:
        return Gradients(result, input_grads, edges)
    return result


def scalar_objective(graph: Graph, params, inputs, seed: Mapping | None) -> float:
    outs = forward(graph, params, inputs)
    total = 0.0
    for name, y in outs.items():
        w = np.ones_like(y) if seed is None or name not in seed else np.asarray(seed[name])
        total += float(np.sum(w * y))
    return total


def random_seed(graph: Graph, rng: np.random.Generator) -> dict:
    return {name: rng.standard_normal(graph.shape_of(ref)) for name, ref in graph.outputs}


def finite_diff_check(graph: Graph, params, inputs=None, eps: float = 1e-5, tol: float = 1e-4, *,
                      seed: Mapping | None = None, backward_fn: Callable | None = None,
                      floor: float = 1e-8) -> dict:
    """Compare reverse-mode gradients with central differences, coordinate by coordinate.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    store = _as_store(graph, params)
    backward_fn = backward_fn or backward
    analytic = np.asarray(backward_fn(graph, store, inputs, seed).values)
    numeric = np.zeros_like(analytic)
    base = store.values.copy()
    for k in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[k] += eps
        minus[k] -= eps
        fp = scalar_objective(graph, store.with_values(plus), inputs, seed)
        fm = scalar_objective(graph, store.with_values(minus), inputs, seed)
        numeric[k] = (fp - fm) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom if base.size else np.zeros(0)
    worst = float(rel.max()) if rel.size else 0.0
    return {
        "coordinates": int(base.size),
        "max_rel_error": worst,
        "max_abs_error": float(np.abs(analytic - numeric).max()) if rel.size else 0.0,
        "rel_errors": rel.tolist(),
        "eps": eps,
        "tol": tol,
        "passed": worst <= tol,
    }


# --------------------------------------------------------------------------
# export


def graph_to_dict(graph: Graph) -> dict:
    return {
        "schema": SCHEMA,
        "nodes": [
            {
                "id": n.id,
                "op": n.op,
                "inputs": [[s, p] for s, p in n.inputs],
                "attrs": {k: list(v) if isinstance(v, tuple) else v for k, v in n.attrs},
                "shapes": [list(s) for s in n.shapes],
            }
            for n in graph.nodes
        ],
        "outputs": [[name, [s, p]] for name, (s, p) in graph.outputs],
        "params": [[name, list(shape)] for name, shape in graph.params],
    }


def export_json(graph: Graph) -> str:
    return json.dumps(graph_to_dict(graph), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def graph_from_dict(d: dict) -> Graph:
    if d.get("schema") != SCHEMA:
        raise ValidationError(f"unsupported graph schema {d.get('schema')!r}")
    nodes = []
    for nd in d["nodes"]:
        attrs = {k: tuple(v) if isinstance(v, list) else v for k, v in nd.get("attrs", {}).items()}
        nodes.append(Node(nd["id"], nd["op"], tuple((s, int(p)) for s, p in nd["inputs"]),
                          tuple(sorted(attrs.items())), tuple(tuple(s) for s in nd["shapes"])))
    outputs = tuple((name, (ref[0], int(ref[1]))) for name, ref in d["outputs"])
    params = tuple((name, tuple(shape)) for name, shape in d["params"])
    return Graph(tuple(nodes), outputs, params)


def import_json(text: str) -> Graph:
    return graph_from_dict(json.loads(text))


def param_wired(graph: Graph) -> set:
    """Nodes that carry only parameter data (params and their copies/splits)."""
    out = set()
    for n in graph.nodes:
        if n.op == "param" or (n.op in ("copy", "split", "concat") and n.inputs and all(s in out for s, _ in n.inputs)):
            out.add(n.id)
    return out


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph: Graph, name: str = "G") -> str:
    """Graphviz text.  Parameter wires are drawn dashed, blue and without
    layout constraint, so they enter the data path from the side."""
    pw = param_wired(graph)
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;", '  node [fontname="Helvetica"];']
    for n in graph.nodes:
        label = n.op if n.op not in ("input", "param", "pointwise") else f"{n.op}:{n.attr('name') or n.attr('fn')}"
        shape = {"input": "ellipse", "param": "box", "copy": "point", "const": "note"}.get(n.op, "rect")
        style = ', style=filled, fillcolor="#dde8ff"' if n.id in pw else ""
        lines.append(f"  {_q(n.id)} [label={_q(label)}, shape={shape}{style}];")
    for name, _ in graph.outputs:
        lines.append(f"  {_q('output:' + name)} [label={_q(name)}, shape=doublecircle];")
    for (src, port), dst, _ in graph.edges():
        attrs = f'label="{port}"' if len(graph.node(src).shapes) > 1 else ""
        if src in pw:
            attrs = ", ".join(filter(None, [attrs, 'style=dashed, color="#1f4fd1", constraint=false, class="param"']))
        lines.append(f"  {_q(src)} -> {_q(dst)}" + (f" [{attrs}]" if attrs else "") + ";")
    for name, (src, _) in graph.outputs:
        lines.append(f"  {_q(src)} -> {_q('output:' + name)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
