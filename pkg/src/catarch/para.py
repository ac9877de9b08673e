"""Parametric maps ``(P, f : P x A -> B)`` as graph fragments.

Composition stacks parameters (``g . f`` has parameters ``Q ++ P``);
reparameterisations are graph fragments that compute the old parameters from
new ones, so weight tying is reparameterising along the copy map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import functor as fk
from .errors import ShapeMismatch
from .nngraph import Graph, GraphBuilder, ParamStore, forward


@dataclass(frozen=True)
class ParamShape:
    """Ordered ``(name, shape)`` entries; ``+`` is the monoidal product."""

    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(n), tuple(s)) for n, s in self.entries))

    def __add__(self, other: "ParamShape") -> "ParamShape":
        return ParamShape(self.entries + other.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def shapes(self) -> tuple:
        return tuple(s for _, s in self.entries)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.entries)

    def size(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes)

    def matches(self, other: "ParamShape") -> bool:
        """Same port signature (shapes in order); names are bookkeeping."""
        return self.shapes == other.shapes

    def prefixed(self, prefix: str) -> "ParamShape":
        return ParamShape(tuple((prefix + n, s) for n, s in self.entries))

    def unpack(self, p) -> dict:
        """Accept a flat vector, a sequence of arrays or a mapping."""
        if isinstance(p, Mapping):
            return {n: np.asarray(p[n], dtype=np.float64).reshape(s) for n, s in self.entries}
        if isinstance(p, ParamStore):
            return _split_flat(self, p.values)
        if isinstance(p, (list, tuple)) and len(p) == len(self.entries) and not _is_scalar_list(p):
            return {n: np.asarray(a, dtype=np.float64).reshape(s) for (n, s), a in zip(self.entries, p)}
        return _split_flat(self, np.asarray(p, dtype=np.float64).ravel())

    def flat(self, p) -> np.ndarray:
        if isinstance(p, np.ndarray) or (isinstance(p, (list, tuple)) and _is_scalar_list(p)):
            flat = np.asarray(p, dtype=np.float64).ravel()
            if flat.size != self.size():
                raise ShapeMismatch(f"expected {self.size()} parameter values, got {flat.size}")
            return flat
        parts = [v.ravel() for v in self.unpack(p).values()]
        return np.concatenate(parts) if parts else np.zeros(0)


UNIT = ParamShape(())


def _is_scalar_list(p) -> bool:
    return all(np.ndim(a) == 0 for a in p)


def _split_flat(shape: ParamShape, flat: np.ndarray) -> dict:
    if flat.size != shape.size():
        raise ShapeMismatch(f"expected {shape.size()} parameter values, got {flat.size}")
    out, off = {}, 0
    for n, s in shape.entries:
        k = int(np.prod(s))
        out[n] = flat[off:off + k].reshape(s)
        off += k
    return out


@dataclass(frozen=True)
class ParaMap:
    """A parametric map; ``body`` has param nodes for ``param`` and input nodes for ``in_ports``."""

    param: ParamShape
    in_ports: tuple
    out_ports: tuple
    body: Graph

    def __post_init__(self):
        if tuple(self.body.params) != self.param.entries:
            raise ShapeMismatch(f"body params {self.body.params} differ from {self.param.entries}")
        got = {n.attr("name"): n.shape for n in self.body.nodes if n.op == "input"}
        for name, shape in self.in_ports:
            if name in got and got[name] != tuple(shape):
                raise ShapeMismatch(f"input port {name!r} has shape {got[name]}, declared {shape}")
        if extra := set(got) - {n for n, _ in self.in_ports}:
            raise ShapeMismatch(f"undeclared input ports {sorted(extra)}")
        outs = [(name, self.body.shape_of(ref)) for name, ref in self.body.outputs]
        if tuple(outs) != tuple((n, tuple(s)) for n, s in self.out_ports):
            raise ShapeMismatch(f"body outputs {outs} differ from declared {self.out_ports}")

    @property
    def in_shapes(self) -> tuple:
        return tuple(tuple(s) for _, s in self.in_ports)

    @property
    def out_shapes(self) -> tuple:
        return tuple(tuple(s) for _, s in self.out_ports)

    def signature(self) -> tuple:
        return (self.param.shapes, self.in_shapes, self.out_shapes)

    def run(self, p, *xs) -> list[np.ndarray]:
        if len(xs) != len(self.in_ports):
            raise ShapeMismatch(f"expected {len(self.in_ports)} inputs, got {len(xs)}")
        inputs = {name: np.asarray(x, dtype=np.float64) for (name, _), x in zip(self.in_ports, xs)}
        outs = forward(self.body, self.param.unpack(p) if self.param.entries else {}, inputs)
        return [outs[name] for name, _ in self.out_ports]

    def __call__(self, p, *xs):
        outs = self.run(p, *xs)
        return outs[0] if len(outs) == 1 else tuple(outs)

    def to_dict(self) -> dict:
        from .nngraph import graph_to_dict

        d = graph_to_dict(self.body)
        d["param_ports"] = [[n, list(s)] for n, s in self.param.entries]
        d["in_ports"] = [[n, list(s)] for n, s in self.in_ports]
        d["out_ports"] = [[n, list(s)] for n, s in self.out_ports]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParaMap":
        from .nngraph import graph_from_dict

        body = graph_from_dict({k: v for k, v in d.items() if k not in ("param_ports", "in_ports", "out_ports")})
        ports = lambda key: tuple((n, tuple(s)) for n, s in d[key])  # noqa: E731
        return cls(ParamShape(ports("param_ports")), ports("in_ports"), ports("out_ports"), body)


def para_from_builder(b: GraphBuilder, param: ParamShape, in_ports, out_ports) -> ParaMap:
    return ParaMap(param, tuple((n, tuple(s)) for n, s in in_ports),
                   tuple((n, tuple(s)) for n, s in out_ports), b.build())


def _declare_params(b: GraphBuilder, param: ParamShape):
    for entry in param.entries:
        if entry not in b.params:
            b.params.append(entry)


def para_compose(g: ParaMap, f: ParaMap) -> ParaMap:
    """``g`` after ``f``; parameters are ``g.param ++ f.param``, renamed ``g.*`` / ``f.*``."""
    if g.in_shapes != f.out_shapes:
        raise ShapeMismatch(f"cannot compose: {f.out_shapes} into {g.in_shapes}")
    gp, fp = g.param.prefixed("g."), f.param.prefixed("f.")
    b = GraphBuilder()
    _declare_params(b, gp + fp)
    f_params = {n: b.param(pn, s) for (n, s), (pn, _) in zip(f.param.entries, fp.entries)}
    g_params = {n: b.param(pn, s) for (n, s), (pn, _) in zip(g.param.entries, gp.entries)}
    f_out = b.splice(f.body, "f/", params=f_params)
    wires = {gn: f_out[fn] for (gn, _), (fn, _) in zip(g.in_ports, f.out_ports)}
    g_out = b.splice(g.body, "g/", inputs=wires, params=g_params)
    for name, _ in g.out_ports:
        b.output(name, g_out[name])
    return para_from_builder(b, gp + fp, f.in_ports, g.out_ports)


def para_identity(shapes: Sequence, names: Sequence[str] | None = None) -> ParaMap:
    names = list(names or [f"x{k}" for k in range(len(shapes))])
    b = GraphBuilder()
    refs = [b.input(n, s) for n, s in zip(names, shapes)]
    outs = []
    for n, s, r in zip(names, shapes, refs):
        b.output(f"{n}_out", r)
        outs.append((f"{n}_out", s))
    return para_from_builder(b, UNIT, list(zip(names, shapes)), outs)


def para_embed(f) -> ParaMap:
    """Treat a plain map as parametric with the unit parameter.

    ``f`` may be a parameter-free Graph (input/output ports taken from it), a
    ParaMap with no parameters, or a fixed matrix (embedded as ``x -> L x``).
    """
    if isinstance(f, ParaMap):
        if f.param.entries:
            raise ShapeMismatch("para_embed expects a parameter-free map")
        return f
    if isinstance(f, Graph):
        if f.params:
            raise ShapeMismatch("para_embed expects a parameter-free graph")
        ins = [(n.attr("name"), n.shape) for n in f.nodes if n.op == "input"]
        outs = [(name, f.shape_of(ref)) for name, ref in f.outputs]
        return ParaMap(UNIT, tuple(ins), tuple(outs), f)
    L = np.asarray(f, dtype=np.float64)
    if L.ndim != 2:
        raise ShapeMismatch("para_embed expects a matrix or a graph")
    b = GraphBuilder()
    x = b.input("x", (L.shape[1],))
    b.output("y", b.linear(b.const(L, "L"), x))
    return para_from_builder(b, UNIT, [("x", (L.shape[1],))], [("y", (L.shape[0],))])


# --------------------------------------------------------------------------
# reparameterisations


@dataclass(frozen=True)
class Reparam:
    """A map from ``target`` parameters to ``source`` parameters.

    Applying it to ``(source, f)`` gives ``(target, f . (r x id))``.
    """

    source: ParamShape
    target: ParamShape
    body: Graph

    def __call__(self, q) -> dict:
        outs = forward(self.body, {}, self.target.unpack(q) if self.target.entries else {})
        return {n: outs[n] for n in self.source.names}

    def flat(self, q) -> np.ndarray:
        vals = self(q)
        parts = [vals[n].ravel() for n in self.source.names]
        return np.concatenate(parts) if parts else np.zeros(0)


def _reparam(source: ParamShape, target: ParamShape, build: Callable) -> Reparam:
    b = GraphBuilder()
    ins = {n: b.input(n, s) for n, s in target.entries}
    outs = build(b, ins)
    for (n, _), ref in zip(source.entries, outs):
        b.output(n, ref)
    return Reparam(source, target, b.build())


def reparam_identity(p: ParamShape) -> Reparam:
    return _reparam(p, p, lambda b, ins: [ins[n] for n in p.names])


def reparam_copy(p: ParamShape) -> Reparam:
    """The copy map: one ``P`` feeds both halves of ``P ++ P``."""
    source = p.prefixed("0.") + p.prefixed("1.")

    def build(b, ins):
        copies = [b.copy(ins[n], f"copy_{n}") for n in p.names]
        return copies + copies

    return _reparam(source, p, build)


def reparam_delete(p: ParamShape) -> Reparam:
    """The delete map ``P -> I``: the new parameter is ignored."""
    return _reparam(UNIT, p, lambda b, ins: [])


def reparam_swap(p: ParamShape, q: ParamShape) -> Reparam:
    """Target ``P ++ Q`` feeding source ``Q ++ P``."""
    target = p + q
    if len(set(target.names)) != len(target.names):
        p, q = p.prefixed("l."), q.prefixed("r.")
        target = p + q
    return _reparam(q + p, target, lambda b, ins: [ins[n] for n in q.names + p.names])


def reparam_linear(p_name: str, matrix, source_name: str = "q") -> Reparam:
    """A fixed linear map on a single vector parameter."""
    m = np.asarray(matrix, dtype=np.float64)
    target = ParamShape(((p_name, (m.shape[1],)),))
    source = ParamShape(((source_name, (m.shape[0],)),))
    return _reparam(source, target, lambda b, ins: [b.linear(b.const(m, "M"), ins[p_name])])


def reparam_compose(r: Reparam, s: Reparam) -> Reparam:
    """``r`` after ``s`` as maps: ``s.target -> s.source = r.target -> r.source``."""
    if not s.source.matches(r.target):
        raise ShapeMismatch("reparameterisations do not compose")
    b = GraphBuilder()
    ins = {n: b.input(n, sh) for n, sh in s.target.entries}
    mid = b.splice(s.body, "s/", inputs=ins)
    wires = {rn: mid[sn] for rn, sn in zip(r.target.names, s.source.names)}
    outs = b.splice(r.body, "r/", inputs=wires)
    for n in r.source.names:
        b.output(n, outs[n])
    return Reparam(r.source, s.target, b.build())


def reparam_tensor(r: Reparam, s: Reparam) -> Reparam:
    """Side-by-side: ``r.target ++ s.target -> r.source ++ s.source``."""
    rt, st = r.target.prefixed("a."), s.target.prefixed("b.")
    rs, ss = r.source.prefixed("a."), s.source.prefixed("b.")
    b = GraphBuilder()
    r_in = {n: b.input(pn, sh) for (n, sh), pn in zip(r.target.entries, rt.names)}
    s_in = {n: b.input(pn, sh) for (n, sh), pn in zip(s.target.entries, st.names)}
    r_out = b.splice(r.body, "a/", inputs=r_in)
    s_out = b.splice(s.body, "b/", inputs=s_in)
    for n, pn in zip(r.source.names, rs.names):
        b.output(pn, r_out[n])
    for n, pn in zip(s.source.names, ss.names):
        b.output(pn, s_out[n])
    return Reparam(rs + ss, rt + st, b.build())


def reparam_apply(r: Reparam, f: ParaMap) -> ParaMap:
    if not r.source.matches(f.param):
        raise ShapeMismatch(f"reparameterisation source {r.source.shapes} != map params {f.param.shapes}")
    b = GraphBuilder()
    _declare_params(b, r.target)
    new = {n: b.param(n, s) for n, s in r.target.entries}
    src = b.splice(r.body, "r/", inputs=new)
    wired = {fn: src[rn] for fn, rn in zip(f.param.names, r.source.names)}
    outs = b.splice(f.body, "", params=wired)
    for name, _ in f.out_ports:
        b.output(name, outs[name])
    return para_from_builder(b, r.target, f.in_ports, f.out_ports)


def weight_tie(f: ParaMap) -> ParaMap:
    """Tie ``(P ++ P, f)`` to ``(P, f . (copy x id))``."""
    k = len(f.param.entries)
    if k % 2:
        raise ShapeMismatch("parameter list does not split into two halves")
    first = ParamShape(f.param.entries[: k // 2])
    second = ParamShape(f.param.entries[k // 2:])
    if not first.matches(second):
        raise ShapeMismatch("the two parameter halves differ")
    names = tuple(n.split(".", 1)[1] if n.startswith(("g.", "f.")) else n for n in first.names)
    if len(set(names)) != len(names):
        names = first.names
    return reparam_apply(reparam_copy(ParamShape(tuple(zip(names, first.shapes)))), f)


def check_reparam_triangle(r: Reparam, f: ParaMap, f2: ParaMap, samples: int = 100, *,
                           tol: float = 1e-12, rng=None) -> dict:
    """Does ``f2(q, x) == f(r(q), x)`` on random samples?"""
    if not r.source.matches(f.param) or not r.target.matches(f2.param):
        raise ShapeMismatch("triangle shapes do not line up")
    if f.in_shapes != f2.in_shapes or f.out_shapes != f2.out_shapes:
        raise ShapeMismatch("the two maps have different types")
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for _ in range(samples):
        q = rng.standard_normal(r.target.size())
        xs = [rng.standard_normal(s) for s in f.in_shapes]
        lhs = f2.run(q, *xs)
        rhs = f.run(r.flat(q), *xs)
        worst = max([worst] + [float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(lhs, rhs)])
    return {"samples": samples, "max_residual": worst, "tol": tol, "holds": worst <= tol}


# --------------------------------------------------------------------------
# lifting along a strong functor


@dataclass(frozen=True)
class LiftedPara:
    """``(P, F(f) . strength)``: ``f`` applied at every Id position with the same ``p``."""

    shape: fk.FunctorExpr
    maps: tuple  # applied right to left, like composition

    @property
    def param(self) -> ParamShape:
        out = UNIT
        for k, m in enumerate(self.maps):
            out = out + (m.param.prefixed(f"{k}.") if len(self.maps) > 1 else m.param)
        return out

    def __call__(self, p, fv):
        flat = self.param.flat(p) if self.param.entries else np.zeros(0)
        chunks, off = [], 0
        for m in self.maps:
            k = m.param.size()
            chunks.append(flat[off:off + k])
            off += k
        for m, pm in zip(reversed(self.maps), reversed(chunks)):
            fv = fk.fmap(self.shape, lambda px, m=m: m(px[0], px[1]), fk.strength(self.shape, pm, fv))
        return fv


def para_lift(shape: fk.FunctorExpr, f: ParaMap) -> LiftedPara:
    if len(f.in_ports) != 1 or len(f.out_ports) != 1:
        raise ShapeMismatch("lifting needs a single-input, single-output map")
    return LiftedPara(shape, (f,))


def lifted_compose(g: LiftedPara, f: LiftedPara) -> LiftedPara:
    if g.shape != f.shape:
        raise ShapeMismatch("lifted maps live over different functors")
    return LiftedPara(g.shape, g.maps + f.maps)
