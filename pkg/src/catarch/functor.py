"""Polynomial endofunctors, their initial-algebra terms and coinductive prefixes.

A functor expression is built from ``Const``, ``Id``, ``Sum``, ``Prod`` and
``Pow`` (finite exponent).  Values of ``F(X)`` are encoded as plain Python
data:

* ``Const``  -- one of the labels
* ``Id``     -- an ``X`` value
* ``Sum``    -- ``Inl(v)`` / ``Inr(v)``
* ``Prod``   -- a pair ``(left, right)``
* ``Pow``    -- a tuple with one entry per index, in index order

Terms of the initial algebra are :class:`Term` nodes whose ``layer`` is an
``F(Term)`` value.  The free monad on ``F`` over variables ``Z`` is the
initial algebra of ``F + Const(Z)``, so free terms are ordinary terms over
:func:`free_shape`.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Iterator

from .errors import CapExceeded, ShapeMismatch

UNIT = "•"
OMEGA_CAP = 64
ENUM_CAP = int(os.environ.get("CATARCH_ENUM_CAP", 200_000))


# --------------------------------------------------------------------------
# Functor expressions


class FunctorExpr:
    __slots__ = ()

    def __add__(self, other: "FunctorExpr") -> "Sum":
        return Sum(self, other)

    def __mul__(self, other: "FunctorExpr") -> "Prod":
        return Prod(self, other)


@dataclass(frozen=True)
class Const(FunctorExpr):
    """Constant functor on a finite label set.

    ``labels=None`` stands for an opaque carrier (e.g. real feature vectors);
    such constants validate any value but cannot be enumerated.
    """

    labels: tuple | None
    name: str = "A"

    def __post_init__(self):
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate labels in {self.name}")
            object.__setattr__(self, "labels", labels)

    def __repr__(self):
        if self.labels is None:
            return self.name
        return "{" + ",".join(map(str, self.labels)) + "}"


@dataclass(frozen=True)
class Id(FunctorExpr):
    def __repr__(self):
        return "Id"


@dataclass(frozen=True)
class Sum(FunctorExpr):
    left: FunctorExpr
    right: FunctorExpr

    def __repr__(self):
        return f"({self.left!r} + {self.right!r})"


@dataclass(frozen=True)
class Prod(FunctorExpr):
    left: FunctorExpr
    right: FunctorExpr

    def __repr__(self):
        return f"({self.left!r} x {self.right!r})"


@dataclass(frozen=True)
class Pow(FunctorExpr):
    index: tuple
    body: FunctorExpr

    def __post_init__(self):
        index = tuple(self.index)
        if len(set(index)) != len(index):
            raise ValueError("duplicate index labels")
        object.__setattr__(self, "index", index)

    def __repr__(self):
        return f"({{{','.join(map(str, self.index))}}} -> {self.body!r})"


ONE = Const((UNIT,), name="1")
ID = Id()


def list_shape(labels=None) -> FunctorExpr:
    """``1 + A x Id``"""
    return Sum(ONE, Prod(Const(labels), ID))


def tree_shape(labels=None) -> FunctorExpr:
    """``A + Id^2`` (binary trees with labelled leaves)"""
    return Sum(Const(labels), Prod(ID, ID))


def stream_shape(outputs=None) -> FunctorExpr:
    """``O x Id``"""
    return Prod(Const(outputs, name="O"), ID)


def mealy_shape(inputs, outputs=None) -> FunctorExpr:
    """``I -> O x Id``, stored as a table over the finite input set."""
    return Pow(tuple(inputs), Prod(Const(outputs, name="O"), ID))


def moore_shape(inputs, outputs=None) -> FunctorExpr:
    """``O x (I -> Id)``"""
    return Prod(Const(outputs, name="O"), Pow(tuple(inputs), ID))


@dataclass(frozen=True)
class Inl:
    value: Any

    def __repr__(self):
        return f"inl({self.value!r})"


@dataclass(frozen=True)
class Inr:
    value: Any

    def __repr__(self):
        return f"inr({self.value!r})"


# --------------------------------------------------------------------------
# Validation and fmap


def validate(shape: FunctorExpr, value, check_x: Callable[[Any], bool] | None = None):
    """Raise ShapeMismatch unless ``value`` is an ``F(X)`` value for ``shape``."""
    if isinstance(shape, Id):
        if check_x is not None and not check_x(value):
            raise ShapeMismatch(f"bad payload at Id position: {value!r}")
    elif isinstance(shape, Const):
        if shape.labels is not None and value not in shape.labels:
            raise ShapeMismatch(f"{value!r} is not a label of {shape!r}")
    elif isinstance(shape, Sum):
        if isinstance(value, Inl):
            validate(shape.left, value.value, check_x)
        elif isinstance(value, Inr):
            validate(shape.right, value.value, check_x)
        else:
            raise ShapeMismatch(f"expected inl/inr for {shape!r}, got {value!r}")
    elif isinstance(shape, Prod):
        if not (isinstance(value, tuple) and len(value) == 2):
            raise ShapeMismatch(f"expected a pair for {shape!r}, got {value!r}")
        validate(shape.left, value[0], check_x)
        validate(shape.right, value[1], check_x)
    elif isinstance(shape, Pow):
        if not (isinstance(value, tuple) and len(value) == len(shape.index)):
            raise ShapeMismatch(f"expected a {len(shape.index)}-table for {shape!r}")
        for v in value:
            validate(shape.body, v, check_x)
    else:
        raise TypeError(f"not a functor expression: {shape!r}")


def _map(shape, f, value):
    if isinstance(shape, Id):
        return f(value)
    if isinstance(shape, Const):
        return value
    if isinstance(shape, Sum):
        if isinstance(value, Inl):
            return Inl(_map(shape.left, f, value.value))
        return Inr(_map(shape.right, f, value.value))
    if isinstance(shape, Prod):
        return (_map(shape.left, f, value[0]), _map(shape.right, f, value[1]))
    if isinstance(shape, Pow):
        return tuple(_map(shape.body, f, v) for v in value)
    raise TypeError(f"not a functor expression: {shape!r}")


def fmap(shape: FunctorExpr, f: Callable, value):
    """Apply ``f`` at every ``Id`` position of ``value``."""
    validate(shape, value)
    return _map(shape, f, value)


def positions(shape: FunctorExpr, value) -> list:
    """Payloads at the ``Id`` positions, left to right."""
    out: list = []
    _map(shape, lambda x: out.append(x), value)
    return out


def strength(shape: FunctorExpr, p, value):
    """Push ``p`` into every Id position: ``P x F(X) -> F(P x X)``."""
    return fmap(shape, lambda x: (p, x), value)


# --------------------------------------------------------------------------
# Terms (initial algebra)


@dataclass(frozen=True, eq=False)
class Term:
    shape: FunctorExpr
    layer: Any

    def __post_init__(self):
        validate(self.shape, self.layer, lambda t: isinstance(t, Term) and t.shape == self.shape)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term) or hash(self) != hash(other):
            return False
        return self.shape == other.shape and self.layer == other.layer

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.shape, self.layer))
            object.__setattr__(self, "_hash", h)
        return h

    @property
    def children(self) -> list["Term"]:
        return positions(self.shape, self.layer)

    @cached_property
    def _size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def size(self) -> int:
        """Constructor count."""
        return self._size

    @cached_property
    def _depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def depth(self) -> int:
        return self._depth

    def __repr__(self):
        return f"Term({self.layer!r})"


def fold(shape: FunctorExpr, algebra: Callable, term: Term):
    """Catamorphism: the unique algebra map out of the initial algebra."""
    if not isinstance(term, Term) or term.shape != shape:
        raise ShapeMismatch("term does not match shape")
    return _fold(shape, algebra, term)


def _fold(shape, algebra, term):
    return algebra(_map(shape, lambda t: _fold(shape, algebra, t), term.layer))


# list / tree conveniences

def nil(shape: FunctorExpr) -> Term:
    return Term(shape, Inl(UNIT))


def cons(shape: FunctorExpr, head, tail: Term) -> Term:
    return Term(shape, Inr((head, tail)))


def from_list(items: Iterable, shape: FunctorExpr | None = None) -> Term:
    shape = shape or list_shape()
    t = nil(shape)
    for a in reversed(list(items)):
        t = cons(shape, a, t)
    return t


def to_list(term: Term) -> list:
    out = []
    while isinstance(term.layer, Inr):
        head, term = term.layer.value
        out.append(head)
    return out


def leaf(shape: FunctorExpr, a) -> Term:
    return Term(shape, Inl(a))


def node(shape: FunctorExpr, left: Term, right: Term) -> Term:
    return Term(shape, Inr((left, right)))


def tree_leaves(term: Term) -> list:
    if isinstance(term.layer, Inl):
        return [term.layer.value]
    left, right = term.layer.value
    return tree_leaves(left) + tree_leaves(right)


# --------------------------------------------------------------------------
# Enumeration


def _fill(shape, n, pool, memo):
    """All F-values whose Id positions hold pool terms of total size ``n``."""
    key = (id(shape), n)
    if key in memo:
        return memo[key]
    if isinstance(shape, Const):
        if shape.labels is None:
            raise ValueError(f"cannot enumerate opaque constant {shape.name}")
        out = list(shape.labels) if n == 0 else []
    elif isinstance(shape, Id):
        out = list(pool.get(n, ()))
    elif isinstance(shape, Sum):
        out = [Inl(v) for v in _fill(shape.left, n, pool, memo)]
        out += [Inr(v) for v in _fill(shape.right, n, pool, memo)]
    elif isinstance(shape, Prod):
        out = []
        for k in range(n + 1):
            lefts = _fill(shape.left, k, pool, memo)
            if not lefts:
                continue
            rights = _fill(shape.right, n - k, pool, memo)
            out.extend((a, b) for a in lefts for b in rights)
    elif isinstance(shape, Pow):
        # distribute n over the index positions
        rows = [((), 0)]
        for _ in shape.index:
            nxt = []
            for prefix, used in rows:
                for k in range(n - used + 1):
                    for v in _fill(shape.body, k, pool, memo):
                        nxt.append((prefix + (v,), used + k))
            rows = nxt
        out = [prefix for prefix, used in rows if used == n]
    else:
        raise TypeError(f"not a functor expression: {shape!r}")
    if len(out) > ENUM_CAP:
        raise CapExceeded(f"enumeration exceeds cap {ENUM_CAP}")
    memo[key] = out
    return out


def enumerate_terms(shape: FunctorExpr, max_size: int) -> list[Term]:
    """Every term with at most ``max_size`` constructors, ordered by size then arm."""
    if max_size < 0:
        raise ValueError("max_size must be non-negative")
    by_size: dict[int, list[Term]] = {}
    out: list[Term] = []
    for s in range(1, max_size + 1):
        memo: dict = {}
        terms = [Term(shape, v) for v in _fill(shape, s - 1, by_size, memo)]
        by_size[s - 1 + 1] = terms
        out.extend(terms)
        if len(out) > ENUM_CAP:
            raise CapExceeded(f"enumeration exceeds cap {ENUM_CAP}")
    return out


def approximants(shape: FunctorExpr, k: int, max_size: int) -> set[Term]:
    """Terms reached after ``k`` rounds of ``X -> F(X) + X`` from the empty set,
    restricted to size at most ``max_size``."""
    if k > OMEGA_CAP:
        raise CapExceeded(f"iteration count {k} exceeds the omega cap {OMEGA_CAP}")
    current: set[Term] = set()
    for _ in range(k):
        pool: dict[int, list[Term]] = {}
        for t in sorted(current, key=lambda t: t.size()):
            pool.setdefault(t.size(), []).append(t)
        nxt = set(current)
        memo: dict = {}
        for n in range(max_size):
            nxt.update(Term(shape, v) for v in _fill(shape, n, pool, memo))
        if nxt == current:
            break
        current = nxt
    return current


# --------------------------------------------------------------------------
# Free monad: Fix(X -> F(X) + Z)


def free_shape(base: FunctorExpr, variables) -> FunctorExpr:
    return Sum(base, Const(tuple(variables), name="Z"))


def free_pure(base: FunctorExpr, z, variables) -> Term:
    shape = free_shape(base, variables)
    if z not in shape.right.labels:
        raise ShapeMismatch(f"variable {z!r} not in declared set")
    return Term(shape, Inr(z))


def is_var(term: Term) -> bool:
    return isinstance(term.layer, Inr)


def free_variables(term: Term) -> list:
    """Variables at the leaves, left to right."""
    if is_var(term):
        return [term.layer.value]
    return [z for c in term.children for z in free_variables(c)]


def free_map(base: FunctorExpr, f: Callable, term: Term, new_variables) -> Term:
    """Rename variables (functor action of the free monad)."""
    target = free_shape(base, new_variables)

    def alg(v):
        if isinstance(v, Inr):
            return free_pure(base, f(v.value), new_variables)
        return Term(target, v)

    return fold(term.shape, alg, term)


def free_join(base: FunctorExpr, term: Term, variables) -> Term:
    """Flatten a free term whose variables are free terms over ``variables``."""
    if term.depth() > OMEGA_CAP:
        raise CapExceeded(f"term depth exceeds the omega cap {OMEGA_CAP}")
    target = free_shape(base, variables)
    for inner in term.shape.right.labels:
        if not isinstance(inner, Term) or inner.shape != target:
            raise ShapeMismatch("join expects free terms as variables")

    def alg(v):
        if isinstance(v, Inr):
            return v.value
        return Term(target, v)

    return fold(term.shape, alg, term)


def free_bind(base: FunctorExpr, term: Term, k: Callable[[Any], Term], variables) -> Term:
    """Substitute ``k(z)`` for each variable ``z``."""
    inner = tuple(dict.fromkeys(k(z) for z in term.shape.right.labels))
    lifted = free_map(base, k, term, inner)
    return free_join(base, lifted, variables)


# --------------------------------------------------------------------------
# Coinductive prefixes


class _Truncated:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "…"

    def __reduce__(self):
        return (_Truncated, ())


TRUNCATED = _Truncated()


@dataclass(frozen=True)
class CoPrefix:
    """The first ``depth`` layers of an anamorphism.

    ``root`` is either ``TRUNCATED`` or an ``F``-layer whose Id positions
    hold nested layers (or ``TRUNCATED`` at the cut).
    """

    shape: FunctorExpr
    depth: int
    root: Any

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if _layers(self.shape, self.root) != self.depth:
            raise ShapeMismatch("prefix depth does not match its layers")


def _layers(shape, node):
    if node is TRUNCATED:
        return 0
    validate(shape, node)
    kids = positions(shape, node)
    depths = {_layers(shape, k) for k in kids}
    if len(depths) > 1:
        raise ShapeMismatch("ragged prefix")
    return 1 + (depths.pop() if depths else 0)


def unfold(shape: FunctorExpr, coalgebra: Callable, seed, depth: int) -> CoPrefix:
    if depth < 0:
        raise ValueError("depth must be non-negative")

    def grow(x, d):
        if d == 0:
            return TRUNCATED
        layer = coalgebra(x)
        validate(shape, layer)
        return _map(shape, lambda y: grow(y, d - 1), layer)

    return CoPrefix(shape, depth, grow(seed, depth))


def truncate(prefix: CoPrefix, depth: int) -> CoPrefix:
    if depth > prefix.depth:
        raise ValueError("cannot extend a prefix by truncation")

    def cut(node, d):
        if d == 0 or node is TRUNCATED:
            return TRUNCATED
        return _map(prefix.shape, lambda c: cut(c, d - 1), node)

    return CoPrefix(prefix.shape, depth, cut(prefix.root, depth))


def stream_outputs(prefix: CoPrefix) -> list:
    out, node = [], prefix.root
    while node is not TRUNCATED:
        o, node = node
        out.append(o)
    return out


def mealy_run(prefix: CoPrefix, word: Iterable) -> list:
    """Outputs of a Mealy prefix along an input word (no longer than its depth)."""
    index = prefix.shape.index
    out, node = [], prefix.root
    for i in word:
        if node is TRUNCATED:
            raise ValueError("input word is longer than the prefix")
        o, node = node[index.index(i)]
        out.append(o)
    return out


def moore_run(prefix: CoPrefix, word: Iterable) -> list:
    """Outputs of a Moore prefix: one before each input, plus the last state's."""
    index = prefix.shape.right.index
    out, node = [], prefix.root
    for i in itertools.chain(word, [None]):
        if node is TRUNCATED:
            raise ValueError("input word is longer than the prefix")
        o, table = node
        out.append(o)
        if i is None:
            break
        node = table[index.index(i)]
    return out


# --------------------------------------------------------------------------
# JSON


def shape_to_json(shape: FunctorExpr) -> dict:
    if isinstance(shape, Const):
        d = {"kind": "const", "name": shape.name}
        d["labels"] = None if shape.labels is None else list(shape.labels)
        return d
    if isinstance(shape, Id):
        return {"kind": "id"}
    if isinstance(shape, Sum):
        return {"kind": "sum", "left": shape_to_json(shape.left), "right": shape_to_json(shape.right)}
    if isinstance(shape, Prod):
        return {"kind": "prod", "left": shape_to_json(shape.left), "right": shape_to_json(shape.right)}
    if isinstance(shape, Pow):
        return {"kind": "pow", "index": list(shape.index), "body": shape_to_json(shape.body)}
    raise TypeError(shape)


def shape_from_json(d: dict) -> FunctorExpr:
    kind = d["kind"]
    if kind == "const":
        labels = d.get("labels")
        return Const(None if labels is None else tuple(labels), d.get("name", "A"))
    if kind == "id":
        return ID
    if kind == "sum":
        return Sum(shape_from_json(d["left"]), shape_from_json(d["right"]))
    if kind == "prod":
        return Prod(shape_from_json(d["left"]), shape_from_json(d["right"]))
    if kind == "pow":
        return Pow(tuple(d["index"]), shape_from_json(d["body"]))
    raise ValueError(f"unknown functor kind {kind!r}")


def _prod_arms(shape) -> list:
    if isinstance(shape, Prod):
        return _prod_arms(shape.left) + _prod_arms(shape.right)
    return [shape]


def _prod_flat(shape, value) -> list:
    if isinstance(shape, Prod):
        return _prod_flat(shape.left, value[0]) + _prod_flat(shape.right, value[1])
    return [value]


def _prod_unflat(shape, items: Iterator):
    if isinstance(shape, Prod):
        left = _prod_unflat(shape.left, items)
        return (left, _prod_unflat(shape.right, items))
    return next(items)


def value_to_json(shape: FunctorExpr, value, enc_x: Callable):
    if isinstance(shape, Id):
        return enc_x(value)
    if isinstance(shape, Const):
        return value
    if isinstance(shape, Sum):
        arm, payload = (0, shape.left) if isinstance(value, Inl) else (1, shape.right)
        kids = [value_to_json(s, v, enc_x) for s, v in zip(_prod_arms(payload), _prod_flat(payload, value.value))]
        return {"arm": arm, "children": kids}
    if isinstance(shape, Prod):
        return [value_to_json(s, v, enc_x) for s, v in zip(_prod_arms(shape), _prod_flat(shape, value))]
    if isinstance(shape, Pow):
        return [value_to_json(shape.body, v, enc_x) for v in value]
    raise TypeError(shape)


def value_from_json(shape: FunctorExpr, data, dec_x: Callable):
    if isinstance(shape, Id):
        return dec_x(data)
    if isinstance(shape, Const):
        return data
    if isinstance(shape, Sum):
        payload = shape.left if data["arm"] == 0 else shape.right
        kids = iter(value_from_json(s, v, dec_x) for s, v in zip(_prod_arms(payload), data["children"]))
        v = _prod_unflat(payload, kids)
        return Inl(v) if data["arm"] == 0 else Inr(v)
    if isinstance(shape, Prod):
        kids = iter(value_from_json(s, v, dec_x) for s, v in zip(_prod_arms(shape), data))
        return _prod_unflat(shape, kids)
    if isinstance(shape, Pow):
        return tuple(value_from_json(shape.body, v, dec_x) for v in data)
    raise TypeError(shape)


def term_to_json(term: Term):
    return value_to_json(term.shape, term.layer, term_to_json)


def term_from_json(shape: FunctorExpr, data) -> Term:
    return Term(shape, value_from_json(shape, data, lambda d: term_from_json(shape, d)))
