"""Exact weight-sharing bases for linear layers under finite permutation groups.

A linear map ``W`` is equivariant when ``W @ rho_in(g) == rho_out(g) @ W`` for
every group element.  Constraints are stacked for the generators and solved
exactly over the rationals.  For permutation representations the solution
space is spanned by indicator matrices of the orbits of ``G`` on matrix
entries, which gives an independent check (:func:`orbit_pattern`).
"""
from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np

from . import kernels
from .errors import CapExceeded, ValidationError

GROUP_CAP = 10_080
DIM_CAP = 64


def group_cap() -> int:
    return int(os.environ.get("CATARCH_CAP", GROUP_CAP))


@dataclass(frozen=True)
class Perm:
    images: tuple

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValidationError(f"not a permutation: {images}")
        object.__setattr__(self, "images", images)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: "Perm") -> "Perm":
        # (g * h)(i) = g(h(i))
        return Perm(tuple(self.images[j] for j in other.images))

    def inverse(self) -> "Perm":
        inv = [0] * self.degree
        for i, j in enumerate(self.images):
            inv[j] = i
        return Perm(tuple(inv))

    @classmethod
    def identity(cls, n: int) -> "Perm":
        return cls(tuple(range(n)))

    def matrix(self) -> np.ndarray:
        """``P`` with ``P[g(j), j] = 1``, so ``(P x)[g(j)] = x[j]``."""
        m = np.zeros((self.degree, self.degree), dtype=object)
        m[:] = 0
        for j, i in enumerate(self.images):
            m[i, j] = 1
        return m


def cycle(n: int, *points) -> Perm:
    images = list(range(n))
    for a, b in zip(points, points[1:] + points[:1]):
        images[a] = b
    return Perm(tuple(images))


@dataclass(frozen=True)
class GroupAction:
    degree: int
    generators: tuple

    def __post_init__(self):
        gens = tuple(g if isinstance(g, Perm) else Perm(tuple(g)) for g in self.generators)
        for g in gens:
            if g.degree != self.degree:
                raise ValidationError(f"generator of degree {g.degree} on {self.degree} points")
        object.__setattr__(self, "generators", gens)

    def identity(self) -> Perm:
        return Perm.identity(self.degree)

    def closure(self, cap: int | None = None) -> list[Perm]:
        return closure(self, cap)

    def order(self) -> int:
        return len(self.closure())

    def to_json(self) -> dict:
        return {"degree": self.degree, "generators": [list(g.images) for g in self.generators]}

    @classmethod
    def from_json(cls, d: dict) -> "GroupAction":
        try:
            return cls(int(d["degree"]), tuple(tuple(g) for g in d["generators"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad group spec: {exc}") from exc


_closure_cache: dict = {}


def closure(action: GroupAction, cap: int | None = None) -> list[Perm]:
    """All group elements, identity first, in breadth-first order."""
    cap = group_cap() if cap is None else cap
    key = (action, cap)
    if key in _closure_cache:
        return _closure_cache[key]
    e = action.identity()
    seen = {e}
    out = [e]
    queue = deque([e])
    while queue:
        g = queue.popleft()
        for s in action.generators:
            h = s * g
            if h not in seen:
                seen.add(h)
                out.append(h)
                if len(out) > cap:
                    raise CapExceeded(f"group order exceeds cap {cap}")
                queue.append(h)
    _closure_cache[key] = out
    return out


# --------------------------------------------------------------------------
# built-in groups


def trivial_group(n: int) -> GroupAction:
    return GroupAction(n, ())


def cyclic_group(n: int) -> GroupAction:
    """Translations of ``Z_n`` acting on itself: ``i -> i + 1``."""
    return GroupAction(n, (Perm(tuple((i + 1) % n for i in range(n))),))


def symmetric_group(n: int) -> GroupAction:
    if n < 2:
        return trivial_group(n)
    gens = [cycle(n, 0, 1)]
    if n > 2:
        gens.append(cycle(n, *range(n)))
    return GroupAction(n, tuple(gens))


def dihedral_group(n: int) -> GroupAction:
    rot = Perm(tuple((i + 1) % n for i in range(n)))
    ref = Perm(tuple((-i) % n for i in range(n)))
    return GroupAction(n, (rot, ref))


def regular_action(group: GroupAction) -> GroupAction:
    """``G`` acting on its own elements by left multiplication."""
    elems = closure(group)
    index = {g: k for k, g in enumerate(elems)}
    gens = tuple(Perm(tuple(index[s * g] for g in elems)) for s in group.generators)
    return GroupAction(len(elems), gens)


# --------------------------------------------------------------------------
# representations


@dataclass(frozen=True)
class LinearRep:
    """A representation given by the images of the group's generators.

    ``gen_images`` are coordinate permutations (a permutation representation);
    alternatively ``gen_matrices`` holds raw rational matrices.
    """

    group: GroupAction
    dim: int
    gen_images: tuple | None = None
    gen_matrices: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if (self.gen_images is None) == (self.gen_matrices is None):
            raise ValidationError("give exactly one of gen_images / gen_matrices")
        k = len(self.group.generators)
        gens = self.gen_images if self.gen_images is not None else self.gen_matrices
        if len(gens) != k:
            raise ValidationError(f"{len(gens)} generator images for {k} generators")
        if self.gen_images is not None:
            imgs = tuple(g if isinstance(g, Perm) else Perm(tuple(g)) for g in self.gen_images)
            if any(g.degree != self.dim for g in imgs):
                raise ValidationError("generator image has the wrong size")
            object.__setattr__(self, "gen_images", imgs)
        else:
            mats = []
            for m in self.gen_matrices:
                a = np.array([[Fraction(v) for v in row] for row in m], dtype=object)
                if a.shape != (self.dim, self.dim):
                    raise ValidationError("generator matrix has the wrong shape")
                mats.append(a)
            object.__setattr__(self, "gen_matrices", tuple(mats))

    @property
    def is_permutation(self) -> bool:
        return self.gen_images is not None

    def generator_matrices(self) -> list[np.ndarray]:
        if self.is_permutation:
            return [p.matrix() for p in self.gen_images]
        return list(self.gen_matrices)

    def elements(self, cap: int | None = None) -> list[tuple[Perm, object]]:
        """Pairs ``(g, rho(g))`` over the closure.

        Raises ValidationError if two words for the same ``g`` disagree on
        ``rho`` (i.e. the generator images do not define a homomorphism).
        """
        cap = group_cap() if cap is None else cap
        e = self.group.identity()
        one = Perm.identity(self.dim) if self.is_permutation else _eye(self.dim)
        found = {e: one}
        queue = deque([e])
        gens = list(zip(self.group.generators, self.gen_images if self.is_permutation else self.gen_matrices))
        while queue:
            g = queue.popleft()
            rg = found[g]
            for s, rs in gens:
                h = s * g
                rh = rs * rg if self.is_permutation else rs.dot(rg)
                if h in found:
                    if not _same(found[h], rh):
                        raise ValidationError("generator images do not define a representation")
                    continue
                found[h] = rh
                if len(found) > cap:
                    raise CapExceeded(f"group order exceeds cap {cap}")
                queue.append(h)
        return list(found.items())

    def validate(self) -> None:
        self.elements()

    def to_json(self) -> dict:
        d = {"dim": self.dim, "group": self.group.to_json()}
        if self.is_permutation:
            d["gen_images"] = [list(p.images) for p in self.gen_images]
        else:
            d["gen_matrices"] = [[[str(v) for v in row] for row in m] for m in self.gen_matrices]
        return d


def _eye(n):
    m = np.zeros((n, n), dtype=object)
    m[:] = Fraction(0)
    for i in range(n):
        m[i, i] = Fraction(1)
    return m


def _same(a, b) -> bool:
    if isinstance(a, Perm):
        return a == b
    return bool(np.all(a == b))


def rep_vector(action: GroupAction) -> LinearRep:
    """Coordinates permuted as the action permutes points."""
    return LinearRep(action, action.degree, gen_images=action.generators)


def rep_entries(action: GroupAction) -> LinearRep:
    """Matrix entries ``(i, j) -> (g i, g j)``, i.e. ``A -> P A P^T``; row-major."""
    n = action.degree
    imgs = tuple(Perm(tuple(g(i) * n + g(j) for i in range(n) for j in range(n))) for g in action.generators)
    return LinearRep(action, n * n, gen_images=imgs)


def rep_trivial(action: GroupAction, dim: int) -> LinearRep:
    return LinearRep(action, dim, gen_images=tuple(Perm.identity(dim) for _ in action.generators))


def direct_sum(a: LinearRep, b: LinearRep) -> LinearRep:
    if a.group != b.group:
        raise ValidationError("direct sum needs representations of the same group")
    if not (a.is_permutation and b.is_permutation):
        mats = []
        for ma, mb in zip(a.generator_matrices(), b.generator_matrices()):
            m = _eye(a.dim + b.dim) * 0
            m[: a.dim, : a.dim] = ma
            m[a.dim:, a.dim:] = mb
            mats.append(m)
        return LinearRep(a.group, a.dim + b.dim, gen_matrices=tuple(mats))
    imgs = tuple(
        Perm(pa.images + tuple(a.dim + i for i in pb.images)) for pa, pb in zip(a.gen_images, b.gen_images)
    )
    return LinearRep(a.group, a.dim + b.dim, gen_images=imgs)


# --------------------------------------------------------------------------
# solving


def _constraint_rows(rep_in: LinearRep, rep_out: LinearRep, mats=None) -> list[dict]:
    """Sparse integer rows over row-major ``vec(W)`` encoding ``W rho_in(g) - rho_out(g) W = 0``."""
    m, n = rep_out.dim, rep_in.dim
    rows = []
    if mats is None and rep_in.is_permutation and rep_out.is_permutation:
        for pin, pout in zip(rep_in.gen_images, rep_out.gen_images):
            # W[pout(i), pin(j)] == W[i, j]
            for i in range(m):
                for j in range(n):
                    a, b = pout(i) * n + pin(j), i * n + j
                    if a != b:
                        rows.append({a: 1, b: -1})
        return rows
    if mats is None:
        mats = list(zip(rep_in.generator_matrices(), rep_out.generator_matrices()))
    for a_in, a_out in mats:
        for i in range(m):
            for j in range(n):
                row: dict = {}
                for k in range(n):
                    if a_in[k, j]:
                        row[i * n + k] = row.get(i * n + k, 0) + Fraction(a_in[k, j])
                for k in range(m):
                    if a_out[i, k]:
                        row[k * n + j] = row.get(k * n + j, 0) - Fraction(a_out[i, k])
                row = {c: v for c, v in row.items() if v}
                if row:
                    den = lcm(*(Fraction(v).denominator for v in row.values()))
                    rows.append({c: int(v * den) for c, v in sorted(row.items())})
    return rows


def _nullspace(rows, ncols, backend=None) -> list[dict]:
    """Integer nullspace vectors (sparse), one per free column, then reduced."""
    reduced, pivots = kernels.rref_int(rows, ncols, backend) if rows else ([], [])
    pivot_set = set(pivots)
    hits: dict[int, list] = {}
    for row, pc in zip(reduced, pivots):
        for c, x in row.items():
            if c != pc:
                hits.setdefault(c, []).append((pc, x, row[pc]))
    vectors = []
    for f in range(ncols):
        if f in pivot_set:
            continue
        entries = hits.get(f, [])
        scale = lcm(*(d for _, _, d in entries)) if entries else 1
        v = {f: scale}
        for pc, x, d in entries:
            v[pc] = -x * (scale // d)
        vectors.append(v)
    return _rref_rational(vectors, ncols, backend)


def _rref_rational(vectors, ncols, backend=None) -> list[dict]:
    """Reduced echelon form scaled so each pivot is 1; sparse ``{col: Fraction}``."""
    if not vectors:
        return []
    reduced, pivots = kernels.rref_int(vectors, ncols, backend)
    return [{c: Fraction(x, row[pc]) for c, x in row.items()} for row, pc in zip(reduced, pivots)]


def _check_caps(rep_in: LinearRep, rep_out: LinearRep):
    if rep_in.group != rep_out.group:
        raise ValidationError("representations act through different groups")
    for r in (rep_in, rep_out):
        if r.dim > DIM_CAP:
            raise CapExceeded(f"dimension {r.dim} exceeds cap {DIM_CAP}")
        r.validate()


def equivariance_basis(rep_in: LinearRep, rep_out: LinearRep, *, use_closure=False, backend=None) -> list[np.ndarray]:
    """Exact basis of ``{W : W rho_in(g) = rho_out(g) W}`` as rational matrices.

    Basis vectors (row-major ``vec(W)``) are in reduced row echelon form.
    ``use_closure`` stacks constraints for every group element instead of
    only the generators; the result is the same.
    """
    _check_caps(rep_in, rep_out)
    m, n = rep_out.dim, rep_in.dim
    mats = None
    if use_closure:
        ins = dict(rep_in.elements())
        outs = dict(rep_out.elements())
        mats = [(_as_matrix(ins[g]), _as_matrix(outs[g])) for g in ins]
    rows = _constraint_rows(rep_in, rep_out, mats)
    return [_to_matrix(v, m, n) for v in _nullspace(rows, m * n, backend)]


def invariance_basis(rep_in: LinearRep, out_dim: int, **kw) -> list[np.ndarray]:
    """Equivariance into the trivial action on ``R^out_dim``."""
    return equivariance_basis(rep_in, rep_trivial(rep_in.group, out_dim), **kw)


def _as_matrix(r):
    return r.matrix() if isinstance(r, Perm) else r


_ZERO = Fraction(0)


def _to_matrix(v: dict, m, n) -> np.ndarray:
    a = np.full((m, n), _ZERO, dtype=object)
    for c, x in v.items():
        a[c // n, c % n] = x
    return a


def is_equivariant(w: np.ndarray, rep_in: LinearRep, rep_out: LinearRep) -> bool:
    """Exact check over every group element, not just generators."""
    ins = dict(rep_in.elements())
    outs = dict(rep_out.elements())
    for g, rg in ins.items():
        if not np.all(w.dot(_as_matrix(rg)) == _as_matrix(outs[g]).dot(w)):
            return False
    return True


# --------------------------------------------------------------------------
# patterns


@dataclass(frozen=True)
class WeightSharingPattern:
    """Class index per matrix entry; equal indices are tied, ``-1`` is fixed at zero."""

    rows: int
    cols: int
    class_of: tuple
    num_classes: int

    def classes(self) -> list[list[tuple[int, int]]]:
        out = [[] for _ in range(self.num_classes)]
        for i, row in enumerate(self.class_of):
            for j, c in enumerate(row):
                if c >= 0:
                    out[c].append((i, j))
        return out

    def partition(self) -> frozenset:
        return frozenset(frozenset(c) for c in self.classes())

    def transpose(self) -> "WeightSharingPattern":
        return _relabel([[self.class_of[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def to_json(self, dimension: int | None = None) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "classes": [list(r) for r in self.class_of],
            "dimension": self.num_classes if dimension is None else dimension,
        }

    def ascii(self, color: bool = False) -> str:
        """Grid of ``w1, w2, ...`` labels; ``0`` marks entries fixed at zero."""
        labels = [["0" if c < 0 else f"w{c + 1}" for c in row] for row in self.class_of]
        width = max((len(s) for row in labels for s in row), default=1)
        lines = []
        for row, crow in zip(labels, self.class_of):
            cells = []
            for s, c in zip(row, crow):
                s = s.rjust(width)
                if color and c >= 0:
                    s = f"\x1b[{31 + c % 6}m{s}\x1b[0m"
                cells.append(s)
            lines.append(" ".join(cells))
        return "\n".join(lines)


def _relabel(matrix) -> WeightSharingPattern:
    """Renumber classes by first appearance in row-major order."""
    mapping: dict = {}
    out = []
    for row in matrix:
        new = []
        for c in row:
            if c is None or c == -1:
                new.append(-1)
                continue
            if c not in mapping:
                mapping[c] = len(mapping)
            new.append(mapping[c])
        out.append(tuple(new))
    cols = len(out[0]) if out else 0
    return WeightSharingPattern(len(out), cols, tuple(out), len(mapping))


def pattern_of_basis(basis, rows: int | None = None, cols: int | None = None) -> WeightSharingPattern:
    """Entries are tied iff their coordinates agree across every basis matrix."""
    if not basis:
        rows, cols = rows or 0, cols or 0
        return WeightSharingPattern(rows, cols, tuple((-1,) * cols for _ in range(rows)), 0)
    rows, cols = basis[0].shape
    keys = []
    for i in range(rows):
        row = []
        for j in range(cols):
            coords = tuple(b[i, j] for b in basis)
            row.append(None if not any(coords) else coords)
        keys.append(row)
    return _relabel(keys)


def orbit_pattern(rep_in: LinearRep, rep_out: LinearRep, backend=None) -> WeightSharingPattern:
    """Orbits of ``G`` on entries under ``(i, j) -> (rho_out(g) i, rho_in(g) j)``."""
    if not (rep_in.is_permutation and rep_out.is_permutation):
        raise ValidationError("the orbit oracle needs permutation representations")
    _check_caps(rep_in, rep_out)
    m, n = rep_out.dim, rep_in.dim
    perms = [
        [pout(i) * n + pin(j) for i in range(m) for j in range(n)]
        for pin, pout in zip(rep_in.gen_images, rep_out.gen_images)
    ]
    labels = kernels.orbit_labels(perms, m * n, backend)
    return _relabel([labels[i * n:(i + 1) * n] for i in range(m)])


def pattern_from_json(d: dict) -> WeightSharingPattern:
    return _relabel([list(r) for r in d["classes"]])
