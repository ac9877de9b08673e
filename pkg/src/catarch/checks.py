"""Property suites shared by the ``check`` command and the acceptance tests.

Every suite returns a list of result dicts with at least ``name`` and
``passed``.  Results depend only on the seed (no timings), so reports are
reproducible byte for byte.
"""
from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from . import cells as cu
from . import equivariance as eq
from . import functor as fk
from . import para
from .errors import CapExceeded

SUITES = ("homomorphism", "gradients", "equivariance", "comonoid", "free-monad", "fold")

ARCH_DIMS = {
    "folding_rnn": {"a": 3, "s": 4},
    "unfolding_rnn": {"s": 4, "o": 3},
    "recursive_nn": {"a": 3, "s": 4},
    "mealy": {"s": 4, "i": 3, "o": 2},
    "moore": {"s": 4, "i": 3, "o": 2},
}


def _result(name: str, passed: bool, **info) -> dict:
    return {"name": name, "passed": bool(passed), **info}


# --------------------------------------------------------------------------
# homomorphism squares


def homomorphism(seed: int = 0, trials: int = 1000) -> list[dict]:
    out = []
    for k, (kind, dims) in enumerate(ARCH_DIMS.items()):
        for mode in ("integer", "identity", "tanh"):
            nl = "tanh" if mode == "tanh" else "identity"
            cell = cu.make_cell(cu.CellSpec(kind, dims, nl))
            r = cu.check_square(kind, cell, trials, seed=seed + 7919 * k, integer=mode == "integer")
            out.append(_result(f"{kind}/{mode}", r["passed"], max_residual=r["max_residual"],
                               tolerance=r["tolerance"], trials=trials))
    return out


def stream_weight_scheme(steps: int = 32, seed: int = 0, tol: float = 1e-12) -> dict:
    """Scalar linear unfolding cell: output ``k`` is ``w_n**k * w_o * x``."""
    rng = np.random.default_rng(seed)
    cell = cu.make_cell(cu.CellSpec("unfolding_rnn", {"s": 1, "o": 1}, "identity", bias=False))
    net = cu.unroll_stream(cell, steps)
    worst = 0.0
    for _ in range(20):
        w_o, w_n = rng.uniform(-1.0, 1.0, 2)
        x = rng.uniform(-2.0, 2.0)
        outs = net.forward(np.array([w_o, w_n]), {"x": np.array([x])})
        for k in range(steps):
            expect = w_n ** k * w_o * x
            worst = max(worst, abs(float(outs[f"o{k}"][0]) - expect))
    return _result("stream_weight_scheme", worst <= tol, max_residual=worst, tolerance=tol, steps=steps)


# --------------------------------------------------------------------------
# gradients


def gradient_nets(seed: int = 0, depth: int = 5) -> list[tuple[str, cu.UnrolledNet]]:
    nets = []
    for kind, dims in ARCH_DIMS.items():
        cell = cu.make_cell(cu.CellSpec(kind, dims, "tanh", seed=seed))
        if kind == "folding_rnn":
            net = cu.unroll_fold(cell, depth)
        elif kind == "unfolding_rnn":
            net = cu.unroll_stream(cell, depth)
        elif kind == "recursive_nn":
            net = cu.unroll_tree(cell, cu.perfect_tree(depth))
        elif kind == "mealy":
            net = cu.unroll_mealy(cell, depth)
        else:
            net = cu.unroll_moore(cell, depth)
        nets.append((kind, net))
    return nets


def gradients(seed: int = 0, depth: int = 5, tol: float = 1e-4, eps: float = 1e-5) -> list[dict]:
    out = []
    for k, (kind, net) in enumerate(gradient_nets(seed, depth)):
        rng = np.random.default_rng(seed + 104729 * (k + 1))
        p = net.cell.init_params(seed + k)
        r = net.finite_diff_check(p, cu.structure_inputs(net, rng), eps=eps, tol=tol, rng=rng)
        out.append(_result(kind, r["passed"], max_rel_error=r["max_rel_error"], tolerance=tol,
                           params=int(p.size), instances=net.instances, tied=net.check_tying()))
        out[-1]["passed"] = out[-1]["passed"] and out[-1]["tied"]
    return out


# --------------------------------------------------------------------------
# equivariance


def pixel_swap():
    return eq.GroupAction(2, (eq.Perm((1, 0)),))


def builtin_groups(max_degree: int = 8, max_order: int = 24) -> list[tuple[str, eq.GroupAction]]:
    out = []
    for n in range(1, max_degree + 1):
        for name, make in (("trivial", eq.trivial_group), ("cyclic", eq.cyclic_group),
                           ("symmetric", eq.symmetric_group), ("dihedral", eq.dihedral_group)):
            if name == "dihedral" and n < 3:
                continue
            g = make(n)
            try:
                eq.closure(g, cap=max_order)
            except CapExceeded:
                continue
            out.append((f"{name}{n}", g))
    for name, g in list(out):
        if name.startswith(("cyclic", "dihedral", "symmetric")):
            order = len(eq.closure(g))
            if order <= max_degree and order != g.degree:
                out.append((f"regular_{name}", eq.regular_action(g)))
    return out


def builtin_reps(max_dim: int = 8, max_order: int = 24) -> list[tuple[str, eq.LinearRep, eq.LinearRep]]:
    """Every pair of built-in permutation reps of one group with dims ``<= max_dim``."""
    pairs = []
    for gname, g in builtin_groups(max_dim, max_order):
        reps = [("vector", eq.rep_vector(g)), ("trivial1", eq.rep_trivial(g, 1))]
        if g.degree ** 2 <= max_dim:
            reps.append(("entries", eq.rep_entries(g)))
        if g.degree + 1 <= max_dim:
            reps.append(("vector+trivial", eq.direct_sum(eq.rep_vector(g), eq.rep_trivial(g, 1))))
        if g.degree + g.degree ** 2 <= max_dim:
            reps.append(("vector+entries", eq.direct_sum(eq.rep_vector(g), eq.rep_entries(g))))
        for (a, ra), (b, rb) in itertools.product(reps, repeat=2):
            pairs.append((f"{gname}:{a}->{b}", ra, rb))
    return pairs


def _fmt(pattern) -> list:
    return [list(r) for r in pattern.class_of]


def equivariance(seed: int = 0, backend=None) -> list[dict]:
    out = []
    swap = pixel_swap()
    v = eq.rep_vector(swap)

    pat = eq.pattern_of_basis(eq.equivariance_basis(v, v, backend=backend))
    basis = eq.equivariance_basis(v, v, backend=backend)
    out.append(_result("pixel_swap_equivariant", len(basis) == 2 and _fmt(pat) == [[0, 1], [1, 0]],
                       dimension=len(basis), pattern=_fmt(pat)))

    inv = eq.invariance_basis(v, 2, backend=backend)
    ipat = eq.pattern_of_basis(inv)
    out.append(_result("pixel_swap_invariant", len(inv) == 2 and _fmt(ipat) == [[0, 1], [0, 1]],
                       dimension=len(inv), pattern=_fmt(ipat), expected=[[0, 1], [0, 1]]))

    for n in (2, 4, 8, 16):
        r = eq.rep_vector(eq.cyclic_group(n))
        b = eq.equivariance_basis(r, r, backend=backend)
        p = eq.pattern_of_basis(b)
        circ = all(
            (p.class_of[i][j] == p.class_of[k][l]) == ((i - j) % n == (k - l) % n)
            for i in range(n) for j in range(n) for k in range(n) for l in range(n)
        )
        out.append(_result(f"circulant_Z{n}", len(b) == n and circ, dimension=len(b)))

    for n in range(2, 6):
        r = eq.rep_vector(eq.symmetric_group(n))
        b = eq.equivariance_basis(r, r, backend=backend)
        o = eq.orbit_pattern(r, r, backend=backend)
        out.append(_result(f"symmetric_S{n}", len(b) == 2 == o.num_classes, dimension=len(b),
                           orbit_classes=o.num_classes))

    for gname, g in builtin_groups(8, 8):
        if not gname.startswith(("cyclic", "dihedral", "symmetric")):
            continue
        reg = eq.regular_action(g)
        r = eq.rep_vector(reg)
        b = eq.equivariance_basis(r, r, backend=backend)
        order = reg.degree
        out.append(_result(f"regular_{gname}", len(b) == order, dimension=len(b), order=order))

    mismatches = []
    count = 0
    for name, ra, rb in builtin_reps(8, 24):
        count += 1
        b = eq.equivariance_basis(ra, rb, backend=backend)
        o = eq.orbit_pattern(ra, rb, backend=backend)
        bp = eq.pattern_of_basis(b, rb.dim, ra.dim)
        if len(b) != o.num_classes or bp.partition() != o.partition():
            mismatches.append(name)
    out.append(_result("oracle_sweep", not mismatches, pairs=count, mismatches=mismatches))
    return out


# --------------------------------------------------------------------------
# comonoid laws


COMONOID_SHAPES = (
    (("w", (1,)),),
    (("w", (3,)),),
    (("W", (2, 3)), ("b", (2,))),
    (("W", (4, 4)), ("b", (4,)), ("s0", (4,))),
)


def comonoid(seed: int = 0, samples: int = 100) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for entries in COMONOID_SHAPES:
        P = para.ParamShape(entries)
        idr, cp, dl = para.reparam_identity(P), para.reparam_copy(P), para.reparam_delete(P)
        left = para.reparam_compose(para.reparam_tensor(dl, idr), cp)
        right = para.reparam_compose(para.reparam_tensor(idr, dl), cp)
        assoc_l = para.reparam_compose(para.reparam_tensor(cp, idr), cp)
        assoc_r = para.reparam_compose(para.reparam_tensor(idr, cp), cp)
        swapped = para.reparam_compose(para.reparam_swap(P, P), cp)
        ok = {"counit_left": True, "counit_right": True, "coassociative": True, "cocommutative": True}
        for _ in range(samples):
            q = rng.standard_normal(P.size())
            ok["counit_left"] &= np.array_equal(left.flat(q), q)
            ok["counit_right"] &= np.array_equal(right.flat(q), q)
            ok["coassociative"] &= np.array_equal(assoc_l.flat(q), assoc_r.flat(q))
            ok["cocommutative"] &= np.array_equal(swapped.flat(q), cp.flat(q))
        label = "+".join("x".join(map(str, s)) for _, s in entries)
        for law, passed in ok.items():
            out.append(_result(f"{law}[{label}]", passed, samples=samples))
    return out


# --------------------------------------------------------------------------
# free monad


FREE_BASES = (("list", fk.list_shape(("a",))), ("tree", fk.tree_shape(("a",))))
VARIABLES = ("x", "y")


def _dedup(items) -> tuple:
    return tuple(dict.fromkeys(items))


def monad_laws(base, max_size: int = 4, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    Z = VARIABLES
    terms = fk.enumerate_terms(fk.free_shape(base, Z), max_size)
    small = [t for t in terms if t.size() <= 2]
    counts = {"left_unit": 0, "right_unit": 0, "associativity": 0}
    failures = []
    for t in terms:
        # join . pure = id
        outer = fk.free_pure(base, t, (t,))
        if fk.free_join(base, outer, Z) != t:
            failures.append(("left_unit", repr(t)))
        counts["left_unit"] += 1
        # join . fmap(pure) = id
        pures = {z: fk.free_pure(base, z, Z) for z in Z}
        lifted = fk.free_map(base, pures.__getitem__, t, _dedup(pures.values()))
        if fk.free_join(base, lifted, Z) != t:
            failures.append(("right_unit", repr(t)))
        counts["right_unit"] += 1
        # join . join = join . fmap(join) on a three-level term built from substitutions
        for _ in range(3):
            s1 = {z: small[int(rng.integers(len(small)))] for z in Z}
            s2 = {z: small[int(rng.integers(len(small)))] for z in Z}
            inner = _dedup(s2.values())
            mid = {z: fk.free_map(base, s2.__getitem__, s1[z], inner) for z in Z}
            middle = _dedup(mid.values())
            t3 = fk.free_map(base, mid.__getitem__, t, middle)
            lhs = fk.free_join(base, fk.free_join(base, t3, inner), Z)
            flat = {m: fk.free_join(base, m, Z) for m in middle}
            rhs = fk.free_join(base, fk.free_map(base, flat.__getitem__, t3, _dedup(flat.values())), Z)
            if lhs != rhs:
                failures.append(("associativity", repr(t)))
            counts["associativity"] += 1
    return {"terms": len(terms), "counts": counts, "failures": failures[:5], "passed": not failures}


def catalan_counts(max_leaves: int = 5) -> dict:
    shape = fk.tree_shape(("a",))
    terms = fk.enumerate_terms(shape, 2 * max_leaves - 1)
    by_leaves = [0] * (max_leaves + 1)
    for t in terms:
        by_leaves[len(fk.tree_leaves(t))] += 1
    catalan = [1]
    for k in range(1, max_leaves):
        catalan.append(sum(catalan[i] * catalan[k - 1 - i] for i in range(k)))
    return {"counts": by_leaves[1:], "expected": catalan, "passed": by_leaves[1:] == catalan}


def stabilization(shape, max_size: int = 5, extra: int = 3) -> dict:
    bad = []
    for s in range(max_size + 1):
        target = set(fk.enumerate_terms(shape, s))
        for k in range(s, s + extra + 1):
            if fk.approximants(shape, k, s) != target:
                bad.append((s, k))
    return {"failures": bad, "passed": not bad}


def free_monad(seed: int = 0) -> list[dict]:
    out = []
    for name, base in FREE_BASES:
        r = monad_laws(base, 4, seed)
        out.append(_result(f"monad_laws[{name}]", r["passed"], terms=r["terms"], counts=r["counts"]))
    c = catalan_counts(5)
    out.append(_result("catalan", c["passed"], counts=c["counts"], expected=c["expected"]))
    shapes = (("list", fk.list_shape(("a", "b"))), ("tree", fk.tree_shape(("a",))),
              ("mealy2", fk.Pow(("0", "1"), fk.Sum(fk.ONE, fk.ID))))
    for name, shape in shapes:
        r = stabilization(shape, 5)
        out.append(_result(f"stabilization[{name}]", r["passed"], failures=r["failures"]))
    return out


# --------------------------------------------------------------------------
# fold initiality


def _list_equations_hold(g: Callable, r0, r1, terms) -> bool:
    for t in terms:
        if isinstance(t.layer, fk.Inl):
            if g(t) != r0:
                return False
        else:
            a, rest = t.layer.value
            if g(t) != r1(a, g(rest)):
                return False
    return True


def fold_uniqueness(seed: int = 0, algebras: int = 20, max_size: int = 6) -> dict:
    """Alternatives that satisfy the fold equations agree with ``fold``;
    perturbed tables violate them."""
    rng = np.random.default_rng(seed)
    labels = ("a", "b")
    shape = fk.list_shape(labels)
    terms = fk.enumerate_terms(shape, max_size)
    accepted = rejected = disagreements = 0
    for _ in range(algebras):
        r0 = int(rng.integers(-5, 6))
        coef = {a: (int(rng.integers(-3, 4)), int(rng.integers(-5, 6))) for a in labels}

        def r1(a, x, coef=coef):
            return coef[a][0] * x + coef[a][1]

        def alg(v, r0=r0, r1=r1):
            return r0 if isinstance(v, fk.Inl) else r1(*v.value)

        reference = {t: fk.fold(shape, alg, t) for t in terms}

        # alternatives: an iterative right-to-left loop and a bottom-up table
        def loop(t, r0=r0, r1=r1):
            acc = r0
            for a in reversed(fk.to_list(t)):
                acc = r1(a, acc)
            return acc

        table = {}
        for t in sorted(terms, key=lambda t: t.size()):
            table[t] = r0 if isinstance(t.layer, fk.Inl) else r1(t.layer.value[0], table[t.layer.value[1]])
        candidates = [loop, table.__getitem__]

        # perturbed tables: one entry changed
        for _ in range(3):
            bad = dict(reference)
            victim = terms[int(rng.integers(len(terms)))]
            bad[victim] += int(rng.integers(1, 4))
            candidates.append(bad.__getitem__)

        for g in candidates:
            if _list_equations_hold(g, r0, r1, terms):
                accepted += 1
                if any(g(t) != reference[t] for t in terms):
                    disagreements += 1
            else:
                rejected += 1
    passed = disagreements == 0 and accepted == 2 * algebras and rejected == 3 * algebras
    return {"terms": len(terms), "accepted": accepted, "rejected": rejected,
            "disagreements": disagreements, "passed": passed}


def fold(seed: int = 0) -> list[dict]:
    r = fold_uniqueness(seed)
    return [_result("fold_uniqueness", r["passed"], terms=r["terms"], accepted=r["accepted"],
                    rejected=r["rejected"], disagreements=r["disagreements"])]


def run_suite(name: str, seed: int = 0, trials: int = 1000) -> list[dict]:
    if name == "homomorphism":
        return homomorphism(seed, trials) + [stream_weight_scheme(seed=seed)]
    if name == "gradients":
        return gradients(seed)
    if name == "equivariance":
        return equivariance(seed)
    if name == "comonoid":
        return comonoid(seed)
    if name == "free-monad":
        return free_monad(seed)
    if name == "fold":
        return fold(seed)
    raise KeyError(name)
