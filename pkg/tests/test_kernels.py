from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catarch import _kernels_py, kernels

BACKENDS = kernels.available_backends()


def to_dense(rows, ncols):
    return [[Fraction(r.get(c, 0)) for c in range(ncols)] for r in rows]


def fraction_rref(rows, ncols):
    # textbook rational Gauss-Jordan
    m = [[Fraction(x) for x in r] for r in rows]
    out, pivots, r = [], [], 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        m[r] = [x / m[r][c] for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m[:r], pivots


def normalised(rows, pivots, ncols):
    dense = to_dense(rows, ncols)
    return [[x / d[p] for x in d] for d, p in zip(dense, pivots)]


matrices = st.integers(1, 7).flatmap(
    lambda n: st.lists(st.lists(st.integers(-4, 4), min_size=n, max_size=n), min_size=0, max_size=8)
    .map(lambda rows: (rows, n)))


@given(matrices)
def test_rref_matches_rational_oracle(case):
    rows, n = case
    want, want_piv = fraction_rref(rows, n)
    for backend in BACKENDS:
        got, piv = kernels.rref_int(rows, n, backend)
        assert list(piv) == want_piv
        assert normalised(got, piv, n) == want
        for r in got:
            assert all(isinstance(v, int) for v in r.values())


@given(matrices)
def test_sparse_and_dense_inputs_agree(case):
    rows, n = case
    sparse = [{c: v for c, v in enumerate(r) if v} for r in rows]
    for backend in BACKENDS:
        assert kernels.rref_int(rows, n, backend) == kernels.rref_int(sparse, n, backend)


@given(matrices)
def test_backends_agree(case):
    rows, n = case
    results = {b: kernels.rref_int(rows, n, b) for b in BACKENDS}
    assert len({repr(r) for r in results.values()}) == 1


def test_overflow_falls_back():
    big = 10 ** 12
    rows = [[big, 1, 0], [1, big, 3], [7, 0, big]]
    got, piv = kernels.rref_int(rows, 3)
    want, want_piv = fraction_rref(rows, 3)
    assert list(piv) == want_piv
    assert normalised(got, piv, 3) == want


def test_empty():
    for backend in BACKENDS:
        assert kernels.rref_int([], 4, backend) == ([], [])


@given(st.integers(1, 12), st.lists(st.randoms(use_true_random=False), min_size=0, max_size=3))
def test_orbit_labels(n, rngs):
    perms = []
    for r in rngs:
        p = list(range(n))
        r.shuffle(p)
        perms.append(p)
    # oracle: BFS closure of each point
    want = {}
    for start in range(n):
        seen, todo = {start}, [start]
        while todo:
            x = todo.pop()
            for p in perms:
                if p[x] not in seen:
                    seen.add(p[x])
                    todo.append(p[x])
        want[start] = frozenset(seen)
    for backend in BACKENDS:
        labels = kernels.orbit_labels(perms, n, backend)
        for i in range(n):
            for j in range(n):
                assert (labels[i] == labels[j]) == (j in want[i])


def test_backend_selection():
    assert "python" in BACKENDS
    with pytest.raises(ValueError):
        kernels.rref_int([[1]], 1, "fortran")
    assert _kernels_py.BACKEND == "python"


def test_pure_fallback_selected_at_import():
    import subprocess
    import sys

    code = "from catarch import kernels; print(kernels.BACKEND, kernels.available_backends())"
    r = subprocess.run([sys.executable, "-c", code], env={"CATARCH_PURE": "1", "PATH": ""},
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.split()[0] == "python"
