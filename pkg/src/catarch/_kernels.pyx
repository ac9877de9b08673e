# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: int64 row reduction and orbit union-find.

Same API and results as ``_kernels_py``.  ``rref_int`` raises
OverflowError when an intermediate would leave the safe int64 range; the
caller then retries with the arbitrary-precision fallback.
"""
import numpy as np
cimport numpy as cnp

BACKEND = "cython"

cdef long long SAFE = 1LL << 30


cdef inline long long _gcd(long long a, long long b) noexcept nogil:
    if a < 0:
        a = -a
    if b < 0:
        b = -b
    while b:
        a, b = b, a % b
    return a


cdef void _normalize(long long[::1] v, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    """Divide ``v[lo:hi]`` by its content; make the first nonzero entry positive."""
    cdef Py_ssize_t c, lead = -1
    cdef long long g = 0
    for c in range(lo, hi):
        if v[c]:
            if lead < 0:
                lead = c
            g = _gcd(g, v[c])
    if g == 0:
        return
    if v[lead] < 0:
        g = -g
    if g != 1:
        for c in range(lead, hi):
            v[c] = v[c] / g


cdef bint _eliminate(long long[::1] v, long long[::1] p, Py_ssize_t col,
                     Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    """``v <- v * p[col] - v[col] * p`` over ``[lo, hi)``, which must cover both
    supports. False on overflow."""
    cdef Py_ssize_t c
    cdef long long a = v[col], q = p[col], x, y
    if a >= SAFE or a <= -SAFE or q >= SAFE or q <= -SAFE:
        return False
    for c in range(lo, hi):
        x = v[c]
        y = p[c]
        if x == 0 and y == 0:
            continue
        if x >= SAFE or x <= -SAFE or y >= SAFE or y <= -SAFE:
            return False
        v[c] = x * q - a * y
    return True


def rref_int(rows, Py_ssize_t ncols):
    """Integer-scaled reduced row echelon form; see ``_kernels_py.rref_int``.

    Basis rows are kept dense with their nonzero span ``[lo, hi)`` so each
    elimination touches only the union of the two spans.
    """
    cdef Py_ssize_t rank = 0, c, r, lead, lo, hi, b
    cdef bint ok = True
    cdef long long[:, ::1] basis
    cdef cnp.int64_t[:, ::1] span
    cdef long long[::1] row
    cdef cnp.int64_t[::1] where
    if ncols == 0:
        return [], []
    cap = min(16, ncols)
    basis_arr = np.zeros((cap, ncols), dtype=np.int64)
    span_arr = np.zeros((cap, 2), dtype=np.int64)
    basis = basis_arr
    span = span_arr
    where_arr = np.full(ncols, -1, dtype=np.int64)   # pivot column -> basis row
    where = where_arr
    row_arr = np.zeros(ncols, dtype=np.int64)
    row = row_arr
    lo, hi = 0, 0
    for raw in rows:
        for c in range(lo, hi):
            row[c] = 0
        lo, hi = ncols, 0
        items = raw.items() if isinstance(raw, dict) else enumerate(raw)
        for j, v in items:
            if v:
                if v >= SAFE or v <= -SAFE:
                    raise OverflowError("entry outside int64 fast path")
                row[j] = v
                lo = min(lo, j)
                hi = max(hi, j + 1)
        if hi == 0:
            lo = 0
            continue
        lead = -1
        with nogil:
            c = lo
            while c < hi:
                if row[c] != 0:
                    b = where[c]
                    if b < 0:
                        if lead < 0:
                            lead = c
                    else:
                        if span[b, 1] > hi:
                            hi = span[b, 1]
                        if not _eliminate(row, basis[b], c, lo, hi):
                            ok = False
                            break
                c += 1
        if not ok:
            raise OverflowError("intermediate outside int64 fast path")
        if lead < 0:
            continue
        if rank == basis_arr.shape[0]:
            cap = min(2 * rank, ncols)
            grown = np.zeros((cap, ncols), dtype=np.int64)
            grown[:rank] = basis_arr
            gspan = np.zeros((cap, 2), dtype=np.int64)
            gspan[:rank] = span_arr
            basis_arr, span_arr = grown, gspan
            basis = basis_arr
            span = span_arr
        with nogil:
            _normalize(row, lead, hi)
            while hi > lead and row[hi - 1] == 0:
                hi -= 1
            for r in range(rank):
                if span[r, 0] <= lead < span[r, 1] and basis[r, lead]:
                    if hi > span[r, 1]:
                        span[r, 1] = hi
                    if not _eliminate(basis[r], row, lead, span[r, 0], span[r, 1]):
                        ok = False
                        break
                    _normalize(basis[r], span[r, 0], span[r, 1])
            if ok:
                for c in range(lead, hi):
                    basis[rank, c] = row[c]
                span[rank, 0] = lead
                span[rank, 1] = hi
                where[lead] = rank
                rank += 1
        lo = min(lo, lead)
        if not ok:
            raise OverflowError("intermediate outside int64 fast path")
    pivots = [c for c in range(ncols) if where_arr[c] >= 0]
    out = []
    for c in pivots:
        r = where_arr[c]
        b_row = basis_arr[r, span_arr[r, 0]:span_arr[r, 1]]
        nz = np.flatnonzero(b_row)
        out.append(dict(zip((nz + span_arr[r, 0]).tolist(), b_row[nz].tolist())))
    return out, pivots


def orbit_labels(perms, Py_ssize_t n):
    """Orbit labels in order of each orbit's smallest point."""
    cdef cnp.int64_t[:, ::1] pm = np.ascontiguousarray(np.asarray(perms, dtype=np.int64).reshape(-1, n))
    parent_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_arr
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = out
    cdef Py_ssize_t g, i, a, b, x
    cdef Py_ssize_t ngen = pm.shape[0]
    with nogil:
        for g in range(ngen):
            for i in range(n):
                a = i
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = pm[g, i]
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b
        x = 0
        for i in range(n):
            a = i
            while parent[a] != a:
                a = parent[a]
            if a == i:
                labels[i] = x
                x += 1
            else:
                labels[i] = labels[a]
    return out.tolist()
