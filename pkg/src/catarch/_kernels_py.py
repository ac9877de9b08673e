"""Pure-Python kernels; the compiled ``_kernels`` module mirrors this API."""
from math import gcd

BACKEND = "python"


def _primitive(row: dict) -> dict:
    g = 0
    for v in row.values():
        g = gcd(g, v)
    lead = row[min(row)]
    if lead < 0:
        g = -g
    if g != 1:
        row = {c: v // g for c, v in row.items()}
    return row


def _eliminate(row: dict, prow: dict, col: int) -> dict:
    a, p = row[col], prow[col]
    out = {c: v * p for c, v in row.items()}
    for c, v in prow.items():
        out[c] = out.get(c, 0) - a * v
    return {c: v for c, v in out.items() if v}


def _sparse(raw) -> dict:
    items = raw.items() if isinstance(raw, dict) else enumerate(raw)
    return {int(c): int(v) for c, v in items if v}


def rref_int(rows, ncols):
    """Reduced row echelon form over the rationals, integer-scaled.

    ``rows`` are dense integer sequences or sparse ``{column: value}`` dicts.
    Returns ``(rows, pivots)``: each row is a sparse dict, primitive, with a
    positive pivot and zero in every other pivot column; rows are ordered by
    pivot column.
    """
    basis: dict[int, dict] = {}
    for raw in rows:
        row = _sparse(raw)
        while row:
            hit = next((c for c in sorted(row) if c in basis), None)
            if hit is None:
                break
            row = _eliminate(row, basis[hit], hit)
        if not row:
            continue
        row = _primitive(row)
        lead = min(row)
        for c in list(basis):
            if lead in basis[c]:
                basis[c] = _primitive(_eliminate(basis[c], row, lead))
        basis[lead] = row
    pivots = sorted(basis)
    return [dict(sorted(basis[c].items())) for c in pivots], pivots


def orbit_labels(perms, n):
    """Label points ``0..n-1`` by orbit under the given permutations.

    Labels are assigned in order of each orbit's smallest point.
    """
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in perms:
        for i in range(n):
            a, b = find(i), find(int(perm[i]))
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    labels = [0] * n
    seen = {}
    for i in range(n):
        r = find(i)
        if r not in seen:
            seen[r] = len(seen)
        labels[i] = seen[r]
    return labels
