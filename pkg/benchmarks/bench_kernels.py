"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the exact nullspace (row reduction) and the orbit oracle on the
cyclic, symmetric and dihedral permutation representations, and checks
that both backends return identical results.
"""
import argparse
import timeit

from catarch import equivariance as eq
from catarch import kernels

CASES = [
    ("cyclic 16 vector", lambda: eq.rep_vector(eq.cyclic_group(16))),
    ("cyclic 32 vector", lambda: eq.rep_vector(eq.cyclic_group(32))),
    ("symmetric 6 vector", lambda: eq.rep_vector(eq.symmetric_group(6))),
    ("dihedral 8 entries", lambda: eq.rep_entries(eq.dihedral_group(8))),
    ("symmetric 3 vector+entries", lambda: eq.direct_sum(eq.rep_vector(eq.symmetric_group(3)),
                                                         eq.rep_entries(eq.symmetric_group(3)))),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'case':30s} {'op':8s}" + "".join(f" {b:>12s}" for b in backends)
    print(header)
    for name, make in CASES:
        rep = make()
        for op, fn in (("basis", lambda b: eq.equivariance_basis(rep, rep, backend=b)),
                       ("orbits", lambda b: eq.orbit_pattern(rep, rep, backend=b))):
            results = {b: fn(b) for b in backends}
            ref = results["python"]
            for b, r in results.items():
                same = all((x == y).all() for x, y in zip(r, ref)) if op == "basis" else r == ref
                if not same:
                    raise SystemExit(f"backend {b} disagrees on {name} {op}")
            times = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends]
            print(f"{name:30s} {op:8s}" + "".join(f" {t * 1e3:10.2f}ms" for t in times))


if __name__ == "__main__":
    main()
