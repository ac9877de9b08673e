"""``catarch derive|unroll|check``.

Exit codes: 0 pass, 1 check failure, 2 validation error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from . import cells as cu
from . import checks
from . import equivariance as eq
from . import schemas
from .errors import CapExceeded, CatarchError, ValidationError
from .nngraph import export_dot, export_json

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def _load(path: str | None, schema: dict) -> dict:
    if path is None:
        data = {}
    else:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read spec: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"spec is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ValidationError(f"spec invalid at {where}: {exc.message}") from exc
    return data


def _write(out: str | None, name: str, text: str) -> str | None:
    if out is None:
        return None
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text, encoding="utf-8")
    return str(d / name)


# derive


def _group(d: dict) -> eq.GroupAction:
    if "builtin" in d:
        name, n = d["builtin"], d["n"]
        if name.startswith("regular_"):
            base = {"cyclic": eq.cyclic_group, "symmetric": eq.symmetric_group,
                    "dihedral": eq.dihedral_group}[name.split("_", 1)[1]](n)
            return eq.regular_action(base)
        if name == "dihedral" and n < 3:
            raise ValidationError("dihedral groups need n >= 3")
        return {"trivial": eq.trivial_group, "cyclic": eq.cyclic_group,
                "symmetric": eq.symmetric_group, "dihedral": eq.dihedral_group}[name](n)
    return eq.GroupAction.from_json(d)


def _rep(g: eq.GroupAction, choice: str, dim: int | None = None) -> eq.LinearRep:
    if choice == "vector":
        return eq.rep_vector(g)
    if choice == "entries":
        return eq.rep_entries(g)
    if choice == "vector+entries":
        return eq.direct_sum(eq.rep_vector(g), eq.rep_entries(g))
    return eq.rep_trivial(g, dim or 1)


def cmd_derive(spec: dict, out: str | None, seed: int) -> tuple[int, dict]:
    g = _group(spec["group"])
    eq.closure(g)
    mode = spec.get("mode", "equivariant")
    rep_in = _rep(g, spec.get("rep_in", "vector"))
    if mode == "invariant":
        rep_out = eq.rep_trivial(g, spec.get("out_dim", 1))
    else:
        rep_out = _rep(g, spec.get("rep_out", spec.get("rep_in", "vector")), spec.get("out_dim"))
    basis = eq.equivariance_basis(rep_in, rep_out)
    pattern = eq.pattern_of_basis(basis, rep_out.dim, rep_in.dim)
    report = pattern.to_json(dimension=len(basis))
    _write(out, "pattern.json", _dump(report))
    grid = pattern.ascii(color=spec.get("color", False))
    _write(out, "pattern.txt", pattern.ascii() + "\n")
    print(grid)
    print(f"dimension {len(basis)}  classes {pattern.num_classes}  group order {len(eq.closure(g))}")
    return EXIT_OK, report


# unroll


def cmd_unroll(spec: dict, out: str | None, seed: int | None) -> tuple[int, dict]:
    kind = spec["kind"]
    structure = spec["structure"]
    keys = schemas.STRUCTURE_KEY[kind]
    present = [k for k in structure if k in keys]
    if len(present) != 1 or len(structure) != 1:
        raise ValidationError(f"{kind} structure needs exactly one of {', '.join(keys)}")
    cell_seed = seed if seed is not None else spec.get("seed", 0)
    cell = cu.make_cell(cu.CellSpec(
        kind, spec["dims"], spec.get("nonlinearity", "tanh"), spec.get("bias", True),
        spec.get("initial_state", "param"), cell_seed,
    ))
    net = cu.build_from_structure(cell, structure)
    census = net.census()
    census["tied"] = net.check_tying()
    params = {"names": list(cell.param.names), "shapes": [list(s) for s in cell.param.shapes],
              "values": [float(v) for v in cell.init_params()]}
    _write(out, "graph.json", export_json(net.graph))
    _write(out, "graph.dot", export_dot(net.graph, name=kind))
    _write(out, "params.json", _dump(params))
    _write(out, "census.json", _dump(census))
    print(f"parameters {census['param_count']}  stores {census['param_stores']}  "
          f"cell reads {census['cell_reads']}  instances {census['instances']}  "
          f"outputs {len(census['outputs'])}")
    return EXIT_OK, census


# check


def cmd_check(spec: dict, suite: str | None, out: str | None, seed: int) -> tuple[int, dict]:
    suite = suite or spec.get("suite")
    if suite is None:
        raise ValidationError("no suite given")
    names = list(checks.SUITES) if suite == "all" else [suite]
    for name in names:
        if name not in checks.SUITES:
            raise ValidationError(f"unknown suite {name!r}; known: {', '.join(checks.SUITES)}, all")
    trials = spec.get("trials", 1000)
    results = {}
    for name in names:
        results[name] = checks.run_suite(name, seed, trials)
    passed = all(r["passed"] for rs in results.values() for r in rs)
    report = {"suite": suite, "seed": seed, "passed": passed, "results": results}
    text = json.dumps(report, sort_keys=True, indent=1, default=float) + "\n"
    _write(out, "report.json", text)
    for name, rs in results.items():
        for r in rs:
            print(f"{'PASS' if r['passed'] else 'FAIL'}  {name}/{r['name']}")
    return (EXIT_OK if passed else EXIT_FAIL), report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catarch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("derive", "derive a weight-sharing pattern from a group spec"),
                           ("unroll", "compile a cell spec into a weight-tied graph"),
                           ("check", "run a property suite")):
        s = sub.add_parser(name, help=helptext)
        if name == "check":
            s.add_argument("suite", nargs="?", help=f"one of {', '.join(checks.SUITES)}, all")
        s.add_argument("--spec", help="JSON spec file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "derive":
            if args.spec is None:
                raise ValidationError("derive needs --spec")
            code, _ = cmd_derive(_load(args.spec, schemas.DERIVE), args.out, args.seed or 0)
        elif args.command == "unroll":
            if args.spec is None:
                raise ValidationError("unroll needs --spec")
            code, _ = cmd_unroll(_load(args.spec, schemas.UNROLL), args.out, args.seed)
        else:
            code, _ = cmd_check(_load(args.spec, schemas.CHECK), args.suite, args.out, args.seed or 0)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValidationError, CatarchError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


if __name__ == "__main__":
    sys.exit(main())
