"""Command-line interface: excalc check|prove|translate|eval|audit|fuzz.

Exit codes: 0 proof/valid, 1 disproof/violation, 2 usage or parse error.
File arguments that do not exist on disk fall back to the bundled corpus
(nat.basic, nat.deco, mnat.model).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .core import BudgetExceededError, ExcalcError, Logic, source, type_display
from .deduction import Step
from .dsl import ParseResult, parse, parse_equation, parse_term, print_specification
from .fuzz import DEFAULT_SEED, gen_corpus
from .models import (
    check_equation,
    enumerate_models,
    fmt_elem,
    parse_model,
    soundness_audit,
    validate_model,
)
from .translate import expand, undecorate


def _read(path: str) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text()
    bundled = resources.files("excalc").joinpath("data", path)
    if bundled.is_file():
        return bundled.read_text()
    raise FileNotFoundError(path)


def _load(path: str) -> ParseResult:
    return parse(_read(path), path)


def _print_trace(steps: list[Step], fmt: str) -> None:
    if fmt == "json":
        for st in steps:
            print(json.dumps({"rule": st.rule, "position": st.position,
                              "before": st.before, "after": st.after}))
    else:
        for i, st in enumerate(steps, 1):
            print(f"{i}. {st.line()}")


def cmd_check(args) -> int:
    try:
        res = _load(args.file)
    except (ExcalcError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    from .core import well_formed

    report = well_formed(res.spec)
    for w in report.warnings:
        print(f"warning: {w}")
    for v in report.violations:
        print(f"violation: {v}")
    if report.ok:
        print(f"{args.file}: well-formed {res.spec.logic.value} specification "
              f"({len(res.spec.types)} types, {len(res.spec.gens)} functions, "
              f"{len(res.spec.equations)} equations)")
    return 0 if report.ok else 1


def cmd_prove(args) -> int:
    try:
        res = _load(args.file)
        lhs, rhs = parse_equation(args.equation, res)
        decision = res.store.equiv(lhs, rhs, depth=args.depth)
    except (ExcalcError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"verdict: {decision.verdict}")
    if decision.depth_hit:
        print(f"note: recursion depth bound ({args.depth or res.store.default_depth}) reached")
    if args.trace:
        _print_trace(decision.trace, args.format)
    return 0 if decision.yes else 1


def cmd_translate(args) -> int:
    try:
        res = _load(args.file)
        if res.spec.logic is not Logic.DECORATED:
            print("error: translation source must be a decorated specification",
                  file=sys.stderr)
            return 2
        tr = undecorate(res.store) if args.undecorate else expand(res.store)
        text = print_specification(tr.target_store)
    except (ExcalcError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".prov").write_text("\n".join(tr.notes) + "\n")
        print(f"wrote {args.out} and {args.out}.prov")
    else:
        print(text, end="")
    return 0


def cmd_eval(args) -> int:
    try:
        res = _load(args.file)
        term = parse_term(args.term, res)
        if res.spec.logic is Logic.DECORATED:
            tr = expand(res.store)
            store, term = tr.target_store, tr.map_term(term)
        else:
            store = res.store
        model = parse_model(_read(args.model), store, args.model)
        report = validate_model(store, model)
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if report.violations:
            for v in report.violations:
                print(f"violation: {v}", file=sys.stderr)
            return 1
        from .models import _parse_elem

        x = _parse_elem(args.element, store)
        value = model.eval(term, x)
        from .core import target as target_of

        print(model.display_result(target_of(term), value))
    except (ExcalcError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def _audit_one(path: str, args) -> tuple[int, str]:
    res = _load(path)
    if res.spec.logic is Logic.DECORATED:
        tr = expand(res.store)
        store = tr.target_store
        def run(models):
            return soundness_audit(res.store, models, tr)
    else:
        store = res.store
        def run(models):
            from .models import AuditEntry, AuditReport

            report = AuditReport()
            eqs = list(res.spec.equations) + list(res.store.derived)
            for model in models:
                for i, eq in enumerate(eqs):
                    r = check_equation(model, eq)
                    report.entries.append(AuditEntry(
                        eq.label or f"eq{i + 1}", "", model.name, r.holds,
                        fmt_elem(r.witness) if not r.holds else ""))
            return report
    truncated = ""
    if args.model:
        models = [parse_model(_read(args.model), store, args.model)]
        bad = validate_model(store, models[0])
        if bad.violations:
            return 1, f"{path}: model invalid: {bad.violations[0]}"
    else:
        models = []
        try:
            for m in enumerate_models(store, args.max_carrier, args.budget):
                models.append(m)
        except BudgetExceededError as e:
            truncated = f"enumeration truncated at the candidate cap {e.cap}"
    report = run(models)
    report.truncated = truncated
    checked = len(report.entries)
    failures = report.failures
    lines = [f"{path}: {checked} checks over {len(models)} models: "
             f"{'all HOLD' if not failures else f'{len(failures)} FAIL'}"]
    if truncated:
        lines.append(f"{path}: note: {truncated}")
    for f in failures[:10]:
        lines.append(f"  FAIL {f.label} in {f.model} at {f.witness}: {f.equation}")
    return (0 if not failures else 1), "\n".join(lines)


def cmd_audit(args) -> int:
    target = Path(args.file)
    if target.is_dir():
        files = sorted(str(p) for p in target.iterdir()
                       if p.suffix in (".deco", ".basic", ".expl"))
    else:
        files = [args.file]
    worst = 0
    try:
        for f in files:
            code, text = _audit_one(f, args)
            print(text)
            worst = max(worst, code)
    except (ExcalcError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return worst


def cmd_fuzz(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, text in enumerate(gen_corpus(args.seed, args.count)):
        path = out / f"fuzz{i:03d}.deco"
        path.write_text(text)
    print(f"wrote {args.count} specifications to {out} (seed {args.seed})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="excalc",
        description="Equational deduction and finite-model checking for the "
                    "basic, decorated, and explicit logics of exceptions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse a specification and report well-formedness")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("prove", help="decide an equation, e.g. \"p'' == p\"")
    p.add_argument("file")
    p.add_argument("equation")
    p.add_argument("--trace", action="store_true", help="print the proof steps")
    p.add_argument("--depth", type=int, default=None, help="uniqueness recursion bound")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(fn=cmd_prove)

    p = sub.add_parser("translate", help="undecorate or expand a decorated specification")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--undecorate", action="store_true")
    g.add_argument("--expand", action="store_true")
    p.add_argument("--out", help="write the target DSL here plus a .prov side file")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("eval", help="evaluate a term in a finite model")
    p.add_argument("file")
    p.add_argument("model")
    p.add_argument("term")
    p.add_argument("element")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("audit", help="check every derived equation in finite models")
    p.add_argument("file", help="specification file or a directory of them")
    p.add_argument("--model", help="check against this model file")
    p.add_argument("--max-carrier", type=int, default=2)
    p.add_argument("--budget", type=int, default=200_000)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("fuzz", help="write a seeded random corpus of decorated specs")
    p.add_argument("--out", default="fuzz-corpus")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(fn=cmd_fuzz)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
