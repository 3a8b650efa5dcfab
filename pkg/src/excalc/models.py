"""Finite set-valued models for basic and explicit specifications.

Elements of a fresh sum vertex are (summand-index, element) tags; coprojection
evaluation is tagging and match evaluation is tag dispatch.  Sums whose vertex
is an existing type dispatch by preimage search, first match wins in
summand-then-carrier order (this is what makes truncated models usable).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .core import (
    ZERO,
    Deco,
    ElementOutOfCarrierError,
    EmptySourceUnreachableError,
    Equation,
    ExcalcError,
    Logic,
    Report,
    SumInfo,
    TCase,
    TCaseE,
    TComp,
    TEmpty,
    TExc,
    TGen,
    TId,
    TInvCoproj,
    TInvSummand,
    TMatch,
    TNamed,
    TRestrict,
    Term,
    TSumVertex,
    TypeExpr,
    TZero,
    source,
    target,
    type_display,
)
from .deduction import VALUE_FLAVOR, DerivationStore
from .render import render_term

Elem = object  # str label, or (summand_index, Elem) for fresh sum vertices


def fmt_elem(x: Elem) -> str:
    if isinstance(x, tuple):
        return f"#{x[0] + 1}({fmt_elem(x[1])})"
    return str(x)


class FiniteModel:
    """Carriers per named type, a map per non-definitional generator, and the
    exception set for explicit models.  Immutable once built."""

    def __init__(self, store: DerivationStore,
                 carriers: dict[str, tuple[str, ...]],
                 genmaps: dict[str, dict[Elem, Elem]],
                 exceptions: tuple[str, ...] = (),
                 name: str = "model"):
        if store.spec.logic is Logic.DECORATED:
            raise ExcalcError("decorated specifications have no set-valued models; expand first")
        self.store = store
        self.spec = store.spec
        self.carriers = {k: tuple(v) for k, v in carriers.items()}
        self.genmaps = {k: dict(v) for k, v in genmaps.items()}
        self.exceptions = tuple(exceptions)
        self.name = name
        self._carrier_cache: dict[TypeExpr, tuple[Elem, ...]] = {}
        self._dispatch_cache: dict[str, dict[Elem, tuple[int, Elem]]] = {}
        self._gen_compiled: dict[str, dict[Elem, Elem]] = {}
        # coprojections into fresh sum vertices are the tag injections
        self._tag_cops: dict[str, tuple[SumInfo, int]] = {}
        for s in self.spec.sums.values():
            if isinstance(s.vertex, TSumVertex):
                for i, n in enumerate(s.cop_names):
                    self._tag_cops[n] = (s, i)

    # -- carriers ---------------------------------------------------------

    def carrier(self, ty: TypeExpr) -> tuple[Elem, ...]:
        got = self._carrier_cache.get(ty)
        if got is not None:
            return got
        if isinstance(ty, TNamed):
            if ty.name not in self.carriers:
                raise ElementOutOfCarrierError(f"no carrier supplied for type {ty.name}")
            out = self.carriers[ty.name]
        elif isinstance(ty, TZero):
            out = ()
        elif isinstance(ty, TExc):
            out = self.exceptions
        elif isinstance(ty, TSumVertex):
            s = self.store.sum_by_id(ty.sum_id)
            out = tuple((i, x) for i in range(s.arity) for x in self.carrier(s.summands[i]))
        elif isinstance(ty, TInvSummand):
            ii = self.store.invimage_by_id(ty.invimage_id)
            assert ii.flavor == VALUE_FLAVOR
            src = self.carrier(source(ii.along))
            out = tuple(x for x in src
                        if self.dispatch(ii.base_sum, self.eval(ii.along, x))[0] == ty.index)
        else:
            raise ElementOutOfCarrierError(f"no carrier for type {ty!r}")
        self._carrier_cache[ty] = out
        return out

    # -- evaluation -------------------------------------------------------

    def dispatch(self, s: SumInfo, v: Elem) -> tuple[int, Elem]:
        """Which summand an element of the sum vertex comes from, and its
        preimage under the coprojection (first match wins)."""
        if isinstance(s.vertex, TSumVertex) and s.vertex.sum_id == s.sum_id:
            assert isinstance(v, tuple)
            return v
        table = self._dispatch_cache.get(s.sum_id)
        if table is None:
            table = {}
            for i in range(s.arity):
                for y in self.carrier(s.summands[i]):
                    table.setdefault(self.eval(s.coprojections[i], y), (i, y))
            self._dispatch_cache[s.sum_id] = table
        if v not in table:
            raise ElementOutOfCarrierError(
                f"{fmt_elem(v)} is not covered by the sum {type_display(s.vertex)}")
        return table[v]

    def _gen_map(self, g: TGen) -> dict[Elem, Elem]:
        got = self._gen_compiled.get(g.name)
        if got is not None:
            return got
        if g.name in self.genmaps:
            out = self.genmaps[g.name]
        elif g.name in self.store.delta():
            body = self.store.delta()[g.name]
            out = {x: self.eval(body, x) for x in self.carrier(g.src)}
        else:
            raise ElementOutOfCarrierError(f"no map supplied for generator {g.name}")
        self._gen_compiled[g.name] = out
        return out

    def eval(self, t: Term, x: Elem) -> Elem:
        """Apply the interpreted map to an element of the source carrier."""
        nt = self.store.normalize(t)
        if x not in self.carrier(source(nt)):
            raise ElementOutOfCarrierError(
                f"{fmt_elem(x)} not in the carrier of {type_display(source(nt))}")
        return self._eval(nt, x)

    def _eval(self, t: Term, x: Elem) -> Elem:
        if isinstance(t, TGen):
            if t.name in self._tag_cops:
                return (self._tag_cops[t.name][1], x)
            m = self._gen_map(t)
            if x not in m:
                raise ElementOutOfCarrierError(
                    f"generator {t.name} undefined at {fmt_elem(x)}")
            return m[x]
        if isinstance(t, TId):
            return x
        if isinstance(t, TEmpty):
            raise EmptySourceUnreachableError("evaluated a map out of the empty type")
        if isinstance(t, TComp):
            for p in reversed(t.parts):
                x = self._eval(p, x)
            return x
        if isinstance(t, TMatch):
            i, y = self.dispatch(t.sum, self._inject(t.sum, x))
            return self._eval(t.branches[i], y)
        if isinstance(t, TInvCoproj):
            return x  # preimage parts are subsets of the source carrier
        if isinstance(t, TRestrict):
            ii = self.store.invimage_by_id(t.invimage_id)
            i, y = self.dispatch(ii.base_sum, self._eval(ii.along, x))
            if i != t.index:
                raise ElementOutOfCarrierError(
                    f"{fmt_elem(x)} is not in the preimage part {t.index}")
            return y
        raise ExcalcError(f"cannot evaluate normal form {t!r}")

    def _inject(self, s: SumInfo, x: Elem) -> Elem:
        return x

    def eval_at_label(self, t: Term, label: str) -> Elem:
        return self.eval(t, label)

    def display_result(self, ty: TypeExpr, v: Elem) -> str:
        """Untag sum elements for display: `Nat:3`, `E:eps`."""
        while isinstance(ty, TSumVertex) and isinstance(v, tuple):
            s = self.store.sum_by_id(ty.sum_id)
            ty = s.summands[v[0]]
            v = v[1]
        return f"{type_display(ty)}:{fmt_elem(v)}"


# ---------------------------------------------------------------------------
# validation


def validate_model(store: DerivationStore, model: FiniteModel) -> Report:
    """Empty violation list iff the model interprets the specification:
    total generator maps, sums as disjoint unions, axioms pointwise."""
    spec = store.spec
    report = Report()
    for name in spec.types:
        if name not in model.carriers:
            report.violations.append(f"type {name} has no carrier")
    for name, g in spec.gens.items():
        if name in model._tag_cops:
            continue  # tag injections are interpreted structurally
        if name in store.delta():
            if name in model.genmaps:
                try:
                    body = store.delta()[name]
                    for x in model.carrier(g.src):
                        if model.genmaps[name].get(x) != model.eval(body, x):
                            report.violations.append(
                                f"supplied map for defined {name} disagrees at {fmt_elem(x)}")
                            break
                except ExcalcError as e:
                    report.violations.append(f"defined generator {name}: {e}")
            continue
        if name not in model.genmaps:
            report.violations.append(f"generator {name} has no map")
            continue
        try:
            src, tgt = model.carrier(g.src), model.carrier(g.tgt)
        except ExcalcError as e:
            report.violations.append(f"generator {name}: {e}")
            continue
        m = model.genmaps[name]
        for x in src:
            if x not in m:
                report.violations.append(f"generator {name} undefined at {fmt_elem(x)}")
            elif m[x] not in tgt:
                report.violations.append(
                    f"generator {name} maps {fmt_elem(x)} outside its target")
        for x in m:
            if x not in src:
                report.violations.append(
                    f"generator {name} defined at {fmt_elem(x)} outside its source")
    if report.violations:
        return report
    for s in spec.sums.values():
        if isinstance(s.vertex, TSumVertex):
            continue  # fresh vertex: the disjoint union by construction
        _check_sum(store, model, s, report)
    for i, eq in enumerate(spec.equations):
        if isinstance(eq.lhs, TGen) and store.delta().get(eq.lhs.name) is eq.rhs:
            continue  # definitional: holds by evaluation through delta
        res = check_equation(model, eq)
        if not res.holds:
            label = eq.label or f"axiom {i + 1}"
            report.violations.append(
                f"{label} fails at {fmt_elem(res.witness)}: "
                f"{fmt_elem(res.lhs_value)} != {fmt_elem(res.rhs_value)}")
    return report



def _check_sum(store, model, s: SumInfo, report: Report) -> None:
    try:
        vertex_carrier = model.carrier(s.vertex)
    except ExcalcError as e:
        report.violations.append(f"sum {s.sum_id}: {e}")
        return
    hits: dict[Elem, list[tuple[int, Elem]]] = {v: [] for v in vertex_carrier}
    for i in range(s.arity):
        for y in model.carrier(s.summands[i]):
            try:
                v = model.eval(s.coprojections[i], y)
            except ExcalcError as e:
                report.violations.append(f"sum {s.sum_id}: {e}")
                return
            hits[v].append((i, y))
    is_exc = isinstance(s.vertex, TExc)
    what = "E" if is_exc else type_display(s.vertex)
    for v, srcs in hits.items():
        if not srcs:
            msg = (f"E is not the disjoint union of the M(P_i): {fmt_elem(v)} is not covered"
                   if is_exc else
                   f"sum {what}: {fmt_elem(v)} is not covered by any coprojection")
            report.violations.append(msg)
        elif len({i for i, _ in srcs}) > 1:
            msg = (f"E is not the disjoint union of the M(P_i): {fmt_elem(v)} is covered twice"
                   if is_exc else
                   f"sum {what}: {fmt_elem(v)} lies in two summands")
            report.violations.append(msg)
        elif len(srcs) > 1:
            # within one summand: tolerated for truncations, but reported
            report.warnings.append(
                f"sum {what}: coprojection {s.cop_names[srcs[0][0]] if s.cop_names else srcs[0][0]} "
                f"is not injective at {fmt_elem(v)} (truncated model?)")


@dataclass
class CheckResult:
    holds: bool
    witness: Elem | None = None
    lhs_value: Elem | None = None
    rhs_value: Elem | None = None


def check_equation(model: FiniteModel, eq: Equation) -> CheckResult:
    """HOLDS iff both sides evaluate identically on every source element."""
    for x in model.carrier(source(eq.lhs)):
        lv = model.eval(eq.lhs, x)
        rv = model.eval(eq.rhs, x)
        if lv != rv:
            return CheckResult(False, x, lv, rv)
    return CheckResult(True)


# ---------------------------------------------------------------------------
# model files


_MODEL_LINE = re.compile(r"^\s*(?:#.*)?$")
_TYPE_RE = re.compile(r"^\s*type\s+([\w'@+]+)\s*=\s*\{([^}]*)\}\s*;?\s*$")
_FUN_RE = re.compile(r"^\s*fun\s+([\w'@]+)\s*:\s*(.+?)\s*->\s*(.+?)\s*;?\s*$")
_EXC_RE = re.compile(r"^\s*exceptions\s*=\s*\{([^}]*)\}\s*;?\s*$")


def _parse_elem(text: str, store: DerivationStore) -> Elem:
    text = text.strip()
    m = re.fullmatch(r"([\w'@]+)\s*\((.+)\)", text)
    if m:
        cop, inner = m.group(1), _parse_elem(m.group(2), store)
        for s in store.spec.sums.values():
            if cop in s.cop_names and isinstance(s.vertex, TSumVertex):
                return (s.cop_names.index(cop), inner)
        raise ExcalcError(f"unknown coprojection tag {cop} in model element")
    return text


def parse_model(text: str, store: DerivationStore, name: str = "model") -> FiniteModel:
    carriers: dict[str, tuple[str, ...]] = {}
    genmaps: dict[str, dict[Elem, Elem]] = {}
    exceptions: tuple[str, ...] = ()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _TYPE_RE.match(line)
        if m:
            labels = tuple(x.strip() for x in m.group(2).split(",") if x.strip())
            carriers[m.group(1)] = labels
            continue
        m = _EXC_RE.match(line)
        if m:
            exceptions = tuple(x.strip() for x in m.group(1).split(",") if x.strip())
            continue
        m = _FUN_RE.match(line)
        if m:
            fn = m.group(1)
            src = _parse_elem(m.group(2), store)
            tgt = _parse_elem(m.group(3), store)
            genmaps.setdefault(fn, {})[src] = tgt
            continue
        raise ExcalcError(f"model line {lineno}: cannot parse {raw.strip()!r}")
    return FiniteModel(store, carriers, genmaps, exceptions, name)


def print_model(model: FiniteModel) -> str:
    out = []
    for name, labels in model.carriers.items():
        out.append(f"type {name} = {{{', '.join(labels)}}};")
    if model.exceptions:
        out.append(f"exceptions = {{{', '.join(model.exceptions)}}};")
    for fn in sorted(model.genmaps):
        for x, y in model.genmaps[fn].items():
            out.append(f"fun {fn} : {fmt_elem(x)} -> {fmt_elem(y)};")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# enumeration


DEFAULT_BUDGET = 200_000


def _all_maps(src: tuple, tgt: tuple):
    if not src:
        yield {}
        return
    for image in itertools.product(tgt, repeat=len(src)):
        yield dict(zip(src, image))


def enumerate_models(store: DerivationStore, max_carrier: int,
                     budget: int = DEFAULT_BUDGET):
    """Yield every valid model (canonical labels e0..e(n-1)) with named-type
    carriers of size <= max_carrier.  Raises BudgetExceededError when the
    candidate count passes the cap."""
    from .core import BudgetExceededError

    spec = store.spec
    names = sorted(spec.types)
    exc_sum = next((s for s in spec.sums.values() if isinstance(s.vertex, TExc)), None)
    tag_cops = {n for s in spec.sums.values() if isinstance(s.vertex, TSumVertex)
                for n in s.cop_names}
    gens = [g for n, g in sorted(spec.gens.items())
            if n not in store.delta() and n not in tag_cops]
    counter = 0
    for sizes in itertools.product(range(max_carrier + 1), repeat=len(names)):
        carriers = {n: tuple(f"e{i}" for i in range(k)) for n, k in zip(names, sizes)}
        if spec.logic is Logic.EXPLICIT:
            if exc_sum is not None:
                total = sum(len(_carrier_of(carriers, t)) for t in exc_sum.summands)
            else:
                total = 0
            exceptions = tuple(f"eps{i}" for i in range(total))
        else:
            exceptions = ()
        trial = FiniteModel(store, carriers, {}, exceptions, "probe")
        domains = []
        feasible = True
        count_here = 1
        for g in gens:
            try:
                src = trial.carrier(g.src)
                tgt = trial.carrier(g.tgt)
            except ExcalcError:
                feasible = False
                break
            n_maps = len(tgt) ** len(src) if src else 1
            if n_maps == 0:
                feasible = False
                break
            count_here *= n_maps
            domains.append((g, src, tgt))
        if not feasible:
            continue
        counter += count_here
        if counter > budget:
            raise BudgetExceededError(
                f"model enumeration passed the candidate cap ({budget})", budget)
        for combo in itertools.product(*(_all_maps(src, tgt) for _, src, tgt in domains)):
            genmaps = {g.name: m for (g, _, _), m in zip(domains, combo)}
            model = FiniteModel(store, carriers, genmaps, exceptions,
                                f"model[{','.join(map(str, sizes))}]")
            rep = validate_model(store, model)
            if rep.ok and not rep.warnings:
                yield model


def _carrier_of(carriers: dict[str, tuple[str, ...]], ty: TypeExpr) -> tuple:
    if isinstance(ty, TNamed):
        return carriers.get(ty.name, ())
    if isinstance(ty, TZero):
        return ()
    raise ExcalcError(f"cannot size carrier for {ty!r} before model construction")


# ---------------------------------------------------------------------------
# soundness audit


@dataclass
class AuditEntry:
    label: str
    equation: str
    model: str
    holds: bool
    witness: str = ""


@dataclass
class AuditReport:
    entries: list[AuditEntry] = field(default_factory=list)
    truncated: str = ""

    @property
    def failures(self) -> list[AuditEntry]:
        return [e for e in self.entries if not e.holds]

    @property
    def ok(self) -> bool:
        return not self.failures


def soundness_audit(deco_store: DerivationStore, models,
                    expansion=None) -> AuditReport:
    """Expand every derived decorated equation and check it in the models.

    A failure falsifies the implementation, not the soundness theorem.
    """
    from .translate import expand

    if expansion is None:
        expansion = expand(deco_store)
    report = AuditReport()
    equations = list(deco_store.spec.equations) + list(deco_store.derived)
    mapped = []
    for i, eq in enumerate(equations):
        label = eq.label or f"eq{i + 1}"
        mapped.append((f"{label}#{i + 1}", expansion.map_equation(eq)))
    for model in models:
        for label, eq in mapped:
            res = check_equation(model, eq)
            report.entries.append(AuditEntry(
                label,
                f"{render_term(eq.lhs, Logic.EXPLICIT)} == {render_term(eq.rhs, Logic.EXPLICIT)}",
                model.name, res.holds,
                fmt_elem(res.witness) if not res.holds else ""))
    report.entries.sort(key=lambda e: (e.label, e.model))
    return report
