"""Core syntax shared by the three logics: types, terms, equations, specifications.

Terms are immutable trees; structural identity after composition flattening is
the base notion of syntactic equality.  Everything here is plain data: the
rule systems live in :mod:`excalc.deduction` and :mod:`excalc.exceptions_ops`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Logic(str, Enum):
    BASIC = "basic"
    DECORATED = "decorated"
    EXPLICIT = "explicit"


class Deco(str, Enum):
    VALUE = "value"
    COMPUTATION = "computation"
    PLAIN = "plain"


def deco_join(*decos: Deco) -> Deco:
    """Join of decorations: any computation makes the whole a computation."""
    out = Deco.PLAIN
    for d in decos:
        if d is Deco.COMPUTATION:
            return Deco.COMPUTATION
        if d is Deco.VALUE:
            out = Deco.VALUE
    return out


# ---------------------------------------------------------------------------
# errors


class ExcalcError(Exception):
    """Base class for all structured errors raised by the package."""


class DuplicateNameError(ExcalcError):
    pass


class UnknownReferenceError(ExcalcError):
    pass


class KindMismatchError(ExcalcError):
    pass


class IllFormedTermError(ExcalcError):
    pass


class TypeMismatchError(ExcalcError):
    pass


class NotAValueError(ExcalcError):
    pass


class NotAComputationError(ExcalcError):
    pass


class TargetMismatchError(ExcalcError):
    pass


class TargetNotZeroError(ExcalcError):
    pass


class BranchArityMismatchError(ExcalcError):
    pass


class SourceMismatchError(ExcalcError):
    pass


class BranchMismatchError(ExcalcError):
    pass


class BranchSourceMismatchError(ExcalcError):
    pass


class BranchTargetMismatchError(ExcalcError):
    pass


class MissingTargetError(ExcalcError):
    pass


class UnknownExceptionError(ExcalcError):
    pass


class ElementOutOfCarrierError(ExcalcError):
    pass


class EmptySourceUnreachableError(ExcalcError):
    pass


class BudgetExceededError(ExcalcError):
    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class TypeExpr:
    pass


@dataclass(frozen=True)
class TNamed(TypeExpr):
    name: str


@dataclass(frozen=True)
class TZero(TypeExpr):
    pass


@dataclass(frozen=True)
class TExc(TypeExpr):
    pass


@dataclass(frozen=True)
class TSumVertex(TypeExpr):
    sum_id: str
    display: str


@dataclass(frozen=True)
class TInvSummand(TypeExpr):
    invimage_id: str
    index: int
    display: str


ZERO = TZero()
EXC = TExc()


def type_display(ty: TypeExpr) -> str:
    if isinstance(ty, TNamed):
        return ty.name
    if isinstance(ty, TZero):
        return "0"
    if isinstance(ty, TExc):
        return "E"
    if isinstance(ty, (TSumVertex, TInvSummand)):
        return ty.display
    raise IllFormedTermError(f"unknown type node {ty!r}")


# ---------------------------------------------------------------------------
# sums

ORDINARY = "ordinary"
EXCEPTIONAL = "exceptional"


@dataclass(frozen=True, eq=False)
class SumInfo:
    """A (potential) sum: vertex, summands, and coprojection terms.

    Declared sums carry coprojection names for the surface syntax; generated
    sums (inverse images, Y+0) have term-valued coprojections only.  Identity
    and hashing go by ``sum_id``, which is unique per store.
    """

    sum_id: str
    vertex: TypeExpr
    summands: tuple[TypeExpr, ...]
    coprojections: tuple["Term", ...]
    kind: str = ORDINARY
    declared: bool = False
    cop_names: tuple[str, ...] = ()

    def __eq__(self, other):
        return isinstance(other, SumInfo) and other.sum_id == self.sum_id

    def __hash__(self):
        return hash(self.sum_id)

    @property
    def arity(self) -> int:
        return len(self.summands)


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class TGen(Term):
    name: str
    src: TypeExpr
    tgt: TypeExpr
    deco: Deco = Deco.PLAIN


@dataclass(frozen=True)
class TId(Term):
    ty: TypeExpr


@dataclass(frozen=True)
class TComp(Term):
    """Composition, outermost first: parts[0] ∘ parts[1] ∘ ... ∘ parts[-1]."""

    parts: tuple[Term, ...]


@dataclass(frozen=True)
class TEmpty(Term):
    """The unique map out of the initial type: []_Y, aka raise_Y."""

    tgt: TypeExpr


@dataclass(frozen=True)
class TMatch(Term):
    sum: SumInfo
    branches: tuple[Term, ...]


@dataclass(frozen=True)
class TCase(Term):
    u: Term
    sum: SumInfo
    branches: tuple[Term, ...]
    tgt: TypeExpr | None = None  # required only when branches is empty


@dataclass(frozen=True)
class TCaseT(Term):
    u: Term
    f1: Term
    f0: Term


@dataclass(frozen=True)
class TCaseE(Term):
    u: Term
    items: tuple[tuple[int, Term], ...]  # sorted by exception index
    tgt: TypeExpr


@dataclass(frozen=True)
class THandle(Term):
    u: Term
    items: tuple[tuple[int, Term], ...]


@dataclass(frozen=True)
class TInvCoproj(Term):
    invimage_id: str
    index: int
    src: TypeExpr
    tgt: TypeExpr


@dataclass(frozen=True)
class TRestrict(Term):
    invimage_id: str
    index: int
    src: TypeExpr
    tgt: TypeExpr
    deco: Deco


def source(t: Term) -> TypeExpr:
    if isinstance(t, TGen):
        return t.src
    if isinstance(t, TId):
        return t.ty
    if isinstance(t, TComp):
        return source(t.parts[-1])
    if isinstance(t, TEmpty):
        return ZERO
    if isinstance(t, TMatch):
        return t.sum.vertex
    if isinstance(t, (TCase, TCaseT, TCaseE, THandle)):
        return source(t.u)
    if isinstance(t, (TInvCoproj, TRestrict)):
        return t.src
    raise IllFormedTermError(f"unknown term node {t!r}")


def target(t: Term) -> TypeExpr:
    if isinstance(t, TGen):
        return t.tgt
    if isinstance(t, TId):
        return t.ty
    if isinstance(t, TComp):
        return target(t.parts[0])
    if isinstance(t, TEmpty):
        return t.tgt
    if isinstance(t, TCase):
        if t.branches:
            return target(t.branches[0])
        if t.tgt is None:
            raise IllFormedTermError("case over an empty sum needs an explicit target")
        return t.tgt
    if isinstance(t, TMatch):
        return target(t.branches[0]) if t.branches else ZERO
    if isinstance(t, TCaseT):
        return target(t.f1)
    if isinstance(t, TCaseE):
        return t.tgt
    if isinstance(t, THandle):
        return target(t.u)
    if isinstance(t, (TInvCoproj, TRestrict)):
        return t.tgt
    raise IllFormedTermError(f"unknown term node {t!r}")


def decoration(t: Term) -> Deco:
    """Structural decoration of a term (§4.1: anything involving a computation
    is a computation; identities, coprojections and empty matches are values)."""
    if isinstance(t, TGen):
        return t.deco
    if isinstance(t, (TId, TEmpty, TInvCoproj)):
        return Deco.VALUE
    if isinstance(t, TRestrict):
        return t.deco
    if isinstance(t, TComp):
        return deco_join(*(decoration(p) for p in t.parts))
    if isinstance(t, TMatch):
        return deco_join(Deco.VALUE, *(decoration(b) for b in t.branches))
    if isinstance(t, TCase):
        return deco_join(decoration(t.u), *(decoration(b) for b in t.branches))
    if isinstance(t, (TCaseT, TCaseE, THandle)):
        return Deco.COMPUTATION
    raise IllFormedTermError(f"unknown term node {t!r}")


def mk_comp(*parts: Term) -> Term:
    """Flattening composition constructor; checks consecutiveness."""
    flat: list[Term] = []
    for p in parts:
        if isinstance(p, TComp):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        raise IllFormedTermError("empty composition")
    for outer, inner in zip(flat, flat[1:]):
        if source(outer) != target(inner):
            raise TypeMismatchError(
                f"composition not consecutive: {type_display(source(outer))} "
                f"!= {type_display(target(inner))}"
            )
    if len(flat) == 1:
        return flat[0]
    return TComp(tuple(flat))


def comp_parts(t: Term) -> tuple[Term, ...]:
    return t.parts if isinstance(t, TComp) else (t,)


def subterms(t: Term):
    """Yield t and all child terms, pre-order."""
    yield t
    if isinstance(t, TComp):
        kids = t.parts
    elif isinstance(t, (TMatch, TCase)):
        kids = t.branches + ((t.u,) if isinstance(t, TCase) else ())
    elif isinstance(t, TCaseT):
        kids = (t.u, t.f1, t.f0)
    elif isinstance(t, (TCaseE, THandle)):
        kids = (t.u,) + tuple(term for _, term in t.items)
    else:
        kids = ()
    for k in kids:
        yield from subterms(k)


# ---------------------------------------------------------------------------
# equations, exceptions, specifications


@dataclass(frozen=True)
class ExceptionDecl:
    name: str
    param: TypeExpr


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    level: Deco
    origin: str = "axiom"  # axiom | derived
    label: str = ""

    @staticmethod
    def of(lhs: Term, rhs: Term, origin: str = "axiom", label: str = "") -> "Equation":
        if source(lhs) != source(rhs) or target(lhs) != target(rhs):
            raise TypeMismatchError(
                f"equation endpoints disagree: {type_display(source(lhs))}->"
                f"{type_display(target(lhs))} vs {type_display(source(rhs))}->"
                f"{type_display(target(rhs))}"
            )
        return Equation(lhs, rhs, deco_join(decoration(lhs), decoration(rhs)), origin, label)


class Specification:
    """A basic / decorated / explicit presentation.

    Built incrementally (single-threaded) through the ``add_*`` methods, then
    frozen; frozen specifications are safe to share for concurrent reads.
    """

    def __init__(self, logic: Logic):
        self.logic = logic
        self.types: dict[str, TNamed] = {}
        self.gens: dict[str, TGen] = {}
        self.sums: dict[str, SumInfo] = {}
        self.exceptions: list[ExceptionDecl] = []
        self.exc_sum: SumInfo | None = None
        self.equations: list[Equation] = []
        self.definitions: dict[str, Term] = {}
        self.declarations: list[tuple] = []  # order preserved for printing
        self._frozen = False
        self._sum_counter = 0

    # -- construction -------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise ExcalcError("specification is frozen")

    def _check_new_name(self, name: str):
        if name in self.types or name in self.gens:
            raise DuplicateNameError(f"name already declared: {name}")

    def add_type(self, name: str) -> TNamed:
        self._check_mutable()
        self._check_new_name(name)
        ty = TNamed(name)
        self.types[name] = ty
        self.declarations.append(("type", name))
        return ty

    def resolve_type(self, name: str) -> TypeExpr:
        if name == "0":
            return ZERO
        if name == "E":
            if self.logic is not Logic.EXPLICIT:
                raise KindMismatchError("distinguished type E outside explicit logic")
            return EXC
        if name in self.types:
            return self.types[name]
        raise UnknownReferenceError(f"unknown type: {name}")

    def default_deco(self) -> Deco:
        return Deco.PLAIN if self.logic is not Logic.DECORATED else Deco.VALUE

    def add_fun(self, name: str, src: TypeExpr, tgt: TypeExpr, deco: Deco | None = None,
                record: bool = True) -> TGen:
        self._check_mutable()
        self._check_new_name(name)
        if deco is None:
            deco = self.default_deco()
        if self.logic is Logic.DECORATED and deco is Deco.PLAIN:
            raise KindMismatchError(f"undecorated function {name} in a decorated specification")
        if self.logic is not Logic.DECORATED and deco is not Deco.PLAIN:
            raise KindMismatchError(f"decoration on {name} outside the decorated logic")
        gen = TGen(name, src, tgt, deco)
        self.gens[name] = gen
        if record:
            self.declarations.append(("fun", name))
        return gen

    def fresh_sum_id(self, stem: str) -> str:
        self._sum_counter += 1
        return f"{stem}#{self._sum_counter}"

    def add_sum(self, vertex_name: str | None, cops: list[tuple[str, TypeExpr]],
                display: str | None = None) -> SumInfo:
        """Declare a potential sum.

        ``vertex_name`` is an existing type (its generators may be reused as
        coprojections), a fresh name (a new vertex type is introduced), ``"0"``
        for a plain empty-vertex sum, or None for an anonymous vertex shown as
        the ``display`` string (``A+B`` style).
        """
        self._check_mutable()
        sum_id = self.fresh_sum_id(vertex_name or display or "sum")
        if vertex_name == "0" or (vertex_name is None and not cops):
            vertex: TypeExpr = ZERO
        elif vertex_name == "E":
            vertex = self.resolve_type("E")
        elif vertex_name is None:
            vertex = TSumVertex(sum_id, display or "+".join(type_display(t) for _, t in cops))
        elif vertex_name in self.types:
            vertex = self.types[vertex_name]
        elif vertex_name in self.gens:
            raise DuplicateNameError(f"sum vertex clashes with a function name: {vertex_name}")
        else:
            vertex = self.add_type(vertex_name)
            self.declarations.pop()  # the sum declaration covers it
        if not cops and not isinstance(vertex, (TZero, TExc)):
            raise KindMismatchError("an ordinary sum with zero summands must have vertex 0")
        cop_terms: list[Term] = []
        names: list[str] = []
        summands: list[TypeExpr] = []
        for cop_name, summand in cops:
            if cop_name in self.gens:
                gen = self.gens[cop_name]
                if gen.src != summand or gen.tgt != vertex:
                    raise TypeMismatchError(
                        f"coprojection {cop_name} has signature "
                        f"{type_display(gen.src)}->{type_display(gen.tgt)}, sum needs "
                        f"{type_display(summand)}->{type_display(vertex)}"
                    )
                if self.logic is Logic.DECORATED and gen.deco is not Deco.VALUE:
                    raise KindMismatchError(f"coprojection {cop_name} must be a value")
            else:
                gen = self.add_fun(cop_name, summand, vertex, record=False)
            cop_terms.append(gen)
            names.append(cop_name)
            summands.append(summand)
        info = SumInfo(sum_id, vertex, tuple(summands), tuple(cop_terms),
                       ORDINARY, declared=True, cop_names=tuple(names))
        self.sums[sum_id] = info
        self.declarations.append(("sum", sum_id))
        return info

    def add_exception(self, name: str, param: TypeExpr) -> TGen:
        self._check_mutable()
        if self.logic is not Logic.DECORATED:
            raise KindMismatchError("exception declaration outside the decorated logic")
        if self.exc_sum is not None:
            raise KindMismatchError(
                "exceptions are given once and for all; the exceptional sum is already in use")
        gen = self.add_fun(name, param, ZERO, Deco.COMPUTATION, record=False)
        self.exceptions.append(ExceptionDecl(name, param))
        self.declarations.append(("exception", name))
        return gen

    def seal_exceptions(self):
        """Build the exceptional sum; exceptions are given once and for all."""
        if self.logic is Logic.DECORATED and self.exc_sum is None:
            cops = tuple(self.gens[e.name] for e in self.exceptions)
            self.exc_sum = SumInfo(
                self.fresh_sum_id("exc"), ZERO,
                tuple(e.param for e in self.exceptions), cops,
                EXCEPTIONAL, declared=False,
                cop_names=tuple(e.name for e in self.exceptions))
            self.sums[self.exc_sum.sum_id] = self.exc_sum

    def exception_index(self, name: str) -> int:
        for i, e in enumerate(self.exceptions):
            if e.name == name:
                return i
        raise UnknownExceptionError(f"unknown exception: {name}")

    def add_equation(self, lhs: Term, rhs: Term, label: str = "") -> Equation:
        self._check_mutable()
        eq = Equation.of(lhs, rhs, "axiom", label)
        self.equations.append(eq)
        self.declarations.append(("eq", len(self.equations) - 1))
        return eq

    def add_definition(self, name: str, body: Term) -> TGen:
        """``def name = body``: a generator with the body's signature plus a
        definitional equation (unfolded as a delta rule by the store)."""
        self._check_mutable()
        gen = self.add_fun(name, source(body), target(body),
                           decoration(body) if self.logic is Logic.DECORATED else Deco.PLAIN,
                           record=False)
        self.definitions[name] = body
        eq = Equation.of(gen, body, "axiom", f"def {name}")
        self.equations.append(eq)
        self.declarations.append(("def", name, len(self.equations) - 1))
        return gen

    def freeze(self) -> "Specification":
        self.seal_exceptions()
        self._frozen = True
        return self

    # -- queries --------------------------------------------------------

    def sums_with_vertex(self, ty: TypeExpr) -> list[SumInfo]:
        return [s for s in self.sums.values() if s.vertex == ty]

    def lookup(self, name: str) -> Term:
        if name in self.gens:
            return self.gens[name]
        raise UnknownReferenceError(f"unknown function: {name}")


# declaration records for build_specification
DType = lambda name: ("type", name)
DFun = lambda name, src, tgt, deco=None: ("fun", name, src, tgt, deco)
DSum = lambda vertex, cops: ("sum", vertex, cops)
DExc = lambda name, param: ("exception", name, param)
DEq = lambda lhs, rhs: ("eq", lhs, rhs)
DDef = lambda name, body: ("def", name, body)


def build_specification(kind: Logic | str, declarations: list[tuple]) -> Specification:
    """Build and validate a specification from an ordered declaration list.

    Type fields in fun/exception records may be type names (resolved in
    declaration order) or TypeExpr nodes; equation records carry built Terms.
    """
    spec = Specification(Logic(kind))

    def ty(x):
        return spec.resolve_type(x) if isinstance(x, str) else x

    for decl in declarations:
        tag = decl[0]
        if tag == "type":
            spec.add_type(decl[1])
        elif tag == "fun":
            _, name, src, tgt, deco = decl
            spec.add_fun(name, ty(src), ty(tgt), Deco(deco) if deco else None)
        elif tag == "sum":
            _, vertex, cops = decl
            spec.add_sum(vertex, [(n, ty(t)) for n, t in cops])
        elif tag == "exception":
            spec.add_exception(decl[1], ty(decl[2]))
        elif tag == "eq":
            spec.add_equation(decl[1], decl[2])
        elif tag == "def":
            spec.add_definition(decl[1], decl[2])
        else:
            raise UnknownReferenceError(f"unknown declaration tag: {tag}")
    spec.freeze()
    report = well_formed(spec)
    if report.violations:
        raise IllFormedTermError("; ".join(report.violations))
    return spec


def decoration_of(spec: Specification, t: Term) -> Deco:
    """Decoration of a term within a specification's logic."""
    d = decoration(t)  # also validates node kinds
    if spec.logic is not Logic.DECORATED:
        return Deco.PLAIN
    if d is Deco.PLAIN:
        raise IllFormedTermError("undecorated term inside a decorated specification")
    return d


# ---------------------------------------------------------------------------
# well-formedness


@dataclass
class Report:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_term(spec: Specification, t: Term, where: str, report: Report):
    try:
        source(t), target(t)
    except ExcalcError as e:
        report.violations.append(f"{where}: {e}")
        return
    for s in subterms(t):
        if isinstance(s, TGen) and s.name in spec.gens and spec.gens[s.name] != s:
            report.violations.append(f"{where}: generator {s.name} disagrees with its declaration")
        if isinstance(s, TMatch):
            if len(s.branches) != s.sum.arity:
                report.violations.append(f"{where}: match arity disagrees with its sum")
                continue
            tgts = {target(b) for b in s.branches}
            if len(tgts) > 1:
                report.violations.append(f"{where}: match branches disagree on target")
            for i, b in enumerate(s.branches):
                if source(b) != s.sum.summands[i]:
                    report.violations.append(
                        f"{where}: match branch {i + 1} source is not the summand")
        if spec.logic is not Logic.DECORATED and isinstance(s, (TCaseT, TCaseE, THandle)):
            report.violations.append(
                f"{where}: decorated case/handle outside the decorated logic")
        if spec.logic is not Logic.EXPLICIT:
            for node in (s,):
                tys = []
                if isinstance(node, TGen):
                    tys = [node.src, node.tgt]
                elif isinstance(node, TId):
                    tys = [node.ty]
                elif isinstance(node, TEmpty):
                    tys = [node.tgt]
                if any(isinstance(x, TExc) for x in tys):
                    report.violations.append(
                        f"{where}: distinguished type outside explicit logic")


def well_formed(spec: Specification) -> Report:
    """Check every structural invariant; diagnostics are the return value."""
    report = Report()
    if spec.logic is not Logic.EXPLICIT:
        for gen in spec.gens.values():
            if isinstance(gen.src, TExc) or isinstance(gen.tgt, TExc):
                report.violations.append(
                    f"fun {gen.name}: distinguished type outside explicit logic")
    for gen in spec.gens.values():
        if spec.logic is Logic.DECORATED and gen.deco is Deco.PLAIN:
            report.violations.append(f"fun {gen.name}: missing decoration in decorated logic")
        if spec.logic is not Logic.DECORATED and gen.deco is not Deco.PLAIN:
            report.violations.append(f"fun {gen.name}: decoration outside decorated logic")
    for s in spec.sums.values():
        if s.kind == ORDINARY and s.arity == 0 and not isinstance(s.vertex, (TZero, TExc)):
            report.violations.append(f"sum {s.sum_id}: empty sum must have vertex 0")
        if s.kind == ORDINARY and spec.logic is Logic.DECORATED:
            for c in s.coprojections:
                if decoration(c) is not Deco.VALUE:
                    report.violations.append(
                        f"sum {s.sum_id}: coprojection {c} is not a value")
    if spec.logic is Logic.DECORATED:
        if spec.exc_sum is None:
            report.violations.append("decorated specification lacks its exceptional sum")
        else:
            if not isinstance(spec.exc_sum.vertex, TZero):
                report.violations.append("exceptional sum must have vertex 0")
            if spec.exc_sum.summands != tuple(e.param for e in spec.exceptions):
                report.violations.append(
                    "exceptional sum summands disagree with the exception declarations")
            if not spec.exceptions:
                report.warnings.append(
                    "decorated specification declares no exceptions (k = 0)")
    elif spec.exceptions:
        report.violations.append("exception declarations outside the decorated logic")
    for i, eq in enumerate(spec.equations):
        where = f"eq {i + 1}" + (f" ({eq.label})" if eq.label else "")
        if source(eq.lhs) != source(eq.rhs) or target(eq.lhs) != target(eq.rhs):
            report.violations.append(f"{where}: endpoints disagree")
        _check_term(spec, eq.lhs, where, report)
        _check_term(spec, eq.rhs, where, report)
    return report
