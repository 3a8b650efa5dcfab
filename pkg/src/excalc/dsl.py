"""Surface syntax: parser and printer for specifications of all three kinds.

Grammar (sketch):
    logic basic|decorated|explicit ;
    type X ;                        fun f : X -> Y [@value|@computation] ;
    sum Y = j1: Y1 + ... + jn: Yn ; exception t of P ;
    eq lhs == rhs ;                 def name = term ;
terms:
    identifiers, id(X), g . f, [j1 => t1 | ...], case u of [...],
    case^t u of [id => t | raise => t], case^e u of [t1 => f1, ...][: Y],
    raise(Y) (aka [](Y)), u handle [t => f, ...], parentheses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .core import (
    EXC,
    ZERO,
    Deco,
    ExcalcError,
    Logic,
    Specification,
    SumInfo,
    TCase,
    TCaseE,
    TCaseT,
    TComp,
    TEmpty,
    TGen,
    THandle,
    TId,
    TMatch,
    TRestrict,
    Term,
    TSumVertex,
    TypeExpr,
    TZero,
    UnknownReferenceError,
    comp_parts,
    mk_comp,
    source,
    target,
    type_display,
    well_formed,
)
from .deduction import DerivationStore, mk_case, mk_match
from .exceptions import mk_case_e, mk_case_t, mk_handle
from .render import render_term


class ExcalcSyntaxError(ExcalcError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<caset>case\^t\b)
  | (?P<casee>case\^e\b)
  | (?P<deco>@value\b|@computation\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_@]*'*)
  | (?P<zero>0)
  | (?P<sym>->|=>|==|\[\]|[;:=+.|,\[\]()])
""", re.VERBOSE)

KEYWORDS = {"logic", "basic", "decorated", "explicit", "type", "fun", "sum",
            "exception", "of", "eq", "def", "id", "raise", "case", "handle"}


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExcalcSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            out.append(Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


@dataclass
class SourceFile:
    path: str
    kind: Logic
    spans: list[tuple[str, str, int]] = field(default_factory=list)  # decl, name, line


@dataclass
class ParseResult:
    spec: Specification
    store: DerivationStore
    source: SourceFile


class Parser:
    def __init__(self, text: str, path: str = "<string>"):
        self.tokens = tokenize(text)
        self.pos = 0
        self.path = path
        self.spec: Specification | None = None
        self.store: DerivationStore | None = None

    # -- token plumbing ----------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise ExcalcSyntaxError(f"expected {text!r}, found {t.text or 'end of file'!r}",
                                    t.line, t.col)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ExcalcSyntaxError(f"expected {what}, found {t.text or 'end of file'!r}",
                                    t.line, t.col)
        return self.next()

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def fail(self, message: str):
        t = self.peek()
        raise ExcalcSyntaxError(message, t.line, t.col)

    # -- specification ------------------------------------------------

    def parse_specification(self) -> ParseResult:
        self.expect("logic")
        t = self.peek()
        if t.text not in ("basic", "decorated", "explicit"):
            self.fail("expected basic, decorated, or explicit")
        self.next()
        self.expect(";")
        spec = Specification(Logic(t.text))
        self.spec = spec
        self.store = DerivationStore(spec)
        src = SourceFile(self.path, spec.logic)
        while not self.at(""):
            tok = self.peek()
            try:
                self.parse_declaration(src)
            except ExcalcSyntaxError:
                raise
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        spec.freeze()
        return ParseResult(spec, self.store, src)

    def parse_declaration(self, src: SourceFile) -> None:
        spec = self.spec
        tok = self.peek()
        if self.at("type"):
            self.next()
            name = self.expect_ident("type name")
            self.expect(";")
            spec.add_type(name.text)
            src.spans.append(("type", name.text, tok.line))
        elif self.at("fun"):
            self.next()
            name = self.expect_ident("function name")
            self.expect(":")
            a = self.parse_typeref()
            self.expect("->")
            b = self.parse_typeref()
            deco = None
            if self.peek().kind == "deco":
                deco = Deco(self.next().text[1:])
            self.expect(";")
            spec.add_fun(name.text, a, b, deco)
            src.spans.append(("fun", name.text, tok.line))
        elif self.at("sum"):
            self.next()
            atoms = [self.parse_typeatom_name()]
            while self.at("+"):
                self.next()
                atoms.append(self.parse_typeatom_name())
            self.expect("=")
            cops: list[tuple[str, TypeExpr]] = []
            if not self.at(";"):
                cops.append(self.parse_coprojection())
                while self.at("+"):
                    self.next()
                    cops.append(self.parse_coprojection())
            self.expect(";")
            if len(atoms) == 1:
                spec.add_sum(atoms[0], cops)
            else:
                spec.add_sum(None, cops, display="+".join(atoms))
            src.spans.append(("sum", "+".join(atoms), tok.line))
        elif self.at("exception"):
            self.next()
            name = self.expect_ident("exception name")
            self.expect("of")
            p = self.parse_typeref()
            self.expect(";")
            spec.add_exception(name.text, p)
            src.spans.append(("exception", name.text, tok.line))
        elif self.at("eq"):
            self.next()
            lhs = self.parse_term()
            self.expect("==")
            rhs = self.parse_term()
            self.expect(";")
            spec.add_equation(lhs, rhs)
            src.spans.append(("eq", "", tok.line))
        elif self.at("def"):
            self.next()
            name = self.expect_ident("definition name")
            self.expect("=")
            body = self.parse_term()
            self.expect(";")
            spec.add_definition(name.text, body)
            src.spans.append(("def", name.text, tok.line))
        else:
            self.fail(f"expected a declaration, found {tok.text!r}")

    def parse_coprojection(self) -> tuple[str, TypeExpr]:
        # summand types are atomic ('+' separates coprojections here)
        name = self.expect_ident("coprojection name")
        self.expect(":")
        return name.text, self.spec.resolve_type(self.parse_typeatom_name())

    def parse_typeatom_name(self) -> str:
        t = self.peek()
        if t.kind == "zero":
            self.next()
            return "0"
        if t.kind == "ident" and (t.text == "E" or t.text not in KEYWORDS):
            self.next()
            return t.text
        self.fail("expected a type")

    def parse_typeref(self) -> TypeExpr:
        t0 = self.peek()
        atoms = [self.parse_typeatom_name()]
        while self.at("+") and self.peek(1).kind in ("ident", "zero"):
            self.next()
            atoms.append(self.parse_typeatom_name())
        if len(atoms) == 1:
            return self.spec.resolve_type(atoms[0])
        resolved = tuple(self.spec.resolve_type(a) for a in atoms)
        hits = [s for s in self.spec.sums.values()
                if isinstance(s.vertex, TSumVertex) and s.summands == resolved]
        if not hits:
            raise ExcalcSyntaxError(
                f"no declared sum with summands {'+'.join(atoms)}", t0.line, t0.col)
        if len(hits) > 1:
            raise ExcalcSyntaxError(
                f"ambiguous sum reference {'+'.join(atoms)}", t0.line, t0.col)
        return hits[0].vertex

    # -- terms ----------------------------------------------------------

    def parse_term(self) -> Term:
        t = self.parse_cterm()
        while self.at("handle"):
            tok = self.next()
            self.expect("[")
            items = self.parse_branches(allow_empty=True)
            self.expect("]")
            try:
                t = mk_handle(self.store, t, dict(items))
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        return t

    def parse_cterm(self) -> Term:
        parts = [self.parse_aterm()]
        while self.at("."):
            self.next()
            parts.append(self.parse_aterm())
        tok = self.peek()
        try:
            return mk_comp(*parts)
        except ExcalcError as e:
            raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e

    def parse_branches(self, allow_empty: bool = False) -> list[tuple[str, Term]]:
        out: list[tuple[str, Term]] = []
        if self.at("]"):
            if not allow_empty:
                self.fail("expected at least one branch")
            return out
        while True:
            name = self.peek()
            if name.text in ("id", "raise"):
                self.next()
            else:
                name = self.expect_ident("branch label")
            self.expect("=>")
            out.append((name.text, self.parse_term()))
            if self.at("|") or self.at(","):
                self.next()
                continue
            return out

    def resolve_sum_by_labels(self, labels: list[str], tok: Token) -> SumInfo:
        for s in self.spec.sums.values():
            if s.declared and list(s.cop_names) == labels:
                return s
        raise ExcalcSyntaxError(
            f"no declared sum with coprojections {', '.join(labels)}", tok.line, tok.col)

    def _adapt_case_branches(self, ii, branches: list[Term], tok: Token) -> list[Term]:
        """Branches may be written against the inverse-image summands or
        against the base summands, pre-composing the restriction."""
        out = []
        for i, b in enumerate(branches):
            want = ii.sum.summands[i]
            if source(b) == want:
                out.append(b)
            elif source(b) == ii.base_sum.summands[i]:
                out.append(mk_comp(b, ii.restrictions[i]))
            else:
                raise ExcalcSyntaxError(
                    f"branch {i + 1} has source {type_display(source(b))}; expected "
                    f"{type_display(want)} or {type_display(ii.base_sum.summands[i])}",
                    tok.line, tok.col)
        return out

    def parse_aterm(self) -> Term:
        tok = self.peek()
        if self.at("("):
            self.next()
            t = self.parse_term()
            self.expect(")")
            return t
        if self.at("id"):
            self.next()
            self.expect("(")
            ty = self.parse_typeref()
            self.expect(")")
            return TId(ty)
        if self.at("raise") or self.at("[]"):
            self.next()
            self.expect("(")
            ty = self.parse_typeref()
            self.expect(")")
            return TEmpty(ty)
        if tok.kind == "caset":
            self.next()
            u = self.parse_term()
            self.expect("of")
            self.expect("[")
            branches = self.parse_branches()
            self.expect("]")
            labels = [n for n, _ in branches]
            if labels != ["id", "raise"]:
                raise ExcalcSyntaxError("case^t needs branches [id => ... | raise => ...]",
                                        tok.line, tok.col)
            try:
                ii = self.store.inverse_image_comp(u)
                f1, f0 = branches[0][1], branches[1][1]
                x1 = ii.sum.summands[ii.value_index]
                if source(f1) != x1 and source(f1) == target(u):
                    f1 = mk_comp(f1, ii.u1)
                return mk_case_t(self.store, u, f1, f0)
            except ExcalcSyntaxError:
                raise
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        if tok.kind == "casee":
            self.next()
            u = self.parse_term()
            self.expect("of")
            self.expect("[")
            branches = self.parse_branches(allow_empty=True)
            self.expect("]")
            tgt = None
            if self.at(":"):
                self.next()
                tgt = self.parse_typeref()
            try:
                return mk_case_e(self.store, u, dict(branches), tgt)
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        if self.at("case"):
            self.next()
            u = self.parse_term()
            self.expect("of")
            self.expect("[")
            branches = self.parse_branches(allow_empty=True)
            self.expect("]")
            tgt = None
            if self.at(":"):
                self.next()
                tgt = self.parse_typeref()
            if not branches:
                empty = [s for s in self.spec.sums.values() if s.declared and s.arity == 0]
                if len(empty) != 1 or tgt is None:
                    raise ExcalcSyntaxError(
                        "an empty case needs a unique empty sum and a target annotation",
                        tok.line, tok.col)
                return TCase(u, empty[0], (), tgt)
            labels = [n for n, _ in branches]
            if labels == ["id", "raise"]:
                s = self.store.plus_zero_sum(target(u))
            else:
                s = self.resolve_sum_by_labels(labels, tok)
            try:
                ii = self.store.inverse_image_value(s, u)
                fixed = self._adapt_case_branches(ii, [b for _, b in branches], tok)
                return mk_case(self.store, u, s, fixed)
            except ExcalcSyntaxError:
                raise
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        if self.at("["):
            self.next()
            branches = self.parse_branches()
            self.expect("]")
            labels = [n for n, _ in branches]
            s = self.resolve_sum_by_labels(labels, tok)
            try:
                return mk_match(self.store, s, [b for _, b in branches])
            except ExcalcError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.next()
            try:
                return self.spec.lookup(tok.text)
            except UnknownReferenceError as e:
                raise ExcalcSyntaxError(str(e), tok.line, tok.col) from e
        self.fail(f"expected a term, found {tok.text or 'end of file'!r}")


def parse(text: str, path: str = "<string>") -> ParseResult:
    """Parse a specification source; raises ExcalcSyntaxError with location."""
    result = Parser(text, path).parse_specification()
    report = well_formed(result.spec)
    if report.violations:
        raise ExcalcError("ill-formed specification: " + "; ".join(report.violations))
    return result


def parse_term(text: str, result: ParseResult) -> Term:
    """Parse a standalone term (e.g. a CLI equation side) in a parsed spec."""
    p = Parser(text, "<term>")
    p.spec, p.store = result.spec, result.store
    t = p.parse_term()
    if not p.at(""):
        p.fail("trailing input after term")
    return t


def parse_equation(text: str, result: ParseResult) -> tuple[Term, Term]:
    p = Parser(text, "<equation>")
    p.spec, p.store = result.spec, result.store
    lhs = p.parse_term()
    p.expect("==")
    rhs = p.parse_term()
    if not p.at(""):
        p.fail("trailing input after equation")
    return lhs, rhs


# ---------------------------------------------------------------------------
# printing


def _strip_restriction(store: DerivationStore, branch: Term, restriction: Term) -> Term | None:
    """Undo the branch pre-composition convenience for printable output."""
    if not isinstance(restriction, TRestrict):
        return None
    if branch == restriction:
        return TId(restriction.tgt)
    bp = comp_parts(branch)
    if isinstance(branch, TComp) and bp[-1] == restriction:
        rest = bp[:-1]
        return rest[0] if len(rest) == 1 else TComp(rest)
    return None


def print_term(store: DerivationStore, t: Term) -> str:
    spec = store.spec
    names = store.exc_names()

    def go(t: Term) -> str:
        if isinstance(t, TComp):
            return " . ".join(f"({go(p)})" if isinstance(p, THandle) else go(p)
                              for p in t.parts)
        if isinstance(t, TCase):
            if not t.branches:
                return f"case {go(t.u)} of [] : {type_display(t.tgt)}"
            ii = store.inverse_image_value(t.sum, t.u)
            if t.sum.cop_names:
                labels = t.sum.cop_names
            elif t.sum.sum_id.startswith("plus0@"):
                labels = ("id", "raise")
            else:
                return render_term(t, spec.logic, names)
            parts = []
            for i, b in enumerate(t.branches):
                stripped = _strip_restriction(store, b, ii.restrictions[i])
                parts.append(f"{labels[i]} => {go(stripped if stripped is not None else b)}")
            return f"case {go(t.u)} of [{' | '.join(parts)}]"
        if isinstance(t, TCaseE):
            ii = store.inverse_image_exc(t.u) if spec.exceptions else None
            items = []
            for i, b in t.items:
                stripped = _strip_restriction(store, b, ii.restrictions[i]) if ii else None
                items.append(f"{names[i]} => {go(stripped if stripped is not None else b)}")
            if items:
                return f"case^e {go(t.u)} of [{' | '.join(items)}]"
            return f"case^e {go(t.u)} of [] : {type_display(t.tgt)}"
        if isinstance(t, TCaseT):
            ii = store.inverse_image_comp(t.u)
            f1 = _strip_restriction(store, t.f1, ii.u1)
            return (f"case^t {go(t.u)} of [id => {go(f1 if f1 is not None else t.f1)}"
                    f" | raise => {go(t.f0)}]")
        if isinstance(t, THandle):
            ii = store.inverse_image_comp(t.u)
            eii = store.inverse_image_exc(ii.u0) if spec.exceptions else None
            items = []
            for i, b in t.items:
                stripped = _strip_restriction(store, b, eii.restrictions[i]) if eii else None
                items.append(f"{names[i]} => {go(stripped if stripped is not None else b)}")
            head = f"({go(t.u)})" if isinstance(t.u, TComp) else go(t.u)
            return f"{head} handle [{', '.join(items)}]"
        if isinstance(t, TMatch):
            if not t.sum.cop_names:
                return render_term(t, spec.logic, names)
            parts = [f"{t.sum.cop_names[i]} => {go(b)}" for i, b in enumerate(t.branches)]
            return f"[{' | '.join(parts)}]"
        return render_term(t, spec.logic, names)

    return go(t)


def print_specification(store: DerivationStore) -> str:
    """Emit the canonical DSL text; parse(print(spec)) is the identity up to
    normalized whitespace."""
    spec = store.spec
    out = [f"logic {spec.logic.value};"]
    for decl in spec.declarations:
        tag = decl[0]
        if tag == "type":
            out.append(f"type {decl[1]};")
        elif tag == "fun":
            g = spec.gens[decl[1]]
            deco = "" if g.deco is Deco.PLAIN else f" @{g.deco.value}"
            out.append(f"fun {g.name} : {type_display(g.src)} -> {type_display(g.tgt)}{deco};")
        elif tag == "sum":
            s = spec.sums[decl[1]]
            cops = " + ".join(f"{n}: {type_display(ty)}"
                              for n, ty in zip(s.cop_names, s.summands))
            out.append(f"sum {type_display(s.vertex)} = {cops};")
        elif tag == "exception":
            e = next(x for x in spec.exceptions if x.name == decl[1])
            out.append(f"exception {e.name} of {type_display(e.param)};")
        elif tag == "eq":
            eq = spec.equations[decl[1]]
            out.append(f"eq {print_term(store, eq.lhs)} == {print_term(store, eq.rhs)};")
        elif tag == "def":
            _, name, _ = decl
            out.append(f"def {name} = {print_term(store, spec.definitions[name])};")
    return "\n".join(out) + "\n"
