"""Rule systems and the decision procedure for derivable equations.

normalize implements the unit/assoc rules, beta steps for matches and the
three case constructions, initiality (which subsumes exception propagation),
delta unfolding of definitional equations, and a match-eta collapse.  equiv
decides congruence by normalization, a bounded rewrite closure over stored
equations, and the match/empty-match uniqueness rules applied recursively.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .core import (
    EXCEPTIONAL,
    ORDINARY,
    ZERO,
    BranchArityMismatchError,
    BranchMismatchError,
    Deco,
    Equation,
    ExcalcError,
    IllFormedTermError,
    KindMismatchError,
    Logic,
    MissingTargetError,
    NotAComputationError,
    NotAValueError,
    SourceMismatchError,
    Specification,
    SumInfo,
    TargetMismatchError,
    TargetNotZeroError,
    TCase,
    TCaseE,
    TCaseT,
    TComp,
    TEmpty,
    TGen,
    THandle,
    TId,
    TInvCoproj,
    TInvSummand,
    TMatch,
    TRestrict,
    Term,
    TypeExpr,
    TypeMismatchError,
    TZero,
    comp_parts,
    decoration,
    deco_join,
    mk_comp,
    source,
    target,
    type_display,
)
from .render import render_term

VALUE_FLAVOR = "value"
COMP_FLAVOR = "computation"
EXC_FLAVOR = "exceptional"


# ---------------------------------------------------------------------------
# stable serialization (trace reproducibility and canonical ordering)


def ser_type(ty: TypeExpr) -> str:
    if isinstance(ty, TInvSummand):
        return f"{ty.invimage_id}.X{ty.index}"
    if isinstance(ty, TZero):
        return "0"
    return type_display(ty)


def ser(t: Term) -> str:
    if isinstance(t, TGen):
        return t.name
    if isinstance(t, TId):
        return f"id({ser_type(t.ty)})"
    if isinstance(t, TEmpty):
        return f"[]({ser_type(t.tgt)})"
    if isinstance(t, TComp):
        return "(" + " . ".join(ser(p) for p in t.parts) + ")"
    if isinstance(t, TMatch):
        return f"match<{t.sum.sum_id}>(" + "|".join(ser(b) for b in t.branches) + ")"
    if isinstance(t, TCase):
        tail = "|".join(ser(b) for b in t.branches)
        if not t.branches and t.tgt is not None:
            tail = f":{ser_type(t.tgt)}"
        return f"case<{t.sum.sum_id}>({ser(t.u)};{tail})"
    if isinstance(t, TCaseT):
        return f"caset({ser(t.u)};{ser(t.f1)};{ser(t.f0)})"
    if isinstance(t, TCaseE):
        items = "|".join(f"{i}:{ser(b)}" for i, b in t.items)
        return f"casee({ser(t.u)};{items};{ser_type(t.tgt)})"
    if isinstance(t, THandle):
        items = "|".join(f"{i}:{ser(b)}" for i, b in t.items)
        return f"handle({ser(t.u)};{items})"
    if isinstance(t, TInvCoproj):
        return f"{t.invimage_id}.j{t.index}"
    if isinstance(t, TRestrict):
        return f"{t.invimage_id}.r{t.index}"
    raise IllFormedTermError(f"unserializable term {t!r}")


def term_size(t: Term) -> int:
    return 1 + len(ser(t))


def _hash8(text: str) -> str:
    return hashlib.sha1(text.encode()).hexdigest()[:8]


# ---------------------------------------------------------------------------
# traces and decisions


@dataclass
class Step:
    rule: str
    position: str
    before: str
    after: str
    bt: Term | None = None
    at: Term | None = None

    def line(self) -> str:
        return f"[{self.rule}] {self.position}: {self.before} ==> {self.after}"


@dataclass
class Decision:
    yes: bool
    trace: list[Step] = field(default_factory=list)
    depth_hit: bool = False

    @property
    def verdict(self) -> str:
        return "YES" if self.yes else "NO-WITHIN-BOUND"


@dataclass(frozen=True, eq=False)
class InverseImage:
    """A generated inverse image of a sum along a term (cache-canonical)."""

    iid: str
    flavor: str
    base_sum: SumInfo
    along: Term
    sum: SumInfo
    restrictions: tuple[Term, ...]
    value_index: int | None = None
    raise_index: int | None = None

    def __eq__(self, other):
        return isinstance(other, InverseImage) and other.iid == self.iid

    def __hash__(self):
        return hash(self.iid)

    @property
    def u1(self) -> Term:
        return self.restrictions[self.value_index]

    @property
    def u0(self) -> Term:
        return self.restrictions[self.raise_index]


class DerivationStore:
    """Mutable derivation state over a specification.

    Caches must be written from one thread; read-only queries on a frozen
    store may run concurrently.
    """

    DEFAULT_DEPTH = 32
    CLOSURE_CAP = 48
    NORMALIZE_FUEL = 20000

    def __init__(self, spec: Specification, depth: int = DEFAULT_DEPTH):
        self.spec = spec
        self.default_depth = depth
        self.derived: list[Equation] = []
        self._derived_keys: set[tuple[str, str]] = set()
        self._inv_cache: dict[tuple, InverseImage] = {}
        self._inv_by_id: dict[str, InverseImage] = {}
        self._gen_sums: dict[str, SumInfo] = {}
        self._plus_zero: dict[TypeExpr, SumInfo] = {}
        self._norm_cache: dict[Term, Term] = {}
        self._canon_cache: dict[Term, Term] = {}
        self._delta: dict[str, Term] | None = None
        self._delta_stamp = -1

    # -- specification-sensitive caches ---------------------------------

    def _stamp(self) -> int:
        return len(self.spec.equations)

    def delta(self) -> dict[str, Term]:
        """Definitional equations g == body, acyclic, unfolded by normalize."""
        if self._delta is None or self._delta_stamp != self._stamp():
            delta: dict[str, Term] = {}

            def gens_of(t: Term, seen: frozenset[str]) -> set[str]:
                out = set()
                stack = [t]
                while stack:
                    x = stack.pop()
                    if isinstance(x, TGen):
                        out.add(x.name)
                        if x.name in delta and x.name not in seen:
                            stack.append(delta[x.name])
                    elif isinstance(x, TComp):
                        stack.extend(x.parts)
                    elif isinstance(x, (TMatch, TCase)):
                        stack.extend(x.branches)
                        if isinstance(x, TCase):
                            stack.append(x.u)
                    elif isinstance(x, TCaseT):
                        stack.extend((x.u, x.f1, x.f0))
                    elif isinstance(x, (TCaseE, THandle)):
                        stack.append(x.u)
                        stack.extend(b for _, b in x.items)
                return out

            for eq in self.spec.equations:
                if isinstance(eq.lhs, TGen) and eq.lhs.name not in delta:
                    name = eq.lhs.name
                    if name not in gens_of(eq.rhs, frozenset()):
                        delta[name] = eq.rhs
            self._delta = delta
            self._delta_stamp = self._stamp()
            self._norm_cache.clear()
            self._canon_cache.clear()
        return self._delta

    def exc_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.spec.exceptions)

    def render(self, t: Term) -> str:
        return render_term(t, self.spec.logic, self.exc_names())

    # -- sums ------------------------------------------------------------

    def sum_by_id(self, sum_id: str) -> SumInfo:
        if sum_id in self.spec.sums:
            return self.spec.sums[sum_id]
        if sum_id in self._gen_sums:
            return self._gen_sums[sum_id]
        raise KeyError(f"unknown sum {sum_id}")

    def register_sum(self, s: SumInfo) -> SumInfo:
        existing = self._gen_sums.get(s.sum_id) or self.spec.sums.get(s.sum_id)
        if existing is not None:
            return existing
        self._gen_sums[s.sum_id] = s
        return s

    def plus_zero_sum(self, ty: TypeExpr) -> SumInfo:
        """The implicit sum Y = Y + 0 with coprojections id_Y and raise_Y."""
        s = self._plus_zero.get(ty)
        if s is None:
            s = SumInfo(f"plus0@{ser_type(ty)}", ty, (ty, ZERO), (TId(ty), TEmpty(ty)))
            self._plus_zero[ty] = s
            self.register_sum(s)
        return s

    def all_sums(self) -> list[SumInfo]:
        return list(self.spec.sums.values()) + list(self._gen_sums.values())

    def decomposable_sums(self, vertex: TypeExpr) -> list[SumInfo]:
        """Sums usable for the uniqueness-rule decomposition of a vertex.

        Exceptional sums have no match property; sums with an identity
        coprojection (Y = Y + 0 and its special forms) give no progress.
        """
        out = []
        for s in self.all_sums():
            if s.vertex != vertex or s.kind == EXCEPTIONAL:
                continue
            if any(isinstance(c, TId) for c in s.coprojections):
                continue
            out.append(s)
        out.sort(key=lambda s: s.sum_id)
        return out

    # -- derived equations ------------------------------------------------

    def record_derived(self, lhs: Term, rhs: Term, label: str = "") -> None:
        nl, nr = self.normalize(lhs), self.normalize(rhs)
        if nl == nr:
            return
        key = (ser(nl), ser(nr))
        if key in self._derived_keys or (key[1], key[0]) in self._derived_keys:
            return
        self._derived_keys.add(key)
        self.derived.append(Equation.of(lhs, rhs, "derived", label))

    def all_equations(self) -> list[Equation]:
        """Axioms (non-definitional) plus derived equations."""
        delta = self.delta()
        out = []
        for eq in self.spec.equations:
            if isinstance(eq.lhs, TGen) and delta.get(eq.lhs.name) is eq.rhs:
                continue
            out.append(eq)
        out.extend(self.derived)
        return out

    # -- normalization -----------------------------------------------------

    def _emit(self, steps, rule, pos, before, after, bt=None, at=None):
        if steps is not None:
            steps.append(Step(rule, pos, before, after, bt, at))

    def normalize(self, t: Term, steps: list[Step] | None = None, pos: str = "t") -> Term:
        self.delta()  # refresh caches against new equations
        if steps is None:
            cached = self._norm_cache.get(t)
            if cached is not None:
                return cached
        fuel = [self.NORMALIZE_FUEL]
        nt = self._norm(t, steps, pos, fuel)
        if steps is None:
            self._norm_cache[t] = nt
        return nt

    def _norm(self, t: Term, steps, pos, fuel) -> Term:
        fuel[0] -= 1
        if fuel[0] <= 0:
            raise ExcalcError("normalization fuel exhausted")
        nt = self._norm_inner(t, steps, pos, fuel)
        if not isinstance(nt, TEmpty) and source(nt) == ZERO:
            after = TEmpty(target(nt))
            self._emit(steps, "initiality", pos, self.render(nt), self.render(after), nt, after)
            nt = after
        return nt

    def _norm_inner(self, t: Term, steps, pos, fuel) -> Term:
        if isinstance(t, TGen):
            body = self.delta().get(t.name)
            if body is not None:
                self._emit(steps, "delta", pos, self.render(t), self.render(body), t, body)
                return self._norm(body, steps, pos, fuel)
            return t
        if isinstance(t, (TId, TEmpty, TInvCoproj, TRestrict)):
            return t
        if isinstance(t, TComp):
            return self._norm_comp(t, steps, pos, fuel)
        if isinstance(t, TMatch):
            nbs = tuple(self._norm(b, steps, f"{pos}[{i + 1}]", fuel)
                        for i, b in enumerate(t.branches))
            nm = TMatch(t.sum, nbs)
            g = self._match_eta(nm)
            if g is not None:
                self._emit(steps, "match-eta", pos, self.render(nm), self.render(g), nm, g)
                return self._norm(g, steps, pos, fuel)
            return nm
        if isinstance(t, TCase):
            nu = self._norm(t.u, steps, f"{pos}.scrutinee", fuel)
            ii = self.inverse_image_value(t.sum, nu, steps, pos)
            if ii.sum.arity == 0:
                # a case over the empty sum stays a constructor; its source is
                # congruent to 0, handled by the uniqueness decomposition
                return TCase(nu, t.sum, (), target(t)) if nu != t.u else t
            out = TMatch(ii.sum, t.branches)
            self._emit(steps, "case-unfold", pos, self.render(t), self.render(out), t, out)
            return self._norm(out, steps, pos, fuel)
        if isinstance(t, TCaseT):
            nu = self._norm(t.u, steps, f"{pos}.scrutinee", fuel)
            ii = self.inverse_image_comp(nu, steps, pos)
            branches: list[Term | None] = [None, None]
            branches[ii.value_index] = t.f1
            branches[ii.raise_index] = t.f0
            out = TMatch(ii.sum, tuple(branches))
            self._emit(steps, "case-t-unfold", pos, self.render(t), self.render(out), t, out)
            return self._norm(out, steps, pos, fuel)
        if isinstance(t, TCaseE):
            nu = self._norm(t.u, steps, f"{pos}.scrutinee", fuel)
            if not self.spec.exceptions:
                return TCaseE(nu, t.items, t.tgt) if nu != t.u else t
            ii = self.inverse_image_exc(nu, steps, pos)
            given = dict(t.items)
            branches = []
            for i in range(ii.sum.arity):
                if i in given:
                    branches.append(given[i])
                else:
                    # default computation: re-raise the same exception
                    branches.append(mk_comp(TEmpty(t.tgt), nu, ii.sum.coprojections[i]))
            out = TMatch(ii.sum, tuple(branches))
            self._emit(steps, "case-e-unfold", pos, self.render(t), self.render(out), t, out)
            return self._norm(out, steps, pos, fuel)
        if isinstance(t, THandle):
            nu = self._norm(t.u, steps, f"{pos}.scrutinee", fuel)
            ii = self.inverse_image_comp(nu, steps, pos)
            y = target(t.u)
            f = TCaseE(ii.u0, t.items, y)
            out = TCaseT(nu, ii.u1, f)
            self._emit(steps, "handle-unfold", pos, self.render(t), self.render(out), t, out)
            return self._norm(out, steps, pos, fuel)
        raise IllFormedTermError(f"cannot normalize {t!r}")

    def _norm_comp(self, t: TComp, steps, pos, fuel) -> Term:
        parts: list[Term] = []
        for i, p in enumerate(t.parts):
            np = self._norm(p, steps, f"{pos}.{i + 1}", fuel)
            parts.extend(comp_parts(np))
        if any(isinstance(p, TId) for p in parts):
            before = mk_comp(*parts) if len(parts) > 1 else parts[0]
            kept = [p for p in parts if not isinstance(p, TId)]
            if not kept:
                after: Term = TId(source(t))
                self._emit(steps, "unit", pos, self.render(before), self.render(after),
                           before, after)
                return after
            after = kept[0] if len(kept) == 1 else TComp(tuple(kept))
            self._emit(steps, "unit", pos, self.render(before), self.render(after),
                       before, after)
            parts = kept
        while True:
            fuel[0] -= 1
            if fuel[0] <= 0:
                raise ExcalcError("normalization fuel exhausted")
            if len(parts) == 1:
                return parts[0]
            # initiality: the prefix before a source-0 component is []_Z
            kz = None
            for k in range(len(parts) - 1, -1, -1):
                if source(parts[k]) == ZERO:
                    kz = k
                    break
            if kz is not None and (kz > 0 or not isinstance(parts[kz], TEmpty)):
                before = TComp(tuple(parts))
                z = target(parts[0])
                parts = [TEmpty(z)] + parts[kz + 1:]
                after = parts[0] if len(parts) == 1 else TComp(tuple(parts))
                self._emit(steps, "propagation", pos, self.render(before),
                           self.render(after), before, after)
                continue
            changed = False
            for k in range(len(parts) - 1):
                m = parts[k]
                if not isinstance(m, TMatch):
                    continue
                for i, c in enumerate(m.sum.coprojections):
                    if parts[k + 1] == c:
                        before = TComp(tuple(parts))
                        branch = self._norm(m.branches[i], None, pos, fuel)
                        parts[k:k + 2] = list(comp_parts(branch))
                        after = parts[0] if len(parts) == 1 else TComp(tuple(parts))
                        self._emit(steps, "match-beta", pos, self.render(before),
                                   self.render(after), before, after)
                        changed = True
                        break
                if changed:
                    break
            if not changed:
                return TComp(tuple(parts))

    def _match_eta(self, m: TMatch) -> Term | None:
        """Collapse [c_i => g∘c_i] to g (match uniqueness applied syntactically).

        Zero summands impose no constraint; an identity coprojection forces
        g to be that branch.
        """
        cand: Term | None = None
        found = False
        for i, b in enumerate(m.branches):
            if m.sum.summands[i] == ZERO:
                continue
            c = m.sum.coprojections[i]
            if isinstance(c, TId):
                g: Term = b
            elif b == c:
                g = TId(m.sum.vertex)
            else:
                bp, cp = comp_parts(b), comp_parts(c)
                if len(bp) > len(cp) and bp[-len(cp):] == cp:
                    g = bp[0] if len(bp) - len(cp) == 1 else TComp(bp[:-len(cp)])
                else:
                    return None
            if found and g != cand:
                return None
            cand, found = g, True
        return cand if found else None

    # -- canonical forms (bounded congruence closure) -----------------------

    def canon(self, t: Term) -> Term:
        nt = self.normalize(t)
        cached = self._canon_cache.get(nt)
        if cached is not None:
            return cached
        closure = self._closure(nt)
        best = min(closure.values(), key=lambda item: (term_size(item[0]), ser(item[0])))[0]
        for form, _ in closure.values():
            self._canon_cache[form] = best
        return best

    def _closure(self, start: Term, cap: int | None = None) -> dict[str, tuple[Term, list[Step]]]:
        """All normal forms reachable by rewriting with stored equations."""
        cap = cap or self.CLOSURE_CAP
        pairs = []
        for eq in self.all_equations():
            nl, nr = self.normalize(eq.lhs), self.normalize(eq.rhs)
            if nl != nr:
                pairs.append((nl, nr, eq.label or eq.origin))
                pairs.append((nr, nl, eq.label or eq.origin))
        out: dict[str, tuple[Term, list[Step]]] = {ser(start): (start, [])}
        if not pairs:
            return out
        queue = [start]
        while queue and len(out) < cap:
            cur = queue.pop(0)
            path = out[ser(cur)][1]
            for a, b, label in pairs:
                for rewritten in self._rewrites(cur, a, b):
                    try:
                        nr_ = self.normalize(rewritten)
                    except ExcalcError:
                        continue
                    key = ser(nr_)
                    if key not in out:
                        step = Step("equation", label, self.render(cur),
                                    self.render(nr_), cur, nr_)
                        out[key] = (nr_, path + [step])
                        queue.append(nr_)
        return out

    def _rewrites(self, t: Term, a: Term, b: Term):
        """Yield every term obtained by replacing one occurrence of a by b."""
        if t == a:
            yield b
        if isinstance(t, TComp):
            pa = comp_parts(a)
            n, m = len(t.parts), len(pa)
            for k in range(n - m + 1):
                if t.parts[k:k + m] == pa and not (k == 0 and m == n):
                    try:
                        yield mk_comp(*(t.parts[:k] + comp_parts(b) + t.parts[k + m:]))
                    except ExcalcError:
                        pass
            for idx, p in enumerate(t.parts):
                for rp in self._rewrites(p, a, b):
                    try:
                        yield mk_comp(*(t.parts[:idx] + comp_parts(rp) + t.parts[idx + 1:]))
                    except ExcalcError:
                        pass
        elif isinstance(t, TMatch):
            for i, br in enumerate(t.branches):
                for rb in self._rewrites(br, a, b):
                    yield TMatch(t.sum, t.branches[:i] + (rb,) + t.branches[i + 1:])
        elif isinstance(t, TCaseE):
            for ru in self._rewrites(t.u, a, b):
                yield TCaseE(ru, t.items, t.tgt)
        elif isinstance(t, TCase) and not t.branches:
            for ru in self._rewrites(t.u, a, b):
                yield TCase(ru, t.sum, (), t.tgt)

    # -- the decision procedure ---------------------------------------------

    def equiv(self, t1: Term, t2: Term, depth: int | None = None,
              want_trace: bool = True) -> Decision:
        if source(t1) != source(t2) or target(t1) != target(t2):
            raise TypeMismatchError(
                f"cannot compare {type_display(source(t1))}->{type_display(target(t1))} "
                f"with {type_display(source(t2))}->{type_display(target(t2))}")
        depth = self.default_depth if depth is None else depth
        steps: list[Step] | None = [] if want_trace else None
        n1 = self.normalize(t1, steps, "lhs")
        n2 = self.normalize(t2, steps, "rhs")
        state = {"depth_hit": False}
        ok = self._equiv_core(n1, n2, depth, steps, {}, state)
        if ok:
            self.record_derived(t1, t2, "proved")
        return Decision(ok, steps if steps is not None else [], state["depth_hit"])

    def _conclude(self, steps, n1: Term, n2: Term, how: str):
        rule = "match-uniqueness" if isinstance(n1, TMatch) and how == "equal" else how
        self._emit(steps, rule, "conclusion", self.render(n1), self.render(n2), n1, n2)

    def _equiv_core(self, n1: Term, n2: Term, depth: int, steps,
                    memo: dict, state: dict) -> bool:
        if n1 == n2:
            self._conclude(steps, n1, n2, "equal")
            return True
        if source(n1) == ZERO:
            self._conclude(steps, n1, n2, "empty-match-uniqueness")
            return True
        key = frozenset((ser(n1), ser(n2)))
        if key in memo:
            return False  # in progress or already failed at this depth or higher
        memo[key] = False
        # bounded congruence closure meet
        c1, c2 = self._closure(n1), self._closure(n2)
        common = sorted(set(c1) & set(c2))
        if common:
            pick = min(common, key=lambda k: (term_size(c1[k][0]), k))
            if steps is not None:
                steps.extend(c1[pick][1])
                for st in reversed(c2[pick][1]):
                    steps.append(Step(st.rule, st.position + " (rhs, reversed)",
                                      st.after, st.before, st.at, st.bt))
            self._conclude(steps, c1[pick][0], c1[pick][0], "equal")
            memo.pop(key, None)
            return True
        if self._back_prop(n1, n2, steps) or self._back_prop(n2, n1, steps):
            memo.pop(key, None)
            return True
        if depth <= 0:
            state["depth_hit"] = True
            return False
        for s in self.decomposable_sums(source(n1)):
            sub: list[Step] | None = [] if steps is not None else None
            all_ok = True
            for i, c in enumerate(s.coprojections):
                o1 = self.normalize(mk_comp(n1, c), sub, f"obligation[{i + 1}].lhs")
                o2 = self.normalize(mk_comp(n2, c), sub, f"obligation[{i + 1}].rhs")
                if not self._equiv_core(o1, o2, depth - 1, sub, memo, state):
                    all_ok = False
                    break
            if all_ok:
                if steps is not None and sub:
                    steps.extend(sub)
                self._emit(steps, "match-uniqueness", f"sum {s.sum_id}",
                           self.render(n1), self.render(n2), n1, n2)
                memo.pop(key, None)
                self.record_derived(n1, n2, "uniqueness")
                return True
        return False

    def _back_prop(self, u: Term, rf: Term, steps) -> bool:
        """Back-propagation (raise factorizations transfer through values):
        if a stored equation gives v∘u == raise∘f with v a value, then
        u == raise∘f."""
        rparts = comp_parts(rf)
        if not isinstance(rparts[0], TEmpty) or len(rparts) < 2:
            return False
        f = rparts[1:]
        up = comp_parts(u)
        for eq in self.all_equations():
            for lhs, rhs in ((eq.lhs, eq.rhs), (eq.rhs, eq.lhs)):
                nr = self.normalize(rhs)
                rp = comp_parts(nr)
                if not (isinstance(rp[0], TEmpty) and rp[1:] == f):
                    continue
                nl = self.normalize(lhs)
                lp = comp_parts(nl)
                if len(lp) <= len(up) or lp[len(lp) - len(up):] != up:
                    continue
                prefix = lp[:len(lp) - len(up)]
                if all(decoration(p) is Deco.VALUE for p in prefix):
                    self._emit(steps, "back-propagation", "conclusion",
                               self.render(u), self.render(rf), u, rf)
                    return True
        return False

    # -- inverse images -------------------------------------------------------

    def invimage_by_id(self, iid: str) -> InverseImage:
        return self._inv_by_id[iid]

    def _register_ii(self, key: tuple, ii: InverseImage) -> InverseImage:
        self._inv_cache[key] = ii
        self._inv_by_id[ii.iid] = ii
        self.register_sum(ii.sum)
        self._record_defining(ii)
        return ii

    def seed_invimage(self, key_sum: SumInfo, along: Term, ii: InverseImage) -> InverseImage:
        """Pre-register a translated inverse image under its native cache key."""
        key = (ii.flavor, key_sum.sum_id, ser(self.canon(along)))
        if key in self._inv_cache:
            return self._inv_cache[key]
        return self._register_ii(key, ii)

    def _record_defining(self, ii: InverseImage) -> None:
        base, s = ii.base_sum, ii.sum
        for i in range(s.arity):
            lhs = mk_comp(ii.along, s.coprojections[i])
            if ii.flavor == VALUE_FLAVOR or ii.flavor == EXC_FLAVOR:
                rhs = mk_comp(base.coprojections[i], ii.restrictions[i])
            else:
                if i == ii.value_index:
                    rhs = ii.restrictions[i]
                else:
                    rhs = mk_comp(TEmpty(base.vertex), ii.restrictions[i])
            try:
                self.record_derived(lhs, rhs, f"inverse-image {ii.iid}")
            except ExcalcError:
                pass

    def _describe_ii(self, ii: InverseImage) -> str:
        summands = " + ".join(type_display(x) for x in ii.sum.summands)
        cops = ", ".join(self.render(c) for c in ii.sum.coprojections)
        if ii.flavor == COMP_FLAVOR:
            extra = f", u1 = {self.render(ii.u1)}, u0 = {self.render(ii.u0)}"
        else:
            extra = ", restrictions [" + ", ".join(
                self.render(r) for r in ii.restrictions) + "]"
        base = type_display(ii.base_sum.vertex)
        if ii.flavor == COMP_FLAVOR:
            base = f"{base}+0"
        return (f"({self.render(ii.along)})^-1({base}) = {summands}, "
                f"coprojections [{cops}]{extra}")

    def _emit_ii(self, steps, pos, rule, ii: InverseImage):
        self._emit(steps, rule, pos, self.render(ii.along), self._describe_ii(ii),
                   ii.along, None)

    def _fresh_sum(self, iid: str, vertex: TypeExpr, summands, cops) -> SumInfo:
        return SumInfo(f"{iid}.sum", vertex, tuple(summands), tuple(cops))

    # value flavor (basic logic / values in the decorated logic)

    def inverse_image_value(self, s: SumInfo, u: Term, steps=None, pos="") -> InverseImage:
        if target(u) != s.vertex:
            raise TargetMismatchError(
                f"{self.render(u)} does not map into {type_display(s.vertex)}")
        if self.spec.logic is Logic.DECORATED and decoration(u) is not Deco.VALUE:
            raise NotAValueError(f"{self.render(u)} is not a value")
        cu = self.canon(u)
        key = (VALUE_FLAVOR, s.sum_id, ser(cu))
        ii = self._inv_cache.get(key)
        if ii is None:
            ii = self._build_value_ii(s, cu)
            self._register_ii(key, ii)
        self._emit_ii(steps, pos, "inverse-image", ii)
        return ii

    def _build_value_ii(self, s: SumInfo, cu: Term) -> InverseImage:
        iid = f"inv[{_hash8(s.sum_id + '|' + ser(cu))}]"
        x = source(cu)
        if cu == TId(s.vertex):
            return InverseImage(iid, VALUE_FLAVOR, s, cu, s,
                                tuple(TId(y) for y in s.summands))
        for i, c in enumerate(s.coprojections):
            if cu == c:
                summands = tuple(x if j == i else ZERO for j in range(s.arity))
                cops = tuple(TId(x) if j == i else TEmpty(x) for j in range(s.arity))
                restr = tuple(TId(x) if j == i else TEmpty(s.summands[j])
                              for j in range(s.arity))
                return InverseImage(iid, VALUE_FLAVOR, s, cu,
                                    self._fresh_sum(iid, x, summands, cops), restr)
        if isinstance(cu, TEmpty):
            summands = (ZERO,) * s.arity
            cops = (TEmpty(ZERO),) * s.arity
            restr = tuple(TEmpty(y) for y in s.summands)
            return InverseImage(iid, VALUE_FLAVOR, s, cu,
                                self._fresh_sum(iid, ZERO, summands, cops), restr)
        if isinstance(cu, TMatch):
            ii = self._match_factor_ii(iid, s, cu)
            if ii is not None:
                return ii
        summands = tuple(TInvSummand(iid, i, f"{iid}.X{i + 1}") for i in range(s.arity))
        cops = tuple(TInvCoproj(iid, i, summands[i], x) for i in range(s.arity))
        restr = tuple(TRestrict(iid, i, summands[i], s.summands[i], Deco.VALUE)
                      for i in range(s.arity))
        return InverseImage(iid, VALUE_FLAVOR, s, cu,
                            self._fresh_sum(iid, x, summands, cops), restr)

    def _factor_through(self, b: Term, c: Term, summand: TypeExpr) -> Term | None:
        """Write b as c ∘ g, returning g; None when it does not factor."""
        if b == c:
            return TId(summand)
        bp, cp = comp_parts(b), comp_parts(c)
        if len(bp) > len(cp) and bp[:len(cp)] == cp:
            rest = bp[len(cp):]
            return rest[0] if len(rest) == 1 else TComp(tuple(rest))
        return None

    def _match_factor_ii(self, iid: str, s: SumInfo, cu: TMatch) -> InverseImage | None:
        """Inverse image along a match whose branches each factor through one
        coprojection of the target sum, at most one branch per slot."""
        src_sum = cu.sum
        slot_of: dict[int, tuple[int, Term]] = {}
        for j, b in enumerate(cu.branches):
            if src_sum.summands[j] == ZERO:
                continue
            hit = None
            for i, c in enumerate(s.coprojections):
                g = self._factor_through(b, c, s.summands[i])
                if g is not None:
                    hit = (i, g)
                    break
            if hit is None or hit[0] in slot_of:
                return None
            slot_of[hit[0]] = (j, hit[1])
        x = src_sum.vertex
        summands, cops, restr = [], [], []
        for i in range(s.arity):
            if i in slot_of:
                j, g = slot_of[i]
                summands.append(src_sum.summands[j])
                cops.append(src_sum.coprojections[j])
                restr.append(g)
            else:
                summands.append(ZERO)
                cops.append(TEmpty(x))
                restr.append(TEmpty(s.summands[i]))
        if (tuple(summands) == src_sum.summands
                and tuple(cops) == src_sum.coprojections):
            inv_sum = src_sum
        else:
            inv_sum = self._fresh_sum(iid, x, summands, cops)
        return InverseImage(iid, VALUE_FLAVOR, s, cu, inv_sum, tuple(restr))

    # computation flavor (the sum Y = Y + 0, decorated logic)

    def inverse_image_comp(self, u: Term, steps=None, pos="") -> InverseImage:
        if self.spec.logic is not Logic.DECORATED:
            raise KindMismatchError("inverse image by a computation needs the decorated logic")
        if decoration(u) is Deco.PLAIN:
            raise NotAComputationError(f"{self.render(u)} carries no decoration")
        y = target(u)
        base = self.plus_zero_sum(y)
        cu = self.canon(u)
        key = (COMP_FLAVOR, base.sum_id, ser(cu))
        ii = self._inv_cache.get(key)
        if ii is None:
            ii = self._build_comp_ii(base, cu, y)
            self._register_ii(key, ii)
        self._emit_ii(steps, pos, "inverse-image-comp", ii)
        return ii

    def _build_comp_ii(self, base: SumInfo, cu: Term, y: TypeExpr) -> InverseImage:
        iid = f"inv[{_hash8(base.sum_id + '|' + ser(cu))}]"
        x = source(cu)
        if decoration(cu) is Deco.VALUE:
            # a coerced value never raises: X = X + 0
            s = self._fresh_sum(iid, x, (x, ZERO), (TId(x), TEmpty(x)))
            return InverseImage(iid, COMP_FLAVOR, base, cu, s,
                                (cu, TEmpty(ZERO)), value_index=0, raise_index=1)
        parts = comp_parts(cu)
        if isinstance(parts[0], TEmpty):
            # u == raise_Y ∘ f always raises: X = 0 + X
            f: Term = TEmpty(ZERO) if len(parts) == 1 else (
                parts[1] if len(parts) == 2 else TComp(parts[1:]))
            s = self._fresh_sum(iid, x, (ZERO, x), (TEmpty(x), TId(x)))
            return InverseImage(iid, COMP_FLAVOR, base, cu, s,
                                (TEmpty(y), f), value_index=0, raise_index=1)
        # a value post-composed with a computation pulls back like the computation
        k = 0
        while k < len(parts) and decoration(parts[k]) is Deco.VALUE:
            k += 1
        if 0 < k < len(parts):
            rest = parts[k] if len(parts) - k == 1 else TComp(parts[k:])
            inner = self.inverse_image_comp(rest)
            u1 = self.normalize(mk_comp(*parts[:k], inner.u1))
            return InverseImage(iid, COMP_FLAVOR, base, cu, inner.sum,
                                tuple(u1 if i == inner.value_index else r
                                      for i, r in enumerate(inner.restrictions)),
                                value_index=inner.value_index,
                                raise_index=inner.raise_index)
        if isinstance(cu, TMatch) and cu.sum.arity == 2:
            cls = []
            for b in cu.branches:
                if decoration(b) is Deco.VALUE:
                    cls.append(("v", b))
                elif isinstance(comp_parts(b)[0], TEmpty):
                    bp = comp_parts(b)
                    f = TEmpty(ZERO) if len(bp) == 1 else (
                        bp[1] if len(bp) == 2 else TComp(bp[1:]))
                    cls.append(("r", f))
                else:
                    cls.append(("?", b))
            kinds = [c[0] for c in cls]
            if sorted(kinds) == ["r", "v"]:
                vi = kinds.index("v")
                ri = kinds.index("r")
                restr: list[Term] = [None, None]  # type: ignore[list-item]
                restr[vi] = cls[vi][1]
                restr[ri] = cls[ri][1]
                return InverseImage(iid, COMP_FLAVOR, base, cu, cu.sum,
                                    tuple(restr), value_index=vi, raise_index=ri)
        x1 = TInvSummand(iid, 0, f"{iid}.X1")
        x0 = TInvSummand(iid, 1, f"{iid}.X0")
        s = self._fresh_sum(iid, x, (x1, x0),
                            (TInvCoproj(iid, 0, x1, x), TInvCoproj(iid, 1, x0, x)))
        restr = (TRestrict(iid, 0, x1, y, Deco.VALUE),
                 TRestrict(iid, 1, x0, ZERO, Deco.COMPUTATION))
        return InverseImage(iid, COMP_FLAVOR, base, cu, s, restr,
                            value_index=0, raise_index=1)

    # exceptional flavor (the exceptional sum 0 = Σ P_i)

    def inverse_image_exc(self, u: Term, steps=None, pos="") -> InverseImage:
        if self.spec.logic is not Logic.DECORATED:
            raise KindMismatchError("the exceptional sum lives in the decorated logic")
        if target(u) != ZERO:
            raise TargetNotZeroError(f"{self.render(u)} does not map into 0")
        if decoration(u) is Deco.PLAIN:
            raise NotAComputationError(f"{self.render(u)} carries no decoration")
        if self.spec.exc_sum is None:
            self.spec.seal_exceptions()
        base = self.spec.exc_sum
        assert base is not None
        cu = self.canon(u)
        key = (EXC_FLAVOR, base.sum_id, ser(cu))
        ii = self._inv_cache.get(key)
        if ii is None:
            ii = self._build_exc_ii(base, cu)
            self._register_ii(key, ii)
        self._emit_ii(steps, pos, "exc-inverse-image", ii)
        return ii

    def _build_exc_ii(self, base: SumInfo, cu: Term) -> InverseImage:
        iid = f"inv[{_hash8(base.sum_id + '|' + ser(cu))}]"
        x = source(cu)
        k = base.arity
        if x == ZERO:
            # []_0 factors through no exception: every preimage part is empty
            return InverseImage(
                iid, EXC_FLAVOR, base, cu,
                self._fresh_sum(iid, ZERO, (ZERO,) * k, (TEmpty(ZERO),) * k),
                tuple(TEmpty(p) for p in base.summands))
        parts = comp_parts(cu)
        slot = None
        if isinstance(cu, TGen):
            for j, e in enumerate(self.spec.exceptions):
                if cu.name == e.name:
                    slot = (j, TId(x))
        elif (isinstance(parts[0], TGen)
              and all(decoration(p) is Deco.VALUE for p in parts[1:])):
            for j, e in enumerate(self.spec.exceptions):
                if parts[0].name == e.name:
                    v = parts[1] if len(parts) == 2 else TComp(parts[1:])
                    slot = (j, v)
        if slot is not None:
            j, v = slot
            summands = tuple(x if i == j else ZERO for i in range(k))
            cops = tuple(TId(x) if i == j else TEmpty(x) for i in range(k))
            restr = tuple(v if i == j else TEmpty(base.summands[i]) for i in range(k))
            return InverseImage(iid, EXC_FLAVOR, base, cu,
                                self._fresh_sum(iid, x, summands, cops), restr)
        summands = tuple(TInvSummand(iid, i, f"{iid}.X{i + 1}") for i in range(k))
        cops = tuple(TInvCoproj(iid, i, summands[i], x) for i in range(k))
        restr = tuple(TRestrict(iid, i, summands[i], base.summands[i], Deco.VALUE)
                      for i in range(k))
        return InverseImage(iid, EXC_FLAVOR, base, cu,
                            self._fresh_sum(iid, x, summands, cops), restr)


# ---------------------------------------------------------------------------
# trace replay


def replay(store: DerivationStore, steps: list[Step], map_term=None,
           depth: int = 8):
    """Re-validate a trace, optionally through a translation map.

    Rewrite steps must relate congruent terms in the target store;
    informational inverse-image steps must be constructible there (for a
    translated trace this is the mechanized reading of "a proof in the
    decorated logic is a proof in the basic logic which can be decorated").
    Returns a Report whose violations list the steps that do not replay.
    """
    from .core import Report

    report = Report()
    for i, st in enumerate(steps):
        if st.bt is None:
            continue
        try:
            bt = map_term(st.bt) if map_term else st.bt
        except ExcalcError as e:
            report.violations.append(f"step {i + 1} [{st.rule}]: untranslatable: {e}")
            continue
        if st.at is None:
            try:
                if st.rule == "inverse-image-comp":
                    base = store.plus_zero_sum(target(bt))
                    store.inverse_image_value(base, bt)
                elif st.rule == "exc-inverse-image":
                    zsum = next((s for s in store.spec.sums.values()
                                 if s.vertex == ZERO and s.declared), None)
                    if zsum is None:
                        raise IllFormedTermError("no vertex-0 sum in the target")
                    store.inverse_image_value(zsum, bt)
                else:
                    store.normalize(bt)
            except ExcalcError as e:
                report.violations.append(
                    f"step {i + 1} [{st.rule}]: inverse image does not replay: {e}")
            continue
        try:
            at = map_term(st.at) if map_term else st.at
            decision = store.equiv(bt, at, depth=depth, want_trace=False)
        except ExcalcError as e:
            report.violations.append(f"step {i + 1} [{st.rule}]: {e}")
            continue
        if not decision.yes:
            report.violations.append(
                f"step {i + 1} [{st.rule}]: {store.render(bt)} ==> "
                f"{store.render(at)} does not replay")
    return report


# ---------------------------------------------------------------------------
# operation-level API


def normalize(store: DerivationStore, t: Term) -> Term:
    return store.normalize(t)


def equiv(store: DerivationStore, t1: Term, t2: Term, depth: int | None = None) -> Decision:
    return store.equiv(t1, t2, depth)


def inverse_image(store: DerivationStore, s: SumInfo | str, u: Term) -> InverseImage:
    if isinstance(s, str):
        s = store.sum_by_id(s)
    return store.inverse_image_value(s, u)


def mk_match(store: DerivationStore, s: SumInfo | str, branches: list[Term],
             tgt: TypeExpr | None = None) -> Term:
    """Build the match [f_1 | ... | f_n] over a sum; registers its defining
    equations.  The empty sum gives the empty match (target required)."""
    if isinstance(s, str):
        s = store.sum_by_id(s)
    if s.kind == EXCEPTIONAL:
        raise KindMismatchError("the exceptional sum has no match property")
    if len(branches) != s.arity:
        raise BranchArityMismatchError(
            f"sum {s.sum_id} needs {s.arity} branches, got {len(branches)}")
    if s.arity == 0:
        if tgt is None:
            raise MissingTargetError("empty match needs an explicit target")
        return TEmpty(tgt)
    for i, b in enumerate(branches):
        if source(b) != s.summands[i]:
            raise SourceMismatchError(
                f"branch {i + 1} has source {type_display(source(b))}, summand is "
                f"{type_display(s.summands[i])}")
    tgts = {target(b) for b in branches}
    if len(tgts) > 1:
        raise TypeMismatchError("match branches disagree on target")
    m = TMatch(s, tuple(branches))
    for i, b in enumerate(branches):
        store.record_derived(mk_comp(m, s.coprojections[i]), b, "match")
    return m


def mk_case(store: DerivationStore, u: Term, s: SumInfo | str,
            branches: list[Term]) -> Term:
    """Case distinction over a value: the match over the inverse image of the
    sum along u."""
    if isinstance(s, str):
        s = store.sum_by_id(s)
    if store.spec.logic is Logic.DECORATED and decoration(u) is not Deco.VALUE:
        raise NotAValueError(f"case scrutinee {store.render(u)} must be a value")
    ii = store.inverse_image_value(s, u)
    if len(branches) != ii.sum.arity:
        raise BranchArityMismatchError(
            f"case needs {ii.sum.arity} branches, got {len(branches)}")
    for i, b in enumerate(branches):
        if source(b) != ii.sum.summands[i]:
            raise BranchMismatchError(
                f"case branch {i + 1} has source {type_display(source(b))}, "
                f"inverse-image summand is {type_display(ii.sum.summands[i])}")
    tgts = {target(b) for b in branches}
    if len(tgts) > 1:
        raise BranchMismatchError("case branches disagree on target")
    c = TCase(u, s, tuple(branches))
    for i, b in enumerate(branches):
        store.record_derived(mk_comp(c, ii.sum.coprojections[i]), b, "case")
    return c
