"""The two syntactic logic morphisms out of the decorated logic:
undecoration (forget decorations, to the basic logic) and expansion
(computations X -> Y become functions X -> Y+E, to the explicit logic).

Generated inverse images are translated and seeded into the target store's
cache under their native keys, so both worlds agree on the fresh types and
every decorated proof step has a target-side counterpart.
"""

from __future__ import annotations

from .core import (
    EXC,
    ZERO,
    Deco,
    Equation,
    ExcalcError,
    KindMismatchError,
    Logic,
    Specification,
    SumInfo,
    TCase,
    TCaseE,
    TCaseT,
    TComp,
    TEmpty,
    TExc,
    TGen,
    THandle,
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
    comp_parts,
    decoration,
    mk_comp,
    source,
    target,
    type_display,
)
from .deduction import VALUE_FLAVOR, DerivationStore, InverseImage, _hash8, ser


class TranslationResult:
    """Target specification plus total term/equation maps and provenance."""

    def __init__(self, kind: str, source_store: DerivationStore,
                 target_store: DerivationStore, map_term, map_equation, map_type,
                 notes: list[str]):
        self.kind = kind
        self.source_store = source_store
        self.target_store = target_store
        self.target = target_store.spec
        self.map_term = map_term
        self.map_equation = map_equation
        self.map_type = map_type
        self.notes = notes


class _Translator:
    def __init__(self, store: DerivationStore, target_logic: Logic):
        if store.spec.logic is not Logic.DECORATED:
            raise KindMismatchError("translation source must be a decorated specification")
        self.src = store
        self.spec = store.spec
        self.tgt = Specification(target_logic)
        self.dst: DerivationStore | None = None
        self.sum_map: dict[str, SumInfo] = {}
        self.ii_map: dict[str, InverseImage] = {}
        self.notes: list[str] = []

    # -- types ---------------------------------------------------------

    def map_type(self, ty: TypeExpr) -> TypeExpr:
        if isinstance(ty, TNamed):
            return self.tgt.types[ty.name]
        if isinstance(ty, TZero):
            return ZERO
        if isinstance(ty, TSumVertex):
            return self.map_sum_by_id(ty.sum_id).vertex
        if isinstance(ty, TInvSummand):
            tii = self.map_ii(self.src.invimage_by_id(ty.invimage_id))
            idx = self._slot(self.src.invimage_by_id(ty.invimage_id), ty.index)
            return tii.sum.summands[idx]
        raise ExcalcError(f"untranslatable type {ty!r}")

    def map_sum_by_id(self, sum_id: str) -> SumInfo:
        got = self.sum_map.get(sum_id)
        if got is not None:
            return got
        if sum_id.startswith("plus0@"):
            src_sum = self.src.sum_by_id(sum_id)
            out = self.dst.plus_zero_sum(self.map_type(src_sum.vertex))
        elif sum_id.endswith(".sum"):
            iid = sum_id[:-len(".sum")]
            out = self.map_ii(self.src.invimage_by_id(iid)).sum
        else:
            raise ExcalcError(f"sum {sum_id} was not translated")
        self.sum_map[sum_id] = out
        return out

    def map_sum(self, s: SumInfo) -> SumInfo:
        return self.map_sum_by_id(s.sum_id)

    # -- inverse images --------------------------------------------------

    def _slot(self, ii: InverseImage, index: int) -> int:
        """Target slot of a source slot; computation-flavor images are
        reordered value-side first (fresh ones are already in that order)."""
        if ii.value_index is None:
            return index
        return 0 if index == ii.value_index else 1

    def _map_base(self, ii: InverseImage) -> SumInfo:
        raise NotImplementedError

    def _restriction_target(self, base: SumInfo, slot: int) -> TypeExpr:
        return base.summands[slot]

    def map_ii(self, ii: InverseImage) -> InverseImage:
        got = self.ii_map.get(ii.iid)
        if got is not None:
            return got
        base = self._map_base(ii)
        along = self.map_restriction_term(ii.along)
        iid = f"inv[{_hash8(base.sum_id + '|' + ser(self.dst.canon(along)))}]"
        order = (list(range(ii.sum.arity)) if ii.value_index is None
                 else [ii.value_index, ii.raise_index])
        summands: list[TypeExpr] = []
        cops: list[Term] = []
        restrictions: list[Term] = []
        for k, p in enumerate(order):
            sm = ii.sum.summands[p]
            if isinstance(sm, TInvSummand) and sm.invimage_id == ii.iid:
                summands.append(TInvSummand(iid, k, f"{iid}.X{k + 1}"))
            else:
                summands.append(self.map_type(sm))
            c = ii.sum.coprojections[p]
            if isinstance(c, TInvCoproj) and c.invimage_id == ii.iid:
                cops.append(TInvCoproj(iid, k, summands[k], self.map_type(source(ii.along))))
            else:
                cops.append(self.map_value_term(c))
            r = ii.restrictions[p]
            if isinstance(r, TRestrict) and r.invimage_id == ii.iid:
                restrictions.append(TRestrict(iid, k, summands[k],
                                              self._restriction_target(base, k), Deco.PLAIN))
            else:
                restrictions.append(self.map_restriction_term(r))
        src_sum = ii.sum
        if (src_sum.sum_id in self.spec.sums
                and tuple(summands) == tuple(self.map_type(x) for x in src_sum.summands)
                and order == list(range(src_sum.arity))):
            new_sum = self.map_sum(src_sum)
        else:
            new_sum = SumInfo(f"{iid}.sum", self.map_type(source(ii.along)),
                              tuple(summands), tuple(cops))
        out = InverseImage(iid, VALUE_FLAVOR, base, along, new_sum, tuple(restrictions))
        self.ii_map[ii.iid] = out
        self.sum_map[src_sum.sum_id] = new_sum
        self.dst.seed_invimage(base, along, out)
        return out

    def map_value_term(self, t: Term) -> Term:
        raise NotImplementedError

    def map_restriction_term(self, t: Term) -> Term:
        """How restriction-position terms translate (value vs computation
        sensitive for the expansion)."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# undecoration


class _Undecorator(_Translator):
    def __init__(self, store: DerivationStore):
        super().__init__(store, Logic.BASIC)
        spec = self.spec
        for name in spec.types:  # includes sum-introduced vertex types
            self.tgt.add_type(name)
        deferred: list[tuple] = []
        for decl in spec.declarations:
            tag = decl[0]
            if tag == "type":
                pass
            elif tag == "fun":
                g = spec.gens[decl[1]]
                self.tgt.add_fun(g.name, self.map_type(g.src), self.map_type(g.tgt))
            elif tag == "sum":
                s = spec.sums[decl[1]]
                self._copy_sum(s)
            elif tag == "exception":
                e = next(x for x in spec.exceptions if x.name == decl[1])
                self.tgt.add_fun(e.name, self.map_type(e.param), ZERO)
                self.notes.append(f"exception {e.name} becomes a plain function "
                                  f"{e.name} : {type_display(e.param)} -> 0")
            elif tag == "def":
                g = spec.gens[decl[1]]
                self.tgt.add_fun(g.name, self.map_type(g.src), self.map_type(g.tgt))
                deferred.append(decl)
            else:
                deferred.append(decl)
        if spec.exc_sum is not None:
            zsum = self.tgt.add_sum("0", [(e.name, self.map_type(e.param))
                                          for e in spec.exceptions])
            self.sum_map[spec.exc_sum.sum_id] = zsum
            self.notes.append("the exceptional sum becomes a plain sum with vertex 0")
        self.dst = DerivationStore(self.tgt)
        for decl in deferred:
            if decl[0] == "eq":
                eq = spec.equations[decl[1]]
                self.tgt.add_equation(self.map_term(eq.lhs), self.map_term(eq.rhs),
                                      eq.label)
            elif decl[0] == "def":
                eq = spec.equations[decl[2]]
                self.tgt.add_equation(self.map_term(eq.lhs), self.map_term(eq.rhs),
                                      eq.label)
        self.tgt.freeze()

    def _copy_sum(self, s: SumInfo) -> None:
        if isinstance(s.vertex, TNamed):
            vertex_name: str | None = s.vertex.name
            display = None
        elif isinstance(s.vertex, TZero):
            vertex_name = "0"
            display = None
        else:
            vertex_name, display = None, type_display(s.vertex)
        out = self.tgt.add_sum(vertex_name,
                               [(n, self.map_type(t)) for n, t in zip(s.cop_names, s.summands)],
                               display)
        self.sum_map[s.sum_id] = out

    def _map_base(self, ii: InverseImage) -> SumInfo:
        if ii.flavor == "computation":
            return self.dst.plus_zero_sum(self.map_type(ii.base_sum.vertex))
        return self.map_sum(ii.base_sum)

    def map_value_term(self, t: Term) -> Term:
        return self.map_term(t)

    def map_restriction_term(self, t: Term) -> Term:
        return self.map_term(t)

    def map_term(self, t: Term) -> Term:
        m = self.map_term
        if isinstance(t, TGen):
            return self.tgt.gens[t.name]
        if isinstance(t, TId):
            return TId(self.map_type(t.ty))
        if isinstance(t, TEmpty):
            return TEmpty(self.map_type(t.tgt))
        if isinstance(t, TComp):
            return mk_comp(*(m(p) for p in t.parts))
        if isinstance(t, TMatch):
            return TMatch(self.map_sum(t.sum), tuple(m(b) for b in t.branches))
        if isinstance(t, TCase):
            return TCase(m(t.u), self.map_sum(t.sum), tuple(m(b) for b in t.branches),
                         self.map_type(target(t)) if not t.branches else None)
        if isinstance(t, TCaseT):
            ii = self.src.inverse_image_comp(t.u)
            self.map_ii(ii)
            base = self.dst.plus_zero_sum(self.map_type(target(t.u)))
            return TCase(m(t.u), base, (m(t.f1), m(t.f0)))
        if isinstance(t, TCaseE):
            return self._map_case_e(t.u, t.items, target(t))
        if isinstance(t, THandle):
            ii = self.src.inverse_image_comp(t.u)
            y = target(t.u)
            f = TCaseE(ii.u0, t.items, y)
            return self.map_term(TCaseT(t.u, ii.u1, f))
        if isinstance(t, TInvCoproj):
            sii = self.src.invimage_by_id(t.invimage_id)
            tii = self.map_ii(sii)
            k = self._slot(sii, t.index)
            return tii.sum.coprojections[k]
        if isinstance(t, TRestrict):
            sii = self.src.invimage_by_id(t.invimage_id)
            tii = self.map_ii(sii)
            return tii.restrictions[self._slot(sii, t.index)]
        raise ExcalcError(f"untranslatable term {t!r}")

    def _map_case_e(self, u: Term, items, y: TypeExpr) -> Term:
        zsum = self.sum_map[self.spec.exc_sum.sum_id]
        if not self.spec.exceptions:
            return TCase(self.map_term(u), zsum, (), self.map_type(y))
        eii = self.src.inverse_image_exc(u)
        self.map_ii(eii)
        given = dict(items)
        branches = []
        for i in range(eii.sum.arity):
            b = given.get(i, mk_comp(TEmpty(y), u, eii.sum.coprojections[i]))
            branches.append(self.map_term(b))
        return TCase(self.map_term(u), zsum, tuple(branches))

    def map_equation(self, eq: Equation) -> Equation:
        return Equation(self.map_term(eq.lhs), self.map_term(eq.rhs),
                        Deco.PLAIN, eq.origin, eq.label)


def undecorate(store: DerivationStore) -> TranslationResult:
    """Forget the decorations: values and computations become plain functions."""
    tr = _Undecorator(store)
    return TranslationResult("undecorate", store, tr.dst, tr.map_term,
                             tr.map_equation, tr.map_type, tr.notes)


# ---------------------------------------------------------------------------
# expansion


class _Expander(_Translator):
    def __init__(self, store: DerivationStore):
        super().__init__(store, Logic.EXPLICIT)
        spec = self.spec
        self.plus_e: dict[TypeExpr, SumInfo] = {}
        for name in spec.types:  # includes sum-introduced vertex types
            self.tgt.add_type(name)
        esum = self.tgt.add_sum("E", [(e.name, self.map_type(e.param))
                                      for e in spec.exceptions])
        self.esum = esum
        self.sum_map[spec.exc_sum.sum_id] = esum
        self.notes.append("exceptions become the coprojections of the sum E"
                          if spec.exceptions else "no exceptions: E is the empty sum")
        for name in spec.types:
            self._declare_plus_e(self.tgt.types[name])
        deferred: list[tuple] = []
        for decl in spec.declarations:
            tag = decl[0]
            if tag in ("type", "exception"):
                continue
            if tag == "fun":
                self._copy_fun(spec.gens[decl[1]])
            elif tag == "sum":
                s = spec.sums[decl[1]]
                if s.kind != "exceptional":
                    self._copy_sum(s)
            elif tag == "def":
                self._copy_fun(spec.gens[decl[1]])
                deferred.append(decl)
            else:
                deferred.append(decl)
        self.dst = DerivationStore(self.tgt)
        for decl in deferred:
            idx = decl[1] if decl[0] == "eq" else decl[2]
            eq = spec.equations[idx]
            mapped = self.map_equation(eq)
            self.tgt.add_equation(mapped.lhs, mapped.rhs, eq.label)
        self.tgt.freeze()

    def _declare_plus_e(self, ty: TypeExpr) -> None:
        if ty in self.plus_e:
            return
        d = type_display(ty)
        s = self.tgt.add_sum(None, [(f"inl@{d}", ty), (f"inr@{d}", EXC)],
                             display=f"{d}+E")
        self.plus_e[ty] = s
        self.notes.append(f"declared sum {d}+E with coprojections inl@{d}, inr@{d}")

    def _copy_sum(self, s: SumInfo) -> None:
        if isinstance(s.vertex, TNamed):
            vertex_name: str | None = s.vertex.name
            display = None
        elif isinstance(s.vertex, TZero):
            vertex_name, display = "0", None
        else:
            vertex_name, display = None, type_display(s.vertex)
        out = self.tgt.add_sum(vertex_name,
                               [(n, self.map_type(t)) for n, t in zip(s.cop_names, s.summands)],
                               display)
        self.sum_map[s.sum_id] = out
        if not isinstance(out.vertex, (TZero, TExc)):
            self._declare_plus_e(out.vertex)

    def _copy_fun(self, g: TGen) -> None:
        if g.deco is Deco.VALUE:
            self.tgt.add_fun(g.name, self.map_type(g.src), self.map_type(g.tgt))
        else:
            self.tgt.add_fun(g.name, self.map_type(g.src), self.comp_target(g.tgt))
            self.notes.append(
                f"computation {g.name} : {type_display(g.src)} -> {type_display(g.tgt)} "
                f"becomes a function into {type_display(self.comp_target(g.tgt))}")

    def comp_target(self, y: TypeExpr) -> TypeExpr:
        """The expanded target of a computation into y: y+E, or E when y = 0."""
        if isinstance(y, TZero):
            return EXC
        my = self.map_type(y)
        if my not in self.plus_e:
            raise ExcalcError(f"no Y+E sum declared for {type_display(my)}")
        return self.plus_e[my].vertex

    def in_y(self, y: TypeExpr) -> Term:
        return self.plus_e[self.map_type(y)].coprojections[0]

    def in_e(self, y: TypeExpr) -> Term:
        return self.plus_e[self.map_type(y)].coprojections[1]

    def _map_base(self, ii: InverseImage) -> SumInfo:
        if ii.flavor == "computation":
            return self.plus_e[self.map_type(ii.base_sum.vertex)]
        if ii.flavor == "exceptional":
            return self.esum
        return self.map_sum(ii.base_sum)

    def map_value_term(self, t: Term) -> Term:
        return self.map_value(t)

    def map_restriction_term(self, t: Term) -> Term:
        if decoration(t) is Deco.VALUE:
            return self.map_value(t)
        return self.map_comp(t)

    # -- values keep their signatures ------------------------------------

    def map_value(self, t: Term) -> Term:
        if decoration(t) is not Deco.VALUE:
            raise ExcalcError(f"not a value: {self.src.render(t)}")
        m = self.map_value
        if isinstance(t, TGen):
            return self.tgt.gens[t.name]
        if isinstance(t, TId):
            return TId(self.map_type(t.ty))
        if isinstance(t, TEmpty):
            return TEmpty(self.map_type(t.tgt))
        if isinstance(t, TComp):
            return mk_comp(*(m(p) for p in t.parts))
        if isinstance(t, TMatch):
            return TMatch(self.map_sum(t.sum), tuple(m(b) for b in t.branches))
        if isinstance(t, TCase):
            return TCase(m(t.u), self.map_sum(t.sum), tuple(m(b) for b in t.branches),
                         self.map_type(target(t)) if not t.branches else None)
        if isinstance(t, TInvCoproj):
            sii = self.src.invimage_by_id(t.invimage_id)
            tii = self.map_ii(sii)
            return tii.sum.coprojections[self._slot(sii, t.index)]
        if isinstance(t, TRestrict):
            sii = self.src.invimage_by_id(t.invimage_id)
            tii = self.map_ii(sii)
            return tii.restrictions[self._slot(sii, t.index)]
        raise ExcalcError(f"untranslatable value {t!r}")

    # -- computations go to X -> Y+E --------------------------------------

    def coerce(self, t: Term) -> Term:
        """A value used as a computation: in_Y ∘ v (or []_E ∘ v into 0)."""
        y = target(t)
        v = self.map_value(t)
        if isinstance(y, TZero):
            return mk_comp(TEmpty(EXC), v) if not isinstance(v, TEmpty) else TEmpty(EXC)
        return mk_comp(self.in_y(y), v)

    def map_comp(self, t: Term) -> Term:
        if decoration(t) is Deco.VALUE:
            return self.coerce(t)
        if isinstance(t, TGen):
            return self.tgt.gens[t.name]
        if isinstance(t, TComp):
            return self._fold(list(t.parts))
        if isinstance(t, TMatch):
            return TMatch(self.map_sum(t.sum), tuple(self.map_comp(b) for b in t.branches))
        if isinstance(t, TCase):
            return TCase(self.map_value(t.u), self.map_sum(t.sum),
                         tuple(self.map_comp(b) for b in t.branches),
                         self.comp_target(target(t)) if not t.branches else None)
        if isinstance(t, TCaseT):
            ii = self.src.inverse_image_comp(t.u)
            self.map_ii(ii)
            base = self.plus_e[self.map_type(target(t.u))]
            return TCase(self.map_comp(t.u), base,
                         (self.map_comp(t.f1), self.map_comp(t.f0)))
        if isinstance(t, TCaseE):
            return self._map_case_e(t.u, t.items, target(t))
        if isinstance(t, THandle):
            ii = self.src.inverse_image_comp(t.u)
            y = target(t.u)
            f = TCaseE(ii.u0, t.items, y)
            return self.map_comp(TCaseT(t.u, ii.u1, f))
        if isinstance(t, TRestrict):
            sii = self.src.invimage_by_id(t.invimage_id)
            tii = self.map_ii(sii)
            return tii.restrictions[self._slot(sii, t.index)]
        raise ExcalcError(f"untranslatable computation {t!r}")

    def _map_case_e(self, u: Term, items, y: TypeExpr) -> Term:
        if not self.spec.exceptions:
            return TCase(self.map_comp(u), self.esum, (), self.comp_target(y))
        eii = self.src.inverse_image_exc(u)
        self.map_ii(eii)
        given = dict(items)
        branches = []
        for i in range(eii.sum.arity):
            b = given.get(i, mk_comp(TEmpty(y), u, eii.sum.coprojections[i]))
            branches.append(self.map_comp(b))
        return TCase(self.map_comp(u), self.esum, tuple(branches))

    def _fold(self, parts: list[Term]) -> Term:
        """Kleisli-style composition: g∘f becomes [g | in_E] ∘ f."""
        q = parts[-1]
        if len(parts) == 1:
            return self.map_comp(q)
        rest = parts[:-1]
        if decoration(q) is Deco.VALUE:
            return mk_comp(self._fold(rest), self.map_value(q))
        mid = target(q)
        eq = self.map_comp(q)
        z = target(parts[0])
        if isinstance(mid, TZero):
            # the whole composition raises whatever q raises
            if isinstance(z, TZero):
                return eq
            return mk_comp(self.in_e(z), eq)
        rest_term = rest[0] if len(rest) == 1 else TComp(tuple(rest))
        br1 = self.map_comp(rest_term)
        br2: Term = self.in_e(z) if not isinstance(z, TZero) else TId(EXC)
        return mk_comp(TMatch(self.plus_e[self.map_type(mid)], (br1, br2)), eq)

    def map_term(self, t: Term) -> Term:
        return self.map_value(t) if decoration(t) is Deco.VALUE else self.map_comp(t)

    def map_equation(self, eq: Equation) -> Equation:
        if eq.level is Deco.VALUE:
            lhs, rhs = self.map_value(eq.lhs), self.map_value(eq.rhs)
        else:
            lhs, rhs = self.map_comp(eq.lhs), self.map_comp(eq.rhs)
        return Equation(lhs, rhs, Deco.PLAIN, eq.origin, eq.label)


def expand(store: DerivationStore) -> TranslationResult:
    """Add the distinguished type E and send computations X -> Y to X -> Y+E."""
    tr = _Expander(store)
    return TranslationResult("expand", store, tr.dst, tr.map_term,
                             tr.map_equation, tr.map_type, tr.notes)
