"""Human-readable rendering of types and terms, shared by traces and the DSL."""

from __future__ import annotations

from .core import (
    Logic,
    SumInfo,
    TCase,
    TCaseE,
    TCaseT,
    TComp,
    TEmpty,
    TGen,
    THandle,
    TId,
    TInvCoproj,
    TMatch,
    TRestrict,
    Term,
    type_display,
)


def cop_label(sum_info: SumInfo, i: int, logic: Logic, exc_names: tuple[str, ...]) -> str:
    if sum_info.cop_names:
        return sum_info.cop_names[i]
    return render_term(sum_info.coprojections[i], logic, exc_names)


def _exc_label(exc_names: tuple[str, ...], i: int) -> str:
    return exc_names[i] if i < len(exc_names) else f"exc{i + 1}"


def render_term(t: Term, logic: Logic = Logic.DECORATED,
                exc_names: tuple[str, ...] = ()) -> str:
    r = lambda x: render_term(x, logic, exc_names)
    if isinstance(t, TGen):
        return t.name
    if isinstance(t, TId):
        return f"id({type_display(t.ty)})"
    if isinstance(t, TEmpty):
        kw = "raise" if logic is Logic.DECORATED else "[]"
        return f"{kw}({type_display(t.tgt)})"
    if isinstance(t, TComp):
        return " . ".join(f"({r(p)})" if isinstance(p, THandle) else r(p) for p in t.parts)
    if isinstance(t, (TMatch, TCase)):
        inner = " | ".join(
            f"{cop_label(t.sum, i, logic, exc_names)} => {r(b)}"
            for i, b in enumerate(t.branches))
        head = f"case {r(t.u)} of " if isinstance(t, TCase) else ""
        if isinstance(t, TCase) and not t.branches and t.tgt is not None:
            return f"{head}[] : {type_display(t.tgt)}"
        return f"{head}[{inner}]"
    if isinstance(t, TCaseT):
        return f"case^t {r(t.u)} of [id => {r(t.f1)} | raise => {r(t.f0)}]"
    if isinstance(t, TCaseE):
        if t.items:
            items = " | ".join(f"{_exc_label(exc_names, i)} => {r(b)}" for i, b in t.items)
            return f"case^e {r(t.u)} of [{items}]"
        return f"case^e {r(t.u)} of [] : {type_display(t.tgt)}"
    if isinstance(t, THandle):
        u = f"({r(t.u)})" if isinstance(t.u, TComp) else r(t.u)
        items = ", ".join(f"{_exc_label(exc_names, i)} => {r(b)}" for i, b in t.items)
        return f"{u} handle [{items}]"
    if isinstance(t, TInvCoproj):
        return f"{t.invimage_id}.j{t.index + 1}"
    if isinstance(t, TRestrict):
        return f"{t.invimage_id}.r{t.index + 1}"
    raise AssertionError(f"unrenderable term {t!r}")
