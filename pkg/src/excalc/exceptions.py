"""The decorated-logic exception layer: raise, the sum Y = Y+0, exceptional
cases with defaults, and handle as a derived construction."""

from __future__ import annotations

from .core import (
    ZERO,
    BranchSourceMismatchError,
    BranchTargetMismatchError,
    Deco,
    MissingTargetError,
    NotAComputationError,
    UnknownExceptionError,
    TCaseE,
    TCaseT,
    TEmpty,
    THandle,
    Term,
    TypeExpr,
    decoration,
    mk_comp,
    source,
    target,
    type_display,
)
from .deduction import DerivationStore, InverseImage


def mk_raise(y: TypeExpr) -> Term:
    """raise_Y, the polymorphic value []_Y : 0 -> Y."""
    return TEmpty(y)


def raise_at(store: DerivationStore, y: TypeExpr, exc_name: str) -> Term:
    """Raise a declared exception in the type Y: raise_Y ∘ t : P -> Y."""
    store.spec.exception_index(exc_name)  # raises UnknownExceptionError
    t = store.spec.gens[exc_name]
    return mk_comp(TEmpty(y), t)


def inverse_image_comp(store: DerivationStore, u: Term) -> InverseImage:
    """Inverse image of the sum Y = Y+0 along a computation u : X -> Y."""
    return store.inverse_image_comp(u)


def exceptional_inverse_image(store: DerivationStore, u: Term) -> InverseImage:
    """Inverse image of the exceptional sum along a computation u : X -> 0."""
    return store.inverse_image_exc(u)


def mk_case_t(store: DerivationStore, u: Term, f1: Term, f0: Term) -> Term:
    """case^t u of [id => f1 | raise => f0] for a computation u : X -> Y."""
    if decoration(u) is Deco.PLAIN:
        raise NotAComputationError("case^t needs a decorated scrutinee")
    ii = store.inverse_image_comp(u)
    x1 = ii.sum.summands[ii.value_index]
    x0 = ii.sum.summands[ii.raise_index]
    if source(f1) != x1:
        raise BranchSourceMismatchError(
            f"id-branch source {type_display(source(f1))} is not {type_display(x1)}")
    if source(f0) != x0:
        raise BranchSourceMismatchError(
            f"raise-branch source {type_display(source(f0))} is not {type_display(x0)}")
    if target(f1) != target(f0):
        raise BranchTargetMismatchError("case^t branches disagree on target")
    return TCaseT(u, f1, f0)


def _fix_exc_branches(store: DerivationStore, ii: InverseImage,
                      branches: dict, tgt: TypeExpr | None) -> tuple[tuple[int, Term], ...]:
    """Resolve branch keys to exception indices; branches written against P_i
    are pre-composed with the restriction u_i."""
    spec = store.spec
    items: list[tuple[int, Term]] = []
    for key in branches:
        i = spec.exception_index(key) if isinstance(key, str) else key
        f = branches[key]
        want = ii.sum.summands[i]
        if source(f) == want:
            fixed = f
        elif source(f) == spec.exceptions[i].param:
            fixed = mk_comp(f, ii.restrictions[i])
        else:
            raise BranchSourceMismatchError(
                f"branch for {spec.exceptions[i].name} has source "
                f"{type_display(source(f))}; expected {type_display(want)} "
                f"or {type_display(spec.exceptions[i].param)}")
        items.append((i, fixed))
    items.sort(key=lambda p: p[0])
    tgts = {target(f) for _, f in items}
    if tgt is not None:
        tgts.add(tgt)
    if len(tgts) > 1:
        raise BranchTargetMismatchError("exceptional branches disagree on target")
    if not tgts:
        raise MissingTargetError("exceptional case with no branches needs a target")
    return tuple(items)


def mk_case_e(store: DerivationStore, u: Term, branches: dict,
              tgt: TypeExpr | None = None) -> Term:
    """case^e u of [t_i => f_i], defaults re-raising for i outside the map."""
    if decoration(u) is Deco.PLAIN:
        raise NotAComputationError("case^e needs a decorated scrutinee")
    if target(u) != ZERO:
        raise NotAComputationError("case^e scrutinee must map into 0")
    if not branches and tgt is None:
        raise MissingTargetError("case^e with an empty branch set needs an explicit target")
    if not store.spec.exceptions:
        return TCaseE(u, (), tgt)  # k = 0: the empty exceptional sum
    ii = store.inverse_image_exc(u)
    items = _fix_exc_branches(store, ii, branches, tgt)
    out_tgt = tgt if tgt is not None else target(items[0][1])
    return TCaseE(u, items, out_tgt)


def mk_handle(store: DerivationStore, u: Term, branches: dict) -> Term:
    """u handle [t_i => f_i]: a case over the computation u wrapping an
    exceptional case over its raising part."""
    if decoration(u) is Deco.PLAIN:
        raise NotAComputationError("handle needs a decorated scrutinee")
    ii = store.inverse_image_comp(u)
    if store.spec.exceptions:
        eii = store.inverse_image_exc(ii.u0)
        items = _fix_exc_branches(store, eii, branches, target(u))
    elif branches:
        raise UnknownExceptionError("handle branches in a specification without exceptions")
    else:
        items = ()
    handle = THandle(u, items)
    unfolded = store.normalize(handle)
    store.record_derived(handle, unfolded, "handle")
    return handle
