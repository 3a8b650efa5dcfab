from __future__ import annotations

import pytest

from excalc.core import (
    Deco,
    DuplicateNameError,
    Equation,
    KindMismatchError,
    Logic,
    Specification,
    TEmpty,
    TId,
    TMatch,
    TypeMismatchError,
    UnknownReferenceError,
    build_specification,
    decoration_of,
    decoration,
    mk_comp,
    source,
    target,
    well_formed,
)
from excalc.deduction import DerivationStore, mk_case
from excalc.exceptions import raise_at


def test_build_nat_basic():
    spec = build_specification("basic", [
        ("type", "Unit"), ("type", "Nat"),
        ("fun", "z", "Unit", "Nat", None),
        ("fun", "s", "Nat", "Nat", None),
    ])
    assert len(spec.types) == 2
    assert len(spec.gens) == 2
    assert spec.equations == []
    assert well_formed(spec).ok


def test_build_empty_spec():
    spec = build_specification("basic", [])
    assert spec.types == {} and spec.gens == {}
    assert well_formed(spec).ok


def test_build_nat_deco_with_exception():
    spec = build_specification("decorated", [
        ("type", "Unit"), ("type", "Nat"),
        ("fun", "z", "Unit", "Nat", "value"),
        ("fun", "s", "Nat", "Nat", "value"),
        ("exception", "t", "Unit"),
    ])
    assert len(spec.exceptions) == 1
    assert spec.exc_sum is not None
    assert spec.exc_sum.kind == "exceptional"
    assert spec.exc_sum.summands == (spec.types["Unit"],)
    assert spec.gens["t"].deco is Deco.COMPUTATION


def test_duplicate_and_unknown_names():
    with pytest.raises(DuplicateNameError):
        build_specification("basic", [("type", "X"), ("type", "X")])
    with pytest.raises(UnknownReferenceError):
        build_specification("basic", [("fun", "f", "X", "X", None)])
    with pytest.raises(KindMismatchError):
        build_specification("basic", [("type", "X"), ("exception", "t", "X")])


def test_decoration_inference(nat_deco):
    spec, store = nat_deco.spec, nat_deco.store
    nat = spec.types["Nat"]
    p = spec.definitions["p"]
    pp = spec.definitions["p'"]
    assert decoration_of(spec, p) is Deco.VALUE
    assert decoration_of(spec, pp) is Deco.COMPUTATION
    assert decoration_of(spec, TId(nat)) is Deco.VALUE
    assert decoration_of(spec, spec.gens["t"]) is Deco.COMPUTATION
    assert decoration_of(spec, raise_at(store, nat, "t")) is Deco.COMPUTATION


def test_decoration_monotone_under_composition(nat_deco):
    spec, store = nat_deco.spec, nat_deco.store
    gens = list(spec.gens.values())
    pairs = [(g, f) for g in gens for f in gens if source(g) == target(f)]
    assert pairs
    for g, f in pairs:
        whole = decoration(mk_comp(g, f))
        expected = (Deco.COMPUTATION
                    if Deco.COMPUTATION in (decoration(g), decoration(f))
                    else Deco.VALUE)
        assert whole is expected


def test_plain_logic_decoration(nat_basic):
    spec = nat_basic.spec
    assert decoration_of(spec, spec.gens["s"]) is Deco.PLAIN


def test_well_formed_flags_bad_match(nat_basic):
    spec, store = nat_basic.spec, nat_basic.store
    nat_sum = next(s for s in spec.sums.values() if s.declared)
    nat, unit = spec.types["Nat"], spec.types["Unit"]
    bad = TMatch(nat_sum, (TId(nat), TId(unit)))  # branch targets disagree
    spec._frozen = False
    spec.equations.append(Equation(bad, bad, Deco.PLAIN))
    spec.declarations.append(("eq", len(spec.equations) - 1))
    spec._frozen = True
    report = well_formed(spec)
    assert any("disagree on target" in v for v in report.violations)


def test_well_formed_flags_exc_type_outside_explicit():
    spec = Specification(Logic.BASIC)
    x = spec.add_type("X")
    from excalc.core import EXC, TGen

    spec.gens["f"] = TGen("f", x, EXC)
    spec.declarations.append(("fun", "f"))
    spec.freeze()
    report = well_formed(spec)
    assert any("explicit" in v for v in report.violations)


def test_k0_decorated_spec_warns():
    spec = build_specification("decorated", [("type", "X"),
                                             ("fun", "f", "X", "X", "value")])
    report = well_formed(spec)
    assert report.ok
    assert any("k = 0" in w for w in report.warnings)


def test_exceptions_frozen_after_first_use():
    spec = Specification(Logic.DECORATED)
    u = spec.add_type("U")
    spec.add_exception("t", u)
    spec.seal_exceptions()
    with pytest.raises(KindMismatchError):
        spec.add_exception("t2", u)


def test_equation_endpoint_check():
    spec = build_specification("basic", [
        ("type", "X"), ("type", "Y"),
        ("fun", "f", "X", "Y", None),
    ])
    with pytest.raises(TypeMismatchError):
        Equation.of(spec.gens["f"], TId(spec.types["X"]))


def test_coercion_accepted_in_computation_positions(nat_deco):
    # a value branch is accepted where the constructor asks for computations
    spec, store = nat_deco.spec, nat_deco.store
    from excalc.exceptions import mk_case_e

    w = mk_case_e(store, spec.gens["t"], {"t": spec.gens["z"]})
    assert decoration_of(spec, w) is Deco.COMPUTATION


def test_empty_match_source_is_zero(nat_deco):
    from excalc.core import ZERO

    spec = nat_deco.spec
    r = TEmpty(spec.types["Nat"])
    assert source(r) == ZERO
    assert decoration(r) is Deco.VALUE
