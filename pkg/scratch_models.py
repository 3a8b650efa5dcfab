import sys
sys.path.insert(0, "src")

from excalc.core import Specification, Logic, Deco, TId, mk_comp
from excalc.deduction import DerivationStore, mk_case
from excalc.exceptions import mk_handle, raise_at
from excalc.translate import expand, undecorate
from excalc.models import FiniteModel, validate_model, check_equation, enumerate_models
from excalc.render import render_term

spec = Specification(Logic.DECORATED)
unit = spec.add_type("Unit")
nat = spec.add_type("Nat")
z = spec.add_fun("z", unit, nat, Deco.VALUE)
s = spec.add_fun("s", nat, nat, Deco.VALUE)
nat_sum = spec.add_sum("Nat", [("s", nat), ("z", unit)])
t = spec.add_exception("t", unit)
spec.seal_exceptions()
store = DerivationStore(spec)
p = spec.add_definition("p", mk_case(store, TId(nat), nat_sum, [TId(nat), z]))
pp = spec.add_definition("p'", mk_case(store, TId(nat), nat_sum, [TId(nat), raise_at(store, nat, "t")]))
ppp = spec.add_definition("p''", mk_handle(store, pp, {"t": z}))
spec.freeze()

tr = expand(store)
xspec, xstore = tr.target, tr.target_store
print("expanded gens:")
for n, g in xspec.gens.items():
    from excalc.core import type_display
    print(f"  fun {n} : {type_display(g.src)} -> {type_display(g.tgt)}")

# truncated model {0..9}
N = 9
labels = tuple(str(i) for i in range(N + 1))
m = FiniteModel(
    xstore,
    {"Unit": ("*",), "Nat": labels},
    {"z": {"*": "0"}, "s": {str(i): str(min(i + 1, N)) for i in range(N + 1)},
     "t": {"*": "eps"}},
    ("eps",),
    "mnat",
)
rep = validate_model(xstore, m)
print("violations:", rep.violations)
print("warnings:", rep.warnings)

xp = xspec.gens["p"]
xpp = xspec.gens["p'"]
xppp = xspec.gens["p''"]
print("p'' expanded target:", render_term(xstore.normalize(xppp), Logic.EXPLICIT))
for n in range(10):
    r = m.eval(xp, str(n))
    r1 = m.eval(xpp, str(n))
    r2 = m.eval(xppp, str(n))
    from excalc.core import target as tgt_of
    print(n, "pre:", m.display_result(tgt_of(xp), r),
          " pre':", m.display_result(tgt_of(xpp), r1),
          " pre'':", m.display_result(tgt_of(xppp), r2))

# soundness of p''==p after expansion
from excalc.core import Equation
eq = tr.map_equation(Equation.of(ppp, p))
print("expanded p''==p pointwise:", check_equation(m, eq).holds)
eqbad = tr.map_equation(Equation.of(pp, p))
res = check_equation(m, eqbad)
print("expanded p'==p pointwise:", res.holds, "witness:", res.witness)
d = xstore.equiv(eq.lhs, eq.rhs)
print("explicit-store proof of expanded p''==p:", d.verdict)
print()

# undecorate
und = undecorate(store)
print("undecorated gens:", [(n, ) for n in und.target.gens])
from excalc.core import type_display
g = und.target.gens["t"]
print("t signature:", type_display(g.src), "->", type_display(g.tgt))
count = 0
for mdl in enumerate_models(und.target_store, 2):
    count += 1
    assert len(mdl.carriers["Unit"]) == 0, mdl.carriers
print("undecorated models with max_carrier=2:", count, "(all with empty Unit)")

# basic spec model count pins
bspec = Specification(Logic.BASIC)
bu = bspec.add_type("Unit")
bn = bspec.add_type("Nat")
bz = bspec.add_fun("z", bu, bn)
bs = bspec.add_fun("s", bn, bn)
bsum = bspec.add_sum("Nat", [("s", bn), ("z", bu)])
bspec.freeze()
bstore = DerivationStore(bspec)
print("nat.basic models max_carrier=2:", sum(1 for _ in enumerate_models(bstore, 2)))
print("nat.basic models max_carrier=1:", sum(1 for _ in enumerate_models(bstore, 1)))
