import sys
sys.path.insert(0, "src")

from excalc.core import Specification, Logic, Deco, TId, TEmpty, mk_comp
from excalc.deduction import DerivationStore, mk_case
from excalc.exceptions import mk_handle, mk_raise, raise_at, mk_case_e

spec = Specification(Logic.DECORATED)
unit = spec.add_type("Unit")
nat = spec.add_type("Nat")
z = spec.add_fun("z", unit, nat, Deco.VALUE)
s = spec.add_fun("s", nat, nat, Deco.VALUE)
nat_sum = spec.add_sum("Nat", [("s", nat), ("z", unit)])
t = spec.add_exception("t", unit)
spec.seal_exceptions()

store = DerivationStore(spec)

p_body = mk_case(store, TId(nat), nat_sum, [TId(nat), z])
p = spec.add_definition("p", p_body)
pp_body = mk_case(store, TId(nat), nat_sum, [TId(nat), raise_at(store, nat, "t")])
pp = spec.add_definition("p'", pp_body)
ppp_body = mk_handle(store, pp, {"t": z})
ppp = spec.add_definition("p''", ppp_body)
spec.freeze()

print("p normal:", store.render(store.normalize(p)))
print("p' normal:", store.render(store.normalize(pp)))
print("p'' normal:", store.render(store.normalize(ppp)))

d = store.equiv(ppp, p)
print("p'' == p:", d.verdict)
for i, st in enumerate(d.trace):
    print(f"  {i}. {st.line()}")

print()
d2 = store.equiv(pp, p)
print("p' == p:", d2.verdict, "depth_hit:", d2.depth_hit)

# predecessor equations
d3 = store.equiv(mk_comp(p, z), z)
print("p . z == z:", d3.verdict)
d4 = store.equiv(mk_comp(p, s), TId(nat))
print("p . s == id:", d4.verdict)

# w == z
w = mk_case_e(store, spec.gens["t"], {"t": z})
d5 = store.equiv(w, z)
print("w == z:", d5.verdict)

# propagation: g . raise . t == raise . t with g = p'
lhs = mk_comp(pp, mk_raise(nat), spec.gens["t"])
rhs = mk_comp(mk_raise(nat), spec.gens["t"])
d6 = store.equiv(lhs, rhs)
print("p' . raise . t == raise . t:", d6.verdict)
