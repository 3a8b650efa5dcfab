import sys
sys.path.insert(0, "src")

from excalc.dsl import parse, parse_equation, print_specification
from excalc.translate import expand, undecorate
from excalc.models import parse_model, validate_model

text = open("src/excalc/data/nat.deco").read()
res = parse(text, "nat.deco")
printed = print_specification(res.store)
print("=== printed nat.deco ===")
print(printed)
res2 = parse(printed, "nat.deco.rt")
printed2 = print_specification(res2.store)
assert printed == printed2, "round-trip failed"
print("round-trip fixpoint: OK")

lhs, rhs = parse_equation("p'' == p", res)
d = res.store.equiv(lhs, rhs)
print("prove p'' == p:", d.verdict)

tr = expand(res.store)
xtext = print_specification(tr.target_store)
print("=== expanded ===")
print(xtext)
assert "fun p' : Nat -> Nat+E;" in xtext
xres = parse(xtext, "nat.expl")
xprinted = print_specification(xres.store)
assert xprinted == xtext, "expanded round-trip failed"
print("expanded round-trip: OK")

utr = undecorate(res.store)
utext = print_specification(utr.target_store)
print("=== undecorated ===")
print(utext)
assert "fun t : Unit -> 0;" in utext
ures = parse(utext, "nat.undeco")
assert print_specification(ures.store) == utext, "undecorated round-trip failed"
print("undecorated round-trip: OK")

mtext = open("src/excalc/data/mnat.model").read()
model = parse_model(mtext, tr.target_store, "mnat")
rep = validate_model(tr.target_store, model)
print("model violations:", rep.violations)
print("model warnings:", rep.warnings)

# prove in the reparsed explicit spec
xl, xr = parse_equation("p'' == p' handle [t => z]", res)
print("p'' == p' handle [t => z]:", res.store.equiv(xl, xr).verdict)
