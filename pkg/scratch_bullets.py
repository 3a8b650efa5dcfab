import sys
sys.path.insert(0, "src")
import random

from excalc.core import ZERO, Deco, TEmpty, TId, decoration, mk_comp, source, target
from excalc.dsl import parse
from excalc.exceptions import mk_handle, mk_case_e
from excalc.fuzz import gen_corpus, pool, chains_between

rng = random.Random(11)
n_dich_in = n_dich_out = n_cong = 0
for idx, text in enumerate(gen_corpus(seed=77, count=20)):
    res = parse(text, f"b{idx}")
    store, spec = res.store, res.spec
    pools = pool(store)
    all_terms = pools["values"] + pools["computations"]
    # dichotomy: u = raise_Y . t_j . u'' with u'' a value
    for j, e in enumerate(spec.exceptions):
        vopts = [v for v in pools["values"] if target(v) == e.param][:3]
        t_j = spec.gens[e.name]
        for u2 in vopts:
            for ty in list(spec.types.values())[:2]:
                u = mk_comp(TEmpty(ty), t_j, u2)
                yopts = chains_between(all_terms, e.param, ty)
                if not yopts:
                    continue
                f_j = yopts[0]
                # j in I: u handle B == f_j (the branch as in Def 4.8)
                h = mk_handle(store, u, {e.name: f_j})
                fixed = dict(h.items)[j]
                d = store.equiv(h, fixed, want_trace=False)
                assert d.yes, (idx, store.render(h))
                n_dich_in += 1
                # j not in I
                h2 = mk_handle(store, u, {})
                d2 = store.equiv(h2, u, want_trace=False)
                assert d2.yes, (idx, store.render(h2))
                n_dich_out += 1
    # congruence stability via an axiom u1 == u2
    comps = [c for c in pools["computations"] if target(c) != ZERO]
    if len(comps) >= 2 and spec.exceptions:
        pairs = [(a, b) for a in comps for b in comps
                 if a != b and source(a) == source(b) and target(a) == target(b)]
        if pairs:
            u1, u2 = pairs[0]
            spec._frozen = False
            spec.add_equation(u1, u2, label="cong-test")
            spec._frozen = True
            y = target(u1)
            branches = {}
            for e in spec.exceptions:
                opts = chains_between(all_terms, e.param, y)
                if opts:
                    branches[e.name] = opts[0]
            h1 = mk_handle(store, u1, branches)
            h2 = mk_handle(store, u2, branches)
            d = store.equiv(h1, h2, want_trace=False)
            assert d.yes, (idx, store.render(h1), store.render(h2))
            n_cong += 1

print(f"dichotomy_in={n_dich_in} dichotomy_out={n_dich_out} congruence={n_cong}")
