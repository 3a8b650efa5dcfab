import sys, time
sys.path.insert(0, "src")
import random

from excalc.core import ZERO, Deco, TEmpty, decoration, mk_comp, source, target, Equation
from excalc.dsl import parse
from excalc.exceptions import mk_handle, mk_case_e
from excalc.fuzz import gen_corpus, pool, sample_handles, chains_between
from excalc.translate import expand
from excalc.models import enumerate_models, check_equation, soundness_audit
from excalc.core import BudgetExceededError

t0 = time.time()
corpus = gen_corpus(seed=20259, count=25)
rng = random.Random(7)
n_prop = n_handle_val = n_handle_raise = n_models = n_checks = 0
for idx, text in enumerate(corpus):
    res = parse(text, f"fuzz{idx}")
    store = res.store
    pools = pool(store)
    # propagation: g . raise_Y . f == raise_Z . f
    raisers = pools["raisers"][:6]
    comps = [c for c in pools["computations"] if target(c) != ZERO][:6]
    for f in raisers:
        for g in comps:
            y = source(g)
            lhs = mk_comp(g, TEmpty(y), f)
            rhs = mk_comp(TEmpty(target(g)), f)
            d = store.equiv(lhs, rhs, want_trace=False)
            assert d.yes, (idx, store.render(lhs))
            n_prop += 1
    # handle on values: u handle B == u
    handles = sample_handles(store, rng, pools, count=3)
    for h in handles:
        if decoration(h.u) is Deco.VALUE:
            d = store.equiv(h, h.u, want_trace=False)
            assert d.yes, (idx, store.render(h))
            n_handle_val += 1
    # value handles explicitly
    for v in pools["values"][:4]:
        try:
            h = mk_handle(store, v, {})
        except Exception:
            continue
        d = store.equiv(h, v, want_trace=False)
        assert d.yes, (idx, store.render(h))
        n_handle_val += 1
    # raised-exception reduction: (raise . u') handle B == case^e u' of B
    for u0 in raisers[:3]:
        for ty in list(res.spec.types.values())[:2]:
            u = mk_comp(TEmpty(ty), u0)
            branches = {}
            for e in res.spec.exceptions:
                opts = chains_between(pools["values"] + pools["computations"], e.param, ty)
                if opts and rng.random() < 0.7:
                    branches[e.name] = opts[0]
            try:
                h = mk_handle(store, u, branches)
                ce = mk_case_e(store, u0, branches, ty)
            except Exception:
                continue
            d = store.equiv(h, ce, want_trace=False)
            assert d.yes, (idx, store.render(h), store.render(ce))
            n_handle_raise += 1
    # expansion + audit on enumerated models
    tr = expand(store)
    models = []
    try:
        for m in enumerate_models(tr.target_store, 2, budget=20000):
            models.append(m)
            if len(models) >= 6:
                break
    except BudgetExceededError:
        pass
    n_models += len(models)
    report = soundness_audit(store, models, tr)
    bad = report.failures
    assert not bad, (idx, [(b.label, b.model, b.equation, b.witness) for b in bad][:3])
    n_checks += len(report.entries)

print(f"specs={len(corpus)} propagation={n_prop} handle_val={n_handle_val} "
      f"handle_raise={n_handle_raise} models={n_models} audit_checks={n_checks} "
      f"time={time.time()-t0:.1f}s")
