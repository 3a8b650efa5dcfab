"""Seeded random decorated specifications and term pools for audits and tests."""

from __future__ import annotations

import random

from .core import (
    ZERO,
    Deco,
    Specification,
    TEmpty,
    TGen,
    THandle,
    TId,
    Term,
    TypeExpr,
    decoration,
    mk_comp,
    source,
    target,
)
from .deduction import DerivationStore

DEFAULT_SEED = 20259


def gen_spec_text(rng: random.Random, min_exceptions: int = 1) -> str:
    """One random decorated specification: <=3 types, <=4 generators,
    <=2 exceptions, sometimes a declared sum and an axiom."""
    lines = ["logic decorated;"]
    types = [f"T{i}" for i in range(rng.randint(1, 3))]
    lines += [f"type {t};" for t in types]
    gens: list[tuple[str, str, str, str]] = []
    for i in range(rng.randint(1, 4)):
        a, b = rng.choice(types), rng.choice(types)
        deco = rng.choice(["@value", "@value", "@computation"])
        lines.append(f"fun g{i} : {a} -> {b} {deco};")
        gens.append((f"g{i}", a, b, deco))
    if rng.random() < 0.35:
        lines.append(f"fun h0 : {rng.choice(types)} -> 0 @computation;")
    for i in range(rng.randint(min_exceptions, 2)):
        lines.append(f"exception e{i} of {rng.choice(types)};")
    if rng.random() < 0.5 and len(types) >= 2:
        a, b = rng.sample(types, 2)
        lines.append(f"sum V = c0: {a} + c1: {b};")
    if rng.random() < 0.25:
        values = [(n, a, b) for n, a, b, d in gens if d == "@value"]
        pairs = [(x, y) for x in values for y in values
                 if x[0] != y[0] and x[1] == y[1] and x[2] == y[2]]
        if pairs:
            x, y = rng.choice(pairs)
            lines.append(f"eq {x[0]} == {y[0]};")
    return "\n".join(lines) + "\n"


def gen_corpus(seed: int = DEFAULT_SEED, count: int = 20,
               min_exceptions: int = 1) -> list[str]:
    rng = random.Random(seed)
    return [gen_spec_text(rng, min_exceptions) for _ in range(count)]


# ---------------------------------------------------------------------------
# term pools over a parsed specification


def gen_chains(spec: Specification, max_len: int = 3) -> list[Term]:
    """All composable generator chains up to max_len, plus identities."""
    out: list[Term] = [TId(ty) for ty in spec.types.values()]
    gens = list(spec.gens.values())
    frontier: list[tuple[TGen, ...]] = [(g,) for g in gens]
    out.extend(gens)
    for _ in range(max_len - 1):
        grown = []
        for chain in frontier:
            for g in gens:
                if g.src == target(chain[0]):
                    grown.append((g,) + chain)
        out.extend(mk_comp(*c) for c in grown)
        frontier = grown
    return out


def pool(store: DerivationStore, max_len: int = 3) -> dict[str, list[Term]]:
    """Classified term pools: values, computations, raisers (into 0), and
    raise-compositions, deterministic order."""
    spec = store.spec
    chains = gen_chains(spec, max_len)
    values = [t for t in chains if decoration(t) is Deco.VALUE]
    comps = [t for t in chains if decoration(t) is Deco.COMPUTATION]
    raisers = [t for t in comps if target(t) == ZERO]
    raised = []
    for f in raisers:
        for ty in spec.types.values():
            raised.append(mk_comp(TEmpty(ty), f))
    return {"values": values, "computations": comps,
            "raisers": raisers, "raised": raised}


def chains_between(terms: list[Term], src: TypeExpr, tgt: TypeExpr) -> list[Term]:
    return [t for t in terms if source(t) == src and target(t) == tgt]


def sample_handles(store: DerivationStore, rng: random.Random,
                   pools: dict[str, list[Term]], count: int = 4) -> list[Term]:
    """Random well-typed handle terms over the pool's computations."""
    spec = store.spec
    out: list[Term] = []
    comps = pools["computations"] + pools["raised"]
    candidates = [u for u in comps if target(u) != ZERO]
    all_terms = pools["values"] + pools["computations"]
    for _ in range(count * 4):
        if len(out) >= count or not candidates:
            break
        u = rng.choice(candidates)
        y = target(u)
        branches = {}
        for e in spec.exceptions:
            if rng.random() < 0.6:
                opts = chains_between(all_terms, e.param, y)
                if opts:
                    branches[e.name] = rng.choice(opts)
        try:
            from .exceptions import mk_handle
            out.append(mk_handle(store, u, branches))
        except Exception:
            continue
    return out
