"""Shared test utilities: fixture loading, model builders and independent oracles.

The oracles here deliberately avoid the package's own lattice and matching
code. They work from the frozen golden matrix below and from plain loops.
"""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Optional

from atm import fixture_path
from atm.footprint import AdversaryFootprint, AssetInfo, CapabilityClaim, Origin
from atm.kb import AttackEntry, KnowledgeBase, Requirement, Selector, load_kb_paths, load_seed_kb
from atm.model import SystemModel, model_from_dict, parse_model
from atm.taxonomy import AssetKind, Capability, EdgeMode

ACCEPTANCE_LINES: dict[int, str] = {}

CAP_ORDER = [
    "inspect", "partially-inspect", "indirectly-inspect", "monitor",
    "make-arbitrary-changes", "make-limited-changes", "influence", "contribute", "withhold",
]

# Reflexive-transitive closure of the implication generators, derived by hand
# and by an independent brute-force closure before the library existed.
# Row: stronger capability; column: weaker capability (CAP_ORDER).
GOLDEN = {
    "inspect":                "111100000",
    "partially-inspect":      "011100000",
    "indirectly-inspect":     "001100000",
    "monitor":                "000100000",
    "make-arbitrary-changes": "000011111",
    "make-limited-changes":   "000001110",
    "influence":              "000000100",
    "contribute":             "000000010",
    "withhold":               "000000001",
}


def golden_implies(stronger: str, weaker: str) -> bool:
    return GOLDEN[stronger][CAP_ORDER.index(weaker)] == "1"


def load_fixture(name: str) -> SystemModel:
    return parse_model((fixture_path(name) / "model.yaml").read_text())


def fixture_kb(name: str) -> KnowledgeBase:
    """Seed KB plus the fixture's own extension entries, if any."""
    ext = fixture_path(name) / "kb"
    if ext.is_dir():
        return load_kb_paths(["@seed", ext])
    return load_seed_kb()


FIXTURES = ("rag", "autorust", "backdoor", "example1", "example2", "extraction", "kb-probe")


def build_model(
    assets: Iterable[tuple],
    edges: Iterable[tuple] = (),
    vulns: Iterable[tuple] = (),
    stages: Iterable[tuple] = (("s", "deploy-inference"),),
    adversaries: Iterable[str] = (),
    name: str = "test",
) -> SystemModel:
    """Model from compact tuples.

    assets: (id, kind, stage[, variants]); edges: (id, mode, source, target[, override]);
    vulns: (id, stage, [(asset, capability), ...][, adversaries]).
    """
    doc = {
        "atm-model-version": 1,
        "name": name,
        "stages": [{"id": s, "kind": k} for s, k in stages],
        "assets": [],
        "edges": [],
        "vulnerabilities": [],
        "adversaries": [{"id": a} for a in adversaries],
    }
    for a in assets:
        item = {"id": a[0], "kind": a[1], "stage": a[2]}
        if len(a) > 3:
            item["variants"] = list(a[3])
        doc["assets"].append(item)
    for e in edges:
        item = {"id": e[0], "mode": e[1], "source": e[2], "target": e[3]}
        if len(e) > 4:
            item["override"] = dict(e[4])
        doc["edges"].append(item)
    for v in vulns:
        item = {"id": v[0], "stage": v[1], "claims": [{"asset": a, "capability": c} for a, c in v[2]]}
        if len(v) > 3:
            item["adversaries"] = list(v[3])
        doc["vulnerabilities"].append(item)
    return model_from_dict(doc)


def make_af(assets: Iterable[AssetInfo], claims: Iterable[tuple], adversary: Optional[str] = None) -> AdversaryFootprint:
    """Footprint of root claims: (asset, capability[, adversaries or None[, root]])."""
    out = []
    for i, c in enumerate(claims):
        asset, cap = c[0], Capability(c[1])
        advs = c[2] if len(c) > 2 else None
        root = c[3] if len(c) > 3 else f"v{i}"
        out.append(CapabilityClaim(f"{root}/{asset}/{cap.value}", asset, cap, Origin("vulnerability", root), root,
                                   None if advs is None else frozenset(advs)))
    return AdversaryFootprint("synthetic", adversary, tuple(out), tuple(assets))


def requirement(kind: str, cap: str, variants=(), stage_kind=None) -> Requirement:
    return Requirement(Selector(AssetKind.parse(kind), frozenset(variants), stage_kind), Capability(cap))


def attack(attack_id: str, *reqs: Requirement, impact=()) -> AttackEntry:
    return AttackEntry(attack_id, attack_id, tuple(reqs), tuple(impact))


# -- random models and small matcher instances ---------------------------

KINDS = ("dataset", "inputs", "outputs", "x:tool")
MODEL_KINDS = ("dataset", "model-parameters", "inputs", "outputs", "x:tool")
EDGE_MODE_NAMES = tuple(m.value for m in EdgeMode)
VARIANTS = ("training", "validation")
STAGE_KINDS = ("training", "deploy-inference")
ADVERSARIES = ("alice", "bob")


def random_model(rng: random.Random, n_vulns=None):
    n = rng.randint(1, 6)
    stages = (("s", "deploy-inference"), ("t", "training"))
    assets = [(f"a{i}", rng.choice(MODEL_KINDS), rng.choice("st")) for i in range(n)]
    edges = []
    for i in range(rng.randint(0, 10)):
        src, dst = rng.randrange(n), rng.randrange(n)
        if src == dst:
            continue
        override = {}
        if rng.random() < 0.2:
            override = {"make-arbitrary-changes": "influence"}
        edges.append((f"e{i}", rng.choice(EDGE_MODE_NAMES), f"a{src}", f"a{dst}", override))
    vulns = []
    for i in range(rng.randint(0, 4) if n_vulns is None else n_vulns):
        claims = [(f"a{rng.randrange(n)}", rng.choice(CAP_ORDER)) for _ in range(rng.randint(1, 2))]
        advs = rng.choice([(), ("alice",), ("bob",)])
        vulns.append((f"v{i}", "s", claims, advs) if advs else (f"v{i}", "s", claims))
    return build_model(assets, edges, vulns, stages, adversaries=("alice", "bob"))


def random_instance(rng: random.Random):
    n_assets = rng.randint(1, 6)
    assets = []
    for i in range(n_assets):
        variants = frozenset(v for v in VARIANTS if rng.random() < 0.4)
        assets.append(AssetInfo(f"a{i}", AssetKind.parse(rng.choice(KINDS)), variants, rng.choice(STAGE_KINDS)))
    claims = []
    for i in range(rng.randint(0, 5)):
        advs = rng.choice([None, None, ("alice",), ("bob",), ("alice", "bob")])
        claims.append((rng.choice(assets).id, rng.choice(CAP_ORDER), advs, f"v{i}"))
    af = make_af(assets, claims)
    entries = []
    for j in range(rng.randint(1, 4)):
        reqs = []
        for _ in range(rng.randint(1, 3)):
            variants = tuple(v for v in VARIANTS if rng.random() < 0.25)
            stage_kind = rng.choice([None, None, None, *STAGE_KINDS])
            reqs.append(requirement(rng.choice(KINDS), rng.choice(CAP_ORDER), variants, stage_kind))
        entries.append(attack(f"atk{j}", *reqs))
    return af, KnowledgeBase(tuple(entries))


def oracle_in_scope(af: AdversaryFootprint, entry: AttackEntry, collusion: bool = False) -> bool:
    """Brute force: try every tuple of claims, one per requirement."""
    assets = {a.id: a for a in af.assets}

    def satisfies(c, r) -> bool:
        a = assets[c.asset]
        if a.kind != r.selector.kind:
            return False
        if not set(r.selector.variants).issubset(a.variants):
            return False
        if r.selector.stage_kind is not None and r.selector.stage_kind != a.stage_kind:
            return False
        return golden_implies(c.capability.value, r.min_capability.value)

    def one_adversary(combo) -> bool:
        if collusion:
            return True
        for who in ("*",) + ADVERSARIES:
            if all(c.adversaries is None or who in c.adversaries for c in combo):
                return True
        return False

    for combo in itertools.product(af.claims, repeat=len(entry.requirements)):
        if all(satisfies(c, r) for c, r in zip(combo, entry.requirements)) and one_adversary(combo):
            return True
    return False
