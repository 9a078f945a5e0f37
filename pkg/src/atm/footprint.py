"""Adversary footprint: the closed set of capability claims over a model.

Claims are seeded from vulnerabilities and assumptions, then pushed along
the model's edges until nothing new appears. Each claim keeps the edge and
parent it came from, so any derived claim can be traced back to the
vulnerability, assumption, or attack impact at its root.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from atm import kernels
from atm.model import Diagnostic, SystemModel, UnknownIdentifierError
from atm.taxonomy import CAPABILITIES, AssetKind, Capability

SAFETY_ROUNDS = 10_000

ORIGIN_KINDS = ("vulnerability", "assumption", "derived", "attack-impact")


class PropagationError(RuntimeError):
    """Internal error: propagation did not converge within the safety cap."""

    def __init__(self, diagnostic: Diagnostic) -> None:
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


@dataclass(frozen=True, order=True)
class Origin:
    kind: str
    ref: str  # source id, edge id, or attack id
    parent: str = ""  # parent claim id (derived) or enabling vector id (attack-impact)

    @property
    def is_root(self) -> bool:
        return self.kind != "derived"


@dataclass(frozen=True)
class CapabilityClaim:
    id: str
    asset: str
    capability: Capability
    origin: Origin
    root: str
    adversaries: Optional[frozenset[str]] = None  # None: any adversary
    constraints: str = ""

    def sort_key(self) -> tuple:
        return (self.asset, self.capability.value, self.origin.kind, self.origin.ref, self.origin.parent, self.id)

    def available_to(self, adversary: str) -> bool:
        return self.adversaries is None or adversary in self.adversaries


@dataclass(frozen=True)
class AssetInfo:
    """What the matcher needs to know about an asset, detached from the model."""

    id: str
    kind: AssetKind
    variants: frozenset[str] = frozenset()
    stage_kind: str = ""


def asset_catalog(m: SystemModel) -> tuple[AssetInfo, ...]:
    return tuple(sorted(
        (AssetInfo(a.id, a.kind, a.variants, m.stage(a.stage).kind) for a in m.assets),
        key=lambda a: a.id,
    ))


def claim_id(root: str, asset: str, cap: Capability) -> str:
    return f"{root}/{asset}/{cap.value}"


def impact_root(attack_id: str) -> str:
    return f"attack:{attack_id}"


@dataclass(frozen=True)
class AdversaryFootprint:
    model_name: str
    adversary: Optional[str]  # None: all adversaries
    claims: tuple[CapabilityClaim, ...] = ()
    assets: tuple[AssetInfo, ...] = ()
    _by_id: dict = field(default=None, init=False, repr=False, compare=False, hash=False)
    _assets: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "claims", tuple(sorted(self.claims, key=CapabilityClaim.sort_key)))
        object.__setattr__(self, "assets", tuple(sorted(self.assets, key=lambda a: a.id)))
        object.__setattr__(self, "_assets", {a.id: a for a in self.assets})

    def asset(self, asset_id: str) -> AssetInfo:
        return self._assets[asset_id]

    def _index(self) -> dict[str, CapabilityClaim]:
        if self._by_id is None:
            object.__setattr__(self, "_by_id", {c.id: c for c in self.claims})
        return self._by_id

    def __len__(self) -> int:
        return len(self.claims)

    def __contains__(self, claim_id: str) -> bool:
        return claim_id in self._index()

    def claim(self, claim_id: str) -> CapabilityClaim:
        return self._index()[claim_id]

    def has(self, asset: str, capability: Capability) -> bool:
        return any(c.asset == asset and c.capability is capability for c in self.claims)

    def on(self, asset: str) -> list[CapabilityClaim]:
        return [c for c in self.claims if c.asset == asset]

    def derivation(self, claim_id: str) -> list[CapabilityClaim]:
        """Claims from the root origin down to ``claim_id``."""
        chain = [self.claim(claim_id)]
        while chain[-1].origin.kind == "derived":
            chain.append(self.claim(chain[-1].origin.parent))
        chain.reverse()
        return chain

    def roots(self) -> list[str]:
        return sorted({c.root for c in self.claims})

    def with_claims(self, extra: Iterable[CapabilityClaim]) -> "AdversaryFootprint":
        merged = dict(self._index())
        for c in extra:
            merged.setdefault(c.id, c)
        return AdversaryFootprint(self.model_name, self.adversary, tuple(merged.values()), self.assets)

    def to_dict(self) -> dict:
        return footprint_to_dict(self)

    @property
    def digest(self) -> str:
        return footprint_digest(self)


def _check_adversary(m: SystemModel, adversary: Optional[str]) -> Optional[str]:
    if adversary in (None, "all"):
        return None
    if adversary not in {a.id for a in m.adversaries}:
        raise UnknownIdentifierError(adversary, "adversary")
    return adversary


def seed_footprint(m: SystemModel, adversary: Optional[str] = "all") -> AdversaryFootprint:
    """One claim per declared vulnerability/assumption claim visible to ``adversary``.

    Vulnerabilities with no adversary list, and all assumptions, apply to
    every adversary.
    """
    adversary = _check_adversary(m, adversary)
    claims: dict[str, CapabilityClaim] = {}

    def add(root, kind, spec, advs):
        cid = claim_id(root, spec.asset, spec.capability)
        if cid in claims:
            prior = claims[cid]
            joined = "; ".join(t for t in (prior.constraints, spec.constraints) if t)
            claims[cid] = CapabilityClaim(cid, prior.asset, prior.capability, prior.origin, root, advs, joined)
            return
        claims[cid] = CapabilityClaim(cid, spec.asset, spec.capability, Origin(kind, root), root, advs,
                                      spec.constraints)

    for v in m.vulnerabilities:
        if adversary is not None and v.adversaries and adversary not in v.adversaries:
            continue
        advs = frozenset(v.adversaries) if v.adversaries else None
        for spec in v.claims:
            add(v.id, "vulnerability", spec, advs)
    for a in m.assumptions:
        for spec in a.claims:
            add(a.id, "assumption", spec, None)
    return AdversaryFootprint(m.name, adversary, tuple(claims.values()), asset_catalog(m))


@dataclass(frozen=True)
class _Graph:
    asset_ids: tuple[str, ...]
    asset_index: dict
    edges: tuple
    adj_ptr: list
    adj_edge: list
    edge_dst: list
    edge_table: list


def _compile(m: SystemModel) -> _Graph:
    asset_ids = tuple(sorted(a.id for a in m.assets))
    asset_index = {a: i for i, a in enumerate(asset_ids)}
    edges = tuple(sorted(m.edges, key=lambda e: e.id))
    outgoing: list[list[int]] = [[] for _ in asset_ids]
    edge_dst, edge_table = [], []
    for i, e in enumerate(edges):
        outgoing[asset_index[e.source]].append(i)
        edge_dst.append(asset_index[e.target])
        for cap in CAPABILITIES:
            out = e.transfer(cap)
            edge_table.append(-1 if out is None else out.index)
    adj_ptr, adj_edge = [0], []
    for out in outgoing:
        adj_edge.extend(out)
        adj_ptr.append(len(adj_edge))
    return _Graph(asset_ids, asset_index, edges, adj_ptr, adj_edge, edge_dst, edge_table)


def propagate(m: SystemModel, af: AdversaryFootprint, *, max_rounds: int = SAFETY_ROUNDS) -> AdversaryFootprint:
    """Least fixpoint of ``af`` under the model's edges.

    Each root (vulnerability, assumption, attack impact) is closed on its
    own, so claims are unique per (asset, capability, root). Edges are
    visited in id order, which makes derivation paths independent of the
    order the model lists them in.
    """
    g = _compile(m)
    ncaps = len(CAPABILITIES)
    groups: dict[str, list[CapabilityClaim]] = {}
    for c in af.claims:
        if c.origin.is_root:
            groups.setdefault(c.root, []).append(c)
    roots = sorted(groups)
    seed_groups = []
    for root in roots:
        seeds = sorted(groups[root], key=lambda c: (c.asset, c.capability.index))
        groups[root] = seeds
        seed_groups.append([g.asset_index[c.asset] * ncaps + c.capability.index for c in seeds])

    try:
        closed = kernels.closure_many(g.adj_ptr, g.adj_edge, g.edge_dst, g.edge_table, seed_groups, max_rounds)
    except RuntimeError as exc:
        raise PropagationError(Diagnostic("error", "internal-error", str(exc), "propagate")) from None

    out: list[CapabilityClaim] = []
    for root, (states, parents, via) in zip(roots, closed):
        seed_by_state = {g.asset_index[c.asset] * ncaps + c.capability.index: c for c in groups[root]}
        made: list[CapabilityClaim] = []
        for state, parent, edge_i in zip(states, parents, via):
            if parent < 0:
                made.append(seed_by_state[state])
                continue
            asset_i, cap_i = divmod(state, ncaps)
            asset, cap = g.asset_ids[asset_i], CAPABILITIES[cap_i]
            edge = g.edges[edge_i]
            up = made[parent]
            constraints = "; ".join(t for t in (up.constraints, edge.note) if t)
            made.append(CapabilityClaim(
                claim_id(root, asset, cap), asset, cap,
                Origin("derived", edge.id, up.id), root, up.adversaries, constraints,
            ))
        out.extend(made)
    return AdversaryFootprint(af.model_name, af.adversary, tuple(out), asset_catalog(m))


def compute_footprint(m: SystemModel, adversary: Optional[str] = "all") -> AdversaryFootprint:
    return propagate(m, seed_footprint(m, adversary))


# -- export ------------------------------------------------------------------

FOOTPRINT_KIND = "footprint"
REPORT_VERSION = 1


def claim_to_dict(c: CapabilityClaim) -> dict:
    origin = {"kind": c.origin.kind, "ref": c.origin.ref}
    if c.origin.parent:
        origin["parent"] = c.origin.parent
    return {
        "id": c.id,
        "asset": c.asset,
        "capability": c.capability.value,
        "origin": origin,
        "root": c.root,
        "adversaries": "all" if c.adversaries is None else sorted(c.adversaries),
        "constraints": c.constraints,
    }


def claim_from_dict(d: dict) -> CapabilityClaim:
    o = d["origin"]
    if o["kind"] not in ORIGIN_KINDS:
        raise ValueError(f"unknown origin kind {o['kind']!r}")
    advs = d.get("adversaries", "all")
    return CapabilityClaim(
        id=d["id"],
        asset=d["asset"],
        capability=Capability.parse(d["capability"]),
        origin=Origin(o["kind"], o["ref"], o.get("parent", "")),
        root=d["root"],
        adversaries=None if advs == "all" else frozenset(advs),
        constraints=d.get("constraints", ""),
    )


def asset_to_dict(a: AssetInfo) -> dict:
    return {"id": a.id, "kind": str(a.kind), "variants": sorted(a.variants), "stage-kind": a.stage_kind}


def asset_from_dict(d: dict) -> AssetInfo:
    return AssetInfo(d["id"], AssetKind.parse(d["kind"]), frozenset(d.get("variants", [])), d.get("stage-kind", ""))


def _claims_payload(af: AdversaryFootprint) -> dict:
    return {
        "model": af.model_name,
        "adversary": af.adversary or "all",
        "assets": [asset_to_dict(a) for a in af.assets],
        "claims": [claim_to_dict(c) for c in af.claims],
    }


def footprint_digest(af: AdversaryFootprint) -> str:
    """Order-independent fingerprint of the claim set and its asset catalog."""
    canonical = json.dumps(_claims_payload(af), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def footprint_to_dict(af: AdversaryFootprint) -> dict:
    return {"atm-report-version": REPORT_VERSION, "kind": FOOTPRINT_KIND, **_claims_payload(af),
            "digest": footprint_digest(af)}


def footprint_from_dict(d: dict) -> AdversaryFootprint:
    if d.get("atm-report-version") != REPORT_VERSION or d.get("kind") != FOOTPRINT_KIND:
        raise ValueError("not a footprint document")
    adversary = d.get("adversary", "all")
    af = AdversaryFootprint(
        d["model"],
        None if adversary == "all" else adversary,
        tuple(claim_from_dict(c) for c in d.get("claims", [])),
        tuple(asset_from_dict(a) for a in d.get("assets", [])),
    )
    if "digest" in d and d["digest"] != af.digest:
        raise ValueError("footprint digest does not match its claims")
    return af
