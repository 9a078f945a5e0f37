"""Matching a footprint against the knowledge base.

An attack is in scope when every requirement is met by some claim whose
capability implies the requirement's minimum, all for one adversary.
Claims restricted to particular adversaries are only combined with claims
available to the same adversary unless collusion is switched on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Optional

from atm.footprint import (
    AdversaryFootprint,
    CapabilityClaim,
    Origin,
    claim_id,
    impact_root,
    propagate,
)
from atm.kb import AttackEntry, KnowledgeBase, Requirement
from atm.model import SystemModel
from atm.taxonomy import Capability, implies

DEFAULT_VECTOR_CAP = 100
ANY_ADVERSARY = "*"


class PreconditionError(ValueError):
    """An operation was called on inputs that violate its precondition."""


@dataclass(frozen=True)
class PathStep:
    claim: str
    asset: str
    capability: Capability
    origin: str  # origin kind
    ref: str  # source, edge or attack id


@dataclass(frozen=True)
class Assignment:
    requirement: int
    claim: str
    path: tuple[PathStep, ...]

    @property
    def root(self) -> str:
        return self.path[0].ref


@dataclass(frozen=True)
class AttackVector:
    id: str
    attack: str
    assignment: tuple[Assignment, ...]

    @property
    def roots(self) -> tuple[str, ...]:
        return tuple(sorted({a.root for a in self.assignment}))


@dataclass(frozen=True)
class UnmetRequirement:
    index: int
    requirement: Requirement
    nearest: tuple[str, ...]  # claim ids on matching assets that fall short


@dataclass(frozen=True)
class GapReport:
    attack: AttackEntry
    context: str
    unmet: tuple[UnmetRequirement, ...]


@dataclass(frozen=True)
class InScopeAttack:
    attack: AttackEntry
    vectors: tuple[AttackVector, ...]
    truncated: bool
    root_causes: tuple[str, ...]
    contexts: tuple[str, ...]
    round: int = 1
    enablers: tuple[str, ...] = ()

    @property
    def chain_enabled(self) -> bool:
        return self.round > 1


@dataclass(frozen=True)
class GainedClaim:
    round: int
    claim: str
    asset: str
    capability: Capability


@dataclass(frozen=True)
class ThreatReport:
    model: str
    adversary: Optional[str]
    digest: str
    in_scope: tuple[InScopeAttack, ...] = ()
    out_scope: tuple[GapReport, ...] = ()
    rounds: int = 1
    chain: bool = False
    collusion: bool = False
    vector_cap: int = DEFAULT_VECTOR_CAP
    final_digest: str = ""
    gained: tuple[GainedClaim, ...] = ()
    _lookup: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "in_scope", tuple(sorted(self.in_scope, key=lambda a: a.attack.id)))
        object.__setattr__(self, "out_scope", tuple(sorted(self.out_scope, key=lambda g: g.attack.id)))
        if not self.final_digest:
            object.__setattr__(self, "final_digest", self.digest)

    @property
    def in_scope_ids(self) -> list[str]:
        return [a.attack.id for a in self.in_scope]

    @property
    def out_scope_ids(self) -> list[str]:
        return [g.attack.id for g in self.out_scope]

    def is_in_scope(self, attack_id: str) -> bool:
        return attack_id in self.in_scope_ids

    def get(self, attack_id: str):
        if self._lookup is None:
            table = {a.attack.id: a for a in self.in_scope}
            table.update({g.attack.id: g for g in self.out_scope})
            object.__setattr__(self, "_lookup", table)
        return self._lookup[attack_id]


# -- matching ----------------------------------------------------------------


def _claim_order(c: CapabilityClaim) -> tuple:
    return (c.asset, c.capability.value, c.id)


def _on_selector(r: Requirement, af: AdversaryFootprint) -> list[CapabilityClaim]:
    out = []
    for c in af.claims:
        info = af._assets.get(c.asset)
        if info is not None and r.selector.matches(info):
            out.append(c)
    return out


def requirement_met(r: Requirement, af: AdversaryFootprint) -> list[CapabilityClaim]:
    """Claims that satisfy ``r``: selector-matching asset, capability implying the minimum."""
    hits = [c for c in _on_selector(r, af) if implies(c.capability, r.min_capability)]
    return sorted(hits, key=_claim_order)


def adversary_contexts(af: AdversaryFootprint, collusion: bool = False) -> list[tuple[str, Callable]]:
    """Adversary contexts an attack is evaluated under.

    One context per adversary named by any claim; ``*`` (claims open to
    every adversary) when none are named. Collusion merges everything into
    one context.
    """
    if collusion:
        return [(ANY_ADVERSARY, lambda c: True)]
    if af.adversary is not None:
        ids = [af.adversary]
    else:
        ids = sorted({a for c in af.claims if c.adversaries for a in c.adversaries})
    if not ids:
        return [(ANY_ADVERSARY, lambda c: c.adversaries is None)]
    return [(i, lambda c, i=i: c.available_to(i)) for i in ids]


def _consistent(claims, collusion: bool) -> bool:
    if collusion:
        return True
    common = None
    for c in claims:
        if c.adversaries is None:
            continue
        common = c.adversaries if common is None else common & c.adversaries
        if not common:
            return False
    return True


def _path(af: AdversaryFootprint, cid: str) -> tuple[PathStep, ...]:
    return tuple(PathStep(c.id, c.asset, c.capability, c.origin.kind, c.origin.ref) for c in af.derivation(cid))


def _vectors(attack: AttackEntry, satisfying: list[list[CapabilityClaim]], af: AdversaryFootprint,
             cap: int, collusion: bool) -> tuple[list[AttackVector], bool]:
    vectors: list[AttackVector] = []
    truncated = False
    for combo in product(*satisfying):
        if not _consistent(combo, collusion):
            continue
        if len(vectors) >= cap:
            truncated = True
            break
        vectors.append(AttackVector(
            id=f"{attack.id}#{len(vectors)}",
            attack=attack.id,
            assignment=tuple(Assignment(i, c.id, _path(af, c.id)) for i, c in enumerate(combo)),
        ))
    return vectors, truncated


def _feasible_contexts(satisfying, contexts) -> list[str]:
    return [name for name, allowed in contexts if all(any(allowed(c) for c in s) for s in satisfying)]


def enumerate_vectors(attack: AttackEntry, af: AdversaryFootprint, cap: int = DEFAULT_VECTOR_CAP,
                      collusion: bool = False) -> tuple[list[AttackVector], bool]:
    """Adversary-consistent combinations of satisfying claims, one per requirement.

    Ordered by the claims' (asset, capability, id) per requirement and cut
    at ``cap``; the flag tells whether more existed.
    """
    satisfying = [requirement_met(r, af) for r in attack.requirements]
    if not _feasible_contexts(satisfying, adversary_contexts(af, collusion)):
        raise PreconditionError(f"attack {attack.id!r} is not in scope for this footprint")
    return _vectors(attack, satisfying, af, cap, collusion)


def _gap(attack: AttackEntry, af: AdversaryFootprint, satisfying, contexts) -> GapReport:
    # Report the context closest to feasible; on ties, the one seeing more relevant claims.
    best = None
    for name, allowed in contexts:
        missing = [i for i, s in enumerate(satisfying) if not any(allowed(c) for c in s)]
        seen = sum(1 for r in attack.requirements for c in _on_selector(r, af) if allowed(c))
        key = (len(missing), -seen)
        if best is None or key < best[0]:
            best = (key, name, allowed, missing)
    _, name, allowed, missing = best
    unmet = []
    for i in missing:
        r = attack.requirements[i]
        near = sorted((c for c in _on_selector(r, af) if allowed(c) and not implies(c.capability, r.min_capability)),
                      key=_claim_order)
        unmet.append(UnmetRequirement(i, r, tuple(c.id for c in near)))
    return GapReport(attack, name, tuple(unmet))


def classify(attack: AttackEntry, af: AdversaryFootprint, *, vector_cap: int = DEFAULT_VECTOR_CAP,
             collusion: bool = False):
    satisfying = [requirement_met(r, af) for r in attack.requirements]
    contexts = adversary_contexts(af, collusion)
    feasible = _feasible_contexts(satisfying, contexts)
    if not feasible:
        return _gap(attack, af, satisfying, contexts)
    vectors, truncated = _vectors(attack, satisfying, af, vector_cap, collusion)
    allowed = [a for n, a in contexts if n in feasible]
    roots = sorted({c.root for s in satisfying for c in s if any(ok(c) for ok in allowed)})
    return InScopeAttack(attack, tuple(vectors), truncated, tuple(roots), tuple(feasible))


def map_threats(af: AdversaryFootprint, kb: KnowledgeBase, *, vector_cap: int = DEFAULT_VECTOR_CAP,
                collusion: bool = False) -> ThreatReport:
    """Classify every KB entry against ``af``; ``af`` itself is left untouched."""
    in_scope, out_scope = [], []
    for entry in kb.entries:
        result = classify(entry, af, vector_cap=vector_cap, collusion=collusion)
        (in_scope if isinstance(result, InScopeAttack) else out_scope).append(result)
    return ThreatReport(
        model=af.model_name,
        adversary=af.adversary,
        digest=af.digest,
        in_scope=tuple(in_scope),
        out_scope=tuple(out_scope),
        collusion=collusion,
        vector_cap=vector_cap,
    )


# -- chaining ----------------------------------------------------------------


def _impact_claims(ins: InScopeAttack, af: AdversaryFootprint) -> list[CapabilityClaim]:
    attack = ins.attack
    root = impact_root(attack.id)
    adversaries = None if ANY_ADVERSARY in ins.contexts else frozenset(ins.contexts)
    origin = Origin("attack-impact", attack.id, f"{attack.id}#0")
    out = []
    for grant in attack.impact:
        for info in af.assets:
            if grant.selector.matches(info):
                out.append(CapabilityClaim(claim_id(root, info.id, grant.capability), info.id, grant.capability,
                                           origin, root, adversaries, grant.condition))
    return out


def _expand_roots(report_items: dict[str, InScopeAttack]) -> dict[str, tuple[str, ...]]:
    """Replace attack-impact roots with the root causes of the enabling attack."""
    prefix = impact_root("")
    memo: dict[str, tuple[str, ...]] = {}

    def expand(attack_id: str, visiting: frozenset) -> tuple[str, ...]:
        if attack_id in memo:
            return memo[attack_id]
        out: set[str] = set()
        for root in report_items[attack_id].root_causes:
            if not root.startswith(prefix):
                out.add(root)
                continue
            enabler = root[len(prefix):]
            if enabler in report_items and enabler not in visiting:
                out.update(expand(enabler, visiting | {attack_id}))
        result = tuple(sorted(out))
        if not visiting:
            memo[attack_id] = result
        return result

    return {a: expand(a, frozenset()) for a in report_items}


def chain_analyze(m: SystemModel, af: AdversaryFootprint, kb: KnowledgeBase, max_rounds: Optional[int] = None, *,
                  vector_cap: int = DEFAULT_VECTOR_CAP, collusion: bool = False
                  ) -> tuple[ThreatReport, AdversaryFootprint]:
    """Feed the impact of in-scope attacks back into the footprint until nothing changes.

    Each round is one pass of ``map_threats``. Returns the final report,
    annotated with the round each attack first became feasible and the
    attacks that enabled it, together with the extended footprint.
    """
    if max_rounds is None:
        max_rounds = len(kb) + 1
    current = af
    rounds = 0
    first_round: dict[str, int] = {}
    granted: set[str] = set()
    gained: list[GainedClaim] = []
    while True:
        rounds += 1
        report = map_threats(current, kb, vector_cap=vector_cap, collusion=collusion)
        for ins in report.in_scope:
            first_round.setdefault(ins.attack.id, rounds)
        fresh = [ins for ins in report.in_scope if ins.attack.id not in granted]
        if not fresh or rounds >= max_rounds:
            break
        extra = []
        for ins in fresh:
            granted.add(ins.attack.id)
            extra.extend(c for c in _impact_claims(ins, current) if c.id not in current)
        if not extra:
            break
        before = {c.id for c in current.claims}
        current = propagate(m, current.with_claims(extra))
        gained.extend(GainedClaim(rounds + 1, c.id, c.asset, c.capability)
                      for c in current.claims if c.id not in before)

    items = {ins.attack.id: ins for ins in report.in_scope}
    expanded = _expand_roots(items)
    prefix = impact_root("")
    annotated = []
    for attack_id, ins in items.items():
        r = first_round[attack_id]
        enablers = ()
        if r > 1:
            enablers = tuple(sorted(root[len(prefix):] for root in ins.root_causes if root.startswith(prefix)))
        annotated.append(replace(ins, root_causes=expanded[attack_id], round=r, enablers=enablers))
    final = replace(
        report,
        digest=af.digest,
        final_digest=current.digest,
        in_scope=tuple(annotated),
        rounds=rounds,
        chain=True,
        gained=tuple(sorted(gained, key=lambda g: (g.round, g.asset, g.capability.value, g.claim))),
    )
    return final, current
