"""What-if re-analysis and minimal mitigation sets.

Removing a source means deleting the vulnerability or assumption from the
model and recomputing everything from scratch. Claims are never
subtracted from an existing footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from atm import kernels
from atm.footprint import compute_footprint
from atm.kb import KnowledgeBase
from atm.matcher import (
    DEFAULT_VECTOR_CAP,
    InScopeAttack,
    PreconditionError,
    ThreatReport,
    adversary_contexts,
    classify,
    map_threats,
    requirement_met,
)
from atm.model import Diagnostic, SystemModel, UnknownIdentifierError

DEFAULT_BOUND = 3
SEARCH_LIMIT = 10**6


class MitigationSearchTooLarge(RuntimeError):
    def __init__(self, diagnostic: Diagnostic) -> None:
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


class MitigationVerificationError(RuntimeError):
    """A candidate set failed re-analysis. Indicates a bug, not bad input."""


@dataclass(frozen=True)
class MitigationPlan:
    attack: str
    minimal_sets: tuple[tuple[str, ...], ...]
    k: int
    candidates: tuple[str, ...] = ()
    adversary: Optional[str] = None


@dataclass(frozen=True)
class ClassificationChange:
    attack: str
    before: str  # in-scope | out-of-scope
    after: str


@dataclass(frozen=True)
class WhatIfDelta:
    model: str
    adversary: Optional[str]
    removed: tuple[str, ...]
    baseline_digest: str
    whatif_digest: str
    changes: tuple[ClassificationChange, ...]
    in_scope_after: tuple[str, ...]


def _check_sources(m: SystemModel, removed: Iterable[str]) -> tuple[str, ...]:
    known = set(m.source_ids)
    removed = tuple(sorted(set(removed)))
    for sid in removed:
        if sid not in known:
            raise UnknownIdentifierError(sid, "removed sources")
    return removed


def what_if(m: SystemModel, kb: KnowledgeBase, removed: Iterable[str] = (), adversary: Optional[str] = "all", *,
            vector_cap: int = DEFAULT_VECTOR_CAP, collusion: bool = False) -> ThreatReport:
    """Threat report for ``m`` with the ``removed`` vulnerabilities/assumptions deleted."""
    removed = _check_sources(m, removed)
    af = compute_footprint(m.without_sources(removed), adversary)
    return map_threats(af, kb, vector_cap=vector_cap, collusion=collusion)


def what_if_delta(m: SystemModel, kb: KnowledgeBase, removed: Iterable[str] = (), adversary: Optional[str] = "all", *,
                  collusion: bool = False) -> WhatIfDelta:
    removed = _check_sources(m, removed)
    before = what_if(m, kb, (), adversary, collusion=collusion)
    after = what_if(m, kb, removed, adversary, collusion=collusion)
    label = {True: "in-scope", False: "out-of-scope"}
    changes = tuple(
        ClassificationChange(a, label[before.is_in_scope(a)], label[after.is_in_scope(a)])
        for a in kb.ids if before.is_in_scope(a) != after.is_in_scope(a)
    )
    return WhatIfDelta(m.name, before.adversary, removed, before.digest, after.digest, changes,
                       tuple(after.in_scope_ids))


def minimal_mitigations(m: SystemModel, kb: KnowledgeBase, attack: str, k: int = DEFAULT_BOUND,
                        adversary: Optional[str] = "all", *, collusion: bool = False) -> MitigationPlan:
    """All inclusion-minimal sets of at most ``k`` root sources whose removal defeats ``attack``.

    Only sources that root some satisfying claim can matter, so the search
    runs over those. Every returned set is re-checked with ``what_if``, as is
    each of its subsets with one member dropped.
    """
    if k < 1:
        raise ValueError("search bound k must be at least 1")
    try:
        entry = kb.get(attack)
    except KeyError:
        raise UnknownIdentifierError(attack, "attack") from None
    af = compute_footprint(m, adversary)
    if not isinstance(classify(entry, af, collusion=collusion), InScopeAttack):
        raise PreconditionError(f"attack {attack!r} is not in scope at baseline")

    satisfying = [requirement_met(r, af) for r in entry.requirements]
    candidates = sorted({c.root for s in satisfying for c in s})
    size = math.comb(len(candidates), min(k, len(candidates)))
    if size > SEARCH_LIMIT:
        raise MitigationSearchTooLarge(Diagnostic(
            "error", "mitigation-search-too-large",
            f"{size} candidate sets of size {k} over {len(candidates)} sources exceed {SEARCH_LIMIT}",
            attack,
        ))
    index = {s: i for i, s in enumerate(candidates)}
    contexts = [
        [sorted({index[c.root] for c in s if allowed(c)}) for s in satisfying]
        for _, allowed in adversary_contexts(af, collusion)
    ]
    cuts = kernels.minimal_cuts(contexts, len(candidates), k)
    sets = sorted((tuple(candidates[i] for i in cut) for cut in cuts), key=lambda s: (len(s), s))

    for s in sets:
        if what_if(m, kb, s, adversary, collusion=collusion).is_in_scope(attack):
            raise MitigationVerificationError(f"removing {list(s)} leaves {attack!r} in scope")
        for drop in range(len(s)):
            smaller = s[:drop] + s[drop + 1:]
            if not what_if(m, kb, smaller, adversary, collusion=collusion).is_in_scope(attack):
                raise MitigationVerificationError(f"{list(s)} is not minimal for {attack!r}")
    return MitigationPlan(attack, tuple(sets), k, tuple(candidates), None if adversary in (None, "all") else adversary)
