from __future__ import annotations

import itertools
import random

import pytest

from atm.footprint import compute_footprint
from atm.kb import KnowledgeBase
from atm.matcher import PreconditionError, map_threats
from atm.mitigation import (
    MitigationSearchTooLarge,
    minimal_mitigations,
    what_if,
    what_if_delta,
)
from atm.model import UnknownIdentifierError
from helpers import attack, build_model, fixture_kb, load_fixture, random_model, requirement

PROBE_KB = KnowledgeBase((
    attack("a", requirement("inputs", "influence")),
    attack("b", requirement("dataset", "contribute"), requirement("outputs", "monitor")),
    attack("c", requirement("x:tool", "withhold"), requirement("model-parameters", "monitor")),
    attack("d", requirement("outputs", "influence"), requirement("inputs", "withhold")),
))


def brute_force_minimal(m, kb, attack_id, k, adversary="all"):
    """Every subset of every source, checked by full re-analysis."""
    sources = m.source_ids
    breaking = []
    for size in range(1, min(k, len(sources)) + 1):
        for combo in itertools.combinations(sorted(sources), size):
            if not what_if(m, kb, combo, adversary).is_in_scope(attack_id):
                breaking.append(frozenset(combo))
    minimal = [s for s in breaking if not any(t < s for t in breaking)]
    return sorted((tuple(sorted(s)) for s in minimal), key=lambda s: (len(s), s))


# -- what_if ---------------------------------------------------------------------

def test_rag_guard_bypass_removal_defeats_jailbreak():
    m, kb = load_fixture("rag"), fixture_kb("rag")
    assert what_if(m, kb).is_in_scope("rag-jailbreak")
    assert not what_if(m, kb, ["llm-guard-bypass"]).is_in_scope("rag-jailbreak")


def test_empty_removal_equals_baseline():
    m, kb = load_fixture("rag"), fixture_kb("rag")
    assert what_if(m, kb, []) == map_threats(compute_footprint(m), kb)


def test_unrelated_removal_keeps_scope():
    m, kb = load_fixture("rag"), fixture_kb("rag")
    before = what_if(m, kb).in_scope_ids
    assert what_if(m, kb, ["metrics-log-tampering"]).in_scope_ids == before


def test_unknown_source_rejected():
    with pytest.raises(UnknownIdentifierError, match="nope"):
        what_if(load_fixture("rag"), fixture_kb("rag"), ["nope"])


def test_delta_lists_changes():
    m, kb = load_fixture("rag"), fixture_kb("rag")
    delta = what_if_delta(m, kb, ["llm-guard-bypass"])
    assert [(c.attack, c.before, c.after) for c in delta.changes] == [("rag-jailbreak", "in-scope", "out-of-scope")]
    assert delta.baseline_digest != delta.whatif_digest
    assert "rag-jailbreak" not in delta.in_scope_after


def test_removed_roots_leave_no_derived_claims():
    rng = random.Random(5)
    for _ in range(50):
        m = random_model(rng, n_vulns=4)
        removed = rng.sample(m.source_ids, rng.randint(0, len(m.source_ids)))
        af = compute_footprint(m.without_sources(removed))
        for c in af.claims:
            assert all(step.root not in removed and step.origin.ref not in removed for step in af.derivation(c.id))


# -- minimal_mitigations -------------------------------------------------------------

def test_backdoor_has_two_singleton_cuts(seed_kb):
    plan = minimal_mitigations(load_fixture("backdoor"), seed_kb, "backdoor")
    assert plan.minimal_sets == (("physical-trigger",), ("scrape-poisoning",))
    assert plan.k == 3


def test_two_independent_sources_need_both():
    m = build_model(
        [("q", "inputs", "s")], [],
        [("v1", "s", [("q", "contribute")]), ("v2", "s", [("q", "make-arbitrary-changes")])],
    )
    kb = KnowledgeBase((attack("pi", requirement("inputs", "contribute")),))
    plan = minimal_mitigations(m, kb, "pi", k=2)
    assert plan.minimal_sets == (("v1", "v2"),)
    assert plan.minimal_sets == tuple(brute_force_minimal(m, kb, "pi", 2))
    empty = minimal_mitigations(m, kb, "pi", k=1)
    assert empty.minimal_sets == () and empty.k == 1


def test_autorust_dependency_confusion_has_a_singleton():
    plan = minimal_mitigations(load_fixture("autorust"), fixture_kb("autorust"), "dependency-confusion")
    assert any(len(s) == 1 for s in plan.minimal_sets)


def test_rejects_bad_arguments(seed_kb):
    m = load_fixture("backdoor")
    with pytest.raises(ValueError):
        minimal_mitigations(m, seed_kb, "backdoor", k=0)
    with pytest.raises(UnknownIdentifierError):
        minimal_mitigations(m, seed_kb, "no-such-attack")
    with pytest.raises(PreconditionError):
        minimal_mitigations(m, seed_kb, "model-extraction")


def test_search_too_large_aborts():
    vulns = [(f"v{i:03d}", "s", [("q", "contribute")]) for i in range(200)]
    m = build_model([("q", "inputs", "s")], [], vulns)
    kb = KnowledgeBase((attack("pi", requirement("inputs", "contribute")),))
    with pytest.raises(MitigationSearchTooLarge) as exc:
        minimal_mitigations(m, kb, "pi", k=3)
    assert exc.value.diagnostic.code == "mitigation-search-too-large"


def test_sets_verified_and_minimal():
    m, kb = load_fixture("rag"), fixture_kb("rag")
    for attack_id in what_if(m, kb).in_scope_ids:
        plan = minimal_mitigations(m, kb, attack_id)
        for s in plan.minimal_sets:
            assert not what_if(m, kb, s).is_in_scope(attack_id)
            for size in range(len(s)):
                for sub in itertools.combinations(s, size):
                    assert what_if(m, kb, sub).is_in_scope(attack_id)
        assert list(plan.minimal_sets) == sorted(plan.minimal_sets, key=lambda s: (len(s), s))


def test_complete_against_brute_force_on_small_models():
    rng = random.Random(17)
    checked = 0
    while checked < 40:
        m = random_model(rng, n_vulns=rng.randint(1, 6))
        for attack_id in what_if(m, PROBE_KB).in_scope_ids:
            k = rng.randint(1, 3)
            plan = minimal_mitigations(m, PROBE_KB, attack_id, k=k)
            assert plan.minimal_sets == tuple(brute_force_minimal(m, PROBE_KB, attack_id, k)), attack_id
            checked += 1


def test_per_adversary_plans():
    m = load_fixture("kb-probe")
    kb = fixture_kb("kb-probe")
    plan = minimal_mitigations(m, kb, "evasion-jailbreak", adversary="inputs-limited")
    assert plan.adversary == "inputs-limited"
    assert plan.minimal_sets == tuple(brute_force_minimal(m, kb, "evasion-jailbreak", 3, "inputs-limited"))
