"""Attack knowledge base: schema, loading, seed entries and lint.

One YAML document per attack, marked ``atm-kb-version: 1``. Entries never
refer to a particular system model, so a KB can be reused across products.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import yaml

from atm.footprint import AssetInfo
from atm.model import (
    Diagnostic,
    ModelError,
    _Fields,
    _parse_enum,
    _parse_stage_kind,
    load_document,
    sort_diagnostics,
)
from atm.taxonomy import AssetKind, Capability, implies

KB_VERSION = 1
SEED_KB_DIR = Path(__file__).resolve().parent / "seed_kb"
KB_SUFFIXES = (".yaml", ".yml", ".json")


class KBError(ModelError):
    """A KB document could not be loaded."""


class KBSyntaxError(KBError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        super().__init__(message, f"line {line}, column {column}" if line is not None else "")


class DuplicateAttackError(KBError):
    def __init__(self, attack_id: str, location: str = "") -> None:
        self.attack_id = attack_id
        super().__init__(f"duplicate attack id {attack_id!r}", location)


class KBValidationError(KBError):
    pass


@dataclass(frozen=True)
class Selector:
    kind: AssetKind
    variants: frozenset[str] = frozenset()
    stage_kind: Optional[str] = None

    def matches(self, asset: AssetInfo) -> bool:
        if asset.kind != self.kind:
            return False
        if not self.variants <= asset.variants:
            return False
        return self.stage_kind is None or self.stage_kind == asset.stage_kind

    def __str__(self) -> str:
        text = str(self.kind)
        if self.variants:
            text += "[" + ",".join(sorted(self.variants)) + "]"
        if self.stage_kind:
            text += "@" + self.stage_kind
        return text

    @property
    def title(self) -> str:
        text = self.kind.title
        if self.variants:
            text = " ".join(v.title() for v in sorted(self.variants)) + " " + text
        return text


@dataclass(frozen=True)
class Requirement:
    selector: Selector
    min_capability: Capability
    note: str = ""

    def __str__(self) -> str:
        return f"({self.selector}, {self.min_capability})"


@dataclass(frozen=True)
class ImpactGrant:
    selector: Selector
    capability: Capability
    condition: str = ""


@dataclass(frozen=True)
class AttackEntry:
    id: str
    name: str
    requirements: tuple[Requirement, ...]
    impact: tuple[ImpactGrant, ...] = ()
    technique: str = ""
    references: tuple[str, ...] = ()
    family: str = ""


@dataclass(frozen=True)
class KnowledgeBase:
    entries: tuple[AttackEntry, ...] = ()
    sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(sorted(self.entries, key=lambda e: e.id)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, attack_id: str) -> AttackEntry:
        for e in self.entries:
            if e.id == attack_id:
                return e
        raise KeyError(attack_id)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def merged(self, other: "KnowledgeBase") -> "KnowledgeBase":
        return merge_kbs([self, other])


# -- parsing -----------------------------------------------------------------


def _parse_selector(raw, location: str) -> Selector:
    f = _Fields(raw, location, ("kind",), ("variants", "stage-kind"))
    stage_kind = f.raw.get("stage-kind")
    return Selector(
        kind=_parse_enum(AssetKind.parse, f.raw["kind"], f.at("kind")),
        variants=frozenset(f.texts("variants")),
        stage_kind=None if stage_kind is None else _parse_enum(_parse_stage_kind, stage_kind, f.at("stage-kind")),
    )


def attack_from_dict(raw: dict) -> AttackEntry:
    top = _Fields(raw, "", ("atm-kb-version", "id", "name", "requirements"),
                  ("family", "technique", "impact", "references"))
    reqs = []
    for i, item in enumerate(top.items("requirements")):
        f = _Fields(item, f"requirements[{i}]", ("selector", "min-capability"), ("note",))
        reqs.append(Requirement(
            selector=_parse_selector(f.raw["selector"], f.at("selector")),
            min_capability=_parse_enum(Capability.parse, f.raw["min-capability"], f.at("min-capability")),
            note=f.text("note", ""),
        ))
    if not reqs:
        raise KBValidationError("an attack needs at least one requirement", "requirements")
    grants = []
    for i, item in enumerate(top.items("impact")):
        f = _Fields(item, f"impact[{i}]", ("selector", "capability"), ("condition",))
        grants.append(ImpactGrant(
            selector=_parse_selector(f.raw["selector"], f.at("selector")),
            capability=_parse_enum(Capability.parse, f.raw["capability"], f.at("capability")),
            condition=f.text("condition", ""),
        ))
    return AttackEntry(
        id=top.ident("id"),
        name=top.text("name"),
        family=top.text("family", ""),
        technique=top.text("technique", ""),
        requirements=tuple(reqs),
        impact=tuple(grants),
        references=tuple(top.texts("references")),
    )


def parse_attack(document: str, source: str = "") -> AttackEntry:
    """Parse one KB document. Every failure surfaces as a KBError subclass."""
    try:
        return attack_from_dict(load_document(document, "atm-kb-version", KB_VERSION, syntax_error=KBSyntaxError))
    except KBSyntaxError as exc:
        if not source:
            raise
        raise KBSyntaxError(f"{source}: {exc.message}", exc.line, exc.column) from None
    except ModelError as exc:
        location = ": ".join(p for p in (source, exc.location) if p)
        raise KBValidationError(exc.message, location) from None


def _selector_to_dict(s: Selector) -> dict:
    out: dict = {"kind": str(s.kind)}
    if s.variants:
        out["variants"] = sorted(s.variants)
    if s.stage_kind:
        out["stage-kind"] = s.stage_kind
    return out


def attack_to_dict(e: AttackEntry) -> dict:
    out: dict = {"atm-kb-version": KB_VERSION, "id": e.id, "name": e.name}
    if e.family:
        out["family"] = e.family
    if e.technique:
        out["technique"] = e.technique
    out["requirements"] = []
    for r in e.requirements:
        item = {"selector": _selector_to_dict(r.selector), "min-capability": r.min_capability.value}
        if r.note:
            item["note"] = r.note
        out["requirements"].append(item)
    if e.impact:
        out["impact"] = []
        for g in e.impact:
            item = {"selector": _selector_to_dict(g.selector), "capability": g.capability.value}
            if g.condition:
                item["condition"] = g.condition
            out["impact"].append(item)
    if e.references:
        out["references"] = list(e.references)
    return out


def serialize_attack(e: AttackEntry) -> str:
    return yaml.safe_dump(attack_to_dict(e), sort_keys=False, allow_unicode=True)


# -- loading -----------------------------------------------------------------


def load_kb(documents: Iterable[tuple[str, str]]) -> KnowledgeBase:
    """Build a KB from ``(source name, text)`` pairs; duplicate ids are rejected."""
    entries: dict[str, AttackEntry] = {}
    first_seen: dict[str, str] = {}
    sources = []
    for source, text in documents:
        entry = parse_attack(text, source)
        if entry.id in entries:
            raise DuplicateAttackError(entry.id, f"{source} (also in {first_seen[entry.id]})")
        entries[entry.id] = entry
        first_seen[entry.id] = source
        sources.append(source)
    return KnowledgeBase(tuple(entries.values()), tuple(sources))


def _expand(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix in KB_SUFFIXES and p.is_file())
    if not path.exists():
        raise FileNotFoundError(f"no such KB file or directory: {path}")
    return [path]


def resolve_kb_path(text: Union[str, os.PathLike]) -> Path:
    return SEED_KB_DIR if str(text) == "@seed" else Path(text)


def load_kb_paths(paths: Iterable[Union[str, os.PathLike]]) -> KnowledgeBase:
    """Load files and directories (``*.yaml``, ``*.yml``, ``*.json``); ``@seed`` names the shipped KB.

    Raises OSError for unreadable paths and KBError for bad content.
    """
    docs = []
    for p in paths:
        for f in _expand(resolve_kb_path(p)):
            docs.append((str(f), f.read_text(encoding="utf-8")))
    return load_kb(docs)


def load_seed_kb() -> KnowledgeBase:
    return load_kb_paths([SEED_KB_DIR])


def merge_kbs(kbs: Iterable[KnowledgeBase]) -> KnowledgeBase:
    entries: dict[str, AttackEntry] = {}
    sources: list[str] = []
    for kb in kbs:
        for e in kb.entries:
            if e.id in entries:
                raise DuplicateAttackError(e.id)
            entries[e.id] = e
        sources.extend(kb.sources)
    return KnowledgeBase(tuple(entries.values()), tuple(sources))


# -- lint --------------------------------------------------------------------


def lint_kb(kb: KnowledgeBase, namespaces_in_use: Optional[Iterable[str]] = None) -> list[Diagnostic]:
    """Warnings and info notes on a loaded KB. Never errors.

    ``namespaces_in_use`` lists custom kind namespaces that models actually
    declare; entries selecting other custom namespaces get an info note.
    When omitted, every custom namespace is reported.
    """
    used = set(namespaces_in_use or ())
    diags: list[Diagnostic] = []
    for e in kb.entries:
        where = f"{e.id}.requirements"
        for i, a in enumerate(e.requirements):
            for j in range(i + 1, len(e.requirements)):
                b = e.requirements[j]
                if a.selector == b.selector and (implies(a.min_capability, b.min_capability)
                                                 or implies(b.min_capability, a.min_capability)):
                    diags.append(Diagnostic(
                        "warning", "redundant-requirement",
                        f"{a} and {b} select the same assets with comparable capabilities",
                        f"{where}[{j}]",
                    ))
        for i, g in enumerate(e.impact):
            if not any(implies(r.min_capability, g.capability) for r in e.requirements):
                diags.append(Diagnostic(
                    "info", "impact-exceeds-requirements",
                    f"grants {g.capability} over {g.selector}, which no requirement's capability implies",
                    f"{e.id}.impact[{i}]",
                ))
        selectors = [r.selector for r in e.requirements] + [g.selector for g in e.impact]
        for ns in sorted({s.kind.namespace for s in selectors if s.kind.is_custom}):
            if ns not in used:
                diags.append(Diagnostic(
                    "info", "custom-namespace",
                    f"custom kind namespace {ns!r} is not declared by any analyzed model",
                    e.id,
                ))
    return sort_diagnostics(diags)
