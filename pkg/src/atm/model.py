"""Declarative system model: ingestion, validation, and stage-presence lint.

A model document is YAML (JSON is accepted too) with the version marker
``atm-model-version: 1`` and the top-level keys ``name``, ``stages``,
``assets``, ``edges``, ``vulnerabilities``, ``assumptions`` and
``adversaries``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

import yaml

from atm.taxonomy import (
    DATASET,
    MODEL_PARAMETERS,
    OUTPUTS,
    AssetKind,
    Capability,
    CIAClass,
    EdgeMode,
    cia_class,
    degrade,
    implies,
)

MODEL_VERSION = 1
MAX_VARIANTS = 8

STAGE_KINDS = ("collection-assembly", "training", "deploy-inference")
JUSTIFICATION_KINDS = ("provenance", "producer-reputation", "asset-property", "other")

_TAG_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")


class ModelError(Exception):
    """Raised when a model document cannot be turned into a SystemModel."""

    def __init__(self, message: str, location: str = "") -> None:
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        where = f"line {line}, column {column}" if line is not None else ""
        super().__init__(message, where)


class UnknownIdentifierError(ModelError):
    def __init__(self, identifier: str, location: str = "") -> None:
        self.identifier = identifier
        super().__init__(f"unknown identifier {identifier!r}", location)


class DuplicateIdentifierError(ModelError):
    def __init__(self, identifier: str, location: str = "") -> None:
        self.identifier = identifier
        super().__init__(f"duplicate identifier {identifier!r}", location)


class InvalidValueError(ModelError):
    pass


class SchemaError(ModelError):
    """Missing or unknown fields, wrong value types."""


@dataclass(frozen=True, order=True)
class Diagnostic:
    severity: str  # error | warning | info
    code: str
    message: str
    location: str = ""

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        where = f" {self.location}" if self.location else ""
        return f"{self.severity} {self.code}{where}: {self.message}"


def _natural_key(text: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text))


def sort_diagnostics(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return sorted(set(diags), key=lambda d: (_natural_key(d.location), d.code, d.severity, d.message))


@dataclass(frozen=True)
class Stage:
    id: str
    kind: str  # collection-assembly | training | deploy-inference | custom:<name>
    description: str = ""

    @property
    def is_custom(self) -> bool:
        return self.kind.startswith("custom:")


@dataclass(frozen=True)
class Asset:
    id: str
    kind: AssetKind
    stage: str
    variants: frozenset[str] = frozenset()
    display_name: str = ""
    agent: str = ""

    @property
    def label(self) -> str:
        return self.display_name or self.id


@dataclass(frozen=True)
class Edge:
    id: str
    mode: EdgeMode
    source: str
    target: str
    override: tuple[tuple[Capability, Capability], ...] = ()
    note: str = ""

    def transfer(self, cap: Capability) -> Optional[Capability]:
        """Capability crossing this edge, honoring the per-edge override."""
        for src, dst in self.override:
            if src is cap:
                return dst
        return degrade(cap, self.mode)


@dataclass(frozen=True)
class ClaimSpec:
    asset: str
    capability: Capability
    constraints: str = ""


@dataclass(frozen=True)
class Vulnerability:
    id: str
    stage: str
    claims: tuple[ClaimSpec, ...]
    surface: str = ""
    adversaries: frozenset[str] = frozenset()  # empty: every adversary
    references: tuple[str, ...] = ()


@dataclass(frozen=True)
class Justification:
    kind: str
    text: str


@dataclass(frozen=True)
class Assumption:
    id: str
    consumed_asset: str
    claims: tuple[ClaimSpec, ...]
    justifications: tuple[Justification, ...] = ()


@dataclass(frozen=True)
class AdversaryProfile:
    id: str
    description: str = ""


@dataclass(frozen=True)
class SystemModel:
    name: str
    stages: tuple[Stage, ...] = ()
    assets: tuple[Asset, ...] = ()
    edges: tuple[Edge, ...] = ()
    vulnerabilities: tuple[Vulnerability, ...] = ()
    assumptions: tuple[Assumption, ...] = ()
    adversaries: tuple[AdversaryProfile, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def _lookup(self) -> dict:
        if self._index is None:
            object.__setattr__(self, "_index", {
                "stage": {s.id: s for s in self.stages},
                "asset": {a.id: a for a in self.assets},
                "source": {**{v.id: v for v in self.vulnerabilities},
                           **{a.id: a for a in self.assumptions}},
            })
        return self._index

    def stage(self, stage_id: str) -> Stage:
        return self._lookup()["stage"][stage_id]

    def asset(self, asset_id: str) -> Asset:
        return self._lookup()["asset"][asset_id]

    def has_asset(self, asset_id: str) -> bool:
        return asset_id in self._lookup()["asset"]

    def source(self, source_id: str):
        return self._lookup()["source"][source_id]

    @property
    def source_ids(self) -> list[str]:
        return [v.id for v in self.vulnerabilities] + [a.id for a in self.assumptions]

    def stage_kind_of(self, asset_id: str) -> str:
        return self.stage(self.asset(asset_id).stage).kind

    def without_sources(self, removed: Iterable[str]) -> "SystemModel":
        gone = set(removed)
        return SystemModel(
            name=self.name,
            stages=self.stages,
            assets=self.assets,
            edges=self.edges,
            vulnerabilities=tuple(v for v in self.vulnerabilities if v.id not in gone),
            assumptions=tuple(a for a in self.assumptions if a.id not in gone),
            adversaries=self.adversaries,
        )


# -- parsing -----------------------------------------------------------------


class _Fields:
    """Checked access to one mapping of the document."""

    def __init__(self, raw: Any, location: str, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> None:
        if not isinstance(raw, dict):
            raise SchemaError(f"expected a mapping, got {type(raw).__name__}", location)
        unknown = sorted(set(raw) - set(required) - set(optional), key=str)
        if unknown:
            raise SchemaError(f"unknown field {unknown[0]!r}", location)
        for key in required:
            if key not in raw:
                raise SchemaError(f"missing required field {key!r}", location)
        self.raw = raw
        self.location = location

    def at(self, key: str) -> str:
        return f"{self.location}.{key}" if self.location else key

    def text(self, key: str, default: Optional[str] = None) -> str:
        value = self.raw.get(key, default)
        if value is None:
            value = ""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str):
            raise SchemaError(f"expected text, got {type(value).__name__}", self.at(key))
        return value

    def ident(self, key: str) -> str:
        value = self.text(key)
        if not value:
            raise SchemaError("identifier must be non-empty", self.at(key))
        return value

    def items(self, key: str) -> list:
        value = self.raw.get(key)
        if value is None:
            return []
        if not isinstance(value, list):
            raise SchemaError(f"expected a list, got {type(value).__name__}", self.at(key))
        return value

    def texts(self, key: str) -> list[str]:
        out = []
        for i, item in enumerate(self.items(key)):
            if not isinstance(item, str):
                raise SchemaError("expected text", f"{self.at(key)}[{i}]")
            out.append(item)
        return out


def _parse_enum(parse, value: Any, location: str):
    try:
        return parse(value)
    except (ValueError, TypeError) as exc:
        raise InvalidValueError(str(exc), location) from None


def load_document(text: str, marker: str, version: int, syntax_error=ModelSyntaxError) -> dict:
    """Parse YAML text and check its version marker."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise syntax_error(problem, mark.line + 1, mark.column + 1) from None
        raise syntax_error(problem) from None
    if raw is None:
        raise syntax_error("empty document", 1, 1)
    if not isinstance(raw, dict):
        raise syntax_error("top level must be a mapping", 1, 1)
    if marker not in raw:
        raise syntax_error(f"missing version marker '{marker}'", 1, 1)
    if raw[marker] != version:
        raise syntax_error(f"unsupported {marker} {raw[marker]!r} (expected {version})", 1, 1)
    return raw


def _parse_stage_kind(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"invalid stage kind {value!r}")
    if value in STAGE_KINDS:
        return value
    if value.startswith("custom:") and len(value) > len("custom:"):
        return value
    raise ValueError(f"invalid stage kind {value!r}")


def _parse_claims(raw: list, location: str) -> tuple[ClaimSpec, ...]:
    claims = []
    for i, item in enumerate(raw):
        f = _Fields(item, f"{location}[{i}]", ("asset", "capability"), ("constraints",))
        claims.append(ClaimSpec(
            asset=f.ident("asset"),
            capability=_parse_enum(Capability.parse, f.raw["capability"], f.at("capability")),
            constraints=f.text("constraints", ""),
        ))
    return tuple(claims)


def _parse_override(raw: Any, location: str) -> tuple[tuple[Capability, Capability], ...]:
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        raise SchemaError("override must map capability to capability", location)
    pairs = []
    for key, value in raw.items():
        src = _parse_enum(Capability.parse, key, f"{location}.{key}")
        dst = _parse_enum(Capability.parse, value, f"{location}.{key}")
        pairs.append((src, dst))
    return tuple(sorted(pairs, key=lambda p: p[0].index))


def model_from_dict(raw: dict) -> SystemModel:
    top = _Fields(raw, "", ("atm-model-version", "name"),
                  ("stages", "assets", "edges", "vulnerabilities", "assumptions", "adversaries"))
    stages = []
    for i, item in enumerate(top.items("stages")):
        f = _Fields(item, f"stages[{i}]", ("id", "kind"), ("description",))
        stages.append(Stage(
            id=f.ident("id"),
            kind=_parse_enum(_parse_stage_kind, f.raw["kind"], f.at("kind")),
            description=f.text("description", ""),
        ))
    assets = []
    for i, item in enumerate(top.items("assets")):
        f = _Fields(item, f"assets[{i}]", ("id", "kind", "stage"), ("variants", "display-name", "agent"))
        assets.append(Asset(
            id=f.ident("id"),
            kind=_parse_enum(AssetKind.parse, f.raw["kind"], f.at("kind")),
            stage=f.ident("stage"),
            variants=frozenset(f.texts("variants")),
            display_name=f.text("display-name", ""),
            agent=f.text("agent", ""),
        ))
    edges = []
    for i, item in enumerate(top.items("edges")):
        f = _Fields(item, f"edges[{i}]", ("id", "mode", "source", "target"), ("override", "note"))
        edges.append(Edge(
            id=f.ident("id"),
            mode=_parse_enum(EdgeMode.parse, f.raw["mode"], f.at("mode")),
            source=f.ident("source"),
            target=f.ident("target"),
            override=_parse_override(f.raw.get("override"), f.at("override")),
            note=f.text("note", ""),
        ))
    vulns = []
    for i, item in enumerate(top.items("vulnerabilities")):
        f = _Fields(item, f"vulnerabilities[{i}]", ("id", "stage", "claims"),
                    ("surface", "adversaries", "references"))
        vulns.append(Vulnerability(
            id=f.ident("id"),
            stage=f.ident("stage"),
            surface=f.text("surface", ""),
            claims=_parse_claims(f.items("claims"), f.at("claims")),
            adversaries=frozenset(f.texts("adversaries")),
            references=tuple(f.texts("references")),
        ))
    assumptions = []
    for i, item in enumerate(top.items("assumptions")):
        f = _Fields(item, f"assumptions[{i}]", ("id", "consumed-asset", "claims"), ("justifications",))
        justs = []
        for j, jraw in enumerate(f.items("justifications")):
            jf = _Fields(jraw, f"{f.at('justifications')}[{j}]", ("kind", "text"))
            kind = jf.text("kind")
            if kind not in JUSTIFICATION_KINDS:
                raise InvalidValueError(f"unknown justification kind {kind!r}", jf.at("kind"))
            justs.append(Justification(kind=kind, text=jf.text("text")))
        assumptions.append(Assumption(
            id=f.ident("id"),
            consumed_asset=f.ident("consumed-asset"),
            claims=_parse_claims(f.items("claims"), f.at("claims")),
            justifications=tuple(justs),
        ))
    adversaries = []
    for i, item in enumerate(top.items("adversaries")):
        f = _Fields(item, f"adversaries[{i}]", ("id",), ("description",))
        adversaries.append(AdversaryProfile(id=f.ident("id"), description=f.text("description", "")))

    model = SystemModel(
        name=top.text("name"),
        stages=tuple(stages),
        assets=tuple(assets),
        edges=tuple(edges),
        vulnerabilities=tuple(vulns),
        assumptions=tuple(assumptions),
        adversaries=tuple(adversaries),
    )
    for diag in _identity_diagnostics(model):
        if diag.code == "duplicate-id":
            raise DuplicateIdentifierError(diag.message.split("'")[1], diag.location)
        raise UnknownIdentifierError(diag.message.split("'")[1], diag.location)
    return model


def parse_model(document: str) -> SystemModel:
    """Parse and resolve a model document.

    Raises ModelSyntaxError, SchemaError, InvalidValueError,
    DuplicateIdentifierError or UnknownIdentifierError.
    """
    return model_from_dict(load_document(document, "atm-model-version", MODEL_VERSION))


def model_to_dict(m: SystemModel) -> dict:
    def claims(cs):
        out = []
        for c in cs:
            d = {"asset": c.asset, "capability": c.capability.value}
            if c.constraints:
                d["constraints"] = c.constraints
            out.append(d)
        return out

    doc: dict[str, Any] = {"atm-model-version": MODEL_VERSION, "name": m.name}
    doc["adversaries"] = [
        {"id": a.id, **({"description": a.description} if a.description else {})} for a in m.adversaries
    ]
    doc["stages"] = [
        {"id": s.id, "kind": s.kind, **({"description": s.description} if s.description else {})}
        for s in m.stages
    ]
    assets = []
    for a in m.assets:
        d: dict[str, Any] = {"id": a.id, "kind": str(a.kind), "stage": a.stage}
        if a.variants:
            d["variants"] = sorted(a.variants)
        if a.display_name:
            d["display-name"] = a.display_name
        if a.agent:
            d["agent"] = a.agent
        assets.append(d)
    doc["assets"] = assets
    edges = []
    for e in m.edges:
        d = {"id": e.id, "mode": e.mode.value, "source": e.source, "target": e.target}
        if e.override:
            d["override"] = {src.value: dst.value for src, dst in e.override}
        if e.note:
            d["note"] = e.note
        edges.append(d)
    doc["edges"] = edges
    vulns = []
    for v in m.vulnerabilities:
        d = {"id": v.id, "stage": v.stage}
        if v.surface:
            d["surface"] = v.surface
        d["claims"] = claims(v.claims)
        if v.adversaries:
            d["adversaries"] = sorted(v.adversaries)
        if v.references:
            d["references"] = list(v.references)
        vulns.append(d)
    doc["vulnerabilities"] = vulns
    doc["assumptions"] = [
        {
            "id": a.id,
            "consumed-asset": a.consumed_asset,
            "claims": claims(a.claims),
            "justifications": [{"kind": j.kind, "text": j.text} for j in a.justifications],
        }
        for a in m.assumptions
    ]
    return doc


def serialize_model(m: SystemModel) -> str:
    return yaml.safe_dump(model_to_dict(m), sort_keys=False, allow_unicode=True, width=100)


# -- validation --------------------------------------------------------------


def _identity_diagnostics(m: SystemModel) -> Iterator[Diagnostic]:
    """Duplicate identifiers and unresolved references."""

    def dupes(items, category):
        seen = set()
        for i, item in enumerate(items):
            if item.id in seen:
                yield Diagnostic("error", "duplicate-id", f"duplicate {category} id '{item.id}'", f"{category}[{i}].id")
            seen.add(item.id)

    yield from dupes(m.stages, "stages")
    yield from dupes(m.assets, "assets")
    yield from dupes(m.edges, "edges")
    yield from dupes(m.vulnerabilities, "vulnerabilities")
    yield from dupes(m.assumptions, "assumptions")
    yield from dupes(m.adversaries, "adversaries")
    vuln_ids = {v.id for v in m.vulnerabilities}
    for i, a in enumerate(m.assumptions):
        # what-if removal addresses both kinds of source by bare id
        if a.id in vuln_ids:
            yield Diagnostic("error", "duplicate-id", f"source id '{a.id}' is used by a vulnerability too",
                             f"assumptions[{i}].id")

    stages = {s.id for s in m.stages}
    assets = {a.id for a in m.assets}
    advs = {a.id for a in m.adversaries}

    def ref(value, known, location):
        if value not in known:
            yield Diagnostic("error", "unknown-id", f"unknown identifier '{value}'", location)

    for i, a in enumerate(m.assets):
        yield from ref(a.stage, stages, f"assets[{i}].stage")
    for i, e in enumerate(m.edges):
        yield from ref(e.source, assets, f"edges[{i}].source")
        yield from ref(e.target, assets, f"edges[{i}].target")
    for i, v in enumerate(m.vulnerabilities):
        yield from ref(v.stage, stages, f"vulnerabilities[{i}].stage")
        for j, c in enumerate(v.claims):
            yield from ref(c.asset, assets, f"vulnerabilities[{i}].claims[{j}].asset")
        for adv in sorted(v.adversaries):
            yield from ref(adv, advs, f"vulnerabilities[{i}].adversaries")
    for i, a in enumerate(m.assumptions):
        yield from ref(a.consumed_asset, assets, f"assumptions[{i}].consumed-asset")
        for j, c in enumerate(a.claims):
            yield from ref(c.asset, assets, f"assumptions[{i}].claims[{j}].asset")


def _dependency_cycles(m: SystemModel) -> list[list[str]]:
    graph: dict[str, list[str]] = {}
    for e in m.edges:
        if e.mode is EdgeMode.DEPENDENCY:
            graph.setdefault(e.source, []).append(e.target)
    for targets in graph.values():
        targets.sort()
    color: dict[str, int] = {}
    cycles = []

    def visit(node: str, stack: list[str]) -> None:
        color[node] = 1
        stack.append(node)
        for nxt in graph.get(node, []):
            if color.get(nxt) == 1:
                cycles.append(stack[stack.index(nxt):] + [nxt])
            elif nxt not in color:
                visit(nxt, stack)
        stack.pop()
        color[node] = 2

    for node in sorted(graph):
        if node not in color:
            visit(node, [])
    return cycles


def validate_model(m: SystemModel) -> list[Diagnostic]:
    """Every invariant violation in ``m``; empty iff the model is analyzable."""
    diags = list(_identity_diagnostics(m))
    if diags:
        return sort_diagnostics(diags)

    for i, a in enumerate(m.assets):
        if len(a.variants) > MAX_VARIANTS:
            diags.append(Diagnostic("error", "too-many-variants",
                                    f"asset '{a.id}' has {len(a.variants)} variants (max {MAX_VARIANTS})",
                                    f"assets[{i}].variants"))
        for tag in sorted(a.variants):
            if not _TAG_RE.match(tag):
                diags.append(Diagnostic("error", "invalid-variant",
                                        f"variant '{tag}' must be a lowercase tag", f"assets[{i}].variants"))

    for cycle in _dependency_cycles(m):
        first = cycle[0]
        index = next(i for i, e in enumerate(m.edges)
                     if e.mode is EdgeMode.DEPENDENCY and e.source == first)
        diags.append(Diagnostic("error", "dependency-cycle",
                                "dependency cycle " + " -> ".join(cycle), f"edges[{index}]"))

    for i, e in enumerate(m.edges):
        loc = f"edges[{i}]"
        if e.source == e.target:
            diags.append(Diagnostic("error", "self-edge", f"edge '{e.id}' connects '{e.source}' to itself", loc))
        if e.mode is EdgeMode.RELATIONSHIP:
            src, dst = m.asset(e.source), m.asset(e.target)
            if src.stage == dst.stage and src.agent == dst.agent:
                diags.append(Diagnostic(
                    "error", "relationship-same-context",
                    f"relationship '{e.id}' must connect assets in distinct stages or agents", loc))
        for src_cap, override in e.override:
            default = degrade(src_cap, e.mode)
            if default is None:
                diags.append(Diagnostic(
                    "error", "override-on-absent",
                    f"'{src_cap}' does not cross a {e.mode} edge, so it cannot be overridden",
                    f"{loc}.override.{src_cap}"))
            elif not implies(default, override):
                diags.append(Diagnostic(
                    "error", "override-too-strong",
                    f"override '{src_cap}' -> '{override}' is stronger than the default '{default}'",
                    f"{loc}.override.{src_cap}"))

    relationship_peers: dict[str, set[str]] = {}
    for e in m.edges:
        if e.mode is EdgeMode.RELATIONSHIP:
            relationship_peers.setdefault(e.source, set()).add(e.target)
            relationship_peers.setdefault(e.target, set()).add(e.source)

    for i, v in enumerate(m.vulnerabilities):
        loc = f"vulnerabilities[{i}]"
        if not v.claims:
            diags.append(Diagnostic("error", "empty-claims", f"vulnerability '{v.id}' has no claims", f"{loc}.claims"))
        for j, c in enumerate(v.claims):
            asset = m.asset(c.asset)
            if asset.stage == v.stage:
                continue
            peers = relationship_peers.get(c.asset, set())
            if not any(m.asset(p).stage == v.stage for p in peers):
                diags.append(Diagnostic(
                    "error", "claim-outside-stage",
                    f"asset '{c.asset}' is neither in stage '{v.stage}' nor one relationship away from it",
                    f"{loc}.claims[{j}].asset"))

    for i, a in enumerate(m.assumptions):
        loc = f"assumptions[{i}]"
        if not a.claims:
            diags.append(Diagnostic("error", "empty-claims", f"assumption '{a.id}' has no claims", f"{loc}.claims"))
        if not a.justifications:
            diags.append(Diagnostic("error", "missing-justification",
                                    f"assumption '{a.id}' has no justification", f"{loc}.justifications"))

    return sort_diagnostics(diags)


def stage_presence_lint(m: SystemModel) -> list[Diagnostic]:
    """Warnings for claims at odds with where each asset type normally lives.

    Custom stage kinds and custom asset kinds are never warned.
    """
    diags = []

    def check(stage_kind: str, asset_id: str, cap: Capability, location: str) -> None:
        asset = m.asset(asset_id)
        if asset.kind.is_custom or stage_kind.startswith("custom:"):
            return
        kind = asset.kind
        what = f"{asset.kind.title} claim '{cap}' on '{asset_id}'"
        if kind == DATASET and stage_kind == "deploy-inference":
            diags.append(Diagnostic("warning", "table1-not-present",
                                    f"{what}: datasets are not present at deployment", location))
        elif kind == DATASET and stage_kind == "training" and cia_class(cap) is CIAClass.INTEGRITY:
            diags.append(Diagnostic("warning", "table1-read-only",
                                    f"{what}: training reads datasets but never writes them", location))
        elif kind == MODEL_PARAMETERS and stage_kind == "collection-assembly":
            diags.append(Diagnostic("warning", "table1-not-present",
                                    f"{what}: model parameters do not exist during collection", location))
        elif kind == OUTPUTS and stage_kind == "collection-assembly":
            diags.append(Diagnostic("warning", "table1-not-present",
                                    f"{what}: outputs do not exist during collection", location))
        elif kind == OUTPUTS and stage_kind == "training" and cap is Capability.INSPECT:
            diags.append(Diagnostic("warning", "table1-metrics-only",
                                    f"{what}: training exposes output metrics only", location))

    for i, v in enumerate(m.vulnerabilities):
        stage_kind = m.stage(v.stage).kind
        for j, c in enumerate(v.claims):
            check(stage_kind, c.asset, c.capability, f"vulnerabilities[{i}].claims[{j}]")
    for i, a in enumerate(m.assumptions):
        for j, c in enumerate(a.claims):
            check(m.stage_kind_of(c.asset), c.asset, c.capability, f"assumptions[{i}].claims[{j}]")
    return sort_diagnostics(diags)
