"""Renderers: canonical JSON documents, markdown summaries, DOT graphs.

Every machine document carries ``atm-report-version: 1`` and a ``kind``
(footprint, report, plan or whatif) and parses back into the object it was
rendered from.
"""

from __future__ import annotations

import json
from typing import Optional, Union

from atm.footprint import (
    REPORT_VERSION,
    AdversaryFootprint,
    footprint_from_dict,
    footprint_to_dict,
)
from atm.kb import AttackEntry, attack_from_dict, attack_to_dict
from atm.matcher import (
    Assignment,
    AttackVector,
    GainedClaim,
    GapReport,
    InScopeAttack,
    PathStep,
    ThreatReport,
    UnmetRequirement,
)
from atm.mitigation import ClassificationChange, MitigationPlan, WhatIfDelta
from atm.model import SystemModel
from atm.taxonomy import Capability, CIAClass, EdgeMode, cia_class

Renderable = Union[ThreatReport, AdversaryFootprint, MitigationPlan, WhatIfDelta]
FORMATS = ("machine", "markdown", "graph")


class ReportFormatError(ValueError):
    pass


def _header(kind: str) -> dict:
    return {"atm-report-version": REPORT_VERSION, "kind": kind}


def _adv(value: Optional[str]) -> str:
    return value or "all"


def _unadv(value: str) -> Optional[str]:
    return None if value == "all" else value


# -- threat report <-> dict --------------------------------------------------


def _vector_to_dict(v: AttackVector) -> dict:
    return {
        "id": v.id,
        "attack": v.attack,
        "assignment": [
            {
                "requirement": a.requirement,
                "claim": a.claim,
                "path": [
                    {"claim": s.claim, "asset": s.asset, "capability": s.capability.value,
                     "origin": s.origin, "ref": s.ref}
                    for s in a.path
                ],
            }
            for a in v.assignment
        ],
    }


def _vector_from_dict(d: dict) -> AttackVector:
    return AttackVector(
        id=d["id"],
        attack=d["attack"],
        assignment=tuple(
            Assignment(
                requirement=a["requirement"],
                claim=a["claim"],
                path=tuple(PathStep(s["claim"], s["asset"], Capability.parse(s["capability"]), s["origin"], s["ref"])
                           for s in a["path"]),
            )
            for a in d["assignment"]
        ),
    )


def report_to_dict(r: ThreatReport) -> dict:
    return {
        **_header("report"),
        "model": r.model,
        "adversary": _adv(r.adversary),
        "digest": r.digest,
        "final-digest": r.final_digest,
        "rounds": r.rounds,
        "chain": r.chain,
        "collusion": r.collusion,
        "vector-cap": r.vector_cap,
        "in-scope": [
            {
                "attack": attack_to_dict(a.attack),
                "vectors": [_vector_to_dict(v) for v in a.vectors],
                "truncated": a.truncated,
                "root-causes": list(a.root_causes),
                "contexts": list(a.contexts),
                "round": a.round,
                "enablers": list(a.enablers),
            }
            for a in r.in_scope
        ],
        "out-of-scope": [
            {
                "attack": attack_to_dict(g.attack),
                "context": g.context,
                "unmet": [{"requirement": u.index, "nearest": list(u.nearest)} for u in g.unmet],
            }
            for g in r.out_scope
        ],
        "gained": [
            {"round": g.round, "claim": g.claim, "asset": g.asset, "capability": g.capability.value}
            for g in r.gained
        ],
    }


def report_from_dict(d: dict) -> ThreatReport:
    in_scope = []
    for item in d["in-scope"]:
        in_scope.append(InScopeAttack(
            attack=attack_from_dict(item["attack"]),
            vectors=tuple(_vector_from_dict(v) for v in item["vectors"]),
            truncated=item["truncated"],
            root_causes=tuple(item["root-causes"]),
            contexts=tuple(item["contexts"]),
            round=item["round"],
            enablers=tuple(item["enablers"]),
        ))
    out_scope = []
    for item in d["out-of-scope"]:
        attack = attack_from_dict(item["attack"])
        out_scope.append(GapReport(attack, item["context"], tuple(
            UnmetRequirement(u["requirement"], attack.requirements[u["requirement"]], tuple(u["nearest"]))
            for u in item["unmet"]
        )))
    return ThreatReport(
        model=d["model"],
        adversary=_unadv(d["adversary"]),
        digest=d["digest"],
        final_digest=d["final-digest"],
        in_scope=tuple(in_scope),
        out_scope=tuple(out_scope),
        rounds=d["rounds"],
        chain=d["chain"],
        collusion=d["collusion"],
        vector_cap=d["vector-cap"],
        gained=tuple(GainedClaim(g["round"], g["claim"], g["asset"], Capability.parse(g["capability"]))
                     for g in d["gained"]),
    )


def plan_to_dict(p: MitigationPlan) -> dict:
    return {
        **_header("plan"),
        "attack": p.attack,
        "adversary": _adv(p.adversary),
        "k": p.k,
        "candidates": list(p.candidates),
        "minimal-sets": [list(s) for s in p.minimal_sets],
        "interpretation": "minimal sets of root sources whose removal takes the attack out of scope",
    }


def plan_from_dict(d: dict) -> MitigationPlan:
    return MitigationPlan(d["attack"], tuple(tuple(s) for s in d["minimal-sets"]), d["k"],
                          tuple(d["candidates"]), _unadv(d["adversary"]))


def delta_to_dict(w: WhatIfDelta) -> dict:
    return {
        **_header("whatif"),
        "model": w.model,
        "adversary": _adv(w.adversary),
        "removed": list(w.removed),
        "baseline-digest": w.baseline_digest,
        "whatif-digest": w.whatif_digest,
        "changes": [{"attack": c.attack, "before": c.before, "after": c.after} for c in w.changes],
        "in-scope-after": list(w.in_scope_after),
    }


def delta_from_dict(d: dict) -> WhatIfDelta:
    return WhatIfDelta(
        d["model"], _unadv(d["adversary"]), tuple(d["removed"]), d["baseline-digest"], d["whatif-digest"],
        tuple(ClassificationChange(c["attack"], c["before"], c["after"]) for c in d["changes"]),
        tuple(d["in-scope-after"]),
    )


def to_dict(obj: Renderable) -> dict:
    if isinstance(obj, ThreatReport):
        return report_to_dict(obj)
    if isinstance(obj, AdversaryFootprint):
        return footprint_to_dict(obj)
    if isinstance(obj, MitigationPlan):
        return plan_to_dict(obj)
    if isinstance(obj, WhatIfDelta):
        return delta_to_dict(obj)
    raise TypeError(f"cannot render {type(obj).__name__}")


def render_machine(obj: Renderable) -> str:
    return json.dumps(to_dict(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse_machine(text: str) -> Renderable:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict) or d.get("atm-report-version") != REPORT_VERSION:
        raise ReportFormatError("missing or unsupported atm-report-version")
    kind = d.get("kind")
    parsers = {"footprint": footprint_from_dict, "report": report_from_dict,
               "plan": plan_from_dict, "whatif": delta_from_dict}
    if kind not in parsers:
        raise ReportFormatError(f"unknown document kind {kind!r}")
    try:
        return parsers[kind](d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"malformed {kind} document: {exc}") from None


# -- markdown ----------------------------------------------------------------


def _cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def _step(s: PathStep) -> str:
    return f"{s.asset}: {s.capability.title}"


def _root_cell(a: Assignment) -> str:
    first = a.path[0]
    if first.origin == "attack-impact":
        return f"via {first.ref}"
    return first.ref


def _in_scope_md(a: InScopeAttack) -> list[str]:
    e = a.attack
    lines = [f"### {e.id}: {e.name}", ""]
    lines.append(f"Root causes: {', '.join(a.root_causes) or 'none'}")
    if a.chain_enabled:
        lines.append(f"Chain-enabled in round {a.round} via {', '.join(a.enablers)}")
    if a.truncated:
        lines.append(f"Vectors shown: {len(a.vectors)} (truncated)")
    lines += ["", "| Requirement | Satisfied by | Root cause |", "|---|---|---|"]
    for i, r in enumerate(e.requirements):
        seen = []
        for v in a.vectors:
            asg = v.assignment[i]
            if asg.claim not in [s.claim for s in seen]:
                seen.append(asg)
        label = _cell(f"{r.selector.title}: {r.min_capability.title}")
        for asg in seen:
            chain = " -> ".join(_step(s) for s in asg.path)
            lines.append(f"| {label} | {_cell(chain)} | {_cell(_root_cell(asg))} |")
    for g in e.impact:
        cond = f" ({g.condition})" if g.condition else ""
        lines.append(f"| Impact | {_cell(f'{g.selector.title}: {g.capability.title}{cond}')} | |")
    lines.append("")
    return lines


def _out_scope_md(g: GapReport) -> list[str]:
    e = g.attack
    unmet = {u.index: u for u in g.unmet}
    lines = [f"### {e.id}: {e.name}", ""]
    if g.context != "*":
        lines += [f"Closest adversary: {g.context}", ""]
    lines += ["| Requirement | Status | Nearest claims |", "|---|---|---|"]
    for i, r in enumerate(e.requirements):
        label = _cell(f"{r.selector.title}: {r.min_capability.title}")
        if i in unmet:
            near = ", ".join(unmet[i].nearest) or "none"
            lines.append(f"| {label} | unmet | {_cell(near)} |")
        else:
            lines.append(f"| {label} | met | |")
    lines.append("")
    return lines


def render_markdown(obj: Renderable) -> str:
    if isinstance(obj, WhatIfDelta):
        return _delta_md(obj)
    if isinstance(obj, MitigationPlan):
        return _plan_md(obj)
    if isinstance(obj, AdversaryFootprint):
        return _footprint_md(obj)
    r = obj
    lines = [f"# Threat report: {r.model}", ""]
    lines.append(f"- Adversary: {_adv(r.adversary)}")
    lines.append(f"- Footprint digest: `{r.digest}`")
    if r.chain:
        lines.append(f"- Chain analysis: {r.rounds} round(s), final digest `{r.final_digest}`")
    lines += ["", "## Summary", "", "| Classification | Attacks |", "|---|---|",
              f"| In scope | {len(r.in_scope)} |", f"| Out of scope | {len(r.out_scope)} |", ""]
    if r.in_scope:
        lines += ["## In scope", ""]
        for a in r.in_scope:
            lines += _in_scope_md(a)
    if r.out_scope:
        lines += ["## Out of scope", ""]
        for g in r.out_scope:
            lines += _out_scope_md(g)
    if r.gained:
        lines += ["## Capabilities gained by chaining", "", "| Round | Asset | Capability | Claim |", "|---|---|---|---|"]
        lines += [f"| {g.round} | {g.asset} | {g.capability.title} | {_cell(g.claim)} |" for g in r.gained]
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def _footprint_md(af: AdversaryFootprint) -> str:
    lines = [f"# Adversary footprint: {af.model_name}", "", f"- Adversary: {_adv(af.adversary)}",
             f"- Digest: `{af.digest}`", f"- Claims: {len(af.claims)}", ""]
    if af.claims:
        lines += ["| Asset | Capability | Origin | Root |", "|---|---|---|---|"]
        for c in af.claims:
            lines.append(f"| {c.asset} | {c.capability.title} | {c.origin.kind} {_cell(c.origin.ref)} | {c.root} |")
    return "\n".join(lines).rstrip("\n") + "\n"


def _delta_md(w: WhatIfDelta) -> str:
    lines = [f"# What-if: {w.model}", "", f"- Removed: {', '.join(w.removed) or 'nothing'}",
             f"- Adversary: {_adv(w.adversary)}", ""]
    if w.changes:
        lines += ["| Attack | Before | After |", "|---|---|---|"]
        lines += [f"| {c.attack} | {c.before} | {c.after} |" for c in w.changes]
    else:
        lines.append("No classification changes.")
    return "\n".join(lines) + "\n"


def _plan_md(p: MitigationPlan) -> str:
    lines = [f"# Mitigation sets for {p.attack}", "", f"- Search bound: {p.k}", ""]
    if p.minimal_sets:
        lines += [f"- remove {', '.join(s)}" for s in p.minimal_sets]
    else:
        lines.append(f"No set of at most {p.k} sources suffices.")
    return "\n".join(lines) + "\n"


# -- graph -------------------------------------------------------------------

_CLASS_COLOR = {
    CIAClass.INTEGRITY: "#f4cccc",
    CIAClass.CONFIDENTIALITY: "#cfe2f3",
    CIAClass.AVAILABILITY: "#fff2cc",
}
_MODE_STYLE = {
    EdgeMode.COMPONENT_PART: "solid",
    EdgeMode.COMPONENT_FEED: "solid",
    EdgeMode.DEPENDENCY: "bold",
    EdgeMode.LEAK: "dotted",
    EdgeMode.RELATIONSHIP: "dashed",
}


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def render_graph(m: SystemModel, af: Optional[AdversaryFootprint] = None,
                 report: Optional[ThreatReport] = None) -> str:
    """DOT digraph: stage clusters, typed model edges, claim badges, derivation edges, highlighted vectors."""
    claims = af.claims if af is not None else ()
    highlighted = set()
    if report is not None:
        for a in report.in_scope:
            for v in a.vectors:
                for asg in v.assignment:
                    highlighted.update(s.claim for s in asg.path)

    lines = [f"digraph {_q(m.name)} {{", "  rankdir=LR;", "  node [shape=box, style=rounded];"]
    by_asset: dict[str, list] = {}
    for c in claims:
        by_asset.setdefault(c.asset, []).append(c)
    for stage in sorted(m.stages, key=lambda s: s.id):
        members = sorted((a for a in m.assets if a.stage == stage.id), key=lambda a: a.id)
        if not members:
            continue
        lines.append(f"  subgraph {_q('cluster_' + stage.id)} {{")
        lines.append(f"    label={_q(f'{stage.id} ({stage.kind})')};")
        for a in members:
            held = sorted({c.capability for c in by_asset.get(a.id, [])}, key=lambda c: c.index)
            label = f"{a.label}\n({a.kind})"
            attrs = ""
            if held:
                label += "\n" + ", ".join(c.value for c in held)
                lead = cia_class(held[0])
                attrs = f', style="rounded,filled", fillcolor={_q(_CLASS_COLOR[lead])}'
            lines.append(f"    {_q(a.id)} [label={_q(label)}{attrs}];")
        lines.append("  }")
    for e in sorted(m.edges, key=lambda e: e.id):
        lines.append(f"  {_q(e.source)} -> {_q(e.target)} [label={_q(e.mode.value)}, "
                     f"style={_MODE_STYLE[e.mode]}, color=gray40];")

    edges = {e.id: e for e in m.edges}
    for c in claims:
        if c.origin.kind != "derived" or c.origin.ref not in edges:
            continue
        e = edges[c.origin.ref]
        hot = c.id in highlighted
        color = "red" if hot else "firebrick3"
        width = ", penwidth=2.5" if hot else ""
        lines.append(f"  {_q(e.source)} -> {_q(e.target)} [label={_q(f'{e.mode.value}: {c.capability.value}')}, "
                     f"style=dashed, color={color}, fontcolor={color}, constraint=false{width}];")

    if report is not None:
        for a in report.in_scope:
            node = f"attack:{a.attack.id}"
            lines.append(f"  {_q(node)} [label={_q(a.attack.name or a.attack.id)}, shape=octagon, "
                         f"style=filled, fillcolor={_q('#e06666')}];")
            used = sorted({(asg.path[-1].asset, asg.path[-1].capability.value)
                           for v in a.vectors for asg in v.assignment})
            for asset, cap in used:
                lines.append(f"  {_q(asset)} -> {_q(node)} [label={_q(cap)}, color=red, penwidth=2.5];")
    lines.append("}")
    return "\n".join(lines) + "\n"
