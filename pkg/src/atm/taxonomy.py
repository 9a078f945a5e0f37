"""Asset kinds, adversarial capabilities, and the rules that relate them.

Everything here is an immutable lookup table. Capabilities form a partial
order (``implies``); edges between assets translate a capability held over
the source into a (usually weaker) capability over the target (``degrade``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class CIAClass(enum.Enum):
    CONFIDENTIALITY = "confidentiality"
    INTEGRITY = "integrity"
    AVAILABILITY = "availability"


class Capability(enum.Enum):
    """The nine adversarial capabilities, strongest first within each class."""

    INSPECT = "inspect"
    PARTIALLY_INSPECT = "partially-inspect"
    INDIRECTLY_INSPECT = "indirectly-inspect"
    MONITOR = "monitor"
    MAKE_ARBITRARY_CHANGES = "make-arbitrary-changes"
    MAKE_LIMITED_CHANGES = "make-limited-changes"
    INFLUENCE = "influence"
    CONTRIBUTE = "contribute"
    WITHHOLD = "withhold"

    @classmethod
    def parse(cls, text: str) -> "Capability":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown capability {text!r}") from None

    @property
    def index(self) -> int:
        return _CAP_INDEX[self]

    @property
    def title(self) -> str:
        return self.value.replace("-", " ").title()

    def __str__(self) -> str:
        return self.value


CAPABILITIES: tuple[Capability, ...] = tuple(Capability)
_CAP_INDEX = {cap: i for i, cap in enumerate(CAPABILITIES)}

_C = Capability

_CIA = {
    _C.INSPECT: CIAClass.CONFIDENTIALITY,
    _C.PARTIALLY_INSPECT: CIAClass.CONFIDENTIALITY,
    _C.INDIRECTLY_INSPECT: CIAClass.CONFIDENTIALITY,
    _C.MONITOR: CIAClass.CONFIDENTIALITY,
    _C.MAKE_ARBITRARY_CHANGES: CIAClass.INTEGRITY,
    _C.MAKE_LIMITED_CHANGES: CIAClass.INTEGRITY,
    _C.INFLUENCE: CIAClass.INTEGRITY,
    _C.CONTRIBUTE: CIAClass.INTEGRITY,
    _C.WITHHOLD: CIAClass.AVAILABILITY,
}


def cia_class(cap: Capability) -> CIAClass:
    return _CIA[cap]


# Direct "stronger grants weaker" edges. Influence and Contribute are kept
# incomparable, and no read capability grants a write one (or vice versa).
IMPLICATION_GENERATORS: tuple[tuple[Capability, Capability], ...] = (
    (_C.INSPECT, _C.PARTIALLY_INSPECT),
    (_C.PARTIALLY_INSPECT, _C.INDIRECTLY_INSPECT),
    (_C.INDIRECTLY_INSPECT, _C.MONITOR),
    (_C.MAKE_ARBITRARY_CHANGES, _C.MAKE_LIMITED_CHANGES),
    (_C.MAKE_LIMITED_CHANGES, _C.INFLUENCE),
    (_C.MAKE_LIMITED_CHANGES, _C.CONTRIBUTE),
    (_C.MAKE_ARBITRARY_CHANGES, _C.WITHHOLD),
)


def _closure() -> dict[Capability, frozenset[Capability]]:
    implied = {cap: {cap} for cap in CAPABILITIES}
    for strong, weak in IMPLICATION_GENERATORS:
        implied[strong].add(weak)
    # Warshall over nine nodes
    for k in CAPABILITIES:
        for i in CAPABILITIES:
            if k in implied[i]:
                implied[i] |= implied[k]
    return {cap: frozenset(weaker) for cap, weaker in implied.items()}


IMPLIED: dict[Capability, frozenset[Capability]] = _closure()

# Bit i of IMPLIED_MASK[j] is set iff capability j implies capability i.
IMPLIED_MASK: tuple[int, ...] = tuple(
    sum(1 << w.index for w in IMPLIED[cap]) for cap in CAPABILITIES
)


def implies(stronger: Capability, weaker: Capability) -> bool:
    """True iff holding ``stronger`` also grants ``weaker`` (reflexive)."""
    return weaker in IMPLIED[stronger]


def implied_by(cap: Capability) -> frozenset[Capability]:
    return IMPLIED[cap]


class EdgeMode(enum.Enum):
    COMPONENT_PART = "component-part"
    COMPONENT_FEED = "component-feed"
    DEPENDENCY = "dependency"
    LEAK = "leak"
    RELATIONSHIP = "relationship"

    @classmethod
    def parse(cls, text: str) -> "EdgeMode":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown edge mode {text!r}") from None

    def __str__(self) -> str:
        return self.value


EDGE_MODES: tuple[EdgeMode, ...] = tuple(EdgeMode)

_M = EdgeMode

_READS = (_C.INSPECT, _C.PARTIALLY_INSPECT, _C.INDIRECTLY_INSPECT, _C.MONITOR)

DEGRADATION: dict[EdgeMode, dict[Capability, Optional[Capability]]] = {
    _M.COMPONENT_PART: {
        _C.INSPECT: _C.PARTIALLY_INSPECT,
        _C.PARTIALLY_INSPECT: _C.PARTIALLY_INSPECT,
        _C.INDIRECTLY_INSPECT: _C.INDIRECTLY_INSPECT,
        _C.MONITOR: _C.MONITOR,
        _C.MAKE_ARBITRARY_CHANGES: _C.MAKE_LIMITED_CHANGES,
        _C.MAKE_LIMITED_CHANGES: _C.MAKE_LIMITED_CHANGES,
        _C.INFLUENCE: _C.INFLUENCE,
        _C.CONTRIBUTE: _C.CONTRIBUTE,
        _C.WITHHOLD: _C.WITHHOLD,
    },
    _M.COMPONENT_FEED: {
        _C.INSPECT: _C.PARTIALLY_INSPECT,
        _C.PARTIALLY_INSPECT: _C.PARTIALLY_INSPECT,
        _C.INDIRECTLY_INSPECT: _C.INDIRECTLY_INSPECT,
        _C.MONITOR: _C.MONITOR,
        _C.MAKE_ARBITRARY_CHANGES: _C.CONTRIBUTE,
        _C.MAKE_LIMITED_CHANGES: _C.CONTRIBUTE,
        _C.INFLUENCE: _C.INFLUENCE,
        _C.CONTRIBUTE: _C.CONTRIBUTE,
        _C.WITHHOLD: _C.WITHHOLD,
    },
    _M.DEPENDENCY: {
        **{read: None for read in _READS},
        _C.MAKE_ARBITRARY_CHANGES: _C.INFLUENCE,
        _C.MAKE_LIMITED_CHANGES: _C.INFLUENCE,
        _C.INFLUENCE: _C.INFLUENCE,
        _C.CONTRIBUTE: _C.INFLUENCE,
        _C.WITHHOLD: _C.WITHHOLD,
    },
    _M.LEAK: {
        _C.INSPECT: _C.INDIRECTLY_INSPECT,
        _C.PARTIALLY_INSPECT: _C.INDIRECTLY_INSPECT,
        _C.INDIRECTLY_INSPECT: _C.INDIRECTLY_INSPECT,
        _C.MONITOR: None,
        _C.MAKE_ARBITRARY_CHANGES: None,
        _C.MAKE_LIMITED_CHANGES: None,
        _C.INFLUENCE: None,
        _C.CONTRIBUTE: None,
        _C.WITHHOLD: None,
    },
    _M.RELATIONSHIP: {cap: cap for cap in CAPABILITIES},
}


def degrade(cap: Capability, mode: EdgeMode) -> Optional[Capability]:
    """Capability gained over an edge's target; ``None`` if it does not cross."""
    return DEGRADATION[mode][cap]


def degradation_row(mode: EdgeMode) -> tuple[int, ...]:
    """The table for ``mode`` as capability indices, -1 for absent."""
    table = DEGRADATION[mode]
    return tuple(-1 if table[c] is None else table[c].index for c in CAPABILITIES)


CORE_NAMESPACE = "core"

CANONICAL_KIND_NAMES: tuple[str, ...] = (
    "inputs",
    "outputs",
    "output-details",
    "dataset",
    "model-parameters",
    "validation-criteria",
    "validation-results",
    "hyperparameters",
)

_KIND_TITLES = {
    "inputs": "Inputs",
    "outputs": "Outputs",
    "output-details": "Output Details",
    "dataset": "Dataset",
    "model-parameters": "Model Parameters",
    "validation-criteria": "Validation Criteria",
    "validation-results": "Validation Results",
    "hyperparameters": "Hyperparameters",
}


@dataclass(frozen=True, order=True)
class AssetKind:
    """One of the eight canonical kinds, or a namespaced custom kind.

    Canonical kinds live in the reserved ``core`` namespace and serialize
    bare (``dataset``); custom kinds serialize as ``namespace:name``.
    """

    namespace: str
    name: str

    def __post_init__(self) -> None:
        if not self.namespace or not self.name:
            raise ValueError("asset kind needs a non-empty namespace and name")
        if self.namespace == CORE_NAMESPACE and self.name not in CANONICAL_KIND_NAMES:
            raise ValueError(f"unknown asset kind {self.name!r}")

    @classmethod
    def canonical(cls, name: str) -> "AssetKind":
        return cls(CORE_NAMESPACE, name)

    @classmethod
    def custom(cls, namespace: str, name: str) -> "AssetKind":
        if namespace == CORE_NAMESPACE:
            raise ValueError("namespace 'core' is reserved for canonical kinds")
        return cls(namespace, name)

    @classmethod
    def parse(cls, text: str) -> "AssetKind":
        if not isinstance(text, str) or not text:
            raise ValueError(f"invalid asset kind {text!r}")
        if ":" not in text:
            if text not in CANONICAL_KIND_NAMES:
                raise ValueError(f"unknown asset kind {text!r}")
            return cls.canonical(text)
        namespace, _, name = text.partition(":")
        if not namespace or not name:
            raise ValueError(f"invalid custom asset kind {text!r}")
        return cls.custom(namespace, name)

    @property
    def is_custom(self) -> bool:
        return self.namespace != CORE_NAMESPACE

    @property
    def title(self) -> str:
        if self.is_custom:
            return self.name.replace("-", " ").title()
        return _KIND_TITLES[self.name]

    def __str__(self) -> str:
        return f"{self.namespace}:{self.name}" if self.is_custom else self.name


INPUTS = AssetKind.canonical("inputs")
OUTPUTS = AssetKind.canonical("outputs")
OUTPUT_DETAILS = AssetKind.canonical("output-details")
DATASET = AssetKind.canonical("dataset")
MODEL_PARAMETERS = AssetKind.canonical("model-parameters")
VALIDATION_CRITERIA = AssetKind.canonical("validation-criteria")
VALIDATION_RESULTS = AssetKind.canonical("validation-results")
HYPERPARAMETERS = AssetKind.canonical("hyperparameters")

CANONICAL_KINDS: tuple[AssetKind, ...] = tuple(
    AssetKind.canonical(n) for n in CANONICAL_KIND_NAMES
)
