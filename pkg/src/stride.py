"""
STRIDE taxonomy, the per-element applicability matrix, candidate-threat
enumeration, `stride.json` scaffolding and coverage lints.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .dfd_model import IDENT_PATTERN, Dfd, Diagnostic, NodeKind, Severity, crossing_flows

logger = logging.getLogger(__name__)


class ThreatCategory(Enum):
    """STRIDE threat categories; definition order is the canonical S,T,R,I,D,E order."""
    SPOOFING = "S"
    TAMPERING = "T"
    REPUDIATION = "R"
    INFORMATION_DISCLOSURE = "I"
    DENIAL_OF_SERVICE = "D"
    ELEVATION_OF_PRIVILEGE = "E"

    @property
    def label(self) -> str:
        return CATEGORY_LABELS[self]


CATEGORY_LABELS = {
    ThreatCategory.SPOOFING: "Spoofing",
    ThreatCategory.TAMPERING: "Tampering",
    ThreatCategory.REPUDIATION: "Repudiation",
    ThreatCategory.INFORMATION_DISCLOSURE: "Information Disclosure",
    ThreatCategory.DENIAL_OF_SERVICE: "Denial of Service",
    ThreatCategory.ELEVATION_OF_PRIVILEGE: "Elevation of Privilege",
}


class ElementKind(Enum):
    EXTERNAL_ENTITY = "entity"
    PROCESS = "process"
    DATA_STORE = "store"
    FLOW = "flow"

    @classmethod
    def of_node(cls, kind: NodeKind) -> "ElementKind":
        return cls(kind.value)


def _codes(codes: str) -> FrozenSet[ThreatCategory]:
    return frozenset(ThreatCategory(c) for c in codes)


# Conventional STRIDE-per-element chart
APPLICABILITY: Dict[ElementKind, FrozenSet[ThreatCategory]] = {
    ElementKind.EXTERNAL_ENTITY: _codes("SR"),
    ElementKind.PROCESS: _codes("STRIDE"),
    ElementKind.DATA_STORE: _codes("TRID"),
    ElementKind.FLOW: _codes("TID"),
}


class Priority(Enum):
    """MoSCoW priority (Won't is not used)."""
    MUST = "must"
    SHOULD = "should"
    COULD = "could"


class RefKind(Enum):
    NODE = "node"
    FLOW = "flow"


class ElementRef(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    kind: RefKind
    id: str = Field(alias="ref", pattern=f"^{IDENT_PATTERN}$")


class StrideEntry(BaseModel):
    """One analysed threat against one DFD element."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(pattern=f"^{IDENT_PATTERN}$")
    category: ThreatCategory
    target: ElementRef
    title: str = Field(min_length=1)
    # Empty text is allowed on load so scaffolds round-trip; coverage_check
    # flags empty mitigations and the pipeline refuses incomplete entries.
    description: str = ""
    impact: str = ""
    mitigation: str = ""
    priority: Optional[Priority] = None

    def missing_fields(self) -> List[str]:
        """Names of the text fields still empty; a report needs all of them."""
        return [
            name for name in ("title", "description", "impact", "mitigation")
            if not getattr(self, name).strip()
        ]


@dataclass(frozen=True)
class PrivacyScope:
    categories: FrozenSet[ThreatCategory]

    def __post_init__(self):
        if not self.categories:
            raise ValueError("a privacy scope needs at least one STRIDE category")

    @classmethod
    def from_codes(cls, codes: Iterable[str]) -> "PrivacyScope":
        return cls(frozenset(ThreatCategory(code) for code in codes))

    @classmethod
    def default(cls) -> "PrivacyScope":
        return cls.from_codes("STI")

    def __contains__(self, category: ThreatCategory) -> bool:
        return category in self.categories

    def codes(self) -> List[str]:
        return [c.value for c in ThreatCategory if c in self.categories]


@dataclass(frozen=True)
class CandidateThreat:
    target: ElementRef
    category: ThreatCategory
    element_name: str


def applicable_categories(kind: ElementKind) -> FrozenSet[ThreatCategory]:
    return APPLICABILITY[kind]


def in_scope(entries: Iterable[StrideEntry], scope: PrivacyScope) -> List[StrideEntry]:
    """Entries whose category the scope covers, ordered by entry id."""
    return sorted((e for e in entries if e.category in scope), key=lambda e: e.id)


def enumerate_candidates(dfd: Dfd, scope: PrivacyScope) -> List[CandidateThreat]:
    """Every (element, category) pair the matrix allows inside the scope."""
    candidates: List[CandidateThreat] = []
    elements = [
        (ElementRef(kind=RefKind.NODE, id=n.id), ElementKind.of_node(n.kind), n.name)
        for n in dfd.nodes
    ] + [
        (ElementRef(kind=RefKind.FLOW, id=f.id), ElementKind.FLOW, f.label)
        for f in dfd.flows
    ]
    for ref, kind, name in elements:
        allowed = applicable_categories(kind)
        for category in ThreatCategory:
            if category in allowed and category in scope:
                candidates.append(CandidateThreat(target=ref, category=category, element_name=name))
    return candidates


def scaffold_stride(dfd: Dfd, scope: PrivacyScope) -> List[StrideEntry]:
    """Skeleton entries t001, t002, ... for the engineer to fill in."""
    entries = [
        StrideEntry(
            id=f"t{index:03d}",
            category=candidate.category,
            target=candidate.target,
            title=f"{candidate.category.label} of {candidate.element_name}",
        )
        for index, candidate in enumerate(enumerate_candidates(dfd, scope), start=1)
    ]
    logger.info(f"Scaffolded {len(entries)} STRIDE entries")
    return entries


def dump_stride(entries: Iterable[StrideEntry]) -> str:
    """Canonical `stride.json` text."""
    payload = [e.model_dump(mode="json", by_alias=True, exclude_none=True) for e in entries]
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def coverage_check(entries: List[StrideEntry], dfd: Dfd, scope: PrivacyScope) -> List[Diagnostic]:
    """C1: crossing flow with no disclosure entry. C2: entry without a mitigation."""
    findings: List[Diagnostic] = []
    if ThreatCategory.INFORMATION_DISCLOSURE in scope:
        covered = {
            e.target.id for e in entries
            if e.target.kind is RefKind.FLOW and e.category is ThreatCategory.INFORMATION_DISCLOSURE
        }
        for flow_id in crossing_flows(dfd):
            if flow_id not in covered:
                findings.append(Diagnostic(
                    Severity.WARNING, "C1",
                    "boundary-crossing flow has no Information Disclosure entry", flow_id))
    for entry in entries:
        if not entry.mitigation.strip():
            findings.append(Diagnostic(Severity.WARNING, "C2", "entry has no mitigation", entry.id))
    return findings
