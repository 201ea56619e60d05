"""
The stakeholder report model: combining agent outputs into a ReportModel,
mechanical quality checks and the grouped-by-mitigation variant.
"""

import logging
import re
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from . import constants
from .agents import SimplifiedRequirements, ThreatExplanation
from .artifacts import ProjectBundle, Requirement
from .errors import CoverageMismatchError
from .stride import Priority, PrivacyScope, StrideEntry, in_scope
from .utils import as_sentence, count_words, normalize_whitespace

logger = logging.getLogger(__name__)


class RequirementItem(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    requirement_id: str
    plain_text: str = Field(min_length=1)
    rationale: str = Field(min_length=1)
    priority: Optional[Priority] = None


class ThreatPart(BaseModel):
    """The per-entry half of a threat section: everything except the protection."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    entry_id: str
    title: str
    what: str
    why: str


class ThreatSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    entry_id: str
    title: str = Field(min_length=1)
    what: str = Field(min_length=1)
    why: str = Field(min_length=1)
    how: str = Field(min_length=1)
    mitigation_tag: str
    # Set only on grouped sections; lists every member, the section's own entry first.
    merged: List[ThreatPart] = Field(default_factory=list)

    def parts(self) -> List[ThreatPart]:
        if self.merged:
            return list(self.merged)
        return [ThreatPart(entry_id=self.entry_id, title=self.title, what=self.what, why=self.why)]


class ReportMetadata(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    generated_at: str
    mode: str
    model_name: str
    source_hashes: Dict[str, str] = Field(default_factory=dict)
    tool_version: str = ""
    scope: List[str] = Field(default_factory=list)
    mermaid: str = ""


class ReportModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    executive_summary: str
    system_description: str
    purpose: str
    requirement_items: List[RequirementItem]
    threat_sections: List[ThreatSection]
    metadata: ReportMetadata

    def threat_entry_ids(self) -> List[str]:
        return [part.entry_id for section in self.threat_sections for part in section.parts()]

    def requirement_ids(self) -> List[str]:
        return [item.requirement_id for item in self.requirement_items]


class QaCode(Enum):
    MISSING_THREAT = "MissingThreat"
    MISSING_REQUIREMENT = "MissingRequirement"
    UNDEFINED_ABBREVIATION = "UndefinedAbbreviation"
    REDUNDANT_MITIGATION = "RedundantMitigation"
    OVER_LENGTH = "OverLength"
    JARGON_TERM = "JargonTerm"


COMPLETENESS_CODES = frozenset({QaCode.MISSING_THREAT, QaCode.MISSING_REQUIREMENT})


class QaFinding(BaseModel):
    model_config = ConfigDict(frozen=True)

    code: QaCode
    message: str
    subject: str = Field(min_length=1)

    @property
    def is_completeness(self) -> bool:
        """Completeness findings gate the exit code; the rest are hints."""
        return self.code in COMPLETENESS_CODES

    def format(self) -> str:
        return f"{self.code.value} {self.subject}: {self.message}"


class ReportLimits(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_section_words: int = Field(constants.DEFAULT_MAX_SECTION_WORDS, gt=0)
    jargon_denylist: Tuple[str, ...] = constants.DEFAULT_JARGON_DENYLIST
    abbreviation_allowlist: Tuple[str, ...] = constants.DEFAULT_ABBREVIATION_ALLOWLIST


def mitigation_tag(mitigation: str) -> str:
    return normalize_whitespace(mitigation).lower()


def executive_summary(purpose: str, risk_count: int, requirement_count: int) -> str:
    risks = "risk" if risk_count == 1 else "risks"
    requirements = "requirement is" if requirement_count == 1 else "requirements are"
    return (
        f"{as_sentence(purpose)} "
        f"{risk_count} potential privacy {risks} identified and addressed. "
        f"{requirement_count} {requirements} explained in plain language."
    )


def combine(
    simplified: SimplifiedRequirements,
    explanations: Sequence[ThreatExplanation],
    entries: Sequence[StrideEntry],
    metadata: ReportMetadata,
    requirements: Sequence[Requirement] = (),
) -> ReportModel:
    """
    Joins the simplified requirements and one explanation per in-scope entry
    into a ReportModel. `entries` are the in-scope entries; `requirements`
    supplies the priorities shown next to each requirement item.
    """
    by_id = {entry.id: entry for entry in entries}
    explained: Dict[str, ThreatExplanation] = {}
    duplicates = set()
    for explanation in explanations:
        if explanation.entry_id in explained:
            duplicates.add(explanation.entry_id)
        explained[explanation.entry_id] = explanation
    mismatched = (set(by_id) ^ set(explained)) | duplicates
    if mismatched:
        raise CoverageMismatchError(mismatched)

    sections = [
        ThreatSection(
            entry_id=entry_id,
            title=by_id[entry_id].title,
            what=explained[entry_id].what,
            why=explained[entry_id].why,
            how=explained[entry_id].how,
            mitigation_tag=mitigation_tag(by_id[entry_id].mitigation),
        )
        for entry_id in sorted(by_id)
    ]

    priorities = {r.id: r.priority for r in requirements}
    items = [
        RequirementItem(
            requirement_id=item.requirement_id,
            plain_text=item.plain_text,
            rationale=item.rationale,
            priority=priorities.get(item.requirement_id),
        )
        for item in simplified.items
    ]

    logger.info(f"Combined {len(items)} requirement items and {len(sections)} threat sections")
    return ReportModel(
        executive_summary=executive_summary(simplified.purpose, len(sections), len(items)),
        system_description=simplified.system_description,
        purpose=simplified.purpose,
        requirement_items=items,
        threat_sections=sections,
        metadata=metadata,
    )


def group_by_mitigation(model: ReportModel) -> ReportModel:
    """Merges sections that share a mitigation tag; order follows each group's first entry."""
    groups: Dict[str, List[ThreatSection]] = {}
    for section in model.threat_sections:
        groups.setdefault(section.mitigation_tag, []).append(section)

    sections: List[ThreatSection] = []
    for members in groups.values():
        head = members[0]
        if len(members) == 1:
            sections.append(head)
            continue
        parts = [part for member in members for part in member.parts()]
        sections.append(head.model_copy(update={"merged": parts}))

    if len(sections) == len(model.threat_sections):
        return model
    logger.info(f"Grouped {len(model.threat_sections)} threat sections into {len(sections)}")
    return model.model_copy(update={"threat_sections": sections})


# --- Quality checks ---

_ABBREVIATION_RE = re.compile(r"\b[A-Z]{2,6}\b")


def _text_blocks(model: ReportModel) -> Iterator[Tuple[str, str]]:
    """(subject, text) for every prose block, in rendering order."""
    yield "executive_summary", model.executive_summary
    yield "system_description", model.system_description
    yield "purpose", model.purpose
    for item in model.requirement_items:
        yield item.requirement_id, item.plain_text
        yield item.requirement_id, item.rationale
    for section in model.threat_sections:
        for part in section.parts():
            yield part.entry_id, part.title
            yield part.entry_id, part.what
            yield part.entry_id, part.why
        yield section.entry_id, section.how


_FORM_WORD_RE = re.compile(r"[A-Za-z0-9]+")
# Skipped when matching initials, as in "Department of Transport (DT)"
_CONNECTOR_WORDS = frozenset({"a", "an", "and", "for", "in", "of", "on", "the", "to"})


def _initials_match(words: List[str], abbreviation: str) -> bool:
    """Every word either supplies the next letter of the abbreviation or is a connector."""
    letters = abbreviation.lower()
    position = 0
    for word in words:
        if position < len(letters) and word[0].lower() == letters[position]:
            position += 1
        elif word.lower() not in _CONNECTOR_WORDS:
            return False
    return position == len(letters)


def _is_expanded(text: str, start: int, end: int) -> bool:
    """"Long Form (LF)" or "LF (Long Form)" at this occurrence, judged by initials."""
    abbreviation = text[start:end]
    if start > 0 and text[start - 1] == "(" and text[end:end + 1] == ")":
        preceding = _FORM_WORD_RE.findall(text[:start - 1])
        candidate: List[str] = []
        for word in reversed(preceding):
            candidate.insert(0, word)
            if _initials_match(candidate, abbreviation):
                return True
            if len(candidate) > 2 * len(abbreviation):
                break
        return False
    following = re.match(r"\s*\(([^()]*)\)", text[end:])
    return following is not None and _initials_match(_FORM_WORD_RE.findall(following.group(1)), abbreviation)


def _abbreviation_findings(text: str, allowlist: Iterable[str]) -> List[QaFinding]:
    allowed = set(allowlist)
    seen = set()
    findings: List[QaFinding] = []
    for match in _ABBREVIATION_RE.finditer(text):
        token = match.group(0)
        if token in allowed or token in seen:
            continue
        seen.add(token)
        if not _is_expanded(text, match.start(), match.end()):
            findings.append(QaFinding(
                code=QaCode.UNDEFINED_ABBREVIATION,
                message="abbreviation is not spelled out at its first use",
                subject=token,
            ))
    return findings


def _jargon_findings(blocks: List[Tuple[str, str]], denylist: Iterable[str]) -> List[QaFinding]:
    findings: List[QaFinding] = []
    for term in denylist:
        pattern = re.compile(rf"\b{re.escape(term)}\b")
        for subject, text in blocks:
            if not pattern.search(text):
                continue
            lowered = text.lower()
            if not any(marker in lowered for marker in constants.EXPLANATION_MARKERS):
                findings.append(QaFinding(
                    code=QaCode.JARGON_TERM,
                    message=f"'{term}' is used in {subject} without an explanation",
                    subject=term,
                ))
                break
    return findings


def qa_check(
    model: ReportModel,
    bundle: ProjectBundle,
    scope: PrivacyScope,
    limits: Optional[ReportLimits] = None,
) -> List[QaFinding]:
    """Completeness against the bundle plus the readability hints."""
    limits = limits or ReportLimits()
    findings: List[QaFinding] = []

    present_threats = set(model.threat_entry_ids())
    for entry in in_scope(bundle.stride, scope):
        if entry.id not in present_threats:
            findings.append(QaFinding(
                code=QaCode.MISSING_THREAT, message="in-scope threat has no report section", subject=entry.id))

    present_requirements = set(model.requirement_ids())
    for requirement in bundle.requirements:
        if requirement.id not in present_requirements:
            findings.append(QaFinding(
                code=QaCode.MISSING_REQUIREMENT, message="requirement has no plain-language item",
                subject=requirement.id))

    blocks = list(_text_blocks(model))
    findings.extend(_abbreviation_findings("\n".join(text for _, text in blocks), limits.abbreviation_allowlist))

    tags: Dict[str, List[str]] = {}
    for section in model.threat_sections:
        tags.setdefault(section.mitigation_tag, []).append(section.entry_id)
    for tag, entry_ids in tags.items():
        if len(entry_ids) > 1:
            findings.append(QaFinding(
                code=QaCode.REDUNDANT_MITIGATION,
                message=f"sections {', '.join(entry_ids)} share this protection; consider grouping them",
                subject=tag,
            ))

    for section in model.threat_sections:
        named = [(f"what of {p.entry_id}", p.entry_id, p.what) for p in section.parts()]
        named += [(f"why of {p.entry_id}", p.entry_id, p.why) for p in section.parts()]
        named.append((f"how of {section.entry_id}", section.entry_id, section.how))
        for label, subject, text in named:
            words = count_words(text)
            if words > limits.max_section_words:
                findings.append(QaFinding(
                    code=QaCode.OVER_LENGTH,
                    message=f"{label} has {words} words (limit {limits.max_section_words})",
                    subject=subject,
                ))

    findings.extend(_jargon_findings(blocks, limits.jargon_denylist))
    logger.info(f"Quality check produced {len(findings)} findings")
    return findings


def has_completeness_failures(findings: Iterable[QaFinding]) -> bool:
    return any(f.is_completeness for f in findings)
