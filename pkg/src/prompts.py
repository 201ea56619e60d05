"""
Prompt templates (role, instructions, context, constraints, examples),
prompt assembly with XML-tagged context slots, and parsing of the tagged
parts of a completion.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from . import constants
from .errors import MissingSlotError, UnclosedScratchpadError

logger = logging.getLogger(__name__)

SCRATCHPAD_OPEN = "<scratchpad>"
SCRATCHPAD_CLOSE = "</scratchpad>"

AGENT_DFD_SUMMARY = constants.STAGE_DFD_SUMMARY
AGENT_EASYREQ = constants.STAGE_EASYREQ
AGENT_STRIDE_HANDLER = constants.STAGE_STRIDE_HANDLER


@dataclass(frozen=True)
class PromptTemplate:
    agent: str
    role: str
    instructions: str
    context_slots: Tuple[str, ...]
    constraints: str = ""
    examples: Tuple[Tuple[str, str], ...] = ()
    scratchpad_steps: Tuple[str, ...] = ()
    extended_reasoning: bool = False

    def __post_init__(self):
        if not self.role.strip() or not self.instructions.strip():
            raise ValueError(f"template '{self.agent}' needs a role and instructions")
        if len(set(self.context_slots)) != len(self.context_slots):
            raise ValueError(f"template '{self.agent}' declares a slot twice")


@dataclass(frozen=True)
class AgentRequest:
    agent: str
    system_text: str
    user_text: str
    temperature: float = constants.DEFAULT_TEMPERATURE
    max_output_tokens: int = constants.DEFAULT_MAX_OUTPUT_TOKENS
    extended_reasoning: bool = False
    # Filled slot values, kept for the offline backend and for inspection.
    slots: Mapping[str, str] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class AgentOutput:
    raw: str
    scratchpad: Optional[str]
    body: str


def build_prompt(
    template: PromptTemplate,
    slot_values: Mapping[str, str],
    *,
    temperature: float = constants.DEFAULT_TEMPERATURE,
    max_output_tokens: int = constants.DEFAULT_MAX_OUTPUT_TOKENS,
) -> AgentRequest:
    """Assembles the request text: instructions, tagged slots, constraints, scratchpad steps, examples."""
    for slot in template.context_slots:
        if slot not in slot_values:
            raise MissingSlotError(slot)

    parts = [template.instructions.strip()]
    for slot in template.context_slots:
        parts.append(f"<{slot}>\n{slot_values[slot].strip()}\n</{slot}>")
    if template.constraints.strip():
        parts.append(template.constraints.strip())
    if template.scratchpad_steps:
        steps = "\n".join(f"{i}. {step}" for i, step in enumerate(template.scratchpad_steps, start=1))
        parts.append(
            "Before writing your final output, use the scratchpad to:\n"
            f"{steps}\n"
            f"{SCRATCHPAD_OPEN}[Your analysis here]{SCRATCHPAD_CLOSE}"
        )
    if template.examples:
        rendered = "\n".join(
            f"<example>\n<input>\n{given}\n</input>\n<output>\n{expected}\n</output>\n</example>"
            for given, expected in template.examples
        )
        parts.append(f"<examples>\n{rendered}\n</examples>")

    return AgentRequest(
        agent=template.agent,
        system_text=template.role.strip(),
        user_text="\n\n".join(parts),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        extended_reasoning=template.extended_reasoning,
        slots={slot: slot_values[slot] for slot in template.context_slots},
    )


_SCRATCHPAD_TAG_RE = re.compile(f"{re.escape(SCRATCHPAD_OPEN)}|{re.escape(SCRATCHPAD_CLOSE)}")


def strip_scratchpad(raw: str) -> AgentOutput:
    """
    Moves every scratchpad block out of the completion body. Blocks may nest;
    everything up to the close tag that balances the outermost open tag is
    scratchpad. A close tag with no open block is dropped.
    """
    notes: List[str] = []
    kept: List[str] = []
    depth = 0
    cursor = 0
    block_start = 0
    for tag in _SCRATCHPAD_TAG_RE.finditer(raw):
        if tag.group(0) == SCRATCHPAD_OPEN:
            if depth == 0:
                kept.append(raw[cursor:tag.start()])
                block_start = tag.end()
            depth += 1
        elif depth == 0:
            kept.append(raw[cursor:tag.start()])
        else:
            depth -= 1
            if depth == 0:
                notes.append(raw[block_start:tag.start()].strip())
        if depth == 0:
            cursor = tag.end()
    if depth:
        raise UnclosedScratchpadError()
    kept.append(raw[cursor:])

    body = "".join(kept).strip()
    return AgentOutput(raw=raw, scratchpad="\n\n".join(notes) if notes else None, body=body)


def extract_part(body: str, name: str) -> Optional[str]:
    """Text of the first non-empty `<name>...</name>` block, or None."""
    match = re.search(rf"<{name}>(.*?)</{name}>", body, re.DOTALL)
    if not match or not match.group(1).strip():
        return None
    return match.group(1).strip()


_ITEM_RE = re.compile(r'<item\s+id="([^"]+)"\s*>(.*?)</item>', re.DOTALL)


def extract_items(body: str) -> Dict[str, str]:
    """`<item id="...">` blocks keyed by id; a repeated id keeps its first block."""
    items: Dict[str, str] = {}
    for item_id, content in _ITEM_RE.findall(body):
        items.setdefault(item_id.strip(), content)
    return items


# --- Agent templates ---

DFD_SUMMARY_TEMPLATE = PromptTemplate(
    agent=AGENT_DFD_SUMMARY,
    role=(
        "You are a privacy engineer who explains system architecture diagrams "
        "to people without a technical background."
    ),
    instructions=(
        "You receive a data flow diagram in Mermaid syntax and a structural description of it. "
        "Write a short plain-language summary of the components, the data that moves between them "
        "and the trust boundaries the data crosses. Keep every component name exactly as given so a "
        "reviewer can check the summary against the diagram."
    ),
    context_slots=("mermaid", "structure"),
    constraints=(
        "Do not add components or flows that are not in the diagram. "
        "Wrap the final summary in <summary></summary> tags."
    ),
    scratchpad_steps=(
        "List every component and its kind",
        "Trace each data flow from source to destination",
        "Note which flows leave a trust boundary",
    ),
)

EASYREQ_TEMPLATE = PromptTemplate(
    agent=AGENT_EASYREQ,
    role=(
        "You are a security engineer with expertise in explaining technical security "
        "information to non-technical stakeholders such as shop-floor workers and worker unions."
    ),
    instructions=(
        "Rewrite the monitoring use case and each of its requirements in clear, everyday language. "
        "Describe what the system does and why it is being built, not how it is built. "
        "For every requirement, also give a short rationale explaining the benefit it is meant to bring."
    ),
    context_slots=("use_case", "requirements"),
    constraints=(
        "Avoid jargon and acronyms; if one cannot be avoided, spell it out at first use.\n"
        "Answer with exactly these tags:\n"
        "<system_description>what the system does</system_description>\n"
        "<purpose>why it is being built</purpose>\n"
        'and one <item id="REQUIREMENT_ID"><plain_text>...</plain_text><rationale>...</rationale></item> '
        "per requirement, using the requirement ids given."
    ),
    scratchpad_steps=(
        "Identify the core purpose of the technical requirement",
        "Mark the technical terms that must be replaced or explained",
        "Name the business risk each requirement reduces",
        "Decide what the affected workers will care about most",
    ),
)

STRIDE_HANDLER_TEMPLATE = PromptTemplate(
    agent=AGENT_STRIDE_HANDLER,
    role=(
        "You are a privacy engineer who explains security threats and their mitigations "
        "to the workers who are monitored by a system."
    ),
    instructions=(
        "Explain one analysed threat from the STRIDE analysis. Use the diagram, its summary and the "
        "requirements for context, and illustrate the threat with a concrete example from the workplace."
    ),
    context_slots=("mermaid", "summary", "requirements", "entry"),
    constraints=(
        "Answer with exactly three tags:\n"
        "<what>the threat in plain language</what>\n"
        "<why>what it would mean for the monitored workers</why>\n"
        "<how>how the planned protection works</how>\n"
        "Avoid jargon and acronyms."
    ),
    extended_reasoning=True,
)
