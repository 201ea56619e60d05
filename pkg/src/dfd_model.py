"""
Data Flow Diagram model: the line-based DSL reader and writer, structural
validation, deterministic Mermaid emission and the plain-text summary.

DSL (one declaration per line, `#` starts a comment outside quotes):

    entity <id> "<name>" | process <id> "<name>" | store <id> "<name>"
    boundary <id> "<name>" { <id> <id> ... }
    flow <id> <source-id> -> <target-id> "<label>"
"""

import logging
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import (
    DfdSyntaxError,
    DuplicateIdError,
    EmptyDiagramError,
    PreconditionViolated,
    UnknownReferenceError,
)

logger = logging.getLogger(__name__)

IDENT_PATTERN = r"[a-z][a-z0-9_]*"
_STRING = r'"((?:[^"\\]|\\.)*)"'

_NODE_RE = re.compile(rf"^(entity|process|store)\s+({IDENT_PATTERN})\s+{_STRING}$")
_FLOW_RE = re.compile(
    rf"^flow\s+({IDENT_PATTERN})\s+({IDENT_PATTERN})\s*->\s*({IDENT_PATTERN})\s+{_STRING}$"
)
_BOUNDARY_RE = re.compile(rf"^boundary\s+({IDENT_PATTERN})\s+{_STRING}\s*\{{([^{{}}]*)\}}$")
_IDENT_RE = re.compile(rf"^{IDENT_PATTERN}$")
_ESCAPE_RE = re.compile(r"\\(?:u([0-9a-fA-F]{4})|(.))")


class NodeKind(Enum):
    EXTERNAL_ENTITY = "entity"
    PROCESS = "process"
    DATA_STORE = "store"


class Severity(Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class DfdNode:
    id: str
    name: str
    kind: NodeKind


@dataclass(frozen=True)
class DataFlow:
    id: str
    source: str
    target: str
    label: str


@dataclass(frozen=True)
class TrustBoundary:
    id: str
    name: str
    members: Tuple[str, ...]


@dataclass(frozen=True)
class Dfd:
    nodes: Tuple[DfdNode, ...]
    flows: Tuple[DataFlow, ...] = ()
    boundaries: Tuple[TrustBoundary, ...] = ()

    def node(self, node_id: str) -> Optional[DfdNode]:
        return next((n for n in self.nodes if n.id == node_id), None)

    def flow(self, flow_id: str) -> Optional[DataFlow]:
        return next((f for f in self.flows if f.id == flow_id), None)

    def name_of(self, node_id: str) -> str:
        """Display name of a node, falling back to its id when undeclared."""
        node = self.node(node_id)
        return node.name if node else node_id

    def membership(self) -> Dict[str, str]:
        """Maps node id to the id of the first boundary listing it."""
        owners: Dict[str, str] = {}
        for boundary in self.boundaries:
            for member in boundary.members:
                owners.setdefault(member, boundary.id)
        return owners


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    subject: Optional[str] = None

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def format(self) -> str:
        return f"{self.severity.value} {self.code} {self.subject or '-'}: {self.message}"


def has_errors(diagnostics: List[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


# --- DSL reader / writer ---

def _strip_comment(line: str) -> str:
    """Drops everything from the first `#` that is not inside a quoted string."""
    in_string = False
    escaped = False
    for i, char in enumerate(line):
        if escaped:
            escaped = False
        elif char == "\\" and in_string:
            escaped = True
        elif char == '"':
            in_string = not in_string
        elif char == "#" and not in_string:
            return line[:i]
    return line


_NAMED_ESCAPES = {"n": "\n", "r": "\r", "t": "\t"}
_NAMED_ESCAPES_OUT = {value: f"\\{key}" for key, value in _NAMED_ESCAPES.items()}


def _needs_escape(char: str) -> bool:
    # str.splitlines() treats every one of these as a line break
    return unicodedata.category(char) in ("Cc", "Zl", "Zp")


def _unquote(raw: str) -> str:
    def decode(match: "re.Match[str]") -> str:
        if match.group(1):
            return chr(int(match.group(1), 16))
        return _NAMED_ESCAPES.get(match.group(2), match.group(2))

    return _ESCAPE_RE.sub(decode, raw)


def _quote(text: str) -> str:
    out = ['"']
    for char in text:
        if char in ('"', "\\"):
            out.append("\\" + char)
        elif char in _NAMED_ESCAPES_OUT:
            out.append(_NAMED_ESCAPES_OUT[char])
        elif _needs_escape(char):
            out.append(f"\\u{ord(char):04x}")
        else:
            out.append(char)
    out.append('"')
    return "".join(out)


def parse_dfd(text: str) -> Dfd:
    """Parses a DSL document into a Dfd, preserving declaration order."""
    nodes: List[DfdNode] = []
    flows: List[DataFlow] = []
    boundaries: List[TrustBoundary] = []
    seen: Dict[str, set] = {"node": set(), "flow": set(), "boundary": set()}

    def claim(namespace: str, element_id: str) -> None:
        if element_id in seen[namespace]:
            raise DuplicateIdError(element_id)
        seen[namespace].add(element_id)

    # Statements end at "\n" only; \x0b, \x85 and \u2028 are ordinary characters here.
    for line_no, raw_line in enumerate(text.split("\n"), start=1):
        raw_line = raw_line.rstrip("\r")
        line = _strip_comment(raw_line).strip()
        if not line:
            continue

        match = _NODE_RE.match(line)
        if match:
            keyword, node_id, name = match.group(1), match.group(2), _unquote(match.group(3))
            if not name.strip():
                raise DfdSyntaxError(line_no, f"{keyword} '{node_id}' has an empty name")
            claim("node", node_id)
            nodes.append(DfdNode(id=node_id, name=name, kind=NodeKind(keyword)))
            continue

        match = _FLOW_RE.match(line)
        if match:
            flow_id, source, target, label = match.groups()
            label = _unquote(label)
            if not label.strip():
                raise DfdSyntaxError(line_no, f"flow '{flow_id}' has an empty label")
            claim("flow", flow_id)
            flows.append(DataFlow(id=flow_id, source=source, target=target, label=label))
            continue

        match = _BOUNDARY_RE.match(line)
        if match:
            boundary_id, name, body = match.group(1), _unquote(match.group(2)), match.group(3)
            members = body.split()
            if not name.strip():
                raise DfdSyntaxError(line_no, f"boundary '{boundary_id}' has an empty name")
            if not members:
                raise DfdSyntaxError(line_no, f"boundary '{boundary_id}' lists no members")
            bad = [m for m in members if not _IDENT_RE.match(m)]
            if bad:
                raise DfdSyntaxError(line_no, f"invalid member id '{bad[0]}'")
            if len(set(members)) != len(members):
                raise DfdSyntaxError(line_no, f"boundary '{boundary_id}' lists a member twice")
            claim("boundary", boundary_id)
            boundaries.append(TrustBoundary(id=boundary_id, name=name, members=tuple(members)))
            continue

        raise DfdSyntaxError(line_no, f"unrecognised declaration: {line}")

    if not nodes:
        raise EmptyDiagramError()

    # References may point forward, so they are resolved once every line is read.
    declared = seen["node"]
    for flow in flows:
        for endpoint in (flow.source, flow.target):
            if endpoint not in declared:
                raise UnknownReferenceError(endpoint)
    for boundary in boundaries:
        for member in boundary.members:
            if member not in declared:
                raise UnknownReferenceError(member)

    logger.debug(f"Parsed DFD with {len(nodes)} nodes, {len(flows)} flows, {len(boundaries)} boundaries")
    return Dfd(nodes=tuple(nodes), flows=tuple(flows), boundaries=tuple(boundaries))


def serialize_dsl(dfd: Dfd) -> str:
    """Writes a Dfd back to the DSL: nodes, then boundaries, then flows."""
    lines = [f"{node.kind.value} {node.id} {_quote(node.name)}" for node in dfd.nodes]
    lines += [
        f"boundary {b.id} {_quote(b.name)} {{ {' '.join(b.members)} }}" for b in dfd.boundaries
    ]
    lines += [
        f"flow {f.id} {f.source} -> {f.target} {_quote(f.label)}" for f in dfd.flows
    ]
    return "\n".join(lines) + "\n"


# --- Validation ---

def validate_dfd(dfd: Dfd) -> List[Diagnostic]:
    """Applies rules D1-D5 and returns every finding."""
    findings: List[Diagnostic] = []
    kinds = {node.id: node.kind for node in dfd.nodes}

    for flow in dfd.flows:
        undeclared = [e for e in (flow.source, flow.target) if e not in kinds]
        for endpoint in undeclared:
            findings.append(Diagnostic(
                Severity.ERROR, "D1", f"flow endpoint '{endpoint}' is not declared", flow.id))
        if flow.source == flow.target:
            findings.append(Diagnostic(
                Severity.ERROR, "D5", f"flow starts and ends at '{flow.source}'", flow.id))
        if not undeclared and NodeKind.PROCESS not in (kinds[flow.source], kinds[flow.target]):
            findings.append(Diagnostic(
                Severity.WARNING, "D2", "neither endpoint of this flow is a process", flow.id))

    owners: Dict[str, List[str]] = {}
    for boundary in dfd.boundaries:
        for member in boundary.members:
            if member not in kinds:
                findings.append(Diagnostic(
                    Severity.ERROR, "D3", f"boundary member '{member}' is not declared", boundary.id))
            owners.setdefault(member, []).append(boundary.id)
    for node_id, boundary_ids in owners.items():
        if len(boundary_ids) > 1:
            findings.append(Diagnostic(
                Severity.ERROR, "D4", f"node belongs to boundaries {', '.join(boundary_ids)}", node_id))

    return findings


def _require_clean(dfd: Dfd) -> None:
    errors = [d for d in validate_dfd(dfd) if d.is_error]
    if errors:
        raise PreconditionViolated(
            f"diagram has {len(errors)} validation error(s): {errors[0].format()}",
            subjects=[d.subject or "" for d in errors],
        )


# --- Backends ---

def _mermaid_text(text: str) -> str:
    text = text.replace('"', "#quot;")
    return "".join(f"#{ord(c)};" if _needs_escape(c) else c for c in text)


def _mermaid_node(node: DfdNode) -> str:
    name = _mermaid_text(node.name)
    if node.kind is NodeKind.PROCESS:
        return f'{node.id}(("{name}"))'
    if node.kind is NodeKind.DATA_STORE:
        return f'{node.id}[("{name}")]'
    return f'{node.id}["{name}"]'


def emit_mermaid(dfd: Dfd) -> str:
    """Renders a left-to-right Mermaid flowchart; identical input gives identical bytes."""
    _require_clean(dfd)
    owners = dfd.membership()
    lines = ["flowchart LR"]
    lines += [f"  {_mermaid_node(n)}" for n in dfd.nodes if n.id not in owners]
    for boundary in dfd.boundaries:
        lines.append(f'  subgraph {boundary.id}["{_mermaid_text(boundary.name)}"]')
        lines += [f"    {_mermaid_node(dfd.node(m))}" for m in boundary.members]
        lines.append("  end")
    lines += [
        f'  {f.source} -->|"{_mermaid_text(f.label)}"| {f.target}' for f in dfd.flows
    ]
    return "\n".join(lines) + "\n"


def crossing_flows(dfd: Dfd) -> List[str]:
    """Ids of flows whose endpoints sit in different boundaries (or one in none)."""
    owners = dfd.membership()
    return [f.id for f in dfd.flows if owners.get(f.source) != owners.get(f.target)]


def _count(n: int, singular: str, plural: str) -> str:
    return f"{n} {singular if n == 1 else plural}"


def summarize_dfd(dfd: Dfd) -> str:
    """Deterministic prose description of the diagram's structure."""
    _require_clean(dfd)
    by_kind = {kind: sum(1 for n in dfd.nodes if n.kind is kind) for kind in NodeKind}
    lines = [
        "The diagram has "
        f"{_count(by_kind[NodeKind.EXTERNAL_ENTITY], 'external entity', 'external entities')}, "
        f"{_count(by_kind[NodeKind.PROCESS], 'process', 'processes')} and "
        f"{_count(by_kind[NodeKind.DATA_STORE], 'data store', 'data stores')}."
    ]

    flow_count = _count(len(dfd.flows), "data flow", "data flows")
    lines.append(f"It has {flow_count}:" if dfd.flows else f"It has {flow_count}.")
    for flow in dfd.flows:
        lines.append(f"- {dfd.name_of(flow.source)} sends {flow.label} to {dfd.name_of(flow.target)}.")

    if dfd.boundaries:
        lines.append("Trust boundaries:")
        for boundary in dfd.boundaries:
            members = ", ".join(dfd.name_of(m) for m in boundary.members)
            lines.append(f"- {boundary.name} contains {members}.")
        owners = dfd.membership()
        outside = [n.name for n in dfd.nodes if n.id not in owners]
        if outside:
            lines.append(f"- Outside any boundary: {', '.join(outside)}.")
    else:
        lines.append("No trust boundaries are defined.")

    crossing = crossing_flows(dfd)
    if crossing:
        lines.append("Boundary-crossing flows:")
        for flow_id in crossing:
            flow = dfd.flow(flow_id)
            lines.append(
                f"- Flow {flow.id} ({dfd.name_of(flow.source)} to {dfd.name_of(flow.target)}) "
                "crosses a trust boundary."
            )
    else:
        lines.append("No data flow crosses a trust boundary.")

    return "\n".join(lines) + "\n"
