"""
Loads and cross-validates a project bundle: monitoring use case,
requirements, DFD and STRIDE analysis.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from . import constants
from .dfd_model import IDENT_PATTERN, Dfd, Diagnostic, Severity, parse_dfd, serialize_dsl
from .errors import MissingFileError, SchemaViolationError
from .stride import ElementKind, Priority, RefKind, StrideEntry, applicable_categories, dump_stride
from .utils import atomic_write_text, content_hash, create_directories, read_utf8

logger = logging.getLogger(__name__)


class DataItem(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(min_length=1)
    description: str = ""
    sensitive: bool = False


class MonitoringUseCase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(pattern=f"^{IDENT_PATTERN}$")
    title: str = Field(min_length=1)
    goal: str = Field(min_length=1)
    scenario: str = Field(min_length=1)
    monitored_data: Tuple[DataItem, ...] = Field(min_length=1)
    equipment: Tuple[str, ...] = ()
    monitored_stakeholders: Tuple[str, ...] = ()


class Requirement(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(pattern=f"^{IDENT_PATTERN}$")
    text: str = Field(min_length=1)
    use_case: str
    priority: Optional[Priority] = None


@dataclass(frozen=True)
class ProjectBundle:
    use_case: MonitoringUseCase
    requirements: Tuple[Requirement, ...]
    dfd: Dfd
    stride: Tuple[StrideEntry, ...]
    # file name -> sha256 of the bytes read; empty for bundles built in memory
    source_hashes: Dict[str, str] = field(default_factory=dict, compare=False)


_REQUIREMENTS = TypeAdapter(List[Requirement])
_STRIDE = TypeAdapter(List[StrideEntry])


def _json_path(loc: Tuple[Any, ...]) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _schema_error(file: str, error: ValidationError) -> SchemaViolationError:
    first = error.errors()[0]
    return SchemaViolationError(file, _json_path(tuple(first["loc"])), first["msg"])


def _read_text(directory: Path, name: str) -> str:
    path = directory / name
    if not path.is_file():
        raise MissingFileError(name)
    return read_utf8(path, name)


def _read_json(directory: Path, name: str) -> Any:
    try:
        return json.loads(_read_text(directory, name))
    except json.JSONDecodeError as e:
        raise SchemaViolationError(name, "$", f"invalid JSON: {e.msg} (line {e.lineno})")


def _check_unique(file: str, ids: List[str]) -> None:
    seen = set()
    for index, item_id in enumerate(ids):
        if item_id in seen:
            raise SchemaViolationError(file, f"$[{index}].id", f"duplicate id '{item_id}'")
        seen.add(item_id)


def load_dfd(directory: Path) -> Dfd:
    """Reads only `model.dfd`; used before a STRIDE analysis exists."""
    return parse_dfd(_read_text(Path(directory), constants.DFD_FILE))


def load_project(directory: Path) -> ProjectBundle:
    """Reads the four project files and enforces every per-type invariant."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFileError(str(directory))
    for name in constants.PROJECT_FILES:
        if not (directory / name).is_file():
            raise MissingFileError(name)

    try:
        use_case = MonitoringUseCase.model_validate(_read_json(directory, constants.USECASE_FILE))
    except ValidationError as e:
        raise _schema_error(constants.USECASE_FILE, e)

    try:
        requirements = _REQUIREMENTS.validate_python(_read_json(directory, constants.REQUIREMENTS_FILE))
    except ValidationError as e:
        raise _schema_error(constants.REQUIREMENTS_FILE, e)
    if not requirements:
        raise SchemaViolationError(constants.REQUIREMENTS_FILE, "$", "at least one requirement is needed")
    _check_unique(constants.REQUIREMENTS_FILE, [r.id for r in requirements])
    for index, requirement in enumerate(requirements):
        if requirement.use_case != use_case.id:
            raise SchemaViolationError(
                constants.REQUIREMENTS_FILE, f"$[{index}].use_case",
                f"'{requirement.use_case}' does not match use case '{use_case.id}'")

    dfd = load_dfd(directory)

    try:
        stride = _STRIDE.validate_python(_read_json(directory, constants.STRIDE_FILE))
    except ValidationError as e:
        raise _schema_error(constants.STRIDE_FILE, e)
    _check_unique(constants.STRIDE_FILE, [e.id for e in stride])

    hashes = {name: content_hash(directory / name) for name in constants.PROJECT_FILES}
    logger.info(
        f"Loaded project '{use_case.title}': {len(requirements)} requirements, "
        f"{len(dfd.nodes)} nodes, {len(stride)} STRIDE entries")
    return ProjectBundle(
        use_case=use_case,
        requirements=tuple(requirements),
        dfd=dfd,
        stride=tuple(stride),
        source_hashes=hashes,
    )


def dump_project(bundle: ProjectBundle, directory: Path) -> None:
    """Writes the bundle as the four project files; inverse of load_project."""
    directory = Path(directory)
    create_directories(directory)
    use_case = bundle.use_case.model_dump(mode="json")
    requirements = [r.model_dump(mode="json", exclude_none=True) for r in bundle.requirements]
    atomic_write_text(directory / constants.USECASE_FILE, json.dumps(use_case, indent=2, ensure_ascii=False) + "\n")
    atomic_write_text(
        directory / constants.REQUIREMENTS_FILE, json.dumps(requirements, indent=2, ensure_ascii=False) + "\n")
    atomic_write_text(directory / constants.DFD_FILE, serialize_dsl(bundle.dfd))
    atomic_write_text(directory / constants.STRIDE_FILE, dump_stride(bundle.stride))


def cross_ref_check(bundle: ProjectBundle) -> List[Diagnostic]:
    """X1 dangling target, X2 category not applicable, X3 sensitive data in no flow."""
    findings: List[Diagnostic] = []
    dfd = bundle.dfd

    for entry in bundle.stride:
        target = entry.target
        if target.kind is RefKind.FLOW:
            kind = ElementKind.FLOW if dfd.flow(target.id) else None
        else:
            node = dfd.node(target.id)
            kind = ElementKind.of_node(node.kind) if node else None

        if kind is None:
            findings.append(Diagnostic(
                Severity.ERROR, "X1", f"target {target.kind.value} '{target.id}' is not in the DFD", entry.id))
        elif entry.category not in applicable_categories(kind):
            findings.append(Diagnostic(
                Severity.ERROR, "X2",
                f"{entry.category.label} does not apply to a {kind.value} element", entry.id))

    labels = [flow.label.lower() for flow in dfd.flows]
    for item in bundle.use_case.monitored_data:
        if item.sensitive and not any(item.name.lower() in label for label in labels):
            findings.append(Diagnostic(
                Severity.WARNING, "X3", "sensitive data item appears in no flow label", item.name))

    return findings
