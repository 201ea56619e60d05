"""
Command-line interface: validate, mermaid, scaffold, generate and check.

Human-readable results go to stdout; diagnostics, errors and logs go to
stderr. Every failure maps to a documented exit code.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import constants
from .__version__ import __version__
from .artifacts import cross_ref_check, load_dfd, load_project
from .dfd_model import Diagnostic, emit_mermaid, has_errors, validate_dfd
from .errors import LoadError, MissingFileError, PrivReportError, ReviewAbortedError, SchemaViolationError
from .logic import PipelineOptions, run_pipeline
from .provider import ProviderConfig, ProviderMode
from .render import read_report_model, render_html
from .report import QaFinding, ReportLimits, group_by_mitigation, has_completeness_failures, qa_check
from .stride import PrivacyScope, ThreatCategory, coverage_check, dump_stride, scaffold_stride
from .utils import atomic_write_text, read_utf8

logger = logging.getLogger(__name__)


class CliConfig(BaseModel):
    """Contents of `privreport.json`; every key is optional."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    provider: ProviderConfig = Field(default_factory=ProviderConfig)
    scope: Tuple[str, ...] = constants.DEFAULT_SCOPE_CODES
    limits: ReportLimits = Field(default_factory=ReportLimits)
    out_dir: str = constants.DEFAULT_OUT_DIR

    @field_validator("scope")
    @classmethod
    def _known_categories(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if not value:
            raise ValueError("scope needs at least one STRIDE category")
        known = {c.value for c in ThreatCategory}
        unknown = [code for code in value if code not in known]
        if unknown:
            raise ValueError(f"unknown STRIDE categories: {', '.join(unknown)}")
        return value

    def privacy_scope(self) -> PrivacyScope:
        return PrivacyScope.from_codes(self.scope)


def load_config(path: Path, required: bool = False) -> CliConfig:
    """Reads the config file; an absent default file means all defaults."""
    path = Path(path)
    if not path.is_file():
        if required:
            raise MissingFileError(str(path))
        logger.debug(f"No config at {path}; using defaults")
        return CliConfig()
    try:
        return CliConfig.model_validate(json.loads(read_utf8(path, path.name)))
    except json.JSONDecodeError as e:
        raise SchemaViolationError(path.name, "$", f"invalid JSON: {e.msg} (line {e.lineno})")
    except ValidationError as e:
        first = e.errors()[0]
        location = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in first["loc"])
        raise SchemaViolationError(path.name, location, first["msg"])


def with_mode(provider: ProviderConfig, mode: Optional[ProviderMode]) -> ProviderConfig:
    """Applies a --offline/--live override, re-validating the result."""
    if mode is None or mode is provider.mode:
        return provider
    try:
        return ProviderConfig.model_validate({**provider.model_dump(), "mode": mode})
    except ValidationError as e:
        raise SchemaViolationError(constants.CONFIG_FILE, "$.provider", e.errors()[0]["msg"])


def setup_logging(verbose: bool) -> None:
    level_name = "DEBUG" if verbose else os.getenv(constants.LOG_LEVEL_ENV, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format=constants.LOG_FORMAT, stream=sys.stderr)


def _print_diagnostics(diagnostics: Sequence[Diagnostic]) -> None:
    for diagnostic in diagnostics:
        print(diagnostic.format(), file=sys.stderr)


def _print_findings(findings: Sequence[QaFinding]) -> None:
    for finding in findings:
        print(finding.format())
    completeness = sum(1 for f in findings if f.is_completeness)
    print(f"QA: {len(findings)} finding(s), {completeness} completeness failure(s)")


def review_pause(stage: str, checkpoint: Path) -> None:
    """Blocks until the reviewer presses Enter."""
    print(f"Review checkpoint for '{stage}': {checkpoint}", file=sys.stderr)
    try:
        input("Edit the file if needed, then press Enter to continue...")
    except EOFError:
        raise ReviewAbortedError(stage)


# --- Commands ---

def cmd_validate(args: argparse.Namespace, config: CliConfig) -> int:
    bundle = load_project(Path(args.project))
    diagnostics = (
        validate_dfd(bundle.dfd)
        + cross_ref_check(bundle)
        + coverage_check(list(bundle.stride), bundle.dfd, config.privacy_scope())
    )
    _print_diagnostics(diagnostics)
    errors = sum(1 for d in diagnostics if d.is_error)
    print(f"{errors} error(s), {len(diagnostics) - errors} warning(s)")
    return constants.EXIT_VALIDATION if errors else constants.EXIT_OK


def cmd_mermaid(args: argparse.Namespace, config: CliConfig) -> int:
    dfd = load_dfd(Path(args.project))
    diagnostics = validate_dfd(dfd)
    if has_errors(diagnostics):
        _print_diagnostics(diagnostics)
        return constants.EXIT_VALIDATION

    text = emit_mermaid(dfd)
    if args.out:
        atomic_write_text(Path(args.out), text)
        logger.info(f"Mermaid diagram written to {args.out}")
    else:
        sys.stdout.write(text)
    return constants.EXIT_OK


def cmd_scaffold(args: argparse.Namespace, config: CliConfig) -> int:
    project = Path(args.project)
    dfd = load_dfd(project)
    diagnostics = validate_dfd(dfd)
    if has_errors(diagnostics):
        _print_diagnostics(diagnostics)
        return constants.EXIT_VALIDATION

    target = project / constants.STRIDE_FILE
    if target.exists() and not args.force:
        print(f"error: {target} already exists; use --force to overwrite it", file=sys.stderr)
        return constants.EXIT_OVERWRITE

    entries = scaffold_stride(dfd, config.privacy_scope())
    atomic_write_text(target, dump_stride(entries))
    print(f"Wrote {len(entries)} skeleton entries to {target}")
    return constants.EXIT_OK


def cmd_generate(args: argparse.Namespace, config: CliConfig) -> int:
    bundle = load_project(Path(args.project))
    provider = with_mode(config.provider, args.mode)
    scope = config.privacy_scope()
    out_dir = Path(args.out or config.out_dir)
    options = PipelineOptions(
        out_dir=out_dir,
        scope=scope,
        review=args.review,
        review_hook=review_pause if args.review else None,
    )

    model = asyncio.run(run_pipeline(bundle, provider, options))

    report_path = out_dir / constants.REPORT_FILE
    atomic_write_text(report_path, render_html(model))
    print(f"Report written to {report_path}")
    if args.group:
        grouped_path = out_dir / constants.GROUPED_REPORT_FILE
        atomic_write_text(grouped_path, render_html(group_by_mitigation(model)))
        print(f"Grouped report written to {grouped_path}")

    findings = qa_check(model, bundle, scope, config.limits)
    _print_findings(findings)
    return constants.EXIT_QA if has_completeness_failures(findings) else constants.EXIT_OK


def cmd_check(args: argparse.Namespace, config: CliConfig) -> int:
    report_path = Path(args.report)
    if not report_path.is_file():
        raise MissingFileError(str(report_path))
    model = read_report_model(read_utf8(report_path, report_path.name), report_path.name)
    bundle = load_project(Path(args.project))

    # A report records the scope it was generated with; config covers reports without one.
    scope = config.privacy_scope()
    if model.metadata.scope:
        try:
            scope = PrivacyScope.from_codes(model.metadata.scope)
        except ValueError as e:
            raise SchemaViolationError(report_path.name, "$.metadata.scope", str(e))
    findings = qa_check(model, bundle, scope, config.limits)
    _print_findings(findings)
    return constants.EXIT_QA if has_completeness_failures(findings) else constants.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privreport",
        description="Turn monitoring requirements and a STRIDE analysis into a plain-language privacy report.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None,
                        help=f"Path to the config file (default: ./{constants.CONFIG_FILE})")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log debug output to stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="Check the project files and print diagnostics")
    validate.add_argument("project", help="Project directory")
    validate.set_defaults(handler=cmd_validate)

    mermaid = commands.add_parser("mermaid", help="Print the data flow diagram as Mermaid")
    mermaid.add_argument("project", help="Project directory")
    mermaid.add_argument("--out", help="Write to this file instead of stdout")
    mermaid.set_defaults(handler=cmd_mermaid)

    scaffold = commands.add_parser("scaffold", help=f"Write a skeleton {constants.STRIDE_FILE}")
    scaffold.add_argument("project", help="Project directory")
    scaffold.add_argument("--force", action="store_true", help="Overwrite an existing file")
    scaffold.set_defaults(handler=cmd_scaffold)

    generate = commands.add_parser("generate", help="Run the pipeline and write the HTML report")
    generate.add_argument("project", help="Project directory")
    mode = generate.add_mutually_exclusive_group()
    mode.add_argument("--offline", dest="mode", action="store_const", const=ProviderMode.OFFLINE,
                      help="Use the deterministic offline backend (default)")
    mode.add_argument("--live", dest="mode", action="store_const", const=ProviderMode.LIVE,
                      help="Call the configured chat-completion endpoint")
    generate.add_argument("--review", action="store_true", help="Pause after each stage for checkpoint edits")
    generate.add_argument("--out", help="Output directory for checkpoints and reports")
    generate.add_argument("--group", action="store_true",
                          help=f"Also write {constants.GROUPED_REPORT_FILE} with threats grouped by protection")
    generate.set_defaults(handler=cmd_generate, mode=None)

    check = commands.add_parser("check", help="Re-run the quality checks on a generated report")
    check.add_argument("report", help="Path to a report.html produced by this tool")
    check.add_argument("project", help="Project directory")
    check.set_defaults(handler=cmd_check)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    handler: Callable[[argparse.Namespace, CliConfig], int] = args.handler
    try:
        config_path = Path(args.config) if args.config else Path(constants.CONFIG_FILE)
        config = load_config(config_path, required=args.config is not None)
        return handler(args, config)
    except (LoadError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return constants.EXIT_LOAD
    except PrivReportError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return constants.EXIT_VALIDATION
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return constants.EXIT_INTERRUPTED
