"""
Handles the report pipeline: DFD summary, requirement simplification,
per-threat explanations and the combined report, with a JSON checkpoint
written after every stage.
"""

import asyncio
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Awaitable, Callable, List, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from . import constants
from .__version__ import __version__
from .agents import (
    DfdSummary,
    ExplanationSet,
    SimplifiedRequirements,
    StrideContext,
    ThreatExplanation,
    requirements_json,
    run_dfd_summary,
    run_easyreq,
    run_stride_handler,
)
from .artifacts import ProjectBundle, cross_ref_check
from .dfd_model import has_errors, validate_dfd
from .errors import PreconditionViolated, PrivReportError, SchemaViolationError, StageError
from .provider import ProviderClient, ProviderConfig
from .report import ReportMetadata, ReportModel, combine
from .stride import PrivacyScope, StrideEntry, in_scope
from .utils import atomic_write_text, create_directories, read_utf8

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)
T = TypeVar("T")

# (stage name, checkpoint path); returns once the reviewer is done editing
ReviewHook = Callable[[str, Path], None]


@dataclass
class PipelineOptions:
    out_dir: Path
    scope: PrivacyScope = field(default_factory=PrivacyScope.default)
    review: bool = False
    review_hook: Optional[ReviewHook] = None
    # ISO timestamp for the report metadata; derived from the mode when None
    generated_at: Optional[str] = None


def default_generated_at(config: ProviderConfig) -> str:
    """Current UTC time for live runs; SOURCE_DATE_EPOCH (or the epoch) offline."""
    if config.is_live:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")
    raw = os.getenv("SOURCE_DATE_EPOCH", "0")
    try:
        seconds = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric SOURCE_DATE_EPOCH '{raw}'")
        seconds = 0
    return datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat(timespec="seconds")


class ReportPipeline:
    """
    Runs the agent chain for one project bundle. Stages are sequential;
    explanations of the in-scope entries run concurrently up to the
    provider's concurrency limit, but are always stored in entry-id order.
    """
    def __init__(
        self,
        bundle: ProjectBundle,
        config: ProviderConfig,
        options: PipelineOptions,
        client: Optional[ProviderClient] = None,
    ):
        self.bundle = bundle
        self.config = config
        self.options = options
        self.client = client
        self.out_dir = Path(options.out_dir)

    def _check_preconditions(self, entries: List[StrideEntry]) -> None:
        findings = validate_dfd(self.bundle.dfd) + cross_ref_check(self.bundle)
        if has_errors(findings):
            errors = [d for d in findings if d.is_error]
            raise PreconditionViolated(
                f"project has {len(errors)} validation error(s); run 'validate' for details",
                subjects=[d.subject for d in errors if d.subject])
        incomplete = [e.id for e in entries if e.missing_fields()]
        if incomplete:
            raise PreconditionViolated(
                f"in-scope STRIDE entries are incomplete: {', '.join(incomplete)}", subjects=incomplete)

    async def _stage(self, stage: str, action: Callable[[], Awaitable[T]]) -> T:
        logger.info(f"Stage '{stage}' started")
        try:
            result = await action()
        except PrivReportError as e:
            logger.error(f"Stage '{stage}' failed: {e}")
            raise StageError(stage, e) from e
        logger.info(f"Stage '{stage}' finished")
        return result

    def _checkpoint(self, stage: str, value: M, model_cls: Type[M]) -> M:
        """Writes the stage output; in review mode, pauses and returns the re-read file."""
        path = self.out_dir / constants.CHECKPOINT_FILES[stage]
        try:
            atomic_write_text(path, value.model_dump_json(indent=2) + "\n")
        except OSError as e:
            logger.error(f"Could not write checkpoint {path}: {e}")
            raise StageError(stage, e) from e
        logger.info(f"Checkpoint written: {path}")

        if not self.options.review:
            return value
        logger.warning(f"Review pause after '{stage}': edit {path.name} and resume")
        if self.options.review_hook:
            self.options.review_hook(stage, path)
        try:
            return model_cls.model_validate_json(read_utf8(path, path.name))
        except SchemaViolationError as e:
            raise StageError(stage, e) from e
        except (OSError, ValidationError) as e:
            raise StageError(stage, SchemaViolationError(path.name, "$", str(e).splitlines()[0])) from e

    async def _explain_all(
        self, entries: List[StrideEntry], context: StrideContext, client: ProviderClient
    ) -> ExplanationSet:
        semaphore = asyncio.Semaphore(self.config.concurrency_limit)

        async def explain(entry: StrideEntry) -> ThreatExplanation:
            async with semaphore:
                logger.debug(f"Explaining {entry.id}")
                return await run_stride_handler(entry, context, client)

        tasks = [asyncio.ensure_future(explain(entry)) for entry in entries]
        try:
            results = await asyncio.gather(*tasks)
        except BaseException:
            for task in tasks:
                task.cancel()
            raise
        logger.info(f"Produced {len(results)} threat explanations")
        return ExplanationSet(explanations=sorted(results, key=lambda x: x.entry_id))

    async def _run_stages(self, client: ProviderClient) -> ReportModel:
        bundle = self.bundle
        entries = in_scope(bundle.stride, self.options.scope)
        logger.info(f"{len(entries)} STRIDE entries in scope {self.options.scope.codes()}")

        summary = await self._stage(
            constants.STAGE_DFD_SUMMARY, lambda: run_dfd_summary(bundle.dfd, client))
        summary = self._checkpoint(constants.STAGE_DFD_SUMMARY, summary, DfdSummary)

        simplified = await self._stage(constants.STAGE_EASYREQ, lambda: run_easyreq(bundle, client))
        simplified = self._checkpoint(constants.STAGE_EASYREQ, simplified, SimplifiedRequirements)

        context = StrideContext(
            mermaid=summary.mermaid,
            summary=summary.summary,
            requirements=requirements_json(list(bundle.requirements)),
        )
        explanations = await self._stage(
            constants.STAGE_STRIDE_HANDLER, lambda: self._explain_all(entries, context, client))
        explanations = self._checkpoint(constants.STAGE_STRIDE_HANDLER, explanations, ExplanationSet)

        metadata = ReportMetadata(
            generated_at=self.options.generated_at or default_generated_at(self.config),
            mode=self.config.mode.value,
            model_name=self.config.model_name,
            source_hashes=dict(bundle.source_hashes),
            tool_version=__version__,
            scope=self.options.scope.codes(),
            mermaid=summary.mermaid,
        )

        async def combine_stage() -> ReportModel:
            return combine(simplified, explanations.explanations, entries, metadata, bundle.requirements)

        model = await self._stage(constants.STAGE_COMBINE, combine_stage)
        return self._checkpoint(constants.STAGE_COMBINE, model, ReportModel)

    async def run(self) -> ReportModel:
        """Executes every stage and returns the (possibly reviewer-edited) report model."""
        entries = in_scope(self.bundle.stride, self.options.scope)
        self._check_preconditions(entries)
        create_directories(self.out_dir)

        if self.client is not None:
            self.client.ensure_ready()
            return await self._run_stages(self.client)

        async with ProviderClient(self.config) as client:
            client.ensure_ready()
            return await self._run_stages(client)


async def run_pipeline(
    bundle: ProjectBundle,
    config: ProviderConfig,
    options: PipelineOptions,
    client: Optional[ProviderClient] = None,
) -> ReportModel:
    return await ReportPipeline(bundle, config, options, client).run()
