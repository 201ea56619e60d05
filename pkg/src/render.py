"""
Renders a ReportModel as one self-contained HTML file and reads the model
back out of such a file.
"""

import json
import logging
import re
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import ValidationError

from . import constants
from .errors import SchemaViolationError
from .report import ReportModel
from .stride import ThreatCategory

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"
STATIC_DIR = Path(__file__).parent / "static"

_MODEL_SCRIPT_RE = re.compile(
    r'<script type="application/json" id="report-model">(.*?)</script>', re.DOTALL)


def _load_static(filename: str) -> str:
    """Reads a static file's content from the static directory."""
    return (STATIC_DIR / filename).read_text(encoding="utf-8")


def _environment() -> Environment:
    return Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=True,
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )


def embedded_model_json(model: ReportModel) -> str:
    """The model as JSON that is safe inside a <script> element."""
    text = json.dumps(model.model_dump(mode="json"), indent=2, ensure_ascii=False)
    return text.replace("&", "\\u0026").replace("<", "\\u003c").replace(">", "\\u003e")


def render_html(model: ReportModel) -> str:
    """Pure function of the model; the timestamp comes from its metadata."""
    template = _environment().get_template("report.html.j2")
    scope_labels = [ThreatCategory(code).label for code in model.metadata.scope]
    html = template.render(
        model=model,
        headings=constants.REPORT_SECTIONS,
        no_risks_text=constants.NO_RISKS_TEXT,
        scope_labels=scope_labels,
        inline_css=_load_static("report.css"),
        model_json=embedded_model_json(model),
    )
    logger.debug(f"Rendered report with {len(model.threat_sections)} threat sections")
    return html


def read_report_model(html: str, source: str = constants.REPORT_FILE) -> ReportModel:
    """Recovers the ReportModel embedded by render_html."""
    match = _MODEL_SCRIPT_RE.search(html)
    if not match:
        raise SchemaViolationError(source, "$", "no embedded report model found")
    try:
        return ReportModel.model_validate(json.loads(match.group(1)))
    except json.JSONDecodeError as e:
        raise SchemaViolationError(source, "$", f"invalid embedded JSON: {e.msg}")
    except ValidationError as e:
        first = e.errors()[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in first["loc"])
        raise SchemaViolationError(source, path, first["msg"])
