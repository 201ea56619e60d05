"""
Centralized constants for the application.
This includes project file names, checkpoint names and the defaults that
apply when no `privreport.json` is present.
"""

# --- Project files ---
USECASE_FILE = "usecase.json"
REQUIREMENTS_FILE = "requirements.json"
DFD_FILE = "model.dfd"
STRIDE_FILE = "stride.json"
# Load order; also the order of the content hashes in report metadata
PROJECT_FILES = (USECASE_FILE, REQUIREMENTS_FILE, DFD_FILE, STRIDE_FILE)

CONFIG_FILE = "privreport.json"
REPORT_FILE = "report.html"
GROUPED_REPORT_FILE = "report.grouped.html"
DEFAULT_OUT_DIR = "out"

# --- Pipeline stages and their checkpoints ---
STAGE_DFD_SUMMARY = "dfd_summary"
STAGE_EASYREQ = "easyreq"
STAGE_STRIDE_HANDLER = "stride_handler"
STAGE_COMBINE = "combine"

CHECKPOINT_FILES = {
    STAGE_DFD_SUMMARY: "01_dfd.json",
    STAGE_EASYREQ: "02_easyreq.json",
    STAGE_STRIDE_HANDLER: "03_explanations.json",
    STAGE_COMBINE: "04_report.json",
}

# --- Provider defaults ---
DEFAULT_API_KEY_ENV = "PRIVREPORT_API_KEY"
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 2048
DEFAULT_RETRIES = 2
DEFAULT_CONCURRENCY_LIMIT = 4
DEFAULT_TIMEOUT_SECONDS = 60.0
DEFAULT_BACKOFF_FACTOR = 0.5
OFFLINE_MODEL_NAME = "offline"

# --- Privacy scope ---
DEFAULT_SCOPE_CODES = ("S", "T", "I")

# --- Report QA ---
DEFAULT_MAX_SECTION_WORDS = 180
DEFAULT_ABBREVIATION_ALLOWLIST = ("GDPR", "HTML", "ID")
DEFAULT_JARGON_DENYLIST = ("TLS", "AES", "API")
EXPLANATION_MARKERS = ("that is,", "meaning")

# --- Report headings, in rendering order ---
REPORT_SECTIONS = {
    "executive_summary": "Executive Summary",
    "system_description": "What This System Does",
    "purpose": "Why It Is Being Built",
    "requirements": "Your Requirements In Plain Language",
    "risks": "Privacy Risks And Protections",
    "about": "About This Report",
}
NO_RISKS_TEXT = "No in-scope privacy risks were analysed."

# --- Exit codes ---
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_LOAD = 2
EXIT_OVERWRITE = 3
EXIT_QA = 4
EXIT_INTERRUPTED = 130

# --- Logging ---
LOG_LEVEL_ENV = "PRIVREPORT_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
