"""
General utility functions.
"""

import hashlib
import logging
import os
import tempfile
from pathlib import Path

from .errors import SchemaViolationError

logger = logging.getLogger(__name__)


def create_directories(path: Path) -> None:
    """Ensures a directory path exists, creating it if necessary."""
    path.mkdir(parents=True, exist_ok=True)


def atomic_write_text(path: Path, text: str) -> None:
    """
    Writes text to a temporary file next to `path`, then renames it into place,
    so readers never observe a partially written file.
    """
    path = Path(path)
    create_directories(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    logger.debug(f"Wrote {path}")


def read_utf8(path: Path, label: str) -> str:
    """Reads a UTF-8 text file; undecodable bytes are a schema violation of `label`."""
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise SchemaViolationError(label, "$", f"not valid UTF-8 (byte {e.start})") from e


def content_hash(path: Path) -> str:
    """Returns the sha256 hex digest of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def normalize_whitespace(text: str) -> str:
    """Collapses every run of whitespace to a single space and trims the ends."""
    return " ".join(text.split())


def count_words(text: str) -> int:
    return len(text.split())


def as_sentence(text: str) -> str:
    """Trims text and makes sure it ends with sentence punctuation."""
    text = text.strip()
    if text and text[-1] not in ".!?":
        text += "."
    return text
