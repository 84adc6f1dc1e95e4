import json
import logging
from pathlib import Path

from lmeos.errors import CorpusError

from .examples import TrainingExample
from .text import RawDocument

logger = logging.getLogger(__name__)

TEXT_SUFFIXES = {".txt", ".text"}
JSONL_SUFFIXES = {".jsonl", ".json"}


def _read_jsonl_documents(path):
    documents = []
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                documents.append(RawDocument(doc_id=str(record["doc_id"]), text=record["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorpusError(
                    f"{path}:{line_number}: expected {{\"doc_id\": str, \"text\": str}} ({e})",
                    code="BAD_DOCUMENT",
                ) from e
    return documents


def _read_path(path, root):
    if path.suffix.lower() in JSONL_SUFFIXES:
        return _read_jsonl_documents(path)
    doc_id = str(path.relative_to(root)) if root != path else path.name
    return [RawDocument(doc_id=doc_id, text=path.read_text(encoding="utf-8"))]


def read_documents(path):
    """Read raw documents from a directory, a text file or a JSON Lines file.

    In a directory every ``*.txt`` file is one document (``doc_id`` is its
    relative path) and every ``*.jsonl`` file holds ``{"doc_id", "text"}``
    records.

    Raises:
        CorpusError: unreadable input, bad UTF-8 or duplicate ``doc_id``.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"Corpus path {path} does not exist", code="PATH_NOT_FOUND")

    if path.is_dir():
        files = sorted(
            p for p in path.rglob("*")
            if p.is_file() and p.suffix.lower() in TEXT_SUFFIXES | JSONL_SUFFIXES
        )
        root = path
    else:
        files = [path]
        root = path

    documents = []
    seen = set()
    for file_path in files:
        try:
            found = _read_path(file_path, root)
        except UnicodeDecodeError as e:
            raise CorpusError(f"{file_path} is not valid UTF-8", code="BAD_ENCODING") from e
        except OSError as e:
            raise CorpusError(f"Cannot read {file_path}: {e}", code="IO_ERROR") from e
        for doc in found:
            if doc.doc_id in seen:
                raise CorpusError(f"Duplicate doc_id {doc.doc_id!r} in {file_path}",
                                  code="DUPLICATE_DOC_ID")
            seen.add(doc.doc_id)
            documents.append(doc)

    logger.info("Read %d documents from %s", len(documents), path)
    return documents


def write_examples(path, examples):
    """Write examples as UTF-8 JSON Lines, one example per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example.to_dict(), ensure_ascii=False))
            handle.write("\n")
    logger.info("Wrote %d examples to %s", len(examples), path)


def read_examples(path):
    path = Path(path)
    examples = []
    try:
        with path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    examples.append(TrainingExample.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise CorpusError(f"{path}:{line_number}: bad example ({e})",
                                      code="BAD_EXAMPLE") from e
    except OSError as e:
        raise CorpusError(f"Cannot read {path}: {e}", code="IO_ERROR") from e
    return examples
