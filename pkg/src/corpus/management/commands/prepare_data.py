import json
import logging
from pathlib import Path

from corpus.examples import build_examples
from corpus.io import read_documents, write_examples
from lmeos.commands import LmeosCommand
from lmeos.config import FORMATS
from lmeos.errors import CorpusError

logger = logging.getLogger(__name__)


class Command(LmeosCommand):
    help = "Turn a plain-text corpus into LM-EOS training examples (JSON Lines)"

    def add_arguments(self, parser):
        parser.add_argument("corpus", help="directory of .txt/.jsonl files, or one file")
        parser.add_argument("out", help="output examples file (.jsonl)")
        parser.add_argument(
            "--lookahead",
            action="store_true",
            help="also emit one-word look-ahead rows",
        )
        parser.add_argument("--format", choices=FORMATS, default="text", dest="report_format")

    def handle(self, *args, **options):
        out = Path(options["out"])
        if not out.resolve().parent.is_dir():
            raise CorpusError(f"output directory for {out} does not exist", code="PATH_NOT_FOUND")

        documents = read_documents(options["corpus"])
        examples, stats = build_examples(documents, lookahead=options["lookahead"])
        if not examples:
            logger.warning("No training examples produced from %s", options["corpus"])
            self.stderr.write(self.style.WARNING("Warning: 0 examples written"))

        try:
            write_examples(out, examples)
            stats_path = out.with_name(out.name + ".stats.json")
            stats_path.write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
        except OSError as e:
            raise CorpusError(f"Cannot write {out}: {e}", code="IO_ERROR") from e

        if options["report_format"] == "json":
            self.write_json(stats.to_dict())
            return

        summary = stats.to_dict()
        self.stdout.write(f"documents:          {summary['documents']}")
        self.stdout.write(f"sentences kept:     {summary['sentences_kept']}")
        self.stdout.write(f"sentences rejected: {summary['sentences_rejected']}")
        for reason, count in summary["rejected"].items():
            self.stdout.write(f"  {reason}: {count}")
        for variant, count in summary["examples"].items():
            self.stdout.write(f"examples {variant}: {count}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(examples)} examples to {out}"))
