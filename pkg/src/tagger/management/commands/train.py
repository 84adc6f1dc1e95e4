import logging
from pathlib import Path

from django.conf import settings

from corpus.examples import Variant
from corpus.io import read_examples
from lmeos.commands import LmeosCommand
from lmeos.config import FORMATS
from lmeos.errors import TaggerError
from tagger.model import Hyperparams
from tagger.serialization import save
from tagger.training import evaluate, train
from tagger.vocab import build_vocab

logger = logging.getLogger(__name__)


class Command(LmeosCommand):
    help = "Train an LM-EOS tagger on prepared examples and write the model file"

    def add_arguments(self, parser):
        parser.add_argument("examples", help="training examples (.jsonl from prepare_data)")
        parser.add_argument("out", help="model file to write")
        parser.add_argument("--lookahead", action="store_true",
                            help="train a one-word look-ahead model")
        parser.add_argument("--heldout", help="held-out examples for early stopping")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--embed-dim", type=int)
        parser.add_argument("--hidden-dim", type=int)
        parser.add_argument("--vocab-size", type=int)
        parser.add_argument("--min-frequency", type=int)
        parser.add_argument("--learning-rate", type=float)
        parser.add_argument("--max-epochs", type=int)
        parser.add_argument("--patience", type=int)
        parser.add_argument("--no-early-stopping", action="store_true")
        parser.add_argument("--clip-norm", type=float)
        parser.add_argument("--heldout-fraction", type=float)
        parser.add_argument("--format", choices=FORMATS, default="text", dest="report_format")

    def handle(self, *args, **options):
        out = Path(options["out"])
        if not out.resolve().parent.is_dir():
            raise TaggerError(f"output directory for {out} does not exist", code="PATH_NOT_FOUND")
        if not Path(options["examples"]).is_file():
            raise TaggerError(f"examples file {options['examples']} does not exist",
                              code="PATH_NOT_FOUND")

        hyperparams = Hyperparams.from_settings(
            embed_dim=options["embed_dim"],
            hidden_dim=options["hidden_dim"],
            vocab_size=options["vocab_size"],
            min_frequency=options["min_frequency"],
            learning_rate=options["learning_rate"],
            max_epochs=options["max_epochs"],
            patience=options["patience"],
            clip_norm=options["clip_norm"],
            heldout_fraction=options["heldout_fraction"],
        )
        if options["no_early_stopping"]:
            hyperparams = Hyperparams.from_dict({**hyperparams.to_dict(), "patience": None})
        hyperparams.validate()
        seed = options["seed"] if options["seed"] is not None else settings.LMEOS_SEED

        examples = read_examples(options["examples"])
        if not options["lookahead"]:
            examples = [ex for ex in examples if ex.variant != Variant.LOOKAHEAD]
        heldout = read_examples(options["heldout"]) if options["heldout"] else None
        vocab = build_vocab(examples, hyperparams.vocab_size, hyperparams.min_frequency)

        model, log = train(examples, vocab, hyperparams, seed=seed,
                           lookahead=options["lookahead"], heldout=heldout)
        save(model, out)
        log_path = out.with_name(out.name + ".log.csv")
        try:
            log.write_csv(log_path)
        except OSError as e:
            raise TaggerError(f"Cannot write training log {log_path}: {e}", code="IO_ERROR") from e

        final = evaluate(model, examples)
        summary = {
            "model": str(out),
            "log": str(log_path),
            "epochs": len(log.epochs),
            "best_epoch": log.best_epoch,
            "stopped_early": log.stopped_early,
            "vocab_size": len(vocab),
            "lookahead": model.lookahead,
            "train": final.to_dict(),
        }
        if options["report_format"] == "json":
            self.write_json(summary)
            return
        self.stdout.write(
            f"epochs: {summary['epochs']} (kept epoch {log.best_epoch}"
            f"{', stopped early' if log.stopped_early else ''})"
        )
        self.stdout.write(f"vocabulary: {len(vocab)} tokens")
        self.stdout.write(
            f"train loss {final.loss:.4f}, accuracy {final.accuracy:.4f}, "
            f"EOS F1 {final.eos_f1:.4f}"
        )
        self.stdout.write(self.style.SUCCESS(f"Wrote {out} and {log_path}"))
