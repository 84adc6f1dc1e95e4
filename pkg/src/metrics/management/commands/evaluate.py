import logging

from lmeos.commands import LmeosCommand
from lmeos.config import FORMATS
from lmeos.errors import MetricsError
from metrics.alignment import align_tokens, project_boundaries
from metrics.boundaries import check_same_tokens
from metrics.references import read_streams
from metrics.reports import read_baseline, render_table, report_row
from metrics.scoring import SegmentationReport, score

logger = logging.getLogger(__name__)


class Command(LmeosCommand):
    help = "Score hypothesis segmentations against references (P, R, F0.5, gain)"

    def add_arguments(self, parser):
        parser.add_argument("hypotheses", nargs="+", help="segments or stream files")
        parser.add_argument("--reference", nargs="+", required=True,
                            help="reference files, paired with the hypotheses in order")
        parser.add_argument("--baseline", help="baseline F0.5, or a JSON report from evaluate")
        parser.add_argument("--align", action="store_true",
                            help="align differing hypothesis tokens onto the reference")
        parser.add_argument("--name", default="hypothesis", help="row label for the text table")
        parser.add_argument("--format", choices=FORMATS, default="text", dest="report_format")

    def handle(self, *args, **options):
        hypotheses, references = options["hypotheses"], options["reference"]
        if len(hypotheses) != len(references):
            raise MetricsError(
                f"{len(hypotheses)} hypothesis files but {len(references)} reference files",
                code="LENGTH_MISMATCH",
            )
        baseline = read_baseline(options["baseline"]) if options["baseline"] else None

        reports = []
        for hyp_path, ref_path in zip(hypotheses, references):
            reports.extend(self.score_files(hyp_path, ref_path, options["align"]))
        pooled = SegmentationReport.pooled(reports)
        row = report_row(options["name"], pooled, baseline_f=baseline)
        logger.info("Scored %d streams from %d file pairs", len(reports), len(hypotheses))

        if options["report_format"] == "json":
            payload = {k: v for k, v in row.items() if k != "name"}
            payload["streams"] = len(reports)
            self.write_json(payload)
            return
        self.stdout.write(render_table([row]))
        self.stdout.write(f"streams: {len(reports)}  tp={pooled.true_positives} "
                          f"fp={pooled.false_positives} fn={pooled.false_negatives}")

    def score_files(self, hyp_path, ref_path, align):
        hyp_streams = read_streams(hyp_path)
        ref_streams = read_streams(ref_path)
        if len(hyp_streams) != len(ref_streams):
            raise MetricsError(
                f"{hyp_path} has {len(hyp_streams)} streams, {ref_path} has {len(ref_streams)}",
                code="LENGTH_MISMATCH",
            )
        reports = []
        for hyp, ref in zip(hyp_streams, ref_streams):
            boundaries = hyp.boundaries
            if hyp.tokens != ref.tokens:
                if not align:
                    check_same_tokens(hyp.tokens, ref.tokens,
                                      where=f"{hyp.source} vs {ref.source}")
                alignment = align_tokens(hyp.tokens, ref.tokens)
                logger.debug("Aligned %s onto %s with %d edits", hyp.source, ref.source,
                             alignment.distance)
                boundaries = project_boundaries(boundaries, alignment, len(ref.tokens))
            reports.append(score(boundaries, ref.boundaries))
        return reports
