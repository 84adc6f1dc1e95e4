import dataclasses
import logging
from pathlib import Path

from fusion.benchmark import read_suite
from fusion.io import write_metrics
from fusion.policies import Mode
from fusion.segmenter import compare_policies
from lmeos.commands import PolicyCommand
from lmeos.errors import FusionError
from metrics.boundaries import BoundarySet, boundaries_from_segments
from metrics.reports import render_table, report_row
from metrics.scoring import SegmentationReport, score
from tagger.serialization import load

logger = logging.getLogger(__name__)


class Command(PolicyCommand):
    help = "Run v1, v2 and v3 over a benchmark suite and print P, R, F0.5 and gain over v1"

    def add_arguments(self, parser):
        parser.add_argument("suite", help="benchmark suite (.jsonl from build_benchmark)")
        parser.add_argument("--model-v2", help="no-look-ahead tagger model for v2")
        parser.add_argument("--model-v3", help="look-ahead tagger model for v3")
        parser.add_argument("--metrics-file", help="write Prometheus counters to this file")
        self.add_policy_arguments(parser, single_policy=False)

    def handle(self, *args, **options):
        suite_path = options.pop("suite")
        model_paths = {Mode.V2: options.pop("model_v2"), Mode.V3: options.pop("model_v3")}
        metrics_file = options.pop("metrics_file")
        config = self.load_run_config(options, mode="v1", model_path=None, input_path=suite_path)
        for mode, path in model_paths.items():
            if path and not Path(path).exists():
                raise FusionError(f"--model-{mode.value} path {path} does not exist",
                                  code="PATH_NOT_FOUND")

        base = config.to_policy()
        policies = [base]
        models = {}
        for mode, path in model_paths.items():
            if path:
                policies.append(dataclasses.replace(base, mode=mode))
                models[mode] = load(path)
        suite = read_suite(suite_path)
        if not suite:
            raise FusionError(f"Suite {suite_path} holds no streams", code="EMPTY_SUITE")

        reports = {policy.mode: [] for policy in policies}
        for stream in suite:
            results = compare_policies(stream.events, policies, model_v2=models.get(Mode.V2),
                                       model_v3=models.get(Mode.V3))
            reference = BoundarySet.create(stream.boundaries, len(stream.events))
            for mode, segments in results.items():
                hypothesis = boundaries_from_segments(segments, stream.tokens)
                reports[mode].append(score(hypothesis, reference))
        logger.info("Compared %d policies over %d streams", len(policies), len(suite))

        pooled = {mode: SegmentationReport.pooled(items) for mode, items in reports.items()}
        baseline_f = pooled[Mode.V1].f_beta
        if round(baseline_f, 2) == 0:
            logger.warning("v1 scored F0.5 = 0; gains are not reported")
            baseline_f = None
        rows = [report_row(Mode.V1.value, pooled[Mode.V1])]
        for mode in (Mode.V2, Mode.V3):
            if mode in pooled:
                rows.append(report_row(mode.value, pooled[mode], baseline_f=baseline_f))

        if metrics_file:
            write_metrics(metrics_file)

        settings_text = (f"silence={base.silence_threshold_ms}ms hard={base.hard_timeout_ms}ms "
                         f"tau={base.lm_threshold} wait={base.lookahead_wait_ms}ms")

        if config.report_format == "json":
            self.write_json({
                "streams": len(suite),
                "settings": settings_text,
                "results": {row["name"]: {k: v for k, v in row.items() if k != "name"}
                            for row in rows},
            })
            return
        self.stdout.write(f"{suite_path}: {len(suite)} streams, {settings_text}")
        self.stdout.write(render_table(rows, label="policy"))
