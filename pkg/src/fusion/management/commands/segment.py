import json
import logging
from collections import Counter

from endpoint.events import read_events
from endpoint.replay import replay
from fusion.io import write_metrics, write_segments, write_trace
from fusion.segmenter import Segmenter
from lmeos.commands import PolicyCommand
from lmeos.errors import FusionError
from tagger.serialization import load

logger = logging.getLogger(__name__)


class Command(PolicyCommand):
    help = "Segment a word-event stream with policy v1, v2 or v3"

    def add_arguments(self, parser):
        parser.add_argument("input", help="word-event file (.jsonl or .csv)")
        parser.add_argument("--out", help="segments file (JSON Lines); stdout if omitted")
        parser.add_argument("--trace", help="write the candidate trace here (and PATH.json)")
        parser.add_argument(
            "--realtime",
            type=float,
            metavar="SPEED",
            help="replay the stream in real time at SPEED x (inf for no waiting)",
        )
        parser.add_argument("--metrics-file", help="write Prometheus counters to this file")
        self.add_policy_arguments(parser)

    def handle(self, *args, **options):
        input_path = options.pop("input")
        output_path = options.pop("out")
        trace_path = options.pop("trace")
        speed = options.pop("realtime")
        metrics_file = options.pop("metrics_file")
        config = self.load_run_config(options, input_path=input_path, output_path=output_path)
        output_path = config.output_path
        if speed is not None and not speed > 0:
            raise FusionError(f"--realtime must be positive, got {speed}", code="INVALID_POLICY")

        policy = config.to_policy()
        model = load(config.model_path) if config.model_path else None
        events = read_events(config.input_path)
        segmenter = Segmenter(
            policy,
            model=model,
            on_segment=lambda segment: logger.info(
                "Segment closed at %dms (%s): %s", segment.fired_at_ms, segment.decision.value,
                " ".join(segment.tokens),
            ),
        )

        if speed is None:
            source = events
        else:
            source = replay(events, speed, timer=segmenter)
        for event in source:
            segmenter.feed(event)
        segmenter.finish()
        segments, trace = segmenter.segments, segmenter.trace
        logger.info("Segmented %d words into %d segments (%s)", len(events), len(segments),
                    policy.describe())

        if trace_path:
            write_trace(trace_path, trace, policy=policy)
        if metrics_file:
            write_metrics(metrics_file)

        if not output_path:
            for segment in segments:
                self.stdout.write(json.dumps(segment.to_dict(), ensure_ascii=False))
            return

        write_segments(output_path, segments)
        decisions = Counter(segment.decision.value for segment in segments)
        summary = {
            "policy": policy.describe(),
            "words": len(events),
            "segments": len(segments),
            "decisions": dict(sorted(decisions.items())),
            "vetoes": sum(1 for entry in trace if entry.verdict == "veto"),
        }
        if config.report_format == "json":
            self.write_json(summary)
            return
        self.stdout.write(f"policy:   {summary['policy']}")
        self.stdout.write(f"words:    {summary['words']}")
        self.stdout.write(f"vetoes:   {summary['vetoes']}")
        for decision, count in summary["decisions"].items():
            self.stdout.write(f"  {decision}: {count}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(segments)} segments to {output_path}"))
