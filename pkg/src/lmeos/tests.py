import os
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from .config import RunConfig, read_config_file
from .errors import EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE, ConfigError, LmeosError, TaggerError


class RunConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, text):
        path = self.root / "run.env"
        path.write_text(text, encoding="utf-8")
        return path

    def test_defaults(self):
        config = RunConfig.load()
        self.assertEqual((config.mode, config.silence_threshold_ms, config.hard_timeout_ms,
                          config.lm_threshold), ("v1", 500, 2000, 0.5))
        self.assertEqual(config.effective_lookahead_wait_ms, 1500)

    @override_settings(LMEOS_SILENCE_THRESHOLD_MS=300)
    def test_defaults_follow_settings(self):
        self.assertEqual(RunConfig.load().silence_threshold_ms, 300)

    def test_file_then_flags(self):
        path = self.write_config("# tuned for dictation\nSILENCE_THRESHOLD_MS=400\n"
                                 "LM_THRESHOLD=0.7\nFORMAT=json\n")
        config = RunConfig.load(path, lm_threshold=0.6, hard_timeout_ms=None)
        self.assertEqual(config.silence_threshold_ms, 400)
        self.assertEqual(config.lm_threshold, 0.6)
        self.assertEqual(config.hard_timeout_ms, 2000)
        self.assertEqual(config.report_format, "json")

    def test_file_does_not_touch_process_environment(self):
        path = self.write_config("LMEOS_PRIVATE_KEY=1\nSEED=5\n")
        with self.assertLogs("lmeos.config", "WARNING") as logs:
            values = read_config_file(path)
        self.assertEqual(values, {"seed": 5})
        self.assertNotIn("LMEOS_PRIVATE_KEY", os.environ)
        self.assertIn("LMEOS_PRIVATE_KEY", logs.output[0])

    def test_bad_value(self):
        path = self.write_config("HARD_TIMEOUT_MS=soon\n")
        with self.assertRaises(ConfigError) as ctx:
            read_config_file(path)
        self.assertEqual(ctx.exception.code, "INVALID_CONFIG")

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as ctx:
            RunConfig.load(self.root / "missing.env")
        self.assertEqual(ctx.exception.code, "PATH_NOT_FOUND")

    def test_validation(self):
        cases = [
            (dict(mode="v4"), "INVALID_CONFIG"),
            (dict(silence_threshold_ms=3000), "INVALID_CONFIG"),
            (dict(lm_threshold=2.0), "INVALID_CONFIG"),
            (dict(lookahead_wait_ms=1600), "INVALID_CONFIG"),
            (dict(report_format="xml"), "INVALID_CONFIG"),
            (dict(mode="v2"), "MODEL_REQUIRED"),
        ]
        for overrides, code in cases:
            with self.subTest(**overrides), self.assertRaises(ConfigError) as ctx:
                RunConfig.load(**overrides)
            self.assertEqual(ctx.exception.code, code)

    def test_check_paths(self):
        config = RunConfig.load(input_path=str(self.root / "nope.jsonl"))
        with self.assertRaises(ConfigError) as ctx:
            config.check_paths()
        self.assertEqual(ctx.exception.code, "PATH_NOT_FOUND")

    def test_policy(self):
        policy = RunConfig.load(mode="v3", model_path="m", lookahead_wait_ms=200).to_policy()
        self.assertEqual(policy.mode.value, "v3")
        self.assertEqual(policy.lookahead_wait_ms, 200)


class ExitCodeTests(SimpleTestCase):
    def test_codes(self):
        self.assertEqual(ConfigError("x", code="MODEL_REQUIRED").exit_code, EXIT_USAGE)
        self.assertEqual(TaggerError("x", code="CHECKSUM_MISMATCH").exit_code, EXIT_DATA)
        self.assertEqual(TaggerError("x", code="NONFINITE_LOSS").exit_code, EXIT_INTERNAL)
        self.assertEqual(LmeosError("x").exit_code, EXIT_DATA)

    def test_bad_flag_is_a_usage_error(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("segment", "stream.jsonl", "--mode=v9", stdout=StringIO(),
                         stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_USAGE)

    def test_data_error_exit_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            stream = Path(tmp) / "stream.jsonl"
            stream.write_text('{"word": "a", "start_ms": 500, "end_ms": 100}\n',
                              encoding="utf-8")
            with self.assertRaises(CommandError) as ctx:
                call_command("segment", str(stream), stdout=StringIO(), stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_DATA)
        self.assertIn("INVALID_EVENT", str(ctx.exception))
