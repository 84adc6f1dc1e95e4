"""Run configuration: settings defaults < KEY=value config file < CLI flags."""

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

import environ
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .errors import ConfigError

logger = logging.getLogger(__name__)

MODES = ("v1", "v2", "v3")
FORMATS = ("text", "json")

# Config-file key -> (RunConfig field, caster name on environ.Env)
CONFIG_KEYS = {
    "MODE": ("mode", "str"),
    "SILENCE_THRESHOLD_MS": ("silence_threshold_ms", "int"),
    "HARD_TIMEOUT_MS": ("hard_timeout_ms", "int"),
    "LM_THRESHOLD": ("lm_threshold", "float"),
    "LOOKAHEAD_WAIT_MS": ("lookahead_wait_ms", "int"),
    "MODEL_PATH": ("model_path", "str"),
    "SEED": ("seed", "int"),
    "FORMAT": ("report_format", "str"),
    "INPUT_PATH": ("input_path", "str"),
    "OUTPUT_PATH": ("output_path", "str"),
}


def _file_env():
    """An ``environ.Env`` whose backing mapping is private, not ``os.environ``."""
    return type("RunConfigEnv", (environ.Env,), {"ENVIRON": {}})


def read_config_file(path):
    """Parse a ``KEY=value`` run config file into RunConfig field values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist", code="PATH_NOT_FOUND")

    env_class = _file_env()
    env_class.read_env(path, overwrite=True, parse_comments=True)
    env = env_class()

    values = {}
    for key in sorted(env.ENVIRON):
        if key not in CONFIG_KEYS:
            logger.warning("Ignoring unknown config key %s in %s", key, path)
            continue
        name, caster = CONFIG_KEYS[key]
        try:
            values[name] = getattr(env, caster)(key)
        except (ValueError, ImproperlyConfigured) as e:
            raise ConfigError(f"{path}: bad value for {key} ({e})", code="INVALID_CONFIG") from e
    return values


@dataclass(frozen=True)
class RunConfig:
    mode: str = "v1"
    silence_threshold_ms: int = 500
    hard_timeout_ms: int = 2000
    lm_threshold: float = 0.5
    lookahead_wait_ms: int | None = None
    model_path: str | None = None
    seed: int = 13
    input_path: str | None = None
    output_path: str | None = None
    report_format: str = "text"

    @classmethod
    def defaults(cls):
        return cls(
            mode=settings.LMEOS_MODE,
            silence_threshold_ms=settings.LMEOS_SILENCE_THRESHOLD_MS,
            hard_timeout_ms=settings.LMEOS_HARD_TIMEOUT_MS,
            lm_threshold=settings.LMEOS_LM_THRESHOLD,
            lookahead_wait_ms=settings.LMEOS_LOOKAHEAD_WAIT_MS,
            seed=settings.LMEOS_SEED,
            report_format=settings.LMEOS_REPORT_FORMAT,
        )

    @classmethod
    def load(cls, config_path=None, **overrides):
        """Build a validated config; ``None`` overrides (unset flags) are skipped."""
        config = cls.defaults()
        if config_path:
            config = replace(config, **read_config_file(config_path))
        known = {f.name for f in fields(cls)}
        flags = {k: v for k, v in overrides.items() if v is not None and k in known}
        config = replace(config, **flags)
        config.validate()
        return config

    @property
    def effective_lookahead_wait_ms(self):
        if self.lookahead_wait_ms is None:
            return self.hard_timeout_ms - self.silence_threshold_ms
        return self.lookahead_wait_ms

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {', '.join(MODES)}, got {self.mode!r}",
                              code="INVALID_CONFIG")
        if self.report_format not in FORMATS:
            raise ConfigError(f"--format must be text or json, got {self.report_format!r}",
                              code="INVALID_CONFIG")
        if not 0 < self.silence_threshold_ms <= self.hard_timeout_ms:
            raise ConfigError(
                "--silence-ms must be positive and no larger than --hard-timeout-ms "
                f"(got {self.silence_threshold_ms} and {self.hard_timeout_ms})",
                code="INVALID_CONFIG",
            )
        if not 0.0 <= self.lm_threshold <= 1.0:
            raise ConfigError(f"--lm-threshold must be in [0, 1], got {self.lm_threshold}",
                              code="INVALID_CONFIG")
        wait = self.effective_lookahead_wait_ms
        if not 0 <= wait <= self.hard_timeout_ms - self.silence_threshold_ms:
            raise ConfigError(
                "--lookahead-wait-ms must be in [0, hard timeout - silence threshold], "
                f"got {wait}",
                code="INVALID_CONFIG",
            )
        if self.mode in ("v2", "v3") and not self.model_path:
            raise ConfigError(f"--model is required for --mode {self.mode}",
                              code="MODEL_REQUIRED")

    def check_paths(self):
        """Fail before a run starts if an input is missing or an output has no home."""
        for label, value in (("model", self.model_path), ("input", self.input_path)):
            if value and not Path(value).exists():
                raise ConfigError(f"{label} path {value} does not exist", code="PATH_NOT_FOUND")
        if self.output_path and not Path(self.output_path).resolve().parent.is_dir():
            raise ConfigError(f"output directory for {self.output_path} does not exist",
                              code="PATH_NOT_FOUND")

    def to_policy(self):
        from fusion.policies import Mode, Policy

        return Policy(
            mode=Mode(self.mode),
            silence_threshold_ms=self.silence_threshold_ms,
            hard_timeout_ms=self.hard_timeout_ms,
            lm_threshold=self.lm_threshold,
            lookahead_wait_ms=self.effective_lookahead_wait_ms,
        )
