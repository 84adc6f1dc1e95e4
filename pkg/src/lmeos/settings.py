"""
Django settings for the lmeos segmentation toolkit.

The project uses Django for configuration, the management-command CLI and the
test runner only; there are no views and no database.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path

import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env()
environ.Env.read_env(BASE_DIR.parent / ".env")


SECRET_KEY = env("DJANGO_SECRET_KEY", default="lmeos-local-only")

DEBUG = env.bool("DEBUG", default=False)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "corpus",
    "tagger",
    "endpoint",
    "fusion",
    "metrics",
]

# Everything is file based; Django falls back to its dummy backend.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging

LMEOS_LOG_LEVEL = env("LMEOS_LOG_LEVEL", default="INFO")

LMEOS_APP_LOGGERS = ["lmeos", "corpus", "tagger", "endpoint", "fusion", "metrics"]

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "console": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "console",
        },
    },
    "loggers": {
        name: {
            "handlers": ["console"],
            "level": LMEOS_LOG_LEVEL,
            "propagate": False,
        }
        for name in LMEOS_APP_LOGGERS
    },
}


# Segmentation policy defaults (500ms is the usual silence-timeout default;
# per-locale values go in a run config file)
LMEOS_MODE = env("LMEOS_MODE", default="v1")
LMEOS_SILENCE_THRESHOLD_MS = env.int("LMEOS_SILENCE_THRESHOLD_MS", default=500)
LMEOS_HARD_TIMEOUT_MS = env.int("LMEOS_HARD_TIMEOUT_MS", default=2000)
LMEOS_LM_THRESHOLD = env.float("LMEOS_LM_THRESHOLD", default=0.5)
LMEOS_LOOKAHEAD_WAIT_MS = env.int("LMEOS_LOOKAHEAD_WAIT_MS", default=None)
LMEOS_SEED = env.int("LMEOS_SEED", default=13)
LMEOS_REPORT_FORMAT = env("LMEOS_REPORT_FORMAT", default="text")

# Tagger defaults (desk scale; 1024 hidden / 256 embed / 250k vocab remain legal)
LMEOS_EMBED_DIM = env.int("LMEOS_EMBED_DIM", default=32)
LMEOS_HIDDEN_DIM = env.int("LMEOS_HIDDEN_DIM", default=64)
LMEOS_VOCAB_SIZE = env.int("LMEOS_VOCAB_SIZE", default=5000)
LMEOS_MIN_FREQUENCY = env.int("LMEOS_MIN_FREQUENCY", default=1)
LMEOS_LEARNING_RATE = env.float("LMEOS_LEARNING_RATE", default=0.5)
LMEOS_MAX_EPOCHS = env.int("LMEOS_MAX_EPOCHS", default=200)
LMEOS_PATIENCE = env.int("LMEOS_PATIENCE", default=5)
LMEOS_CLIP_NORM = env.float("LMEOS_CLIP_NORM", default=5.0)
LMEOS_INIT_SCALE = env.float("LMEOS_INIT_SCALE", default=0.1)
LMEOS_HELDOUT_FRACTION = env.float("LMEOS_HELDOUT_FRACTION", default=0.1)
