import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "lmeos.settings")
django.setup()
