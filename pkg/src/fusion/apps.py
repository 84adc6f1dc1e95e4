from django.apps import AppConfig


class FusionConfig(AppConfig):
    name = 'fusion'
    verbose_name = 'Hybrid VAD + LM-EOS segmentation'
