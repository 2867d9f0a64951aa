from django.apps import AppConfig


class PcpdConfig(AppConfig):
    name = 'pcpd'
    verbose_name = 'Probabilistic tensor CPD'
