"""
Engine defaults for the pcpd app.

Projects override any of these through a ``PCPD`` dictionary in their Django
settings, e.g.::

    PCPD = {
        'MAX_ITERS': 300,
        'PRUNE_THRESHOLD': 1e-3,
    }
"""
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    'MAX_ITERS': 500,
    'TOL': 1e-6,
    'PRUNE_THRESHOLD': 1e-4,
    'NOISE_UPDATE_PERIOD': 1,
    'EPSILON': 1e-6,
    'GG_C0': 1e-6,
    'GG_D0': 1e-6,
    'CHECK_SPD': False,
}


class PcpdSettings:
    """Attribute access to the merged ``PCPD`` settings dictionary."""

    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS

    @property
    def user_settings(self):
        try:
            return getattr(settings, 'PCPD', {})
        except ImproperlyConfigured:
            # library used outside a Django process
            return {}

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid PCPD setting: '{attr}'")
        return self.user_settings.get(attr, self.defaults[attr])


pcpd_settings = PcpdSettings(DEFAULTS)
