"""
Django settings for cpdlab project.

The project hosts a single app, ``pcpd``, whose management commands
(``synth``, ``fit``, ``bench``) are the command-line surface. Nothing is
served over HTTP, so there is no URL configuration or WSGI application.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.1/ref/settings/
"""
from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-cpdlab-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'pcpd',
]


# Database
# The app keeps no models; the default database only exists for the test runner.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# REST Framework Configuration
# Only serializers, parsers and renderers are used; reports are strict JSON.
REST_FRAMEWORK = {
    'STRICT_JSON': True,
    'COERCE_DECIMAL_TO_STRING': False,
}

# Inference engine defaults, see pcpd/conf.py
PCPD = {
    'MAX_ITERS': 500,
    'TOL': 1e-6,
    'PRUNE_THRESHOLD': 1e-4,
    'NOISE_UPDATE_PERIOD': 1,
    'EPSILON': 1e-6,
    'GG_C0': 1e-6,
    'GG_D0': 1e-6,
    'CHECK_SPD': config('PCPD_CHECK_SPD', default=DEBUG, cast=bool),
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'pcpd': {
            'handlers': ['console'],
            'level': config('PCPD_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
    },
}
