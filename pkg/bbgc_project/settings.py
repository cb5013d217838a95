"""
Django settings for bbgc_project project.

The project has no web surface: Django provides settings, logging
configuration, the manage.py command dispatcher and the test runner for
the `imputation` app, and Celery fans out benchmark replications.

Every tunable is read with python-decouple so a `.env` file or the process
environment overrides the defaults below.
"""

from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-bbgc-local-only-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='', cast=Csv())

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'imputation',
]

# No database: no command persists state

DATABASES = {}

# Internationalization

LANGUAGE_CODE = 'en-us'
TIME_ZONE = config('TIME_ZONE', default='UTC')
USE_I18N = False
USE_TZ = True

# Django REST Framework Settings (serializers validate configs, JSONRenderer
# writes run reports)

REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
    # No django.contrib.auth: no views, no users
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

# BBGC defaults (flags > --config file > these values)

BBGC = {
    'SEED': config('BBGC_SEED', default=42, cast=int),
    'M': config('BBGC_M', default=20, cast=int),
    'ITERS': config('BBGC_ITERS', default=200, cast=int),
    'BURN_IN': config('BBGC_BURN_IN', default=100, cast=int),
    'THIN': config('BBGC_THIN', default=2, cast=int),
    'MARGINAL': config('BBGC_MARGINAL', default='bb'),
    'KNN_K': config('BBGC_KNN_K', default=5, cast=int),
    'MISSING_TOKEN': config('BBGC_MISSING_TOKEN', default='NA'),
    'THREADS': config('BBGC_THREADS', default=1, cast=int),
    'COVERAGE_LEVEL': config('BBGC_COVERAGE_LEVEL', default=0.99, cast=float),
    'COVERAGE_DRAWS': config('BBGC_COVERAGE_DRAWS', default=2000, cast=int),
    'USE_CELERY': config('BBGC_USE_CELERY', default=False, cast=bool),
}

# Full-scale benchmark and coverage runs in the test suite are opt-in
BBGC_ACCEPTANCE = config('BBGC_ACCEPTANCE', default=False, cast=bool)

# Logging Configuration

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': config('BBGC_LOG_FILE', default='bbgc.log'),
            'formatter': 'verbose',
            'delay': True,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'imputation.tasks': {
            'handlers': ['console', 'file'],
            'level': config('BBGC_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
        'celery': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'imputation': {
            'handlers': ['console'],
            'level': config('BBGC_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}

# Broker configuration (Redis)
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/2')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='redis://localhost:6379/3')

# Without a broker the tasks run in-process
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = True

# Serialization settings
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

# Task execution settings
CELERY_TASK_TRACK_STARTED = True
CELERY_TASK_TIME_LIMIT = 60 * 60
CELERY_TASK_SOFT_TIME_LIMIT = 55 * 60
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_TASK_ACKS_LATE = True
CELERY_TASK_REJECT_ON_WORKER_LOST = True

# Connection settings
CELERY_BROKER_CONNECTION_RETRY_ON_STARTUP = True
CELERY_BROKER_CONNECTION_RETRY = True
CELERY_BROKER_CONNECTION_MAX_RETRIES = 10

# Task routing (queues)
CELERY_TASK_ROUTES = {
    'imputation.tasks.run_replication_task': {'queue': 'benchmarks'},
    'imputation.tasks.*': {'queue': 'default'},
}
