import logging
import os

from celery import Celery
from celery.signals import worker_ready

logger = logging.getLogger('imputation.tasks')

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'bbgc_project.settings')

# App Celery para distribuir las réplicas del benchmark
app = Celery('bbgc_project')

# Broker, colas, límites de tiempo y modo eager vienen de settings (CELERY_*)
app.config_from_object('django.conf:settings', namespace='CELERY')

# Registra imputation.tasks
app.autodiscover_tasks()


@worker_ready.connect
def announce_worker(sender=None, **kwargs):
    logger.info(f"Worker listo para réplicas BBGC: {sender.hostname if sender else '?'}")
