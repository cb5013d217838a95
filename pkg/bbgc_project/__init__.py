# Cargar la app Celery junto con Django para que run_replication_task quede registrada
from .celery import app as celery_app

__all__ = ('celery_app',)
