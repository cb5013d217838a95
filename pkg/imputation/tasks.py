# imputation/tasks.py - Ejecución de réplicas y cadenas

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence

from celery import group, shared_task
from django.conf import settings

from .baselines_eval import run_replication
from .exceptions import BBGCError

logger = logging.getLogger(__name__)

# ================================
# TAREAS DE BENCHMARK
# ================================


@shared_task(bind=True, max_retries=3, default_retry_delay=60)
def run_replication_task(self, job):
    """Una réplica del benchmark (todos los métodos) a partir de un job JSON"""
    try:
        outcome = run_replication(job)
        logger.info(f"Réplica {job['replication']} completada ({job['mechanism']})")
        return outcome
    except (BBGCError, ValueError):
        # Fallos deterministas: reintentar fallaría igual
        logger.error(f"Réplica {job['replication']} falló sin reintento")
        raise
    except Exception as exc:
        logger.error(f"Error en réplica {job['replication']}: {exc}")
        raise self.retry(exc=exc, countdown=60)


# ================================
# DESPACHO
# ================================


def use_celery():
    return bool(settings.BBGC.get('USE_CELERY'))


def dispatch(func: Callable, jobs: Sequence, threads: int = 1, task=None) -> List:
    """Ejecuta func sobre los jobs y devuelve los resultados en orden.

    `group` de Celery si USE_CELERY está activo y hay tarea, pool de procesos
    si threads > 1, map en proceso si no. Cada job lleva sus propias semillas,
    así que el resultado no depende del camino.
    """
    jobs = list(jobs)
    if not jobs:
        return []
    if task is not None and use_celery():
        logger.info(f"Enviando {len(jobs)} jobs a Celery ({task.name})")
        return group(task.s(job) for job in jobs).apply_async().get()
    if threads > 1:
        logger.info(f"Ejecutando {len(jobs)} jobs con {threads} procesos")
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, jobs))
    return [func(job) for job in jobs]


def pool_map(threads: int) -> Callable:
    """Callable compatible con map sobre dispatch, para run_bbgc/run_benchmark."""
    def _map(func, jobs):
        return dispatch(func, jobs, threads)
    return _map
