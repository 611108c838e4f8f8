# workers/experiment_worker.py

import logging
import threading

from config import Config
from errors import ConfigError

logger = logging.getLogger(__name__)


def experiment_worker_thread(manager, handler, worker_id):
    """Drain the run queue until it is closed and empty"""
    logger.debug(f"[WORKER] Worker {worker_id} waiting for runs")
    while not manager.is_drained():
        job = manager.get_job(timeout=Config.WORKER_POLL_TIMEOUT)
        if job is None:
            continue
        key = job['key']
        try:
            logger.info(f"[WORKER] Worker {worker_id} running {key}")
            manager.put_result(key, handler(job))
        except Exception as e:
            logger.error(f"[WORKER] Run {key} failed: {e}")
            manager.put_error(key, e)
        finally:
            manager.task_done()
    logger.debug(f"[WORKER] Worker {worker_id} finished")


def resolve_worker_count(num_workers=None):
    """Explicit count, else PRIVEMO_WORKER_THREADS; at least one thread"""
    num_workers = Config.WORKER_THREADS if num_workers is None else num_workers
    if num_workers < 1:
        raise ConfigError(f"Need at least 1 worker thread, got {num_workers}")
    return num_workers


def start_workers(manager, handler, num_workers=None):
    """Start worker threads for the run queue"""
    num_workers = resolve_worker_count(num_workers)
    threads = []
    for i in range(num_workers):
        thread = threading.Thread(target=experiment_worker_thread, args=(manager, handler, i + 1), daemon=True)
        thread.start()
        threads.append(thread)
    logger.info(f"[WORKER] Started {num_workers} worker thread(s)")
    return threads


def run_all(manager, handler, jobs, num_workers=None):
    """Run jobs on the pool and wait for every one; returns sorted results and errors"""
    threads = start_workers(manager, handler, num_workers)
    for job in jobs:
        manager.add_job(job, block=True)
    manager.close()
    for thread in threads:
        thread.join()
    return manager.results_sorted(), manager.errors_sorted()
