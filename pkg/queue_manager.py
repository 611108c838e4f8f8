import logging
import queue
import threading

from config import Config

logger = logging.getLogger(__name__)


class RunQueueManager:
    """In-memory queue of independent runs plus a result store keyed by job key"""

    def __init__(self, max_size=None):
        self.job_queue = queue.Queue(maxsize=max_size or Config.MAX_QUEUE_SIZE)
        self.results = {}
        self.errors = {}
        self.lock = threading.Lock()
        self.closed = threading.Event()

    def add_job(self, job_data, block=False):
        """Add job to queue; False when the queue is full or closed"""
        if self.closed.is_set():
            return False
        try:
            self.job_queue.put(job_data, block=block)
            return True
        except queue.Full:
            logger.warning(f"[QUEUE] Queue full, rejected job {job_data.get('key')}")
            return False

    def get_job(self, timeout=1):
        """Get job from queue"""
        try:
            return self.job_queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def task_done(self):
        self.job_queue.task_done()

    def close(self):
        """No more jobs will be added; workers exit once the queue drains"""
        self.closed.set()

    def is_drained(self):
        return self.closed.is_set() and self.job_queue.empty()

    def put_result(self, key, result):
        with self.lock:
            self.results[key] = result

    def put_error(self, key, error):
        with self.lock:
            self.errors[key] = error

    def results_sorted(self):
        """(key, result) pairs in key order, independent of completion order"""
        with self.lock:
            return sorted(self.results.items(), key=lambda item: item[0])

    def errors_sorted(self):
        with self.lock:
            return sorted(self.errors.items(), key=lambda item: item[0])
