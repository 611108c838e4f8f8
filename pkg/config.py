import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Worker pool
    WORKER_THREADS = int(os.getenv('PRIVEMO_WORKER_THREADS', 2))
    MAX_QUEUE_SIZE = int(os.getenv('PRIVEMO_MAX_QUEUE_SIZE', 10000))
    WORKER_POLL_TIMEOUT = float(os.getenv('PRIVEMO_WORKER_POLL_TIMEOUT', 0.2))

    # Logging
    LOG_LEVEL = os.getenv('PRIVEMO_LOG_LEVEL', 'INFO').upper()
    LOG_FILE = os.getenv('PRIVEMO_LOG_FILE')

    # Runs
    OUTPUT_DIR = os.getenv('PRIVEMO_OUTPUT_DIR', 'runs')
    MASTER_SEED = int(os.getenv('PRIVEMO_MASTER_SEED', 0))

    # Slow synthetic-trend tests
    RUN_TREND_TESTS = os.getenv('PRIVEMO_RUN_TRENDS', '0') == '1'
