"""Prometheus HTTP endpoint for long-running commands."""

import logging
import time
from typing import Optional

from prometheus_client import start_http_server

from lyrics_asr.config import settings

logger = logging.getLogger(__name__)


def start_metrics_server(port: Optional[int] = None, host: Optional[str] = None) -> None:
    """
    Expose the metrics registry in a background thread.

    Args:
        port: Port to listen on (default from settings)
        host: Host to bind to (default from settings)
    """
    port = port or settings.METRICS_PORT
    host = host or settings.METRICS_HOST
    try:
        start_http_server(port, addr=host)
    except OSError as e:
        logger.error(f"Error starting metrics server: {e}")
        raise
    logger.info(f"Metrics server started on {host}:{port}")
    logger.info(f"Prometheus endpoint: http://{host}:{port}/metrics")


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Start Prometheus metrics server")
    parser.add_argument("--port", type=int, default=settings.METRICS_PORT,
                        help=f"Port to listen on (default: {settings.METRICS_PORT})")
    parser.add_argument("--host", type=str, default=settings.METRICS_HOST,
                        help=f"Host to bind to (default: {settings.METRICS_HOST})")
    args = parser.parse_args()

    start_metrics_server(port=args.port, host=args.host)
    try:
        while True:
            time.sleep(60)
    except KeyboardInterrupt:
        logger.info("Metrics server stopped by user")
