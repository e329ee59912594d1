"""
Training Metrics

Counters for the adversarial schedule (critic and generator updates,
completed steps, failures) and a bounded history of step durations. The
counters double as the check that K steps performed n_critic·K critic
updates and K generator updates.
"""

import time
import threading
from collections import deque
from datetime import datetime
from typing import Any, Dict, Optional

from .logging_config import get_logger


class TrainingMetrics:
    """Thread-safe counters for one training run."""

    def __init__(self, max_history: int = 1000):
        """
        Initialize training metrics.

        Args:
            max_history: Maximum number of step durations to keep
        """
        self.logger = get_logger("metrics")
        self.max_history = max_history

        self._lock = threading.Lock()

        self.critic_updates = 0
        self.generator_updates = 0
        self.steps = 0
        self.failed_steps = 0
        self.start_time = datetime.now()

        self.step_times: deque = deque(maxlen=max_history)
        self.last_losses: Dict[str, float] = {}

    def record_critic_update(self, loss: float) -> None:
        with self._lock:
            self.critic_updates += 1
            self.last_losses["loss_d"] = float(loss)

    def record_generator_update(self, loss: float) -> None:
        with self._lock:
            self.generator_updates += 1
            self.last_losses["loss_g"] = float(loss)

    def record_step(self, seconds: float, success: bool = True) -> None:
        with self._lock:
            if success:
                self.steps += 1
                self.step_times.append(seconds)
            else:
                self.failed_steps += 1
            self.logger.debug(f"Recorded step in {seconds:.3f}s (success={success})")

    def average_step_time(self) -> float:
        with self._lock:
            if not self.step_times:
                return 0.0
            return sum(self.step_times) / len(self.step_times)

    def get_summary(self) -> Dict[str, Any]:
        """
        Get a summary of the run so far.

        Returns:
            Dictionary of counters and timings
        """
        average = self.average_step_time()
        with self._lock:
            elapsed = (datetime.now() - self.start_time).total_seconds()
            return {
                "elapsed_seconds": elapsed,
                "steps": self.steps,
                "failed_steps": self.failed_steps,
                "critic_updates": self.critic_updates,
                "generator_updates": self.generator_updates,
                "average_step_time": average,
                "last_losses": dict(self.last_losses),
            }

    def reset_metrics(self) -> None:
        with self._lock:
            self.critic_updates = 0
            self.generator_updates = 0
            self.steps = 0
            self.failed_steps = 0
            self.start_time = datetime.now()
            self.step_times.clear()
            self.last_losses.clear()
            self.logger.info("Training metrics reset")


class StepTimer:
    """Context manager that records one training step's duration."""

    def __init__(self, metrics: TrainingMetrics):
        self.metrics = metrics
        self.started: Optional[float] = None
        self.seconds = 0.0

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.seconds = time.perf_counter() - self.started
        self.metrics.record_step(self.seconds, success=exc_type is None)
