from __future__ import annotations

import threading
import time
from typing import Callable, TypeVar

try:
    import psutil
except ImportError:  # pragma: no cover - psutil is a declared dependency
    psutil = None

R = TypeVar("R")

RESOLUTION_BYTES = 1024


class PeakMemorySampler:
    """Samples resident set size on a background thread, about once per millisecond.

    ``peak_bytes`` is the largest increase over the RSS at entry, or ``None``
    where RSS cannot be read.  Increases below 1 KiB are reported as 0.
    """

    def __init__(self, interval: float = 0.001):
        self.interval = interval
        self.peak_bytes: int | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._baseline = 0
        self._peak = 0

    @staticmethod
    def supported() -> bool:
        if psutil is None:
            return False
        try:
            psutil.Process().memory_info()
        except (psutil.Error, OSError):
            return False
        return True

    def _rss(self) -> int:
        return psutil.Process().memory_info().rss

    def _run(self) -> None:
        proc = psutil.Process()
        while not self._stop.is_set():
            rss = proc.memory_info().rss
            if rss > self._peak:
                self._peak = rss
            time.sleep(self.interval)

    def __enter__(self) -> "PeakMemorySampler":
        if not self.supported():
            return self
        self._baseline = self._peak = self._rss()
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join()
        self._peak = max(self._peak, self._rss())
        delta = self._peak - self._baseline
        self.peak_bytes = delta if delta >= RESOLUTION_BYTES else 0


def sample_peak_memory(fn: Callable[[], R]) -> tuple[R, int | None]:
    """Run ``fn`` and return its result with the peak RSS increase observed meanwhile."""
    with PeakMemorySampler() as sampler:
        result = fn()
    return result, sampler.peak_bytes
