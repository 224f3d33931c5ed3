"""Worker threads and the point-to-point channels between them.

Each worker is a persistent thread that owns its blocks exclusively.  The
only cross-worker traffic is :class:`HaloMessage` objects passed through a
:class:`Mailbox`, mirroring an MPI rank layout inside one process.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

__all__ = ["HaloMessage", "Mailbox", "WorkerPool", "WorkerAborted"]


class WorkerAborted(RuntimeError):
    """Raised in a worker blocked on a receive after another worker failed."""


@dataclass
class HaloMessage:
    source: int
    dest: int
    face: int
    field: str
    data: np.ndarray
    shape: tuple[int, int, int]
    tag: Any = None

    @property
    def nbytes(self) -> int:
        return self.data.nbytes


class Mailbox:
    """FIFO channels keyed by ``(source, dest, tag)``."""

    def __init__(self, abort: threading.Event | None = None):
        self._channels: dict[tuple, queue.SimpleQueue] = {}
        self._lock = threading.Lock()
        self._abort = abort or threading.Event()
        self.messages_sent = 0
        self.bytes_sent = 0

    def _channel(self, key) -> queue.SimpleQueue:
        ch = self._channels.get(key)
        if ch is None:
            with self._lock:
                ch = self._channels.setdefault(key, queue.SimpleQueue())
        return ch

    def send(self, msg: HaloMessage) -> None:
        self._channel((msg.source, msg.dest, msg.tag)).put(msg)
        with self._lock:
            self.messages_sent += 1
            self.bytes_sent += msg.nbytes

    def recv(self, source: int, dest: int, tag) -> HaloMessage:
        ch = self._channel((source, dest, tag))
        while True:
            try:
                return ch.get(timeout=0.05)
            except queue.Empty:
                if self._abort.is_set():
                    raise WorkerAborted(f"worker {dest} gave up waiting on {source} ({tag})") from None

    def pending(self) -> int:
        return sum(ch.qsize() for ch in self._channels.values())


class WorkerPool:
    """``n`` persistent threads; :meth:`run` calls ``fn(rank)`` on all of them.

    A pool of one runs work inline in the caller's thread.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one worker")
        self.n = n
        self.abort = threading.Event()
        self.mailbox = Mailbox(self.abort)
        self._tasks: list[queue.SimpleQueue] = []
        self._threads: list[threading.Thread] = []
        self._done = threading.Condition()
        self._results: list[Any] = []
        self._errors: list[BaseException | None] = []
        self._remaining = 0
        self._closed = False
        if n > 1:
            for rank in range(n):
                q: queue.SimpleQueue = queue.SimpleQueue()
                t = threading.Thread(target=self._loop, args=(rank, q), name=f"sf-worker-{rank}", daemon=True)
                self._tasks.append(q)
                self._threads.append(t)
                t.start()

    def _loop(self, rank: int, tasks: queue.SimpleQueue):
        while True:
            item = tasks.get()
            if item is None:
                return
            fn = item
            try:
                result, error = fn(rank), None
            except BaseException as exc:  # handed back to the caller
                result, error = None, exc
                self.abort.set()
            with self._done:
                self._results[rank] = result
                self._errors[rank] = error
                self._remaining -= 1
                if self._remaining == 0:
                    self._done.notify_all()

    def run(self, fn: Callable[[int], Any]) -> list[Any]:
        if self._closed:
            raise RuntimeError("worker pool is closed")
        if self.n == 1:
            return [fn(0)]
        self.abort.clear()
        with self._done:
            self._results = [None] * self.n
            self._errors = [None] * self.n
            self._remaining = self.n
        for q in self._tasks:
            q.put(fn)
        with self._done:
            while self._remaining:
                self._done.wait()
        errors = [e for e in self._errors if e is not None]
        if errors:
            primary = [e for e in errors if not isinstance(e, WorkerAborted)]
            raise (primary or errors)[0]
        return list(self._results)

    def close(self):
        if not self._closed:
            self._closed = True
            for q in self._tasks:
                q.put(None)
            for t in self._threads:
                t.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
