"""Single-writer command queue.

Every mutating API call becomes a closure executed on one worker thread, in
arrival order; callers block on the result.  This is what turns concurrent
HTTP clients into the deterministic total order the interpreter requires.
"""

from __future__ import annotations

import queue
import threading
from concurrent.futures import Future
from typing import Callable, TypeVar

T = TypeVar("T")


class CommandQueue:
    def __init__(self, name: str = "hearth-commands"):
        self._queue: "queue.Queue" = queue.Queue()
        self._thread = threading.Thread(target=self._loop, name=name, daemon=True)
        self._closed = False
        self._thread.start()

    def _loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            fn, future = item
            if not future.set_running_or_notify_cancel():
                continue
            try:
                future.set_result(fn())
            except BaseException as exc:  # noqa: BLE001 - forwarded to caller
                future.set_exception(exc)

    def submit(self, fn: Callable[[], T]) -> "Future[T]":
        if self._closed:
            raise RuntimeError("command queue is closed")
        future: "Future[T]" = Future()
        self._queue.put((fn, future))
        return future

    def call(self, fn: Callable[[], T], timeout: float = 30.0) -> T:
        return self.submit(fn).result(timeout=timeout)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._queue.put(None)
            self._thread.join(timeout=5)
