"""Small runtime helpers shared by the interpreters."""

from __future__ import annotations

import sys
import threading
from typing import Any, Callable

_STACK_BYTES = 512 * 1024 * 1024
_RECURSION = 400_000


def run_deep(fn: Callable[..., Any], *args, **kwargs) -> Any:
    """Run ``fn`` on a thread with a large C stack and a raised recursion limit.

    Both interpreters recurse on the object program, so deeply recursive
    methods need more stack than the main thread offers.
    """
    box: dict[str, Any] = {}

    def target():
        try:
            box["value"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc

    old_limit = sys.getrecursionlimit()
    old_size = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, _RECURSION))
    try:
        threading.stack_size(_STACK_BYTES)
        t = threading.Thread(target=target)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if "error" in box:
        raise box["error"]
    return box.get("value")
