"""Typed intra-process publish/subscribe bus.

Payloads are delivered by reference: no serialization, no copies.  A topic
is pinned to one payload type by its first endpoint; later endpoints with a
different type are refused.  Subscribers choose their delivery mode:

* ``queue_size=0`` — the callback runs synchronously on the publisher's
  thread,
* ``queue_size=N`` — messages are buffered (oldest dropped on overflow) and
  the callback runs on the subscriber's worker thread,
* ``queue_size=None`` — buffered with no bound.

Publishing from inside a callback onto the *same* topic is rejected; doing
so onto a different topic is supported and cannot deadlock.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from typing import Any, Callable

from .errors import SlamkitError

log = logging.getLogger(__name__)


class MessengerError(SlamkitError):
    pass


class TopicTypeError(MessengerError):
    pass


class ReentrancyError(MessengerError):
    pass


_dispatching = threading.local()


def _guard(topic: str):
    stack = getattr(_dispatching, "topics", None)
    if stack is None:
        stack = _dispatching.topics = set()
    return stack


class Subscriber:
    def __init__(self, bus: "Messenger", topic: str, payload_type: type,
                 callback: Callable[[Any], None], queue_size: int | None):
        self._bus = bus
        self.topic = topic
        self.payload_type = payload_type
        self.callback = callback
        self.queue_size = queue_size
        self._active = True
        self._sync_cond = threading.Condition()
        self._inflight = 0
        self._queue = None
        self._wake = None
        self._worker = None
        self._drain = True
        if queue_size != 0:
            maxlen = None if queue_size is None else int(queue_size)
            self._queue = deque(maxlen=maxlen)
            self._wake = threading.Event()
            self._worker = threading.Thread(
                target=self._run, name=f"messenger-{topic}", daemon=True)
            self._worker.start()

    def _dispatch(self, payload):
        stack = _guard(self.topic)
        if self.topic in stack:
            raise ReentrancyError(
                f"publish on topic {self.topic!r} from within its own callback")
        stack.add(self.topic)
        try:
            self.callback(payload)
        finally:
            stack.discard(self.topic)

    def _deliver(self, payload) -> bool:
        """Called by the bus; returns True when the subscriber was reached."""
        if self.queue_size == 0:
            # Track in-flight callbacks instead of holding a lock during
            # dispatch, so callbacks may publish to other topics freely.
            with self._sync_cond:
                if not self._active:
                    return False
                self._inflight += 1
            try:
                self._dispatch(payload)
            finally:
                with self._sync_cond:
                    self._inflight -= 1
                    self._sync_cond.notify_all()
            return True
        if not self._active:
            return False
        queue = self._queue
        was_empty = not queue
        queue.append(payload)  # GIL-atomic; deque drops the oldest when full
        if was_empty:
            # wake only on the empty -> nonempty edge; while the queue holds
            # items the worker is either awake or will re-check before blocking
            self._wake.set()
        return True

    def _run(self):
        while True:
            try:
                payload = self._queue.popleft()
            except IndexError:
                if not self._active:
                    if self._drain and self._queue:
                        continue
                    return
                # linger briefly: under sustained load this avoids a
                # futex sleep/wake round trip per message
                for _ in range(64):
                    if self._queue or not self._active:
                        break
                    time.sleep(0)
                else:
                    self._wake.clear()
                    if not self._queue and self._active:
                        self._wake.wait()
                continue
            try:
                self._dispatch(payload)
            except ReentrancyError:
                raise
            except Exception:
                log.exception("subscriber callback on %r failed", self.topic)

    def unsubscribe(self, drain: bool = True):
        """Detach; after return no callback of this subscriber runs again."""
        if self.queue_size == 0:
            with self._sync_cond:
                if not self._active:
                    return
                self._active = False
                while self._inflight:
                    self._sync_cond.wait()
        else:
            with self._sync_cond:  # reused as the cold-path state lock
                if not self._active:
                    return
                self._drain = drain
                if not drain:
                    self._queue.clear()
                self._active = False
            self._wake.set()
            self._worker.join()
        self._bus._remove(self)


class Publisher:
    def __init__(self, bus: "Messenger", topic: str, payload_type: type):
        self._bus = bus
        self.topic = topic
        self.payload_type = payload_type
        self._active = True

    def publish(self, payload) -> int:
        """Deliver to all current subscribers; returns the count reached."""
        if not self._active:
            raise MessengerError(f"publisher on {self.topic!r} is closed")
        if not isinstance(payload, self.payload_type):
            raise TopicTypeError(
                f"topic {self.topic!r} carries {self.payload_type.__name__}, "
                f"got {type(payload).__name__}")
        return self._bus._fanout(self.topic, payload)

    def close(self):
        if self._active:
            self._active = False
            self._bus._remove(self)


class _Topic:
    __slots__ = ("payload_type", "publishers", "subscribers", "snapshot")

    def __init__(self, payload_type: type):
        self.payload_type = payload_type
        self.publishers: list[Publisher] = []
        self.subscribers: list[Subscriber] = []
        self.snapshot: tuple = ()  # immutable copy read without the lock


class Messenger:
    """Registry connecting publishers and subscribers by topic name."""

    def __init__(self):
        self._lock = threading.Lock()
        self._topics: dict[str, _Topic] = {}

    def _topic(self, name: str, payload_type: type) -> _Topic:
        if not name:
            raise MessengerError("topic name must be nonempty")
        entry = self._topics.get(name)
        if entry is None:
            entry = self._topics[name] = _Topic(payload_type)
        elif entry.payload_type is not payload_type:
            raise TopicTypeError(
                f"topic {name!r} already carries {entry.payload_type.__name__}, "
                f"refusing endpoint with {payload_type.__name__}")
        return entry

    def advertise(self, topic: str, payload_type: type) -> Publisher:
        with self._lock:
            entry = self._topic(topic, payload_type)
            pub = Publisher(self, topic, payload_type)
            entry.publishers.append(pub)
            return pub

    def subscribe(self, topic: str, payload_type: type,
                  callback: Callable[[Any], None],
                  queue_size: int | None = 0) -> Subscriber:
        if queue_size is not None and queue_size < 0:
            raise MessengerError("queue_size must be >= 0 or None")
        with self._lock:
            entry = self._topic(topic, payload_type)
            sub = Subscriber(self, topic, payload_type, callback, queue_size)
            entry.subscribers.append(sub)
            entry.snapshot = tuple(entry.subscribers)
            return sub

    def _fanout(self, topic: str, payload) -> int:
        # snapshot read is atomic under the GIL; dispatch happens outside
        # the registry lock so callbacks may publish to other topics
        entry = self._topics.get(topic)
        if entry is None:
            return 0
        count = 0
        for s in entry.snapshot:
            if s._deliver(payload):
                count += 1
        return count

    def _remove(self, endpoint):
        with self._lock:
            entry = self._topics.get(endpoint.topic)
            if entry is None:
                return
            for group in (entry.publishers, entry.subscribers):
                if endpoint in group:
                    group.remove(endpoint)
            entry.snapshot = tuple(entry.subscribers)
            if not entry.publishers and not entry.subscribers:
                del self._topics[endpoint.topic]

    def shutdown(self, drain: bool = True):
        """Stop all endpoints; idempotent."""
        with self._lock:
            subs = [s for t in self._topics.values() for s in t.subscribers]
            pubs = [p for t in self._topics.values() for p in t.publishers]
        for s in subs:
            s.unsubscribe(drain=drain)
        for p in pubs:
            p.close()
        with self._lock:
            self._topics.clear()


# Topic names used by the dataset playback (a repo convention):
TOPIC_IMAGE = "dataset/image"
TOPIC_IMU = "dataset/imu"
TOPIC_GPS = "dataset/gps"
TOPIC_GROUND_TRUTH = "dataset/ground_truth"
TOPIC_CURFRAME = "slam/curframe"
TOPIC_MAP = "slam/map"
