import logging
import math
import time

from lmeos.errors import EndpointError

logger = logging.getLogger(__name__)


def replay(stream, speed_factor=1.0, clock=time.monotonic, sleep=time.sleep, timer=None):
    """Yield word events as if they were arriving live.

    Event ``k`` is delivered ``start_ms(k) / speed_factor`` milliseconds after
    iteration begins. ``speed_factor=math.inf`` delivers everything at once.

    ``timer`` is an optional consumer with ``next_deadline_ms()`` and
    ``advance(now_ms)`` (a :class:`~fusion.segmenter.Segmenter`). It is
    advanced at each of its deadlines that falls in the silence before the
    next event, so it can act while no word is arriving.
    """
    if not speed_factor > 0:
        raise EndpointError(f"speed_factor must be positive, got {speed_factor}",
                            code="INVALID_SPEED")

    origin = clock()

    def wait_until(stream_ms):
        if math.isinf(speed_factor):
            return
        delay = origin + stream_ms / 1000.0 / speed_factor - clock()
        if delay > 0:
            sleep(delay)

    for event in stream:
        if timer is not None:
            deadline = timer.next_deadline_ms()
            while deadline is not None and deadline < event.start_ms:
                wait_until(deadline)
                timer.advance(deadline)
                deadline = timer.next_deadline_ms()
        wait_until(event.start_ms)
        yield event
    logger.debug("Replay finished after %.3fs", clock() - origin)
