"""Packet and buffer value types and their pure manipulation rules.

Actions are opaque here: packets and buffers carry whatever values the
environment defines and never inspect them. All types are immutable, so
they can be shared freely across threads and stored in traces as-is.
"""

from dataclasses import dataclass


class _Stale:
    """Marker for a packet that arrived too late for any of its rows."""

    __slots__ = ()

    def __repr__(self):
        return "STALE"


STALE = _Stale()


@dataclass(frozen=True, slots=True)
class ActionPacket:
    """Timestamped matrix of candidate actions.

    Row i (1-based) is the buffer content to install if the packet reaches
    the layer i steps after it was created; later columns of that row are
    executed on subsequent steps if no newer packet arrives.
    """

    stamp: int
    matrix: tuple  # tuple of equal-width row tuples

    @property
    def rows(self):
        return len(self.matrix)

    @property
    def width(self):
        return len(self.matrix[0])


def make_packet(stamp, rows):
    """Validated packet constructor: >= 1 row, all rows the same width."""
    if stamp < 0:
        raise ValueError(f"packet stamp must be >= 0, got {stamp}")
    rows = tuple(tuple(r) for r in rows)
    if not rows:
        raise ValueError("packet needs at least one row")
    width = len(rows[0])
    if width < 1:
        raise ValueError("packet rows need at least one action")
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged packet rows: {[len(r) for r in rows]}")
    return ActionPacket(stamp=int(stamp), matrix=rows)


@dataclass(frozen=True, slots=True)
class ActionBuffer:
    """The upcoming actions held by the layer.

    ``delay`` tags the arrival delay of the packet the slots came from and
    ``counter`` counts shifts since installation, so the packet that filled
    the buffer was stamped t - (delay + counter) at layer time t.
    """

    slots: tuple
    delay: int
    counter: int

    @property
    def width(self):
        return len(self.slots)


@dataclass(frozen=True, slots=True)
class ObservationPacket:
    """Snapshot sent layer -> agent each step: time, state, buffer."""

    stamp: int
    state: object
    buffer: ActionBuffer

    @property
    def slots(self):
        return self.buffer.slots

    @property
    def delay(self):
        return self.buffer.delay

    @property
    def counter(self):
        return self.buffer.counter


def shift_buffer(buffer):
    """Advance the buffer one step: drop the first slot, repeat the last."""
    slots = buffer.slots
    return ActionBuffer(
        slots=slots[1:] + (slots[-1],),
        delay=buffer.delay,
        counter=buffer.counter + 1,
    )


def select_row(packet, arrival):
    """Pick the buffer row for a packet arriving at step ``arrival``.

    Returns row (arrival - stamp) of the matrix, or STALE if the packet has
    fewer rows than the realized delay. Arrival at or before the stamp is a
    contract violation: packets cannot arrive before they were created.
    """
    offset = arrival - packet.stamp
    if offset < 1:
        raise ValueError(
            f"packet stamped {packet.stamp} cannot arrive at step {arrival}"
        )
    if offset > packet.rows:
        return STALE
    return packet.matrix[offset - 1]


def install_row(packet, arrival):
    """Buffer resulting from installing the row selected at ``arrival``."""
    row = select_row(packet, arrival)
    if row is STALE:
        raise ValueError("cannot install a stale packet")
    return ActionBuffer(slots=row, delay=arrival - packet.stamp, counter=0)


def origin_stamp(t, delay, counter):
    """Stamp of the packet whose row currently fills the buffer.

    Negative means the buffer still holds the layer's initial actions.
    """
    return t - (delay + counter)
