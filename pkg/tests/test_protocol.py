import pytest
from hypothesis import given, strategies as st

from delayrl.protocol import (
    STALE,
    ActionBuffer,
    install_row,
    make_packet,
    origin_stamp,
    select_row,
    shift_buffer,
)


def test_shift_drops_first_and_repeats_last():
    # eight-slot buffer: (a1..a8) -> (a2..a8, a8), counter 0 -> 1
    buf = ActionBuffer(slots=tuple(f"a{i}" for i in range(1, 9)), delay=3, counter=0)
    shifted = shift_buffer(buf)
    assert shifted.slots == tuple(f"a{i}" for i in range(2, 9)) + ("a8",)
    assert shifted.counter == 1
    assert shifted.delay == 3


def test_shift_single_slot_repeats_itself():
    buf = ActionBuffer(slots=("a",), delay=1, counter=4)
    shifted = shift_buffer(buf)
    assert shifted.slots == ("a",)
    assert shifted.counter == 5


def test_shift_two_slots():
    buf = ActionBuffer(slots=("x", "y"), delay=1, counter=0)
    assert shift_buffer(buf).slots == ("y", "y")


@given(
    slots=st.lists(st.integers(0, 9), min_size=1, max_size=12),
    delay=st.integers(1, 30),
    counter=st.integers(0, 30),
)
def test_shift_preserves_width_and_delay(slots, delay, counter):
    buf = ActionBuffer(slots=tuple(slots), delay=delay, counter=counter)
    shifted = shift_buffer(buf)
    assert shifted.width == buf.width
    assert shifted.delay == buf.delay
    assert shifted.counter == buf.counter + 1


def test_select_row_by_realized_delay():
    packet = make_packet(17, [(i, i + 10) for i in range(1, 6)])
    row = select_row(packet, 20)  # arrived with a delay of 3
    assert row == (3, 13)
    buf = install_row(packet, 20)
    assert buf.delay == 3 and buf.counter == 0


def test_select_first_row_at_minimum_delay():
    packet = make_packet(5, [("r1a", "r1b"), ("r2a", "r2b")])
    assert select_row(packet, 6) == ("r1a", "r1b")


def test_select_beyond_rows_is_stale():
    packet = make_packet(5, [("r1",), ("r2",)])
    assert select_row(packet, 5 + 2 + 1) is STALE
    with pytest.raises(ValueError):
        install_row(packet, 8)


def test_arrival_before_creation_is_a_contract_violation():
    packet = make_packet(5, [("a",)])
    with pytest.raises(ValueError):
        select_row(packet, 5)
    with pytest.raises(ValueError):
        select_row(packet, 3)


@given(rows=st.integers(1, 6), width=st.integers(1, 5), data=st.data())
def test_selected_row_first_entry_matches_matrix(rows, width, data):
    matrix = [
        tuple(data.draw(st.integers(0, 99)) for _ in range(width))
        for _ in range(rows)
    ]
    packet = make_packet(0, matrix)
    for i in range(1, rows + 1):
        assert select_row(packet, i)[0] == matrix[i - 1][0]


def test_make_packet_shapes():
    p1 = make_packet(0, [("a",)])
    assert p1.rows == 1 and p1.width == 1
    p2 = make_packet(5, [("a", "b"), ("c", "d"), ("e", "f")])
    assert p2.rows == 3 and p2.width == 2


def test_make_packet_rejects_bad_input():
    with pytest.raises(ValueError):
        make_packet(5, [("a", "b"), ("c", "d", "e")])  # ragged
    with pytest.raises(ValueError):
        make_packet(0, [])
    with pytest.raises(ValueError):
        make_packet(-1, [("a",)])
    with pytest.raises(ValueError):
        make_packet(0, [()])


@given(
    rows=st.integers(1, 5),
    width=st.integers(1, 4),
    arrival_offset=st.integers(1, 5),
    shifts=st.integers(0, 10),
    stamp=st.integers(0, 50),
)
def test_origin_invariant_survives_shifting(rows, width, arrival_offset, shifts, stamp):
    # install row i at time stamp+i, then shift: t = stamp + delay + counter holds
    matrix = [tuple(range(r * width, (r + 1) * width)) for r in range(rows)]
    packet = make_packet(stamp, matrix)
    if arrival_offset > rows:
        assert select_row(packet, stamp + arrival_offset) is STALE
        return
    buf = install_row(packet, stamp + arrival_offset)
    t = stamp + arrival_offset
    assert origin_stamp(t, buf.delay, buf.counter) == stamp
    for _ in range(shifts):
        buf = shift_buffer(buf)
        t += 1
        assert origin_stamp(t, buf.delay, buf.counter) == stamp


def test_origin_arithmetic_worked_example():
    # packet stamped 17 arriving with delay 3 then shifted twice: 17 + 3 + 2 = 22
    assert origin_stamp(22, 3, 2) == 17
