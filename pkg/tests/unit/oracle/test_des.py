import pytest

from queuepulse.oracle.des import EventKind, EventRecord, des_simulate, validate_against_oracle
from queuepulse.schemas.models import (
    BlockingTandemModel,
    ClosedTandemModel,
    GG1Model,
    GGmModel,
    NetworkModel,
    RoutingPlan,
    TandemModel,
)
from queuepulse.types import DeadlockError, HorizonError, InputLengthError, OracleMismatchError

KINDS = ["gg1", "tandem", "blocking_manufacturing", "blocking_communication", "closed_tandem", "ggm", "network"]


def test_event_records_order_by_time_then_node_then_customer():
    events = [
        EventRecord(2.0, 1, 0, EventKind.SERVICE_END),
        EventRecord(1.0, 2, 5, EventKind.ARRIVAL),
        EventRecord(1.0, 1, 7, EventKind.UNBLOCK),
        EventRecord(1.0, 1, 3, EventKind.SERVICE_START),
    ]
    assert sorted(events) == [events[3], events[2], events[1], events[0]]


def test_gg1_example_and_trace(gg1_example):
    trace = []
    path = des_simulate(GG1Model(), gg1_example, 3, trace=trace)

    assert path.node_departures(1).tolist() == [3.0, 5.0, 7.0]
    assert path.node_arrivals(1).tolist() == [1.0, 2.0, 3.0]
    kinds = [e.kind for e in trace]
    assert kinds.count(EventKind.ARRIVAL) == 3
    assert kinds.count(EventKind.SERVICE_START) == 3
    assert kinds.count(EventKind.SERVICE_END) == 3
    assert [e.time for e in trace] == sorted(e.time for e in trace)


def test_manufacturing_customer_waits_on_the_server(blocking_example):
    """The blocked customer stays on server 1 until node 2 empties at t = 5."""
    model = BlockingTandemModel(node_count=2, buffers=[0], blocking="manufacturing")
    trace = []
    path = des_simulate(model, blocking_example, 3, trace=trace)

    assert path.node_departures(1).tolist() == [2.0, 5.0, 8.0]
    assert path.node_departures(2).tolist() == [5.0, 8.0, 11.0]
    assert EventRecord(5.0, 1, 1, EventKind.UNBLOCK) in trace


def test_communication_start_waits_for_room(blocking_example):
    model = BlockingTandemModel(node_count=2, buffers=[0], blocking="communication")
    path = des_simulate(model, blocking_example, 3)

    assert path.node_departures(1).tolist() == [2.0, 6.0, 10.0]
    assert path.node_departures(2).tolist() == [5.0, 9.0, 13.0]


def test_closed_tandem_example():
    model = ClosedTandemModel(node_count=2, populations=[1, 0])
    path = des_simulate(model, {"service.1": [1.0, 1.0], "service.2": [2.0, 2.0]}, 2)

    assert path.node_departures(1).tolist() == [1.0, 4.0]
    assert path.node_departures(2).tolist() == [3.0, 6.0]


def test_multiserver_completions():
    path = des_simulate(GGmModel(servers=2), {"interarrival": [1.0] * 3, "service": [3.0, 1.0, 1.0]}, 3)

    assert path.completions.tolist() == [4.0, 3.0, 4.0]
    assert path.node_departures(1).tolist() == [3.0, 4.0, 4.0]


@pytest.mark.parametrize("kind", KINDS)
def test_engine_agrees_with_oracle(kind, model_factory, random_durations):
    """Random inputs for every model kind: recursion and event scheduling give the same epochs."""
    model = model_factory(kind)
    horizon = [60, 30, 30, 60] if kind == "network" else 150
    for _ in range(3):
        durations = random_durations(model, 60 if kind == "network" else 150)
        assert validate_against_oracle(model, durations, horizon) <= 1e-9


def test_oracle_reports_starved_network():
    """Node 2 serves its customer twice, then drops it; node 1 never sees anyone."""
    model = NetworkModel(
        node_count=2,
        populations=[0, 1],
        routing=RoutingPlan(node_count=2, routes=[{"sequence": [1]}, {"sequence": [2], "periodic": False}]),
    )
    with pytest.raises(DeadlockError):
        des_simulate(model, {"service.1": [1.0], "service.2": [1.0, 1.0, 1.0]}, 1)


def test_oracle_reports_exhausted_services():
    model = NetworkModel(node_count=2, populations=[1, 0], routing=RoutingPlan.cyclic(2))
    with pytest.raises(HorizonError):
        des_simulate(model, {"service.1": [1.0], "service.2": [1.0, 1.0]}, [1, 2])


def test_oracle_rejects_short_inputs(gg1_example):
    with pytest.raises(InputLengthError):
        des_simulate(GG1Model(), gg1_example, 4)


def test_mismatch_beyond_tolerance(mocker, gg1_example):
    """A perturbed engine path is caught and the difference reported."""
    from queuepulse.engines import single_server

    original = single_server.gg1_recursion

    def shifted(alpha, tau, horizon):
        arrivals, departures = original(alpha, tau, horizon)
        return arrivals, [d + 0.5 for d in departures]

    mocker.patch.object(single_server, "gg1_recursion", side_effect=shifted)

    with pytest.raises(OracleMismatchError) as excinfo:
        validate_against_oracle(GG1Model(), gg1_example, 3)
    assert excinfo.value.details["difference"] == pytest.approx(0.5)


def test_external_arrivals_keep_their_customer_ids(gg1_example, blocking_example):
    """Each scheduled arrival is the customer later served and completed; ids follow arrival order."""
    trace = []
    des_simulate(GG1Model(), gg1_example, 3, trace=trace)

    arrived = [e.customer for e in trace if e.kind is EventKind.ARRIVAL]
    finished = [e.customer for e in trace if e.kind is EventKind.SERVICE_END]
    assert arrived == [0, 1, 2]
    assert finished == arrived

    trace = []
    des_simulate(TandemModel(node_count=2), blocking_example, 3, trace=trace)
    assert [e.customer for e in trace if e.kind is EventKind.ARRIVAL] == [0, 1, 2]
    assert [e.customer for e in trace if e.kind is EventKind.SERVICE_END and e.node == 2] == [0, 1, 2]


def test_hand_examples_replay_exactly(hand_example):
    model, durations, expected = hand_example
    path = des_simulate(model, durations, len(expected[0]))

    assert [path.node_departures(n)[:len(d)].tolist() for n, d in enumerate(expected, start=1)] == expected
