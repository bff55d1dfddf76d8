import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfagent.knowledge.types import Precondition
from rfagent.state import FieldStatus, StateManager


def statuses(manager):
    snap = manager.snapshot()
    return {name: fs.status for name, fs in snap.fields.items()}


class TestCommit:
    def test_fields_start_unknown(self):
        snap = StateManager().snapshot()
        assert all(fs.status is FieldStatus.UNKNOWN for fs in snap.fields.values())

    def test_commit_confirms(self):
        manager = StateManager()
        manager.commit("n1", {"sweep_points": 201})
        snap = manager.snapshot()
        assert snap.value_of("sweep_points") == 201
        assert snap.confirmed("sweep_points")

    def test_unknown_field_rejected(self):
        with pytest.raises(KeyError):
            StateManager().commit("n1", {"wavelength_m": 0.1})

    def test_journal_records_verification(self):
        manager = StateManager()
        entry = manager.commit("n1", {"output_power_dbm": -10.0},
                               verification={"rule": "readback"})
        assert entry["kind"] == "commit"
        assert entry["verification"] == {"rule": "readback"}
        assert manager.journal[-1] is entry

    def test_sink_sees_every_entry(self):
        seen = []
        manager = StateManager(on_entry=seen.append)
        manager.commit("n1", {"span_hz": 1e9})
        manager.mark_invalid("n2", ["span_hz"], "mismatch")
        assert [e["kind"] for e in seen] == ["commit", "invalidate"]
        manager.remove_sink(seen.append)  # not registered; harmless


class TestFrequencyCoupling:
    def test_center_and_span_derive_start_stop(self):
        manager = StateManager()
        manager.commit("n1", {"center_frequency_hz": 3e9, "span_hz": 2e9})
        snap = manager.snapshot()
        assert snap.value_of("start_frequency_hz") == 2e9
        assert snap.value_of("stop_frequency_hz") == 4e9
        assert snap.confirmed("start_frequency_hz")

    def test_start_and_stop_derive_center_span(self):
        manager = StateManager()
        manager.commit("n1", {"start_frequency_hz": 1e9, "stop_frequency_hz": 3e9})
        snap = manager.snapshot()
        assert snap.value_of("center_frequency_hz") == 2e9
        assert snap.value_of("span_hz") == 2e9

    def test_lone_center_with_confirmed_span_rederives_endpoints(self):
        manager = StateManager()
        manager.commit("n1", {"start_frequency_hz": 1e9, "stop_frequency_hz": 3e9})
        manager.commit("n2", {"center_frequency_hz": 5e9})  # span 2e9 still holds
        snap = manager.snapshot()
        assert snap.value_of("start_frequency_hz") == 4e9
        assert snap.value_of("stop_frequency_hz") == 6e9
        assert snap.confirmed("start_frequency_hz")

    def test_lone_center_without_span_clears_stale_endpoints(self):
        manager = StateManager()
        manager.commit("n1", {"center_frequency_hz": 2e9, "span_hz": 2e9})
        manager.mark_invalid("n2", ["span_hz"], "lost")
        manager.commit("n3", {"center_frequency_hz": 5e9})
        snap = manager.snapshot()
        # span is not confirmed, so the endpoints cannot be derived any more
        assert snap.fields["start_frequency_hz"].status is FieldStatus.UNKNOWN
        assert snap.fields["stop_frequency_hz"].status is FieldStatus.UNKNOWN

    def test_start_crossing_stop_invalidates_dragged_partner(self):
        manager = StateManager()
        manager.commit("n1", {"start_frequency_hz": 1e9, "stop_frequency_hz": 3e9})
        manager.commit("n2", {"start_frequency_hz": 5e9})  # instrument drags stop
        snap = manager.snapshot()
        assert snap.fields["stop_frequency_hz"].status is FieldStatus.INVALID
        assert snap.confirmed("start_frequency_hz")

    def test_stop_crossing_start_invalidates_dragged_partner(self):
        manager = StateManager()
        manager.commit("n1", {"start_frequency_hz": 2e9, "stop_frequency_hz": 3e9})
        manager.commit("n2", {"stop_frequency_hz": 1e9})
        snap = manager.snapshot()
        assert snap.fields["start_frequency_hz"].status is FieldStatus.INVALID


class TestInvalidation:
    def test_mark_invalid_and_failures(self):
        manager = StateManager()
        manager.commit("n1", {"sweep_points": 201})
        manager.mark_invalid("n2", ["sweep_points"], "readback mismatch")
        snap = manager.snapshot()
        assert snap.fields["sweep_points"].status is FieldStatus.INVALID
        assert snap.value_of("sweep_points") == 201  # last value kept for diagnosis
        assert snap.unresolved_failures == ("n2: readback mismatch",)
        manager.resolve_failures()
        assert manager.snapshot().unresolved_failures == ()

    def test_recommit_restores_confirmed(self):
        manager = StateManager()
        manager.mark_invalid("n1", ["span_hz"], "bad")
        manager.commit("n2", {"span_hz": 1e9})
        assert manager.snapshot().confirmed("span_hz")


class TestPreconditions:
    def test_satisfies_requires_confirmed(self):
        manager = StateManager()
        pre = Precondition(field="active_measurement", op="defined", value=None)
        assert not manager.snapshot().satisfies(pre)
        manager.commit("n1", {"active_measurement": "S11"})
        assert manager.snapshot().satisfies(pre)
        manager.mark_invalid("n2", ["active_measurement"], "lost")
        assert not manager.snapshot().satisfies(pre)

    def test_comparison_ops(self):
        manager = StateManager()
        manager.commit("n1", {"output_power_dbm": -10.0})
        snap = manager.snapshot()
        assert snap.satisfies(Precondition("output_power_dbm", "le", 0.0))
        assert snap.satisfies(Precondition("output_power_dbm", "ge", -20.0))
        assert not snap.satisfies(Precondition("output_power_dbm", "ge", 0.0))
        assert snap.satisfies(Precondition("output_power_dbm", "eq", -10.0))


class TestContext:
    def test_active_run_and_data_refs(self):
        manager = StateManager()
        manager.set_active("run-1", "node-3")
        ref = manager.add_data_ref("trace-1", "complex_trace", "runs/x/t.csv")
        snap = manager.snapshot()
        assert snap.active_run_id == "run-1"
        assert snap.active_node == "node-3"
        assert snap.data_refs[0].id == "trace-1"
        assert ref.location == "runs/x/t.csv"

    def test_to_dict_shape(self):
        manager = StateManager()
        manager.commit("n1", {"sweep_points": 201})
        doc = manager.snapshot().to_dict()
        assert doc["fields"]["sweep_points"] == {"value": 201, "status": "confirmed"}
        assert "unresolved_failures" in doc


class TestReplay:
    def test_replay_reproduces_field_state(self):
        manager = StateManager()
        manager.commit("n1", {"center_frequency_hz": 3e9, "span_hz": 2e9})
        manager.commit("n2", {"start_frequency_hz": 5e9})
        manager.mark_invalid("n3", ["sweep_points"], "timeout")
        rebuilt = StateManager.replay(manager.journal)
        assert rebuilt.snapshot().fields == manager.snapshot().fields
        assert rebuilt.snapshot().unresolved_failures == manager.snapshot().unresolved_failures


_FIELD_VALUES = {
    "center_frequency_hz": st.floats(1e7, 2.65e10),
    "span_hz": st.floats(1e3, 1e10),
    "start_frequency_hz": st.floats(1e7, 2.65e10),
    "stop_frequency_hz": st.floats(1e7, 2.65e10),
    "sweep_points": st.integers(2, 20001),
    "output_power_dbm": st.floats(-45, 20),
}

_ops = st.lists(
    st.one_of(
        st.tuples(st.just("commit"),
                  st.sampled_from(sorted(_FIELD_VALUES))).flatmap(
                      lambda t: st.tuples(st.just(t[0]), st.just(t[1]),
                                          _FIELD_VALUES[t[1]])),
        st.tuples(st.just("invalidate"),
                  st.sampled_from(sorted(_FIELD_VALUES)), st.none()),
    ),
    min_size=1, max_size=12,
)


@settings(max_examples=60, deadline=None)
@given(_ops)
def test_replay_equals_original_for_any_history(ops):
    manager = StateManager()
    for i, (kind, fieldname, value) in enumerate(ops):
        if kind == "commit":
            manager.commit(f"n{i}", {fieldname: value})
        else:
            manager.mark_invalid(f"n{i}", [fieldname], "forced")
    rebuilt = StateManager.replay(manager.journal)
    assert rebuilt.snapshot().fields == manager.snapshot().fields
