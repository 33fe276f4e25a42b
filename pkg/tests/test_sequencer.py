import pytest

from afcsim.errors import ChannelConflictError
from afcsim.sequencer import (
    Event,
    Phase,
    Timeline,
    acquisition_summary,
    channel_intervals,
    compile_sequence,
    concat_timelines,
    duration_to_ns,
    gate_on_fraction,
    paper_storage_phases,
    rule_gate_off_during_burn,
    rule_gate_off_initially,
    standard_rules,
    timeline_to_csv,
    validate_timeline,
)


class TestDurationParsing:
    @pytest.mark.parametrize("text,ns", [
        ("38 ms", 38_000_000),
        ("120ms", 120_000_000),
        ("2.5 s", 2_500_000_000),
        ("250 ns", 250),
        ("1.5 us", 1500),
    ])
    def test_exact_values(self, text, ns):
        assert duration_to_ns(text) == ns

    def test_fractional_nanoseconds_rejected(self):
        with pytest.raises(ValueError):
            duration_to_ns("0.5 ns")

    def test_missing_unit_rejected(self):
        with pytest.raises(ValueError):
            duration_to_ns("38")

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            duration_to_ns("0 ms")


class TestCompile:
    def test_storage_sequence_duration_is_exact(self):
        timeline = compile_sequence(paper_storage_phases(), repetitions=240)
        assert timeline.total_duration_ns == 2_500_000_000

    def test_trial_slots_exact(self):
        timeline = compile_sequence(paper_storage_phases(), repetitions=240)
        assert timeline.trial_slots_per_sequence == 8_648_000

    def test_single_phase_two_events_per_active_channel(self):
        timeline = compile_sequence(
            [Phase("on", duration_to_ns("1 s"),
                   {"probe_enable": True, "snspd_gate": True})])
        assert timeline.total_duration_ns == 1_000_000_000
        for ch in ("probe_enable", "snspd_gate"):
            events = [e for e in timeline.events if e.channel == ch]
            assert len(events) == 2
            assert events[0] == Event(0, ch, True)
            assert events[1] == Event(1_000_000_000, ch, False)

    def test_phase_boundaries_are_exact_cumulative_sums(self):
        timeline = compile_sequence(paper_storage_phases())
        gate_on = [e.time_ns for e in timeline.events
                   if e.channel == "snspd_gate" and e.state]
        assert gate_on == [38_000_000 + 120_000_000 + 180_000_000]

    def test_unknown_channel_rejected(self):
        with pytest.raises(ChannelConflictError):
            Phase("bad", 10, {"laser_z": True})

    def test_empty_phase_list_rejected(self):
        with pytest.raises(ValueError):
            compile_sequence([])

    def test_associativity_with_boundary_splice(self):
        a = [Phase("p1", 100, {"probe_enable": True}),
             Phase("p2", 50, {"probe_enable": True, "snspd_gate": True})]
        b = [Phase("p3", 70, {"snspd_gate": True}),
             Phase("p4", 30, {})]
        combined = compile_sequence(a + b)
        spliced = concat_timelines(compile_sequence(a), compile_sequence(b))
        assert combined.events == spliced.events
        assert combined.total_duration_ns == spliced.total_duration_ns


class TestTimelineInvariants:
    def test_alternating_states_enforced(self):
        with pytest.raises(ChannelConflictError):
            Timeline((Event(0, "snspd_gate", True),
                      Event(10, "snspd_gate", True)), 20, 1)

    def test_unsorted_events_rejected(self):
        with pytest.raises(ValueError):
            Timeline((Event(10, "snspd_gate", True),
                      Event(5, "snspd_gate", False)), 20, 1)

    def test_event_outside_duration_rejected(self):
        with pytest.raises(ValueError):
            Timeline((Event(30, "snspd_gate", True),), 20, 1)


class TestValidation:
    def test_storage_sequence_passes_all_rules(self):
        timeline = compile_sequence(paper_storage_phases(), 240)
        report = validate_timeline(timeline, standard_rules(338_000_000))
        assert all(r.passed for r in report)
        assert len(report) == 3

    def test_burn_extended_into_storage_caught_with_timestamp(self):
        phases = paper_storage_phases()
        bad_storage = Phase("storage", phases[3].duration_ns,
                            {"mems_out": True, "snspd_gate": True,
                             "probe_enable": True, "burn_enable": True},
                            trial_rate_hz=4e6)
        timeline = compile_sequence(phases[:3] + [bad_storage])
        result = rule_gate_off_during_burn()(timeline)
        assert not result.passed
        assert result.offending_times_ns == (338_000_000,)

    def test_short_initial_gate_off_caught(self):
        phases = paper_storage_phases(wait_decay="142 ms")
        timeline = compile_sequence(phases)
        result = rule_gate_off_initially(338_000_000)(timeline)
        assert not result.passed
        assert result.offending_times_ns == (300_000_000,)

    def test_validation_is_pure(self):
        timeline = compile_sequence(paper_storage_phases(), 240)
        rules = standard_rules(338_000_000)
        assert validate_timeline(timeline, rules) == validate_timeline(timeline, rules)


class TestAcquisitionSummary:
    def test_weak_coherent_campaign(self):
        timeline = compile_sequence(paper_storage_phases(), 240)
        summary = acquisition_summary(timeline)
        assert summary.wall_time_s == 600.0
        assert summary.live_time_s == pytest.approx(2.162 * 240, rel=1e-12)
        assert summary.total_trials == 8_648_000 * 240

    def test_single_emitter_campaign(self):
        timeline = compile_sequence(paper_storage_phases(), 480)
        assert acquisition_summary(timeline).wall_time_s == 1200.0

    def test_zero_repetitions(self):
        timeline = compile_sequence(paper_storage_phases(), 0)
        summary = acquisition_summary(timeline)
        assert summary == (0, 0.0, 0.0)


class TestHelpers:
    def test_channel_intervals(self):
        timeline = compile_sequence(paper_storage_phases())
        assert channel_intervals(timeline, "burn_enable") == \
            [(38_000_000, 158_000_000)]
        assert channel_intervals(timeline, "snspd_gate") == \
            [(338_000_000, 2_500_000_000)]

    def test_gate_on_fraction(self):
        timeline = compile_sequence(paper_storage_phases())
        assert gate_on_fraction(timeline) == pytest.approx(2162 / 2500, rel=1e-12)

    def test_csv_export_bit_exact(self, tmp_path):
        timeline = compile_sequence(paper_storage_phases(), 240)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        timeline_to_csv(p1, timeline)
        timeline_to_csv(p2, timeline)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "time_ns,channel,state"
