"""Compile declarative experiment phases into validated per-channel event
timelines, and check gating/routing safety rules.

All event times are integer nanoseconds: cumulative sums are exact, so
timelines are suitable for golden-file comparison. Channels are binary
switch states; analog pulse shapes live elsewhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Callable, Mapping, NamedTuple, Sequence

from .errors import ChannelConflictError

__all__ = [
    "CHANNELS",
    "Phase",
    "Event",
    "Timeline",
    "compile_sequence",
    "concat_timelines",
    "duration_to_ns",
    "channel_intervals",
    "gate_on_fraction",
    "RuleResult",
    "validate_timeline",
    "rule_gate_off_during_burn",
    "rule_gate_off_initially",
    "rule_no_burn_to_detector_route",
    "standard_rules",
    "AcquisitionSummary",
    "acquisition_summary",
    "timeline_to_csv",
]

CHANNELS = ("mems_in", "mems_out", "snspd_gate", "burn_enable", "probe_enable")

_UNIT_NS = {"ns": 1, "us": 10**3, "ms": 10**6, "s": 10**9}


def duration_to_ns(text: str | int) -> int:
    """Parse '38 ms' / '120ms' / '2.5 s' / raw-int nanoseconds, exactly."""
    if isinstance(text, int):
        if text <= 0:
            raise ValueError("duration must be positive")
        return text
    s = text.strip().lower().replace(" ", "")
    for unit in ("ns", "us", "ms", "s"):
        if s.endswith(unit):
            num = s[: -len(unit)]
            try:
                value = Decimal(num) * _UNIT_NS[unit]
            except InvalidOperation as exc:
                raise ValueError(f"cannot parse duration {text!r}") from exc
            if value != value.to_integral_value():
                raise ValueError(f"duration {text!r} is not an integer nanosecond count")
            if value <= 0:
                raise ValueError("duration must be positive")
            return int(value)
    raise ValueError(f"duration {text!r} lacks a unit (ns/us/ms/s)")


@dataclass(frozen=True)
class Phase:
    """One timeline segment: channel states held for ``duration_ns``.

    Channels not listed are off. ``trial_rate_hz`` > 0 marks the phase as
    carrying storage trials at that rate.
    """

    name: str
    duration_ns: int
    channels: Mapping[str, bool] = field(default_factory=dict)
    trial_rate_hz: float = 0.0

    def __post_init__(self):
        if self.duration_ns <= 0:
            raise ValueError(f"phase {self.name!r}: duration must be positive")
        for ch in self.channels:
            if ch not in CHANNELS:
                raise ChannelConflictError(
                    f"phase {self.name!r} references unknown channel {ch!r}"
                )
        if self.trial_rate_hz < 0:
            raise ValueError("trial_rate_hz must be >= 0")

    def state(self, channel: str) -> bool:
        return bool(self.channels.get(channel, False))

    @property
    def trial_slots(self) -> int:
        """Whole trial slots in this phase (exact rational arithmetic)."""
        if self.trial_rate_hz == 0:
            return 0
        slots = Fraction(self.duration_ns) * Fraction(self.trial_rate_hz) / 10**9
        return int(slots)


class Event(NamedTuple):
    time_ns: int
    channel: str
    state: bool


@dataclass(frozen=True)
class Timeline:
    """Validated, time-sorted switch events for one storage sequence."""

    events: tuple[Event, ...]
    total_duration_ns: int
    repetitions: int
    trial_slots_per_sequence: int = 0
    live_ns_per_sequence: int = 0

    def __post_init__(self):
        if self.total_duration_ns <= 0:
            raise ValueError("total_duration_ns must be positive")
        if self.repetitions < 0:
            raise ValueError("repetitions must be >= 0")
        last_time = -1
        last_state: dict[str, bool] = {}
        for ev in self.events:
            if ev.channel not in CHANNELS:
                raise ChannelConflictError(f"unknown channel {ev.channel!r}")
            if ev.time_ns < last_time:
                raise ValueError("events must be time-sorted")
            if not (0 <= ev.time_ns <= self.total_duration_ns):
                raise ValueError("event outside the sequence duration")
            prev = last_state.get(ev.channel, False)
            if prev == ev.state:
                raise ChannelConflictError(
                    f"channel {ev.channel!r} set to {ev.state} twice in a row "
                    f"(t = {ev.time_ns} ns)"
                )
            last_state[ev.channel] = ev.state
            last_time = ev.time_ns

    @property
    def total_duration_s(self) -> float:
        return self.total_duration_ns / 1e9


def compile_sequence(phases: Sequence[Phase], repetitions: int = 1) -> Timeline:
    """Concatenate phases into a Timeline; events mark state changes only,
    and every channel is returned to off at the end of the sequence."""
    if not phases:
        raise ValueError("at least one phase is required")
    events: list[Event] = []
    state = {ch: False for ch in CHANNELS}
    t = 0
    slots = 0
    live = 0
    for phase in phases:
        for ch in CHANNELS:
            want = phase.state(ch)
            if want != state[ch]:
                events.append(Event(t, ch, want))
                state[ch] = want
        if phase.state("snspd_gate"):
            live += phase.duration_ns
        slots += phase.trial_slots
        t += phase.duration_ns
    for ch in CHANNELS:
        if state[ch]:
            events.append(Event(t, ch, False))
    events.sort(key=lambda e: (e.time_ns, e.channel, e.state))
    return Timeline(tuple(events), t, repetitions, slots, live)


def concat_timelines(first: Timeline, second: Timeline) -> Timeline:
    """Splice two timelines: ``second`` is shifted by the duration of
    ``first`` and boundary off/on pairs that cancel are dropped."""
    shift = first.total_duration_ns
    boundary_off = {e.channel: e for e in first.events
                    if e.time_ns == shift and not e.state}
    opening_on = {e.channel for e in second.events
                  if e.time_ns == 0 and e.state}
    cancel = set(boundary_off) & opening_on
    events = [e for e in first.events
              if not (e.time_ns == shift and not e.state and e.channel in cancel)]
    for e in second.events:
        if e.time_ns == 0 and e.state and e.channel in cancel:
            continue
        events.append(Event(e.time_ns + shift, e.channel, e.state))
    events.sort(key=lambda e: (e.time_ns, e.channel, e.state))
    return Timeline(tuple(events), shift + second.total_duration_ns,
                    first.repetitions,
                    first.trial_slots_per_sequence + second.trial_slots_per_sequence,
                    first.live_ns_per_sequence + second.live_ns_per_sequence)


def channel_intervals(timeline: Timeline, channel: str) -> list[tuple[int, int]]:
    """[(on_ns, off_ns), ...] intervals during which ``channel`` is on."""
    spans = []
    on_at = None
    for ev in timeline.events:
        if ev.channel != channel:
            continue
        if ev.state:
            on_at = ev.time_ns
        elif on_at is not None:
            spans.append((on_at, ev.time_ns))
            on_at = None
    if on_at is not None:
        spans.append((on_at, timeline.total_duration_ns))
    return spans


def gate_on_fraction(timeline: Timeline, channel: str = "snspd_gate") -> float:
    """Fraction of the sequence with ``channel`` on."""
    on = sum(b - a for a, b in channel_intervals(timeline, channel))
    return on / timeline.total_duration_ns


class RuleResult(NamedTuple):
    rule: str
    passed: bool
    offending_times_ns: tuple[int, ...]


def _overlaps(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> list[int]:
    hits = []
    for a0, a1 in a:
        for b0, b1 in b:
            if a0 < b1 and b0 < a1:
                hits.append(max(a0, b0))
    return hits


def rule_gate_off_during_burn(gate: str = "snspd_gate",
                              burn: str = "burn_enable") -> Callable:
    def check(timeline: Timeline) -> RuleResult:
        hits = _overlaps(channel_intervals(timeline, gate),
                         channel_intervals(timeline, burn))
        return RuleResult("gate_off_during_burn", not hits, tuple(hits))
    return check


def rule_gate_off_initially(window_ns: int, gate: str = "snspd_gate") -> Callable:
    def check(timeline: Timeline) -> RuleResult:
        hits = _overlaps(channel_intervals(timeline, gate), [(0, window_ns)])
        return RuleResult("gate_off_initially", not hits, tuple(hits))
    return check


def rule_no_burn_to_detector_route(burn_path: str = "mems_in",
                                   detector_path: str = "mems_out") -> Callable:
    def check(timeline: Timeline) -> RuleResult:
        hits = _overlaps(channel_intervals(timeline, burn_path),
                         channel_intervals(timeline, detector_path))
        return RuleResult("no_burn_to_detector_route", not hits, tuple(hits))
    return check


def standard_rules(initial_off_ns: int = 338_000_000) -> list[Callable]:
    """The three safety rules of the storage sequence: the detector gate is
    closed while burning and during the initial setup window, and the input
    (burn) routing never connects to the detector routing."""
    return [
        rule_gate_off_during_burn(),
        rule_gate_off_initially(initial_off_ns),
        rule_no_burn_to_detector_route(),
    ]


def validate_timeline(timeline: Timeline, rules: Sequence[Callable]) -> list[RuleResult]:
    """Apply each rule; purely functional, returns one result per rule."""
    return [rule(timeline) for rule in rules]


class AcquisitionSummary(NamedTuple):
    total_trials: int
    live_time_s: float
    wall_time_s: float


def acquisition_summary(timeline: Timeline) -> AcquisitionSummary:
    """Trial and timing totals over all repetitions."""
    reps = timeline.repetitions
    return AcquisitionSummary(
        total_trials=timeline.trial_slots_per_sequence * reps,
        live_time_s=timeline.live_ns_per_sequence * reps / 1e9,
        wall_time_s=timeline.total_duration_ns * reps / 1e9,
    )


def timeline_to_csv(path, timeline: Timeline) -> None:
    """Bit-exact event table (time_ns, channel, state)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ns", "channel", "state"])
        for ev in timeline.events:
            writer.writerow([ev.time_ns, ev.channel, int(ev.state)])


def paper_storage_phases(wait_setup: str = "38 ms", burn: str = "120 ms",
                         wait_decay: str = "180 ms", storage: str = "2162 ms",
                         trial_rate_hz: float = 4e6) -> list[Phase]:
    """The four-phase storage sequence: switch setup, comb burning, excited
    state decay / rerouting, then gated storage trials."""
    return [
        Phase("wait_setup", duration_to_ns(wait_setup),
              {"mems_in": True}),
        Phase("burn", duration_to_ns(burn),
              {"mems_in": True, "burn_enable": True}),
        Phase("wait_decay", duration_to_ns(wait_decay),
              {"mems_out": True}),
        Phase("storage", duration_to_ns(storage),
              {"mems_out": True, "snspd_gate": True, "probe_enable": True},
              trial_rate_hz=trial_rate_hz),
    ]
