"""Batch drivers tying the world, the tracker and the metrics together."""

from __future__ import annotations

import time

from .metrics import MetricReport, TrackRecord, TrackSet, summary
from .simworld import Scenario, gt_records
from .tracker import PromptSchedule, TrackerParams, TrackerSession


def track_scenario(decoder, scenario: Scenario, schedule=None, params: TrackerParams = TrackerParams(), timings=None):
    """Run a full session over a scenario; returns flat track records.

    ``schedule`` defaults to the scenario's own; ``timings``, if a list, is
    filled with one per-frame wall-clock second count.
    """
    sched = PromptSchedule(tuple(schedule if schedule is not None else scenario.schedule))
    session = TrackerSession(decoder, sched, params)
    records = []
    for frame in scenario.iter_frames():
        started = time.perf_counter()
        result = session.step(frame)
        if timings is not None:
            timings.append(time.perf_counter() - started)
        for tr in result.tracklets:
            records.append(TrackRecord(frame=result.frame, id=tr.id, box=tr.box, conf=tr.conf))
    return records


def evaluate_records(records, scenario: Scenario, schedule=None) -> MetricReport:
    """Score track records against the scenario's prompt-filtered ground truth."""
    gt = TrackSet(gt_records(scenario, schedule), is_gt=True)
    return summary(gt, TrackSet(records))
