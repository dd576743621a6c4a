import numpy as np
import pytest

from promptrack import simworld
from promptrack.errors import SequencingError
from promptrack.model import Candidate
from promptrack.net import TrackerNet
from promptrack.simworld import OracleDecoder
from promptrack.tokens import PromptKind, PromptText
from promptrack.tracker import (
    PromptSchedule,
    Tracklet,
    TrackerParams,
    TrackerSession,
    cascade_matching,
    remove_deprecation,
    run_session,
    update,
)


def make_tracklet(tid, box=(0.5, 0.5, 0.1, 0.1), feature=None, state="active", last_seen=0):
    return Tracklet(
        id=tid,
        box=box,
        conf=1.0,
        feature=np.array([1.0, 0.0, 0.0]) if feature is None else np.asarray(feature, float),
        last_seen=last_seen,
        state=state,
        assigned_token_indices=(0,),
    )


def nm(*words):
    return PromptText(PromptKind.NM, tuple(words))


def lane_world(**kw):
    cfg = simworld.WorldConfig(
        frames=kw.pop("frames", 12),
        grid=(12, 12),
        drift_cells=(0.0, 0.0),
        noise_cells=0.0,
        redraw_every=0,
        **kw,
    )
    return simworld.generate(kw.pop("seed", 3), cfg)


def oracle_session(scenario, schedule=None, params=TrackerParams(), seed=0):
    net = TrackerNet(seed=seed, grid=scenario.grid)
    decoder = OracleDecoder(scenario, net.encoder, net.vocab)
    sched = PromptSchedule(tuple(schedule if schedule is not None else scenario.schedule))
    return TrackerSession(decoder, sched, params)


class TestSchedule:
    def test_must_start_at_zero(self):
        with pytest.raises(ValueError):
            PromptSchedule(((3, nm("car")),))

    def test_strictly_increasing(self):
        with pytest.raises(ValueError):
            PromptSchedule(((0, nm("car")), (5, nm("dog")), (5, nm("ball"))))


class TestInitialize:
    def test_ascending_ids_in_candidate_order(self):
        scenario = lane_world()
        session = oracle_session(scenario)
        img = session.decoder.image_tokens(scenario.frame(0))
        cands = [Candidate((0.1, 0.1, 0.05, 0.05), 1.0, i) for i in (4, 9, 2)]
        fresh = session.initialize(cands, img)
        assert [t.id for t in fresh] == [1, 2, 3]
        assert session.next_id == 4

    def test_empty_candidates_leave_counter(self):
        scenario = lane_world()
        session = oracle_session(scenario)
        img = session.decoder.image_tokens(scenario.frame(0))
        assert session.initialize([], img) == []
        assert session.next_id == 1

    def test_features_copied_from_source_tokens(self):
        scenario = lane_world()
        session = oracle_session(scenario)
        img = session.decoder.image_tokens(scenario.frame(0))
        [t] = session.initialize([Candidate((0.1, 0.1, 0.05, 0.05), 0.9, 7)], img)
        assert np.array_equal(t.feature, img.values[7])
        assert t.assigned_token_indices == (7,)


class TestCascadeMatching:
    def test_identical_sets_self_match(self):
        xs = [make_tracklet(i, feature=np.eye(3)[i]) for i in range(3)]
        matched, unm_new, unm_old = cascade_matching(xs, xs, 0.75)
        assert sorted(matched) == [(0, 0), (1, 1), (2, 2)]
        assert unm_new == [] and unm_old == []

    def test_orthogonal_features_disjoint_boxes_no_match(self):
        a = [make_tracklet(1, box=(0.1, 0.1, 0.05, 0.05), feature=[1, 0, 0])]
        b = [make_tracklet(2, box=(0.9, 0.9, 0.05, 0.05), feature=[0, 1, 0])]
        matched, unm_new, unm_old = cascade_matching(a, b, 0.75)
        assert matched == [] and unm_new == [0] and unm_old == [0]

    def test_hungarian_prefers_global_optimum(self):
        # crossed similarities: off-diagonal {0.9, 0.8} beats diagonal {0.76, 0.3};
        # solve for unit features realizing that exact cosine matrix
        target = np.array([[0.76, 0.9], [0.8, 0.3]])
        alpha = np.arccos(0.76) + np.arccos(0.9)  # angle between the prev features
        prev_feats = [np.array([1.0, 0.0, 0.0]), np.array([np.cos(alpha), np.sin(alpha), 0.0])]

        def solve(row):
            u = row[0]
            v = (row[1] - u * np.cos(alpha)) / np.sin(alpha)
            return np.array([u, v, np.sqrt(1.0 - u * u - v * v)])

        new_feats = [solve(target[0]), solve(target[1])]
        sims = np.array([[float(n @ p) for p in prev_feats] for n in new_feats])
        assert np.allclose(sims, target, atol=1e-9)
        prev = [
            make_tracklet(1, box=(0.1, 0.1, 0.01, 0.01), feature=prev_feats[0]),
            make_tracklet(2, box=(0.9, 0.9, 0.01, 0.01), feature=prev_feats[1]),
        ]
        new = [
            make_tracklet(-1, box=(0.4, 0.4, 0.01, 0.01), feature=new_feats[0]),
            make_tracklet(-1, box=(0.6, 0.6, 0.01, 0.01), feature=new_feats[1]),
        ]
        matched, _, _ = cascade_matching(new, prev, 0.75)
        assert sorted(matched) == [(0, 1), (1, 0)]

    def test_iou_stage_catches_feature_misses(self):
        a = [make_tracklet(-1, box=(0.5, 0.5, 0.2, 0.2), feature=[1, 0, 0])]
        b = [make_tracklet(3, box=(0.52, 0.5, 0.2, 0.2), feature=[0, 1, 0])]
        matched, _, _ = cascade_matching(a, b, 0.75)
        assert matched == [(0, 0)]


class TestUpdate:
    def test_ids_preserved_and_reactivated(self):
        old = make_tracklet(5, state="inactive", last_seen=2)
        fresh = make_tracklet(-1, box=(0.3, 0.3, 0.1, 0.1), feature=[0, 0, 1])
        [out] = update([fresh], [old], now=7)
        assert out.id == 5 and out.state == "active" and out.last_seen == 7
        assert out.box == (0.3, 0.3, 0.1, 0.1)
        assert np.array_equal(out.feature, fresh.feature)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            update([make_tracklet(1)], [], now=0)

    def test_no_matches_empty(self):
        assert update([], [], now=0) == []


class TestRemoveDeprecation:
    def test_boundary_inclusive(self):
        keep = make_tracklet(1, state="inactive", last_seen=70)
        drop = make_tracklet(2, state="inactive", last_seen=69)
        out = remove_deprecation([keep, drop], t_tlr=30, now=100)
        assert [t.id for t in out] == [1]

    def test_zero_tolerance(self):
        now_t = make_tracklet(1, state="inactive", last_seen=10)
        older = make_tracklet(2, state="inactive", last_seen=9)
        out = remove_deprecation([now_t, older], t_tlr=0, now=10)
        assert [t.id for t in out] == [1]


class TestStep:
    def test_stable_ids_over_static_scene(self):
        scenario = lane_world(frames=10, speed_cells=(0.0001, 0.0002))
        results = run_session(
            oracle_session(scenario).decoder, scenario.iter_frames(), PromptSchedule(scenario.schedule)
        )
        first = {t.id for t in results[0].tracklets}
        assert len(first) == 4
        for r in results:
            assert {t.id for t in r.tracklets} == first

    def test_out_of_order_frames_rejected(self):
        scenario = lane_world()
        session = oracle_session(scenario)
        session.step(scenario.frame(0))
        with pytest.raises(SequencingError):
            session.step(scenario.frame(0))

    def test_deterministic_given_seed(self):
        scenario = lane_world(frames=8)
        a = run_session(oracle_session(scenario).decoder, scenario.iter_frames(), PromptSchedule(scenario.schedule))
        b = run_session(oracle_session(scenario).decoder, scenario.iter_frames(), PromptSchedule(scenario.schedule))
        assert a == b

    def test_disjoint_prompt_switch_reinitializes_with_fresh_ids(self):
        scenario = lane_world(frames=10, categories=("person", "car", "dog", "ball"))
        cats = scenario.categories_present()
        first, second = cats[:2], cats[2:]
        schedule = PromptSchedule(((0, nm(*first)), (5, nm(*second))))
        session = oracle_session(scenario, schedule.entries)
        results = [session.step(f) for f in scenario.iter_frames()]
        early = {t.id for r in results[:5] for t in r.tracklets}
        late = {t.id for r in results[5:] for t in r.tracklets}
        assert early and late
        assert early.isdisjoint(late)  # ids never reused

    def test_subset_prompt_switch_keeps_surviving_ids(self):
        scenario = lane_world(frames=10)
        cats = scenario.categories_present()
        schedule = PromptSchedule(((0, nm(*cats)), (5, nm(cats[0]))))
        session = oracle_session(scenario, schedule.entries)
        results = [session.step(f) for f in scenario.iter_frames()]
        assert len(results[4].tracklets) == 4
        survivor_ids = {t.id for t in results[5].tracklets}
        assert len(results[5].tracklets) == 1
        assert survivor_ids <= {t.id for t in results[4].tracklets}
        for r in results[5:]:
            assert {t.id for t in r.tracklets} == survivor_ids

    def test_occlusion_reidentifies_same_id(self):
        scenario = lane_world(frames=20)
        scenario.objects[1].occlusions = ((6, 11),)  # 5-frame gap, below tolerance
        session = oracle_session(scenario)
        results = [session.step(f) for f in scenario.iter_frames()]
        def ids_at(t):
            return {tr.id for tr in results[t].tracklets}
        gone = ids_at(5) - ids_at(6)
        assert len(gone) == 1
        assert ids_at(11) == ids_at(5)  # reappears under its old id

    def test_active_and_inactive_stay_disjoint(self):
        scenario = lane_world(frames=14)
        scenario.objects[0].occlusions = ((4, 8),)
        session = oracle_session(scenario)
        for f in scenario.iter_frames():
            session.step(f)
            active_ids = {t.id for t in session.active}
            inactive_ids = {t.id for t in session.inactive}
            assert active_ids.isdisjoint(inactive_ids)
            assert len(active_ids) == len(session.active)
            assert len(inactive_ids) == len(session.inactive)
