import numpy as np
import pytest

from hiertrack import interchange as ic
from hiertrack.config import Config
from hiertrack.errors import MissingPrompt
from hiertrack.pipeline import (
    ReplayProposalSource,
    ReplayTrackSource,
    Toggles,
    effective_config,
    run_replay,
    run_scene,
)
from hiertrack.points import PointSet, TrackBundle
from hiertrack.synth import (
    ObjectSpec,
    Scene,
    SceneEvent,
    Segment,
    generate_sequence,
    synth_proposals,
)
from hiertrack.memory import MemoryEntry


def tiny_scene(**kwargs) -> Scene:
    defaults = dict(
        name="tiny", width=64, height=48, frame_count=30,
        objects=(
            ObjectSpec("tgt", "target", "rectangle", 9, (14, 22),
                       (Segment("cv", 30, (1.0, 0.2)),), appearance=0.2,
                       drift=0.001),
            ObjectSpec("dis", "distractor", "rectangle", 8, (48, 12),
                       (Segment("cv", 30, (-0.4, 0.3)),)),
        ),
        seed=11,
    )
    defaults.update(kwargs)
    return Scene(**defaults)


def test_effective_config_applies_toggles():
    cfg = Config(alpha=0.25, beta=0.25)
    off = effective_config(cfg, Toggles.all_off())
    assert off.alpha == 0.0 and off.beta == 0.0
    assert effective_config(cfg, Toggles()) is cfg


def test_run_scene_is_deterministic():
    scene = tiny_scene()
    cfg = Config()
    a = run_scene(scene, cfg, Toggles())
    b = run_scene(scene, cfg, Toggles())
    ra = [ic.decision_record(d) for d in a.decisions]
    rb = [ic.decision_record(d) for d in b.decisions]
    assert ra == rb


def test_run_scene_covers_all_frames_and_builds_sequence():
    scene = tiny_scene()
    r = run_scene(scene, Config(), Toggles())
    assert [d.frame_index for d in r.decisions] == list(range(1, 30))
    assert len(r.sequence) == 29
    assert r.latencies.shape == (29,)


def test_kf_toggle_removes_motion():
    scene = tiny_scene()
    r = run_scene(scene, Config(), Toggles(kf=False, pt=False, sm=True, lm=True))
    assert all(not d.has_motion for d in r.decisions)
    assert all(b.s_coarse == 0.0 for d in r.decisions for b in d.breakdowns)


def test_pt_toggle_disables_escalation():
    scene = tiny_scene(events=(SceneEvent("occlusion", 10, 18),))
    r = run_scene(scene, Config(), Toggles(pt=False))
    assert all(not d.fine_used for d in r.decisions)


def test_history_skips_invisible_frames():
    scene = tiny_scene(frame_count=40, objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (18, 22),
                   (Segment("cv", 40, (0.4, 0.1)),), appearance=0.2,
                   drift=0.001),
    ), events=(SceneEvent("occlusion", 10, 20),))
    cfg = Config(pt_frames=4)
    from hiertrack.pipeline import _Tracker

    truths = generate_sequence(scene)
    tracker = _Tracker(cfg, Toggles(), 0, truths[0].target_mask)
    from hiertrack.synth import SynthProposalSource, OracleTrackSource

    source = SynthProposalSource(scene, truths)
    oracle = OracleTrackSource(scene, truths, cfg.track_noise)
    for t in range(1, 25):
        tracker.advance(t, source.proposals(t, tracker.conditioning()), oracle)
    frames = [f for f, _ in tracker.history]
    assert all(not 10 <= f <= 20 for f in frames)  # occluded frames skipped
    assert frames == sorted(frames)


def test_prompt_must_be_visible():
    scene = tiny_scene(events=(SceneEvent("occlusion", 0, 3),))
    with pytest.raises(MissingPrompt):
        run_scene(scene, Config(), Toggles())


# --- replay mode ----------------------------------------------------------


def build_replay_inputs(scene):
    truths = generate_sequence(scene)
    prompt = MemoryEntry(frame_index=0, mask=truths[0].target_mask,
                         s_conf=1.0, s_iou=1.0)
    per_frame = {
        t: list(synth_proposals(scene, t, [prompt], scene.seed, truths=truths))
        for t in range(1, scene.frame_count)
    }
    return truths, per_frame


def test_replay_matches_decision_count_and_is_deterministic():
    scene = tiny_scene()
    truths, per_frame = build_replay_inputs(scene)
    source = ReplayProposalSource(per_frame)
    cfg = Config()
    a = run_replay(0, truths[0].target_mask, source, cfg, Toggles(pt=False))
    b = run_replay(0, truths[0].target_mask, source, cfg, Toggles(pt=False))
    assert [ic.decision_record(d) for d in a.decisions] == \
        [ic.decision_record(d) for d in b.decisions]
    assert len(a.decisions) == scene.frame_count - 1


def test_replay_without_tracks_degrades_gracefully():
    scene = tiny_scene(events=(SceneEvent("occlusion", 8, 16),))
    truths, per_frame = build_replay_inputs(scene)
    source = ReplayProposalSource(per_frame)
    cfg = Config(tau=0.95)  # force escalation attempts
    empty_tracks = ReplayTrackSource({})
    r = run_replay(0, truths[0].target_mask, source, cfg, Toggles(), empty_tracks)
    assert r.fine_failed_count > 0
    assert all(not d.fine_used for d in r.decisions)
    assert len(r.decisions) == scene.frame_count - 1  # run completed


def test_replay_track_source_reorders_columns():
    xy = np.arange(12, dtype=float).reshape(2, 3, 2)
    vis = np.ones((2, 3), dtype=bool)
    bundle = TrackBundle(origin_frame=5, frames=(4, 3, 2), xy=xy, visible=vis)
    source = ReplayTrackSource({(5, 0): bundle})
    got = source.propagate(5, PointSet(np.zeros((2, 2)), 5), [3, 2], slot=0)
    assert got.frames == (3, 2)
    assert np.array_equal(got.xy, xy[:, [1, 2]])


def test_replay_missing_prompt_frame_proposals():
    source = ReplayProposalSource({})
    with pytest.raises(MissingPrompt):
        source.proposals(3, [])


def test_full_stack_beats_baseline_after_reappearance():
    from hiertrack.pipeline import post_event_ious
    from hiertrack.synth import load_scene

    scene = load_scene("occlusion_reappear")
    truths = generate_sequence(scene)
    reappear = max(e.end for e in scene.events) + 1
    cfg = Config()
    full = run_scene(scene, cfg, Toggles())
    base = run_scene(scene, cfg, Toggles.all_off())
    assert post_event_ious(full, truths, reappear).mean() > \
        post_event_ious(base, truths, reappear).mean()
