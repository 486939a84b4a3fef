import numpy as np
import pytest

from hiertrack.errors import InvalidScene, TrackSourceFailure
from hiertrack.geometry import iou_mask
from hiertrack.memory import MemoryEntry
from hiertrack.points import PointSet
from hiertrack.synth import (
    SCENE_LIBRARY,
    ObjectSpec,
    OracleTrackSource,
    Scene,
    SceneEvent,
    Segment,
    generate_sequence,
    load_scene,
    memory_affinity,
    scene_from_mapping,
    scene_to_mapping,
    synth_proposals,
)


def make_scene(**kwargs) -> Scene:
    defaults = dict(
        name="test", width=64, height=48, frame_count=20,
        objects=(
            ObjectSpec(obj_id="tgt", role="target", shape="rectangle", size=9,
                       start=(16, 24), segments=(Segment("cv", 20, (2.0, 0.0)),),
                       appearance=0.2, drift=0.0),
        ),
        seed=3,
    )
    defaults.update(kwargs)
    return Scene(**defaults)


def prompt_entry(truths) -> MemoryEntry:
    return MemoryEntry(frame_index=0, mask=truths[0].target_mask,
                       s_conf=1.0, s_iou=1.0)


# --- scene validation -------------------------------------------------------


def test_scene_requires_frames():
    with pytest.raises(InvalidScene):
        make_scene(frame_count=0)


def test_scene_requires_exactly_one_target():
    with pytest.raises(InvalidScene):
        make_scene(objects=())
    two = (
        ObjectSpec("a", "target", "rectangle", 9, (10, 10),
                   (Segment("cv", 5, (0, 0)),)),
        ObjectSpec("b", "target", "rectangle", 9, (20, 20),
                   (Segment("cv", 5, (0, 0)),)),
    )
    with pytest.raises(InvalidScene):
        make_scene(objects=two)


def test_scene_noise_bound_enforced():
    with pytest.raises(InvalidScene):
        make_scene(s_iou_noise=0.15)


# --- ground truth -------------------------------------------------------------


def test_static_scene_identical_masks():
    scene = make_scene(objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (20, 20),
                   (Segment("cv", 10, (0.0, 0.0)),)),
    ), frame_count=10)
    truths = generate_sequence(scene)
    assert all(t.target_mask.runs == truths[0].target_mask.runs for t in truths)


def test_constant_velocity_advances_box_center():
    truths = generate_sequence(make_scene())
    centers = [t.target_box.cx for t in truths]
    diffs = np.diff(centers)
    assert np.allclose(diffs, 2.0)


def test_occlusion_window_controls_visibility():
    scene = make_scene(frame_count=50, objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (24, 24),
                   (Segment("cv", 50, (0.2, 0.0)),)),
    ), events=(SceneEvent("occlusion", 30, 40),))
    truths = generate_sequence(scene)
    for t in truths:
        if 30 <= t.frame_index <= 40:
            assert not t.visible and t.target_mask.is_empty
        else:
            assert t.visible


def test_trajectory_kinds_run_and_stay_deterministic():
    scene = make_scene(objects=(
        ObjectSpec("tgt", "target", "ellipse", 11, (20, 24),
                   (Segment("cv", 5, (1.0, 0.0)),
                    Segment("arc", 8, (8.0, 0.3, 0.0)),
                    Segment("sine", 10, (1.0, 0.0, 3.0, 6.0, 0.5)))),
    ), frame_count=23)
    a = generate_sequence(scene)
    b = generate_sequence(scene)
    for ta, tb in zip(a, b):
        assert ta.target_mask.runs == tb.target_mask.runs
        assert ta.target_center == tb.target_center


# --- memory affinity ----------------------------------------------------------


def test_affinity_monotone_under_added_entries():
    scene = make_scene(objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (16, 24),
                   (Segment("cv", 20, (2.0, 0.0)),), appearance=0.1, drift=0.02),
    ))
    truths = generate_sequence(scene)
    p = prompt_entry(truths)
    extra = MemoryEntry(frame_index=10, mask=truths[10].target_mask,
                        s_conf=1.0, s_iou=1.0)
    code = truths[15].appearance
    base = memory_affinity([p], code, truths)
    more = memory_affinity([p, extra], code, truths)
    assert 0.0 < base <= more <= 1.0


def test_affinity_ignores_empty_and_offtarget_masks():
    scene = make_scene(frame_count=30, events=(SceneEvent("occlusion", 5, 6),))
    truths = generate_sequence(scene)
    p = prompt_entry(truths)
    empty_entry = MemoryEntry(frame_index=5, mask=truths[5].target_mask,
                              s_conf=1.0, s_iou=1.0)  # empty mask
    code = truths[10].appearance
    assert memory_affinity([p, empty_entry], code, truths) == \
        memory_affinity([p], code, truths)


# --- proposals ------------------------------------------------------------


def test_full_affinity_zero_noise_gives_exact_target():
    scene = make_scene(s_iou_noise=0.0)
    truths = generate_sequence(scene)
    # entry at the queried frame itself: affinity is exactly 1
    here = MemoryEntry(frame_index=7, mask=truths[7].target_mask,
                       s_conf=1.0, s_iou=1.0)
    a, b, c = synth_proposals(scene, 7, [here], scene.seed, truths=truths)
    assert a.mask.runs == truths[7].target_mask.runs
    assert a.s_iou == 1.0


def test_occluded_frame_gives_empty_first_proposal():
    scene = make_scene(frame_count=30, events=(SceneEvent("occlusion", 10, 12),))
    truths = generate_sequence(scene)
    a, b, c = synth_proposals(scene, 11, [prompt_entry(truths)], scene.seed,
                              truths=truths)
    assert a.mask.is_empty and c.mask.is_empty


def test_nearest_distractor_is_second_proposal():
    scene = make_scene(objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (16, 24),
                   (Segment("cv", 20, (0.0, 0.0)),)),
        ObjectSpec("near", "distractor", "rectangle", 7, (30, 24),
                   (Segment("cv", 20, (0.0, 0.0)),)),
        ObjectSpec("far", "distractor", "rectangle", 7, (54, 40),
                   (Segment("cv", 20, (0.0, 0.0)),)),
    ))
    truths = generate_sequence(scene)
    _, b, _ = synth_proposals(scene, 5, [prompt_entry(truths)], scene.seed,
                              truths=truths)
    near_mask = truths[5].distractors[0][1]
    assert b.mask.runs == near_mask.runs


def test_s_iou_noise_respects_world_bound():
    for name in ("occlusion_reappear", "drift_longterm"):
        scene = load_scene(name)
        truths = generate_sequence(scene)
        p = prompt_entry(truths)
        for frame in range(1, scene.frame_count, 7):
            proposals = synth_proposals(scene, frame, [p], scene.seed,
                                        truths=truths)
            for i, prop in enumerate(proposals):
                true_iou = iou_mask(prop.mask, truths[frame].target_mask)
                bound = scene.s_iou_noise
                if i == 1 and not truths[frame].visible:
                    bound *= 2.0
                assert abs(prop.s_iou - true_iou) <= bound + 1e-12


def test_better_conditioning_shrinks_perturbation_scale():
    scene = make_scene(frame_count=60, objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (16, 24),
                   (Segment("cv", 60, (0.5, 0.0)),), appearance=0.1,
                   drift=0.01),
    ))
    truths = generate_sequence(scene)
    p = prompt_entry(truths)
    near = MemoryEntry(frame_index=48, mask=truths[48].target_mask,
                       s_conf=1.0, s_iou=1.0)
    code = truths[50].appearance
    assert abs(code - truths[0].appearance) > 0.4  # genuine drift
    scale_prompt_only = 1.0 - memory_affinity([p], code, truths)
    scale_with_near = 1.0 - memory_affinity([p, near], code, truths)
    assert scale_with_near < scale_prompt_only


def test_proposals_deterministic():
    scene = make_scene()
    truths = generate_sequence(scene)
    p = prompt_entry(truths)
    a1 = synth_proposals(scene, 9, [p], scene.seed, truths=truths)
    a2 = synth_proposals(scene, 9, [p], scene.seed, truths=truths)
    for x, y in zip(a1, a2):
        assert x.mask.runs == y.mask.runs
        assert x.s_iou == y.s_iou and x.objectness == y.objectness


# --- oracle tracks -------------------------------------------------------------


def test_oracle_static_zero_noise_constant_tracks():
    scene = make_scene(objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (20, 20),
                   (Segment("cv", 20, (0.0, 0.0)),)),
    ))
    truths = generate_sequence(scene)
    source = OracleTrackSource(scene, truths, track_noise=0.0)
    pts = PointSet(points=np.array([[20.0, 20.0], [18.0, 22.0]]), frame_index=10)
    bundle = source.propagate(10, pts, [9, 8, 7])
    assert bundle.visible.all()
    for j in range(3):
        assert np.allclose(bundle.xy[:, j], pts.points)


def test_oracle_backward_mapping_matches_rigid_motion():
    scene = make_scene()  # cv (2, 0)
    truths = generate_sequence(scene)
    source = OracleTrackSource(scene, truths, track_noise=0.0)
    pts = PointSet(points=np.array([[32.0, 24.0]]), frame_index=8)
    bundle = source.propagate(8, pts, [7, 5, 2])
    for j, f in enumerate([7, 5, 2]):
        expected = np.array([32.0 - 2.0 * (8 - f), 24.0])
        assert np.allclose(bundle.xy[0, j], expected, atol=1e-9)


def test_oracle_occlusion_window_hides_points():
    scene = make_scene(frame_count=40, objects=(
        ObjectSpec("tgt", "target", "rectangle", 9, (20, 24),
                   (Segment("cv", 40, (0.0, 0.0)),)),
    ), events=(SceneEvent("occlusion", 10, 14),))
    truths = generate_sequence(scene)
    source = OracleTrackSource(scene, truths, track_noise=0.0)
    pts = PointSet(points=np.array([[20.0, 24.0]]), frame_index=20)
    frames = [18, 14, 12, 10, 8]
    bundle = source.propagate(20, pts, frames)
    assert bundle.visible[0].tolist() == [True, False, False, False, True]


def test_oracle_off_target_point_invisible_everywhere():
    scene = make_scene()
    truths = generate_sequence(scene)
    source = OracleTrackSource(scene, truths, track_noise=0.0)
    pts = PointSet(points=np.array([[60.0, 40.0]]), frame_index=10)  # background
    bundle = source.propagate(10, pts, [9, 8])
    assert not bundle.visible.any()


def test_oracle_capability_limit():
    scene = make_scene(frame_count=90)
    truths = generate_sequence(scene)
    source = OracleTrackSource(scene, truths, track_noise=0.0)
    source.max_frames = 4
    pts = PointSet(points=np.array([[16.0, 24.0]]), frame_index=80)
    with pytest.raises(TrackSourceFailure):
        source.propagate(80, pts, list(range(79, 70, -1)))


# --- scene files ----------------------------------------------------------


def test_library_scenes_load_and_validate():
    for name in SCENE_LIBRARY:
        scene = load_scene(name)
        truths = generate_sequence(scene)
        assert truths[0].visible, f"{name} must have a visible prompt frame"


def test_scene_mapping_round_trip():
    scene = load_scene("drift_longterm")
    again = scene_from_mapping(scene_to_mapping(scene))
    assert again == scene


def test_unknown_scene_rejected():
    with pytest.raises(InvalidScene):
        load_scene("not_a_scene")
