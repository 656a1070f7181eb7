import math

import pytest

import anchorvote as av


def test_box_and_iou():
    a = av.Box3D((0.0, 0.0, 0.0), (2.0, 2.0, 2.0), 0.0)
    b = av.Box3D((1.0, 0.0, 0.0), (2.0, 2.0, 2.0), 0.0)
    assert av.iou_3d(a, a) == pytest.approx(1.0)
    assert av.iou_3d(a, b) == pytest.approx(1.0 / 3.0)
    assert abs(av.iou_3d_oracle(a, b, 200000, 1) - 1.0 / 3.0) < 0.01
    assert av.contains(a, (0.5, 0.5, 0.5))
    assert len(a.corners()) == 8


def test_invalid_box_raises():
    with pytest.raises(av.InvalidArgumentError):
        av.Box3D((0.0, 0.0, 0.0), (0.0, 1.0, 1.0))


def test_scene_and_proposals():
    scene = av.generate_scene(42)
    assert len(scene.truth) == 3
    assert scene.n_points > 0
    assert av.occupancy(scene) > 0
    dets = av.propose(scene)
    assert [d.score for d in dets] == [d.score for d in av.propose(scene)]
    assert len(av.propose(scene, mode="upm")) > len(dets)
    assert av.propose(scene, delta=math.nextafter(1.0, 2.0)) == []
    csv = av.evaluate_csv(dets, scene.truth)
    assert csv.splitlines()[0] == "metric,iou,difficulty,ap"
    assert "<svg" in av.bev_svg(scene, dets)


def test_nms_keeps_best():
    p, q = av.Proposal(), av.Proposal()
    p.box = av.Box3D((0.0, 0.0, 0.0), (4.0, 2.0, 1.5))
    q.box = av.Box3D((0.2, 0.0, 0.0), (4.0, 2.0, 1.5))
    p.score, q.score = 0.4, 0.9
    assert av.nms([p, q], 0.5) == [1]


def test_average_precision_hand_case():
    dets = [(0.9, True), (0.8, False), (0.7, True), (0.6, True)]
    assert av.average_precision(dets, 4, 11) == pytest.approx(6.75 / 11)
    assert av.average_precision(dets, 4, 40) == pytest.approx(25 / 40)
    with pytest.raises(av.UndefinedApError):
        av.average_precision(dets, 0)


def test_viewpoint_round_trip():
    for yaw in (0.0, 1.0, 3.0, 6.2):
        b, r = av.viewpoint_encode(yaw)
        assert 0 <= b < 16
        assert av.viewpoint_decode(b, r) == pytest.approx(yaw, abs=1e-12)


def test_distill_demo_short():
    losses, final = av.distill_demo(steps=5, lr=1e-3)
    assert len(losses) == 5
    assert final < losses[0]
    flat, final_flat = av.distill_demo(steps=3, lr=0.0)
    assert flat[0] == flat[-1] == final_flat


def test_config_keys():
    kv = av.parse_config_keys("a = 1\n# c\nb = x\n")
    assert kv == {"a": "1", "b": "x"}
    with pytest.raises(av.InvalidArgumentError):
        av.parse_config_keys("a = 1\na = 2\n")
