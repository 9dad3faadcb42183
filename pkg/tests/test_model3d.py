import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ductscan.model3d import (
    ModelError,
    ParamSpec,
    Scene3D,
    assemble_scene,
    extrude,
    generate_mesh,
    mesh_problems,
    to_param_spec,
)
from ductscan.objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject, Port

import oracles
from cases import KINDS, oracle_volume, random_case


def _duct(i, center, axis, length, w=400.0, h=250.0, conn=()):
    return HvacObject(i, DUCT, center, axis=axis, length_mm=length, width_mm=w, height_mm=h, connections=conn)


def _fitting(i, kind, centre, dirs, leg, w=400.0, h=250.0, conn=None):
    cx, cy = centre
    ports = tuple(Port((cx + leg * dx, cy + leg * dy), (dx, dy)) for dx, dy in dirs)
    return HvacObject(i, kind, centre, width_mm=w, height_mm=h, connections=conn or tuple(range(len(dirs))), ports=ports)


def test_duct_spec_ports():
    spec = to_param_spec(_duct(0, (1000, 2000), (1.0, 0.0), 3000), z_mm=2800)
    assert spec.center == (1000, -2000, 2800)
    (p0, d0), (p1, d1) = spec.ports
    assert p0 == pytest.approx((-500, -2000, 2800)) and p1 == pytest.approx((2500, -2000, 2800))
    assert d0 == pytest.approx((-1, 0, 0)) and d1 == pytest.approx((1, 0, 0))


def test_elbow_spec_ports_are_perpendicular():
    elbow = _fitting(1, ELBOW, (0, 0), [(1, 0), (0, -1)], 500)
    spec = to_param_spec(elbow)
    (_, d0), (_, d1) = spec.ports
    assert np.dot(d0, d1) == pytest.approx(0)
    # drawing y runs down the page, model y runs north
    assert d1 == pytest.approx((0, 1, 0))
    assert spec.center[:2] == pytest.approx((0, 0))


def test_zero_width_or_missing_dims_are_errors():
    with pytest.raises(ValueError):
        _duct(0, (0, 0), (1, 0), 1000, w=0.0)
    with pytest.raises(ModelError, match="object 3"):
        to_param_spec(HvacObject(3, DUCT, (0, 0), axis=(1, 0), length_mm=100.0, width_mm=100.0))
    with pytest.raises(ModelError):
        ParamSpec(0, DUCT, 0.0, 10.0, 10.0, (0, 0, 0), 0.0, (((0, 0, 0), (1, 0, 0)),) * 2)
    with pytest.raises(ModelError):
        ParamSpec(0, TEE, 10.0, 10.0, None, (0, 0, 0), 0.0, (((0, 0, 0), (1, 0, 0)),) * 2)


def test_duct_box_mesh():
    spec = to_param_spec(_duct(0, (0, 0), (1.0, 0.0), 3000))
    mesh = generate_mesh(spec)
    assert mesh.vertices.shape == (8, 3) and mesh.triangles.shape == (12, 3)
    assert mesh_problems(mesh) == []
    assert mesh.volume() == pytest.approx(400 * 250 * 3000)
    assert oracles.signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(400 * 250 * 3000)


def _voxel_check(obj, legs_deg):
    spec = to_param_spec(obj, z_mm=0.0)
    mesh = generate_mesh(spec)
    assert mesh_problems(mesh) == []
    desc = {"legs": [(math.radians(a) % (2 * math.pi), L) for a, L in legs_deg]}
    expected = oracle_volume(spec, desc)
    assert mesh.volume() == pytest.approx(expected, rel=0.01)
    assert oracles.signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(mesh.volume())
    return mesh


def test_right_angle_elbow_matches_voxel_oracle():
    # legs +x and +y (model frame); drawing y is flipped
    elbow = _fitting(0, ELBOW, (0, 0), [(1, 0), (0, -1)], 500)
    mesh = _voxel_check(elbow, [(0, 500), (90, 500)])
    # plain L: 700 x 400 along x plus 400 x 300 along y
    assert mesh.volume() == pytest.approx((700 * 400 + 400 * 300) * 250)


def test_tee_matches_voxel_oracle():
    # run 2000 mm through the junction, branch 800 mm
    tee = _fitting(0, TEE, (0, 0), [(1, 0), (-1, 0), (0, -1)], 1000)
    ports = list(tee.ports)
    ports[2] = Port((0, -800), (0, -1))
    tee = tee.evolve(ports=tuple(ports))
    mesh = _voxel_check(tee, [(0, 1000), (180, 1000), (90, 800)])
    assert mesh.volume() == pytest.approx((2000 * 400 + 600 * 400) * 250)


def test_cross_matches_voxel_oracle():
    cross = _fitting(0, CROSS, (0, 0), [(1, 0), (-1, 0), (0, 1), (0, -1)], 900)
    mesh = _voxel_check(cross, [(0, 900), (180, 900), (270, 900), (90, 900)])
    assert mesh.volume() == pytest.approx((1800 * 400 + 2 * 700 * 400) * 250)


@pytest.mark.parametrize("kind", KINDS)
def test_random_specs_are_valid_and_match_oracle(kind):
    rng = np.random.default_rng([17, KINDS.index(kind)])
    for _ in range(25):
        spec, desc = random_case(kind, rng)
        mesh = generate_mesh(spec)
        assert mesh_problems(mesh) == [], (spec, mesh_problems(mesh))
        assert mesh.volume() == pytest.approx(oracle_volume(spec, desc), rel=0.01)


@pytest.mark.parametrize("segments", [2, 4, 8])
def test_rounded_elbows_stay_watertight_and_shrink(segments):
    elbow = _fitting(0, ELBOW, (0, 0), [(1, 0), (0, -1)], 600)
    sharp = generate_mesh(to_param_spec(elbow))
    round_ = generate_mesh(to_param_spec(elbow, segments=segments))
    assert mesh_problems(round_) == []
    assert round_.volume() < sharp.volume()
    # never cuts into the quarter disc around the junction
    assert round_.volume() >= (2 * 600 * 400 - 200 * 200 + math.pi * 200**2 / 4) * 250 * 0.999


def test_too_short_legs_raise():
    elbow = _fitting(0, ELBOW, (0, 0), [(1, 0), (0, -1)], 150)
    with pytest.raises(ModelError):
        generate_mesh(to_param_spec(elbow))


def test_extrude_reversed_polygon_is_reoriented():
    square = np.array([[0, 0], [0, 10], [10, 10], [10, 0]], dtype=float)
    mesh = extrude(square, 0.0, 5.0)
    assert mesh_problems(mesh) == []
    assert mesh.volume() == pytest.approx(500)


def test_mesh_problem_detection():
    mesh = extrude(np.array([[0, 0], [10, 0], [10, 10], [0, 10]], dtype=float), 0.0, 1.0)
    flipped = type(mesh)(mesh.vertices, mesh.triangles[:, ::-1].copy())
    assert any("inward" in p for p in mesh_problems(flipped))
    holed = type(mesh)(mesh.vertices, mesh.triangles[1:].copy())
    assert any("watertight" in p for p in mesh_problems(holed))


def _l_layout(gap=0.0):
    # duct 0 along +x, duct 1 down the page, elbow corner at (1000, 0) with 300 mm legs
    d0 = _duct(0, ((700 - gap) / 2, 0), (1.0, 0.0), 700 - gap, conn=(2,))
    d1 = _duct(1, (1000, (1300 + gap) / 2), (0.0, 1.0), 700 - gap, conn=(2,))
    elbow = HvacObject(
        2, ELBOW, (850, 150), width_mm=400.0, height_mm=250.0, connections=(0, 1),
        ports=(Port((700, 0), (-1, 0)), Port((1000, 300), (0, 1))),
    )
    return [d0, d1, elbow]


def _port_pairs(scene):
    meta = {m["id"]: m for m in scene.metadata}
    pairs = []
    for m in scene.metadata:
        if m["kind"] in (ELBOW, TEE, CROSS):
            for duct_id, port in zip(m["connections"], m["ports"]):
                ends = [p["position"] for p in meta[duct_id]["ports"]]
                pairs.append(min(math.dist(e, port["position"]) for e in ends))
    return pairs


def test_l_layout_ports_coincide():
    scene = assemble_scene(_l_layout(gap=30.0))
    assert len(scene.meshes) == 3
    assert all(d <= 1.0 for d in _port_pairs(scene))
    assert scene.warnings == []
    assert all(mesh_problems(m) == [] for m in scene.meshes)


def test_far_ports_warn_and_stay_put():
    objs = _l_layout()
    objs[0] = objs[0].evolve(center_mm=(250, 0), length_mm=500)  # ends 200 mm short
    scene = assemble_scene(objs, snap_limit_mm=50)
    assert len(scene.warnings) == 1 and "duct 0" in scene.warnings[0]
    assert scene.metadata[0]["length_mm"] == pytest.approx(500)


def test_single_and_empty_scenes():
    scene = assemble_scene([_duct(0, (0, 0), (1, 0), 1000)])
    assert len(scene.meshes) == 1 and len(scene.meshes[0].vertices) == 8
    empty = assemble_scene([])
    assert empty.meshes == [] and empty.metadata == []
    assert empty.to_obj().count("\nv ") == 0


def test_other_objects_are_boxes():
    other = HvacObject(5, OTHER, (100, 100), length_mm=160.0, width_mm=160.0,
                       outline_mm=((20, 20), (180, 20), (180, 180), (20, 180)))
    scene = assemble_scene([other], other_height_mm=300)
    assert scene.meshes[0].volume() == pytest.approx(160 * 160 * 300)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_scene_is_translation_equivariant(dx, dy):
    base = assemble_scene(_l_layout(gap=20.0))

    def shift(o):
        ports = tuple(Port((p.position[0] + dx, p.position[1] + dy), p.direction) for p in o.ports)
        return o.evolve(center_mm=(o.center_mm[0] + dx, o.center_mm[1] + dy), ports=ports)

    moved = assemble_scene([shift(o) for o in _l_layout(gap=20.0)])
    for a, b in zip(base.meshes, moved.meshes):
        # drawing y is model -y
        assert np.allclose(b.vertices, a.vertices + np.array([dx, -dy, 0.0]), atol=1e-6)
        assert np.array_equal(a.triangles, b.triangles)


def test_obj_export_groups_and_indices():
    scene = assemble_scene(_l_layout())
    text = scene.to_obj()
    groups = [line.split()[1] for line in text.splitlines() if line.startswith("g ")]
    assert groups == ["duct_0", "duct_1", "elbow_2"]
    n_v = sum(1 for line in text.splitlines() if line.startswith("v "))
    faces = [list(map(int, line.split()[1:])) for line in text.splitlines() if line.startswith("f ")]
    assert n_v == sum(len(m.vertices) for m in scene.meshes)
    assert min(min(f) for f in faces) == 1 and max(max(f) for f in faces) == n_v
    doc = scene.to_dict("scene.obj")
    assert [o["mesh"]["group"] for o in doc["objects"]] == groups
    assert isinstance(scene, Scene3D)
