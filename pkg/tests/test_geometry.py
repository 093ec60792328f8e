import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reverbaug.errors import GeometryError, InfeasibleAbsorptionError, PlacementError
from reverbaug.geometry import (HEIGHT_RANGE, MARGIN, MIN_SEPARATION, Room, Scenario, SimParams,
                                load_room, min_rt60, read_scenarios, sample_scenarios,
                                save_room, scenario_seed, surface_and_volume,
                                validate_placement, write_scenarios)


def tetrahedron(edge=1.0):
    k = edge / (2.0 * math.sqrt(2.0))
    v = [(k, k, k), (k, -k, -k), (-k, k, -k), (-k, -k, k)]
    return [(v[0], v[1], v[2]), (v[0], v[3], v[1]), (v[0], v[2], v[3]), (v[1], v[3], v[2])]


def test_shoebox_surface_volume():
    assert surface_and_volume(Room.shoebox(5, 4, 3)) == (94.0, 60.0)
    assert surface_and_volume(Room.shoebox(1, 1, 1)) == (6.0, 1.0)


def test_tetrahedron_surface_volume():
    faces = tetrahedron()
    # independent check that the construction really has unit edges
    pts = np.unique(np.array([p for f in faces for p in f]), axis=0)
    d = [np.linalg.norm(p - q) for i, p in enumerate(pts) for q in pts[i + 1:]]
    np.testing.assert_allclose(d, 1.0, rtol=1e-12)
    S, V = surface_and_volume(Room.polyhedron(faces))
    assert S == pytest.approx(math.sqrt(3), rel=1e-12)
    assert V == pytest.approx(1 / (6 * math.sqrt(2)), rel=1e-12)


def test_shoebox_as_polyhedron_matches_closed_form():
    box = Room.shoebox(5.5, 4.25, 3.1)
    poly = box.as_polyhedron()
    S0, V0 = surface_and_volume(box)
    S1, V1 = surface_and_volume(poly)
    assert S1 == pytest.approx(S0, rel=1e-12)
    assert V1 == pytest.approx(V0, rel=1e-12)
    np.testing.assert_allclose(poly.normals, box.normals, atol=1e-12)


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.1, 50))
def test_shoebox_closed_form_property(L, W, H):
    S, V = surface_and_volume(Room.shoebox(L, W, H))
    assert S == pytest.approx(2 * (L * W + L * H + W * H), rel=1e-12)
    assert V == pytest.approx(L * W * H, rel=1e-12)


@pytest.mark.parametrize("dims", [(0, 1, 1), (1, -2, 1), (1, 1, float("nan"))])
def test_shoebox_rejects_bad_dims(dims):
    with pytest.raises(GeometryError):
        Room.shoebox(*dims)


def test_absorption_bounds():
    with pytest.raises(GeometryError):
        Room.shoebox(3, 3, 3, absorption=1.2)
    with pytest.raises(GeometryError):
        Room.shoebox(3, 3, 3, absorption=(0.1, -0.1))
    with pytest.raises(GeometryError):
        Room.shoebox(3, 3, 3, surface_absorption=(0.1,) * 5)


def test_polyhedron_not_watertight():
    faces = tetrahedron()[:3]
    with pytest.raises(GeometryError, match="watertight"):
        Room.polyhedron(faces)


def test_polyhedron_not_convex():
    # unit cube whose top is four triangles meeting at a centre point pushed inwards
    c = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
         (0.5, 0.5, 0.8)]
    f = [(0, 3, 2, 1), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7),
         (4, 5, 8), (5, 6, 8), (6, 7, 8), (7, 4, 8)]
    with pytest.raises(GeometryError, match="convex"):
        Room.polyhedron([tuple(c[i] for i in face) for face in f])
    # the same tent pushed outwards is convex
    c[8] = (0.5, 0.5, 1.2)
    Room.polyhedron([tuple(c[i] for i in face) for face in f])


def test_polyhedron_non_planar_face():
    c = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1.2), (0, 1, 1)]
    f = [(0, 3, 2, 1), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7), (4, 5, 6, 7)]
    with pytest.raises(GeometryError, match="planar"):
        Room.polyhedron([tuple(c[i] for i in face) for face in f])


def test_validate_placement_examples():
    room = Room.shoebox(5, 4, 3)
    ok, why = validate_placement(room, (1, 1, 1), (2, 2, 1.5))
    assert ok and why == []
    ok, why = validate_placement(room, (1, 1, 1), (1, 1, 1.3))
    assert not ok and len(why) == 1 and "separation" in why[0]
    ok, why = validate_placement(room, (0, 2, 1), (3, 2, 1))
    assert not ok and "source" in why[0]


def test_sampler_full_scale_count():
    sc = sample_scenarios(50, 20, (3, 20), (0.1, 1.0), seed=3)
    assert len(sc) == 1000
    assert len({s.scenario_id for s in sc}) == 1000


def test_sampler_degenerate_ranges():
    (s,) = sample_scenarios(1, 1, (10, 10), (0.5, 0.5), seed=99)
    assert s.room.dims == (10.0, 10.0, 10.0)
    assert s.rt60_target == 0.5


def test_sampler_deterministic():
    a = sample_scenarios(2, 3, (3, 20), (0.1, 1.0), seed=42)
    b = sample_scenarios(2, 3, (3, 20), (0.1, 1.0), seed=42)
    assert [x.to_dict() for x in a] == [y.to_dict() for y in b]
    c = sample_scenarios(2, 3, (3, 20), (0.1, 1.0), seed=43)
    assert [x.to_dict() for x in a] != [y.to_dict() for y in c]


def test_sampler_room_prefix_independent_of_count():
    # per-room streams: room 0 does not depend on how many rooms follow
    a = sample_scenarios(1, 4, seed=5)
    b = sample_scenarios(6, 4, seed=5)[:4]
    assert [x.to_dict() for x in a] == [y.to_dict() for y in b]


def test_sampler_invariants():
    sc = sample_scenarios(40, 5, (3, 20), (0.1, 1.0), seed=11)
    for room_sc in [sc[i:i + 5] for i in range(0, len(sc), 5)]:
        assert len({s.rt60_target for s in room_sc}) == 1
    for s in sc:
        assert all(3 <= d <= 20 for d in s.room.dims)
        assert 0.1 <= s.rt60_target <= 1.0
        assert s.rt60_target > min_rt60(s.room)
        ok, why = validate_placement(s.room, s.source_pos, s.receiver_pos)
        assert ok, why
        for p in (s.source_pos, s.receiver_pos):
            assert HEIGHT_RANGE[0] <= p[2] <= HEIGHT_RANGE[1]
        assert s.distance >= MIN_SEPARATION


def test_sampler_uniform_dimensions():
    sc = sample_scenarios(10_000, 1, (3, 20), (0.1, 1.0), seed=1)
    dims = np.array([s.room.dims for s in sc])
    np.testing.assert_allclose(dims.mean(axis=0), 11.5, rtol=0.02)


@pytest.mark.parametrize("kw", [dict(n_rooms=0, placements_per_room=1),
                                dict(n_rooms=1, placements_per_room=0),
                                dict(n_rooms=1, placements_per_room=1, dim_range=(5, 3)),
                                dict(n_rooms=1, placements_per_room=1, dim_range=(-1, 3)),
                                dict(n_rooms=1, placements_per_room=1, rt60_range=(0, 1))])
def test_sampler_bad_arguments(kw):
    with pytest.raises(ValueError):
        sample_scenarios(**kw)


def test_sampler_infeasible_rt60_names_minimum():
    with pytest.raises(InfeasibleAbsorptionError) as ei:
        sample_scenarios(1, 1, (3, 3), (0.01, 0.05), seed=0)
    # 3 m cube: 0.161 * 27 / 54
    assert ei.value.min_rt60 == pytest.approx(0.0805)
    assert "0.081" in str(ei.value)


def test_sampler_placement_failure_identifies_room():
    # a room lower than the 1 m height band cannot host a placement
    with pytest.raises(PlacementError) as ei:
        sample_scenarios(1, 1, (0.5, 0.5), (0.01, 0.02), seed=0)
    assert ei.value.room_index == 0


def test_scenario_seed_mixes_indices():
    seeds = {scenario_seed(7, i, p) for i in range(20) for p in range(20)}
    assert len(seeds) == 400
    assert scenario_seed(7, 1, 2) != scenario_seed(7, 2, 1)


def test_simparams():
    s = Scenario(Room.shoebox(5, 4, 3), (1, 1, 1), (2, 2, 1.5), 0.5, "x", 1)
    p = SimParams()
    assert p.length_for(s) == pytest.approx(0.6)
    assert p.n_samples(s) == 9600
    assert SimParams(rir_length=0.1).n_samples(s) == 1600
    short = Scenario(s.room, s.source_pos, s.receiver_pos, 0.1, "y", 1)
    assert p.length_for(short) == 0.25
    for bad in (dict(c=0), dict(sample_rate=-1), dict(rir_length=0)):
        with pytest.raises(ValueError):
            SimParams(**bad)


def test_room_and_scenario_roundtrip(tmp_path):
    room = Room.polyhedron(tetrahedron(3.0), surface_absorption=(0.1, 0.2, (0.3, 0.4), 0.5))
    save_room(room, tmp_path / "room.json")
    back = load_room(tmp_path / "room.json")
    assert back.to_dict() == room.to_dict()
    json.loads((tmp_path / "room.json").read_text())

    sc = sample_scenarios(2, 2, seed=4)
    write_scenarios(sc, tmp_path / "s.jsonl")
    assert [s.to_dict() for s in read_scenarios(tmp_path / "s.jsonl")] == [s.to_dict() for s in sc]


def test_absorption_matrix_shapes():
    room = Room.shoebox(4, 4, 3, absorption=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
                        surface_absorption=(None, 0.9, None, None, None, None))
    m = room.absorption_matrix(6)
    assert m.shape == (6, 6)
    np.testing.assert_allclose(m[1], 0.9)
    np.testing.assert_allclose(room.absorption_matrix(1)[0], 0.35)
    with pytest.raises(GeometryError):
        room.absorption_matrix(3)
    with pytest.raises(GeometryError):
        Room.shoebox(3, 3, 3).absorption_matrix()


def test_contains_margin():
    room = Room.shoebox(5, 4, 3)
    assert room.contains((MARGIN, 1, 1), MARGIN)
    assert not room.contains((MARGIN / 2, 1, 1), MARGIN)
    assert not room.contains((6, 1, 1))
