import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zcollide.geometry import (
    Aabb,
    DegenerateTriangleError,
    Mesh,
    ObjParseError,
    RigidTransform,
    apply_transform,
    dump_obj,
    face_normals,
    load_obj,
    merge_meshes,
    triangle_normal,
)
from zcollide.shapes import box, convex_hull, icosphere

coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord, coord).map(np.array)


def rotations():
    axis = st.tuples(coord, coord, coord).filter(lambda a: np.linalg.norm(a) > 1e-3)
    return st.builds(lambda a, ang, t: RigidTransform.from_axis_angle(a, ang, t),
                     axis, st.floats(-7, 7), st.tuples(coord, coord, coord))


class TestLoadObj:
    def test_minimal(self):
        m = load_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        assert m.vertices.shape == (3, 3)
        assert m.triangles.tolist() == [[0, 1, 2]]

    def test_quad_fan(self):
        m = load_obj(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_out_of_range_index_cites_line(self):
        with pytest.raises(ObjParseError) as err:
            load_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
        assert err.value.lineno == 4
        assert "line 4" in str(err.value)

    def test_non_numeric_coordinate(self):
        with pytest.raises(ObjParseError) as err:
            load_obj(b"v 0 0 0\nv 1 zero 0\n")
        assert err.value.lineno == 2

    def test_negative_and_slashed_indices(self):
        m = load_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3/1/1 -2//2 -1\n")
        assert m.triangles.tolist() == [[0, 1, 2]]

    def test_lines_points_and_ignored_records(self):
        src = b"# c\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nl 1 2 3\np 1 3\nusemtl m\n"
        m = load_obj(src)
        assert m.lines.tolist() == [[0, 1], [1, 2]]
        assert m.points.tolist() == [0, 2]
        assert len(m.triangles) == 0

    def test_stream_and_path(self, tmp_path):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
        path = tmp_path / "t.obj"
        path.write_bytes(data)
        assert load_obj(io.BytesIO(data)).same_as(load_obj(path))
        assert load_obj(str(path), object_id=4).object_id == 4

    def test_round_trip(self):
        m = icosphere(1, 0.7, (0.1, 0.2, 0.3))
        again = load_obj(dump_obj(m).encode())
        assert again.same_as(m)
        assert np.array_equal(again.vertices, m.vertices)


class TestMesh:
    def test_index_range_checked(self):
        with pytest.raises(ValueError):
            Mesh(np.zeros((3, 3)), [[0, 1, 3]])

    def test_object_id_positive(self):
        with pytest.raises(ValueError):
            Mesh(np.zeros((3, 3)), [[0, 1, 2]], object_id=0)

    def test_arrays_read_only(self):
        m = box((0, 0, 0), (1, 1, 1))
        with pytest.raises(ValueError):
            m.vertices[0, 0] = 5.0

    def test_merge_offsets_indices(self):
        a, b = box((0, 0, 0), (1, 1, 1)), box((2, 0, 0), (3, 1, 1))
        m = merge_meshes([a, b])
        assert len(m.triangles) == 24
        assert np.array_equal(m.triangle_vertices[12:], b.triangle_vertices)

    def test_aabb(self):
        bb = box((0, -1, 2), (1, 3, 4)).aabb()
        assert bb.min.tolist() == [0, -1, 2] and bb.max.tolist() == [1, 3, 4]
        assert bb.overlaps(Aabb(np.array([1.0, 3, 4]), np.array([2.0, 5, 6])))
        assert not bb.overlaps(Aabb(np.array([1.5, 3, 4]), np.array([2.0, 5, 6])))


class TestTransform:
    def test_identity_bit_identical(self):
        m = icosphere(1)
        assert np.array_equal(apply_transform(m, RigidTransform.identity()).vertices, m.vertices)

    def test_translation(self):
        m = Mesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), [[0, 1, 2]], object_id=3)
        out = apply_transform(m, RigidTransform.from_translation((1, 0, 0)))
        assert out.vertices[0].tolist() == [1, 0, 0]
        assert out.object_id == 3 and np.array_equal(out.triangles, m.triangles)

    def test_rotation_about_z(self):
        t = RigidTransform.from_axis_angle((0, 0, 1), np.pi / 2)
        assert np.allclose(t.apply([1.0, 0, 0]), [0, 1, 0], atol=1e-12, rtol=0)

    def test_rejects_reflection_and_skew(self):
        with pytest.raises(ValueError):
            RigidTransform(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(ValueError):
            RigidTransform(np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))

    @given(rotations(), st.lists(point, min_size=1, max_size=10))
    def test_inverse_round_trip(self, t, pts):
        pts = np.array(pts)
        m = Mesh(pts)
        back = apply_transform(apply_transform(m, t), t.inverse())
        assert np.max(np.abs(back.vertices - pts)) <= 1e-9

    @given(rotations(), rotations(), point)
    def test_compose(self, a, b, p):
        assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-9, rtol=0)


class TestNormal:
    def test_examples(self):
        assert triangle_normal((0, 0, 0), (1, 0, 0), (0, 1, 0)).tolist() == [0, 0, 1]
        assert triangle_normal((0, 0, 0), (0, 1, 0), (1, 0, 0)).tolist() == [0, 0, -1]

    def test_collinear_is_degenerate(self):
        with pytest.raises(DegenerateTriangleError):
            triangle_normal((0, 0, 0), (1, 1, 1), (2, 2, 2))

    @given(point, point, point)
    def test_cyclic_and_swap(self, a, b, c):
        try:
            n = triangle_normal(a, b, c)
        except DegenerateTriangleError:
            return
        assert np.allclose(triangle_normal(b, c, a), n, atol=1e-9)
        assert np.allclose(triangle_normal(c, a, b), n, atol=1e-9)
        assert np.allclose(triangle_normal(b, a, c), -n, atol=1e-9)
        assert np.allclose(triangle_normal(a, c, b), -n, atol=1e-9)

    def test_face_normals_flags_degenerate(self):
        tv = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 0, 0], [1, 1, 1], [2, 2, 2]]], float)
        n, degen = face_normals(tv)
        assert degen.tolist() == [False, True]
        assert n[0].tolist() == [0, 0, 1] and n[1].tolist() == [0, 0, 0]


class TestShapes:
    @pytest.mark.parametrize("mesh", [box((0, 0, 0), (1, 2, 3)), icosphere(2, 1.5, (1, 1, 1)),
                                      convex_hull(np.random.default_rng(0).normal(size=(30, 3)))])
    def test_outward_winding(self, mesh):
        tv = mesh.triangle_vertices
        n, _ = face_normals(tv)
        centroid = mesh.vertices.mean(axis=0)
        assert np.all(np.einsum("ij,ij->i", n, tv.mean(axis=1) - centroid) > 0)

    def test_inward_box(self):
        m = box((0, 0, 0), (1, 1, 1), inward=True)
        n, _ = face_normals(m.triangle_vertices)
        assert np.all(np.einsum("ij,ij->i", n, m.triangle_vertices.mean(axis=1) - 0.5) < 0)

    def test_icosphere_triangle_count(self):
        assert len(icosphere(3).triangles) == 1280
