import math

import numpy as np
import pytest

from hhokirchhoff.mesh import (
    FAMILIES,
    MeshParseError,
    MeshTopologyError,
    build_topology,
    generate,
    generate_cartesian,
    generate_hexagonal,
    generate_kershaw,
    generate_triangular,
    read_mesh,
    write_mesh,
)


def shoelace(pts):
    x, y = np.asarray(pts).T
    return 0.5 * (x @ np.roll(y, -1) - np.roll(x, -1) @ y)


class TestCartesian:
    def test_counts_2x2(self):
        m = generate_cartesian(2)
        assert (m.n_cells, m.n_faces, m.interior_faces.size) == (4, 12, 4)

    def test_diameters_2x2(self):
        m = generate_cartesian(2)
        assert all(math.isclose(c.h, math.sqrt(2) / 2) for c in m.cells)
        assert all(math.isclose(f.h, 0.5) for f in m.faces)

    def test_area_16(self):
        assert abs(generate_cartesian(16).total_area() - 1.0) <= 1e-12

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            generate_cartesian(0)


class TestTriangular:
    def test_single_split(self):
        m = generate_triangular(1)
        assert (m.n_cells, m.n_faces, m.interior_faces.size) == (2, 5, 1)

    def test_areas(self):
        m = generate_triangular(2)
        assert m.n_cells == 8
        assert np.allclose([c.area for c in m.cells], 1 / 8, rtol=0, atol=1e-15)

    def test_meshsize(self):
        assert math.isclose(generate_triangular(32).h, math.sqrt(2) / 32)
        assert abs(generate_triangular(32).h - 0.0442) < 1e-4

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            generate_triangular(0)


class TestHexagonal:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
    def test_interior_cells_are_hexagons(self, n):
        m = generate_hexagonal(n)
        bnd = set(m.boundary_faces.tolist())
        for c in m.cells:
            if not bnd.intersection(c.faces):
                assert c.n_faces == 6

    def test_area(self):
        assert abs(generate_hexagonal(4).total_area() - 1.0) <= 1e-12

    def test_adjacency_symmetric(self):
        m = generate_hexagonal(4)
        for f in m.faces:
            for c in f.cells:
                assert f.id in m.cells[c].faces
        for c in m.cells:
            for f in c.faces:
                assert c.id in m.faces[f].cells

    def test_no_slivers(self):
        m = generate_hexagonal(8)
        assert min(c.area for c in m.cells) > 1e-14


class TestKershaw:
    def test_zero_distortion_is_cartesian(self):
        a, b = generate_kershaw(8, 0.0), generate_cartesian(8)
        assert np.array_equal(a.vertices, b.vertices)
        assert a.cell_vertex_lists() == b.cell_vertex_lists()

    def test_areas_positive_and_cover(self):
        m = generate_kershaw(8, 0.6)
        areas = np.array([c.area for c in m.cells])
        assert areas.min() > 0
        assert abs(areas.sum() - 1.0) <= 1e-12

    def test_size_ratio_recorded(self):
        m = generate_kershaw(8, 0.6)
        hs = np.array([c.h for c in m.cells])
        # trapezoids from the layered zigzag: diameters from the generated coordinates
        ratio = hs.max() / hs.min()
        assert np.isfinite(ratio)
        assert 1.0 < ratio < 3.0

    def test_distortion_out_of_range(self):
        with pytest.raises(ValueError):
            generate_kershaw(8, 1.0)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            generate_kershaw(1, 0.3)


class TestBuildTopology:
    def test_two_triangles_share_hypotenuse(self):
        m = build_topology([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])
        assert m.interior_faces.size == 1
        f = m.faces[m.interior_faces[0]]
        n0, n1 = f.normals
        assert np.isclose(n0 @ n1, -1.0)
        # normal of the first cell points away from it, towards (0, 1)
        assert n0 @ (np.array([0.0, 1.0]) - f.midpoint) > 0

    def test_single_square(self):
        m = build_topology([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])
        assert m.boundary_faces.size == 4 and m.interior_faces.size == 0

    def test_l_shaped_fan(self):
        pts = [[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]]
        m = build_topology(pts, [list(range(6))])
        cell = m.cells[0]
        assert cell.simplices.shape[0] == 6
        tri_areas = [shoelace(t) for t in cell.simplices]
        assert all(a > 0 for a in tri_areas)
        assert math.isclose(sum(tri_areas), shoelace(pts), rel_tol=1e-14)
        assert math.isclose(cell.area, 3.0)

    def test_clockwise_rejected(self):
        with pytest.raises(MeshTopologyError, match="clockwise"):
            build_topology([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 3, 2, 1]])

    def test_zero_length_edge(self):
        with pytest.raises(MeshTopologyError, match="zero-length"):
            build_topology([[0, 0], [1, 0], [1, 0], [0, 1]], [[0, 1, 2, 3]])

    def test_non_manifold(self):
        verts = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [2, 0.5]]
        with pytest.raises(MeshTopologyError, match="shared by 3"):
            build_topology(verts, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


@pytest.mark.parametrize("family", FAMILIES)
class TestInvariants:
    def test_face_cell_sizes(self, family):
        ratios = []
        for n in (4, 8, 16):
            m = generate(family, n)
            for c in m.cells:
                for f in c.faces:
                    assert m.faces[f].h <= c.h + 1e-15
            ratios.append(m.regularity())
        assert min(ratios) > 0
        assert ratios[-1] >= 0.9 * ratios[0]

    def test_faces_per_cell(self, family):
        expected = {"triangular": 3, "cartesian": 4, "hexagonal": 6, "kershaw": 4}[family]
        assert {generate(family, n).max_faces_per_cell() for n in (4, 8, 16)} == {expected}

    def test_area(self, family):
        for n in (2, 5, 8):
            assert abs(generate(family, n).total_area() - 1.0) <= 1e-12

    def test_outward_normals_close(self, family):
        m = generate(family, 6)
        for c in m.cells:
            s = sum(m.faces[f].h * m.faces[f].normal(c.id) for f in c.faces)
            assert np.abs(s).max() <= 1e-12
            for f in c.faces:
                face = m.faces[f]
                assert abs(np.linalg.norm(face.normal(c.id)) - 1.0) <= 1e-15
                assert face.normal(c.id) @ (face.midpoint - c.centroid) > 0

    def test_skeleton_partition(self, family):
        m = generate(family, 5)
        seen = {}
        for c in m.cells:
            for f in c.faces:
                seen[f] = seen.get(f, 0) + 1
        assert set(seen) == set(range(m.n_faces))
        for f, count in seen.items():
            assert count == (1 if m.faces[f].is_boundary else 2)


class TestIO:
    def test_round_trip(self, tmp_path):
        m = generate_cartesian(2)
        write_mesh(m, tmp_path / "m.txt")
        r = read_mesh(tmp_path / "m.txt")
        assert r.cell_vertex_lists() == m.cell_vertex_lists()
        assert np.array_equal(r.vertices, m.vertices)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_round_trip_exact_coordinates(self, tmp_path, family):
        m = generate(family, 5)
        write_mesh(m, tmp_path / "m.txt")
        r = read_mesh(tmp_path / "m.txt")
        assert np.array_equal(r.vertices, m.vertices)
        assert r.cell_vertex_lists() == m.cell_vertex_lists()

    def test_face_shared_by_three(self, tmp_path):
        text = "polymesh 2d\nvertices 5\n0 0\n1 0\n0.5 1\n0.5 -1\n2 0.5\ncells 3\n3 0 1 2\n3 1 0 3\n3 0 1 4\n"
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(MeshTopologyError):
            read_mesh(tmp_path / "bad.txt")

    def test_empty(self, tmp_path):
        (tmp_path / "e.txt").write_text("")
        with pytest.raises(MeshParseError, match="empty"):
            read_mesh(tmp_path / "e.txt")

    def test_bad_line_reports_number(self, tmp_path):
        (tmp_path / "b.txt").write_text("polymesh 2d\nvertices 2\n0 0\n1 oops\ncells 0\n")
        with pytest.raises(MeshParseError) as exc:
            read_mesh(tmp_path / "b.txt")
        assert exc.value.line == 4

    def test_bad_header(self, tmp_path):
        (tmp_path / "h.txt").write_text("mesh 3d\n")
        with pytest.raises(MeshParseError, match="line 1"):
            read_mesh(tmp_path / "h.txt")
