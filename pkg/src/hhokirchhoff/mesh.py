"""Two-dimensional polygonal meshes.

A :class:`PolyMesh` is built from a vertex array and a list of
counterclockwise vertex loops. Faces (edges) are derived, never stored in
files. Every cell carries a fan triangulation from its centroid which is
used as the simplicial submesh for quadrature.

Four generators cover the unit square: Cartesian, triangular, hexagonal
(clipped honeycomb) and Kershaw-type distorted quadrilaterals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Cell",
    "Face",
    "MeshError",
    "MeshParseError",
    "MeshTopologyError",
    "PolyMesh",
    "build_topology",
    "generate_cartesian",
    "generate_triangular",
    "generate_hexagonal",
    "generate_kershaw",
    "generate",
    "read_mesh",
    "write_mesh",
    "FAMILIES",
]

# polygons below this area are treated as degenerate
AREA_EPS = 1e-14


class MeshError(ValueError):
    """Base class for invalid mesh input."""


class MeshParseError(MeshError):
    """Malformed native mesh file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshTopologyError(MeshError):
    """Structurally invalid mesh (non-manifold, inverted, degenerate)."""

    def __init__(self, message: str, cell: int | None = None):
        self.cell = cell
        if cell is not None:
            message = f"cell {cell}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Face:
    id: int
    vertices: tuple[int, int]
    cells: tuple[int, ...]
    h: float
    midpoint: np.ndarray
    tangent: np.ndarray
    # outward unit normal per adjacent cell, same order as ``cells``
    normals: tuple[np.ndarray, ...]

    @property
    def is_boundary(self) -> bool:
        return len(self.cells) == 1

    def normal(self, cell: int) -> np.ndarray:
        return self.normals[self.cells.index(cell)]


@dataclass(frozen=True)
class Cell:
    id: int
    vertices: tuple[int, ...]
    faces: tuple[int, ...]
    # +1 if the counterclockwise loop traverses the face from its v0 to v1
    orientations: tuple[int, ...]
    h: float
    area: float
    centroid: np.ndarray
    simplices: np.ndarray  # (n_tri, 3, 2) fan triangles around the centroid

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass(frozen=True)
class PolyMesh:
    vertices: np.ndarray
    cells: tuple[Cell, ...]
    faces: tuple[Face, ...]
    boundary_faces: np.ndarray = field(repr=False)
    interior_faces: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def h(self) -> float:
        return max(c.h for c in self.cells)

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def cell_vertex_lists(self) -> list[list[int]]:
        return [list(c.vertices) for c in self.cells]

    def total_area(self) -> float:
        return float(sum(c.area for c in self.cells))

    def regularity(self) -> float:
        """Smallest ratio h_F / h_T over all cells and their faces."""
        return min(self.faces[f].h / c.h for c in self.cells for f in c.faces)

    def max_faces_per_cell(self) -> int:
        return max(c.n_faces for c in self.cells)

    def summary(self) -> dict:
        lo, hi = self.bounding_box
        hs = [c.h for c in self.cells]
        return {
            "cells": self.n_cells,
            "faces": self.n_faces,
            "interior_faces": int(self.interior_faces.size),
            "boundary_faces": int(self.boundary_faces.size),
            "vertices": int(self.vertices.shape[0]),
            "h": self.h,
            "h_min": min(hs),
            "regularity": self.regularity(),
            "max_faces_per_cell": self.max_faces_per_cell(),
            "area": self.total_area(),
            "bbox": [lo.tolist(), hi.tolist()],
        }


def _polygon_area_centroid(pts: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < AREA_EPS:
        return float(area), pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _diameter(pts: np.ndarray) -> float:
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def build_topology(vertices, cells) -> PolyMesh:
    """Build a :class:`PolyMesh` from raw coordinates and vertex loops.

    Parameters
    ----------
    vertices : array_like, shape (V, 2)
    cells : sequence of sequences of int
        Counterclockwise vertex loops, one per cell.

    Raises
    ------
    MeshTopologyError
        On clockwise or degenerate cells, zero-length edges, cells that are
        not star-shaped with respect to their centroid, or edges shared by
        more than two cells.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshError("vertices must have shape (V, 2)")
    if not np.all(np.isfinite(verts)):
        raise MeshError("vertex coordinates must be finite")
    if len(cells) == 0:
        raise MeshError("mesh has no cells")
    nv = verts.shape[0]

    edge_cells: dict[tuple[int, int], list[int]] = {}
    edge_order: list[tuple[int, int]] = []
    loops = []
    for c, loop in enumerate(cells):
        loop = tuple(int(v) for v in loop)
        if len(loop) < 3:
            raise MeshTopologyError("fewer than 3 vertices", cell=c)
        if len(set(loop)) != len(loop):
            raise MeshTopologyError("repeated vertex in loop", cell=c)
        if min(loop) < 0 or max(loop) >= nv:
            raise MeshTopologyError("vertex index out of range", cell=c)
        loops.append(loop)
        for i, a in enumerate(loop):
            b = loop[(i + 1) % len(loop)]
            if np.linalg.norm(verts[b] - verts[a]) == 0.0:
                raise MeshTopologyError(f"zero-length edge ({a}, {b})", cell=c)
            key = (min(a, b), max(a, b))
            if key not in edge_cells:
                edge_cells[key] = []
                edge_order.append(key)
            edge_cells[key].append(c)

    face_id = {}
    faces = []
    for key in edge_order:
        owners = edge_cells[key]
        if len(owners) > 2:
            raise MeshTopologyError(
                f"edge {key} is shared by {len(owners)} cells (non-manifold)"
            )
        if len(owners) == 2 and owners[0] == owners[1]:
            raise MeshTopologyError(f"edge {key} used twice", cell=owners[0])
        p0, p1 = verts[key[0]], verts[key[1]]
        length = float(np.linalg.norm(p1 - p0))
        tangent = (p1 - p0) / length
        normals = []
        for c in owners:
            loop = loops[c]
            i = loop.index(key[0])
            # counterclockwise traversal a->b has outward normal (dy, -dx)
            forward = loop[(i + 1) % len(loop)] == key[1]
            t = tangent if forward else -tangent
            normals.append(np.array([t[1], -t[0]]))
        fid = len(faces)
        face_id[key] = fid
        faces.append(
            Face(
                id=fid,
                vertices=key,
                cells=tuple(owners),
                h=length,
                midpoint=0.5 * (p0 + p1),
                tangent=tangent,
                normals=tuple(normals),
            )
        )

    cell_objs = []
    for c, loop in enumerate(loops):
        pts = verts[list(loop)]
        area, centroid = _polygon_area_centroid(pts)
        if area <= 0.0:
            if area < -AREA_EPS:
                raise MeshTopologyError("clockwise orientation", cell=c)
            raise MeshTopologyError(f"degenerate cell (area {area:.3e})", cell=c)
        nxt = np.roll(pts, -1, axis=0)
        tris = np.stack([np.broadcast_to(centroid, pts.shape), pts, nxt], axis=1)
        e1 = tris[:, 1] - tris[:, 0]
        e2 = tris[:, 2] - tris[:, 0]
        tri_area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(tri_area <= 0.0):
            raise MeshTopologyError("cell is not star-shaped with respect to its centroid", cell=c)
        fids, orients = [], []
        for i, a in enumerate(loop):
            b = loop[(i + 1) % len(loop)]
            fids.append(face_id[(min(a, b), max(a, b))])
            orients.append(1 if a < b else -1)
        cell_objs.append(
            Cell(
                id=c,
                vertices=loop,
                faces=tuple(fids),
                orientations=tuple(orients),
                h=_diameter(pts),
                area=area,
                centroid=centroid,
                simplices=tris,
            )
        )

    boundary = np.array([f.id for f in faces if f.is_boundary], dtype=int)
    interior = np.array([f.id for f in faces if not f.is_boundary], dtype=int)
    verts.setflags(write=False)
    return PolyMesh(
        vertices=verts,
        cells=tuple(cell_objs),
        faces=tuple(faces),
        boundary_faces=boundary,
        interior_faces=interior,
    )


def _check_n(n, minimum=1):
    if int(n) != n or n < minimum:
        raise ValueError(f"n must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _grid_vertices(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    t[-1] = 1.0
    X, Y = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def generate_cartesian(n: int) -> PolyMesh:
    """Uniform ``n x n`` grid of squares on the unit square."""
    n = _check_n(n)
    verts = _grid_vertices(n)
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    return build_topology(verts, cells)


def generate_triangular(n: int) -> PolyMesh:
    """``n x n`` grid with every square cut along the same diagonal."""
    n = _check_n(n)
    verts = _grid_vertices(n)
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append([a, b, c])
            cells.append([a, c, d])
    return build_topology(verts, cells)


def _clip_box(poly: list[tuple[int, int]], xmax: int, ymax: int) -> list[tuple[int, int]]:
    """Sutherland-Hodgman clip of an integer polygon to [0, xmax] x [0, ymax].

    All intersections used by the honeycomb lie on lattice points, so the
    arithmetic stays exact.
    """

    def clip(pts, inside, intersect):
        out = []
        for i, cur in enumerate(pts):
            prev = pts[i - 1]
            if inside(cur):
                if not inside(prev):
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif inside(prev):
                out.append(intersect(prev, cur))
        return out

    def at_x(x0):
        def f(p, q):
            t = (x0 - p[0]) / (q[0] - p[0])
            y = p[1] + t * (q[1] - p[1])
            return (x0, int(round(y)))

        return f

    def at_y(y0):
        def f(p, q):
            t = (y0 - p[1]) / (q[1] - p[1])
            x = p[0] + t * (q[0] - p[0])
            return (int(round(x)), y0)

        return f

    pts = list(poly)
    for inside, inter in (
        (lambda p: p[0] >= 0, at_x(0)),
        (lambda p: p[0] <= xmax, at_x(xmax)),
        (lambda p: p[1] >= 0, at_y(0)),
        (lambda p: p[1] <= ymax, at_y(ymax)),
    ):
        if not pts:
            break
        pts = clip(pts, inside, inter)
    dedup = []
    for p in pts:
        if not dedup or dedup[-1] != p:
            dedup.append(p)
    while len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def generate_hexagonal(n: int) -> PolyMesh:
    """Honeycomb of pointy-top hexagons clipped to the unit square.

    Hexagon centres sit on ``n + 1`` rows ``y = j/n``; odd rows are shifted
    by half a cell. Cells cut by the boundary become pentagons, quadrilaterals
    or corner triangles-like quadrilaterals. Coordinates are generated on the
    integer lattice ``(x * 2n, y * 3n)`` so that shared vertices match exactly.
    """
    n = _check_n(n)
    xmax, ymax = 2 * n, 3 * n
    # hexagon offsets in lattice units: half width 1, vertical thirds 1 and 2
    hexagon = [(0, -2), (1, -1), (1, 1), (0, 2), (-1, 1), (-1, -1)]
    index: dict[tuple[int, int], int] = {}
    coords = []
    cells = []
    for j in range(n + 1):
        cy = 3 * j
        shift = j % 2
        for i in range(-1, n + 1):
            cx = 2 * i + shift
            poly = [(cx + dx, cy + dy) for dx, dy in hexagon]
            clipped = _clip_box(poly, xmax, ymax)
            if len(clipped) < 3:
                continue
            arr = np.array(clipped, dtype=float)
            area2 = np.sum(arr[:, 0] * np.roll(arr[:, 1], -1) - np.roll(arr[:, 0], -1) * arr[:, 1])
            if area2 / (2.0 * xmax * ymax) < AREA_EPS:
                continue
            loop = []
            for p in clipped:
                if p not in index:
                    index[p] = len(coords)
                    coords.append(p)
                loop.append(index[p])
            cells.append(loop)
    verts = np.array(coords, dtype=float)
    verts[:, 0] /= xmax
    verts[:, 1] /= ymax
    return build_topology(verts, cells)


def _tent(t: np.ndarray) -> np.ndarray:
    """Zigzag of period one with values in [-1, 1], equal to 1 at integers."""
    return 1.0 - 4.0 * np.abs(t - np.round(t))


KERSHAW_DEFAULT_DISTORTION = 0.6


def generate_kershaw(n: int, distortion: float = KERSHAW_DEFAULT_DISTORTION) -> PolyMesh:
    """Kershaw-type distorted quadrilateral mesh.

    Vertices of the Cartesian ``n x n`` grid are moved vertically by the
    layered zigzag map ``y + distortion/4 * z(x) * w(y)``, where ``z`` has
    period 1/2 in ``x`` and ``w`` is a zigzag vanishing at ``y = 0, 1/2, 1``
    with unit slope magnitude 4. Vertical grid lines stay straight, so each
    cell is a trapezoid; it stays strictly convex as long as
    ``distortion < 1`` (the vertical stretch factor is at least
    ``1 - distortion``). The coordinates do not reproduce the FVCA benchmark
    files.
    """
    n = _check_n(n, minimum=2)
    if not 0.0 <= distortion < 1.0:
        raise ValueError(f"distortion must lie in [0, 1), got {distortion!r}")
    verts = _grid_vertices(n)
    x, y = verts[:, 0], verts[:, 1]
    w = _tent(y + 0.25)  # zero at 0, 1/2, 1; -1 at 1/4, +1 at 3/4
    w[np.abs(w) < 1e-15] = 0.0
    verts[:, 1] = y + 0.25 * distortion * _tent(2.0 * x) * w
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    for c, loop in enumerate(cells):
        if not _is_strictly_convex(verts[loop]):
            raise MeshTopologyError("non-convex or inverted cell", cell=c)
    return build_topology(verts, cells)


def _is_strictly_convex(pts: np.ndarray) -> bool:
    e = np.roll(pts, -1, axis=0) - pts
    en = np.roll(e, -1, axis=0)
    cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
    return bool(np.all(cross > 0.0))


FAMILIES = ("triangular", "cartesian", "hexagonal", "kershaw")


def generate(family: str, n: int, distortion: float = KERSHAW_DEFAULT_DISTORTION) -> PolyMesh:
    """Dispatch to the generator of a named mesh family."""
    if family == "cartesian":
        return generate_cartesian(n)
    if family == "triangular":
        return generate_triangular(n)
    if family == "hexagonal":
        return generate_hexagonal(n)
    if family == "kershaw":
        return generate_kershaw(n, distortion)
    raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")


def write_mesh(mesh: PolyMesh, path, format: str = "native") -> None:
    """Write ``mesh`` in the native text format (17 significant digits)."""
    if format != "native":
        raise ValueError(f"unsupported mesh format {format!r}")
    lines = ["polymesh 2d", f"vertices {mesh.vertices.shape[0]}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"cells {mesh.n_cells}")
    lines += [" ".join(str(v) for v in [len(c.vertices), *c.vertices]) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, format: str = "native") -> PolyMesh:
    """Read a mesh in the native text format.

    Raises
    ------
    MeshParseError
        With the offending line number for malformed content.
    MeshTopologyError
        If the cells do not form a valid manifold polygonal mesh.
    """
    if format != "native":
        raise ValueError(f"unsupported mesh format {format!r}")
    raw = Path(path).read_text().splitlines()
    # (line number, tokens) for non-blank lines
    lines = [(i + 1, ln.split()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise MeshParseError("empty file", line=1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise MeshParseError("unexpected end of file", line=last + 1)
        item = lines[pos]
        pos += 1
        return item

    lineno, tok = take()
    if tok != ["polymesh", "2d"]:
        raise MeshParseError("expected header 'polymesh 2d'", line=lineno)

    def count(keyword):
        lineno, tok = take()
        if len(tok) != 2 or tok[0] != keyword:
            raise MeshParseError(f"expected '{keyword} <count>'", line=lineno)
        try:
            value = int(tok[1])
        except ValueError:
            raise MeshParseError(f"invalid {keyword} count {tok[1]!r}", line=lineno) from None
        if value < 0:
            raise MeshParseError(f"negative {keyword} count", line=lineno)
        return value

    nv = count("vertices")
    verts = np.empty((nv, 2))
    for v in range(nv):
        lineno, tok = take()
        if len(tok) != 2:
            raise MeshParseError("expected two coordinates", line=lineno)
        try:
            verts[v] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshParseError("invalid coordinate", line=lineno) from None
    nc = count("cells")
    cells = []
    for _ in range(nc):
        lineno, tok = take()
        try:
            ints = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("invalid vertex index", line=lineno) from None
        if not ints or ints[0] != len(ints) - 1:
            raise MeshParseError("cell vertex count does not match", line=lineno)
        if any(v < 0 or v >= nv for v in ints[1:]):
            raise MeshParseError("vertex index out of range", line=lineno)
        cells.append(ints[1:])
    if pos != len(lines):
        raise MeshParseError("trailing content", line=lines[pos][0])
    if nc == 0:
        raise MeshParseError("mesh has no cells", line=lineno)
    return build_topology(verts, cells)
