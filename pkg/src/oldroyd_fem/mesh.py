"""Structured conforming triangulations of the unit square.

Every mesh is an n x n grid of squares, each split into two triangles by
the south-west to north-east diagonal.  Vertices are numbered row by row
(y-major), cells square by square with the lower triangle first, so dof
numbering and therefore all downstream output is deterministic.
"""

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Invalid mesh construction or query."""


@dataclass
class Mesh:
    """Triangulation with the connectivity needed by Lagrange and bubble elements.

    Attributes:
        vertices: (V, 2) coordinates in [0, 1]^2.
        cells: (F, 3) vertex indices, counterclockwise.
        edges: (E, 2) vertex index pairs, each sorted, list duplicate-free.
        cell_edges: (F, 3) edge indices; local edge k is opposite local vertex k.
        edge_cells: (E, 2) incident cell indices, -1 padding for boundary edges.
        boundary_vertex_flags: (V,) bool.
        boundary_edge_flags: (E,) bool.
        h: mesh size, the maximum edge length.
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    edge_cells: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    h: float
    _geom: dict = field(default_factory=dict, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]


def build_unit_square_mesh(n: int) -> Mesh:
    """Triangulate [0,1]^2 into 2*n^2 triangles (n subdivisions per side)."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise MeshError(f"subdivision count must be a positive integer, got {n!r}")
    n = int(n)

    grid = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(grid, grid)  # row index = j (y), column index = i (x)
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    c = 0
    for j in range(n):
        for i in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            # diagonal v00 -> v11, lower-right triangle first
            cells[c] = (v00, v10, v11)
            cells[c + 1] = (v00, v11, v01)
            c += 2

    edge_index: dict[tuple[int, int], int] = {}
    cell_edges = np.empty((2 * n * n, 3), dtype=np.int64)
    for c, (a, b, d) in enumerate(cells):
        # local edge k joins the two vertices other than local vertex k
        for k, (p, q) in enumerate(((b, d), (d, a), (a, b))):
            key = (p, q) if p < q else (q, p)
            e = edge_index.setdefault(key, len(edge_index))
            cell_edges[c, k] = e

    edges = np.array(sorted(edge_index, key=edge_index.get), dtype=np.int64)
    edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
    for c in range(cells.shape[0]):
        for e in cell_edges[c]:
            slot = 0 if edge_cells[e, 0] == -1 else 1
            edge_cells[e, slot] = c

    boundary_edge_flags = edge_cells[:, 1] == -1
    boundary_vertex_flags = np.zeros(len(vertices), dtype=bool)
    boundary_vertex_flags[edges[boundary_edge_flags].ravel()] = True

    lengths = np.linalg.norm(
        vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1
    )
    return Mesh(
        vertices=vertices,
        cells=cells,
        edges=edges,
        cell_edges=cell_edges,
        edge_cells=edge_cells,
        boundary_vertex_flags=boundary_vertex_flags,
        boundary_edge_flags=boundary_edge_flags,
        h=float(lengths.max()),
    )


def cell_geometry(mesh: Mesh, cell_index: int) -> tuple[np.ndarray, float]:
    """Affine map matrix and area of one cell.

    The map sends the reference triangle {(0,0),(1,0),(0,1)} to the cell:
    x = p0 + J @ (xi, eta).  Area = det(J) / 2 (positive for ccw cells).
    """
    if not 0 <= cell_index < mesh.num_cells:
        raise MeshError(
            f"cell index {cell_index} out of range [0, {mesh.num_cells})"
        )
    p = mesh.vertices[mesh.cells[cell_index]]
    jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
    return jac, float(np.linalg.det(jac)) / 2.0


def all_jacobians(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cell affine data (J, det J, J^-1), cached on the mesh."""
    cached = mesh._geom.get("jac")
    if cached is None:
        p0 = mesh.vertices[mesh.cells[:, 0]]
        p1 = mesh.vertices[mesh.cells[:, 1]]
        p2 = mesh.vertices[mesh.cells[:, 2]]
        jac = np.stack([p1 - p0, p2 - p0], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        cached = (jac, det, inv)
        mesh._geom["jac"] = cached
    return cached


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text dump: one vertex per line "v x y", one cell per line "c i j k"."""
    lines = [f"v {x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"c {i} {j} {k}" for i, j, k in mesh.cells]
    return "\n".join(lines) + "\n"
