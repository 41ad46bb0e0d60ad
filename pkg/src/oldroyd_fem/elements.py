"""Reference elements, triangle quadrature, and degree-of-freedom layout.

Supports the two inf-sup stable mixed pairs used by the solver:
P2 velocity with P0 pressure, and MINI velocity (P1 plus a cubic cell
bubble per component) with P1 pressure.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .mesh import Mesh, all_jacobians


class ElementError(ValueError):
    """Unsupported element kind or quadrature degree."""


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule on the reference triangle {(0,0),(1,0),(0,1)}.

    points holds barycentric coordinates (lambda0, lambda1, lambda2);
    weights sum to 1/2, the reference-triangle area.  degree is the
    highest total polynomial degree integrated exactly.
    """

    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def xy(self) -> np.ndarray:
        """Cartesian reference coordinates (xi, eta) = (lambda1, lambda2)."""
        return self.points[:, 1:]


def _bary(xy_points):
    xy = np.asarray(xy_points, dtype=float)
    lam0 = 1.0 - xy[:, 0] - xy[:, 1]
    return np.column_stack([lam0, xy])


def _symmetric_rule(degree: int) -> QuadratureRule:
    """Closed-form symmetric rules for degrees 1, 2, 4 and 5.

    The degree-3 request is served by the degree-4 rule: the classical
    4-point degree-3 rule has a negative centroid weight, which would
    break mass-matrix positivity.
    """
    if degree == 1:
        pts = np.array([[1 / 3, 1 / 3]])
        w = np.array([0.5])
        exact = 1
    elif degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        w = np.full(3, 1 / 6)
        exact = 2
    elif degree in (3, 4):
        # two three-point orbits; parameters in closed algebraic form
        s10 = np.sqrt(10.0)
        inner = np.sqrt(38.0 - 44.0 * np.sqrt(0.4))
        b_hi = (8.0 - s10 + inner) / 18.0
        b_lo = (8.0 - s10 - inner) / 18.0
        w_root = np.sqrt(213125.0 - 53320.0 * s10)
        w_hi = (620.0 + w_root) / 3720.0 / 2.0
        w_lo = (620.0 - w_root) / 3720.0 / 2.0
        pts, w = [], []
        for b, wt in ((b_hi, w_hi), (b_lo, w_lo)):
            a = 1.0 - 2.0 * b
            pts += [[b, b], [a, b], [b, a]]
            w += [wt] * 3
        pts, w = np.array(pts), np.array(w)
        exact = 4
    elif degree == 5:
        s15 = np.sqrt(15.0)
        b1, w1 = (6.0 - s15) / 21.0, (155.0 - s15) / 2400.0
        b2, w2 = (6.0 + s15) / 21.0, (155.0 + s15) / 2400.0
        pts = [[1 / 3, 1 / 3]]
        w = [9.0 / 80.0]
        for b, wt in ((b1, w1), (b2, w2)):
            a = 1.0 - 2.0 * b
            pts += [[b, b], [a, b], [b, a]]
            w += [wt] * 3
        pts, w = np.array(pts), np.array(w)
        exact = 5
    else:  # pragma: no cover - guarded by quadrature_rule
        raise ElementError(f"no symmetric rule for degree {degree}")
    return QuadratureRule(_bary(pts), w, exact)


def _conical_rule(degree: int) -> QuadratureRule:
    """Conical product rule (Gauss-Jacobi x Gauss-Legendre), exact to `degree`.

    Nodes and weights come from orthogonal-polynomial solvers, so the rule
    is exact to machine precision, unlike truncated decimal tables.
    """
    m = (degree + 2) // 2  # 2m - 1 >= degree
    tj, wj = roots_jacobi(m, 1.0, 0.0)      # weight (1 - t) on [-1, 1]
    xi = (tj + 1.0) / 2.0
    wxi = wj / 4.0                           # sum = integral of (1 - x) on [0,1]
    tl, wl = np.polynomial.legendre.leggauss(m)
    eta = (tl + 1.0) / 2.0
    weta = wl / 2.0
    pts = np.empty((m * m, 2))
    w = np.empty(m * m)
    idx = 0
    for i in range(m):
        for j in range(m):
            pts[idx] = (xi[i], eta[j] * (1.0 - xi[i]))
            w[idx] = wxi[i] * weta[j]
            idx += 1
    return QuadratureRule(_bary(pts), w, 2 * m - 1)


_RULE_CACHE: dict[int, QuadratureRule] = {}


def quadrature_rule(degree: int) -> QuadratureRule:
    """Rule with exactness >= `degree` for degree in 1..8, positive weights."""
    if degree not in range(1, 9):
        raise ElementError(f"unsupported quadrature degree {degree!r}")
    rule = _RULE_CACHE.get(degree)
    if rule is None:
        rule = _symmetric_rule(degree) if degree <= 5 else _conical_rule(degree)
        _RULE_CACHE[degree] = rule
    return rule


# ---------------------------------------------------------------------------
# Reference elements
# ---------------------------------------------------------------------------

class ReferenceElement:
    """Shape functions on the reference triangle.

    kind is one of P1, P2, P1-bubble, P0.  Lagrange dofs sit at nodes
    (vertices, and edge midpoints for P2); the MINI bubble 27*l0*l1*l2
    is normalized to 1 at the centroid and vanishes on all edges.
    """

    KINDS = ("P1", "P2", "P1-bubble", "P0")

    def __init__(self, kind: str):
        if kind not in self.KINDS:
            raise ElementError(f"unknown element kind {kind!r}")
        self.kind = kind
        self.dof_count = {"P1": 3, "P2": 6, "P1-bubble": 4, "P0": 1}[kind]
        # nodal points used for interpolation (centroid for bubble / P0 dofs)
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        mids = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])
        centroid = np.array([[1 / 3, 1 / 3]])
        self.nodes = {
            "P1": verts,
            "P2": np.vstack([verts, mids]),
            "P1-bubble": np.vstack([verts, centroid]),
            "P0": centroid,
        }[kind]

    def values(self, xy: np.ndarray) -> np.ndarray:
        """Basis values at reference points xy, shape (npts, dof_count)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        x, y = xy[:, 0], xy[:, 1]
        l0, l1, l2 = 1.0 - x - y, x, y
        if self.kind == "P1":
            return np.column_stack([l0, l1, l2])
        if self.kind == "P2":
            return np.column_stack([
                l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
            ])
        if self.kind == "P1-bubble":
            return np.column_stack([l0, l1, l2, 27 * l0 * l1 * l2])
        return np.ones((len(x), 1))

    def gradients(self, xy: np.ndarray) -> np.ndarray:
        """Reference gradients at points xy, shape (npts, dof_count, 2)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        x, y = xy[:, 0], xy[:, 1]
        l0, l1, l2 = 1.0 - x - y, x, y
        n = len(x)
        g = np.zeros((n, self.dof_count, 2))
        if self.kind == "P1":
            g[:, 0] = (-1.0, -1.0)
            g[:, 1] = (1.0, 0.0)
            g[:, 2] = (0.0, 1.0)
        elif self.kind == "P2":
            g[:, 0, 0] = 1 - 4 * l0
            g[:, 0, 1] = 1 - 4 * l0
            g[:, 1, 0] = 4 * l1 - 1
            g[:, 2, 1] = 4 * l2 - 1
            g[:, 3, 0] = 4 * l2
            g[:, 3, 1] = 4 * l1
            g[:, 4, 0] = -4 * l2
            g[:, 4, 1] = 4 * (l0 - l2)
            g[:, 5, 0] = 4 * (l0 - l1)
            g[:, 5, 1] = -4 * l1
        elif self.kind == "P1-bubble":
            g[:, 0] = (-1.0, -1.0)
            g[:, 1] = (1.0, 0.0)
            g[:, 2] = (0.0, 1.0)
            g[:, 3, 0] = 27 * l2 * (l0 - l1)
            g[:, 3, 1] = 27 * l1 * (l0 - l2)
        return g


_ELEMENT_CACHE: dict[str, ReferenceElement] = {}


def reference_element(kind: str) -> ReferenceElement:
    elem = _ELEMENT_CACHE.get(kind)
    if elem is None:
        elem = ReferenceElement(kind)
        _ELEMENT_CACHE[kind] = elem
    return elem


# ---------------------------------------------------------------------------
# Finite element spaces
# ---------------------------------------------------------------------------

SPACE_KINDS = {
    "velocity-P2": ("P2", 2),
    "velocity-MINI": ("P1-bubble", 2),
    "pressure-P0": ("P0", 1),
    "pressure-P1": ("P1", 1),
}

# default assembly quadrature degree per element (error norms use degree 8)
ASSEMBLY_DEGREE = {"P2": 5, "P1-bubble": 4, "P1": 4, "P0": 4}


@dataclass
class FeSpace:
    """Dof layout of a scalar or vector finite element space.

    Vector spaces store their components block-wise: dof (d, i) of
    component d and scalar dof i has global index d * scalar_ndof + i.
    """

    kind: str
    mesh: Mesh
    element: ReferenceElement
    vector_dim: int
    scalar_ndof: int
    cell_dofs: np.ndarray          # (ncells, local_dofs) scalar dof indices
    boundary_scalar_dofs: np.ndarray
    _cache: dict = None

    def __post_init__(self):
        if self._cache is None:
            self._cache = {}

    @property
    def ndof(self) -> int:
        return self.vector_dim * self.scalar_ndof

    @property
    def boundary_dofs(self) -> np.ndarray:
        """Global indices of boundary dofs across all components."""
        offsets = np.arange(self.vector_dim) * self.scalar_ndof
        return (self.boundary_scalar_dofs[None, :] + offsets[:, None]).ravel()

    @property
    def assembly_degree(self) -> int:
        return ASSEMBLY_DEGREE[self.element.kind]


def build_space(mesh: Mesh, kind: str) -> FeSpace:
    """Lay out dofs for one of the supported velocity or pressure spaces."""
    if kind not in SPACE_KINDS:
        raise ElementError(
            f"unknown space kind {kind!r}; expected one of {sorted(SPACE_KINDS)}"
        )
    elem_kind, vdim = SPACE_KINDS[kind]
    elem = reference_element(elem_kind)
    V, E, F = mesh.num_vertices, mesh.num_edges, mesh.num_cells

    if elem_kind == "P1":
        ndof = V
        cell_dofs = mesh.cells.copy()
        bnd = np.flatnonzero(mesh.boundary_vertex_flags)
    elif elem_kind == "P2":
        ndof = V + E
        cell_dofs = np.hstack([mesh.cells, V + mesh.cell_edges])
        bnd = np.concatenate([
            np.flatnonzero(mesh.boundary_vertex_flags),
            V + np.flatnonzero(mesh.boundary_edge_flags),
        ])
    elif elem_kind == "P1-bubble":
        ndof = V + F
        cell_dofs = np.hstack([
            mesh.cells, V + np.arange(F, dtype=np.int64)[:, None]
        ])
        bnd = np.flatnonzero(mesh.boundary_vertex_flags)  # bubbles are interior
    else:  # P0
        ndof = F
        cell_dofs = np.arange(F, dtype=np.int64)[:, None]
        bnd = np.array([], dtype=np.int64)

    return FeSpace(
        kind=kind,
        mesh=mesh,
        element=elem,
        vector_dim=vdim,
        scalar_ndof=ndof,
        cell_dofs=cell_dofs,
        boundary_scalar_dofs=np.sort(bnd),
    )


def _nodal_coordinates(space: FeSpace) -> tuple[np.ndarray, np.ndarray]:
    """Physical coordinates of scalar dofs and a mask of non-nodal (bubble) dofs."""
    mesh = space.mesh
    kind = space.element.kind
    V = mesh.num_vertices
    if kind == "P1":
        return mesh.vertices, np.zeros(V, dtype=bool)
    if kind == "P2":
        mids = 0.5 * (
            mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
        )
        coords = np.vstack([mesh.vertices, mids])
        return coords, np.zeros(len(coords), dtype=bool)
    if kind == "P1-bubble":
        centroids = mesh.vertices[mesh.cells].mean(axis=1)
        coords = np.vstack([mesh.vertices, centroids])
        mask = np.zeros(len(coords), dtype=bool)
        mask[V:] = True
        return coords, mask
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    return centroids, np.zeros(len(centroids), dtype=bool)


def interpolate(space: FeSpace, fn, t: float = 0.0) -> np.ndarray:
    """Nodal interpolation into the space.

    Lagrange dofs are set to nodal values, bubble dofs to zero, and P0
    dofs to cell-centroid values.  Vector functions must accept
    (x, y, t) arrays and return an array of shape x.shape + (2,).
    """
    coords, bubble_mask = _nodal_coordinates(space)
    vals = np.asarray(fn(coords[:, 0], coords[:, 1], t), dtype=float)
    out = np.zeros(space.ndof)
    if space.vector_dim == 1:
        out[:] = vals
        out[bubble_mask] = 0.0
    else:
        for d in range(space.vector_dim):
            comp = vals[..., d]
            comp = np.where(bubble_mask, 0.0, comp)
            out[d * space.scalar_ndof:(d + 1) * space.scalar_ndof] = comp
    return out


# ---------------------------------------------------------------------------
# Per-space tabulation used by assembly and norm evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tabulation:
    """Basis data at the quadrature points of every cell (affine map applied)."""

    rule: QuadratureRule
    N: np.ndarray        # (nq, nloc) reference basis values
    grad: np.ndarray     # (ncells, nq, nloc, 2) physical gradients
    det: np.ndarray      # (ncells,) Jacobian determinants
    points: np.ndarray   # (ncells, nq, 2) physical quadrature points
    weights: np.ndarray  # (nq,) reference weights


def tabulate(space: FeSpace, degree: int) -> Tabulation:
    """Tabulation at an exactness-`degree` rule, cached per space."""
    tab = space._cache.get(("tab", degree))
    if tab is not None:
        return tab
    rule = quadrature_rule(degree)
    mesh = space.mesh
    jac, det, jinv = all_jacobians(mesh)
    xy = rule.xy
    N = space.element.values(xy)
    dref = space.element.gradients(xy)
    # physical gradient: grad_x phi = J^{-T} grad_ref phi
    grad = np.einsum("ced,qie->cqid", jinv, dref)
    p0 = mesh.vertices[mesh.cells[:, 0]]
    points = p0[:, None, :] + np.einsum("cde,qe->cqd", jac, xy)
    tab = Tabulation(rule, N, grad, det, points, rule.weights)
    space._cache[("tab", degree)] = tab
    return tab
