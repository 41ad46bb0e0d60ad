"""Assembly of mass, stiffness, divergence, and convection operators.

All element loops are vectorized over cells; repeated assemblies (the
convection matrix changes every nonlinear iteration) reuse a
pre-symbolized sparsity pattern so only values are recomputed, and the
accumulation order is fixed, keeping outputs bit-stable run to run.
"""

import numpy as np
import scipy.sparse as sp

from .elements import FeSpace, tabulate


class AssemblyError(ValueError):
    """Incompatible spaces or arguments passed to an assembly routine."""


_STABLE_PAIRS = {("velocity-P2", "pressure-P0"), ("velocity-MINI", "pressure-P1")}


class AssemblyPattern:
    """Sparsity pattern of cell-local all-pairs couplings for one scalar space.

    `scatter` maps flattened local matrices (ncells, nloc, nloc) onto the CSR
    data array.  Mass, stiffness, and convection matrices built through the
    same pattern share identical indptr/indices, which downstream code relies
    on when composing block systems.
    """

    def __init__(self, space: FeSpace):
        dofs = space.cell_dofs
        nc, nl = dofs.shape
        n = space.scalar_ndof
        rows = np.repeat(dofs, nl, axis=1).ravel()
        cols = np.tile(dofs, (1, nl)).ravel()
        order = np.lexsort((cols, rows))
        rs, cs = rows[order], cols[order]
        first = np.empty(len(rs), dtype=bool)
        first[0] = True
        first[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        data_index = np.cumsum(first) - 1
        self.nnz = int(data_index[-1]) + 1
        self.position = np.empty(len(rows), dtype=np.int64)
        self.position[order] = data_index
        self.indices = cs[first]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, rs[first] + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.shape = (n, n)
        self.entry_rows = rs[first]  # row index of each stored entry

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Accumulate local matrices into a fresh CSR data array."""
        data = np.zeros(self.nnz)
        np.add.at(data, self.position, local.ravel())
        return data

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (data, self.indices.copy(), self.indptr.copy()), shape=self.shape
        )


def _pattern(space: FeSpace) -> AssemblyPattern:
    pat = space._cache.get("pattern")
    if pat is None:
        pat = AssemblyPattern(space)
        space._cache["pattern"] = pat
    return pat


def _vector_expand(space: FeSpace, scalar: sp.csr_matrix) -> sp.csr_matrix:
    if space.vector_dim == 1:
        return scalar
    return sp.block_diag([scalar] * space.vector_dim, format="csr")


def _local_mass(space: FeSpace) -> np.ndarray:
    tab = tabulate(space, space.assembly_degree)
    ref = np.einsum("q,qi,qj->ij", tab.weights, tab.N, tab.N)
    return tab.det[:, None, None] * ref[None]


def _local_stiffness(space: FeSpace) -> np.ndarray:
    tab = tabulate(space, space.assembly_degree)
    return np.einsum(
        "q,cqid,cqjd,c->cij", tab.weights, tab.grad, tab.grad, tab.det
    )


def mass_scalar(space: FeSpace) -> sp.csr_matrix:
    M = space._cache.get("mass_scalar")
    if M is None:
        pat = _pattern(space)
        M = pat.matrix(pat.scatter(_local_mass(space)))
        space._cache["mass_scalar"] = M
    return M


def stiffness_scalar(space: FeSpace) -> sp.csr_matrix:
    A = space._cache.get("stiffness_scalar")
    if A is None:
        pat = _pattern(space)
        A = pat.matrix(pat.scatter(_local_stiffness(space)))
        space._cache["stiffness_scalar"] = A
    return A


def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    """Mass matrix (phi_i, phi_j) of the (possibly vector) space."""
    return _vector_expand(space, mass_scalar(space))


def assemble_stiffness(space: FeSpace) -> sp.csr_matrix:
    """Stiffness matrix (grad phi_i, grad phi_j)."""
    return _vector_expand(space, stiffness_scalar(space))


def assemble_divergence(vel_space: FeSpace, pres_space: FeSpace) -> sp.csr_matrix:
    """Divergence coupling B[i, (d,j)] = (d_d phi_j, chi_i).

    Rows are pressure dofs, columns velocity dofs; B u evaluates the
    divergence of the velocity field tested against every pressure basis
    function.  Only the two inf-sup stable pairs are accepted.
    """
    if (vel_space.kind, pres_space.kind) not in _STABLE_PAIRS:
        raise AssemblyError(
            f"incompatible pair ({vel_space.kind}, {pres_space.kind}); "
            "supported: velocity-P2 with pressure-P0, velocity-MINI with pressure-P1"
        )
    degree = vel_space.assembly_degree
    vtab = tabulate(vel_space, degree)
    ptab = tabulate(pres_space, degree)
    ns = vel_space.scalar_ndof
    local = np.einsum(
        "q,qi,cqjd,c->cijd", vtab.weights, ptab.N, vtab.grad, vtab.det
    )
    nc, nlp = pres_space.cell_dofs.shape
    nlv = vel_space.cell_dofs.shape[1]
    rows = np.repeat(pres_space.cell_dofs, nlv, axis=1).ravel()
    cols = np.tile(vel_space.cell_dofs, (1, nlp)).ravel()
    blocks = [
        sp.coo_matrix(
            (local[..., d].ravel(), (rows, cols)),
            shape=(pres_space.scalar_ndof, ns),
        ).tocsr()
        for d in range(2)
    ]
    B = sp.hstack(blocks, format="csr")
    B.sum_duplicates()
    B.sort_indices()
    return B


def convection_local(space: FeSpace, w: np.ndarray) -> np.ndarray:
    """Cell-local skew-symmetrized convection matrices for transport field w.

    Entry (i, j) approximates b(w, phi_j, phi_i) with
    b(v, w, phi) = ((v . grad w, phi) - (v . grad phi, w)) / 2; the local
    matrices are skew by construction, so the antisymmetry surviving
    quadrature is structural, not approximate.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (space.ndof,):
        raise AssemblyError(
            f"transport field has shape {w.shape}, expected ({space.ndof},)"
        )
    tab = tabulate(space, space.assembly_degree)
    ns = space.scalar_ndof
    dofs = space.cell_dofs
    wq = np.stack(
        [tab.N @ w[d * ns + dofs].T for d in range(2)], axis=-1
    ).transpose(1, 0, 2)                        # (nc, nq, 2)
    wdotgrad = np.einsum("cqd,cqjd->cqj", wq, tab.grad)
    D = np.einsum("q,c,qi,cqj->cij", tab.weights, tab.det, tab.N, wdotgrad)
    return 0.5 * (D - D.transpose(0, 2, 1))


def assemble_convection(space: FeSpace, w: np.ndarray) -> sp.csr_matrix:
    """Vector convection operator N(w); block-diagonal over components."""
    pat = _pattern(space)
    scalar = pat.matrix(pat.scatter(convection_local(space, w)))
    return _vector_expand(space, scalar)


def assemble_load(space: FeSpace, f, t: float, degree: int = 8) -> np.ndarray:
    """Load vector (f(., t), phi_i) by degree-8 quadrature.

    f is called with coordinate arrays (x, y, t) and must return an array
    of shape x.shape + (2,).
    """
    tab = tabulate(space, degree)
    fv = np.asarray(f(tab.points[..., 0], tab.points[..., 1], t), dtype=float)
    local = np.einsum("q,qi,cqd,c->cid", tab.weights, tab.N, fv, tab.det)
    ns = space.scalar_ndof
    out = np.zeros(space.ndof)
    for d in range(2):
        np.add.at(out, d * ns + space.cell_dofs, local[..., d])
    return out


def pressure_weights(pres_space: FeSpace) -> np.ndarray:
    """Integral of every pressure basis function (area weights for P0)."""
    tab = tabulate(pres_space, pres_space.assembly_degree)
    local = np.einsum("q,qi,c->ci", tab.weights, tab.N, tab.det)
    out = np.zeros(pres_space.scalar_ndof)
    np.add.at(out, pres_space.cell_dofs, local)
    return out


# ---------------------------------------------------------------------------
# Field evaluation at quadrature points (error norms, monitors)
# ---------------------------------------------------------------------------

def evaluate_velocity(space: FeSpace, coeffs: np.ndarray, degree: int = 8):
    """Velocity values and gradients at quadrature points.

    Returns (points, values (nc, nq, 2), gradients (nc, nq, 2, 2), weights)
    with gradients[..., i, j] = d u_i / d x_j and weights already scaled by
    the per-cell Jacobian determinant.
    """
    tab = tabulate(space, degree)
    ns = space.scalar_ndof
    dofs = space.cell_dofs
    vals = np.stack(
        [(tab.N @ coeffs[d * ns + dofs].T).T for d in range(2)], axis=-1
    )
    grads = np.stack(
        [
            np.einsum("cqjd,cj->cqd", tab.grad, coeffs[d * ns + dofs])
            for d in range(2)
        ],
        axis=-2,
    )
    w = tab.weights[None, :] * tab.det[:, None]
    return tab.points, vals, grads, w


def evaluate_scalar(space: FeSpace, coeffs: np.ndarray, degree: int = 8):
    """Scalar-field values at quadrature points: (points, values, weights)."""
    tab = tabulate(space, degree)
    vals = (tab.N @ coeffs[space.cell_dofs].T).T
    w = tab.weights[None, :] * tab.det[:, None]
    return tab.points, vals, w


class OperatorSet:
    """All discrete operators for one stable velocity/pressure pair.

    Holds the assembled mass, stiffness, and divergence matrices plus the
    shared scalar pattern through which the convection matrix is rebuilt
    each nonlinear iteration.
    """

    def __init__(self, vel_space: FeSpace, pres_space: FeSpace):
        if (vel_space.kind, pres_space.kind) not in _STABLE_PAIRS:
            raise AssemblyError(
                f"incompatible pair ({vel_space.kind}, {pres_space.kind})"
            )
        self.vel_space = vel_space
        self.pres_space = pres_space
        self.pattern = _pattern(vel_space)
        self.M_scalar = mass_scalar(vel_space)
        self.A_scalar = stiffness_scalar(vel_space)
        self.M = _vector_expand(vel_space, self.M_scalar)
        self.A = _vector_expand(vel_space, self.A_scalar)
        self.B = assemble_divergence(vel_space, pres_space)
        self.pressure_mass = _vector_expand(pres_space, mass_scalar(pres_space))
        self.pressure_weights = pressure_weights(pres_space)

    def convection_data(self, w: np.ndarray) -> np.ndarray:
        """Scalar convection values aligned with the shared pattern."""
        return self.pattern.scatter(convection_local(self.vel_space, w))

    def convection(self, w: np.ndarray) -> sp.csr_matrix:
        return _vector_expand(
            self.vel_space, self.pattern.matrix(self.convection_data(w))
        )

    def load(self, f, t: float) -> np.ndarray:
        return assemble_load(self.vel_space, f, t)

    def velocity_l2(self, U: np.ndarray) -> float:
        return float(np.sqrt(max(U @ (self.M @ U), 0.0)))

    def velocity_h1_semi(self, U: np.ndarray) -> float:
        return float(np.sqrt(max(U @ (self.A @ U), 0.0)))

    def pressure_l2(self, P: np.ndarray) -> float:
        """Pressure L2 norm after removing the area-weighted mean."""
        mean = self.pressure_weights @ P  # domain area is 1
        Q = P - mean
        return float(np.sqrt(max(Q @ (self.pressure_mass @ Q), 0.0)))
