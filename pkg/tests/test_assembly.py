"""Operator assembly: closed-form locals, quadrature oracles, and the
skew-symmetric convection structure."""

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.linalg import eigh

from oldroyd_fem import (
    ModelParams,
    assemble_convection,
    assemble_divergence,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    build_space,
    build_unit_square_mesh,
    interpolate,
    manufactured_case,
)
from oldroyd_fem.assembly import (
    AssemblyError,
    OperatorSet,
    _local_mass,
    _local_stiffness,
    convection_local,
    evaluate_velocity,
    mass_scalar,
    stiffness_scalar,
)
from oldroyd_fem.elements import quadrature_rule, tabulate
from oldroyd_fem.manufactured import forcing
from oldroyd_fem.mesh import Mesh


def reference_triangle_mesh() -> Mesh:
    """Single-cell mesh consisting of the reference triangle itself."""
    return Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        cells=np.array([[0, 1, 2]]),
        edges=np.array([[1, 2], [0, 2], [0, 1]]),
        cell_edges=np.array([[0, 1, 2]]),
        edge_cells=np.array([[0, -1]] * 3),
        boundary_vertex_flags=np.ones(3, dtype=bool),
        boundary_edge_flags=np.ones(3, dtype=bool),
        h=np.sqrt(2.0),
    )


class TestMass:
    def test_p1_local_closed_form(self):
        space = build_space(reference_triangle_mesh(), "pressure-P1")
        local = _local_mass(space)[0]
        T = 0.5
        expect = (T / 12.0) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]], dtype=float)
        assert np.max(np.abs(local - expect)) <= 1e-15

    def test_total_area_per_component(self, spaces_p2p0_n4):
        vel, _ = spaces_p2p0_n4
        Ms = mass_scalar(vel)
        ones = np.ones(vel.scalar_ndof)
        assert ones @ (Ms @ ones) == pytest.approx(1.0, abs=1e-13)

    def test_p2_local_vs_degree8_oracle(self):
        space = build_space(reference_triangle_mesh(), "velocity-P2")
        local = _local_mass(space)[0]
        rule = quadrature_rule(8)
        N = space.element.values(rule.xy)
        oracle = np.einsum("q,qi,qj->ij", rule.weights, N, N)
        assert np.max(np.abs(local - oracle)) <= 1e-13

    def test_symmetric_positive_definite(self, spaces_mini_n4):
        vel, _ = spaces_mini_n4
        M = assemble_mass(vel)
        assert np.max(np.abs((M - M.T).toarray())) <= 1e-14
        interior = np.setdiff1d(np.arange(vel.ndof), vel.boundary_dofs)
        eigs = np.linalg.eigvalsh(M.toarray()[np.ix_(interior, interior)])
        assert eigs.min() > 0


class TestStiffness:
    def test_p1_unit_triangle_closed_form(self):
        space = build_space(reference_triangle_mesh(), "pressure-P1")
        local = _local_stiffness(space)[0]
        expect = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]], dtype=float)
        assert np.max(np.abs(local - expect)) <= 1e-15

    def test_annihilates_constants(self, spaces_p2p0_n4):
        vel, _ = spaces_p2p0_n4
        A = assemble_stiffness(vel)
        const = np.ones(vel.ndof)
        assert np.max(np.abs(A @ const)) <= 1e-13
        assert np.max(np.abs((A - A.T).toarray())) <= 1e-14

    def test_dirichlet_eigenvalue_oracle(self):
        # smallest generalized eigenvalue of (A, M) on interior dofs
        # approximates the first Dirichlet Laplacian eigenvalue 2*pi^2
        mesh = build_unit_square_mesh(8)
        vel = build_space(mesh, "velocity-P2")
        As, Ms = stiffness_scalar(vel), mass_scalar(vel)
        interior = np.setdiff1d(
            np.arange(vel.scalar_ndof), vel.boundary_scalar_dofs
        )
        ix = np.ix_(interior, interior)
        lam = eigh(
            As.toarray()[ix], Ms.toarray()[ix],
            subset_by_index=[0, 0], eigvals_only=True,
        )[0]
        assert lam == pytest.approx(2 * np.pi**2, rel=0.05)


class TestDivergence:
    def test_constant_field_divergence_free(self, spaces_p2p0_n4):
        vel, pres = spaces_p2p0_n4
        B = assemble_divergence(vel, pres)
        const = interpolate(vel, lambda x, y, t: np.stack(
            [np.full_like(x, 2.0), np.full_like(x, -3.0)], axis=-1))
        assert np.max(np.abs(B @ const)) <= 1e-13

    def test_linear_divergence_free_field(self, spaces_p2p0_n4):
        vel, pres = spaces_p2p0_n4
        B = assemble_divergence(vel, pres)
        u = interpolate(vel, lambda x, y, t: np.stack([x, -y], axis=-1))
        assert np.max(np.abs(B @ u)) <= 1e-13

    def test_unit_divergence_gives_cell_areas(self, spaces_p2p0_n4):
        vel, pres = spaces_p2p0_n4
        B = assemble_divergence(vel, pres)
        u = interpolate(vel, lambda x, y, t: np.stack([x, np.zeros_like(y)], axis=-1))
        assert np.allclose(B @ u, np.full(pres.ndof, 1.0 / 32), atol=1e-14)

    def test_incompatible_pair_rejected(self, mesh4):
        vel = build_space(mesh4, "velocity-P2")
        p1 = build_space(mesh4, "pressure-P1")
        with pytest.raises(AssemblyError):
            assemble_divergence(vel, p1)


class TestConvection:
    def test_skew_symmetry_random_fields(self, spaces_p2p0_n4, rng):
        vel, _ = spaces_p2p0_n4
        interior = np.setdiff1d(np.arange(vel.ndof), vel.boundary_dofs)
        w = rng.standard_normal(vel.ndof)
        N = assemble_convection(vel, w)
        for _ in range(20):
            v = np.zeros(vel.ndof)
            v[interior] = rng.standard_normal(len(interior))
            quad_form = v @ (N @ v)
            scale = max(float(np.abs(N).max() * (v @ v)), 1.0)
            assert abs(quad_form) <= 1e-12 * scale

    def test_zero_transport_gives_zero(self, spaces_mini_n4):
        vel, _ = spaces_mini_n4
        N = assemble_convection(vel, np.zeros(vel.ndof))
        assert N.nnz == 0 or np.max(np.abs(N.data)) == 0.0

    def test_single_cell_against_degree8_oracle(self, rng):
        space = build_space(reference_triangle_mesh(), "velocity-P2")
        w = rng.standard_normal(space.ndof)
        u = rng.standard_normal(space.ndof)
        v = rng.standard_normal(space.ndof)
        Nmat = assemble_convection(space, w)
        value = v @ (Nmat @ u)

        _, wv, _, _ = evaluate_velocity(space, w, degree=8)
        _, uv, ug, _ = evaluate_velocity(space, u, degree=8)
        _, vv, vg, wq = evaluate_velocity(space, v, degree=8)
        # (w . grad u) . v and (w . grad v) . u pointwise
        w_grad_u_v = np.einsum("cqij,cqj,cqi->cq", ug, wv, vv)
        w_grad_v_u = np.einsum("cqij,cqj,cqi->cq", vg, wv, uv)
        oracle = 0.5 * float(np.sum(wq * (w_grad_u_v - w_grad_v_u)))
        assert value == pytest.approx(oracle, abs=1e-12)

    def test_rejects_wrong_layout(self, spaces_p2p0_n4):
        vel, _ = spaces_p2p0_n4
        with pytest.raises(AssemblyError):
            convection_local(vel, np.zeros(vel.ndof + 1))


class TestLoad:
    def test_zero_forcing(self, spaces_p2p0_n4):
        vel, _ = spaces_p2p0_n4
        f = lambda x, y, t: np.zeros(x.shape + (2,))
        assert np.all(assemble_load(vel, f, 0.0) == 0.0)

    def test_unit_forcing_sums_to_area(self, spaces_p2p0_n4):
        vel, _ = spaces_p2p0_n4
        f = lambda x, y, t: np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1)
        load = assemble_load(vel, f, 0.0)
        ns = vel.scalar_ndof
        assert load[:ns].sum() == pytest.approx(1.0, abs=1e-13)
        assert np.max(np.abs(load[ns:])) <= 1e-15

    def test_manufactured_forcing_vs_subdivided_quadrature(self, mesh4):
        vel = build_space(mesh4, "velocity-P2")
        case = manufactured_case(1)
        params = ModelParams(1.0, 0.1, 0.1)
        f = lambda x, y, t: forcing(case, params, x, y, t)
        load = assemble_load(vel, f, 0.0)

        # oracle: same degree-8 rule on each of 4 sub-triangles per cell
        rule = quadrature_rule(8)
        corners = [
            (np.array([0.0, 0.0]), np.array([0.5, 0.0]), np.array([0.0, 0.5])),
            (np.array([0.5, 0.0]), np.array([1.0, 0.0]), np.array([0.5, 0.5])),
            (np.array([0.0, 0.5]), np.array([0.5, 0.5]), np.array([0.0, 1.0])),
            (np.array([0.5, 0.5]), np.array([0.0, 0.5]), np.array([0.5, 0.0])),
        ]
        from oldroyd_fem.mesh import all_jacobians

        jac, det, _ = all_jacobians(mesh4)
        p0 = mesh4.vertices[mesh4.cells[:, 0]]
        oracle = np.zeros(vel.ndof)
        ns = vel.scalar_ndof
        for a, b, c in corners:
            ref_pts = a + np.outer(rule.xy[:, 0], b - a) + np.outer(rule.xy[:, 1], c - a)
            N = vel.element.values(ref_pts)
            phys = p0[:, None, :] + np.einsum("cde,qe->cqd", jac, ref_pts)
            fv = f(phys[..., 0], phys[..., 1], 0.0)
            local = np.einsum("q,qi,cqd,c->cid", rule.weights / 4.0, N, fv, det)
            for d in range(2):
                np.add.at(oracle, d * ns + vel.cell_dofs, local[..., d])
        rel = np.linalg.norm(load - oracle) / np.linalg.norm(oracle)
        assert rel <= 1e-9


class TestGalerkinSanity:
    def test_quadratic_poisson_reproduced(self):
        # A u = (-Lap u_exact, phi) with quadratic u_exact reproduces the
        # interpolant through inhomogeneous Dirichlet elimination
        mesh = build_unit_square_mesh(4)
        vel = build_space(mesh, "velocity-P2")
        As = stiffness_scalar(vel)
        tab = tabulate(vel, 8)
        exact = lambda x, y: x * x + x * y - y
        load = np.zeros(vel.scalar_ndof)
        vals = -2.0 * np.ones_like(tab.points[..., 0])  # -Lap(x^2 + xy - y)
        np.add.at(
            load, vel.cell_dofs,
            np.einsum("q,qi,cq,c->ci", tab.weights, tab.N, vals, tab.det),
        )
        from oldroyd_fem.elements import _nodal_coordinates

        coords, _ = _nodal_coordinates(vel)
        target = exact(coords[:, 0], coords[:, 1])
        interior = np.setdiff1d(np.arange(vel.scalar_ndof), vel.boundary_scalar_dofs)
        bnd = vel.boundary_scalar_dofs
        rhs = load[interior] - As[np.ix_(interior, bnd)] @ target[bnd]
        sol = np.linalg.solve(As[np.ix_(interior, interior)].toarray(), rhs)
        assert np.max(np.abs(sol - target[interior])) <= 1e-10


class TestOperatorSet:
    def test_pressure_weights_sum_to_area(self, spaces_p2p0_n4, spaces_mini_n4):
        for vel, pres in (spaces_p2p0_n4, spaces_mini_n4):
            ops = OperatorSet(vel, pres)
            assert ops.pressure_weights.sum() == pytest.approx(1.0, abs=1e-13)

    def test_convection_matrix_matches_module_function(self, spaces_mini_n4, rng):
        vel, pres = spaces_mini_n4
        ops = OperatorSet(vel, pres)
        w = rng.standard_normal(vel.ndof)
        direct = assemble_convection(vel, w)
        via_ops = ops.convection(w)
        assert np.max(np.abs((direct - via_ops).toarray())) <= 1e-15

    def test_rejects_incompatible_pair(self, mesh4):
        with pytest.raises(AssemblyError):
            OperatorSet(
                build_space(mesh4, "velocity-MINI"),
                build_space(mesh4, "pressure-P0"),
            )
