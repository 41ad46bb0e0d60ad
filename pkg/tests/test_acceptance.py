"""Acceptance criteria for the solver and study harness.

Each test prints one pass/fail line.  Criterion 7's decay bullet is a
known honest failure: the memory kernel returns stored energy, so the
plain L2 norm of the unforced solution is not monotone (verified against
an independent method-of-lines integration; details in the README).  The
provable energy statements are covered by the unit suite.

Run with `pytest tests/test_acceptance.py -v -s` to see the report lines.
Full runtime is dominated by the three n=32 sweeps (several minutes each).
"""

import math

import numpy as np
import pytest

from oldroyd_fem import (
    ModelParams,
    StudyConfig,
    TimeStepper,
    assemble_convection,
    build_space,
    build_unit_square_mesh,
    manufactured_case,
    run,
    run_longtime_study,
    run_spatial_study,
    run_stability_study,
    run_temporal_study,
)
from oldroyd_fem.assembly import OperatorSet
from oldroyd_fem.manufactured import forcing as mk_forcing

pytestmark = pytest.mark.acceptance

REF_ERRORS_P2P0 = {  # expected error magnitudes (l2, h1, p), smooth case
    8: (0.00386700, 0.15057567, 0.17021691),
    16: (0.00104657, 0.07849371, 0.08591565),
    32: (0.00026335, 0.03939885, 0.04246851),
}
REF_ERRORS_MINI = {  # expected velocity error magnitudes (l2, h1), smooth case
    8: (0.00172068, 0.04302980),
    16: (0.00045020, 0.02212674),
    32: (0.00009954, 0.01037882),
}
REF_SUP_L2 = 0.04066058  # expected sup ||U^n||_L2 at h=1/10, k=0.1, P2-P0


def _report(tag, ok, detail):
    print(f"[acceptance {tag}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


@pytest.fixture(scope="module")
def spatial_smooth_p2p0():
    return run_spatial_study(StudyConfig(
        study="spatial", example=1, element="p2p0", levels=(8, 16, 32),
        T=(1.0,), mu=1.0, gamma=0.1, delta=0.1,
    ))


@pytest.fixture(scope="module")
def spatial_smooth_mini():
    return run_spatial_study(StudyConfig(
        study="spatial", example=1, element="mini", levels=(8, 16, 32),
        T=(1.0,), mu=1.0, gamma=0.1, delta=0.1,
    ))


@pytest.fixture(scope="module")
def spatial_nonsmooth_p2p0():
    return run_spatial_study(StudyConfig(
        study="spatial", example=2, element="p2p0", levels=(4, 8, 16, 32),
        T=(1.0,), mu=1.0, gamma=0.1, delta=1.0,
    ))


@pytest.fixture(scope="module")
def temporal_tables():
    ks = (1 / 4, 1 / 16, 1 / 64, 1 / 256)
    out = {}
    for element in ("p2p0", "mini"):
        out[element] = run_temporal_study(StudyConfig(
            study="temporal", example=2, element=element, k_rule="list",
            k_list=ks, T=(1.0,), mu=1.0, gamma=0.1, delta=0.1,
        ))
    return out


@pytest.fixture(scope="module")
def longtime_result():
    return run_longtime_study(StudyConfig(
        study="longtime", example=2, element="p2p0", levels=(4, 8, 16),
        k_list=(0.1,), T=(10.0, 20.0), mu=1.0, gamma=0.1, delta=1.0,
    ))


@pytest.fixture(scope="module")
def stability_table():
    return run_stability_study(StudyConfig(
        study="stability", example=2, element="p2p0", levels=(10, 20),
        k_list=(0.1, 0.5, 1.0, 1.3), T=(5.0,), mu=1.0, gamma=0.1, delta=1.0,
    ))


def _rates(table, col):
    return [getattr(r, col) for r in table.rows if getattr(r, col) is not None]


def test_criterion_1_spatial_convergence_smooth(spatial_smooth_p2p0):
    table = spatial_smooth_p2p0
    l2r = _rates(table, "l2_rate")
    h1r = _rates(table, "h1_rate")
    pr = _rates(table, "p_rate")
    ok = all(r >= 1.80 for r in l2r)
    ok &= all(0.85 <= r <= 1.15 for r in h1r)
    ok &= all(0.85 <= r <= 1.20 for r in pr)
    for row in table.rows:
        ref = REF_ERRORS_P2P0[round(1 / row.resolution)]
        for got, want in zip((row.l2_err, row.h1_err, row.p_err), ref):
            ok &= want / 3 <= got <= want * 3
    detail = (
        f"L2 rates {[f'{r:.2f}' for r in l2r]}, H1 {[f'{r:.2f}' for r in h1r]}, "
        f"p {[f'{r:.2f}' for r in pr]}; L2 at h=1/16: {table.rows[1].l2_err:.5e} "
        f"(reference 1.04657e-03)"
    )
    assert _report("1 spatial smooth P2-P0", ok, detail), detail


def test_criterion_2_spatial_convergence_mini(spatial_smooth_mini):
    table = spatial_smooth_mini
    l2r = _rates(table, "l2_rate")
    h1r = _rates(table, "h1_rate")
    ok = all(r >= 1.8 for r in l2r)
    ok &= all(0.85 <= r <= 1.25 for r in h1r)
    for row in table.rows:
        l2_ref, h1_ref = REF_ERRORS_MINI[round(1 / row.resolution)]
        ok &= l2_ref / 5 <= row.l2_err <= l2_ref * 5
        ok &= h1_ref / 5 <= row.h1_err <= h1_ref * 5
    detail = (
        f"L2 rates {[f'{r:.2f}' for r in l2r]}, H1 {[f'{r:.2f}' for r in h1r]}; "
        f"L2 at h=1/16: {table.rows[1].l2_err:.5e} (reference 4.50200e-04)"
    )
    assert _report("2 spatial smooth MINI", ok, detail), detail


def test_criterion_3_spatial_convergence_nonsmooth(spatial_nonsmooth_p2p0):
    table = spatial_nonsmooth_p2p0
    l2r = _rates(table, "l2_rate")
    h1r = _rates(table, "h1_rate")
    pr = _rates(table, "p_rate")
    ok = all(r >= 1.8 for r in l2r)
    ok &= all(0.85 <= r <= 1.15 for r in h1r)
    ok &= all(0.85 <= r <= 1.15 for r in pr)
    detail = (
        f"L2 rates {[f'{r:.2f}' for r in l2r]}, H1 {[f'{r:.2f}' for r in h1r]}, "
        f"p {[f'{r:.2f}' for r in pr]}"
    )
    assert _report("3 spatial nonsmooth P2-P0", ok, detail), detail


def test_criterion_4_temporal_convergence(temporal_tables):
    finals = {}
    ok = True
    for element, table in temporal_tables.items():
        rate = _rates(table, "l2_rate")[-1]
        finals[element] = rate
        ok &= 0.85 <= rate <= 1.15
    detail = f"final temporal L2 rates: " + ", ".join(
        f"{el}={r:.4f}" for el, r in finals.items()
    )
    assert _report("4 temporal both elements", ok, detail), detail


def test_criterion_5_uniform_in_time_accuracy(longtime_result):
    ok = True
    rate_sets = {}
    for T, table in longtime_result.tables:
        rates = _rates(table, "l2_rate")
        rate_sets[T] = rates
        ok &= all(1.6 <= r <= 2.4 for r in rates)
    pairs = list(rate_sets.values())
    diffs = [abs(a - b) for a, b in zip(pairs[0], pairs[1])]
    ok &= all(d < 0.2 for d in diffs)
    ok &= longtime_result.rates_stable
    detail = (
        f"L2 rates T=10: {[f'{r:.2f}' for r in rate_sets[10.0]]}, "
        f"T=20: {[f'{r:.2f}' for r in rate_sets[20.0]]}, "
        f"max horizon diff {max(diffs):.3f}"
    )
    assert _report("5 longtime accuracy", ok, detail), detail


def test_criterion_6_long_time_stability(stability_table):
    rows = stability_table.rows
    ok = all(r.status == "ok" for r in rows)
    ok &= all(
        np.isfinite([r.sup_u_l2, r.sup_u_h1, r.sup_p_l2]).all() for r in rows
    )
    anchor = next(r for r in rows if r.h == 0.1 and r.k == 0.1)
    ok &= REF_SUP_L2 / 2 <= anchor.sup_u_l2 <= REF_SUP_L2 * 2
    detail = (
        f"all {len(rows)} cells finite up to k=1.3; sup L2 at (1/10, 0.1) = "
        f"{anchor.sup_u_l2:.6f} (reference {REF_SUP_L2})"
    )
    assert _report("6 stability sweep", ok, detail), detail


# --------------------------------------------------------------------------
# criterion 7: always-on property suites
# --------------------------------------------------------------------------

def test_criterion_7a_quadrature_positivity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        gamma, delta, k = rng.uniform(1e-3, 2.0, size=3)
        phi = rng.standard_normal(n)
        decay = np.exp(-delta * k * np.arange(n))
        L = np.tril(decay[np.abs(np.subtract.outer(np.arange(n), np.arange(n)))])
        total = k * k * gamma * phi @ (L @ phi)
        scale = k * k * gamma * float(phi @ phi)
        worst = min(worst, total / scale)
        assert total >= -1e-12 * scale
    assert _report("7a kernel quadrature positivity", True,
                   f"1000 random sequences, min normalized value {worst:.2e}")


def test_criterion_7b_recursion_equals_direct_sum():
    from oldroyd_fem import MemoryAccumulator, accumulator_update, direct_quadrature

    rng = np.random.default_rng(11)
    k, gamma, delta = 0.03, 0.8, 1.1
    params = ModelParams(1.0, gamma, delta)
    history = rng.standard_normal((1000, 16))
    acc = MemoryAccumulator.zeros(16, k, params)
    for u in history:
        acc = accumulator_update(acc, u)
    direct = direct_quadrature(list(history), k, gamma, delta)
    dev = np.max(np.abs(acc.value - direct)) / max(np.max(np.abs(direct)), 1e-30)
    ok = dev <= 1e-12
    assert _report("7b memory recursion vs direct sum", ok,
                   f"history length 1000, max relative deviation {dev:.2e}"), dev


def test_criterion_7c_convection_skew_symmetry():
    rng = np.random.default_rng(13)
    mesh = build_unit_square_mesh(6)
    vel = build_space(mesh, "velocity-P2")
    interior = np.setdiff1d(np.arange(vel.ndof), vel.boundary_dofs)
    worst = 0.0
    N = assemble_convection(vel, rng.standard_normal(vel.ndof))
    for _ in range(20):
        v = np.zeros(vel.ndof)
        v[interior] = rng.standard_normal(len(interior))
        scale = max(float(np.abs(N).max() * (v @ v)), 1.0)
        worst = max(worst, abs(v @ (N @ v)) / scale)
    ok = worst <= 1e-12
    assert _report("7c convection skew symmetry", ok,
                   f"max |v^T N(w) v| / scale = {worst:.2e}"), worst


def test_criterion_7d_pde_residual():
    from scipy.integrate import quad
    from oldroyd_fem import eval_exact

    rng = np.random.default_rng(17)
    params = ModelParams(1.0, 0.3, 0.7)
    worst = 0.0
    for case in (manufactured_case(1), manufactured_case(2)):
        for _ in range(10):
            x, y = 0.1 + 0.8 * rng.random(2)
            t = 0.1 + 1.9 * rng.random()
            u, gu, lu, _, gp = eval_exact(case, x, y, t)
            u_t = case.g_prime(t) * case.spatial_velocity(x, y)
            lap_spatial = case.spatial_laplacian(x, y)
            memory = np.array([
                quad(lambda s: params.gamma * math.exp(-params.delta * (t - s))
                     * case.g(s) * lap_spatial[d], 0.0, t,
                     epsabs=1e-12, epsrel=1e-12)[0]
                for d in range(2)
            ])
            f = mk_forcing(case, params, x, y, t)
            resid = u_t + gu @ u - params.mu * lu - memory + gp - f
            worst = max(worst, float(np.max(np.abs(resid))))
    ok = worst <= 1e-8
    assert _report("7d manufactured PDE residual", ok,
                   f"20 random space-time points, max residual {worst:.2e}"), worst


def test_criterion_7e_divergence_and_pressure_mean_along_run():
    mesh = build_unit_square_mesh(4)
    vel = build_space(mesh, "velocity-MINI")
    pres = build_space(mesh, "pressure-P1")
    params = ModelParams(1.0, 0.1, 0.1)
    case = manufactured_case(1)
    ops = OperatorSet(vel, pres)
    stepper = TimeStepper(vel, pres, params, k=0.01)
    state = stepper.initial_state(case.initial_velocity)
    f = lambda x, y, t: mk_forcing(case, params, x, y, t)
    worst_div, worst_mean = 0.0, 0.0
    for _ in range(50):
        state, _ = stepper.step(state, f)
        worst_div = max(worst_div, float(np.max(np.abs(ops.B @ state.U))))
        worst_mean = max(worst_mean, abs(float(ops.pressure_weights @ state.P)))
    ok = worst_div <= 1e-9 and worst_mean <= 1e-12
    assert _report(
        "7e discrete divergence / pressure mean", ok,
        f"50 steps: max |B U| = {worst_div:.2e}, max |mean p| = {worst_mean:.2e}",
    ), (worst_div, worst_mean)


def test_criterion_7f_decay_monotonicity():
    """Literal criterion: f = 0, smooth-case initial data, gamma = 0.1 ->
    ||U^n||_L2 non-increasing.

    Known honest FAIL: the criterion as stated does not hold for this
    model.  The memory kernel returns stored energy, so the exact dynamics
    rebounds after the fast transient; an independent method-of-lines
    integration shows the same dip-and-rise.  The provable statements
    (sup_n ||U^n|| <= ||U^0||; monotone decay of the memory-weighted
    energy) are asserted green in the unit suite.
    """
    mesh = build_unit_square_mesh(8)
    vel = build_space(mesh, "velocity-P2")
    pres = build_space(mesh, "pressure-P0")
    params = ModelParams(1.0, 0.1, 0.1)
    case = manufactured_case(1)
    stepper = TimeStepper(vel, pres, params, k=0.02)
    init = stepper.initial_state(case.initial_velocity)
    state, log = run(vel, pres, params, k=0.02, T=1.0,
                     u0=case.initial_velocity)
    norms = [stepper.ops.velocity_l2(init.U)] + [r.l2_norm for r in log]
    rises = [
        (i, a, b) for i, (a, b) in enumerate(zip(norms, norms[1:]))
        if b > a * (1.0 + 1e-12)
    ]
    ok = not rises
    detail = (
        "L2 norm non-increasing over 50 unforced steps"
        if ok else
        f"norm rebounds (first rise at step {rises[0][0] + 1}: "
        f"{rises[0][1]:.3e} -> {rises[0][2]:.3e}); known model behavior, "
        "see README and the unit-suite energy test"
    )
    assert _report("7f decay monotonicity", ok, detail), detail
