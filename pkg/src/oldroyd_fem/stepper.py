"""Fully discrete backward Euler time stepping for the memory-damped flow.

Each step solves the nonlinear saddle-point system by Picard iteration on
the transport field, treating the current-step kernel weight implicitly
(folded into the matrix as k*gamma times the stiffness) and the
accumulated history explicitly on the right-hand side; that split is an
exact rearrangement of the right-rectangle memory quadrature, not an
approximation.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import OperatorSet, assemble_load, evaluate_scalar, evaluate_velocity
from .elements import FeSpace
from .memory_term import MemoryAccumulator, ModelParams, accumulator_update
from .sparselinalg import Factorization, LinearSolverError, SaddleSystem

logger = logging.getLogger(__name__)

DIVERGENCE_TOL = 1e-9


class StepperError(RuntimeError):
    """A time step could not be completed."""


class PicardDivergenceError(StepperError):
    """Picard iteration exceeded its budget; carries the last increment."""

    def __init__(self, step_index: int, iterations: int, last_increment: float):
        self.step_index = step_index
        self.iterations = iterations
        self.last_increment = last_increment
        super().__init__(
            f"Picard iteration did not converge at step {step_index}: "
            f"{iterations} iterations, last relative increment {last_increment:.3e}"
        )


@dataclass(frozen=True)
class SolveControls:
    """Nonlinear and linear solve tolerances."""

    picard_tol: float = 1e-10
    picard_max: int = 50
    linear_tol: float = 1e-10

    def __post_init__(self):
        if self.picard_tol <= 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.picard_max < 1:
            raise ValueError("picard_max must be at least 1")


@dataclass(frozen=True)
class MonitorRecord:
    """Per-step stability monitor entry."""

    n: int
    t: float
    l2_norm: float
    h1_seminorm: float
    memory_h1_seminorm: float
    picard_iters: int
    pressure_l2: float


@dataclass
class StepperState:
    """Discrete solution at one time level."""

    n: int
    t: float
    U: np.ndarray
    P: np.ndarray
    acc: MemoryAccumulator


class TimeStepper:
    """Backward Euler stepper for one mixed pair, one step size, one model.

    The saddle matrix pattern, its Dirichlet elimination, and the symbolic
    factorization are prepared once; every Picard iteration of every step
    refreshes the convection values on that fixed pattern and refactorizes.
    """

    def __init__(self, vel_space: FeSpace, pres_space: FeSpace,
                 params: ModelParams, k: float,
                 controls: SolveControls | None = None):
        if k <= 0:
            raise ValueError(f"time step must be positive, got {k}")
        self.params = params
        self.k = float(k)
        self.controls = controls or SolveControls()
        self.ops = OperatorSet(vel_space, pres_space)
        self.vel_space = vel_space
        self.pres_space = pres_space
        self._build_system()
        self._symbolic = None

    # -- system structure ---------------------------------------------------

    def _build_system(self):
        ops = self.ops
        ns = self.vel_space.scalar_ndof
        nv = self.vel_space.ndof
        npres = self.pres_space.scalar_ndof
        k, prm = self.k, self.params

        scalar_const = (1.0 / k) * ops.M_scalar + (prm.mu + k * prm.gamma) * ops.A_scalar
        Kc = sp.block_diag([scalar_const, scalar_const], format="csr")
        # explicit structural zeros keep every pressure diagonal addressable
        Z = sp.csr_matrix(
            (np.zeros(npres), (np.arange(npres), np.arange(npres))),
            shape=(npres, npres),
        )
        S = sp.bmat([[Kc, -ops.B.T], [ops.B, Z]], format="csr")
        S.sort_indices()
        ntot = S.shape[0]

        fixed = np.concatenate([self.vel_space.boundary_dofs, [nv]])  # pin p_0
        keep = np.ones(ntot)
        keep[fixed] = 0.0
        entry_rows = np.repeat(np.arange(ntot), np.diff(S.indptr))
        S.data *= keep[entry_rows]
        row_key = entry_rows * ntot + S.indices
        diag_pos = np.searchsorted(row_key, fixed * ntot + fixed)
        assert np.array_equal(row_key[diag_pos], fixed * ntot + fixed)
        S.data[diag_pos] = 1.0

        Sc = S.tocsc()
        Sc.sort_indices()
        col_of = np.repeat(np.arange(ntot), np.diff(Sc.indptr))
        csc_key = col_of * ntot + Sc.indices

        pat = ops.pattern
        interior = np.ones(ns, dtype=bool)
        interior[self.vel_space.boundary_scalar_dofs] = False
        keep_s = interior[pat.entry_rows]
        r_kept = pat.entry_rows[keep_s]
        c_kept = pat.indices[keep_s]
        maps = []
        for d in range(2):
            key = (c_kept + d * ns) * ntot + (r_kept + d * ns)
            pos = np.searchsorted(csc_key, key)
            assert np.array_equal(csc_key[pos], key)
            maps.append(pos)

        self._S0 = Sc
        self._conv_keep = keep_s
        self._conv_maps = maps
        self._fixed = fixed
        self._rhs_keep = keep
        self._nv, self._npres, self._ntot = nv, npres, ntot

    def _factorize(self, conv_data: np.ndarray) -> Factorization:
        data = self._S0.data.copy()
        kept = conv_data[self._conv_keep]
        data[self._conv_maps[0]] += kept
        data[self._conv_maps[1]] += kept
        A = sp.csc_matrix(
            (data, self._S0.indices, self._S0.indptr), shape=self._S0.shape
        )
        fact = Factorization(A, self._symbolic)
        if self._symbolic is None:
            self._symbolic = fact.symbolic
        return fact

    # -- initialization -----------------------------------------------------

    def initial_state(self, u0=None) -> StepperState:
        """State at t = 0 with the velocity projected onto the discretely
        divergence-free space (constrained L2 projection)."""
        nv = self._nv
        if u0 is None:
            U0 = np.zeros(nv)
        else:
            U0, _ = project_initial_velocity(self.vel_space, self.pres_space, u0,
                                             ops=self.ops)
        acc = MemoryAccumulator.zeros(nv, self.k, self.params)
        return StepperState(0, 0.0, U0, np.zeros(self._npres), acc)

    # -- single step ----------------------------------------------------------

    def step(self, state: StepperState, f=None) -> tuple[StepperState, MonitorRecord]:
        """Advance one step; forcing f is evaluated at the new time level."""
        ops, k = self.ops, self.k
        t_new = state.t + k
        n_new = state.n + 1
        nv = self._nv

        load = ops.load(f, t_new) if f is not None else np.zeros(nv)
        rhs_v = ops.M @ (state.U / k) + load \
            - math.exp(-self.params.delta * k) * (ops.A @ state.acc.value)
        rhs = np.concatenate([rhs_v, np.zeros(self._npres)])
        rhs *= self._rhs_keep

        guess = state.U
        U_new = guess
        P_new = state.P
        rel = np.inf
        iters = 0
        for m in range(1, self.controls.picard_max + 1):
            iters = m
            try:
                fact = self._factorize(ops.convection_data(guess))
                sol = fact.solve(rhs)
            except LinearSolverError as exc:
                raise StepperError(f"linear solve failed at step {n_new}: {exc}") from exc
            U_new = sol[:nv]
            P_new = sol[nv:]
            inc = ops.velocity_l2(U_new - guess)
            rel = inc / max(ops.velocity_l2(U_new), 1e-300)
            guess = U_new
            if rel <= self.controls.picard_tol:
                break
        else:
            raise PicardDivergenceError(n_new, self.controls.picard_max, rel)
        if iters > 10:
            logger.warning("step %d: Picard used %d iterations", n_new, iters)

        P_new = P_new - (ops.pressure_weights @ P_new)  # area-weighted zero mean
        div_inf = np.abs(ops.B @ U_new).max() if ops.B.shape[0] else 0.0
        if div_inf > DIVERGENCE_TOL:
            raise StepperError(
                f"discrete divergence {div_inf:.2e} exceeds {DIVERGENCE_TOL:.0e} "
                f"at step {n_new}"
            )

        acc_new = accumulator_update(state.acc, U_new)
        record = MonitorRecord(
            n=n_new,
            t=t_new,
            l2_norm=ops.velocity_l2(U_new),
            h1_seminorm=ops.velocity_h1_semi(U_new),
            memory_h1_seminorm=ops.velocity_h1_semi(acc_new.value),
            picard_iters=iters,
            pressure_l2=ops.pressure_l2(P_new),
        )
        new_state = StepperState(n_new, t_new, U_new, P_new, acc_new)
        return new_state, record

    def monitor(self, state: StepperState, picard_iters: int = 0) -> MonitorRecord:
        ops = self.ops
        return MonitorRecord(
            n=state.n,
            t=state.t,
            l2_norm=ops.velocity_l2(state.U),
            h1_seminorm=ops.velocity_h1_semi(state.U),
            memory_h1_seminorm=ops.velocity_h1_semi(state.acc.value),
            picard_iters=picard_iters,
            pressure_l2=ops.pressure_l2(state.P),
        )


def project_initial_velocity(vel_space: FeSpace, pres_space: FeSpace, u0,
                             ops: OperatorSet | None = None):
    """Constrained L2 projection of u0 onto the discretely divergence-free space.

    Solves M U + B^T lambda = (u0, phi), B U = 0 and returns (U, lambda).
    """
    ops = ops or OperatorSet(vel_space, pres_space)
    rhs_v = assemble_load(vel_space, u0, 0.0)
    system = SaddleSystem(
        A_vv=ops.M,
        B=ops.B,
        rhs_v=rhs_v,
        pressure_weights=ops.pressure_weights,
        dirichlet_dofs=vel_space.boundary_dofs,
        constraint="pin",
    )
    S, b = system.assemble()
    sol = Factorization(S).solve(b)
    nv = vel_space.ndof
    U0, lam = sol[:nv], sol[nv:]
    div_inf = np.abs(ops.B @ U0).max() if ops.B.shape[0] else 0.0
    if div_inf > DIVERGENCE_TOL:
        raise StepperError(
            f"initial projection violates the divergence constraint: {div_inf:.2e}"
        )
    return U0, lam


def run(vel_space: FeSpace, pres_space: FeSpace, params: ModelParams,
        k: float, T: float, controls: SolveControls | None = None,
        case=None, forcing_fn=None, u0=None, stepper: TimeStepper | None = None):
    """Run the scheme from t = 0 to t = T = N*k.

    The source is either a manufactured case (exact solution object whose
    synthesized forcing and initial data are used) or a raw forcing
    callable plus optional initial velocity.  Returns the final state and
    the monitor log with one record per executed step.
    """
    if case is not None and forcing_fn is not None:
        raise ValueError("give either a manufactured case or a raw forcing, not both")
    N = T / k
    if abs(N - round(N)) > 1e-9 * max(1.0, abs(N)):
        raise ValueError(f"final time T={T} is not an integer multiple of k={k}")
    N = int(round(N))

    if case is not None:
        from .manufactured import forcing as manufactured_forcing

        f = lambda x, y, t: manufactured_forcing(case, params, x, y, t)
        u0 = case.initial_velocity if u0 is None else u0
    else:
        f = forcing_fn

    stepper = stepper or TimeStepper(vel_space, pres_space, params, k, controls)
    state = stepper.initial_state(u0)
    log: list[MonitorRecord] = []
    for n in range(N):
        try:
            state, record = stepper.step(state, f)
        except StepperError:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise StepperError(f"step {n + 1} failed: {exc}") from exc
        log.append(record)
    return state, log


def error_norms(vel_space: FeSpace, pres_space: FeSpace,
                U: np.ndarray, P: np.ndarray, exact, t: float):
    """(velocity L2, velocity H1, pressure L2) errors against an exact solution.

    Uses element-wise degree-8 quadrature; the H1 error is the full norm;
    the pressure error removes the area-weighted mean from both fields.
    `exact` must expose velocity(x, y, t), velocity_gradient(x, y, t), and
    pressure(x, y, t).
    """
    pts, vals, grads, w = evaluate_velocity(vel_space, U, 8)
    x, y = pts[..., 0], pts[..., 1]
    du = vals - exact.velocity(x, y, t)
    dg = grads - exact.velocity_gradient(x, y, t)
    l2_sq = float(np.einsum("cq,cqd,cqd->", w, du, du))
    h1_sq = l2_sq + float(np.einsum("cq,cqij,cqij->", w, dg, dg))

    pts_p, pvals, wp = evaluate_scalar(pres_space, P, 8)
    pe = exact.pressure(pts_p[..., 0], pts_p[..., 1], t)
    area = float(wp.sum())
    dp = (pvals - float(np.sum(wp * pvals)) / area) - (pe - float(np.sum(wp * pe)) / area)
    p_sq = float(np.sum(wp * dp * dp))
    return math.sqrt(max(l2_sq, 0.0)), math.sqrt(max(h1_sq, 0.0)), math.sqrt(max(p_sq, 0.0))


def write_monitor_csv(log, path):
    """Monitor log as CSV: n, t, l2_norm, h1_seminorm, memory_h1_seminorm, picard_iters."""
    lines = ["n,t,l2_norm,h1_seminorm,memory_h1_seminorm,picard_iters"]
    for r in log:
        lines.append(
            f"{r.n},{r.t:.10g},{r.l2_norm:.10e},{r.h1_seminorm:.10e},"
            f"{r.memory_h1_seminorm:.10e},{r.picard_iters}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
