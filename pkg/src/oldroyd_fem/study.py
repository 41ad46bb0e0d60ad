"""Convergence and stability studies: sweep resolutions, tabulate rates.

Each study runs the backward Euler solver over a family of meshes or time
steps for one of the two manufactured benchmark flows and reduces the
results to rate tables matching the solver's verification protocol:
spatial sweeps couple k = h^2, temporal sweeps couple h = sqrt(k),
long-horizon sweeps fix k, and the stability sweep records sup-norms over
time for coarse steps up to k = 1.3.
"""

import math
from dataclasses import dataclass

import numpy as np

from .elements import build_space
from .manufactured import forcing as manufactured_forcing
from .manufactured import manufactured_case
from .memory_term import ModelParams
from .mesh import build_unit_square_mesh
from .stepper import SolveControls, TimeStepper, error_norms, run

ELEMENT_PAIRS = {
    "p2p0": ("velocity-P2", "pressure-P0"),
    "mini": ("velocity-MINI", "pressure-P1"),
}


class StudyError(ValueError):
    """Invalid study configuration or a failed study run."""


@dataclass(frozen=True)
class StudyConfig:
    """Knobs of one study run; see the CLI for the matching flags."""

    study: str
    example: int = 1
    element: str = "p2p0"
    levels: tuple = (8, 16, 32)
    k_rule: str = "h2"          # "h2" | "sqrt" | "list"
    k_list: tuple = ()
    T: tuple = (1.0,)           # final times; len > 1 only for longtime
    mu: float = 1.0
    gamma: float = 0.1
    delta: float = 0.1
    out: str | None = None
    picard_tol: float = 1e-10
    picard_max: int = 50

    def __post_init__(self):
        if self.study not in ("spatial", "temporal", "longtime", "stability"):
            raise StudyError(f"unknown study {self.study!r}")
        if self.element not in ELEMENT_PAIRS:
            raise StudyError(f"unknown element {self.element!r}")
        if self.example not in (1, 2):
            raise StudyError(f"unknown example {self.example!r}")
        if self.k_rule not in ("h2", "list"):
            raise StudyError(f"unknown time-step rule {self.k_rule!r}")
        if any(t <= 0 for t in self.T):
            raise StudyError("final times must be positive")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.mu, self.gamma, self.delta)

    @property
    def controls(self) -> SolveControls:
        return SolveControls(picard_tol=self.picard_tol, picard_max=self.picard_max)


@dataclass(frozen=True)
class RateRow:
    resolution: float
    l2_err: float
    l2_rate: float | None
    h1_err: float
    h1_rate: float | None
    p_err: float
    p_rate: float | None


@dataclass(frozen=True)
class RateTable:
    """Errors and successive convergence rates over a resolution sweep."""

    resolution_name: str  # "h" or "k"
    rows: tuple

    header = ("l2_err", "l2_rate", "h1_err", "h1_rate", "p_err", "p_rate")

    def column(self, name):
        return [getattr(r, name) for r in self.rows]


@dataclass(frozen=True)
class StabilityRow:
    h: float
    k: float
    sup_u_l2: float
    sup_u_h1: float
    sup_p_l2: float
    status: str = "ok"


@dataclass(frozen=True)
class StabilityTable:
    rows: tuple


@dataclass(frozen=True)
class LongtimeResult:
    """One rate table per final time plus a cross-horizon stability flag."""

    tables: tuple  # of (T, RateTable)
    rates_stable: bool


def compute_rates(errors, resolutions):
    """Successive observed orders: log(e_prev/e_next) / log(r_prev/r_next)."""
    errors = [float(e) for e in errors]
    resolutions = [float(r) for r in resolutions]
    if len(errors) != len(resolutions):
        raise StudyError("errors and resolutions must have equal length")
    if any(e <= 0 for e in errors):
        raise StudyError("errors must be strictly positive to define rates")
    diffs = np.diff(resolutions)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise StudyError("resolutions must be strictly monotone")
    return [
        math.log(errors[i - 1] / errors[i]) / math.log(resolutions[i - 1] / resolutions[i])
        for i in range(1, len(errors))
    ]


def _rate_table(name, resolutions, errs) -> RateTable:
    l2, h1, pr = (list(c) for c in zip(*errs))
    rates = {
        "l2": [None] + compute_rates(l2, resolutions),
        "h1": [None] + compute_rates(h1, resolutions),
        "p": [None] + compute_rates(pr, resolutions),
    }
    rows = tuple(
        RateRow(res, l2[i], rates["l2"][i], h1[i], rates["h1"][i], pr[i], rates["p"][i])
        for i, res in enumerate(resolutions)
    )
    return RateTable(name, rows)


def _solve_level(cfg: StudyConfig, n: int, k: float, T: float):
    """Run one (mesh, step) combination to T and measure final-time errors."""
    vel_kind, pres_kind = ELEMENT_PAIRS[cfg.element]
    mesh = build_unit_square_mesh(n)
    vel = build_space(mesh, vel_kind)
    pres = build_space(mesh, pres_kind)
    case = manufactured_case(cfg.example)
    state, log = run(vel, pres, cfg.params, k, T, cfg.controls, case=case)
    return error_norms(vel, pres, state.U, state.P, case, state.t), log


def run_spatial_study(cfg: StudyConfig) -> RateTable:
    """Mesh sweep with the k = h^2 coupling, h = 1/n."""
    if cfg.k_rule != "h2":
        raise StudyError("spatial study requires the k = h^2 rule")
    if not cfg.levels:
        raise StudyError("spatial study needs a nonempty level list")
    T = cfg.T[0]
    errs, hs = [], []
    for n in cfg.levels:
        h = 1.0 / n
        try:
            (e, _log) = _solve_level(cfg, n, h * h, T)
        except Exception as exc:
            raise StudyError(f"spatial level n={n} failed: {exc}") from exc
        errs.append(e)
        hs.append(h)
    return _rate_table("h", hs, errs)


def run_temporal_study(cfg: StudyConfig) -> RateTable:
    """Time-step sweep with h = sqrt(k); rates are measured against k."""
    if cfg.k_rule != "list":
        raise StudyError("temporal study requires an explicit k list (h = sqrt(k))")
    ks = list(cfg.k_list)
    if not ks:
        raise StudyError("temporal study needs a nonempty k list")
    if any(k2 >= k1 for k1, k2 in zip(ks, ks[1:])):
        raise StudyError("k list must be strictly decreasing")
    T = cfg.T[0]
    errs = []
    for k in ks:
        n = round(1.0 / math.sqrt(k))
        if abs(n * n * k - 1.0) > 1e-9:
            raise StudyError(f"k={k} does not give an integer mesh size 1/sqrt(k)")
        try:
            (e, _log) = _solve_level(cfg, n, k, T)
        except Exception as exc:
            raise StudyError(f"temporal level k={k} failed: {exc}") from exc
        errs.append(e)
    return _rate_table("k", ks, errs)


def run_longtime_study(cfg: StudyConfig) -> LongtimeResult:
    """Spatial sweeps repeated at several final times with fixed k."""
    if not cfg.T:
        raise StudyError("longtime study needs a nonempty list of final times")
    if not cfg.levels:
        raise StudyError("longtime study needs a nonempty level list")
    k = cfg.k_list[0] if cfg.k_list else 0.1
    tables = []
    for T in cfg.T:
        errs, hs = [], []
        for n in cfg.levels:
            try:
                (e, _log) = _solve_level(cfg, n, k, T)
            except Exception as exc:
                raise StudyError(f"longtime T={T}, n={n} failed: {exc}") from exc
            errs.append(e)
            hs.append(1.0 / n)
        tables.append((T, _rate_table("h", hs, errs)))
    stable = True
    if len(tables) > 1:
        rate_sets = [
            [r.l2_rate for r in tb.rows if r.l2_rate is not None]
            for _, tb in tables
        ]
        for other in rate_sets[1:]:
            if any(abs(a - b) >= 0.2 for a, b in zip(rate_sets[0], other)):
                stable = False
    return LongtimeResult(tuple(tables), stable)


def run_stability_study(cfg: StudyConfig) -> StabilityTable:
    """Sup-norms of the discrete solution over 0 <= t_n <= T per (h, k) cell.

    Steps that do not divide T evenly stop at the last t_n <= T (the k = 1.3
    sweep of the verification protocol needs this).  Per-cell failures are
    recorded and the sweep continues.
    """
    ks = list(cfg.k_list) if cfg.k_list else [0.1, 0.5, 1.0, 1.3]
    levels = cfg.levels or (10, 20, 30, 40)
    T = cfg.T[0]
    vel_kind, pres_kind = ELEMENT_PAIRS[cfg.element]
    case = manufactured_case(cfg.example)
    rows = []
    for n in levels:
        mesh = build_unit_square_mesh(n)
        vel = build_space(mesh, vel_kind)
        pres = build_space(mesh, pres_kind)
        for k in ks:
            nsteps = int(math.floor(T / k + 1e-9))
            try:
                stepper = TimeStepper(vel, pres, cfg.params, k, cfg.controls)
                state = stepper.initial_state(case.initial_velocity)
                records = [stepper.monitor(state)]
                f = lambda x, y, t: manufactured_forcing(case, cfg.params, x, y, t)
                for _ in range(nsteps):
                    state, rec = stepper.step(state, f)
                    records.append(rec)
                sup_l2 = max(r.l2_norm for r in records)
                sup_h1 = max(
                    math.hypot(r.l2_norm, r.h1_seminorm) for r in records
                )
                sup_p = max(r.pressure_l2 for r in records[1:]) if nsteps else 0.0
                rows.append(StabilityRow(1.0 / n, k, sup_l2, sup_h1, sup_p))
            except Exception as exc:
                rows.append(StabilityRow(1.0 / n, k, math.nan, math.nan, math.nan,
                                         status=f"failed: {exc}"))
    return StabilityTable(tuple(rows))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt_err(v):
    return f"{v:.8e}"


def _fmt_rate(v):
    return "" if v is None else f"{v:.4f}"


def write_csv(table, path):
    """Deterministic CSV emission for rate and stability tables."""
    if isinstance(table, RateTable):
        lines = [f"{table.resolution_name},l2_err,l2_rate,h1_err,h1_rate,p_err,p_rate"]
        for r in table.rows:
            lines.append(",".join([
                f"{r.resolution:.10g}",
                _fmt_err(r.l2_err), _fmt_rate(r.l2_rate),
                _fmt_err(r.h1_err), _fmt_rate(r.h1_rate),
                _fmt_err(r.p_err), _fmt_rate(r.p_rate),
            ]))
    elif isinstance(table, StabilityTable):
        lines = ["h,k,sup_u_l2,sup_u_h1,sup_p_l2,status"]
        for r in table.rows:
            lines.append(",".join([
                f"{r.h:.10g}", f"{r.k:.10g}",
                _fmt_err(r.sup_u_l2), _fmt_err(r.sup_u_h1), _fmt_err(r.sup_p_l2),
                r.status,
            ]))
    else:
        raise StudyError(f"cannot write a table of type {type(table).__name__}")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise StudyError(f"cannot write {path}: {exc}") from exc


def run_study(cfg: StudyConfig):
    """Dispatch on cfg.study; returns the study's result object."""
    return {
        "spatial": run_spatial_study,
        "temporal": run_temporal_study,
        "longtime": run_longtime_study,
        "stability": run_stability_study,
    }[cfg.study](cfg)
