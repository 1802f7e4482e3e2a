"""Inexact ADMM for the Gaussian multiresolution-constrained problem.

Each iteration performs a preconditioned TV-prox step (one forward and
one adjoint operator evaluation, no inversion), a Dykstra projection of
the slack variable onto the constraint intersection, and an explicit
dual ascent step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import SubsetSystem, as_field
from .operators import LinearOperator
from .projection import dykstra_system
from .prox import CostSpec, prox_cost, tv_value
from .stats import transformed_statistic

__all__ = ["AdmmConfig", "SolveReport", "admm_solve", "stopping_check",
           "write_history"]

HISTORY_HEADER = "iter,rel_change,rel_gap,stat,J"


@dataclass
class AdmmConfig:
    """Solver knobs.  `lam` is the ADMM step size; `zeta` the inexact-step
    preconditioner constant, which must exceed the squared operator norm
    (None = 1.01 * norm_bound^2)."""

    lam: float = 0.001
    zeta: float | None = None
    alpha: float = 0.9
    tol_rel_change: float = 1e-3
    tol_rel_gap: float = 1e-3
    stat_slack: float = 1.01
    max_outer: int = 5000
    average_iterates: bool = False
    dykstra_tol: float = 1e-6
    dykstra_max_sweeps: int = 500
    dykstra_active_set: bool = False
    prox_tol: float = 1e-5
    prox_max_inner: int = 2000

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("step size lam must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.zeta is not None and self.zeta <= 0:
            raise ValueError("zeta must be positive")

    def resolve_zeta(self, norm_bound: float) -> float:
        zeta = 1.01 * norm_bound ** 2 if self.zeta is None else self.zeta
        if zeta <= norm_bound ** 2:
            raise ValueError(f"zeta={zeta} must exceed norm_bound^2="
                             f"{norm_bound ** 2}")
        return zeta


@dataclass
class SolveReport:
    """Terminal iterates plus per-iteration diagnostics.

    history rows are (rel_change, rel_gap, stat, J); status is one of
    "converged", "max_iterations", "diverged".
    """

    u_hat: np.ndarray
    v_hat: np.ndarray
    p_hat: np.ndarray
    iterations: int
    converged: bool
    status: str
    history: list[tuple[float, float, float, float]] = field(default_factory=list)
    u_avg: np.ndarray | None = None
    p_avg: np.ndarray | None = None

    def history_csv(self) -> str:
        lines = [HISTORY_HEADER]
        for k, row in enumerate(self.history, start=1):
            lines.append(f"{k},{row[0]:.9e},{row[1]:.9e},{row[2]:.9e},{row[3]:.9e}")
        return "\n".join(lines) + "\n"


def write_history(report: SolveReport, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(report.history_csv())


def stopping_check(rel_change: float, rel_gap: float, stat: float,
                   q_alpha: float, cfg: AdmmConfig) -> bool:
    """All three termination criteria, with inclusive comparisons."""
    return (rel_change <= cfg.tol_rel_change
            and rel_gap <= cfg.tol_rel_gap
            and stat <= cfg.stat_slack * q_alpha)


def _require_calibrated(sys: SubsetSystem):
    if not sys.calibrated or sys.q_alpha is None:
        raise RuntimeError("system must be calibrated (weights and quantile)")


def admm_solve(Y, K: LinearOperator, sys: SubsetSystem, sigma2: float,
               cost: CostSpec = CostSpec(),
               cfg: AdmmConfig | None = None) -> SolveReport:
    """Minimize J subject to the localized residual constraints of `sys`.

    Iterates from zero initial data.  Terminates when the relative change
    of the forward image, the relative primal gap and the transformed
    residual statistic are all below their thresholds, or at max_outer.
    """
    cfg = cfg or AdmmConfig()
    Y = as_field(Y, "data")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    _require_calibrated(sys)
    if Y.shape != (sys.m, sys.n):
        raise ValueError("data shape does not match system grid")
    zeta = cfg.resolve_zeta(K.norm_bound)
    lam = cfg.lam
    norm_y = float(np.linalg.norm(Y))
    scale_y = norm_y if norm_y > 0 else 1.0

    u = np.zeros_like(Y)
    v = np.zeros_like(Y)
    p = np.zeros_like(Y)
    Ku = K.apply(u)
    u_avg = np.zeros_like(Y) if cfg.average_iterates else None
    p_avg = np.zeros_like(Y) if cfg.average_iterates else None
    prox_state: dict = {}
    history = []
    status = "max_iterations"
    converged = False
    rel_gap = 1.0
    it = 0
    for it in range(1, cfg.max_outer + 1):
        arg = u - (1.0 / zeta) * K.adjoint(Ku - v + lam * p)
        u = prox_cost(arg, lam / zeta, cost, inner_tol=cfg.prox_tol,
                      max_inner=cfg.prox_max_inner, warm_state=prox_state).u
        Ku_prev = Ku
        Ku = K.apply(u)
        dyk_tol = max(min(cfg.dykstra_tol, 0.1 * rel_gap), 1e-12)
        v = dykstra_system(Ku + lam * p, sys, center=Y, sigma2=sigma2,
                           tol=dyk_tol, max_sweeps=cfg.dykstra_max_sweeps,
                           active_set=cfg.dykstra_active_set).x
        p = p + (Ku - v) / lam

        rel_change = float(np.linalg.norm(Ku - Ku_prev)) / scale_y
        rel_gap = float(np.linalg.norm(Ku - v)) / scale_y
        stat = transformed_statistic(Ku - Y, sys, sigma2)
        j_val = tv_value(u, cost)
        history.append((rel_change, rel_gap, stat, j_val))
        if cfg.average_iterates:
            u_avg += (u - u_avg) / it
            p_avg += (p - p_avg) / it

        if float(np.linalg.norm(u)) > 1e6 * scale_y:
            status = "diverged"
            break
        if stopping_check(rel_change, rel_gap, stat, sys.q_alpha, cfg):
            status = "converged"
            converged = True
            break

    return SolveReport(u_hat=u, v_hat=v, p_hat=p, iterations=it,
                       converged=converged, status=status, history=history,
                       u_avg=u_avg, p_avg=p_avg)
