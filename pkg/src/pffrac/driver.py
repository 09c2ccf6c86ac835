"""Outer staggered iteration over loading steps.

Each loading step alternates a displacement solve (holding the phase
field fixed at the previous iterate) and a phase-field solve (using the
fresh displacement), augments both with a stabilization mass term whose
weight L is updated between iterations, accumulates the irreversibility
penalty Xi, and stops when both residuals drop below the outer
tolerance.  Iteration i solves with the fields L and Xi of state i-1;
the stopping residuals are evaluated after the updates of iteration i,
at the new iterates.  Because the Xi update absorbs the penalty of the
current iterate, the stopping form carries Xi alone; the displacement
residual, re-evaluated with the fresh phase field, is the part that
measures cross-consistency of the pair.

Stabilization strategies:
  none             L = 0 throughout
  constant         L = L0 fixed
  dynamic          L uniform, grows by factor a per iteration, capped
  dynamic_weighted nodal growth factor (1 - phi) a, clamped to [L0, cap]
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import postprocess, subsolvers
from .fem import FeSpace, build_constraints
from .material import MaterialParams
from .subsolvers import FieldState, initial_state

log = logging.getLogger("pffrac")

STRATEGIES = ("none", "constant", "dynamic", "dynamic_weighted")


@dataclass(frozen=True)
class LSchemeConfig:
    """Outer-iteration controls.

    l0 is both the initial stabilization weight and the floor of the
    weighted strategy; a is the per-iteration growth factor; l_max the
    cap.  gamma=None defers to MaterialParams.gamma.
    """

    strategy: str = "dynamic"
    l0: float = 1.0e-10
    a: float = 5.0
    l_max: float = 1.0e6
    tol: float = 1.0e-6
    max_outer: int = 500
    gamma: float | None = None
    reset_l_each_step: bool = True
    reset_xi_each_step: bool = True
    newton_tol: float = 1.0e-8
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy in ("dynamic", "dynamic_weighted") and self.a <= 1.0:
            raise ValueError("growth factor a must exceed 1")
        if not 0.0 <= self.l0 <= self.l_max:
            raise ValueError("need 0 <= l0 <= l_max")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class StepReport:
    """Outcome of one loading step."""

    t: float
    u_top: float
    outer_iters: int
    converged: bool
    res_u: float
    res_phi: float
    max_l: float
    f_x: float
    f_y: float
    min_phi: float


def _ladder(i: int, cfg: LSchemeConfig) -> float:
    """Uniform dynamic value after i growth updates.

    The exponent is clamped once l0 a^i can no longer stay under the
    cap, so large iteration counts cannot overflow the power.
    """
    if cfg.l0 == 0.0:
        return 0.0
    # one extra e-fold of slack keeps the shortcut clear of rounding
    if i * math.log(cfg.a) >= math.log(cfg.l_max / cfg.l0) + 1.0:
        return cfg.l_max
    return min(cfg.l0 * cfg.a ** i, cfg.l_max)


def initial_lfield(cfg: LSchemeConfig, n_nodes: int) -> np.ndarray:
    if cfg.strategy == "none":
        return np.zeros(n_nodes)
    return np.full(n_nodes, cfg.l0)


def update_stabilization(strategy: str, i: int, l_prev: np.ndarray,
                         phi_prev_iter: np.ndarray, cfg: LSchemeConfig) -> np.ndarray:
    """Stabilization field after growth update number i (i >= 1).

    The dynamic value is computed from the update count so the uniform
    ladder L_i = min(a^i l0, l_max) holds to the last bit; the weighted
    variant reduces to it where phi is exactly zero and the previous
    value was on the ladder.
    """
    if i < 1:
        raise ValueError("update index starts at 1")
    if strategy == "none":
        return np.zeros_like(l_prev)
    if strategy == "constant":
        return l_prev
    if strategy == "dynamic":
        return np.full_like(l_prev, _ladder(i, cfg))
    if strategy == "dynamic_weighted":
        phic = np.clip(phi_prev_iter, 0.0, 1.0)
        lnew = np.clip((1.0 - phic) * cfg.a * l_prev, cfg.l0, cfg.l_max)
        snap = (phic == 0.0) & (l_prev == _ladder(i - 1, cfg))
        if np.any(snap):
            lnew = np.where(snap, _ladder(i, cfg), lnew)
        return lnew
    raise ValueError(f"unknown strategy {strategy!r}")


def update_penalty(xi_prev: np.ndarray, phi_current: np.ndarray,
                   phi_prev_step: np.ndarray, gamma: float) -> np.ndarray:
    """Xi accumulation: add gamma max(phi_current - phi_prev_step, 0)."""
    return xi_prev + gamma * np.maximum(phi_current - phi_prev_step, 0.0)


def resolve_gamma(params: MaterialParams, cfg: LSchemeConfig) -> float:
    return params.gamma if cfg.gamma is None else cfg.gamma


def outer_iterate(state_prev_step: FieldState, t: float, params: MaterialParams,
                  cfg: LSchemeConfig, space: FeSpace,
                  constraints: dict[int, float]):
    """Run the staggered iteration for one loading step.

    Returns (state, info) where info is a dict with keys outer_iters,
    converged, res_u, res_phi (final stopping residuals) and max_l.
    The surface load is attached by the caller.
    """
    gamma = resolve_gamma(params, cfg)
    params_step = params if gamma == params.gamma else replace(params, gamma=gamma)
    cidx = np.fromiter(constraints.keys(), dtype=np.int64) if constraints else None

    phi_step = state_prev_step.phi
    u_prev = state_prev_step.u
    phi_prev = state_prev_step.phi
    lf = (initial_lfield(cfg, space.mesh.n_nodes)
          if cfg.reset_l_each_step else state_prev_step.lfield.copy())
    xi = (np.zeros(space.mesh.n_nodes)
          if cfg.reset_xi_each_step else state_prev_step.xi.copy())

    converged = False
    res_u = res_phi = float("nan")
    iters = 0
    for i in range(1, cfg.max_outer + 1):
        iters = i
        u_new, _ = subsolvers.solve_displacement(
            u_prev, phi_prev, lf, constraints, params_step, space,
            cfg.newton_tol, cfg.newton_max_iter)
        phi_new, _ = subsolvers.solve_phasefield(
            phi_prev, phi_step, u_new, xi, lf, params_step, space,
            cfg.newton_tol, cfg.newton_max_iter)

        lf = update_stabilization(cfg.strategy, i, lf, phi_prev, cfg)
        xi = update_penalty(xi, phi_new, phi_step, gamma)

        # stopping residuals at the new pair with the refreshed L and Xi;
        # the Xi update already holds the penalty of this iterate, so the
        # penalty term is not added a second time
        ru = subsolvers.elasticity_residual(
            u_new, phi_new, u_prev, lf, params_step, space, constrained=cidx)
        rp = subsolvers.phasefield_residual(
            phi_new, phi_prev, phi_step, u_new, xi, lf, params_step, space,
            include_penalty=False)
        res_u = float(np.linalg.norm(ru))
        res_phi = float(np.linalg.norm(rp))
        log.info("t=%.6e i=%3d res_u=%.3e res_phi=%.3e maxL=%.3e",
                 t, i, res_u, res_phi, float(lf.max()))

        u_prev, phi_prev = u_new, phi_new
        if max(res_u, res_phi) <= cfg.tol:
            converged = True
            break

    state = FieldState(u_prev, phi_prev, xi, lf)
    info = {"outer_iters": iters, "converged": converged,
            "res_u": res_u, "res_phi": res_phi, "max_l": float(lf.max())}
    return state, info


def run_loading_loop(space: FeSpace, params: MaterialParams, cfg: LSchemeConfig,
                     dt: float, n_steps: int, ubar: float = 1.0,
                     state0: FieldState | None = None, observer=None,
                     degraded_load: bool = True):
    """March n_steps loading steps of size dt from the initial state.

    The prescribed top displacement at step n is t*ubar with t = n*dt.
    ``observer(step_index, state, report)`` is called after every step,
    before the next one starts, so partial results can be flushed.
    Returns (reports, final_state).
    """
    state = state0.copy() if state0 is not None else initial_state(space)
    reports: list[StepReport] = []
    for n in range(1, n_steps + 1):
        t = n * dt
        constraints = build_constraints(space.mesh, t, ubar)
        state, info = outer_iterate(state, t, params, cfg, space, constraints)
        fx, fy = postprocess.surface_load(state.u, state.phi, space.mesh, params,
                                          degraded=degraded_load)
        rep = StepReport(t=t, u_top=t * ubar, outer_iters=info["outer_iters"],
                         converged=info["converged"], res_u=info["res_u"],
                         res_phi=info["res_phi"], max_l=info["max_l"],
                         f_x=fx, f_y=fy, min_phi=float(state.phi.min()))
        reports.append(rep)
        log.info("step %d/%d done: iters=%d converged=%s Fx=%.6e min_phi=%.4f",
                 n, n_steps, rep.outer_iters, rep.converged, fx, rep.min_phi)
        if observer is not None:
            observer(n, state, rep)
    return reports, state
