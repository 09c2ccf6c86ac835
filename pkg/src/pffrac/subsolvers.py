"""Residuals, Jacobians and Newton solves for the two staggered subproblems.

Step 1 (displacement, test function v), given the nodal phase field
``phi`` from the previous outer iterate and the stabilization field L
(the degradation g(phi) is applied inside, at the quadrature points):

    R_u(v) = int L (u - u_ref) . v dx
           + int [ g(phi) sig+(e(u)) + sig-(e(u)) ] : e(v) dx

Step 2 (phase field, test function psi), given the fresh displacement u:

    R_phi(psi) = int L (phi - phi_ref) psi dx
               + int G_c eps grad phi . grad psi dx
               - int (G_c/eps) (1 - phi) psi dx
               + int (1 - kappa) phi q(u) psi dx
               + int (Xi + gamma max(phi - phi_step, 0)) psi dx

with q(u) = sig+(e(u)) : e(u) and phi_step the converged phase field of
the previous loading step.  Nodal fields (L, Xi, phi_step) are
interpolated to quadrature points; the max(., 0) kinks are evaluated
pointwise there.  Newton uses the semismooth convention that the kink
derivative vanishes at equality.

Residual vectors are raw unless a ``constrained`` index array is given,
in which case those entries are zeroed (norms are then taken over the
unconstrained part only).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import material
from .fem import FeSpace, apply_dirichlet
from .material import MaterialParams


class SubsolverError(RuntimeError):
    """A nonlinear subproblem could not be solved."""


class SingularSystemError(SubsolverError):
    """The linearized system is singular or produced non-finite values."""


@dataclass
class FieldState:
    """Nodal fields carried across iterations and loading steps.

    u      : displacement, interleaved (x, y) per node [mm]
    phi    : phase field, 1 intact / 0 cracked
    xi     : accumulated irreversibility penalty
    lfield : stabilization weight, shared by both subproblems
    """

    u: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    lfield: np.ndarray

    def copy(self) -> "FieldState":
        return FieldState(self.u.copy(), self.phi.copy(),
                          self.xi.copy(), self.lfield.copy())


def initial_state(space: FeSpace) -> FieldState:
    """Unloaded intact state: u = 0, phi = 1, xi = 0, L = 0."""
    n = space.mesh.n_nodes
    return FieldState(np.zeros(2 * n), np.ones(n), np.zeros(n), np.zeros(n))


@dataclass
class NewtonReport:
    iterations: int
    converged: bool
    residual_norms: list[float] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residual_norms[-1]


# ---------------------------------------------------------------------------
# Step 1: displacement
# ---------------------------------------------------------------------------

def elasticity_residual(u, phi, u_ref, lfield, params: MaterialParams,
                        space: FeSpace, constrained=None) -> np.ndarray:
    """Assembled Step-1 residual; see module docstring for the form."""
    exx, eyy, exy = space.qp_strains(u)
    spxx, spyy, spxy, smxx, smyy, smxy = material.stress_split_batch(
        exx, eyy, exy, params.mu_s, params.lam_s)
    gq = material.degradation_batch(space.qp_values(phi), params.kappa)
    sxx = gq * spxx + smxx
    syy = gq * spyy + smyy
    sxy = gq * spxy + smxy

    w = space.JxW
    gx = space.grads[..., 0]
    gy = space.grads[..., 1]
    # f[c, k, i] = sum_q w sig_ij dN_k/dx_j
    fx = np.einsum("cq,cqk->ck", sxx * w, gx) + np.einsum("cq,cqk->ck", sxy * w, gy)
    fy = np.einsum("cq,cqk->ck", sxy * w, gx) + np.einsum("cq,cqk->ck", syy * w, gy)

    lq = space.qp_values(lfield)
    du = space.qp_vector_values(u - u_ref)                   # (m, q, 2)
    fx += np.einsum("cq,qk->ck", lq * du[..., 0] * w, space.N)
    fy += np.einsum("cq,qk->ck", lq * du[..., 1] * w, space.N)

    cell = np.empty(fx.shape[:1] + (8,))
    cell[:, 0::2] = fx
    cell[:, 1::2] = fy
    r = space.scatter_vector(cell, "vector")
    if constrained is not None:
        r[constrained] = 0.0
    return r


def elasticity_jacobian(u, phi, lfield, params: MaterialParams,
                        space: FeSpace, mode: str = "analytic") -> sp.csr_matrix:
    """Tangent of the Step-1 residual with respect to u (unconstrained)."""
    if mode == "fd":
        res = lambda x: elasticity_residual(x, phi, np.zeros_like(x),
                                            lfield, params, space)
        # the u_ref offset only shifts the residual, not the tangent
        return fd_jacobian(res, np.asarray(u, dtype=float))
    if mode != "analytic":
        raise ValueError(f"unknown jacobian mode {mode!r}")
    exx, eyy, exy = space.qp_strains(u)
    cp, cm = material.split_tangent_batch(exx, eyy, exy, params.mu_s, params.lam_s)
    gq = material.degradation_batch(space.qp_values(phi), params.kappa)
    D = gq[..., None, None] * cp + cm
    D = D * space.JxW[..., None, None]
    m, q = space.JxW.shape
    BD = np.matmul(D, space.B)                               # (m, q, 3, 8)
    Bt = space.B.reshape(m, q * 3, 8)
    Ke = np.matmul(Bt.transpose(0, 2, 1), BD.reshape(m, q * 3, 8))

    lq = space.qp_values(lfield)
    # mass block: delta_ij sum_q w L N_k N_l
    Ms = np.einsum("cq,qk,ql->ckl", lq * space.JxW, space.N, space.N)
    Ke[:, 0::2, 0::2] += Ms
    Ke[:, 1::2, 1::2] += Ms
    return space.scatter_matrix(Ke, "vector")


# ---------------------------------------------------------------------------
# Step 2: phase field
# ---------------------------------------------------------------------------

def phasefield_residual(phi, phi_ref, phi_step, u, xi, lfield,
                        params: MaterialParams, space: FeSpace,
                        constrained=None, include_penalty=True) -> np.ndarray:
    """Assembled Step-2 residual; see module docstring for the form.

    With include_penalty=False the max(phi - phi_step, 0) term is left
    out and only the accumulated multiplier xi enters.  That variant is
    used for the outer stopping test, where the freshly updated xi
    already holds the penalty of the current iterate.
    """
    phq = space.qp_values(phi)
    w = space.JxW
    qdens = _driving_density(u, params, space)
    coeff = (space.qp_values(lfield) * (phq - space.qp_values(phi_ref))
             - (params.g_c / params.eps) * (1.0 - phq)
             + (1.0 - params.kappa) * phq * qdens
             + space.qp_values(xi))
    if include_penalty:
        coeff = coeff + params.gamma * np.maximum(
            phq - space.qp_values(phi_step), 0.0)
    cell = np.einsum("cq,qk->ck", coeff * w, space.N)

    gphi = _scalar_qp_gradients(phi, space)                  # (m, q, 2)
    gfac = params.g_c * params.eps
    cell += gfac * np.einsum("cqi,cqki->ck", gphi * w[..., None], space.grads)
    r = space.scatter_vector(cell, "scalar")
    if constrained is not None:
        r[constrained] = 0.0
    return r


def phasefield_jacobian(phi, phi_step, u, lfield, params: MaterialParams,
                        space: FeSpace, mode: str = "analytic",
                        xi=None) -> sp.csr_matrix:
    """Tangent of the Step-2 residual with respect to phi.

    The kink of the penalty term contributes only where the argument is
    strictly positive.  ``xi`` is accepted for signature symmetry; it
    does not enter the tangent.
    """
    if mode == "fd":
        xi0 = np.zeros_like(np.asarray(phi, dtype=float)) if xi is None else xi
        res = lambda x: phasefield_residual(x, np.zeros_like(x), phi_step, u,
                                            xi0, lfield, params, space)
        return fd_jacobian(res, np.asarray(phi, dtype=float))
    if mode != "analytic":
        raise ValueError(f"unknown jacobian mode {mode!r}")
    qdens = _driving_density(u, params, space)
    phq = space.qp_values(phi)
    active = (phq - space.qp_values(phi_step)) > 0.0
    coeff = (space.qp_values(lfield)
             + params.g_c / params.eps
             + (1.0 - params.kappa) * qdens
             + params.gamma * active) * space.JxW
    Ke = np.einsum("cq,qk,ql->ckl", coeff, space.N, space.N)
    gfac = params.g_c * params.eps
    Ke += gfac * np.einsum("cq,cqki,cqli->ckl", space.JxW, space.grads, space.grads)
    return space.scatter_matrix(Ke, "scalar")


def _driving_density(u, params: MaterialParams, space: FeSpace) -> np.ndarray:
    exx, eyy, exy = space.qp_strains(u)
    return material.tensile_energy_density_batch(exx, eyy, exy,
                                                 params.mu_s, params.lam_s)


def _scalar_qp_gradients(phi, space: FeSpace) -> np.ndarray:
    pc = phi[space.mesh.cells]                               # (m, 4)
    return np.einsum("ck,cqki->cqi", pc, space.grads)


# ---------------------------------------------------------------------------
# linear algebra and Newton
# ---------------------------------------------------------------------------

def fd_jacobian(residual_fn, x: np.ndarray, step: float = 1.0e-7) -> sp.csr_matrix:
    """Dense central-difference Jacobian, column by column (test sizes only)."""
    n = x.size
    cols = np.empty((n, n))
    for d in range(n):
        h = step * max(1.0, abs(x[d]))
        xp = x.copy()
        xp[d] += h
        xm = x.copy()
        xm[d] -= h
        cols[:, d] = (residual_fn(xp) - residual_fn(xm)) / (2.0 * h)
    return sp.csr_matrix(cols)


def sparse_direct_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """Solve Ax = b with a sparse LU factorization; flag singular systems."""
    A = sp.csc_matrix(A)
    try:
        with np.errstate(all="ignore"):
            lu = spla.splu(A)
            x = lu.solve(np.asarray(b, dtype=float))
    except (RuntimeError, ValueError) as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("direct solve produced non-finite values")
    return x


def newton_solve(residual_fn, jacobian_fn, x0: np.ndarray,
                 constraints: dict[int, float] | None = None,
                 tol: float = 1.0e-8, max_iter: int = 50):
    """Newton iteration with Dirichlet-constrained updates.

    ``residual_fn``/``jacobian_fn`` take the current iterate and return
    the raw residual vector / sparse tangent.  The initial guess must
    satisfy the constraints; updates keep constrained dofs fixed.  The
    convergence test uses the Euclidean norm over unconstrained entries,
    compared against the absolute tolerance.
    """
    x = np.array(x0, dtype=float, copy=True)
    cidx = (np.fromiter(constraints.keys(), dtype=np.int64)
            if constraints else np.empty(0, dtype=np.int64))
    zeros = {int(d): 0.0 for d in cidx}

    def norm_free(r):
        rr = r.copy()
        rr[cidx] = 0.0
        return float(np.linalg.norm(rr))

    r = residual_fn(x)
    hist = [norm_free(r)]
    if hist[-1] <= tol:
        return x, NewtonReport(0, True, hist)
    for it in range(1, max_iter + 1):
        J = jacobian_fn(x)
        rhs = -r
        rhs[cidx] = 0.0
        Jc, rhsc = apply_dirichlet(J, rhs, zeros)
        dx = sparse_direct_solve(Jc, rhsc)
        x += dx
        r = residual_fn(x)
        hist.append(norm_free(r))
        if hist[-1] <= tol:
            return x, NewtonReport(it, True, hist)
        if not np.isfinite(hist[-1]):
            return x, NewtonReport(it, False, hist)
    return x, NewtonReport(max_iter, False, hist)


# ---------------------------------------------------------------------------
# step solvers used by the outer iteration
# ---------------------------------------------------------------------------

def solve_displacement(u_prev, phi_prev, lfield, constraints,
                       params: MaterialParams, space: FeSpace,
                       tol: float = 1.0e-8, max_iter: int = 50):
    """Solve Step 1 for the new displacement; raises on failure."""
    x0 = np.array(u_prev, dtype=float, copy=True)
    for d, v in constraints.items():
        x0[d] = v
    res = lambda x: elasticity_residual(x, phi_prev, u_prev, lfield, params, space)
    jac = lambda x: elasticity_jacobian(x, phi_prev, lfield, params, space)
    u, rep = newton_solve(res, jac, x0, constraints, tol, max_iter)
    if not rep.converged:
        raise SubsolverError(
            f"displacement Newton stalled: {rep.iterations} iterations, "
            f"residual {rep.final_residual:.3e}")
    return u, rep


def solve_phasefield(phi_prev, phi_step, u_new, xi, lfield,
                     params: MaterialParams, space: FeSpace,
                     tol: float = 1.0e-8, max_iter: int = 50):
    """Solve Step 2 for the new phase field; raises on failure."""
    res = lambda x: phasefield_residual(x, phi_prev, phi_step, u_new, xi,
                                        lfield, params, space)
    jac = lambda x: phasefield_jacobian(x, phi_step, u_new, lfield, params, space)
    phi, rep = newton_solve(res, jac, np.array(phi_prev, dtype=float, copy=True),
                            None, tol, max_iter)
    if not rep.converged:
        raise SubsolverError(
            f"phase-field Newton stalled: {rep.iterations} iterations, "
            f"residual {rep.final_residual:.3e}")
    return phi, rep
