"""Constitutive kernels for phase-field brittle fracture in plane strain.

The stress is additively decomposed into a tensile part (degraded by the
phase field) and a compressive remainder, based on the spectral
decomposition of the linearized strain tensor:

    e      = sym(grad u),  e = P diag(l1, l2) P^T
    e+     = P diag(max(l1,0), max(l2,0)) P^T
    sig+   = 2 mu e+ + lam max(tr e, 0) I
    sig-   = 2 mu (e - e+) + lam (tr e - max(tr e, 0)) I
    sig    = g(phi) sig+ + sig-,   g(phi) = (1 - kappa) phi^2 + kappa

All kernels exist in two layers: a scalar API on small dataclasses and a
batch API on component arrays of arbitrary shape (used by the assembly
loops).  The scalar functions delegate to the batch ones so there is a
single source of truth for branch conventions.

Voigt ordering used throughout: strain (exx, eyy, 2*exy), stress
(sxx, syy, sxy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative threshold below which the two strain eigenvalues are treated as
# coincident; the eigenbasis then falls back to the coordinate axes.
EIG_DEGENERATE_RTOL = 1.0e-12

_VOIGT_ID = np.array([1.0, 1.0, 0.0])  # identity tensor in Voigt form
# d(e)/d(e_voigt) with engineering shear: the shear slot carries a 1/2
_VOIGT_SYM = np.diag([1.0, 1.0, 0.5])


# ---------------------------------------------------------------------------
# small value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor stored by independent components."""

    xx: float
    yy: float
    xy: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    @staticmethod
    def from_matrix(m: np.ndarray) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if abs(m[0, 1] - m[1, 0]) > 1.0e-12 * max(1.0, float(np.abs(m).max())):
            raise ValueError("matrix is not symmetric")
        return SymTensor2(float(m[0, 0]), float(m[1, 1]),
                          0.5 * float(m[0, 1] + m[1, 0]))

    def trace(self) -> float:
        return self.xx + self.yy

    def norm(self) -> float:
        """Frobenius norm (off-diagonal counted twice)."""
        return float(np.sqrt(self.xx ** 2 + self.yy ** 2 + 2.0 * self.xy ** 2))


@dataclass(frozen=True)
class EigenPair2:
    """Eigendecomposition of a symmetric 2x2 tensor, lam1 >= lam2."""

    lam1: float
    lam2: float
    v1: np.ndarray
    v2: np.ndarray


@dataclass(frozen=True)
class MaterialParams:
    """Material and model constants.

    mu_s, lam_s : Lame parameters [kN/mm^2]
    g_c         : critical energy release rate [kN/mm]
    kappa       : residual stiffness in the degradation function
    eps         : phase-field regularization length [mm]
    gamma       : penalty weight of the irreversibility augmentation
    """

    mu_s: float
    lam_s: float
    g_c: float
    kappa: float
    eps: float
    gamma: float

    def __post_init__(self):
        # mu_s = 0 is allowed so the stabilization term can be exercised
        # in isolation; physical inputs have mu_s > 0
        if self.mu_s < 0.0 or self.lam_s < 0.0:
            raise ValueError("Lame parameters must be nonnegative")
        if self.g_c <= 0.0:
            raise ValueError("g_c must be positive")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")


# ---------------------------------------------------------------------------
# batch kernels on component arrays
# ---------------------------------------------------------------------------

def eig_batch(exx, eyy, exy):
    """Closed-form eigendecomposition of symmetric 2x2 tensors.

    Parameters are component arrays of a common shape.  Returns
    (lam1, lam2, c, s) with lam1 >= lam2 and first eigenvector (c, s);
    the second is (-s, c).  Coincident eigenvalues (relative to the
    tensor magnitude) get the axis-aligned basis c=1, s=0.
    """
    exx = np.asarray(exx, dtype=float)
    eyy = np.asarray(eyy, dtype=float)
    exy = np.asarray(exy, dtype=float)
    mean = 0.5 * (exx + eyy)
    diff = 0.5 * (exx - eyy)
    rad = np.hypot(diff, exy)
    lam1 = mean + rad
    lam2 = mean - rad
    scale = np.maximum(1.0, np.sqrt(exx ** 2 + eyy ** 2 + 2.0 * exy ** 2))
    degenerate = rad <= EIG_DEGENERATE_RTOL * scale
    theta = 0.5 * np.arctan2(2.0 * exy, exx - eyy)
    c = np.where(degenerate, 1.0, np.cos(theta))
    s = np.where(degenerate, 0.0, np.sin(theta))
    return lam1, lam2, c, s


def positive_part_batch(exx, eyy, exy):
    """Spectral positive part e+ of symmetric 2x2 tensors, componentwise."""
    lam1, lam2, c, s = eig_batch(exx, eyy, exy)
    p1 = np.maximum(lam1, 0.0)
    p2 = np.maximum(lam2, 0.0)
    # e+ = p1 v1 v1^T + p2 v2 v2^T with v1=(c,s), v2=(-s,c)
    pxx = p1 * c * c + p2 * s * s
    pyy = p1 * s * s + p2 * c * c
    pxy = (p1 - p2) * c * s
    return pxx, pyy, pxy


def stress_split_batch(exx, eyy, exy, mu_s, lam_s):
    """Tensile/compressive stress split on component arrays.

    Returns (spxx, spyy, spxy, smxx, smyy, smxy).
    """
    pxx, pyy, pxy = positive_part_batch(exx, eyy, exy)
    tr = exx + eyy
    trp = np.maximum(tr, 0.0)
    spxx = 2.0 * mu_s * pxx + lam_s * trp
    spyy = 2.0 * mu_s * pyy + lam_s * trp
    spxy = 2.0 * mu_s * pxy
    smxx = 2.0 * mu_s * (exx - pxx) + lam_s * (tr - trp)
    smyy = 2.0 * mu_s * (eyy - pyy) + lam_s * (tr - trp)
    smxy = 2.0 * mu_s * (exy - pxy)
    return spxx, spyy, spxy, smxx, smyy, smxy


def tensile_energy_density_batch(exx, eyy, exy, mu_s, lam_s):
    """Crack driving density sig+(e) : e = 2 mu |e+|^2 + lam (tr e)+ tr e.

    Note sig+ : e equals sig+ : e+ plus lam (tr)+ (tr - tr+) = the usual
    tensile energy up to the factor 2 convention; what is assembled in the
    phase-field equation is exactly sig+(u):e(u).
    """
    pxx, pyy, pxy = positive_part_batch(exx, eyy, exy)
    tr = exx + eyy
    trp = np.maximum(tr, 0.0)
    return (2.0 * mu_s * (pxx * exx + pyy * eyy + 2.0 * pxy * exy)
            + lam_s * trp * tr)


def _heaviside(x):
    """Tangent convention at the split kinks: H(0) = 1."""
    return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0)


def split_tangent_batch(exx, eyy, exy, mu_s, lam_s):
    """Consistent tangents d(sig+)/de and d(sig-)/de in Voigt form.

    Returns (cp, cm) with shape (..., 3, 3) for engineering-shear strain
    ordering (exx, eyy, 2 exy).  At kinks of the split the tangent of the
    ray from the tensile side is taken (Heaviside value 1 at zero), and
    for coincident eigenvalues the divided difference of max(., 0)
    degenerates to the Heaviside of the common eigenvalue.  The two
    tangents always sum with the degradation to the isotropic tangent:
    g cp + cm at g=1 is the plane-strain Hooke matrix.
    """
    exx = np.asarray(exx, dtype=float)
    eyy = np.asarray(eyy, dtype=float)
    exy = np.asarray(exy, dtype=float)
    lam1, lam2, c, s = eig_batch(exx, eyy, exy)

    m1 = np.stack([c * c, s * s, c * s], axis=-1)          # v1 x v1
    m2 = np.stack([s * s, c * c, -c * s], axis=-1)         # v2 x v2
    # sym(v1 x v2) in Voigt strain slots (plain xy component in the last)
    g12 = np.stack([-c * s, c * s, 0.5 * (c * c - s * s)], axis=-1)

    h1 = _heaviside(lam1)
    h2 = _heaviside(lam2)
    gap = lam1 - lam2
    scale = np.maximum(1.0, np.sqrt(exx ** 2 + eyy ** 2 + 2.0 * exy ** 2))
    tiny = gap <= EIG_DEGENERATE_RTOL * scale
    safe_gap = np.where(tiny, 1.0, gap)
    ratio = np.where(
        tiny,
        _heaviside(0.5 * (lam1 + lam2)),
        (np.maximum(lam1, 0.0) - np.maximum(lam2, 0.0)) / safe_gap,
    )

    outer = lambda a, b: a[..., :, None] * b[..., None, :]
    dpos = (h1[..., None, None] * outer(m1, m1)
            + h2[..., None, None] * outer(m2, m2)
            + 2.0 * ratio[..., None, None] * outer(g12, g12))
    htr = _heaviside(exx + eyy)
    ivv = outer(np.broadcast_to(_VOIGT_ID, m1.shape), np.broadcast_to(_VOIGT_ID, m1.shape))
    cp = 2.0 * mu_s * dpos + lam_s * htr[..., None, None] * ivv
    cm = (2.0 * mu_s * (_VOIGT_SYM - dpos)
          + lam_s * (1.0 - htr)[..., None, None] * ivv)
    return cp, cm


def degradation_batch(phi, kappa):
    """g(phi) = (1 - kappa) phi^2 + kappa."""
    phi = np.asarray(phi, dtype=float)
    return (1.0 - kappa) * phi * phi + kappa


def degradation_derivative_batch(phi, kappa):
    """g'(phi) = 2 (1 - kappa) phi."""
    phi = np.asarray(phi, dtype=float)
    return 2.0 * (1.0 - kappa) * phi


# ---------------------------------------------------------------------------
# scalar wrappers
# ---------------------------------------------------------------------------

def strain(grad_u: np.ndarray) -> SymTensor2:
    """Symmetric gradient of a 2x2 displacement gradient."""
    grad_u = np.asarray(grad_u, dtype=float)
    if grad_u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 gradient, got shape {grad_u.shape}")
    return SymTensor2(float(grad_u[0, 0]), float(grad_u[1, 1]),
                      0.5 * float(grad_u[0, 1] + grad_u[1, 0]))


def eig_sym2(e: SymTensor2) -> EigenPair2:
    """Ordered eigendecomposition of a symmetric 2x2 tensor."""
    lam1, lam2, c, s = eig_batch(e.xx, e.yy, e.xy)
    v1 = np.array([float(c), float(s)])
    v2 = np.array([-float(s), float(c)])
    return EigenPair2(float(lam1), float(lam2), v1, v2)


def positive_part_tensor(e: SymTensor2) -> SymTensor2:
    pxx, pyy, pxy = positive_part_batch(e.xx, e.yy, e.xy)
    return SymTensor2(float(pxx), float(pyy), float(pxy))


def stress_split(e: SymTensor2, params: MaterialParams) -> tuple[SymTensor2, SymTensor2]:
    """Tensile and compressive stress parts (sig+, sig-)."""
    spxx, spyy, spxy, smxx, smyy, smxy = stress_split_batch(
        e.xx, e.yy, e.xy, params.mu_s, params.lam_s)
    return (SymTensor2(float(spxx), float(spyy), float(spxy)),
            SymTensor2(float(smxx), float(smyy), float(smxy)))


def degradation(phi: float, kappa: float) -> float:
    return float(degradation_batch(phi, kappa))


def tensile_energy_density(e: SymTensor2, params: MaterialParams) -> float:
    """sig+(e) : e, the driving term of the phase-field equation."""
    return float(tensile_energy_density_batch(
        e.xx, e.yy, e.xy, params.mu_s, params.lam_s))


def hooke_voigt(mu_s: float, lam_s: float) -> np.ndarray:
    """Plane-strain isotropic stiffness in Voigt form (reference check)."""
    return np.array([
        [lam_s + 2.0 * mu_s, lam_s, 0.0],
        [lam_s, lam_s + 2.0 * mu_s, 0.0],
        [0.0, 0.0, mu_s],
    ])
