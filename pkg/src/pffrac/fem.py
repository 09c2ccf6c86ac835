"""Q1 finite-element machinery: quadrature, shape functions, dof maps,
Dirichlet constraints, and a per-mesh cache of element geometry.

Reference cell is [-1, 1]^2 with corner order (-1,-1), (1,-1), (1,1),
(-1,1), matching the counterclockwise cell node order of the mesh.
Vector fields interleave components: node k owns dofs (2k, 2k+1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class Quadrature:
    """Quadrature rule on the reference cell."""

    points: np.ndarray   # (q, 2)
    weights: np.ndarray  # (q,)


def gauss_2x2() -> Quadrature:
    """Tensor-product 2-point Gauss rule (exact through bilinear products)."""
    g = 1.0 / np.sqrt(3.0)
    pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    return Quadrature(pts, np.ones(4))


def gauss_1d_2pt() -> tuple[np.ndarray, np.ndarray]:
    """2-point Gauss rule on [-1, 1] for facet integrals."""
    g = 1.0 / np.sqrt(3.0)
    return np.array([-g, g]), np.array([1.0, 1.0])


def shape_values(point) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape values and reference gradients at one point.

    Returns (N (4,), dN (4, 2)).
    """
    N, dN = shape_values_batch(np.asarray(point, dtype=float)[None, :])
    return N[0], dN[0]


def shape_values_batch(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shape values (q, 4) and reference gradients (q, 4, 2) at many points."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    # corner signs follow the reference corner order
    sx = np.array([-1.0, 1.0, 1.0, -1.0])
    sy = np.array([-1.0, -1.0, 1.0, 1.0])
    N = 0.25 * (1.0 + np.outer(x, sx)) * (1.0 + np.outer(y, sy))
    dN = np.empty(pts.shape[:1] + (4, 2))
    dN[:, :, 0] = 0.25 * sx[None, :] * (1.0 + np.outer(y, sy))
    dN[:, :, 1] = 0.25 * sy[None, :] * (1.0 + np.outer(x, sx))
    return N, dN


def map_gradients(cell_coords: np.ndarray, ref_grads: np.ndarray):
    """Push reference gradients to physical space for one cell.

    cell_coords: (4, 2) node coordinates, ref_grads: (k, 2).  Returns
    (phys_grads (k, 2), detJ).  Raises on a non-positive Jacobian.
    """
    cell_coords = np.asarray(cell_coords, dtype=float)
    ref_grads = np.asarray(ref_grads, dtype=float)
    J = cell_coords.T @ ref_grads if ref_grads.shape[0] == 4 else None
    # Jacobian of the geometry map at the point the gradients belong to:
    # J[i, j] = sum_k x_k[i] dN_k/dxi_j; needs the 4 shape gradients
    if J is None or ref_grads.shape != (4, 2):
        raise ValueError("ref_grads must be the (4, 2) shape-gradient block")
    detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if detJ <= 0.0:
        raise ValueError(f"non-positive Jacobian determinant {detJ:.3e}")
    invJT = np.array([[J[1, 1], -J[1, 0]], [-J[0, 1], J[0, 0]]]) / detJ
    return ref_grads @ invJT.T, float(detJ)


@dataclass(frozen=True)
class DofMap:
    """Maps mesh nodes to global dofs for a scalar or vector field."""

    kind: str     # "scalar" | "vector"
    n_nodes: int

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise ValueError(f"unknown dof map kind {self.kind!r}")

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * (2 if self.kind == "vector" else 1)

    def node_dofs(self, node: int) -> np.ndarray:
        if self.kind == "scalar":
            return np.array([node])
        return np.array([2 * node, 2 * node + 1])

    def cell_dofs(self, cells: np.ndarray) -> np.ndarray:
        """(m, 4) cells -> (m, 4) or (m, 8) global dof indices."""
        cells = np.asarray(cells)
        if self.kind == "scalar":
            return cells
        out = np.empty(cells.shape[:-1] + (8,), dtype=np.int64)
        out[..., 0::2] = 2 * cells
        out[..., 1::2] = 2 * cells + 1
        return out


# ---------------------------------------------------------------------------
# Dirichlet data
# ---------------------------------------------------------------------------

def build_constraints(mesh: Mesh, t: float, ubar: float) -> dict[int, float]:
    """Dirichlet data of the sheared edge-cracked square at load time t.

    For the vector displacement field (interleaved dofs):
      left/right:  u_y = 0
      slit_lower:  u_y = 0 (lower-face nodes only; the crack-tip node is
                   shared with the upper face and stays unconstrained)
      top:         u_x = t*ubar, u_y = 0
      bottom:      u_x = u_y = 0
    Later assignments win, so corners shared by two groups get the value
    of the group applied last (bottom overrides everything).
    """
    c: dict[int, float] = {}
    for tag in ("left", "right"):
        for n in mesh.boundary_nodes(tag):
            c[2 * int(n) + 1] = 0.0
    lower = np.setdiff1d(mesh.boundary_nodes("slit_lower"),
                         mesh.boundary_nodes("slit_upper"))
    for n in lower:
        c[2 * int(n) + 1] = 0.0
    for n in mesh.boundary_nodes("top"):
        c[2 * int(n)] = t * ubar
        c[2 * int(n) + 1] = 0.0
    for n in mesh.boundary_nodes("bottom"):
        c[2 * int(n)] = 0.0
        c[2 * int(n) + 1] = 0.0
    return c


def apply_dirichlet(A: sp.spmatrix, b: np.ndarray, constraints: dict[int, float],
                    x_ref: np.ndarray | None = None):
    """Impose constraints by identity rows plus symmetric column elimination.

    Solving the resulting system yields x[d] = value for every constrained
    dof d.  If ``x_ref`` is given, the right-hand side is interpreted as a
    residual at ``x_ref`` and constrained rows are set so the Newton
    update keeps x_ref[d] at the prescribed value; without it the values
    are imposed directly.  Applying twice is a no-op.
    """
    A = sp.csr_matrix(A, copy=True)
    b = np.array(b, dtype=float, copy=True)
    if not constraints:
        return A, b
    idx = np.fromiter(constraints.keys(), dtype=np.int64)
    vals = np.fromiter((constraints[int(i)] for i in idx), dtype=float)
    if x_ref is not None:
        vals = vals - x_ref[idx]

    n = A.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[idx] = False
    # move known values to the right-hand side, then zero rows and columns
    # and put ones on the constrained diagonal
    b -= A[:, idx] @ vals
    mask = sp.diags(keep.astype(float))
    ident = sp.coo_matrix((np.ones(idx.size), (idx, idx)), shape=(n, n))
    A = (mask @ A @ mask + ident).tocsr()
    b[idx] = vals
    return A, b


# ---------------------------------------------------------------------------
# per-mesh cache
# ---------------------------------------------------------------------------

class FeSpace:
    """Everything assembly needs about one mesh, computed once.

    Attributes
    ----------
    grads : (m, q, 4, 2) physical shape gradients per cell and point
    JxW : (m, q) quadrature weights times Jacobian determinants
    N : (q, 4) shape values on the reference cell
    B : (m, q, 3, 8) strain-displacement matrices, Voigt engineering shear
    """

    def __init__(self, mesh: Mesh, quad: Quadrature | None = None):
        self.mesh = mesh
        self.quad = quad or gauss_2x2()
        self.u_map = DofMap("vector", mesh.n_nodes)
        self.phi_map = DofMap("scalar", mesh.n_nodes)

        N, dN = shape_values_batch(self.quad.points)
        self.N = N
        coords = mesh.nodes[mesh.cells]                       # (m, 4, 2)
        J = np.einsum("cki,qkj->cqij", coords, dN)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(detJ <= 0.0):
            c = int(np.argwhere(detJ <= 0.0)[0][0])
            raise ValueError(f"cell {c} has a non-positive Jacobian")
        invJ = np.empty_like(J)
        invJ[..., 0, 0] = J[..., 1, 1]
        invJ[..., 0, 1] = -J[..., 0, 1]
        invJ[..., 1, 0] = -J[..., 1, 0]
        invJ[..., 1, 1] = J[..., 0, 0]
        invJ /= detJ[..., None, None]
        # phys grad_i N_k = dN_k/dxi_j * invJ[j, i]
        self.grads = np.einsum("qkj,cqji->cqki", dN, invJ)
        self.JxW = detJ * self.quad.weights[None, :]

        m, q = self.JxW.shape
        B = np.zeros((m, q, 3, 8))
        B[..., 0, 0::2] = self.grads[..., 0]
        B[..., 1, 1::2] = self.grads[..., 1]
        B[..., 2, 0::2] = self.grads[..., 1]
        B[..., 2, 1::2] = self.grads[..., 0]
        self.B = B

        self.cell_udofs = self.u_map.cell_dofs(mesh.cells)    # (m, 8)
        self.cell_pdofs = self.phi_map.cell_dofs(mesh.cells)  # (m, 4)
        self._coo_u = self._coo_indices(self.cell_udofs)
        self._coo_p = self._coo_indices(self.cell_pdofs)

    @staticmethod
    def _coo_indices(cd: np.ndarray):
        m, k = cd.shape
        rows = np.repeat(cd, k, axis=1).ravel()
        cols = np.tile(cd, (1, k)).ravel()
        return rows, cols

    @property
    def n_udofs(self) -> int:
        return self.u_map.n_dofs

    @property
    def n_pdofs(self) -> int:
        return self.phi_map.n_dofs

    def scatter_vector(self, cell_values: np.ndarray, kind: str) -> np.ndarray:
        """Accumulate (m, k) element vectors into a global vector.

        Uses bincount, so the accumulation order is deterministic.
        """
        cd = self.cell_udofs if kind == "vector" else self.cell_pdofs
        n = self.n_udofs if kind == "vector" else self.n_pdofs
        return np.bincount(cd.ravel(), weights=cell_values.ravel(), minlength=n)

    def scatter_matrix(self, cell_mats: np.ndarray, kind: str) -> sp.csr_matrix:
        """Accumulate (m, k, k) element matrices into a CSR matrix."""
        rows, cols = self._coo_u if kind == "vector" else self._coo_p
        n = self.n_udofs if kind == "vector" else self.n_pdofs
        A = sp.coo_matrix((cell_mats.ravel(), (rows, cols)), shape=(n, n))
        return A.tocsr()

    def qp_values(self, nodal: np.ndarray) -> np.ndarray:
        """Interpolate a nodal scalar field to quadrature points, (m, q)."""
        return nodal[self.mesh.cells] @ self.N.T

    def qp_strains(self, u: np.ndarray):
        """Strain components at quadrature points from a flat displacement
        vector; returns (exx, eyy, exy) of shape (m, q)."""
        uc = u.reshape(-1, 2)[self.mesh.cells]                # (m, 4, 2)
        gu = np.einsum("cki,cqkj->cqij", uc, self.grads)
        exx = gu[..., 0, 0]
        eyy = gu[..., 1, 1]
        exy = 0.5 * (gu[..., 0, 1] + gu[..., 1, 0])
        return exx, eyy, exy

    def qp_vector_values(self, u: np.ndarray) -> np.ndarray:
        """Displacement values at quadrature points, (m, q, 2)."""
        uc = u.reshape(-1, 2)[self.mesh.cells]
        return np.einsum("qk,cki->cqi", self.N, uc)
