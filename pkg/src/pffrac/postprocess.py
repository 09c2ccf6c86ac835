"""Surface-load evaluation and output writers (CSV series, legacy VTK).

The surface load on a tagged boundary is the line integral of the
traction sigma(u) nu, by default with the degraded stress
g(phi) sig+ + sig-, using 2-point Gauss quadrature per facet.  Stresses
are evaluated inside the unique cell adjacent to each facet.  Units are
kN and mm, so forces are per unit out-of-plane thickness [kN/mm].

Writers format floats with %.17g so values survive a text round trip
bit-exactly and output is deterministic.
"""

from __future__ import annotations

import io
from typing import TYPE_CHECKING, Iterable

import numpy as np

from . import material
from .fem import gauss_1d_2pt, map_gradients, shape_values
from .material import MaterialParams
from .mesh import Mesh

if TYPE_CHECKING:  # pragma: no cover
    from .driver import StepReport
    from .subsolvers import FieldState

CSV_HEADER = "t,u_top,Fx,Fy,outer_iters,converged,maxL,min_phi"


def _edge_to_cell(mesh: Mesh) -> dict[tuple[int, int], int]:
    table: dict[tuple[int, int], int] = {}
    for c, quad in enumerate(mesh.cells):
        for k in range(4):
            a, b = int(quad[k]), int(quad[(k + 1) % 4])
            table[(min(a, b), max(a, b))] = c
    return table


def _inverse_map(cell_coords: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Reference coordinates of the physical point p inside one cell."""
    scale = max(1.0, float(np.abs(cell_coords).max()))
    xi = np.zeros(2)
    for _ in range(30):
        N, dN = shape_values(xi)
        r = N @ cell_coords - p
        if np.abs(r).max() <= 1.0e-13 * scale:
            return xi
        J = cell_coords.T @ dN
        xi -= np.linalg.solve(J, r)
    raise RuntimeError("inverse cell map did not converge")


def surface_load(u: np.ndarray, phi: np.ndarray, mesh: Mesh,
                 params: MaterialParams, tag: str = "top",
                 degraded: bool = True) -> tuple[float, float]:
    """Integrated traction over all facets with the given tag.

    With ``degraded`` the transmitted stress g(phi) sig+ + sig- is used;
    otherwise the undamaged stress sig+ + sig-.
    """
    facets = mesh.facets(tag)
    if facets.shape[0] == 0:
        raise ValueError(f"no boundary facets tagged {tag!r}")
    table = _edge_to_cell(mesh)
    uu = u.reshape(-1, 2)
    pts1d, w1d = gauss_1d_2pt()
    F = np.zeros(2)
    for i, j in facets:
        c = table.get((min(int(i), int(j)), max(int(i), int(j))))
        if c is None:
            raise ValueError(f"facet ({i}, {j}) has no adjacent cell")
        pa, pb = mesh.nodes[int(i)], mesh.nodes[int(j)]
        tangent = pb - pa
        length = float(np.linalg.norm(tangent))
        that = tangent / length
        nu = np.array([that[1], -that[0]])
        coords = mesh.nodes[mesh.cells[c]]
        ucell = uu[mesh.cells[c]]
        pcell = phi[mesh.cells[c]]
        for s, w in zip(pts1d, w1d):
            p = 0.5 * (pa + pb) + 0.5 * s * tangent
            xi = _inverse_map(coords, p)
            N, dN = shape_values(xi)
            grads, _ = map_gradients(coords, dN)
            gu = ucell.T @ grads                     # (2, 2) displacement gradient
            e = material.strain(gu)
            sp_, sm_ = material.stress_split(e, params)
            g = material.degradation(float(N @ pcell), params.kappa) if degraded else 1.0
            sxx = g * sp_.xx + sm_.xx
            syy = g * sp_.yy + sm_.yy
            sxy = g * sp_.xy + sm_.xy
            traction = np.array([sxx * nu[0] + sxy * nu[1],
                                 sxy * nu[0] + syy * nu[1]])
            F += w * 0.5 * length * traction
    return float(F[0]), float(F[1])


# ---------------------------------------------------------------------------
# CSV series
# ---------------------------------------------------------------------------

def format_csv_row(rep: "StepReport") -> str:
    return ("%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%.17g"
            % (rep.t, rep.u_top, rep.f_x, rep.f_y, rep.outer_iters,
               int(rep.converged), rep.max_l, rep.min_phi))


def write_series_csv(reports: Iterable["StepReport"], path) -> None:
    """Write one row per loading step under the fixed header."""
    reports = list(reports)
    if not reports:
        raise ValueError("no step reports to write")
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for rep in reports:
        buf.write(format_csv_row(rep) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# legacy VTK
# ---------------------------------------------------------------------------

def write_vtk(state: "FieldState", mesh: Mesh, path, title: str = "pffrac fields") -> None:
    """Unstructured-grid snapshot with point data phi, u, Xi, L."""
    n, m = mesh.n_nodes, mesh.n_cells
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title[:255].replace("\n", " ") + "\n")
    buf.write("ASCII\n")
    buf.write("DATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {n} double\n")
    for x, y in mesh.nodes:
        buf.write("%.17g %.17g 0\n" % (x, y))
    buf.write(f"CELLS {m} {5 * m}\n")
    for quad in mesh.cells:
        buf.write("4 %d %d %d %d\n" % tuple(quad))
    buf.write(f"CELL_TYPES {m}\n")
    for _ in range(m):
        buf.write("9\n")
    buf.write(f"POINT_DATA {n}\n")
    buf.write("SCALARS phi double 1\nLOOKUP_TABLE default\n")
    for v in state.phi:
        buf.write("%.17g\n" % v)
    buf.write("VECTORS u double\n")
    uu = state.u.reshape(-1, 2)
    for x, y in uu:
        buf.write("%.17g %.17g 0\n" % (x, y))
    buf.write("SCALARS Xi double 1\nLOOKUP_TABLE default\n")
    for v in state.xi:
        buf.write("%.17g\n" % v)
    buf.write("SCALARS L double 1\nLOOKUP_TABLE default\n")
    for v in state.lfield:
        buf.write("%.17g\n" % v)
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
