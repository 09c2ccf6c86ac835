"""Quadrilateral meshes: structured generation, slit insertion, file I/O.

Meshes are plain node/cell arrays with tagged boundary facets.  A slit
(a pre-existing crack along interior mesh edges) is represented by
duplicating the nodes along the slit segment so the two crack faces can
move apart; the faces are tagged ``slit_lower``/``slit_upper``.  A slit
endpoint interior to the domain acts as the crack tip and keeps a single
shared node; an endpoint on the outer boundary is split like the rest.

Facets are oriented counterclockwise with respect to the subdomain they
bound, so the outward unit normal of a facet (i, j) with tangent t is
(t_y, -t_x)/|t|.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

KNOWN_TAGS = ("left", "right", "bottom", "top", "slit_lower", "slit_upper", "other")

GEOM_TOL = 1.0e-12


class MeshError(ValueError):
    """Raised for malformed meshes or mesh files."""


@dataclass(frozen=True)
class SlitSpec:
    """Horizontal slit from (x0, y) to (x1, y), both endpoints mesh nodes."""

    start: tuple[float, float]
    end: tuple[float, float]

    def __post_init__(self):
        if abs(self.start[1] - self.end[1]) > GEOM_TOL:
            raise MeshError("only horizontal (axis-aligned) slits are supported")
        if self.end[0] < self.start[0]:
            raise MeshError("slit must be given left to right")


@dataclass(frozen=True)
class Mesh:
    """Q1 mesh: nodes (n, 2), cells (m, 4) counterclockwise, tagged facets.

    ``boundary_facets`` is an ordered list of (node_i, node_j, tag).
    Arrays are frozen after construction.
    """

    nodes: np.ndarray
    cells: np.ndarray
    boundary_facets: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cells", cells)
        validate_mesh(self)
        nodes.setflags(write=False)
        cells.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def h(self) -> float:
        """Smallest cell diameter (longer diagonal per cell, min over cells)."""
        p = self.nodes[self.cells]
        d1 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        d2 = np.linalg.norm(p[:, 3] - p[:, 1], axis=1)
        return float(np.min(np.maximum(d1, d2)))

    def facets(self, tag: str) -> np.ndarray:
        """(k, 2) node index pairs of all facets with the given tag."""
        pairs = [(i, j) for i, j, t in self.boundary_facets if t == tag]
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def boundary_nodes(self, tag: str) -> np.ndarray:
        """Sorted unique node indices on all facets with the given tag."""
        return np.unique(self.facets(tag))


def _cell_areas(nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    p = nodes[cells]
    x, y = p[..., 0], p[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    return 0.5 * np.sum(x * yn - xn * y, axis=1)


def validate_mesh(mesh: Mesh) -> None:
    """Check index ranges, orientation and facet sanity; raise MeshError."""
    nodes, cells = mesh.nodes, mesh.cells
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshError(f"nodes must be (n, 2), got {nodes.shape}")
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise MeshError(f"cells must be (m, 4), got {cells.shape}")
    if not np.all(np.isfinite(nodes)):
        raise MeshError("non-finite node coordinates")
    n = nodes.shape[0]
    if cells.size and (cells.min() < 0 or cells.max() >= n):
        raise MeshError("cell refers to a node out of range")
    for c in range(cells.shape[0]):
        if len(set(cells[c])) != 4:
            raise MeshError(f"cell {c} has repeated nodes")
    if cells.size:
        areas = _cell_areas(nodes, cells)
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshError(f"cell {bad[0]} is not counterclockwise (signed area "
                            f"{areas[bad[0]]:.3e})")
    edges = set()
    if cells.size:
        for quad in cells:
            for k in range(4):
                a, b = int(quad[k]), int(quad[(k + 1) % 4])
                edges.add((min(a, b), max(a, b)))
    for i, j, tag in mesh.boundary_facets:
        if tag not in KNOWN_TAGS:
            raise MeshError(f"unknown facet tag {tag!r}")
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise MeshError(f"facet ({i}, {j}) is invalid")
        if (min(i, j), max(i, j)) not in edges:
            raise MeshError(f"facet ({i}, {j}) is not an edge of any cell")


# ---------------------------------------------------------------------------
# structured generation
# ---------------------------------------------------------------------------

def generate_unit_square_mesh(nx: int, ny: int | None = None) -> Mesh:
    """Uniform nx-by-ny mesh of the unit square with tagged outer boundary.

    Node (i, j) sits at (i/nx, j/ny) with index j*(nx+1) + i.  Boundary
    facets traverse the outer boundary counterclockwise.
    """
    if ny is None:
        ny = nx
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys)                      # Y varies along axis 0
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    n0 = (j * (nx + 1) + i).ravel()
    cells = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    def node(ii, jj):
        return jj * (nx + 1) + ii

    facets: list[tuple[int, int, str]] = []
    for ii in range(nx):                                    # bottom, left to right
        facets.append((node(ii, 0), node(ii + 1, 0), "bottom"))
    for jj in range(ny):                                    # right, upwards
        facets.append((node(nx, jj), node(nx, jj + 1), "right"))
    for ii in range(nx, 0, -1):                             # top, right to left
        facets.append((node(ii, ny), node(ii - 1, ny), "top"))
    for jj in range(ny, 0, -1):                             # left, downwards
        facets.append((node(0, jj), node(0, jj - 1), "left"))
    return Mesh(nodes, cells, facets)


# ---------------------------------------------------------------------------
# slit insertion
# ---------------------------------------------------------------------------

def _find_node(nodes: np.ndarray, p, tol: float) -> int:
    d = np.abs(nodes - np.asarray(p, dtype=float)).max(axis=1)
    hits = np.nonzero(d <= tol)[0]
    if hits.size != 1:
        raise MeshError(f"slit endpoint {tuple(p)} is not a mesh node")
    return int(hits[0])


def insert_slit(mesh: Mesh, slit: SlitSpec) -> Mesh:
    """Split the mesh along the slit segment by duplicating nodes.

    Every node on the segment gets a second copy for the upper face,
    except an endpoint lying inside the domain (the crack tip), which
    stays shared so the faces remain joined there.  An endpoint on the
    outer boundary is duplicated like the interior nodes, so the crack
    is open where it meets the boundary.  Cells whose centroid lies
    above the slit line are rewired to the copies; the original nodes
    stay with the lower side.  Facets ``slit_lower`` / ``slit_upper``
    cover the segment on either side, and outer-boundary facets above
    the slit follow the rewired cells.  A zero-length slit returns the
    mesh unchanged.
    """
    x0, y = slit.start
    x1 = slit.end[0]
    if abs(x1 - x0) <= GEOM_TOL:
        return mesh
    tol = GEOM_TOL * max(1.0, float(np.abs(mesh.nodes).max()))
    _find_node(mesh.nodes, slit.start, tol)
    _find_node(mesh.nodes, slit.end, tol)

    on_line = np.abs(mesh.nodes[:, 1] - y) <= tol
    in_span = (mesh.nodes[:, 0] >= x0 - tol) & (mesh.nodes[:, 0] <= x1 + tol)
    seg = np.nonzero(on_line & in_span)[0]
    seg = seg[np.argsort(mesh.nodes[seg, 0])]
    if seg.size < 2:
        raise MeshError("slit segment contains no mesh edge")

    edges = set()
    for quad in mesh.cells:
        for k in range(4):
            a, b = int(quad[k]), int(quad[(k + 1) % 4])
            edges.add((min(a, b), max(a, b)))
    for a, b in zip(seg[:-1], seg[1:]):
        if (min(a, b), max(a, b)) not in edges:
            raise MeshError("slit segment does not follow existing mesh edges")

    on_outer = set()
    for i, j, _tag in mesh.boundary_facets:
        on_outer.add(int(i))
        on_outer.add(int(j))
    dup = [int(v) for k, v in enumerate(seg)
           if 0 < k < seg.size - 1 or int(v) in on_outer]
    n_old = mesh.n_nodes
    nodes = np.vstack([mesh.nodes, mesh.nodes[dup]])
    twin = {old: n_old + k for k, old in enumerate(dup)}

    cells = mesh.cells.copy()
    if dup:
        touches = np.isin(cells, np.array(dup)).any(axis=1)
        centroids = mesh.nodes[cells].mean(axis=1)
        above = touches & (centroids[:, 1] > y)
        for c in np.nonzero(above)[0]:
            cells[c] = [twin.get(int(v), int(v)) for v in cells[c]]

    new_edges = set()
    for quad in cells:
        for k in range(4):
            a, b = int(quad[k]), int(quad[(k + 1) % 4])
            new_edges.add((min(a, b), max(a, b)))

    facets: list[tuple[int, int, str]] = []
    for i, j, tag in mesh.boundary_facets:
        i, j = int(i), int(j)
        if i in twin or j in twin:
            cand = [(a, b)
                    for a in ((i, twin[i]) if i in twin else (i,))
                    for b in ((j, twin[j]) if j in twin else (j,))]
            hits = [p for p in cand if (min(p), max(p)) in new_edges]
            if len(hits) != 1:
                raise MeshError(f"cannot remap boundary facet ({i}, {j}) "
                                "across the slit")
            i, j = hits[0]
        facets.append((i, j, tag))
    # lower face right-to-left, upper face left-to-right (outward normals
    # point away from the respective subdomain)
    for a, b in zip(seg[:-1], seg[1:]):
        facets.append((int(b), int(a), "slit_lower"))
    for a, b in zip(seg[:-1], seg[1:]):
        facets.append((twin.get(int(a), int(a)), twin.get(int(b), int(b)), "slit_upper"))
    return Mesh(nodes, cells, facets)


def notched_unit_square(n: int) -> Mesh:
    """Unit square, n x n cells, edge slit from (0, 0.5) to (0.5, 0.5).

    n must be even so the slit runs along mesh edges and ends on a node.
    """
    if n % 2:
        raise MeshError("cell count per side must be even for the mid-edge slit")
    base = generate_unit_square_mesh(n)
    return insert_slit(base, SlitSpec((0.0, 0.5), (0.5, 0.5)))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh format (floats survive a round trip)."""
    buf = io.StringIO()
    buf.write("quadmesh 1\n")
    buf.write(f"nodes {mesh.n_nodes}\n")
    for x, yy in mesh.nodes:
        buf.write(f"{x:.17g} {yy:.17g}\n")
    buf.write(f"cells {mesh.n_cells}\n")
    for quad in mesh.cells:
        buf.write(f"{quad[0]} {quad[1]} {quad[2]} {quad[3]}\n")
    buf.write(f"bfacets {len(mesh.boundary_facets)}\n")
    for i, j, tag in mesh.boundary_facets:
        buf.write(f"{i} {j} {tag}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_mesh(path) -> Mesh:
    """Read the plain-text mesh format; errors carry the line number."""
    with open(path) as fh:
        raw = fh.readlines()
    lines = []  # (lineno, tokens) with comments and blanks stripped
    for no, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            lines.append((no, body.split()))
    pos = 0

    def take(what: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"{path}: unexpected end of file while reading {what}")
        item = lines[pos]
        pos += 1
        return item

    no, tok = take("header")
    if tok != ["quadmesh", "1"]:
        raise MeshError(f"{path}:{no}: expected header 'quadmesh 1'")

    def section(name: str) -> int:
        no, tok = take(f"'{name}' count")
        if len(tok) != 2 or tok[0] != name:
            raise MeshError(f"{path}:{no}: expected '{name} <count>'")
        try:
            cnt = int(tok[1])
        except ValueError:
            raise MeshError(f"{path}:{no}: bad count {tok[1]!r}") from None
        if cnt < 0:
            raise MeshError(f"{path}:{no}: negative count")
        return cnt

    n = section("nodes")
    nodes = np.empty((n, 2))
    for k in range(n):
        no, tok = take("node line")
        if len(tok) != 2:
            raise MeshError(f"{path}:{no}: node line needs 2 coordinates")
        try:
            nodes[k] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshError(f"{path}:{no}: bad coordinate") from None

    m = section("cells")
    cells = np.empty((m, 4), dtype=np.int64)
    for k in range(m):
        no, tok = take("cell line")
        if len(tok) != 4:
            raise MeshError(f"{path}:{no}: cell line needs 4 node indices")
        try:
            cells[k] = [int(t) for t in tok]
        except ValueError:
            raise MeshError(f"{path}:{no}: bad node index") from None

    kf = section("bfacets")
    facets: list[tuple[int, int, str]] = []
    for k in range(kf):
        no, tok = take("facet line")
        if len(tok) != 3:
            raise MeshError(f"{path}:{no}: facet line needs 'i j tag'")
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise MeshError(f"{path}:{no}: bad facet node index") from None
        if tok[2] not in KNOWN_TAGS:
            raise MeshError(f"{path}:{no}: unknown facet tag {tok[2]!r}")
        facets.append((i, j, tok[2]))
    if pos != len(lines):
        no, _ = lines[pos]
        raise MeshError(f"{path}:{no}: trailing content after facet section")
    try:
        return Mesh(nodes, cells, facets)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from None
