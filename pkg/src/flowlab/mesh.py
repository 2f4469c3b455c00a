"""Unstructured 2D meshes, nodal fields, quadrature, and mesh I/O.

Meshes hold triangles or bilinear quads (one kind per mesh), node
coordinates, and tagged boundary edge lists.  Everything downstream
(flow solves, interface transport, benchmark geometry) builds on the
element/quadrature helpers here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshError",
    "Mesh2D",
    "ScalarField",
    "VectorField",
    "QuadratureRule",
    "triangle_rule",
    "quad_rule",
    "edge_rule",
    "default_rule",
    "build_structured_mesh",
    "build_disk_in_square_mesh",
    "shape_functions",
    "shape_eval",
    "locate_points",
    "sample_nodal",
    "integrate",
    "boundary_length",
    "write_vtk",
    "write_mesh_text",
    "read_mesh_text",
]


class MeshError(ValueError):
    """Raised for invalid meshes (inverted or degenerate elements, bad input)."""


# ---------------------------------------------------------------------------
# mesh container


class Mesh2D:
    """Nodes, elements, and tagged boundary edges.

    Parameters
    ----------
    nodes : (N, 2) float array
    elements : (E, 3) or (E, 4) int array, counterclockwise node order
    boundary_edges : dict mapping tag -> (M, 2) int array of node pairs
    """

    def __init__(self, nodes, elements, boundary_edges=None, check=True):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=np.intp)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError("nodes must be an (N, 2) array")
        if self.elements.ndim != 2 or self.elements.shape[1] not in (3, 4):
            raise MeshError("elements must be (E, 3) triangles or (E, 4) quads")
        self.boundary_edges = {
            tag: np.ascontiguousarray(edges, dtype=np.intp).reshape(-1, 2)
            for tag, edges in (boundary_edges or {}).items()
        }
        self.structured = None  # (nx, ny, x0, y0, hx, hy) when grid-built
        if check:
            self.check_valid()

    # -- basic sizes

    @property
    def nnodes(self):
        return self.nodes.shape[0]

    @property
    def nelems(self):
        return self.elements.shape[0]

    @property
    def kind(self):
        return "tri" if self.elements.shape[1] == 3 else "quad"

    def element_coords(self):
        """Vertex coordinates per element, shape (E, nn, 2)."""
        return self.nodes[self.elements]

    # -- geometry

    def areas(self):
        """Element areas (positive for valid orientation)."""
        xy = self.element_coords()
        if self.kind == "tri":
            d1 = xy[:, 1] - xy[:, 0]
            d2 = xy[:, 2] - xy[:, 0]
            return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        # shoelace for quads
        x, y = xy[..., 0], xy[..., 1]
        xs, ys = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
        return 0.5 * np.sum(x * ys - xs * y, axis=1)

    def corner_jacobians(self):
        """det J at each element corner; > 0 everywhere means valid."""
        xy = self.element_coords()
        nn = xy.shape[1]
        prev = xy[:, np.arange(nn) - 1]
        nxt = xy[:, (np.arange(nn) + 1) % nn]
        e1 = nxt - xy
        e2 = prev - xy
        return e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]

    def check_valid(self):
        """Raise MeshError listing inverted/degenerate elements, if any."""
        if self.elements.size and (
            self.elements.min() < 0 or self.elements.max() >= self.nnodes
        ):
            raise MeshError("element connectivity references missing nodes")
        bad = np.nonzero(self.areas() <= 0)[0]
        if self.kind == "quad" and bad.size == 0:
            # convexity/orientation at corners (bilinear det J is linear per
            # coordinate, so positive corners imply positive throughout)
            bad = np.nonzero(np.any(self.corner_jacobians() <= 0, axis=1))[0]
        if bad.size:
            raise MeshError(f"invalid elements (non-positive jacobian): {bad.tolist()}")

    def boundary_nodes(self, tag=None):
        """Sorted unique node ids on one tagged boundary, or on all of them."""
        if tag is not None:
            return np.unique(self.boundary_edges[tag])
        if not self.boundary_edges:
            return np.empty(0, dtype=np.intp)
        return np.unique(np.concatenate([e.ravel() for e in self.boundary_edges.values()]))


@dataclass
class ScalarField:
    """A scalar sampled at nodes (location='node') or cells (location='cell')."""

    mesh: Mesh2D
    values: np.ndarray
    location: str = "node"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.mesh.nnodes if self.location == "node" else self.mesh.nelems
        if self.values.shape != (expected,):
            raise MeshError(
                f"scalar field shape {self.values.shape} does not match "
                f"{self.location} count {expected}"
            )


@dataclass
class VectorField:
    """A 2-vector sampled at nodes or cells; values shape (count, 2)."""

    mesh: Mesh2D
    values: np.ndarray
    location: str = "node"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.mesh.nnodes if self.location == "node" else self.mesh.nelems
        if self.values.shape != (expected, 2):
            raise MeshError(
                f"vector field shape {self.values.shape} does not match "
                f"{self.location} count {expected}"
            )


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-element quadrature: points (q, d), weights (q,)."""

    name: str
    points: np.ndarray
    weights: np.ndarray


def triangle_rule():
    """Midpoint rule on the unit triangle, exact through degree 2."""
    pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
    wts = np.full(3, 1 / 6)
    return QuadratureRule("tri-midedge-3", pts, wts)


def quad_rule():
    """2x2 Gauss on [-1, 1]^2, exact through bi-degree 3."""
    g = 1.0 / np.sqrt(3.0)
    pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    wts = np.ones(4)
    return QuadratureRule("quad-gauss-2x2", pts, wts)


def edge_rule():
    """2-point Gauss on [-1, 1], exact through degree 3."""
    g = 1.0 / np.sqrt(3.0)
    pts = np.array([[-g], [g]])
    wts = np.ones(2)
    return QuadratureRule("edge-gauss-2", pts, wts)


def default_rule(kind):
    if kind == "tri":
        return triangle_rule()
    if kind == "quad":
        return quad_rule()
    if kind == "edge":
        return edge_rule()
    raise MeshError(f"no quadrature rule for element kind {kind!r}")


# ---------------------------------------------------------------------------
# shape functions


def shape_functions(kind, ref_points):
    """Shape values and reference gradients at reference points.

    Returns (N, dN) with N of shape (q, nn) and dN of shape (q, nn, 2).
    Triangles use barycentric P1 on the unit triangle, quads bilinear Q1
    on [-1, 1]^2.
    """
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    q = pts.shape[0]
    if kind == "tri":
        xi, eta = pts[:, 0], pts[:, 1]
        N = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        dN = np.broadcast_to(
            np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (q, 3, 2)
        ).copy()
        return N, dN
    if kind == "quad":
        xi, eta = pts[:, 0], pts[:, 1]
        N = 0.25 * np.stack(
            [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
             (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)],
            axis=1,
        )
        dN = np.empty((q, 4, 2))
        dN[:, 0] = np.stack([-(1 - eta), -(1 - xi)], axis=1) * 0.25
        dN[:, 1] = np.stack([(1 - eta), -(1 + xi)], axis=1) * 0.25
        dN[:, 2] = np.stack([(1 + eta), (1 + xi)], axis=1) * 0.25
        dN[:, 3] = np.stack([-(1 + eta), (1 - xi)], axis=1) * 0.25
        return N, dN
    raise MeshError(f"unknown element kind {kind!r}")


def element_geometry(mesh, ref_points):
    """Mapped quadrature data for every element at once.

    Returns (N, grads, detJ, xq):
      N     (q, nn)        shape values (reference, shared by all elements)
      grads (E, q, nn, 2)  physical shape gradients
      detJ  (E, q)         jacobian determinants
      xq    (E, q, 2)      mapped points
    """
    N, dN = shape_functions(mesh.kind, ref_points)
    xy = mesh.element_coords()  # (E, nn, 2)
    # J[e,q,i,j] = d x_i / d xi_j
    J = np.einsum("enk,qni->eqki", xy, dN)
    detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1]
    inv[..., 0, 1] = -J[..., 0, 1]
    inv[..., 1, 0] = -J[..., 1, 0]
    inv[..., 1, 1] = J[..., 0, 0]
    inv /= detJ[..., None, None]
    grads = np.einsum("qnj,eqji->eqni", dN, inv)
    xq = np.einsum("qn,enk->eqk", N, xy)
    return N, grads, detJ, xq


def shape_eval(mesh, elem, ref_points):
    """Shape data for a single element at reference points.

    Returns (N, grads, detJ) with shapes (q, nn), (q, nn, 2), (q,).
    Raises MeshError when the mapping degenerates (detJ <= 0).
    """
    sub = Mesh2D(mesh.nodes, mesh.elements[elem : elem + 1], check=False)
    N, grads, detJ, _ = element_geometry(sub, ref_points)
    if np.any(detJ[0] <= 0):
        raise MeshError(f"element {elem} has non-positive jacobian at evaluation points")
    return N, grads[0], detJ[0]


# ---------------------------------------------------------------------------
# constructors


def build_structured_mesh(nx, ny, extent=(0.0, 1.0, 0.0, 1.0), kind="quad"):
    """Structured mesh of nx-by-ny cells on a rectangle.

    extent is (x0, x1, y0, y1).  kind='quad' keeps the cells, kind='tri'
    splits each cell into two triangles along the /-diagonal.  Boundary
    edges carry the tags 'left', 'right', 'bottom', 'top'.
    """
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    x0, x1, y0, y1 = map(float, extent)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    quads = np.column_stack(
        [nid(ii, jj), nid(ii + 1, jj), nid(ii + 1, jj + 1), nid(ii, jj + 1)]
    )
    if kind == "quad":
        elements = quads
    elif kind == "tri":
        elements = np.empty((2 * quads.shape[0], 3), dtype=np.intp)
        elements[0::2] = quads[:, [0, 1, 2]]
        elements[1::2] = quads[:, [0, 2, 3]]
    else:
        raise MeshError(f"unknown mesh kind {kind!r}")

    j = np.arange(ny)
    i = np.arange(nx)
    boundary = {
        "left": np.column_stack([nid(0, j + 1), nid(0, j)]),
        "right": np.column_stack([nid(nx, j), nid(nx, j + 1)]),
        "bottom": np.column_stack([nid(i, 0), nid(i + 1, 0)]),
        "top": np.column_stack([nid(i + 1, ny), nid(i, ny)]),
    }
    mesh = Mesh2D(nodes, elements, boundary)
    mesh.structured = (nx, ny, x0, y0, (x1 - x0) / nx, (y1 - y0) / ny)
    return mesh


def build_disk_mesh(n_around, n_radial, radius, center=(0.0, 0.0)):
    """Triangle mesh of a disk: center fan plus concentric rings.

    Boundary tag 'rim' covers the outer circle (counterclockwise).
    """
    if n_around < 8:
        raise MeshError("n_around must be at least 8")
    cx, cy = center
    theta = 2 * np.pi * np.arange(n_around) / n_around
    ct, st = np.cos(theta), np.sin(theta)
    nodes = [np.array([[cx, cy]])]
    rings = []
    next_id = 1
    for k in range(1, n_radial + 1):
        r = radius * k / n_radial
        rings.append(np.arange(next_id, next_id + n_around))
        nodes.append(np.column_stack([cx + r * ct, cy + r * st]))
        next_id += n_around
    nodes = np.concatenate(nodes, axis=0)
    elements = []
    first = rings[0]
    for a in range(n_around):
        b = (a + 1) % n_around
        elements.append([0, first[a], first[b]])
    for inner, outer in zip(rings[:-1], rings[1:]):
        for a in range(n_around):
            b = (a + 1) % n_around
            elements.append([inner[a], outer[a], outer[b]])
            elements.append([inner[a], outer[b], inner[b]])
    rim = rings[-1]
    boundary = {"rim": np.column_stack([rim, np.roll(rim, -1)])}
    return Mesh2D(nodes, np.asarray(elements, dtype=np.intp), boundary)


def build_annulus_mesh(n_around, n_radial, r_inner, r_outer, center=(0.0, 0.0),
                       grading=1.0):
    """Triangle mesh of an annulus with tags 'inner' and 'outer'.

    grading > 1 concentrates rings near the inner circle (ring radii follow
    a power law), which is the usual setup for boundary-bulge experiments.
    """
    if n_around < 8:
        raise MeshError("n_around must be at least 8")
    if not 0 < r_inner < r_outer:
        raise MeshError("need 0 < r_inner < r_outer")
    cx, cy = center
    theta = 2 * np.pi * np.arange(n_around) / n_around
    ct, st = np.cos(theta), np.sin(theta)
    s = (np.arange(n_radial + 1) / n_radial) ** grading
    radii = r_inner + (r_outer - r_inner) * s
    nodes = []
    rings = []
    for k, r in enumerate(radii):
        rings.append(np.arange(k * n_around, (k + 1) * n_around))
        nodes.append(np.column_stack([cx + r * ct, cy + r * st]))
    nodes = np.concatenate(nodes, axis=0)
    elements = []
    for inner, outer in zip(rings[:-1], rings[1:]):
        for a in range(n_around):
            b = (a + 1) % n_around
            elements.append([inner[a], outer[a], outer[b]])
            elements.append([inner[a], outer[b], inner[b]])
    boundary = {
        "inner": np.column_stack([rings[0], np.roll(rings[0], -1)]),
        "outer": np.column_stack([rings[-1], np.roll(rings[-1], -1)]),
    }
    return Mesh2D(nodes, np.asarray(elements, dtype=np.intp), boundary)


def build_disk_in_square_mesh(n_around, n_radial_in, n_radial_out, radius,
                              half_width, center=(0.0, 0.0)):
    """Triangle mesh of a square with an embedded circular interface ring.

    The mesh conforms to the circle of the given radius: one node ring
    sits exactly on it, so two-phase solves can double unknowns there.
    Inside the circle: a center fan plus n_radial_in graded rings; outside:
    n_radial_out rings blending the circle into the square of half-width
    half_width.  Returns (mesh, interface_nodes) with interface_nodes in
    counterclockwise order.

    Boundary tag 'outer' covers the four square sides.
    """
    if n_around < 8 or n_around % 4:
        raise MeshError("n_around must be a multiple of 4 and at least 8")
    if radius >= half_width:
        raise MeshError("circle must fit inside the square")
    cx, cy = center
    theta = 2 * np.pi * np.arange(n_around) / n_around
    ct, st = np.cos(theta), np.sin(theta)

    nodes = [np.array([[cx, cy]])]
    rings = []  # node-id arrays, inner to outer
    next_id = 1
    # interior rings, radius graded toward the interface
    for k in range(1, n_radial_in + 1):
        r = radius * k / n_radial_in
        ring = np.arange(next_id, next_id + n_around)
        nodes.append(np.column_stack([cx + r * ct, cy + r * st]))
        rings.append(ring)
        next_id += n_around
    interface_nodes = rings[-1].copy()
    # exterior rings blend the circle into the square outline
    s_sq = half_width / np.maximum(np.abs(ct), np.abs(st))
    for k in range(1, n_radial_out + 1):
        t = k / n_radial_out
        r = radius + t * (s_sq - radius)
        ring = np.arange(next_id, next_id + n_around)
        nodes.append(np.column_stack([cx + r * ct, cy + r * st]))
        rings.append(ring)
        next_id += n_around
    nodes = np.concatenate(nodes, axis=0)

    elements = []
    first = rings[0]
    for a in range(n_around):
        b = (a + 1) % n_around
        elements.append([0, first[a], first[b]])
    for inner, outer in zip(rings[:-1], rings[1:]):
        for a in range(n_around):
            b = (a + 1) % n_around
            elements.append([inner[a], outer[a], outer[b]])
            elements.append([inner[a], outer[b], inner[b]])
    elements = np.asarray(elements, dtype=np.intp)

    last = rings[-1]
    outer_edges = np.column_stack([last, np.roll(last, -1)])
    mesh = Mesh2D(nodes, elements, {"outer": outer_edges})
    return mesh, interface_nodes


# ---------------------------------------------------------------------------
# point location and sampling


def locate_points(mesh, points, tol=1e-10):
    """Find containing elements and reference coordinates for points.

    Returns (elem_ids, ref_coords).  Structured quad meshes use index
    arithmetic; triangle meshes use a vectorized barycentric search.
    Points outside the mesh raise MeshError.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.structured is not None and mesh.kind == "quad":
        nx, ny, x0, y0, hx, hy = mesh.structured
        fi = np.clip((pts[:, 0] - x0) / hx, 0, nx * (1 - 1e-16))
        fj = np.clip((pts[:, 1] - y0) / hy, 0, ny * (1 - 1e-16))
        i, j = np.floor(fi).astype(np.intp), np.floor(fj).astype(np.intp)
        i, j = np.minimum(i, nx - 1), np.minimum(j, ny - 1)
        if np.any(fi < -tol) or np.any(fj < -tol) or \
           np.any(fi > nx + tol) or np.any(fj > ny + tol):
            raise MeshError("points outside the structured mesh")
        elems = i * ny + j
        ref = np.column_stack([2 * (fi - i) - 1, 2 * (fj - j) - 1])
        return elems, ref
    if mesh.kind != "tri":
        raise MeshError("general point location is implemented for triangle meshes")
    xy = mesh.element_coords()  # (E, 3, 2)
    a, b, c = xy[:, 0], xy[:, 1], xy[:, 2]
    det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
           - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    d = pts[:, None, :] - a[None, :, :]  # (P, E, 2)
    l1 = (d[..., 0] * (c[:, 1] - a[:, 1]) - d[..., 1] * (c[:, 0] - a[:, 0])) / det
    l2 = ((b[:, 0] - a[:, 0]) * d[..., 1] - (b[:, 1] - a[:, 1]) * d[..., 0]) / det
    inside = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)
    if not np.all(inside.any(axis=1)):
        missing = np.nonzero(~inside.any(axis=1))[0]
        raise MeshError(f"points outside the mesh: indices {missing.tolist()}")
    # prefer the element with the most interior coordinates
    score = np.where(inside, np.minimum(np.minimum(l1, l2), 1 - l1 - l2), -np.inf)
    elems = np.argmax(score, axis=1)
    rows = np.arange(pts.shape[0])
    ref = np.column_stack([l1[rows, elems], l2[rows, elems]])
    return elems, ref


def sample_nodal(mesh, values, points):
    """Interpolate a nodal field (scalar (N,) or vector (N, k)) at points."""
    vals = np.asarray(values, dtype=float)
    elems, ref = locate_points(mesh, points)
    N, _ = shape_functions(mesh.kind, ref)
    conn = mesh.elements[elems]  # (P, nn)
    gathered = vals[conn]  # (P, nn) or (P, nn, k)
    if gathered.ndim == 2:
        return np.einsum("pn,pn->p", N, gathered)
    return np.einsum("pn,pnk->pk", N, gathered)


# ---------------------------------------------------------------------------
# integration


def integrate(mesh, integrand, rule=None):
    """Integrate over the mesh with the element quadrature rule.

    integrand may be a ScalarField, a nodal array (N,), a cell array (E,),
    or a callable f(x) evaluated at mapped quadrature points (x of shape
    (..., 2)).
    """
    rule = rule or default_rule(mesh.kind)
    N, _, detJ, xq = element_geometry(mesh, rule.points)
    w = rule.weights

    if isinstance(integrand, ScalarField):
        loc, vals = integrand.location, integrand.values
    elif callable(integrand):
        loc, vals = "callable", None
    else:
        arr = np.asarray(integrand, dtype=float)
        if arr.shape == (mesh.nnodes,):
            loc, vals = "node", arr
        elif arr.shape == (mesh.nelems,):
            loc, vals = "cell", arr
        else:
            raise MeshError("integrand has neither node nor cell length")

    if loc == "node":
        fq = N[None, :, :] @ vals[mesh.elements][..., None]
        fq = fq[..., 0]
    elif loc == "cell":
        fq = vals[:, None] * np.ones_like(detJ)
    else:
        fq = np.asarray(integrand(xq), dtype=float)
    return float(np.einsum("eq,eq,q->", fq, detJ, w))


def boundary_length(mesh, tag):
    """Total length of one tagged boundary."""
    edges = mesh.boundary_edges[tag]
    d = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


# ---------------------------------------------------------------------------
# I/O


def write_vtk(path, mesh, point_data=None, cell_data=None, title="flowlab output"):
    """Write the mesh and named fields as legacy ASCII VTK."""
    cell_type = 5 if mesh.kind == "tri" else 9
    nn = mesh.elements.shape[1]
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.nnodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g} 0")
    lines.append(f"CELLS {mesh.nelems} {mesh.nelems * (nn + 1)}")
    for conn in mesh.elements:
        lines.append(f"{nn} " + " ".join(str(int(c)) for c in conn))
    lines.append(f"CELL_TYPES {mesh.nelems}")
    lines.extend([str(cell_type)] * mesh.nelems)

    def emit(block, count, data):
        lines.append(f"{block} {count}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.17g}" for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                for row in arr:
                    z = row[2] if arr.shape[1] > 2 else 0.0
                    lines.append(f"{row[0]:.17g} {row[1]:.17g} {z:.17g}")

    if point_data:
        emit("POINT_DATA", mesh.nnodes, point_data)
    if cell_data:
        emit("CELL_DATA", mesh.nelems, cell_data)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_mesh_text(path, mesh):
    """Plain-text mesh dump (see read_mesh_text for the format)."""
    lines = [f"nodes {mesh.nnodes}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.nodes)
    lines.append(f"elements {mesh.nelems} {mesh.elements.shape[1]}")
    lines.extend(" ".join(str(int(c)) for c in conn) for conn in mesh.elements)
    for tag, edges in mesh.boundary_edges.items():
        lines.append(f"boundary {tag} {edges.shape[0]}")
        lines.extend(f"{int(a)} {int(b)}" for a, b in edges)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh_text(path):
    """Read the plain-text mesh format.

    Format (blank lines and '#' comments allowed):
        nodes N
        x y                  (N lines)
        elements E nn
        i j k [l]            (E lines)
        boundary tag M       (repeatable)
        i j                  (M lines)
    """
    with open(path) as fh:
        tokens = [
            ln.strip() for ln in fh
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(tokens):
            raise MeshError(f"{path}: truncated mesh file")
        line = tokens[pos]
        pos += 1
        return line

    header = take().split()
    if header[0] != "nodes":
        raise MeshError(f"{path}: expected 'nodes N' header")
    nnodes = int(header[1])
    nodes = np.array([[float(v) for v in take().split()] for _ in range(nnodes)])
    header = take().split()
    if header[0] != "elements":
        raise MeshError(f"{path}: expected 'elements E nn' header")
    nelems, nn = int(header[1]), int(header[2])
    elements = np.array(
        [[int(v) for v in take().split()[:nn]] for _ in range(nelems)], dtype=np.intp
    )
    boundary = {}
    while pos < len(tokens):
        header = take().split()
        if header[0] != "boundary":
            raise MeshError(f"{path}: expected 'boundary tag M' header")
        tag, m = header[1], int(header[2])
        boundary[tag] = np.array(
            [[int(v) for v in take().split()[:2]] for _ in range(m)], dtype=np.intp
        )
    return Mesh2D(nodes, elements, boundary)
