"""Boundary-conforming interface tracking and mesh motion.

An interface is an ordered polyline (optionally tied to mesh node ids).
The kinematic condition v . n = u . n is satisfied nodewise by every
displacement mode; mesh motion extends boundary displacement into the
volume either as an elastic deformation (with inverse-area stiffening of
small elements) or as a componentwise harmonic field.  Updates that would
invert elements are rejected loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .mesh import Mesh2D, MeshError, default_rule, element_geometry

__all__ = [
    "TrackingError",
    "InterfacePolyline",
    "MeshMotionParams",
    "boundary_velocity",
    "mass_flux",
    "osculating_curvature",
    "elastic_mesh_update",
    "laplace_mesh_update",
    "mesh_quality",
]


class TrackingError(RuntimeError):
    pass


def _segments_intersect(p1, p2, p3, p4):
    """Proper intersection test for segments p1p2 and p3p4."""
    d = np.array([p2 - p1, p4 - p3])
    r = p3 - p1
    den = d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
    if abs(den) < 1e-14:
        return False
    t = (r[0] * d[1, 1] - r[1] * d[1, 0]) / den
    s = (r[0] * d[0, 1] - r[1] * d[0, 0]) / den
    eps = 1e-12
    return eps < t < 1 - eps and eps < s < 1 - eps


@dataclass
class InterfacePolyline:
    """Ordered interface nodes with per-node tangents and normals.

    coords (n, 2) hold the node positions in order; a closed polyline
    wraps implicitly (the first point is not repeated).  node_ids
    optionally ties each point to a mesh node.  Normals are the averaged
    unit normals of the two adjacent segments (single segment at open
    ends); for counterclockwise closed polylines they point outward.
    """

    coords: np.ndarray
    closed: bool = True
    node_ids: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise TrackingError("coords must be (n, 2)")
        n = len(self.coords)
        if n < (3 if self.closed else 2):
            raise TrackingError("too few polyline nodes")
        self.check_simple()

    def __len__(self):
        return len(self.coords)

    def segment_starts(self):
        if self.closed:
            return np.arange(len(self.coords))
        return np.arange(len(self.coords) - 1)

    def segments(self):
        c = self.coords
        if self.closed:
            return np.stack([c, np.roll(c, -1, axis=0)], axis=1)
        return np.stack([c[:-1], c[1:]], axis=1)

    def check_simple(self):
        segs = self.segments()
        n = len(segs)
        bad = []
        for i in range(n):
            for j in range(i + 2, n):
                if self.closed and i == 0 and j == n - 1:
                    continue  # adjacent through the wrap
                if _segments_intersect(segs[i, 0], segs[i, 1],
                                       segs[j, 0], segs[j, 1]):
                    bad.append((i, j))
        if bad:
            raise TrackingError(f"polyline self-intersects at segment pairs {bad}")

    def segment_tangents(self):
        segs = self.segments()
        d = segs[:, 1] - segs[:, 0]
        L = np.linalg.norm(d, axis=1)
        if np.any(L < 1e-300):
            raise TrackingError("degenerate polyline segment")
        return d / L[:, None], L

    def tangents(self):
        """Per-node unit tangents (mean of adjacent segment directions)."""
        t_seg, _ = self.segment_tangents()
        n = len(self.coords)
        t = np.zeros((n, 2))
        if self.closed:
            t = t_seg + np.roll(t_seg, 1, axis=0)
        else:
            t[:-1] += t_seg
            t[1:] += t_seg
        return t / np.linalg.norm(t, axis=1)[:, None]

    def normals(self):
        """Per-node unit normals, 90 degrees clockwise from the tangent."""
        t = self.tangents()
        return np.column_stack([t[:, 1], -t[:, 0]])

    def length(self):
        _, L = self.segment_tangents()
        return float(L.sum())


@dataclass
class MeshMotionParams:
    """Elastic mesh-update constants.

    lame_lambda and lame_mu set the base material; with stiffen_small the
    per-element values are scaled by 1/area so small elements deform less.
    """

    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    stiffen_small: bool = True

    def __post_init__(self):
        if self.lame_mu <= 0:
            raise TrackingError("lame_mu must be positive")


def boundary_velocity(u, normals, mode, direction=None):
    """Mesh velocity of interface nodes under the kinematic condition.

    modes: 'lagrangian' (v = u), 'normal' (v = (u.n) n), 'coordinate'
    (v = ((u.n)/(n.e)) e for the unit direction e).  Every mode satisfies
    v.n = u.n exactly at the nodes.  Returns (v, degenerate) where
    degenerate flags coordinate-mode nodes with |n.e| < 1e-8 (their v is
    zeroed; moving them is the caller's policy decision).
    """
    u = np.asarray(u, dtype=float)
    normals = np.asarray(normals, dtype=float)
    degenerate = np.zeros(len(u), dtype=bool)
    if mode == "lagrangian":
        return u.copy(), degenerate
    un = np.einsum("ij,ij->i", u, normals)
    if mode == "normal":
        return un[:, None] * normals, degenerate
    if mode == "coordinate":
        if direction is None:
            raise TrackingError("coordinate mode needs a direction")
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
        den = normals @ e
        degenerate = np.abs(den) < 1e-8
        scale = np.where(degenerate, 0.0, un / np.where(degenerate, 1.0, den))
        return scale[:, None] * e[None, :], degenerate
    raise TrackingError(f"unknown displacement mode {mode!r}")


def mass_flux(polyline, u, v, rho):
    """Mass flux through the interface: integral of rho (u - v) . n ds.

    u, v are nodal velocities on the polyline, rho a constant or nodal
    array.  The nodal flux density uses the polyline's nodal normals and
    is integrated with the trapezoid rule per segment, so v from any
    boundary_velocity mode gives exactly zero.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(polyline),))
    n = polyline.normals()
    f = rho * np.einsum("ij,ij->i", u - v, n)
    _, L = polyline.segment_tangents()
    if polyline.closed:
        return float(np.sum(0.5 * L * (f + np.roll(f, -1))))
    return float(np.sum(0.5 * L * (f[:-1] + f[1:])))


def osculating_curvature(polyline):
    """Curvature vectors kappa*n from circumcircles of node triples.

    For each node the circle through (previous, node, next) gives
    kappa*n = r / |r|^2 with r pointing from the node to the circumcenter.
    Collinear triples (and open-polyline endpoints) get zero.
    """
    c = polyline.coords
    n = len(c)
    out = np.zeros((n, 2))
    idx = range(n) if polyline.closed else range(1, n - 1)
    for i in idx:
        a = c[(i - 1) % n]
        b = c[i]
        d = c[(i + 1) % n]
        ab = a - b
        db = d - b
        den = 2.0 * (ab[0] * db[1] - ab[1] * db[0])
        scale = max(np.linalg.norm(ab), np.linalg.norm(db))
        if abs(den) < 1e-14 * scale**2:
            continue  # collinear
        na, nd = ab @ ab, db @ db
        r = np.array([(db[1] * na - ab[1] * nd) / den,
                      (ab[0] * nd - db[0] * na) / den])
        out[i] = r / (r @ r)
    return out


# ---------------------------------------------------------------------------
# mesh motion


def _apply_update(mesh, disp):
    moved = Mesh2D(mesh.nodes + disp, mesh.elements,
                   {k: v.copy() for k, v in mesh.boundary_edges.items()},
                   check=False)
    try:
        moved.check_valid()
    except MeshError as e:
        raise TrackingError(f"mesh update rejected: {e}") from e
    return moved


def elastic_mesh_update(mesh, boundary_displacement, params=None,
                        slip_normals=None):
    """Move the mesh like an elastic body under boundary displacement.

    Solves div(sigma(d)) = 0 with sigma the plane-strain stress, Dirichlet
    displacement from boundary_displacement ({tag or node: (dx, dy)}), and
    optional tangential slip ({node: unit normal}) where only the normal
    displacement component is constrained to zero.  With stiffen_small the
    Lame parameters scale with inverse element area.  Returns the moved
    Mesh2D; an update that inverts elements is rejected.
    """
    if params is None:
        params = MeshMotionParams()
    nn = len(mesh.nodes)
    rule = default_rule(mesh.kind)
    N, grads, detJ, _ = element_geometry(mesh, rule.points)
    wdet = detJ * rule.weights[None, :]
    area_e = wdet.sum(axis=1)
    scale = 1.0 / area_e if params.stiffen_small else np.ones_like(area_e)
    lam = params.lame_lambda * scale
    mu = params.lame_mu * scale

    conn = mesh.elements
    nb = conn.shape[1]
    # K[(a,i),(b,j)] = lam d_i(a) d_j(b) + mu (d_j(a) d_i(b) + delta_ij grad(a).grad(b))
    gg = np.einsum("eqai,eqbi,eq->eab", grads, grads, wdet)
    blocks = {}
    for i in range(2):
        for j in range(2):
            kij = (np.einsum("e,eqa,eqb,eq->eab", lam, grads[..., i],
                             grads[..., j], wdet)
                   + np.einsum("e,eqa,eqb,eq->eab", mu, grads[..., j],
                               grads[..., i], wdet))
            if i == j:
                kij = kij + np.einsum("e,eab->eab", mu, gg)
            blocks[i, j] = kij
    rows_a = np.repeat(conn, nb, axis=1).ravel()
    cols_b = np.tile(conn, (1, nb)).ravel()
    data, rows, cols = [], [], []
    for i in range(2):
        for j in range(2):
            data.append(blocks[i, j].ravel())
            rows.append(rows_a + i * nn)
            cols.append(cols_b + j * nn)
    K = sp.csr_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * nn, 2 * nn))
    b = np.zeros(2 * nn)

    system = fem.LinearSystem(A=K, b=b, nnodes=nn, n_p=0,
                              pressure_dofs=np.zeros(0, dtype=int))
    fixed, fixed_vals = fem.resolve_velocity_bc(mesh, boundary_displacement)
    if slip_normals:
        overlap = set(slip_normals) & set(np.mod(fixed, nn).tolist())
        if overlap:
            raise TrackingError(f"nodes both slipping and prescribed: {sorted(overlap)}")
        fem.apply_rotated_slip(system, slip_normals)
    A = system.A.tocsr()
    bvec = system.b - A[:, fixed] @ fixed_vals
    keep = np.setdiff1d(np.arange(2 * nn), fixed)
    sol = np.zeros(2 * nn)
    sol[fixed] = fixed_vals
    if len(keep):
        sol[keep] = sp.linalg.spsolve(A[keep][:, keep].tocsc(), bvec[keep])
    if system.transform is not None:
        sol = system.transform @ sol
        sol[fixed] = fixed_vals  # prescribed nodes stay cartesian
    disp = np.column_stack([sol[:nn], sol[nn:]])
    return _apply_update(mesh, disp)


def laplace_mesh_update(mesh, boundary_displacement):
    """Harmonic extension of boundary displacement, componentwise.

    Cheaper than the elastic update but with less control over element
    shape; the same inversion rejection applies.
    """
    nn = len(mesh.nodes)
    rule = default_rule(mesh.kind)
    _, grads, detJ, _ = element_geometry(mesh, rule.points)
    wdet = detJ * rule.weights[None, :]
    ke = np.einsum("eqai,eqbi,eq->eab", grads, grads, wdet)
    conn = mesh.elements
    nb = conn.shape[1]
    K = sp.csr_matrix((ke.ravel(),
                       (np.repeat(conn, nb, axis=1).ravel(),
                        np.tile(conn, (1, nb)).ravel())),
                      shape=(nn, nn))
    dofs, vals = fem.resolve_velocity_bc(mesh, boundary_displacement)
    disp = np.zeros((nn, 2))
    for comp in range(2):
        sel = (dofs >= comp * nn) & (dofs < (comp + 1) * nn)
        nodes = dofs[sel] - comp * nn
        keep = np.setdiff1d(np.arange(nn), nodes)
        x = np.zeros(nn)
        x[nodes] = vals[sel]
        if len(keep) and len(nodes):
            rhs = -(K[:, nodes] @ vals[sel])[keep]
            x[keep] = sp.linalg.spsolve(K[keep][:, keep].tocsc(), rhs)
        disp[:, comp] = x
    return _apply_update(mesh, disp)


def mesh_quality(mesh):
    """(min, mean) element quality in (0, 1].

    Triangles use the radius ratio 2 r_in / R_circ (1 for equilateral);
    quads use the minimum corner-scaled Jacobian (1 for rectangles
    becomes 1 only for squares after edge normalization).
    """
    pts = mesh.nodes[mesh.elements]
    if mesh.kind == "tri":
        a = np.linalg.norm(pts[:, 1] - pts[:, 2], axis=1)
        b = np.linalg.norm(pts[:, 2] - pts[:, 0], axis=1)
        c = np.linalg.norm(pts[:, 0] - pts[:, 1], axis=1)
        s = 0.5 * (a + b + c)
        area = mesh.areas()
        r_in = area / s
        r_circ = a * b * c / (4 * area)
        q = 2.0 * r_in / r_circ
    else:
        q = np.ones(len(mesh.elements))
        for corner in range(4):
            e1 = pts[:, (corner + 1) % 4] - pts[:, corner]
            e2 = pts[:, (corner + 3) % 4] - pts[:, corner]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            denom = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
            q = np.minimum(q, det / denom)
    return float(q.min()), float(q.mean())
