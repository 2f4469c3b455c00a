"""Level-set interface capturing: transport, reinitialization, geometry.

The signed distance field is negative inside phase 1 and positive in
phase 2; its gradient points out of phase 1.  All routines act on nodal
arrays over a Mesh2D.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .mesh import Mesh2D, default_rule, element_geometry, integrate

__all__ = [
    "LevelSetError",
    "init_signed_distance",
    "advect",
    "zero_contour_segments",
    "reinitialize_narrow_band",
    "global_mass_correction",
    "enclosed_area",
    "normals_and_curvature",
    "smoothed_heaviside",
    "smoothed_material_props",
    "interface_points",
]


class LevelSetError(RuntimeError):
    """Raised for degenerate level-set states (empty zero set, CFL breach...)."""


# ---------------------------------------------------------------------------
# workspace (cached element geometry per mesh)


class _Workspace:
    def __init__(self, mesh):
        rule = default_rule(mesh.kind)
        N, grads, detJ, xq = element_geometry(mesh, rule.points)
        self.N, self.grads, self.detJ, self.xq = N, grads, detJ, xq
        self.wdet = detJ * rule.weights[None, :]
        self.conn = mesh.elements
        self.nnodes = mesh.nnodes
        vals = np.einsum("qa,eq->ea", N, self.wdet)
        self.mlump = np.zeros(mesh.nnodes)
        np.add.at(self.mlump, self.conn.ravel(), vals.ravel())
        if mesh.kind == "tri":
            self.h_e = np.sqrt(2.0 * np.abs(mesh.areas()))
        else:
            self.h_e = np.sqrt(np.abs(mesh.areas()))
        self.h_min = float(self.h_e.min())


def _workspace(mesh):
    ws = getattr(mesh, "_levelset_ws", None)
    if ws is None or ws.conn is not mesh.elements:
        ws = _Workspace(mesh)
        mesh._levelset_ws = ws
    return ws


# ---------------------------------------------------------------------------
# initialization


def init_signed_distance(mesh, shape):
    """Exact signed distance to a primitive shape, negative inside phase 1.

    shape is a dict: {'type': 'circle', 'center': (x, y), 'radius': r} or
    {'type': 'rectangle', 'bounds': (x0, x1, y0, y1)} or
    {'type': 'polygon', 'coords': (n, 2) counterclockwise closed ring}.
    """
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    kind = shape["type"]
    if kind == "circle":
        cx, cy = shape["center"]
        return np.hypot(x - cx, y - cy) - float(shape["radius"])
    if kind == "rectangle":
        x0, x1, y0, y1 = shape["bounds"]
        dx = np.maximum(x0 - x, x - x1)
        dy = np.maximum(y0 - y, y - y1)
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
        inside = np.minimum(np.maximum(dx, dy), 0.0)
        return outside + inside
    if kind == "polygon":
        coords = np.asarray(shape["coords"], dtype=float)
        segs = np.stack([coords, np.roll(coords, -1, axis=0)], axis=1)
        d = _distance_to_segments(mesh.nodes, segs)
        return np.where(_points_in_polygon(mesh.nodes, coords), -d, d)
    raise LevelSetError(f"unknown shape type {kind!r}")


def _points_in_polygon(pts, poly):
    """Even-odd rule point-in-polygon, vectorized over points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for (xa, ya, xb, yb) in zip(x1, y1, x2, y2):
        crosses = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = xa + (y - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (x < xc)
    return inside


# ---------------------------------------------------------------------------
# transport


def advect(mesh, phi, velocity, dt, cfl_limit=1.0):
    """Explicit second-order step of d(phi)/dt + u . grad(phi) = 0.

    Single-step Taylor-Galerkin: the streamline test-function term with
    tau = dt/2 makes the update second order in time and space and cancels
    the anti-diffusion of the forward-Euler/central pair, so smooth fields
    translate with negligible amplitude loss.  velocity is nodal (N, 2).
    Raises LevelSetError if dt max|u| exceeds cfl_limit times the smallest
    element size.
    """
    ws = _workspace(mesh)
    u = np.asarray(velocity, dtype=float)
    speed_e = np.linalg.norm(u, axis=1)[ws.conn].max(axis=1)
    cfl = float((dt * speed_e / ws.h_e).max()) if u.size else 0.0
    if cfl > cfl_limit:
        raise LevelSetError(
            f"advection CFL {cfl:.3f} exceeds limit {cfl_limit}"
        )

    phi = np.asarray(phi, dtype=float)
    u_q = np.einsum("qa,eak->eqk", ws.N, u[ws.conn])
    grad_f = np.einsum("eqai,ea->eqi", ws.grads, phi[ws.conn])
    adv = np.einsum("eqi,eqi->eq", u_q, grad_f)  # u . grad(phi) at quadrature
    w_test = ws.N[None, :, :] + 0.5 * dt * np.einsum("eqi,eqai->eqa", u_q, ws.grads)
    vals = np.einsum("eqa,eq,eq->ea", w_test, adv, ws.wdet)
    r = np.zeros(ws.nnodes)
    np.add.at(r, ws.conn.ravel(), vals.ravel())
    return phi - dt * r / ws.mlump


# ---------------------------------------------------------------------------
# zero-set extraction and reinitialization


def _triangle_segments(coords, values):
    """Zero segments of linear interpolants on triangles (T, 3, 2)/(T, 3).

    phi = 0 counts as the positive side, so each cut triangle yields
    exactly one segment.
    """
    segs = []
    neg = values < 0
    for verts, vals, vneg in zip(coords, values, neg):
        pts = []
        for a in range(3):
            b = (a + 1) % 3
            if vneg[a] != vneg[b]:
                t = vals[a] / (vals[a] - vals[b])
                pts.append(verts[a] + t * (verts[b] - verts[a]))
        if len(pts) == 2 and np.hypot(*(pts[1] - pts[0])) > 1e-300:
            segs.append((pts[0], pts[1]))
    return segs


def zero_contour_segments(mesh, phi):
    """Piecewise-linear zero set as an (S, 2, 2) segment array.

    Quads are split into four triangles around their centroid (bilinear
    center value) so the extraction is orientation-symmetric.
    """
    phi = np.asarray(phi, dtype=float)
    conn = mesh.elements
    elem_phi = phi[conn]
    touched = ~(np.all(elem_phi > 0, axis=1) | np.all(elem_phi < 0, axis=1))
    idx = np.nonzero(touched)[0]
    if idx.size == 0:
        return np.empty((0, 2, 2))
    segs = []
    coords = mesh.nodes[conn[idx]]
    vals = elem_phi[idx]
    if mesh.kind == "tri":
        segs.extend(_triangle_segments(coords, vals))
    else:
        center = coords.mean(axis=1)
        fc = vals.mean(axis=1)
        for sub in range(4):
            a, b = sub, (sub + 1) % 4
            tri_coords = np.stack([coords[:, a], coords[:, b], center], axis=1)
            tri_vals = np.stack([vals[:, a], vals[:, b], fc], axis=1)
            segs.extend(_triangle_segments(tri_coords, tri_vals))
    if not segs:
        return np.empty((0, 2, 2))
    return np.asarray(segs)


def _distance_to_segments(points, segments, chunk=2048):
    """Min distance from each point to a set of segments (S, 2, 2)."""
    a = segments[:, 0]
    b = segments[:, 1]
    ab = b - a
    den = np.maximum((ab**2).sum(axis=1), 1e-300)
    out = np.empty(len(points))
    for lo in range(0, len(points), chunk):
        p = points[lo : lo + chunk]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None, :, :]).sum(axis=2) / den[None, :], 0.0, 1.0)
        proj = a[None, :, :] + t[..., None] * ab[None, :, :]
        d = np.sqrt(((p[:, None, :] - proj) ** 2).sum(axis=2))
        out[lo : lo + chunk] = d.min(axis=1)
    return out


def _cut_edges(mesh, phi):
    """Unique mesh edges whose endpoint values change sign strictly."""
    conn = mesh.elements
    nv = conn.shape[1]
    pairs = [(a, (a + 1) % nv) for a in range(nv)]
    if mesh.kind == "tri":
        pairs = [(0, 1), (1, 2), (2, 0)]
    e = np.concatenate([conn[:, [a, b]] for a, b in pairs], axis=0)
    e = e[phi[e[:, 0]] * phi[e[:, 1]] < 0.0]
    if e.size == 0:
        return e.reshape(0, 2)
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def reinitialize_narrow_band(mesh, phi, band_width):
    """Rebuild phi toward unit gradient without moving its linear zero set.

    The zero contour lives on the edges the sign change cuts; the crossing
    on a cut edge depends only on the ratio of the two endpoint values, so
    any update that moves the contour nowhere must rescale all nodes of a
    connected cut layer by one common factor.  That factor is taken as the
    median of (segment distance / |phi|) over the layer, which makes an
    exact-distance input (a straight line, or any uniform multiple of a
    distance function) come back as the exact distance.  Remaining band
    nodes (distance <= band_width) get sign(phi) times the distance to the
    segment set; outside, the sign is kept and the magnitude clamped to at
    least band_width.  Raises LevelSetError when the zero set is empty.
    """
    if band_width <= 0:
        raise LevelSetError("band width must be positive")
    phi = np.asarray(phi, dtype=float)
    segs = zero_contour_segments(mesh, phi)
    if segs.shape[0] == 0:
        raise LevelSetError("empty zero set: nothing to reinitialize")
    d = _distance_to_segments(mesh.nodes, segs)
    sign = np.where(phi < 0, -1.0, 1.0)
    out = np.where(
        d <= band_width, sign * d, sign * np.maximum(np.abs(phi), band_width)
    )
    edges = _cut_edges(mesh, phi)
    if edges.shape[0]:
        n = mesh.nodes.shape[0]
        graph = sparse.coo_matrix(
            (np.ones(edges.shape[0]), (edges[:, 0], edges[:, 1])), shape=(n, n)
        )
        _, labels = csgraph.connected_components(graph, directed=False)
        cut_nodes = np.unique(edges)
        for comp in np.unique(labels[cut_nodes]):
            sel = cut_nodes[labels[cut_nodes] == comp]
            mag = np.abs(phi[sel])
            ok = mag > 0
            if not ok.any():
                continue
            lam = np.median(d[sel][ok] / mag[ok])
            out[sel] = lam * phi[sel]
    return out


# ---------------------------------------------------------------------------
# mass correction


def smoothed_heaviside(phi, eps):
    """C1 regularized step: 0 below -eps, 1 above +eps, H(0) = 1/2."""
    phi = np.asarray(phi, dtype=float)
    s = np.clip(phi / eps, -1.0, 1.0)
    core = 0.5 * (1.0 + s + np.sin(np.pi * s) / np.pi)
    return np.where(phi <= -eps, 0.0, np.where(phi >= eps, 1.0, core))


def enclosed_area(mesh, phi, eps):
    """Area of the phase-1 region {phi < 0} via the smoothed indicator."""
    ws = _workspace(mesh)
    phi_q = np.einsum("qa,ea->eq", ws.N, np.asarray(phi, dtype=float)[ws.conn])
    ind = 1.0 - smoothed_heaviside(phi_q, eps)
    return float((ind * ws.wdet).sum())


def global_mass_correction(mesh, phi, target_area, eps, band_width=None,
                           rel_tol=1e-10, max_iter=200):
    """Shift phi by the constant that restores the enclosed phase-1 area.

    Bisection on c with area measured by the smoothed indicator; converges
    to |area - target| <= rel_tol * target.  If band_width is given and the
    required shift exceeds it, the correction aborts (the zero set would
    leave the reinitialized band).
    """
    phi = np.asarray(phi, dtype=float)
    ws = _workspace(mesh)
    phi_q = np.einsum("qa,ea->eq", ws.N, phi[ws.conn])

    def area_of(c):
        ind = 1.0 - smoothed_heaviside(phi_q + c, eps)
        return float((ind * ws.wdet).sum())

    lo, hi = -eps, eps
    # expand the bracket until the target is enclosed (area decreases in c)
    for _ in range(60):
        if area_of(lo) >= target_area >= area_of(hi):
            break
        lo *= 2.0
        hi *= 2.0
    else:
        raise LevelSetError("mass correction could not bracket the target area")
    tol = rel_tol * abs(target_area)
    c = 0.0
    for _ in range(max_iter):
        c = 0.5 * (lo + hi)
        a = area_of(c)
        if abs(a - target_area) <= tol:
            break
        if a > target_area:
            lo = c
        else:
            hi = c
    else:
        raise LevelSetError("mass correction bisection did not converge")
    if band_width is not None and abs(c) > band_width:
        raise LevelSetError(
            f"mass correction shift {c:.3e} exceeds the band width {band_width:.3e}"
        )
    return phi + c, c


# ---------------------------------------------------------------------------
# geometry from the field


def _lumped_gradient(mesh, values):
    ws = _workspace(mesh)
    grad_q = np.einsum("eqai,ea->eqi", ws.grads, np.asarray(values)[ws.conn])
    vals = np.einsum("qa,eqi,eq->eai", ws.N, grad_q, ws.wdet)
    out = np.zeros((ws.nnodes, 2))
    np.add.at(out, ws.conn.ravel(), vals.reshape(-1, 2))
    return out / ws.mlump[:, None]


def normals_and_curvature(mesh, phi, grad_tol=1e-8):
    """Nodal unit normals (out of phase 1) and curvature div(n).

    Both come from lumped L2 gradient recovery: first grad(phi), then the
    divergence of the normalized recovered field.  Nodes where |grad phi|
    falls below grad_tol get zero normal and curvature (flat/far field).
    """
    phi = np.asarray(phi, dtype=float)
    g = _lumped_gradient(mesh, phi)
    mag = np.linalg.norm(g, axis=1)
    ok = mag > grad_tol
    normals = np.zeros_like(g)
    normals[ok] = g[ok] / mag[ok, None]

    ws = _workspace(mesh)
    div_q = np.einsum("eqai,eai->eq", ws.grads, normals[ws.conn])
    vals = np.einsum("qa,eq,eq->ea", ws.N, div_q, ws.wdet)
    kappa = np.zeros(ws.nnodes)
    np.add.at(kappa, ws.conn.ravel(), vals.ravel())
    kappa /= ws.mlump
    kappa[~ok] = 0.0
    return normals, kappa


def smoothed_material_props(phi, props1, props2, eps):
    """Blend two fluids across the band: value1 + (value2 - value1) H_eps(phi).

    props are (rho, mu) pairs or FluidProps-likes with .rho/.mu; phi may be
    any array shape (nodal or quadrature samples).  Exact single-phase
    values outside the band.
    """
    rho1, mu1 = getattr(props1, "rho", None), getattr(props1, "mu", None)
    if rho1 is None:
        rho1, mu1 = props1
    rho2, mu2 = getattr(props2, "rho", None), getattr(props2, "mu", None)
    if rho2 is None:
        rho2, mu2 = props2
    H = smoothed_heaviside(phi, eps)
    return rho1 + (rho2 - rho1) * H, mu1 + (mu2 - mu1) * H


def interface_points(mesh, phi):
    """Unique vertices of the reconstructed zero set (for diagnostics)."""
    segs = zero_contour_segments(mesh, phi)
    if segs.shape[0] == 0:
        return np.empty((0, 2))
    pts = segs.reshape(-1, 2)
    # dedupe with a tolerance by rounding
    key = np.round(pts / 1e-12).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(idx)]
