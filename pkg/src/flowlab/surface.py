"""Surface tension loads and surfactant transport on polyline interfaces.

Conventions: a closed interface polyline is ordered counterclockwise, so
edge normals (tangent rotated -90 degrees) point outward and positive
curvature means a convex enclosed region.  Assembled loads are nodal
forces ready to drop into the momentum right-hand side.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "segment_geometry",
    "laplace_beltrami_force",
    "curvature_force",
    "smoothed_delta",
    "csf_force",
    "surfactant_step",
    "surfactant_mass",
]


def segment_geometry(coords, closed=True):
    """Segment vectors, lengths, and unit tangents of a polyline.

    Returns (edges, lengths, tangents); edge k runs node k -> k+1 (wrapping
    when closed).  Zero-length segments raise ValueError.
    """
    coords = np.asarray(coords, dtype=float)
    nxt = np.roll(coords, -1, axis=0) if closed else coords[1:]
    base = coords if closed else coords[:-1]
    edges = nxt - base
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths < 1e-300):
        raise ValueError("polyline has zero-length segments")
    return edges, lengths, edges / lengths[:, None]


def laplace_beltrami_force(coords, gamma, closed=True):
    """Surface-tension load from the metric (Laplace-Beltrami) identity.

    Element-wise integration by parts of gamma * kappa * n against linear
    hats reduces, per segment, to +/- gamma times the unit tangent; each
    interior node collects gamma (t_after - t_before).  No curvature value
    is ever formed.  For a closed polyline the nodal forces sum to zero
    exactly (telescoping); open chains keep their end-pull terms.
    """
    coords = np.asarray(coords, dtype=float)
    _, _, tangents = segment_geometry(coords, closed)
    n = coords.shape[0]
    f = np.zeros((n, 2))
    if closed:
        f += gamma * tangents  # node k as start of segment k
        f -= gamma * np.roll(tangents, 1, axis=0)  # node k as end of segment k-1
    else:
        f[:-1] += gamma * tangents
        f[1:] -= gamma * tangents
    return f


def curvature_force(coords, kappa, gamma, closed=True):
    """Surface-tension load -gamma * integral kappa w n ds with given curvature.

    kappa is nodal (scalar, linear along segments) or a constant; n is the
    outward edge normal, so the discrete load pairs exactly with the
    pressure divergence term of a conforming flow solve.  Positive kappa
    on a counterclockwise polyline pulls inward.
    """
    coords = np.asarray(coords, dtype=float)
    n_nodes = coords.shape[0]
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n_nodes,))
    _, lengths, tangents = segment_geometry(coords, closed)
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    k_start = kappa if closed else kappa[:-1]
    k_end = np.roll(kappa, -1) if closed else kappa[1:]
    # exact integrals of kappa_h * hat over each segment
    w_start = lengths * (k_start / 3.0 + k_end / 6.0)
    w_end = lengths * (k_start / 6.0 + k_end / 3.0)
    f = np.zeros((n_nodes, 2))
    contrib_start = -gamma * w_start[:, None] * normals
    contrib_end = -gamma * w_end[:, None] * normals
    if closed:
        f += contrib_start
        f += np.roll(contrib_end, 1, axis=0)
    else:
        f[:-1] += contrib_start
        f[1:] += contrib_end
    return f


def smoothed_delta(phi, eps):
    """Compactly supported quartic bump with unit integral across the band."""
    phi = np.asarray(phi, dtype=float)
    s = phi / eps
    out = np.where(np.abs(s) < 1.0, (15.0 / 16.0) * (1.0 - s**2) ** 2 / eps, 0.0)
    return out


def csf_force(mesh, phi, kappa, normals, gamma, eps):
    """Continuum-surface-force load: -gamma kappa delta_eps(phi) n, lumped.

    phi, kappa (N,) and normals (N, 2) are nodal level-set quantities with
    normals pointing out of phase 1 (the ∇phi direction), so a convex
    phase-1 region (kappa > 0) is pulled inward, matching curvature_force.
    The volumetric force density is multiplied by the lumped nodal measure
    so the result is a ready-to-add nodal momentum load.  Exactly zero
    outside the band |phi| >= eps.
    """
    from .mesh import default_rule, element_geometry

    rule = default_rule(mesh.kind)
    N, _, detJ, _ = element_geometry(mesh, rule.points)
    vals = np.einsum("qa,eq,q->ea", N, detJ, rule.weights)
    m = np.zeros(mesh.nnodes)
    np.add.at(m, mesh.elements.ravel(), vals.ravel())
    density = -gamma * np.asarray(kappa) * smoothed_delta(phi, eps)
    return (m * density)[:, None] * np.asarray(normals, dtype=float)


# ---------------------------------------------------------------------------
# surfactant transport


def _curve_matrices(coords, diffusivity):
    """Mass and Laplace-Beltrami stiffness of a closed polyline (P1)."""
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    _, lengths, _ = segment_geometry(coords, closed=True)
    i = np.arange(n)
    j = (i + 1) % n
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    m_vals = np.concatenate([lengths / 3, lengths / 3, lengths / 6, lengths / 6])
    a_diag = diffusivity / lengths
    a_vals = np.concatenate([a_diag, a_diag, -a_diag, -a_diag])
    M = sp.coo_matrix((m_vals, (rows, cols)), shape=(n, n)).tocsr()
    A = sp.coo_matrix((a_vals, (rows, cols)), shape=(n, n)).tocsr()
    return M, A


def surfactant_step(G, coords, u, dt, diffusivity=1.0):
    """Advance surfactant on a closed moving curve by one step.

    Nodes move with the full velocity u (normal motion supplies the
    dilatation, tangential motion the advection), then diffusion is taken
    implicitly on the new geometry:

        (M_new/dt + A_new) G_new = M_old/dt G_old

    Row sums of the stiffness vanish, so total mass integral G ds is
    conserved to solver precision every step.  Returns (G_new, coords_new).
    """
    G = np.asarray(G, dtype=float)
    coords = np.asarray(coords, dtype=float)
    u = np.asarray(u, dtype=float)
    coords_new = coords + dt * u
    M_old, _ = _curve_matrices(coords, diffusivity)
    M_new, A_new = _curve_matrices(coords_new, diffusivity)
    lhs = (M_new / dt + A_new).tocsc()
    rhs = M_old @ G / dt
    G_new = spla.spsolve(lhs, rhs)
    res = np.linalg.norm(lhs @ G_new - rhs)
    if not np.all(np.isfinite(G_new)) or res > 1e-10 * max(1.0, np.linalg.norm(rhs)):
        raise RuntimeError(f"surfactant solve failed (residual {res:.3e})")
    return G_new, coords_new


def surfactant_mass(G, coords):
    """Total surfactant integral G ds on a closed polyline."""
    M, _ = _curve_matrices(coords, 1.0)
    return float(np.ones_like(G) @ (M @ np.asarray(G, dtype=float)))
