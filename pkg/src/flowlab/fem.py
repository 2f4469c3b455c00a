"""Incompressible flow solves: stationary Stokes and projection stepping.

Equal-order linear velocity/pressure on triangle or quad meshes.  The
stationary path stabilizes the saddle point with an element-scaled
pressure Laplacian; the transient path uses an incremental projection
whose discrete gradient is exactly the transpose of the FEM divergence,
so the post-correction divergence equals the linear-solver residual.

Degree-of-freedom layout everywhere: [u_x (N), u_y (N), p (n_p)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh2D, default_rule, element_geometry

__all__ = [
    "FemError",
    "FluidProps",
    "FlowState",
    "MaterialSample",
    "LinearSystem",
    "sample_materials",
    "assemble_stokes",
    "apply_rotated_slip",
    "solve_system",
    "navier_stokes_step",
    "measure_interface_jump",
    "velocity_divergence",
]

RESIDUAL_TOL = 1e-10


class FemError(RuntimeError):
    """Raised for assembly/solver failures (singular systems, bad residuals)."""


@dataclass(frozen=True)
class FluidProps:
    """Constant density and dynamic viscosity of one fluid."""

    rho: float
    mu: float


@dataclass
class FlowState:
    """Velocity (N, 2), pressure (n_p,), and time on a mesh."""

    mesh: Mesh2D
    u: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def copy(self):
        return FlowState(self.mesh, self.u.copy(), self.p.copy(), self.t)


@dataclass
class MaterialSample:
    """Density/viscosity sampled per element quadrature point plus nodal density.

    rho_q and mu_q have shape (E, q); rho_node has shape (N,) and weights
    the lumped mass used by the projection correction.
    """

    rho_q: np.ndarray
    mu_q: np.ndarray
    rho_node: np.ndarray


@dataclass
class LinearSystem:
    """Assembled sparse system with bookkeeping for solves.

    transform, when set, maps rotated unknowns back to cartesian ones
    (u = W @ u_rotated) after apply_rotated_slip.
    """

    A: sp.csr_matrix
    b: np.ndarray
    nnodes: int
    n_p: int
    pressure_dofs: np.ndarray  # (E, nn) map from element-local node to p dof
    transform: sp.csr_matrix | None = None
    meta: dict = field(default_factory=dict)


def sample_materials(mesh, props, phase_of_element, rule=None):
    """Per-cell constant material sample from a phase id per element.

    props maps phase id -> FluidProps.  Nodal density is the area-weighted
    average of the phases sharing each node.
    """
    rule = rule or default_rule(mesh.kind)
    q = rule.weights.size
    phase = np.asarray(phase_of_element)
    rho_e = np.array([props[p].rho for p in phase])
    mu_e = np.array([props[p].mu for p in phase])
    rho_q = np.repeat(rho_e[:, None], q, axis=1)
    mu_q = np.repeat(mu_e[:, None], q, axis=1)
    areas = mesh.areas()
    num = np.zeros(mesh.nnodes)
    den = np.zeros(mesh.nnodes)
    for loc in range(mesh.elements.shape[1]):
        np.add.at(num, mesh.elements[:, loc], rho_e * areas)
        np.add.at(den, mesh.elements[:, loc], areas)
    return MaterialSample(rho_q, mu_q, num / den)


# ---------------------------------------------------------------------------
# operator assembly


def _scatter(blocks, rows_elem, cols_elem, shape):
    """Assemble element blocks (E, nn_r, nn_c) into a CSR matrix."""
    E, nr, nc = blocks.shape
    rows = np.repeat(rows_elem, nc, axis=1).ravel()
    cols = np.tile(cols_elem, (1, nr)).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=shape).tocsr()


class Operators:
    """Shared element integrals for one mesh and one material sample."""

    def __init__(self, mesh, rho_q, mu_q, pressure_dofs=None, n_p=None, rule=None):
        self.mesh = mesh
        self.rule = rule or default_rule(mesh.kind)
        N, grads, detJ, xq = element_geometry(mesh, self.rule.points)
        self.N, self.grads, self.detJ, self.xq = N, grads, detJ, xq
        self.wdet = detJ * self.rule.weights[None, :]  # (E, q)
        self.rho_q = np.asarray(rho_q, dtype=float)
        self.mu_q = np.asarray(mu_q, dtype=float)
        self.conn = mesh.elements
        self.nn = self.conn.shape[1]
        self.nnodes = mesh.nnodes
        if pressure_dofs is None:
            pressure_dofs = self.conn
            n_p = mesh.nnodes
        self.pressure_dofs = np.asarray(pressure_dofs, dtype=np.intp)
        self.n_p = int(n_p)

    # -- matrices

    def mass(self, weight_q=None):
        """Weighted consistent mass, block-diagonal over the two components."""
        w = self.wdet if weight_q is None else self.wdet * weight_q
        blocks = np.einsum("qa,qb,eq->eab", self.N, self.N, w)
        M1 = _scatter(blocks, self.conn, self.conn, (self.nnodes, self.nnodes))
        return sp.block_diag([M1, M1]).tocsr()

    def lumped_mass_diag(self, weight_q=None):
        """Row-sum lumped weighted mass for one component, shape (N,)."""
        w = self.wdet if weight_q is None else self.wdet * weight_q
        vals = np.einsum("qa,eq->ea", self.N, w)
        out = np.zeros(self.nnodes)
        np.add.at(out, self.conn.ravel(), vals.ravel())
        return out

    def viscous_stiffness(self):
        """2 mu eps(w):eps(u) in the 2x2 component block structure."""
        g = self.grads
        w = self.wdet * self.mu_q
        gx = g[..., 0]
        gy = g[..., 1]
        Kxx = np.einsum("eqa,eqb,eq->eab", gx, gx, 2 * w) + \
            np.einsum("eqa,eqb,eq->eab", gy, gy, w)
        Kyy = np.einsum("eqa,eqb,eq->eab", gy, gy, 2 * w) + \
            np.einsum("eqa,eqb,eq->eab", gx, gx, w)
        Kxy = np.einsum("eqa,eqb,eq->eab", gy, gx, w)
        n = self.nnodes
        top = sp.hstack([
            _scatter(Kxx, self.conn, self.conn, (n, n)),
            _scatter(Kxy, self.conn, self.conn, (n, n)),
        ])
        bot = sp.hstack([
            _scatter(Kxy.transpose(0, 2, 1), self.conn, self.conn, (n, n)),
            _scatter(Kyy, self.conn, self.conn, (n, n)),
        ])
        return sp.vstack([top, bot]).tocsr()

    def divergence(self):
        """D with D[q, dof] = integral psi_q d(w_dof)/dx_i, shape (n_p, 2N)."""
        Dx = np.einsum("qp,eqa,eq->epa", self.N, self.grads[..., 0], self.wdet)
        Dy = np.einsum("qp,eqa,eq->epa", self.N, self.grads[..., 1], self.wdet)
        n = self.nnodes
        DX = _scatter(Dx, self.pressure_dofs, self.conn, (self.n_p, n))
        DY = _scatter(Dy, self.pressure_dofs, self.conn, (self.n_p, n))
        return sp.hstack([DX, DY]).tocsr()

    def pressure_laplacian(self, tau_e):
        """Element-weighted pressure Laplacian (PSPG-type stabilization)."""
        w = self.wdet * tau_e[:, None]
        blocks = np.einsum("eqai,eqbi,eq->eab", self.grads, self.grads, w)
        return _scatter(blocks, self.pressure_dofs, self.pressure_dofs,
                        (self.n_p, self.n_p))

    # -- vectors

    def body_force(self, f):
        """RHS integral rho f . w; f is a (2,) constant or callable(x)->(...,2)."""
        fq = np.asarray(f(self.xq) if callable(f) else f, dtype=float)
        if fq.ndim == 1:
            fq = np.broadcast_to(fq, self.xq.shape)
        w = self.wdet * self.rho_q
        vals = np.einsum("qa,eqk,eq->eak", self.N, fq, w)
        out = np.zeros(2 * self.nnodes)
        np.add.at(out, self.conn.ravel(), vals[..., 0].ravel())
        np.add.at(out, self.nnodes + self.conn.ravel(), vals[..., 1].ravel())
        return out

    def pspg_force(self, f, tau_e):
        """Stabilization RHS tau grad(psi) . rho f on the pressure space."""
        fq = np.asarray(f(self.xq) if callable(f) else f, dtype=float)
        if fq.ndim == 1:
            fq = np.broadcast_to(fq, self.xq.shape)
        w = self.wdet * self.rho_q * tau_e[:, None]
        vals = np.einsum("eqak,eqk,eq->ea", self.grads, fq, w)
        out = np.zeros(self.n_p)
        np.add.at(out, self.pressure_dofs.ravel(), vals.ravel())
        return out

    def convection(self, u, u_advect=None):
        """RHS integral rho w . (a . grad u) with a = u_advect (defaults to u)."""
        a = u if u_advect is None else u_advect
        u_e = u[self.conn]  # (E, nn, 2)
        a_q = np.einsum("qa,eak->eqk", self.N, a[self.conn])
        gradu = np.einsum("eqai,eak->eqki", self.grads, u_e)  # d u_k / d x_i
        conv = np.einsum("eqi,eqki->eqk", a_q, gradu)
        w = self.wdet * self.rho_q
        vals = np.einsum("qa,eqk,eq->eak", self.N, conv, w)
        out = np.zeros(2 * self.nnodes)
        np.add.at(out, self.conn.ravel(), vals[..., 0].ravel())
        np.add.at(out, self.nnodes + self.conn.ravel(), vals[..., 1].ravel())
        return out

    def element_size(self):
        area = np.abs(self.mesh.areas())
        return np.sqrt(2.0 * area) if self.mesh.kind == "tri" else np.sqrt(area)


# ---------------------------------------------------------------------------
# boundary conditions


def resolve_velocity_bc(mesh, velocity_bc):
    """Expand tag-or-node keyed BCs into (dof_ids, values).

    velocity_bc maps a boundary tag (str) or node id (int) to a pair
    (vx, vy); a None component stays free.  Later entries override earlier
    ones on shared nodes.
    """
    if not velocity_bc:
        return np.empty(0, dtype=np.intp), np.empty(0)
    n = mesh.nnodes
    fixed = {}
    for key, (vx, vy) in velocity_bc.items():
        nodes = mesh.boundary_nodes(key) if isinstance(key, str) else np.atleast_1d(key)
        for a in nodes:
            if vx is not None:
                fixed[int(a)] = (float(vx), fixed.get(int(a), (None, None))[1])
            if vy is not None:
                fixed[int(a)] = (fixed.get(int(a), (None, None))[0], float(vy))
    dofs, vals = [], []
    for a, (vx, vy) in fixed.items():
        if vx is not None:
            dofs.append(a)
            vals.append(vx)
        if vy is not None:
            dofs.append(n + a)
            vals.append(vy)
    return np.asarray(dofs, dtype=np.intp), np.asarray(vals)


def _apply_dirichlet_rows(A, b, dofs, values):
    """Replace rows by identity equations (columns are left untouched)."""
    A = A.tolil()
    A[dofs, :] = 0.0
    A[dofs, dofs] = 1.0
    b = b.copy()
    b[dofs] = values
    return A.tocsr(), b


def rotation_transform(nnodes, slip_normals, extra_dofs=0):
    """Sparse W mapping rotated dofs [tangential, normal] to cartesian.

    slip_normals maps node id -> outward unit normal (2,).  Identity away
    from slip nodes; the rotated normal dof sits at the y slot (nnodes + a)
    and the tangential dof at the x slot.  extra_dofs appends an identity
    block (e.g. for pressure unknowns in a monolithic system).
    """
    ndof = 2 * nnodes + extra_dofs
    W = sp.lil_matrix((ndof, ndof))
    W.setdiag(1.0)
    for a, nvec in slip_normals.items():
        nvec = np.asarray(nvec, dtype=float)
        nrm = np.linalg.norm(nvec)
        if nrm < 1e-12:
            raise FemError(f"slip node {a}: zero normal")
        nx, ny = nvec / nrm
        tx, ty = -ny, nx  # tangent, 90 degrees left of the normal
        # cartesian = O @ [tangential, normal]
        W[a, a] = tx
        W[a, nnodes + a] = nx
        W[nnodes + a, a] = ty
        W[nnodes + a, nnodes + a] = ny
    return W.tocsr()


def apply_rotated_slip(system, slip_normals, normal_values=None):
    """Rotate slip-node velocity dofs and constrain the normal component.

    The system matrix becomes W^T A W acting on [tangential, normal]
    unknowns at slip nodes; the normal rows are replaced by identity
    equations set to normal_values (default 0).  solve_system undoes the
    rotation, so callers keep working in cartesian components.
    """
    W = rotation_transform(system.nnodes, slip_normals,
                           extra_dofs=system.A.shape[0] - 2 * system.nnodes)
    A = (W.T @ system.A @ W).tocsr()
    b = W.T @ system.b
    dofs = np.array([system.nnodes + a for a in slip_normals], dtype=np.intp)
    vals = np.zeros(dofs.size) if normal_values is None else \
        np.asarray([normal_values[a] for a in slip_normals], dtype=float)
    A, b = _apply_dirichlet_rows(A, b, dofs, vals)
    system.A, system.b = A, b
    system.transform = W if system.transform is None else system.transform @ W
    return system


# ---------------------------------------------------------------------------
# stationary Stokes


def assemble_stokes(mesh, props, phase_of_element=None, *, body_force=None,
                    surface_force=None, velocity_bc=None, pressure_pin=None,
                    doubled_pressure_nodes=None, stabilization=1.0 / 12.0):
    """Assemble the stabilized stationary Stokes saddle system.

    props: dict phase -> FluidProps (single-phase: pass {0: props} and
    phase_of_element=None).  doubled_pressure_nodes duplicates pressure
    unknowns of the listed interface nodes: elements of phase 1 keep the
    original dof, phase 0 elements see the duplicate, so the discrete
    pressure may jump across the conforming interface.
    surface_force is a nodal (N, 2) load (already integrated).
    pressure_pin fixes one pressure dof to 0 (required when velocity is
    prescribed on the whole boundary).
    """
    phase = np.zeros(mesh.nelems, dtype=int) if phase_of_element is None \
        else np.asarray(phase_of_element)
    mat = sample_materials(mesh, props, phase)

    n = mesh.nnodes
    pressure_dofs = mesh.elements.copy()
    n_p = n
    doubled_map = {}
    if doubled_pressure_nodes is not None:
        for a in doubled_pressure_nodes:
            doubled_map[int(a)] = n_p
            n_p += 1
        # phase 0 elements use the duplicated dof at doubled nodes
        for a, dof in doubled_map.items():
            hit = (mesh.elements == a) & (phase[:, None] == 0)
            pressure_dofs[hit] = dof

    ops = Operators(mesh, mat.rho_q, mat.mu_q, pressure_dofs, n_p)
    K = ops.viscous_stiffness()
    D = ops.divergence()
    mu_e = ops.mu_q.mean(axis=1)
    tau_e = stabilization * ops.element_size() ** 2 / mu_e
    L = ops.pressure_laplacian(tau_e)

    # [[K, -D^T], [-D, -L]] is symmetric; continuity rows carry -1.
    A = sp.bmat([[K, -D.T], [-D, -L]], format="csr")
    b = np.zeros(2 * n + n_p)
    if body_force is not None:
        b[: 2 * n] += ops.body_force(body_force)
        b[2 * n:] -= ops.pspg_force(body_force, tau_e)
    if surface_force is not None:
        sf = np.asarray(surface_force, dtype=float)
        b[:n] += sf[:, 0]
        b[n: 2 * n] += sf[:, 1]

    dofs, vals = resolve_velocity_bc(mesh, velocity_bc)
    if dofs.size:
        A, b = _apply_dirichlet_rows(A, b, dofs, vals)
    if pressure_pin is not None:
        pin = 2 * n + int(pressure_pin)
        A, b = _apply_dirichlet_rows(A, b, np.array([pin]), np.array([0.0]))

    return LinearSystem(A, b, n, n_p, pressure_dofs,
                        meta={"doubled_map": doubled_map, "materials": mat})


def solve_system(system):
    """Direct sparse solve with a residual check; returns (u, p, info)."""
    A = system.A.tocsc()
    x = spla.spsolve(A, system.b)
    if not np.all(np.isfinite(x)):
        raise FemError("direct solve returned non-finite values")
    res = np.linalg.norm(system.A @ x - system.b)
    scale = max(1.0, np.linalg.norm(system.b))
    if res > RESIDUAL_TOL * scale:
        raise FemError(f"direct solve residual {res:.3e} exceeds tolerance")
    if system.transform is not None:
        x = system.transform @ x
    n = system.nnodes
    u = np.column_stack([x[:n], x[n: 2 * n]])
    p = x[2 * n:]
    return u, p, {"residual": float(res)}


# ---------------------------------------------------------------------------
# projection time stepping


def _min_edge_length(mesh):
    xy = mesh.element_coords()
    d = xy - np.roll(xy, -1, axis=1)
    return float(np.sqrt((d ** 2).sum(axis=2)).min())


def velocity_divergence(mesh, u):
    """Weak divergence residual max_q |integral psi_q div u| (pressure space)."""
    ones = np.ones((mesh.nelems, default_rule(mesh.kind).weights.size))
    ops = Operators(mesh, ones, ones)
    D = ops.divergence()
    return float(np.abs(D @ np.concatenate([u[:, 0], u[:, 1]])).max())


def navier_stokes_step(state, dt, material, *, velocity_bc=None, body_force=None,
                       surface_force=None, slip_normals=None, pressure_fixed=None,
                       mesh_velocity=None, cfl_limit=1.0):
    """One incremental projection step (explicit convection, implicit diffusion).

    material is a MaterialSample; velocity_bc as in assemble_stokes;
    pressure_fixed is an array of pressure node ids whose (absolute)
    pressure is held, or a (ids, values) tuple prescribing it; otherwise
    one node is pinned for the increment solve.  mesh_velocity (N, 2),
    when given, is subtracted from the advecting velocity (moving-mesh
    transport).  Returns (new_state, diagnostics).
    """
    mesh = state.mesh
    n = mesh.nnodes
    u_n = state.u
    p_n = state.p if state.p.size == n else np.zeros(n)

    h_min = _min_edge_length(mesh)
    umax = float(np.abs(u_n).max()) if u_n.size else 0.0
    cfl = umax * dt / h_min
    if cfl > cfl_limit:
        raise FemError(
            f"explicit convection unstable: CFL {cfl:.3f} exceeds {cfl_limit}"
        )

    ops = Operators(mesh, material.rho_q, material.mu_q)
    # the time term uses the lumped mass so it is the exact inverse of the
    # projection weight E below; a consistent mass here lets sawtooth
    # pressure modes grow through the mass-matrix mismatch
    mlump = ops.lumped_mass_diag(weight_q=material.rho_q)
    M = sp.diags(np.concatenate([mlump, mlump]) / dt)
    K = ops.viscous_stiffness()
    D = ops.divergence()
    uvec = np.concatenate([u_n[:, 0], u_n[:, 1]])

    advect = u_n if mesh_velocity is None else u_n - mesh_velocity
    rhs = M @ uvec - ops.convection(u_n, u_advect=advect) + D.T @ p_n
    if body_force is not None:
        rhs += ops.body_force(body_force)
    if surface_force is not None:
        sf = np.asarray(surface_force, dtype=float)
        rhs[:n] += sf[:, 0]
        rhs[n:] += sf[:, 1]

    A_mom = (M + K).tocsr()
    dofs, vals = resolve_velocity_bc(mesh, velocity_bc)
    W = None
    if slip_normals:
        W = rotation_transform(n, slip_normals)
        A_mom = (W.T @ A_mom @ W).tocsr()
        rhs = W.T @ rhs
        slip_dofs = np.array([n + a for a in slip_normals], dtype=np.intp)
        dofs = np.concatenate([dofs, slip_dofs])
        vals = np.concatenate([vals, np.zeros(slip_dofs.size)])
    if dofs.size:
        A_mom, rhs = _apply_dirichlet_rows(A_mom, rhs, dofs, vals)

    ustar_vec = spla.spsolve(A_mom.tocsc(), rhs)
    res_mom = np.linalg.norm(A_mom @ ustar_vec - rhs) / max(1.0, np.linalg.norm(rhs))
    if res_mom > RESIDUAL_TOL:
        raise FemError(f"momentum solve residual {res_mom:.3e}")
    if W is not None:
        ustar_vec = W @ ustar_vec

    # projection: correction u = u* - E D^T dp, E = dt / (lumped rho mass),
    # zeroed on constrained dofs (and rotated at slip nodes so the
    # correction stays tangential there).
    e_diag = np.concatenate([dt / mlump, dt / mlump])
    free_mask = np.ones(2 * n, dtype=bool)
    free_mask[dofs] = False  # dofs live in the (possibly rotated) solve basis
    E = sp.diags(np.where(free_mask, e_diag, 0.0))
    if W is not None:
        # per-node lumped weights are isotropic, so rotating E only zeroes
        # the normal direction at slip nodes instead of a cartesian one
        E = (W @ E @ W.T).tocsr()
    # increment dp satisfies D u_new = D u* + D E D^T dp = 0; the same dp
    # then updates the momentum balance through +D^T dp, so the stored
    # pressure stays consistent with the force the correction applied
    A_p = (D @ E @ D.T).tocsr()
    rhs_p = -(D @ ustar_vec)

    fix_vals = None
    if isinstance(pressure_fixed, tuple):
        fix = np.asarray(pressure_fixed[0], dtype=np.intp)
        fix_vals = np.asarray(pressure_fixed[1], dtype=float)
    elif pressure_fixed is not None and len(pressure_fixed):
        fix = np.asarray(pressure_fixed, dtype=np.intp)
    else:
        fix = np.array([0], dtype=np.intp)
    keep = np.setdiff1d(np.arange(n), fix)
    dp = np.zeros(n)
    if fix_vals is not None:
        dp[fix] = fix_vals - p_n[fix]
        rhs_p = rhs_p - A_p[:, fix] @ dp[fix]
    A_red = A_p[keep][:, keep].tocsc()
    dp[keep] = spla.spsolve(A_red, rhs_p[keep])
    if not np.all(np.isfinite(dp)):
        raise FemError("pressure projection solve returned non-finite values")

    u_new_vec = ustar_vec + E @ (D.T @ dp)
    div_after = float(np.abs(D @ u_new_vec)[keep].max()) if keep.size else 0.0
    u_new = np.column_stack([u_new_vec[:n], u_new_vec[n:]])
    p_new = p_n + dp

    new_state = FlowState(mesh, u_new, p_new, state.t + dt)
    diag = {
        "cfl": cfl,
        "momentum_residual": float(res_mom),
        "divergence_inf": div_after,
        "u_max": float(np.abs(u_new).max()),
    }
    return new_state, diag


# ---------------------------------------------------------------------------
# interface diagnostics


def measure_interface_jump(mesh, p, interface_nodes=None, doubled_map=None, *,
                           points=None, normals=None, delta=None):
    """Pressure jump across an interface.

    Conforming mode (interface_nodes + doubled_map from assemble_stokes):
    returns the per-node difference p_inner - p_outer directly from the
    doubled unknowns.

    Capturing mode (points + normals + delta): samples p at x +/- delta n
    and x +/- 2 delta n and removes the linear part by Richardson
    extrapolation, so fields that are linear on each side reproduce their
    jump exactly.  The jump is reported as (inner side, -n) minus
    (outer side, +n).
    """
    if doubled_map is not None:
        nodes = np.asarray(interface_nodes, dtype=np.intp)
        outer = np.array([doubled_map[int(a)] for a in nodes], dtype=np.intp)
        return p[nodes] - p[outer]
    if points is None or normals is None or delta is None:
        raise FemError("capturing mode needs points, normals, and delta")
    from .mesh import sample_nodal

    pts = np.asarray(points, dtype=float)
    nrm = np.asarray(normals, dtype=float)
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    def jump_at(d):
        p_out = sample_nodal(mesh, p, pts + d * nrm)
        p_in = sample_nodal(mesh, p, pts - d * nrm)
        return p_in - p_out

    j1 = jump_at(delta)
    j2 = jump_at(2 * delta)
    return 2 * j1 - j2
