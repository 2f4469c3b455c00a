"""Marker-and-cell free-surface flow on a staggered grid.

Single fluid with a passive void: u lives on vertical faces (nx+1, ny),
v on horizontal faces (nx, ny+1), pressure at cell centers.  Marker
particles carry the fluid region; cells are flagged EMPTY / FLUID /
SURFACE / WALL each step.  The projection is assembled as the exact
composition of the face-difference gradient with the cell divergence, so
the post-step divergence of every full fluid cell equals the linear-solver
residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "EMPTY", "FLUID", "SURFACE", "WALL",
    "MacError", "StaggeredGrid", "MacState",
    "classify_cells", "predict_velocity", "solve_pressure_projection",
    "extend_surface_velocity", "advect_markers", "mac_step",
    "cell_divergence", "seed_markers", "interp_velocity",
]

EMPTY, FLUID, SURFACE, WALL = 0, 1, 2, 3


class MacError(RuntimeError):
    pass


@dataclass(frozen=True)
class StaggeredGrid:
    nx: int
    ny: int
    x0: float
    y0: float
    hx: float
    hy: float

    @classmethod
    def from_extent(cls, nx, ny, extent=(0.0, 1.0, 0.0, 1.0)):
        x0, x1, y0, y1 = map(float, extent)
        return cls(nx, ny, x0, y0, (x1 - x0) / nx, (y1 - y0) / ny)

    @property
    def extent(self):
        return (self.x0, self.x0 + self.nx * self.hx,
                self.y0, self.y0 + self.ny * self.hy)


@dataclass
class MacState:
    u: np.ndarray          # (nx+1, ny)
    v: np.ndarray          # (nx, ny+1)
    p: np.ndarray          # (nx, ny)
    markers: np.ndarray    # (M, 2)
    flags: np.ndarray      # (nx, ny) int8
    t: float = 0.0

    def copy(self):
        return MacState(self.u.copy(), self.v.copy(), self.p.copy(),
                        self.markers.copy(), self.flags.copy(), self.t)


def seed_markers(grid, region, per_cell=2):
    """Lay down per_cell x per_cell markers in every cell whose center the
    region predicate accepts (region(x, y) -> bool array)."""
    pts = []
    off = (np.arange(per_cell) + 0.5) / per_cell
    ox, oy = np.meshgrid(off, off, indexing="ij")
    for i in range(grid.nx):
        for j in range(grid.ny):
            xc = grid.x0 + (i + 0.5) * grid.hx
            yc = grid.y0 + (j + 0.5) * grid.hy
            if region(xc, yc):
                xs = grid.x0 + (i + ox.ravel()) * grid.hx
                ys = grid.y0 + (j + oy.ravel()) * grid.hy
                pts.append(np.column_stack([xs, ys]))
    if not pts:
        raise MacError("marker region is empty")
    return np.concatenate(pts)


def classify_cells(grid, markers, wall_mask=None):
    """Flag cells from marker occupancy.

    Cells holding at least one marker are liquid; liquid cells with an
    EMPTY 4-neighbor become SURFACE.  wall_mask (nx, ny) bool marks
    internal obstacle cells; the domain boundary itself acts as a wall.
    Markers outside the domain raise MacError.
    """
    x0, x1, y0, y1 = grid.extent
    m = np.asarray(markers, dtype=float)
    if np.any((m[:, 0] < x0) | (m[:, 0] > x1) | (m[:, 1] < y0) | (m[:, 1] > y1)):
        raise MacError("markers outside the domain")
    i = np.clip(((m[:, 0] - x0) / grid.hx).astype(int), 0, grid.nx - 1)
    j = np.clip(((m[:, 1] - y0) / grid.hy).astype(int), 0, grid.ny - 1)
    occ = np.zeros((grid.nx, grid.ny), dtype=bool)
    occ[i, j] = True
    flags = np.where(occ, FLUID, EMPTY).astype(np.int8)
    if wall_mask is not None:
        wall_mask = np.asarray(wall_mask, dtype=bool)
        if np.any(occ & wall_mask):
            raise MacError("markers inside wall cells")
        flags[wall_mask] = WALL
    # pad with WALL so domain edges never read as empty
    fp = np.pad(flags, 1, mode="constant", constant_values=WALL)
    nb_empty = (
        (fp[:-2, 1:-1] == EMPTY) | (fp[2:, 1:-1] == EMPTY)
        | (fp[1:-1, :-2] == EMPTY) | (fp[1:-1, 2:] == EMPTY)
    )
    flags[(flags == FLUID) & nb_empty] = SURFACE
    return flags


def _liquid(flags):
    return (flags == FLUID) | (flags == SURFACE)


def _u_active(flags):
    """u-faces with at least one FLUID neighbor, none WALL, interior only."""
    fl = flags == FLUID
    wall = flags == WALL
    act = np.zeros((flags.shape[0] + 1, flags.shape[1]), dtype=bool)
    act[1:-1, :] = (fl[:-1, :] | fl[1:, :]) & ~wall[:-1, :] & ~wall[1:, :]
    return act


def _v_active(flags):
    fl = flags == FLUID
    wall = flags == WALL
    act = np.zeros((flags.shape[0], flags.shape[1] + 1), dtype=bool)
    act[:, 1:-1] = (fl[:, :-1] | fl[:, 1:]) & ~wall[:, :-1] & ~wall[:, 1:]
    return act


def _ghost_pad_u(u, slip):
    """Pad u with tangential ghost rows (free slip mirrors, no slip negates)
    and zero columns beyond the wall faces."""
    up = np.zeros((u.shape[0] + 2, u.shape[1] + 2))
    up[1:-1, 1:-1] = u
    s = 1.0 if slip == "free" else -1.0
    up[1:-1, 0] = s * u[:, 0]
    up[1:-1, -1] = s * u[:, -1]
    up[0, :] = -up[2, :]       # reflect normal component about the wall face
    up[-1, :] = -up[-3, :]
    return up


def _ghost_pad_v(v, slip):
    vp = np.zeros((v.shape[0] + 2, v.shape[1] + 2))
    vp[1:-1, 1:-1] = v
    s = 1.0 if slip == "free" else -1.0
    vp[0, 1:-1] = s * v[0, :]
    vp[-1, 1:-1] = s * v[-1, :]
    vp[:, 0] = -vp[:, 2]
    vp[:, -1] = -vp[:, -3]
    return vp


def predict_velocity(grid, state, dt, gravity=(0.0, -1.0), nu=0.0, slip="free"):
    """Explicit momentum update: advection (advective form, centered),
    viscosity, and gravity on faces adjacent to at least one FLUID cell.
    Wall-normal faces stay fixed.  Returns (u_star, v_star).
    """
    u, v, flags = state.u, state.v, state.flags
    hx, hy = grid.hx, grid.hy
    up = _ghost_pad_u(u, slip)
    vp = _ghost_pad_v(v, slip)

    dudx = (up[2:, 1:-1] - up[:-2, 1:-1]) / (2 * hx)
    dudy = (up[1:-1, 2:] - up[1:-1, :-2]) / (2 * hy)
    # v averaged to u-face locations: the four surrounding v faces
    vbar = np.zeros_like(u)
    vbar[1:-1, :] = 0.25 * (v[:-1, :-1] + v[:-1, 1:] + v[1:, :-1] + v[1:, 1:])
    lap_u = ((up[2:, 1:-1] - 2 * up[1:-1, 1:-1] + up[:-2, 1:-1]) / hx**2
             + (up[1:-1, 2:] - 2 * up[1:-1, 1:-1] + up[1:-1, :-2]) / hy**2)
    u_star = u + dt * (-(u * dudx + vbar * dudy) + nu * lap_u + gravity[0])

    dvdx = (vp[2:, 1:-1] - vp[:-2, 1:-1]) / (2 * hx)
    dvdy = (vp[1:-1, 2:] - vp[1:-1, :-2]) / (2 * hy)
    ubar = np.zeros_like(v)
    ubar[:, 1:-1] = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    lap_v = ((vp[2:, 1:-1] - 2 * vp[1:-1, 1:-1] + vp[:-2, 1:-1]) / hx**2
             + (vp[1:-1, 2:] - 2 * vp[1:-1, 1:-1] + vp[1:-1, :-2]) / hy**2)
    v_star = v + dt * (-(ubar * dvdx + v * dvdy) + nu * lap_v + gravity[1])

    ua, va = _u_active(flags), _v_active(flags)
    u_star = np.where(ua, u_star, u)
    v_star = np.where(va, v_star, v)
    u_star[0, :] = u_star[-1, :] = 0.0
    v_star[:, 0] = v_star[:, -1] = 0.0
    return u_star, v_star


def cell_divergence(grid, u, v):
    return (u[1:, :] - u[:-1, :]) / grid.hx + (v[:, 1:] - v[:, :-1]) / grid.hy


def solve_pressure_projection(grid, u_star, v_star, flags, dt, rho):
    """Project to a field whose divergence vanishes on every FLUID cell.

    Pressure is solved on FLUID cells with p = 0 in SURFACE and EMPTY
    cells and wall-face Neumann conditions; the face correction uses the
    same difference stencil, so the remaining FLUID-cell divergence is the
    direct-solver residual.  Returns (u, v, p, residual_inf).
    """
    nx, ny = grid.nx, grid.ny
    fluid = flags == FLUID
    idx = -np.ones((nx, ny), dtype=int)
    cells = np.argwhere(fluid)
    idx[fluid] = np.arange(len(cells))
    n = len(cells)
    if n == 0:
        return u_star.copy(), v_star.copy(), np.zeros((nx, ny)), 0.0

    div = cell_divergence(grid, u_star, v_star)
    b = -div[fluid] / dt

    rows, cols, vals = [], [], []
    cx = 1.0 / (rho * grid.hx**2)
    cy = 1.0 / (rho * grid.hy**2)
    fp = np.pad(flags, 1, mode="constant", constant_values=WALL)
    for (di, dj, c) in ((-1, 0, cx), (1, 0, cx), (0, -1, cy), (0, 1, cy)):
        nb = fp[1 + di: 1 + di + nx, 1 + dj: 1 + dj + ny]
        nbf = nb[fluid]
        row = idx[fluid]
        open_face = nbf != WALL
        rows.extend(row[open_face]); cols.extend(row[open_face])
        vals.extend(np.full(open_face.sum(), c))
        isfluid = nbf == FLUID
        ni = cells[:, 0] + di
        nj = cells[:, 1] + dj
        ncol = np.where(isfluid, idx[np.clip(ni, 0, nx - 1), np.clip(nj, 0, ny - 1)], -1)
        rows.extend(row[isfluid]); cols.extend(ncol[isfluid])
        vals.extend(np.full(isfluid.sum(), -c))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    pvec = spla.spsolve(A.tocsc(), b)
    resid = float(np.abs(A @ pvec - b).max()) if n else 0.0

    p = np.zeros((nx, ny))
    p[fluid] = pvec

    u = u_star.copy()
    v = v_star.copy()
    # correct faces with at least one FLUID neighbor and no WALL neighbor
    fl = flags == FLUID
    wall = flags == WALL
    mu = (fl[:-1, :] | fl[1:, :]) & ~wall[:-1, :] & ~wall[1:, :]
    u[1:-1, :][mu] -= dt / rho * (p[1:, :] - p[:-1, :])[mu] / grid.hx
    mv = (fl[:, :-1] | fl[:, 1:]) & ~wall[:, :-1] & ~wall[:, 1:]
    v[:, 1:-1][mv] -= dt / rho * (p[:, 1:] - p[:, :-1])[mv] / grid.hy
    return u, v, p, resid


def extend_surface_velocity(grid, u, v, flags):
    """Fill faces between SURFACE and EMPTY cells.

    A surface cell with exactly one empty-side face gets that face set by
    zero cell divergence; otherwise empty-side faces copy the opposite
    face.  Modifies u, v in place.
    """
    nx, ny = grid.nx, grid.ny
    fp = np.pad(flags, 1, mode="constant", constant_values=WALL)
    for i, j in np.argwhere(flags == SURFACE):
        sides = []
        if fp[i, j + 1] == EMPTY:
            sides.append("u-")
        if fp[i + 2, j + 1] == EMPTY:
            sides.append("u+")
        if fp[i + 1, j] == EMPTY:
            sides.append("v-")
        if fp[i + 1, j + 2] == EMPTY:
            sides.append("v+")
        if not sides:
            continue
        if len(sides) == 1:
            k = sides[0]
            if k == "u-":
                u[i, j] = u[i + 1, j] + grid.hx / grid.hy * (v[i, j + 1] - v[i, j])
            elif k == "u+":
                u[i + 1, j] = u[i, j] - grid.hx / grid.hy * (v[i, j + 1] - v[i, j])
            elif k == "v-":
                v[i, j] = v[i, j + 1] + grid.hy / grid.hx * (u[i + 1, j] - u[i, j])
            else:
                v[i, j + 1] = v[i, j] - grid.hy / grid.hx * (u[i + 1, j] - u[i, j])
        else:
            for k in sides:
                if k == "u-":
                    u[i, j] = u[i + 1, j]
                elif k == "u+":
                    u[i + 1, j] = u[i, j]
                elif k == "v-":
                    v[i, j] = v[i, j + 1]
                else:
                    v[i, j + 1] = v[i, j]


def interp_velocity(grid, u, v, pts):
    """Bilinear staggered interpolation of (u, v) at points (M, 2)."""
    pts = np.asarray(pts, dtype=float)
    x = (pts[:, 0] - grid.x0) / grid.hx
    y = (pts[:, 1] - grid.y0) / grid.hy

    # u: nodes at (i, j + 1/2)
    xi = np.clip(x, 0.0, grid.nx)
    eta = np.clip(y - 0.5, 0.0, grid.ny - 1.0)
    i0 = np.clip(xi.astype(int), 0, grid.nx - 1)
    j0 = np.clip(eta.astype(int), 0, grid.ny - 2) if grid.ny > 1 else np.zeros_like(i0)
    fx = xi - i0
    fy = eta - j0
    uval = ((1 - fx) * (1 - fy) * u[i0, j0] + fx * (1 - fy) * u[i0 + 1, j0]
            + (1 - fx) * fy * u[i0, j0 + 1] + fx * fy * u[i0 + 1, j0 + 1])

    # v: nodes at (i + 1/2, j)
    xi = np.clip(x - 0.5, 0.0, grid.nx - 1.0)
    eta = np.clip(y, 0.0, grid.ny)
    i0 = np.clip(xi.astype(int), 0, grid.nx - 2) if grid.nx > 1 else np.zeros(len(pts), int)
    j0 = np.clip(eta.astype(int), 0, grid.ny - 1)
    fx = xi - i0
    fy = eta - j0
    vval = ((1 - fx) * (1 - fy) * v[i0, j0] + fx * (1 - fy) * v[i0 + 1, j0]
            + (1 - fx) * fy * v[i0, j0 + 1] + fx * fy * v[i0 + 1, j0 + 1])
    return np.column_stack([uval, vval])


def advect_markers(grid, markers, u, v, dt):
    """Midpoint rule marker transport; preserves the marker count.

    Raises MacError when any marker would move more than one cell in a
    step.  Markers are kept inside the domain by a tiny clamp at walls.
    """
    w1 = interp_velocity(grid, u, v, markers)
    mid = markers + 0.5 * dt * w1
    x0, x1, y0, y1 = grid.extent
    mid[:, 0] = np.clip(mid[:, 0], x0, x1)
    mid[:, 1] = np.clip(mid[:, 1], y0, y1)
    w2 = interp_velocity(grid, u, v, mid)
    step = dt * w2
    if np.any(np.abs(step[:, 0]) > grid.hx) or np.any(np.abs(step[:, 1]) > grid.hy):
        raise MacError("marker displacement exceeds one cell; reduce dt")
    out = markers + step
    eps = 1e-12 * max(grid.hx, grid.hy)
    out[:, 0] = np.clip(out[:, 0], x0 + eps, x1 - eps)
    out[:, 1] = np.clip(out[:, 1], y0 + eps, y1 - eps)
    return out


def mac_step(grid, state, dt, gravity=(0.0, -1.0), nu=0.0, rho=1.0,
             wall_mask=None, slip="free"):
    """One marker-and-cell step: classify, predict, project, extend, move.

    Returns (new_state, diag) with the projection residual, the maximum
    FLUID-cell divergence after correction, and the step CFL.
    """
    flags = classify_cells(grid, state.markers, wall_mask)
    work = MacState(state.u, state.v, state.p, state.markers, flags, state.t)
    umax = max(np.abs(state.u).max(initial=0.0), np.abs(state.v).max(initial=0.0))
    cfl = umax * dt / min(grid.hx, grid.hy)
    if cfl > 1.0:
        raise MacError(f"CFL {cfl:.2f} exceeds 1")
    u_star, v_star = predict_velocity(grid, work, dt, gravity, nu, slip)
    u, v, p, resid = solve_pressure_projection(grid, u_star, v_star, flags, dt, rho)
    extend_surface_velocity(grid, u, v, flags)
    div = cell_divergence(grid, u, v)
    div_fluid = float(np.abs(div[flags == FLUID]).max(initial=0.0))
    markers = advect_markers(grid, state.markers, u, v, dt)
    new = MacState(u, v, p, markers, flags, state.t + dt)
    diag = {"residual": resid, "divergence_inf": div_fluid, "cfl": float(cfl),
            "n_fluid": int((flags == FLUID).sum()),
            "n_surface": int((flags == SURFACE).sum())}
    return new, diag
