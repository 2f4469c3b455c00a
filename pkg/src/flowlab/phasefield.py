"""Conserved phase-field (Cahn-Hilliard) dynamics on periodic grids.

The concentration c lives on an (nx, ny) doubly periodic grid and relaxes
toward the +-1 wells of V(c) = (v0/4)(c^2 - 1)^2 under

    dc/dt = M lap(mu),    mu = V'(c) - eps^2 lap(c).

The Laplacian is the 5-point periodic stencil; time steps use a linearly
stabilized splitting (implicit Laplacians, explicit nonlinearity) solved
exactly through its Fourier diagonalization.  The zero mode never changes,
so the mean of c is conserved to the last bit, and the matching discrete
free energy is verified to be non-increasing on every step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "PhaseFieldError",
    "SpectralGrid",
    "PhaseField",
    "double_well",
    "chemical_potential",
    "free_energy",
    "interface_width",
    "cahn_hilliard_step",
]


class PhaseFieldError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralGrid:
    """Doubly periodic box [0, lx) x [0, ly) sampled on nx x ny points."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    def coords(self):
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class PhaseField:
    """Concentration field with its model constants.

    c is dimensionless and lives near [-1, 1]; mobility, eps (interface
    scale) and v0 (well depth) are treated as nondimensional constants.
    """

    grid: SpectralGrid
    c: np.ndarray
    mobility: float = 1.0
    eps: float = 0.01
    v0: float = 1.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (self.grid.nx, self.grid.ny):
            raise PhaseFieldError(
                f"field shape {self.c.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})")

    def mass(self):
        return float(self.c.mean() * self.grid.lx * self.grid.ly)


@lru_cache(maxsize=32)
def _stencil_symbol(nx, ny, hx, hy):
    """Eigenvalues of minus the 5-point periodic Laplacian (>= 0)."""
    kx = (2.0 - 2.0 * np.cos(2 * np.pi * np.fft.fftfreq(nx))) / hx**2
    ky = (2.0 - 2.0 * np.cos(2 * np.pi * np.fft.fftfreq(ny))) / hy**2
    return kx[:, None] + ky[None, :]


def _laplacian(grid, c):
    return ((np.roll(c, -1, axis=0) - 2 * c + np.roll(c, 1, axis=0)) / grid.hx**2
            + (np.roll(c, -1, axis=1) - 2 * c + np.roll(c, 1, axis=1)) / grid.hy**2)


def double_well(c, v0=1.0):
    """Return (V, dV/dc) for V(c) = (v0/4)(c^2 - 1)^2."""
    c = np.asarray(c, dtype=float)
    return 0.25 * v0 * (c * c - 1.0) ** 2, v0 * c * (c * c - 1.0)


def chemical_potential(field):
    """mu = V'(c) - eps^2 lap(c), the variational derivative of the energy."""
    _, dv = double_well(field.c, field.v0)
    return dv - field.eps**2 * _laplacian(field.grid, field.c)


def free_energy(field):
    """E = sum of eps^2/2 |grad c|^2 + V(c) times the cell volume.

    The gradient is the forward difference whose divergence is the 5-point
    Laplacian, so this is the exact Lyapunov functional of the stepping
    scheme.
    """
    g, c = field.grid, field.c
    gx = (np.roll(c, -1, axis=0) - c) / g.hx
    gy = (np.roll(c, -1, axis=1) - c) / g.hy
    V, _ = double_well(c, field.v0)
    dens = 0.5 * field.eps**2 * (gx * gx + gy * gy) + V
    return float(dens.sum() * g.hx * g.hy)


def interface_width(eps, v0=1.0):
    """Equilibrium profile scale: c = tanh(x / delta) with delta = eps sqrt(2/v0)."""
    return eps * np.sqrt(2.0 / v0)


def cahn_hilliard_step(field, dt, stab=None, check_energy=True):
    """One conserved step of dc/dt = M lap(V'(c) - eps^2 lap(c)).

    The nonlinearity enters explicitly with a stabilizing shift
    s (c_new - c_old) inside the potential (default s = 3 v0, an upper
    bound of V'' over the well interval), leaving a linear constant-
    coefficient update solved exactly in Fourier space:

        (1 + dt M k2 (s + eps^2 k2)) c_new^ = c_old^ + dt M k2 (s c_old^ - V'^)

    with k2 the symbol of minus the 5-point Laplacian.  The k2 = 0 mode is
    untouched, so mass is bit-exact.  With check_energy the discrete free
    energy may not increase; a violation rejects the step by raising
    PhaseFieldError (reduce dt or raise stab).  Returns (new_field, diag).
    """
    if dt <= 0:
        raise PhaseFieldError("dt must be positive")
    g, c = field.grid, field.c
    s = 3.0 * field.v0 if stab is None else float(stab)
    k2 = _stencil_symbol(g.nx, g.ny, g.hx, g.hy)

    e0 = free_energy(field) if check_energy else None
    _, dv = double_well(c, field.v0)
    ch = np.fft.fft2(c)
    fh = np.fft.fft2(dv)
    mk = dt * field.mobility * k2
    new_h = (ch - mk * (fh - s * ch)) / (1.0 + mk * (s + field.eps**2 * k2))
    c_new = np.fft.ifft2(new_h).real

    new = replace(field, c=c_new)
    diag = {"mass": new.mass(), "mass_change": new.mass() - field.mass()}
    if check_energy:
        e1 = free_energy(new)
        diag["energy_before"] = e0
        diag["energy_after"] = e1
        if e1 > e0 + 1e-10 * max(abs(e0), 1.0):
            raise PhaseFieldError(
                f"free energy increased ({e0:.6e} -> {e1:.6e}); "
                "reduce dt or raise stab")
    return new, diag
