"""Two-dimensional deforming-domain incompressible-flow laboratory.

Interface descriptions (level set, volume of fluid, marker and cell,
phase field, boundary-conforming tracking) over a shared unstructured
mesh kernel, a P1 stabilized flow solver, surface-tension models, a
NURBS geometry kernel for curved slip walls, and a benchmark harness.
"""

__version__ = "0.1.0"

from . import bench, fem, levelset, mac, mesh, nurbs, phasefield, surface, \
    tracking, vof

__all__ = [
    "__version__", "bench", "fem", "levelset", "mac", "mesh", "nurbs",
    "phasefield", "surface", "tracking", "vof",
]
