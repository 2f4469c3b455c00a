import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowlab import surface
from flowlab.mesh import build_structured_mesh
from flowlab.surface import (
    csf_force,
    curvature_force,
    laplace_beltrami_force,
    segment_geometry,
    smoothed_delta,
    surfactant_mass,
    surfactant_step,
)


def circle(n, r=1.0, center=(0.0, 0.0)):
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + r * np.cos(th),
                            center[1] + r * np.sin(th)])


# ---------------------------------------------------------------------------
# geometry helpers


def test_segment_geometry_square():
    coords = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    edges, lengths, tangents = segment_geometry(coords, closed=True)
    assert np.allclose(lengths, 1.0)
    assert np.allclose(tangents[0], [1, 0])
    assert np.allclose(tangents[3], [0, -1])
    edges, lengths, tangents = segment_geometry(coords, closed=False)
    assert lengths.shape == (3,)


def test_segment_geometry_rejects_repeated_points():
    coords = np.array([[0, 0], [0, 0], [1, 1]], dtype=float)
    with pytest.raises(ValueError):
        segment_geometry(coords)


# ---------------------------------------------------------------------------
# Laplace-Beltrami surface tension


def test_lb_resultant_vanishes_on_closed_curves():
    gamma = 24.5
    coords = circle(37, r=0.5)
    f = laplace_beltrami_force(coords, gamma)
    per = segment_geometry(coords)[1].sum()
    assert np.abs(f.sum(axis=0)).max() <= 1e-10 * gamma * per


def test_lb_polygon_node_force_is_exact():
    # interior angle theta between consecutive unit tangents gives
    # |f| = 2 gamma sin(pi / n), pointing at the centroid
    n, gamma = 12, 2.0
    coords = circle(n)
    f = laplace_beltrami_force(coords, gamma)
    mag = np.linalg.norm(f, axis=1)
    assert np.allclose(mag, 2 * gamma * np.sin(np.pi / n), atol=1e-13)
    inward = -coords / np.linalg.norm(coords, axis=1, keepdims=True)
    direc = f / mag[:, None]
    assert np.abs(direc - inward).max() < 1e-12


def test_lb_open_chain_keeps_end_pulls():
    gamma = 3.0
    coords = np.array([[0, 0], [1, 0], [2, 0]], dtype=float)
    f = laplace_beltrami_force(coords, gamma, closed=False)
    assert np.allclose(f[0], [gamma, 0.0])
    assert np.allclose(f[-1], [-gamma, 0.0])
    assert np.allclose(f[1], 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=3, max_value=24),
       st.integers(min_value=0, max_value=2**32 - 1))
def test_lb_resultant_zero_for_random_closed_polylines(n, seed):
    # the telescoping tangent sum cancels for any closed polyline, convex
    # or not, so the total surface-tension pull is always zero
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-1.0, 1.0, size=(n, 2))
    try:
        f = laplace_beltrami_force(coords, 1.7)
    except ValueError:
        return  # degenerate repeated points: rejected, nothing to check
    assert np.abs(f.sum(axis=0)).max() < 1e-12


def test_curvature_force_matches_lb_on_circle():
    # both discretizations integrate gamma kappa n against hats; with the
    # exact curvature supplied they agree to second order
    gamma, r = 24.5, 0.5
    for n in (64, 128):
        coords = circle(n, r=r)
        f_lb = laplace_beltrami_force(coords, gamma)
        f_k = curvature_force(coords, 1.0 / r, gamma)
        scale = np.abs(f_lb).max()
        err = np.abs(f_lb - f_k).max() / scale
        assert err < 40.0 / n**2


def test_curvature_force_pulls_convex_interface_inward():
    coords = circle(48, r=0.25)
    f = curvature_force(coords, 4.0, 1.0)
    # radial component of the force is negative everywhere
    radial = (f * coords).sum(axis=1)
    assert np.all(radial < 0)


# ---------------------------------------------------------------------------
# CSF


def test_smoothed_delta_unit_integral_and_support():
    eps = 0.3
    phi = np.linspace(-1, 1, 20001)
    d = smoothed_delta(phi, eps)
    assert np.all(d[np.abs(phi) >= eps] == 0.0)
    integral = np.trapezoid(d, phi)
    assert abs(integral - 1.0) < 1e-6


def test_csf_force_total_matches_flat_interface():
    # phi = y - 1/2 with constant curvature: total load -> -gamma kappa
    # per unit interface length
    mesh = build_structured_mesh(40, 40, kind="tri")
    phi = mesh.nodes[:, 1] - 0.5
    gamma, kappa, eps = 24.5, 2.0, 0.15
    normals = np.tile([0.0, 1.0], (mesh.nnodes, 1))
    f = csf_force(mesh, phi, np.full(mesh.nnodes, kappa), normals, gamma, eps)
    assert np.abs(f[:, 0]).max() == 0.0
    assert abs(f[:, 1].sum() + gamma * kappa) < 0.01 * gamma * kappa


def test_csf_force_zero_outside_band():
    mesh = build_structured_mesh(10, 10, kind="tri")
    phi = mesh.nodes[:, 1] - 0.5
    f = csf_force(mesh, phi, np.ones(mesh.nnodes),
                  np.tile([0.0, 1.0], (mesh.nnodes, 1)), 1.0, 0.12)
    outside = np.abs(phi) >= 0.12
    assert np.abs(f[outside]).max() == 0.0


# ---------------------------------------------------------------------------
# surfactant transport


def test_surfactant_mass_uniform_on_circle():
    coords = circle(200, r=0.7)
    per = segment_geometry(coords)[1].sum()
    m = surfactant_mass(np.full(200, 3.0), coords)
    assert abs(m - 3.0 * per) < 1e-12 * per


def test_surfactant_mass_conserved_under_arbitrary_motion():
    rng = np.random.default_rng(5)
    n = 160
    coords = circle(n)
    G = 1.0 + 0.5 * np.sin(3 * 2 * np.pi * np.arange(n) / n)
    m0 = surfactant_mass(G, coords)
    dt = 0.01
    for k in range(25):
        th = 2 * np.pi * np.arange(n) / n
        u = np.column_stack([
            0.3 * np.cos(th + 0.1 * k) + 0.1,
            0.2 * np.sin(2 * th) - 0.05,
        ])
        G, coords = surfactant_step(G, coords, u, dt, diffusivity=0.4)
        m = surfactant_mass(G, coords)
        assert abs(m - m0) < 1e-10 * m0


def test_surfactant_dilutes_on_expanding_circle():
    # uniformly expanding circle: G(t) = G0 r0 / r(t); at r = 2 r0 the
    # concentration must have halved
    n, r0, G0 = 128, 0.5, 2.0
    coords = circle(n, r=r0)
    G = np.full(n, G0)
    dt, rate = 0.01, 0.25
    r = r0
    while r < 2 * r0:
        nrm = coords / np.linalg.norm(coords, axis=1, keepdims=True)
        G, coords = surfactant_step(G, coords, rate * nrm, dt,
                                    diffusivity=1.0)
        r += rate * dt
    expect = G0 * r0 / r
    assert np.abs(G - expect).max() / expect < 0.005


def test_surfactant_diffusion_flattens_profile():
    n = 96
    coords = circle(n)
    th = 2 * np.pi * np.arange(n) / n
    G = 1.0 + np.cos(2 * th)
    u = np.zeros((n, 2))
    for _ in range(40):
        G, coords = surfactant_step(G, coords, u, 0.05, diffusivity=1.0)
    # mode-2 perturbation decays like exp(-4 D t / r^2)
    assert G.std() < 0.05
    assert abs(G.mean() - 1.0) < 1e-10
