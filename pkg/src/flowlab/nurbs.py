"""NURBS curves and surfaces: basis recursion, derivatives, frames.

Supports the curved-wall machinery: exact conic geometry (circles),
curvature from the first two derivatives, orthonormal boundary frames
for rotated slip conditions, and the first-order parameter update that
keeps moving wall nodes on the geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "NurbsCurve",
    "NurbsSurface",
    "bspline_basis",
    "curve_eval",
    "curve_curvature",
    "curve_domain",
    "make_unit_circle",
    "surface_eval",
    "surface_tangents",
    "orthonormal_frame",
    "rotation_matrix",
    "parametric_displacement",
    "closest_point",
    "parameter_at_value",
    "write_curve_text",
    "read_curve_text",
]


# ---------------------------------------------------------------------------
# basis functions


def _basis_table(degree, knots, u):
    """All piecewise basis values of one degree at points u, shape (nu, m-degree-1).

    Cox-de Boor recursion with the 0/0 := 0 convention.  The right end of
    the parameter range closes the final half-open interval so evaluation
    at the last knot returns the limiting values.
    """
    t = np.asarray(knots, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    B = ((t[None, :-1] <= u[:, None]) & (u[:, None] < t[None, 1:])).astype(float)
    at_end = u == t[-1]
    if np.any(at_end):
        spans = np.nonzero(t[:-1] < t[1:])[0]
        if spans.size == 0:
            raise ValueError("degenerate knot vector")
        B[at_end] = 0.0
        B[at_end, spans[-1]] = 1.0
    for d in range(1, degree + 1):
        den_l = t[d:-1] - t[:-d - 1]
        den_r = t[d + 1:] - t[1:-d]
        safe_l = np.where(den_l > 0, den_l, 1.0)
        safe_r = np.where(den_r > 0, den_r, 1.0)
        left = np.where(den_l > 0, (u[:, None] - t[None, :-d - 1]) / safe_l, 0.0)
        right = np.where(den_r > 0, (t[None, d + 1:] - u[:, None]) / safe_r, 0.0)
        B = left * B[:, :-1] + right * B[:, 1:]
    return B


def _derivative_step(degree, knots, lower):
    """Degree-p derivative coefficients applied to a degree-(p-1) table."""
    t = np.asarray(knots, dtype=float)
    den_l = t[degree:-1] - t[:-degree - 1]
    den_r = t[degree + 1:] - t[1:-degree]
    out = np.zeros((lower.shape[0], den_l.size))
    np.divide(degree * lower[:, :-1], den_l, out=out, where=den_l > 0)
    sub = np.zeros_like(out)
    np.divide(degree * lower[:, 1:], den_r, out=sub, where=den_r > 0)
    return out - sub


def bspline_basis(degree, knots, theta, order=0):
    """Basis values (and derivatives) for the full basis at points theta.

    Returns an array of shape (order+1, ntheta, nbasis) where slice 0 holds
    values, slice 1 first derivatives, slice 2 second derivatives.  Requires
    0 <= order <= 2 and theta inside [knots[degree], knots[-degree-1]].
    """
    if order not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1, or 2")
    t = np.asarray(knots, dtype=float)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if len(t) < 2 * (degree + 1):
        raise ValueError("knot vector too short for the degree")
    if np.any(np.diff(t) < 0):
        raise ValueError("knot vector must be nondecreasing")
    lo, hi = t[degree], t[-degree - 1]
    if np.any(th < lo - 1e-12) or np.any(th > hi + 1e-12):
        raise ValueError(f"parameter outside [{lo}, {hi}]")
    th = np.clip(th, lo, hi)

    n = len(t) - degree - 1
    out = np.zeros((order + 1, th.size, n))
    out[0] = _basis_table(degree, t, th)
    if order >= 1 and degree >= 1:
        lower1 = _basis_table(degree - 1, t, th)
        out[1] = _derivative_step(degree, t, lower1)
    if order == 2 and degree >= 2:
        # first derivatives of the degree-(p-1) family, then one more step
        p = degree
        lower2 = _basis_table(p - 2, t, th)
        den_l = t[p - 1:-1] - t[:-p]
        den_r = t[p:] - t[1:-p + 1]
        d1 = np.zeros((th.size, len(t) - p))
        np.divide((p - 1) * lower2[:, :-1], den_l, out=d1, where=den_l > 0)
        sub = np.zeros_like(d1)
        np.divide((p - 1) * lower2[:, 1:], den_r, out=sub, where=den_r > 0)
        d1 -= sub
        out[2] = _derivative_step(p, t, d1)
    return out


# ---------------------------------------------------------------------------
# curves


@dataclass
class NurbsCurve:
    """Rational curve: degree, knots (n+degree+1,), points (n, 3), weights (n,)."""

    degree: int
    knots: np.ndarray
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError("control points must be (n, 2) or (n, 3)")
        if pts.shape[1] == 2:
            pts = np.column_stack([pts, np.zeros(len(pts))])
        self.control_points = pts
        self.weights = np.asarray(self.weights, dtype=float)
        n = pts.shape[0]
        if self.weights.shape != (n,):
            raise ValueError("need one weight per control point")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if len(self.knots) != n + self.degree + 1:
            raise ValueError(
                f"knot count {len(self.knots)} != n + degree + 1 = {n + self.degree + 1}"
            )
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be nondecreasing")

    @property
    def nbasis(self):
        return self.control_points.shape[0]


def curve_domain(curve):
    """Valid parameter interval (start, end)."""
    return float(curve.knots[curve.degree]), float(curve.knots[-curve.degree - 1])


def curve_eval(curve, theta, order=0):
    """Evaluate C(theta) and optionally C', C''.

    Returns points of shape (ntheta, 3) for order 0, otherwise a tuple of
    (C, C', ...) up to the requested order.  Derivatives follow the
    quotient rule for the rational parameterization.
    """
    B = bspline_basis(curve.degree, curve.knots, theta, order=order)
    w = curve.weights
    P = curve.control_points
    Bw = B * w[None, None, :]
    W = Bw.sum(axis=2)  # (order+1, nt)
    A = Bw @ P  # (order+1, nt, 3)
    C = A[0] / W[0][:, None]
    if order == 0:
        return C
    W0, W1 = W[0][:, None], W[1][:, None]
    C1 = (A[1] * W0 - A[0] * W1) / W0**2
    if order == 1:
        return C, C1
    W2 = W[2][:, None]
    C2 = (A[2] * W0 - A[0] * W2) / W0**2 - 2 * W1 * (A[1] * W0 - A[0] * W1) / W0**3
    return C, C1, C2


def curve_curvature(curve, theta):
    """Unsigned curvature |C' x C''| / |C'|^3 at the given parameters."""
    _, C1, C2 = curve_eval(curve, theta, order=2)
    cross = np.cross(C1, C2)
    num = np.linalg.norm(np.atleast_2d(cross), axis=-1)
    speed = np.linalg.norm(C1, axis=-1)
    if np.any(speed < 1e-14):
        raise ValueError("curvature undefined where the tangent vanishes")
    return num / speed**3


def make_unit_circle():
    """Exact unit circle: degree 2, nine control points, four rational arcs.

    Starts at (0, -1) and runs counterclockwise; parameter range [0, 1].
    """
    s = np.sqrt(2.0) / 2.0
    pts = np.array(
        [
            [0.0, -1.0, 0.0],
            [1.0, -1.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [-1.0, -1.0, 0.0],
            [0.0, -1.0, 0.0],
        ]
    )
    weights = np.array([1.0, s, 1.0, s, 1.0, s, 1.0, s, 1.0])
    knots = np.array([0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1], dtype=float)
    return NurbsCurve(2, knots, pts, weights)


# ---------------------------------------------------------------------------
# surfaces


@dataclass
class NurbsSurface:
    """Tensor-product rational surface.

    control_points has shape (nu, nv, 3) and weights (nu, nv); knots_u and
    knots_v close over degrees degree_u and degree_v.
    """

    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.knots_u = np.asarray(self.knots_u, dtype=float)
        self.knots_v = np.asarray(self.knots_v, dtype=float)
        self.control_points = np.asarray(self.control_points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        nu, nv, dim = self.control_points.shape
        if dim != 3:
            raise ValueError("surface control points must be (nu, nv, 3)")
        if self.weights.shape != (nu, nv):
            raise ValueError("need one weight per control point")
        if len(self.knots_u) != nu + self.degree_u + 1:
            raise ValueError("u knot count mismatch")
        if len(self.knots_v) != nv + self.degree_v + 1:
            raise ValueError("v knot count mismatch")


def _surface_terms(surface, theta, iota, order):
    Bu = bspline_basis(surface.degree_u, surface.knots_u, theta, order=order)
    Bv = bspline_basis(surface.degree_v, surface.knots_v, iota, order=order)
    Pw = surface.control_points * surface.weights[..., None]

    def combine(du, dv):
        # sum_ij Bu_i Bv_j [w_ij, w_ij * P_ij]
        W = np.einsum("ti,tj,ij->t", Bu[du], Bv[dv], surface.weights)
        A = np.einsum("ti,tj,ijk->tk", Bu[du], Bv[dv], Pw)
        return W, A

    return combine


def surface_eval(surface, theta, iota):
    """Evaluate S(theta, iota); both parameter arrays must share a shape."""
    combine = _surface_terms(surface, theta, iota, order=0)
    W, A = combine(0, 0)
    return A / W[:, None]


def surface_tangents(surface, theta, iota):
    """Surface point and the two parametric tangents (S, dS/dtheta, dS/diota)."""
    combine = _surface_terms(surface, theta, iota, order=1)
    W0, A0 = combine(0, 0)
    Wu, Au = combine(1, 0)
    Wv, Av = combine(0, 1)
    S = A0 / W0[:, None]
    t1 = (Au * W0[:, None] - A0 * Wu[:, None]) / W0[:, None] ** 2
    t2 = (Av * W0[:, None] - A0 * Wv[:, None]) / W0[:, None] ** 2
    return S, t1, t2


# ---------------------------------------------------------------------------
# frames and parameter updates


def orthonormal_frame(t1, t2=None, tol=1e-12):
    """Orthonormalize boundary tangents and complete the frame with a normal.

    For surfaces pass both tangents: returns (t1n, t2n, n) with
    n = t1n x t2n.  For planar curves pass the single tangent (z = 0):
    returns (t1n, n) with the in-plane normal t1n rotated +90 degrees,
    left of the direction of travel, so that (t1n, n) is right-handed.
    """
    t1 = np.asarray(t1, dtype=float)
    n1 = np.linalg.norm(t1)
    if n1 < tol:
        raise ValueError("degenerate frame: first tangent has zero length")
    t1n = t1 / n1
    if t2 is None:
        normal = np.array([-t1n[1], t1n[0], 0.0]) if t1.size == 3 else \
            np.array([-t1n[1], t1n[0]])
        return t1n, normal
    t2 = np.asarray(t2, dtype=float)
    t2p = t2 - (t2 @ t1n) * t1n
    n2 = np.linalg.norm(t2p)
    if n2 < tol:
        raise ValueError("degenerate frame: tangents are parallel")
    t2n = t2p / n2
    normal = np.cross(t1n, t2n)
    return t1n, t2n, normal


def rotation_matrix(frame):
    """Column-stack an orthonormal frame into a proper rotation matrix.

    frame is the tuple from orthonormal_frame.  For curve frames the 2x2
    matrix [t1n n] is returned; for surface frames the 3x3 [t1n t2n n].
    Raises ValueError if the result is not orthonormal with det +1.
    """
    cols = [np.asarray(v, dtype=float) for v in frame]
    if len(cols) == 2 and cols[0].size == 3:
        cols = [c[:2] for c in cols]
    O = np.column_stack(cols)
    if O.shape[0] != O.shape[1]:
        raise ValueError("frame does not form a square matrix")
    if not np.allclose(O.T @ O, np.eye(O.shape[0]), atol=1e-10):
        raise ValueError("frame is not orthonormal")
    if np.linalg.det(O) < 0:
        raise ValueError("frame is left-handed; flip the normal")
    return O


def parametric_displacement(geometry, params, displacement):
    """First-order parameter increment moving a boundary point by a vector.

    For a curve at parameter theta: dtheta = (d . t1n) / |C'|.  For a
    surface at (theta, iota) the oblique tangent pair is inverted in the
    orthonormalized frame.  The displacement's out-of-frame (normal)
    component is ignored, which is what a slip update needs.
    """
    d = np.asarray(displacement, dtype=float)
    if isinstance(geometry, NurbsCurve):
        theta = float(np.atleast_1d(params)[0])
        _, C1 = curve_eval(geometry, theta, order=1)
        t1 = C1[0]
        speed = np.linalg.norm(t1)
        if speed < 1e-14:
            raise ValueError("zero tangent: parameter update undefined")
        t1n = t1 / speed
        if d.size == 2:
            d = np.array([d[0], d[1], 0.0])
        return np.array([float(d @ t1n) / speed])
    theta, iota = (float(v) for v in np.atleast_1d(params)[:2])
    _, t1, t2 = surface_tangents(geometry, [theta], [iota])
    t1, t2 = t1[0], t2[0]
    t1n, t2n, _ = orthonormal_frame(t1, t2)
    dt1 = float(d @ t1n)
    dt2 = float(d @ t2n)
    len1 = np.linalg.norm(t1)
    len2p = np.linalg.norm(t2 - (t2 @ t1n) * t1n)
    return np.array([(dt1 - dt2 * (t2 @ t1n) / len2p) / len1, dt2 / len2p])


def closest_point(curve, x, n_samples=64, tol=1e-13, max_iter=60):
    """Globally nearest curve point via sampled multistart Newton.

    Returns (theta, point, distance).  The stationarity function is
    g(theta) = (C - x) . C'; Newton steps are clamped to the domain (or
    wrapped for closed curves).
    """
    x = np.asarray(x, dtype=float)
    if x.size == 2:
        x = np.array([x[0], x[1], 0.0])
    lo, hi = curve_domain(curve)
    closed = bool(np.linalg.norm(curve.control_points[0] - curve.control_points[-1]) < 1e-12)

    thetas = np.linspace(lo, hi, n_samples, endpoint=not closed)
    pts = curve_eval(curve, thetas)
    d2 = np.sum((pts - x) ** 2, axis=1)
    starts = thetas[np.argsort(d2)[:4]]

    best = (float(thetas[np.argmin(d2)]), None)
    best_d = np.sqrt(d2.min())
    span = hi - lo
    for th in starts:
        th = float(th)
        for _ in range(max_iter):
            C, C1, C2 = curve_eval(curve, [th], order=2)
            r = C[0] - x
            g = float(r @ C1[0])
            dg = float(C1[0] @ C1[0] + r @ C2[0])
            if abs(dg) < 1e-300:
                break
            step = g / dg
            th_new = th - step
            if closed:
                th_new = lo + (th_new - lo) % span
            else:
                th_new = min(max(th_new, lo), hi)
            if abs(th_new - th) < tol * max(1.0, span):
                th = th_new
                break
            th = th_new
        C = curve_eval(curve, [th])[0]
        dist = float(np.linalg.norm(C - x))
        if dist < best_d:
            best_d, best = dist, (th, C)
    theta = best[0]
    point = best[1] if best[1] is not None else curve_eval(curve, [theta])[0]
    return float(theta), point, float(np.linalg.norm(point - x))


def parameter_at_value(curve, axis, value, theta_lo, theta_hi):
    """Parameter where one coordinate of C(theta) crosses a value.

    The coordinate must be monotone on [theta_lo, theta_hi]; used to walk
    boundary meshes along wall curves.
    """

    def f(th):
        return curve_eval(curve, [th])[0][axis] - value

    f_lo, f_hi = f(theta_lo), f(theta_hi)
    if f_lo == 0.0:
        return float(theta_lo)
    if f_hi == 0.0:
        return float(theta_hi)
    if f_lo * f_hi > 0:
        raise ValueError(f"coordinate {value} not bracketed on the parameter interval")
    return float(brentq(f, theta_lo, theta_hi, xtol=1e-15, rtol=8.9e-16))


# ---------------------------------------------------------------------------
# serialization


def write_curve_text(path, curve):
    """Plain-text curve dump: degree, knots, weighted control points."""
    lines = ["nurbs-curve", f"degree {curve.degree}", f"knots {len(curve.knots)}"]
    lines.append(" ".join(f"{k:.17g}" for k in curve.knots))
    lines.append(f"control {curve.nbasis}")
    for p, w in zip(curve.control_points, curve.weights):
        lines.append(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {w:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve_text(path):
    """Read the plain-text curve format written by write_curve_text."""
    with open(path) as fh:
        tokens = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not tokens or tokens[0] != "nurbs-curve":
        raise ValueError(f"{path}: not a curve file")
    degree = int(tokens[1].split()[1])
    nknots = int(tokens[2].split()[1])
    knots = np.array([float(v) for v in tokens[3].split()])
    if len(knots) != nknots:
        raise ValueError(f"{path}: knot count mismatch")
    ncontrol = int(tokens[4].split()[1])
    rows = [tuple(float(v) for v in tokens[5 + i].split()) for i in range(ncontrol)]
    pts = np.array([r[:3] for r in rows])
    wts = np.array([r[3] for r in rows])
    return NurbsCurve(degree, knots, pts, wts)
