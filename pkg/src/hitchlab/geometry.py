"""Hyperbolic plane helpers: Poincare disk, hyperboloid model, Moebius maps.

Points of H^2 are stored on the upper sheet of the hyperboloid
``-x0^2 + x1^2 + x2^2 = -1`` as arrays of shape ``(..., 3)``.  Isometries are
kept as SU(1,1) matrices acting on the disk and converted to 3x3 Lorentz
matrices when they have to act on hyperboloid points or tangent vectors.
"""
import numpy as np

MINKOWSKI = np.diag([-1.0, 1.0, 1.0])


def conformal_factor(z):
    """Density of the hyperbolic metric ``lambda |dz|^2`` on the unit disk."""
    z = np.asarray(z)
    return 4.0 / (1.0 - np.abs(z) ** 2) ** 2


def minkowski(u, v):
    return -u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]


def disk_to_hyperboloid(z):
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    out = np.empty(z.shape + (3,))
    out[..., 0] = (1.0 + r2) / (1.0 - r2)
    out[..., 1] = 2.0 * z.real / (1.0 - r2)
    out[..., 2] = 2.0 * z.imag / (1.0 - r2)
    return out


def hyperboloid_to_disk(x):
    x = np.asarray(x)
    return (x[..., 1] + 1j * x[..., 2]) / (1.0 + x[..., 0])


def project(x):
    """Pull a slightly-off point back onto the hyperboloid (fix x0)."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 0] = np.sqrt(1.0 + x[..., 1] ** 2 + x[..., 2] ** 2)
    return x


def distance(x, y):
    """Geodesic distance; uses the chord form so short edges keep precision."""
    diff = x - y
    chord2 = np.maximum(minkowski(diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(chord2))


def log_map(x, y):
    """Tangent vector at ``x`` pointing to ``y`` with length ``d(x, y)``."""
    d = distance(x, y)
    c = -minkowski(x, y)
    w = y - c[..., None] * x
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(d > 1e-300, d / np.sinh(np.where(d > 0, d, 1.0)), 1.0)
    return scale[..., None] * w


def exp_map(x, v):
    nv = np.sqrt(np.maximum(minkowski(v, v), 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(nv > 1e-300, np.sinh(nv) / np.where(nv > 0, nv, 1.0), 1.0)
    out = np.cosh(nv)[..., None] * x + s[..., None] * v
    return project(out)


def parallel_transport(x, y, v):
    """Transport tangent vector ``v`` at ``x`` to ``y`` along the geodesic."""
    c = minkowski(x, y)
    k = minkowski(y, v) / (1.0 - c)
    return v + k[..., None] * (x + y)


def tangent_frame(x):
    """Orthonormal frame at ``x``: the boost of the origin frame, shape (..., 3, 2)."""
    x = np.asarray(x)
    x0 = x[..., 0]
    xs = x[..., 1:]
    frame = np.empty(x.shape[:-1] + (3, 2))
    frame[..., 0, :] = xs
    outer = xs[..., :, None] * xs[..., None, :] / (1.0 + x0)[..., None, None]
    frame[..., 1:, :] = np.eye(2) + outer
    return frame


def lorentz_cross(x, y):
    """Vector Minkowski-orthogonal to both ``x`` and ``y``."""
    c = np.cross(x, y)
    c[..., 0] = -c[..., 0]
    return c


def mobius(m, z):
    return (m[..., 0, 0] * z + m[..., 0, 1]) / (m[..., 1, 0] * z + m[..., 1, 1])


def mobius_derivative(m, z):
    return 1.0 / (m[..., 1, 0] * z + m[..., 1, 1]) ** 2


_PROBE = np.array([0.0, 0.5, 0.5j])
_PROBE_H = disk_to_hyperboloid(_PROBE).T


def lorentz_matrix(m):
    """3x3 Lorentz matrix of the SU(1,1) matrix ``m`` (or a stack of them)."""
    m = np.asarray(m, dtype=complex)
    images = disk_to_hyperboloid(mobius(m[..., None, :, :], _PROBE))
    # images[..., j, :] is the image of probe j; want L @ probe_j = image_j
    lhs = np.swapaxes(images, -1, -2)
    return lhs @ np.linalg.inv(_PROBE_H)


def rotation(theta):
    return np.array([[np.exp(0.5j * theta), 0.0], [0.0, np.exp(-0.5j * theta)]])


def translation(d):
    """Hyperbolic translation by distance ``d`` along the real diameter."""
    return np.array(
        [[np.cosh(d / 2), np.sinh(d / 2)], [np.sinh(d / 2), np.cosh(d / 2)]], dtype=complex
    )


def disk_distance(z, w):
    return 2.0 * np.arctanh(np.abs(z - w) / np.abs(1.0 - np.conj(z) * w))
