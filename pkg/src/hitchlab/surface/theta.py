"""Poincare theta series and harmonic Beltrami coefficients.

For a polynomial ``p`` the series ``q(z) = sum_g p(g z) g'(z)^k`` over group
elements of word length <= L is an approximate automorphic form of weight
``2k`` (``k = 2``: a holomorphic quadratic differential on the surface).
"""
from dataclasses import dataclass

import numpy as np

from .. import geometry as geo
from .group import build_genus2_octagon

MAGNITUDE_CUTOFF = 1e-14
MAX_DEGREE = 6
DEFAULT_LENGTH = 5
_CHUNK = 1 << 22  # elements x points per block
# Taylor interpolation of the truncated series (holomorphic on |z| < 1):
# samples on |z| = _FFT_RADIUS, used for points with |z| <= _FFT_REACH.
_FFT_RADIUS = 0.9
_FFT_SAMPLES = 512
_FFT_REACH = 0.85


@dataclass
class QuadDifferentialSample:
    z: np.ndarray  # sample positions in the disk
    values: np.ndarray  # q(z)
    weight: int  # k: q transforms by g'(z)^k
    length: int  # word-length cutoff L
    invariance_residual: float
    dropped_terms: int  # terms below the magnitude cutoff


@dataclass
class BeltramiSample:
    z: np.ndarray
    values: np.ndarray  # mu(z)
    sup_norm: float
    scale: float  # factor applied to conj(q)/lambda
    invariance_residual: float


def _series(mats, coeffs, z, weight):
    z = np.asarray(z, dtype=complex).ravel()
    out = np.zeros(z.shape, dtype=complex)
    dropped = 0
    step = max(1, _CHUNK // max(len(mats), 1))
    poly = np.polynomial.Polynomial(coeffs)
    a, b, c, d = (mats[:, i, j][:, None] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    for s in range(0, len(z), step):
        zz = z[None, s : s + step]
        den = c * zz + d
        terms = poly((a * zz + b) / den) * den ** (-2 * weight)
        scale = np.abs(terms).max(axis=0, initial=0.0)
        small = np.abs(terms) < MAGNITUDE_CUTOFF * scale
        dropped += int(small.sum())
        out[s : s + step] = np.where(small, 0.0, terms).sum(axis=0)
    return out, dropped


def _series_interpolated(mats, coeffs, z, weight):
    """Evaluate the truncated series through its Taylor expansion at 0."""
    circle = _FFT_RADIUS * np.exp(2j * np.pi * np.arange(_FFT_SAMPLES) / _FFT_SAMPLES)
    samples, dropped = _series(mats, coeffs, circle, weight)
    taylor = np.fft.fft(samples) / _FFT_SAMPLES / _FFT_RADIUS ** np.arange(_FFT_SAMPLES)
    return np.polynomial.polynomial.polyval(z, taylor), dropped


def poincare_theta_series(poly, L, z, group=None, weight=2, residual_points=None):
    """Theta series of ``poly`` (ascending coefficients) sampled at ``z``.

    The invariance residual ``max_g |q(g z) g'(z)^k - q(z)| / max |q|`` is
    measured over the generators at ``residual_points`` (default: ``z``, at
    most 64 of them).
    """
    coeffs = np.atleast_1d(np.asarray(poly, dtype=complex))
    if L < 0:
        raise ValueError("word-length cutoff must be >= 0")
    if len(coeffs) - 1 > MAX_DEGREE:
        raise ValueError("polynomial degree must be <= %d" % MAX_DEGREE)
    group = group or build_genus2_octagon()
    _, mats = group.ball(L)
    z = np.asarray(z, dtype=complex)
    if z.size > _FFT_SAMPLES and np.abs(z).max() <= _FFT_REACH:
        values, dropped = _series_interpolated(mats, coeffs, z.ravel(), weight)
    else:
        values, dropped = _series(mats, coeffs, z, weight)
    values = values.reshape(z.shape)

    if residual_points is None:
        flat = z.ravel()
        residual_points = flat[:: max(1, len(flat) // 64)]
    rp = np.asarray(residual_points, dtype=complex).ravel()
    base, _ = _series(mats, coeffs, rp, weight)
    ref = max(np.abs(base).max(initial=0.0), np.abs(values).max(initial=0.0))
    worst = 0.0
    if ref > 0:
        for g in group.generators[:4]:
            moved, _ = _series(mats, coeffs, geo.mobius(g, rp), weight)
            pulled = moved * geo.mobius_derivative(g, rp) ** weight
            worst = max(worst, np.abs(pulled - base).max() / ref)
    return QuadDifferentialSample(
        z=z, values=values, weight=weight, length=L, invariance_residual=float(worst), dropped_terms=dropped
    )


def mesh_quaddiff(mesh, poly, L=DEFAULT_LENGTH, weight=2):
    """Theta series on every chart point of ``mesh``.

    The series is evaluated at the representative point of each logical
    vertex; copies get ``q(G z) = q(z) / G'(z)^k``, so the sampled tensor is
    single-valued on the closed surface.
    """
    q = poincare_theta_series(poly, L, mesh.rep_points, group=mesh.group, weight=weight)
    rep = mesh.rep[mesh.logical]
    der = geo.mobius_derivative(mesh.deck_matrices[mesh.deck], mesh.points[rep])
    values = q.values[mesh.logical] / der**weight
    return QuadDifferentialSample(
        z=mesh.points,
        values=values,
        weight=weight,
        length=L,
        invariance_residual=q.invariance_residual,
        dropped_terms=q.dropped_terms,
    )


def beltrami_from_quaddiff(q, sup=0.5):
    """Harmonic Beltrami coefficient ``mu = conj(q) / lambda``, scaled so ``|mu| <= sup``."""
    values = np.asarray(q.values, dtype=complex)
    if not np.all(np.isfinite(values)):
        raise ValueError("quadratic differential is not finite on the samples")
    mu = np.conj(values) / geo.conformal_factor(q.z)
    peak = float(np.abs(mu).max(initial=0.0))
    scale = 1.0 if peak <= sup else sup / peak
    mu = mu * scale
    return BeltramiSample(
        z=q.z, values=mu, sup_norm=peak * scale, scale=scale, invariance_residual=q.invariance_residual
    )


def beltrami_invariance_residual(mu_fn, z, group=None):
    """``max_g |mu(g z) conj(g'(z)) / g'(z) - mu(z)| / max|mu|`` for a callable ``mu_fn``."""
    group = group or build_genus2_octagon()
    z = np.asarray(z, dtype=complex).ravel()
    base = mu_fn(z)
    ref = np.abs(base).max(initial=0.0)
    if ref == 0:
        return 0.0
    worst = 0.0
    for g in group.generators[:4]:
        der = geo.mobius_derivative(g, z)
        moved = mu_fn(geo.mobius(g, z)) * np.conj(der) / der
        worst = max(worst, np.abs(moved - base).max() / ref)
    return float(worst)
