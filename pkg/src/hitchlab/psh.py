"""Energy over holomorphic disks in Teichmueller space.

A disk is the affine family of Beltrami coefficients ``mu(u) = mu_b + u mu_0``
(``u = s + i t``); every grid cell is a harmonic-map solve.  Derivatives in
``u`` are centred finite differences.

Conventions (``z`` the base conformal coordinate, ``dA`` its Euclidean area,
``<.,.>`` the complex-bilinear extension of the target metric, ``|.|`` the
Hermitian norm, curvature ``K = -1``):

* ``W = f_s + i f_t`` (Riemannian logarithm at the centre map),
* ``b = Delta_u E(mu(u), f_0)`` at the frozen centre map; for ``mu_b = 0`` its
  continuum value is ``16 int |mu_0|^2 |f_z|^2 dA``,
* ``a = -sum_{s,t} d/d. grad_f E(mu(.), f_0) . f_.`` (mixed second
  derivative); continuum ``8 Re int mu_0 <f_z, nabla_z W> dA``,
* ``alpha = 2 int |nabla_z W|^2 dA``,
* ``rho = 2 K int (|W|^2 |f_z|^2 - |<W, f_z>|^2) dA <= 0``,

so that ``Delta E = b - a`` exactly and ``alpha = a/2 + rho`` (Weitzenboeck
identity).  Cauchy-Schwarz gives ``a <= alpha + b/2`` with equality iff
``nabla_z W = 2 conj(mu_0) f_zbar``; the equality gaps measure the distance to
``nabla_z W = +-2 conj(mu_0) f_zbar``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .harmonic import (
    _edge_system,
    _energy,
    energy_gradient,
    energy_hessian,
    identity_map,
    solve_harmonic,
    triangle_derivatives,
)
from .surface.mesh import triangle_beltrami


@dataclass
class DiskScenario:
    mesh: object
    mu0: np.ndarray  # per-point Beltrami direction
    radius: float
    m: int = 2
    rho: object = None  # target group (None: the domain group)
    base_mu: np.ndarray = None  # per-point base structure (None: mu = 0)
    rel_tol: float = 1e-12

    def __post_init__(self):
        self.mu0 = np.asarray(self.mu0, dtype=complex)
        if self.mu0.shape == ():
            self.mu0 = np.full(self.mesh.n_points, complex(self.mu0))
        if self.m < 1 or self.radius <= 0:
            raise ValueError("need m >= 1 and a positive radius")
        base = 0.0 if self.base_mu is None else np.abs(self.base_mu).max()
        if self.radius * np.abs(self.mu0).max() >= 0.5:
            raise ValueError("radius * |mu_0| must stay below 1/2")
        if base + self.radius * np.abs(self.mu0).max() >= 1.0:
            raise ValueError("disk leaves the space of Beltrami coefficients")

    @property
    def h(self):
        return self.radius / self.m

    def mu(self, u):
        base = 0.0 if self.base_mu is None else self.base_mu
        out = base + complex(u) * self.mu0
        return None if np.ndim(out) == 0 and out == 0 else out

    def rebased(self, cell):
        """The same direction with the base structure moved to grid cell ``(i, j)``."""
        u = complex(cell[0] * self.h, cell[1] * self.h)
        base = (0.0 if self.base_mu is None else self.base_mu) + u * self.mu0
        return DiskScenario(self.mesh, self.mu0, self.radius, self.m, self.rho, base, self.rel_tol)


@dataclass
class EnergySurface:
    h: float
    m: int
    energies: np.ndarray  # (2m+1, 2m+1), [i+m, j+m] is u = (i + i j) h; NaN if unsolved
    maps: dict = field(default_factory=dict)  # (i, j) -> EquivariantMap
    residuals: dict = field(default_factory=dict)
    scenario: DiskScenario = None

    def energy(self, i, j):
        return self.energies[i + self.m, j + self.m]

    @staticmethod
    def from_function(fn, h, m, center=0.0):
        """Synthetic surface ``E(s, t) = fn(s, t)`` around ``center``."""
        k = np.arange(-m, m + 1) * h
        s, t = np.meshgrid(k + complex(center).real, k + complex(center).imag, indexing="ij")
        return EnergySurface(h=h, m=m, energies=np.asarray(fn(s, t), dtype=float))


def _cells(m, stencil_only):
    if stencil_only:
        cells = [(0, 0)]
        for k in range(1, min(m, 2) + 1):
            cells += [(k, 0), (-k, 0), (0, k), (0, -k)]
        return cells
    cells = [(i, j) for i in range(-m, m + 1) for j in range(-m, m + 1)]
    return sorted(cells, key=lambda c: (abs(c[0]) + abs(c[1]), c))


class DiskSolveError(RuntimeError):
    pass


def energy_disk(scenario, init=None, stencil_only=False):
    """Solve the harmonic map at every grid cell, warm-starting from a neighbour
    one step closer to the centre."""
    sc = scenario
    m = sc.m
    energies = np.full((2 * m + 1, 2 * m + 1), np.nan)
    surface = EnergySurface(h=sc.h, m=m, energies=energies, scenario=sc)
    for cell in _cells(m, stencil_only):
        i, j = cell
        if cell == (0, 0):
            start = init if init is not None else identity_map(sc.mesh, target=sc.rho)
        else:
            pi = i - np.sign(i) if abs(i) >= abs(j) else i
            pj = j - np.sign(j) if abs(j) > abs(i) else j
            start = surface.maps[(int(pi), int(pj))]
        try:
            f, E, hist = solve_harmonic(
                sc.mesh, sc.mu(complex(i, j) * sc.h), rho=sc.rho, init=start, rel_tol=sc.rel_tol
            )
        except RuntimeError as exc:
            raise DiskSolveError("cell (%d, %d) did not converge: %s" % (i, j, exc)) from exc
        energies[i + m, j + m] = E.value
        surface.maps[cell] = f
        surface.residuals[cell] = E.gradient_norm
    return surface


# relative rounding error of a discrete energy (sum of ~1e4 edge terms)
ENERGY_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass
class LaplacianEstimate:
    value: float  # 5-point Laplacian with step h
    error: float  # |L_h - L_2h| / 3 + roundoff
    value_2h: float
    verdict: str  # "positive", "negative", "inconclusive", "degenerate"
    roundoff: float = 0.0  # part of ``error`` due to rounding in the energies


def _five_point(E, m, k, h, center=(0, 0)):
    ci, cj = center[0] + m, center[1] + m
    return (E[ci + k, cj] + E[ci - k, cj] + E[ci, cj + k] + E[ci, cj - k] - 4 * E[ci, cj]) / (k * h) ** 2


def fd_laplacian(surface, center=(0, 0)):
    """5-point Laplacian at the centre with an error estimate.

    The error is the Richardson estimate ``|L_h - L_2h| / 3`` plus the effect
    of rounding in the energies, ``8 dE / h^2`` with ``dE = ENERGY_ROUNDOFF *
    max|E|``.  A surface flat to within ``dE`` is "degenerate" when its
    direction is zero (or unknown) and "inconclusive" otherwise.
    """
    if surface.m < 2:
        raise ValueError("grid half-width m >= 2 needed for the Richardson estimate")
    E = surface.energies
    lh = _five_point(E, surface.m, 1, surface.h, center)
    l2h = _five_point(E, surface.m, 2, surface.h, center)
    scale = np.nanmax(np.abs(E))
    dE = ENERGY_ROUNDOFF * scale
    roundoff = 8.0 * dE / surface.h**2
    err = abs(lh - l2h) / 3.0 + roundoff
    e0 = E[center[0] + surface.m, center[1] + surface.m]
    sc = surface.scenario
    zero_direction = sc is None or not np.any(sc.mu0)
    if np.nanmax(np.abs(E - e0)) <= dE and zero_direction:
        verdict = "degenerate"
    elif err >= abs(lh):
        verdict = "inconclusive"
    else:
        verdict = "positive" if lh > 0 else "negative"
    return LaplacianEstimate(
        value=float(lh), error=float(err), value_2h=float(l2h), verdict=verdict, roundoff=float(roundoff)
    )


def first_derivatives(surface):
    """Centred ``dE/ds`` and ``dE/dt`` at the centre."""
    m, h = surface.m, surface.h
    E = surface.energies
    return (E[m + 1, m] - E[m - 1, m]) / (2 * h), (E[m, m + 1] - E[m, m - 1]) / (2 * h)


# ---------------------------------------------------------------------------
# Toledo quantities


@dataclass
class ToledoQuantities:
    a: float
    b: float
    alpha: float
    rho: float
    laplacian_fd: float
    laplacian_error: float
    b_error: float  # Richardson estimate for b
    epsilon: float  # propagated tolerance for the identities
    h: float
    diagnostics: dict = field(default_factory=dict)

    def checks(self):
        lap_ok = abs(self.laplacian_fd - (self.b - self.a)) <= max(
            0.05 * abs(self.laplacian_fd), self.laplacian_error + self.b_error
        )
        return {
            "decomposition": bool(lap_ok),
            "inequality": bool(self.a <= self.alpha + self.b / 2 + self.epsilon),
            "identity": bool(abs(self.alpha - (self.a / 2 + self.rho)) <= self.epsilon),
            "curvature_sign": bool(self.rho <= self.epsilon),
        }


def _frame_coords(x, vec):
    """Components of ambient tangent vectors in the boost frame at ``x``."""
    return np.einsum("...ik,...i->...k", geo.tangent_frame(x), vec * np.array([-1.0, 1.0, 1.0]))


def _variations(surface):
    """``f_s`` and ``f_t`` at the logical vertices (ambient tangent vectors at f_0)."""
    maps, h = surface.maps, surface.h
    x0 = maps[(0, 0)].x
    fs = (geo.log_map(x0, maps[(1, 0)].x) - geo.log_map(x0, maps[(-1, 0)].x)) / (2 * h)
    ft = (geo.log_map(x0, maps[(0, 1)].x) - geo.log_map(x0, maps[(0, -1)].x)) / (2 * h)
    return fs, ft


def _frozen_energy(sc, f, u):
    return _energy(_edge_system(f, sc.mu(u)), f.x)


def _jets(surface):
    """Per-triangle ``f_z``, ``W``, ``nabla_z W`` in a frame at each triangle's base point."""
    sc = surface.scenario
    mesh = sc.mesh
    f0 = surface.maps[(0, 0)]
    fs, ft = _variations(surface)
    W = fs + 1j * ft  # (V, 3) complex ambient vectors
    der = triangle_derivatives(mesh, sc.base_mu, f0)
    lor = f0.deck_lorentz[mesh.deck]  # (P, 3, 3)
    Wp = np.einsum("pij,pj->pi", lor, W[mesh.logical])  # W at every chart point
    tri = mesh.triangles
    X = der.corner_images
    base = der.base
    Wc = geo.parallel_transport(X, base[:, None, :], Wp[tri])  # to the base point
    Wk = np.einsum("tik,tci->tck", der.frame, Wc * np.array([-1.0, 1.0, 1.0]))  # (T, 3, 2)
    z = mesh.points[tri]
    mu_b = triangle_beltrami(mesh, sc.base_mu)
    zeta = z if mu_b is None else z + mu_b[:, None] * np.conj(z)
    e1, e2 = zeta[:, 1] - zeta[:, 0], zeta[:, 2] - zeta[:, 0]
    det = (e1 * np.conj(e2) - np.conj(e1) * e2)[:, None]
    d1, d2 = Wk[:, 1] - Wk[:, 0], Wk[:, 2] - Wk[:, 0]
    dW = (d1 * np.conj(e2)[:, None] - np.conj(e1)[:, None] * d2) / det  # nabla_z W
    # f_z as a complexified frame vector from w = v1 + i v2 and its derivatives
    fz = np.stack([(der.fz + np.conj(der.fzbar)) / 2, (der.fz - np.conj(der.fzbar)) / 2j], axis=1)
    return {
        "fz": fz,
        "W": Wk.mean(axis=1),
        "dW": dW,
        "area": np.abs(der.zeta_area),
        "mu0": triangle_beltrami(mesh, sc.mu0),
        "fs": fs,
        "ft": ft,
    }


def toledo_quantities(surface):
    """Toledo's ``a, b, alpha, rho`` and the FD Laplacian for a solved disk."""
    sc = surface.scenario
    mesh = sc.mesh
    h = surface.h
    f0 = surface.maps[(0, 0)]
    lap = fd_laplacian(surface)
    E0 = surface.energy(0, 0)

    # b: Laplacian in u of the energy at the frozen centre map (steps h and 2h)
    def frozen_lap(k):
        vals = [_frozen_energy(sc, f0, complex(*d) * k * h) for d in ((1, 0), (-1, 0), (0, 1), (0, -1))]
        return (sum(vals) - 4 * E0) / (k * h) ** 2

    b = frozen_lap(1)
    b_err = abs(b - frozen_lap(2)) / 3.0

    # a: mixed term, FD of the energy gradient at f_0 contracted with f_s, f_t
    fs, ft = _variations(surface)
    a = 0.0
    a_hess = 0.0
    H = energy_hessian(mesh, sc.base_mu, f0)
    for direction, vec in ((1.0, fs), (1j, ft)):
        gp = energy_gradient(mesh, sc.mu(direction * h), f0.copy(mu=sc.mu(direction * h)))
        gm = energy_gradient(mesh, sc.mu(-direction * h), f0.copy(mu=sc.mu(-direction * h)))
        xi = _frame_coords(f0.x, vec)
        a -= float(np.sum((gp - gm) / (2 * h) * xi))
        a_hess += float(xi.ravel() @ (H @ xi.ravel()))

    jets = _jets(surface)
    fz, W, dW, area = jets["fz"], jets["W"], jets["dW"], jets["area"]
    alpha = 2.0 * float(np.sum(area * np.sum(np.abs(dW) ** 2, axis=1)))
    pair = np.sum(W * fz, axis=1)
    rho = -2.0 * float(
        np.sum(area * (np.sum(np.abs(W) ** 2, axis=1) * np.sum(np.abs(fz) ** 2, axis=1) - np.abs(pair) ** 2))
    )
    fd_err = lap.error + b_err
    eps = max(0.05 * max(abs(a), abs(b), abs(alpha)), fd_err)
    diagnostics = {"a_hessian": a_hess, "energy_center": E0}
    if sc.base_mu is None:
        mu0 = jets["mu0"]
        diagnostics["b_continuum"] = 16.0 * float(np.sum(area * np.abs(mu0) ** 2 * np.sum(np.abs(fz) ** 2, axis=1)))
        diagnostics["a_continuum"] = 8.0 * float(np.real(np.sum(area * mu0 * np.sum(fz * dW, axis=1))))
    return ToledoQuantities(
        a=a,
        b=float(b),
        alpha=alpha,
        rho=rho,
        laplacian_fd=lap.value,
        laplacian_error=lap.error,
        b_error=float(b_err),
        epsilon=float(eps),
        h=h,
        diagnostics=diagnostics,
    )


@dataclass
class EqualityGap:
    gap_plus: float  # || nabla_z W - 2 conj(mu_0) f_zbar ||
    gap_minus: float  # || nabla_z W + 2 conj(mu_0) f_zbar ||
    scale: float  # || 2 conj(mu_0) f_zbar ||
    degenerate: bool

    @property
    def ratio(self):
        if self.degenerate:
            return float("nan")
        return min(self.gap_plus, self.gap_minus) / self.scale


def equality_locus_gap(surface):
    """L2 distances of ``nabla_z W`` from the two equality cases ``+-2 conj(mu_0) f_zbar``."""
    jets = _jets(surface)
    area = jets["area"]
    target = 2.0 * np.conj(jets["mu0"])[:, None] * np.conj(jets["fz"])

    def norm(x):
        return float(np.sqrt(np.sum(area * np.sum(np.abs(x) ** 2, axis=1))))

    scale = norm(target)
    plus = norm(jets["dW"] - target)
    minus = norm(jets["dW"] + target)
    degenerate = scale <= 1e-14 * max(1.0, norm(jets["fz"]))
    return EqualityGap(gap_plus=plus, gap_minus=minus, scale=scale, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Hessian probe


@dataclass
class HessianReport:
    mixed: np.ndarray  # complex Hermitian (k, k): d^2 E / du_a du_b-bar
    mixed_eigenvalues: np.ndarray
    noise_bound: float
    real_hessian: np.ndarray  # (2k, 2k) in coordinates (s_1, t_1, s_2, t_2, ...)
    real_eigenvalues: np.ndarray
    index: int
    verdict: str  # "positive definite", "inconclusive", "not positive definite"
    energy_center: float


def _direction_gram(mesh, directions):
    w = mesh.corner_areas
    D = np.array(directions)
    return (D * w) @ np.conj(D).T


def hessian_probe(mesh, directions, h, base_mu=None, rho=None, rel_tol=1e-12, init=None):
    """Complex Hessian ``d^2 E / du_a du_b-bar`` along Beltrami ``directions``.

    Diagonal entries are a quarter of the 5-point Laplacian along each
    direction; off-diagonal entries follow by polarisation over the combined
    directions ``e_a +- e_b`` and ``e_a +- i e_b``.  The noise bound is the
    Frobenius norm of the propagated Richardson errors.  The full real
    Hessian in ``(s_a, t_a)`` gives the index estimate.
    """
    directions = [np.asarray(d, dtype=complex) for d in directions]
    k = len(directions)
    gram = _direction_gram(mesh, directions)
    ev = np.linalg.eigvalsh(gram)
    if ev.min() <= 1e-8 * ev.max():
        raise ValueError("Beltrami directions are linearly dependent (rank-deficient Gram matrix)")
    base = np.zeros(mesh.n_points, dtype=complex) if base_mu is None else np.asarray(base_mu)
    center, E0, _ = solve_harmonic(mesh, None if base_mu is None else base, rho=rho, init=init, rel_tol=rel_tol)
    E0 = E0.value
    cache = {}

    def energy(coeffs):
        key = tuple(np.round(np.asarray(coeffs) / h, 12).tolist())
        if key not in cache:
            mu = base + sum(c * d for c, d in zip(coeffs, directions))
            _, E, _ = solve_harmonic(mesh, mu, rho=rho, init=center, rel_tol=rel_tol)
            cache[key] = E.value
        return cache[key]

    def quarter_laplacian(v):
        v = np.asarray(v, dtype=complex)
        vals = []
        for step in (h, 2 * h):
            tot = 0.0
            for d in (1, -1, 1j, -1j):
                tot += energy(d * step * v)
            vals.append((tot - 4 * E0) / step**2 / 4)
        return vals[0], abs(vals[0] - vals[1]) / 3.0

    mixed = np.zeros((k, k), dtype=complex)
    err = np.zeros((k, k))
    eye = np.eye(k)
    for i in range(k):
        q, e = quarter_laplacian(eye[i])
        mixed[i, i] = q
        err[i, i] = e
    for i in range(k):
        for j in range(i + 1, k):
            qp, ep = quarter_laplacian(eye[i] + eye[j])
            qm, em = quarter_laplacian(eye[i] - eye[j])
            qip, eip = quarter_laplacian(eye[i] + 1j * eye[j])
            qim, eim = quarter_laplacian(eye[i] - 1j * eye[j])
            mixed[i, j] = (qp - qm) / 4 + 1j * (qip - qim) / 4
            mixed[j, i] = np.conj(mixed[i, j])
            err[i, j] = err[j, i] = np.hypot((ep + em) / 4, (eip + eim) / 4)
    mixed_ev = np.linalg.eigvalsh(mixed)
    noise = float(np.linalg.norm(err))

    # real Hessian in (s_1, t_1, ..., s_k, t_k)
    basis = []
    for i in range(k):
        basis += [eye[i].astype(complex), 1j * eye[i]]

    def second(v):
        return (energy(h * v) + energy(-h * v) - 2 * E0) / h**2

    n = 2 * k
    real = np.zeros((n, n))
    for i in range(n):
        real[i, i] = second(basis[i])
    for i in range(n):
        for j in range(i + 1, n):
            real[i, j] = real[j, i] = (second(basis[i] + basis[j]) - second(basis[i] - basis[j])) / 4
    real_ev = np.linalg.eigvalsh(real)
    index = int(np.sum(real_ev < -noise))
    if mixed_ev.min() > noise:
        verdict = "positive definite"
    elif mixed_ev.min() > -noise:
        verdict = "inconclusive"
    else:
        verdict = "not positive definite"
    return HessianReport(
        mixed=mixed,
        mixed_eigenvalues=mixed_ev,
        noise_bound=noise,
        real_hessian=real,
        real_eigenvalues=real_ev,
        index=index,
        verdict=verdict,
        energy_center=E0,
    )
