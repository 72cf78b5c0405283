"""Equivariant discrete harmonic maps from the octagon surface into H^2.

A map is stored once per logical vertex as a hyperboloid point; the image of
a chart point ``p`` is ``rho(G_p) x[logical[p]]`` where ``G_p`` is the deck
element of ``p``.  Equivariance is therefore structural.

The discrete energy is ``E = 1/2 sum_half-edges w d(f(a), f(b))^2`` with the
(Beltrami-sheared) cotangent weights of :mod:`hitchlab.surface.mesh`.  It is
minimised by a Riemannian Newton method: exact Hessian of ``d^2 / 2`` on H^2
in boost frames, exponential-map update and a monotone backtracking line
search.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from .surface.mesh import cotan_weights, half_edges

J = geo.MINKOWSKI


@dataclass
class EnergyValue:
    value: float
    gradient_norm: float


@dataclass
class EquivariantMap:
    mesh: object
    x: np.ndarray  # (V, 3) hyperboloid positions of the logical vertices
    target: object = None  # FuchsianGroup giving rho; None means the domain group
    mu: np.ndarray = None  # Beltrami samples on chart points (or None)

    @property
    def group(self):
        return self.target if self.target is not None else self.mesh.group

    @property
    def deck_lorentz(self):
        """Lorentz matrices ``rho(G)`` for the mesh's deck words."""
        cache = self.mesh._cache
        key = ("deck_lorentz", id(self.group))
        if key not in cache:
            mats = np.array([self.group.element(w) for w in self.mesh.deck_words])
            cache[key] = (self.group, geo.lorentz_matrix(mats))
        return cache[key][1]

    def point_images(self):
        """Hyperboloid images of every chart point, shape (P, 3)."""
        lor = self.deck_lorentz[self.mesh.deck]
        return np.einsum("pij,pj->pi", lor, self.x[self.mesh.logical])

    @property
    def disk(self):
        return geo.hyperboloid_to_disk(self.x)

    def copy(self, x=None, mu="keep"):
        return EquivariantMap(
            mesh=self.mesh,
            x=self.x.copy() if x is None else x,
            target=self.target,
            mu=self.mu if isinstance(mu, str) else mu,
        )

    def equivariance_defect(self):
        """``max d(f(p), rho(G_p) f(rep))`` over chart points (0 by construction)."""
        img = self.point_images()
        rep_img = self.x[self.mesh.logical]
        direct = np.einsum("pij,pj->pi", self.deck_lorentz[self.mesh.deck], rep_img)
        return float(geo.distance(img, direct).max())

    def save(self, path):
        """Plain-text dump: logical vertex, disk coordinates and hyperboloid point."""
        z = self.disk
        table = np.column_stack([np.arange(len(z)), z.real, z.imag, self.x])
        np.savetxt(
            path,
            table,
            fmt=["%d"] + ["%.17g"] * 5,
            header="vertex re_z im_z x0 x1 x2",
        )

    @staticmethod
    def load(path, mesh, target=None, mu=None):
        table = np.loadtxt(path, ndmin=2)
        order = table[:, 0].astype(int)
        x = np.empty((mesh.n_vertices, 3))
        x[order] = table[:, 3:6]
        return EquivariantMap(mesh=mesh, x=geo.project(x), target=target, mu=mu)


def identity_map(mesh, target=None, mu=None):
    """The lift of the chart positions of the representative points."""
    return EquivariantMap(mesh=mesh, x=geo.disk_to_hyperboloid(mesh.rep_points), target=target, mu=mu)


def perturbed_map(f, scale=0.1, seed=0):
    """``f`` moved by random tangent vectors of size ~``scale`` at every vertex."""
    rng = np.random.default_rng(seed)
    xi = scale * rng.normal(size=(len(f.x), 2))
    v = np.einsum("vij,vj->vi", geo.tangent_frame(f.x), xi)
    return f.copy(x=geo.exp_map(f.x, v))


@dataclass
class _EdgeSystem:
    a: np.ndarray  # logical vertex of the first end of each half-edge
    b: np.ndarray
    w: np.ndarray  # cotangent weight
    M: np.ndarray  # (E, 3, 3) rho(G_a)^-1 rho(G_b)
    trivial: np.ndarray  # M is the identity
    extras: dict = field(default_factory=dict)


def _edge_system(f, mu):
    mesh = f.mesh
    w, _ = cotan_weights(mesh, mu)
    pa, pb = half_edges(mesh)
    pa, pb, w = pa.ravel(), pb.ravel(), w.ravel()
    lor = f.deck_lorentz
    da, db = mesh.deck[pa], mesh.deck[pb]
    trivial = da == db
    M = np.broadcast_to(np.eye(3), (len(pa), 3, 3)).copy()
    nt = ~trivial
    # Lorentz inverse: J L^T J
    inv = J @ np.swapaxes(lor, -1, -2) @ J
    M[nt] = inv[da[nt]] @ lor[db[nt]]
    return _EdgeSystem(a=mesh.logical[pa], b=mesh.logical[pb], w=w, M=M, trivial=trivial)


def _pair_geometry(sys, x):
    xa = x[sys.a]
    y = x[sys.b].copy()
    nt = ~sys.trivial
    y[nt] = np.einsum("eij,ej->ei", sys.M[nt], y[nt])
    diff = y - xa
    chord2 = np.maximum(geo.minkowski(diff, diff), 0.0)
    d = 2.0 * np.arcsinh(0.5 * np.sqrt(chord2))
    return xa, y, diff, chord2, d


def _energy(sys, x):
    d = _pair_geometry(sys, x)[-1]
    return 0.5 * float(np.dot(sys.w, d * d))


def _gradient_hessian(sys, x, V, need_hessian=True):
    xa, y, diff, chord2, d = _pair_geometry(sys, x)
    w = sys.w
    sh = np.sinh(d)
    small = d < 1e-10
    safe_sh = np.where(small, 1.0, sh)
    # unit tangent at x_a towards y and at y away from x_a
    u = (diff - 0.5 * chord2[:, None] * xa) / safe_sh[:, None]
    up = (diff + 0.5 * chord2[:, None] * y) / safe_sh[:, None]
    Ea = geo.tangent_frame(xa)
    if small.any():
        u[small] = Ea[small][:, :, 0]
        up[small] = u[small]
    Eb = geo.tangent_frame(x[sys.b])
    MEb = Eb.copy()
    nt = ~sys.trivial
    MEb[nt] = sys.M[nt] @ Eb[nt]
    cu = np.einsum("eik,ei->ek", Ea, u * np.array([-1.0, 1.0, 1.0]))
    cup = np.einsum("eik,ei->ek", MEb, up * np.array([-1.0, 1.0, 1.0]))
    grad = np.zeros((V, 2))
    np.add.at(grad, sys.a, -(w * d)[:, None] * cu)
    np.add.at(grad, sys.b, (w * d)[:, None] * cup)
    if not need_hessian:
        return grad, None

    n = geo.lorentz_cross(xa, y)
    nn = np.sqrt(np.maximum(geo.minkowski(n, n), 0.0))
    if small.any():
        n[small] = Ea[small][:, :, 1]
        nn[small] = 1.0
    n = n / nn[:, None]
    Jn = n * np.array([-1.0, 1.0, 1.0])
    cn = np.einsum("eik,ei->ek", Ea, Jn)
    cnp = np.einsum("eik,ei->ek", MEb, Jn)
    dcoth = np.where(small, 1.0, d / np.where(small, 1.0, np.tanh(d)))
    dsinh = np.where(small, 1.0, d / safe_sh)
    # sign of n relative to the frames cancels in every outer product below
    Haa = w[:, None, None] * (cu[:, :, None] * cu[:, None, :] + dcoth[:, None, None] * cn[:, :, None] * cn[:, None, :])
    Hbb = w[:, None, None] * (cup[:, :, None] * cup[:, None, :] + dcoth[:, None, None] * cnp[:, :, None] * cnp[:, None, :])
    Hab = -w[:, None, None] * (cu[:, :, None] * cup[:, None, :] + dsinh[:, None, None] * cn[:, :, None] * cnp[:, None, :])

    ii, jj = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
    rows, cols, vals = [], [], []
    for (p, q, blk) in ((sys.a, sys.a, Haa), (sys.b, sys.b, Hbb), (sys.a, sys.b, Hab)):
        rows.append((2 * p[:, None, None] + ii).ravel())
        cols.append((2 * q[:, None, None] + jj).ravel())
        vals.append(blk.ravel())
    # transpose of the mixed block
    rows.append((2 * sys.b[:, None, None] + ii).ravel())
    cols.append((2 * sys.a[:, None, None] + jj).ravel())
    vals.append(np.swapaxes(Hab, 1, 2).ravel())
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * V, 2 * V)
    )
    return grad, H


def _retract(x, xi):
    v = np.einsum("vij,vj->vi", geo.tangent_frame(x), xi)
    return geo.exp_map(x, v)


class HarmonicSolveError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def _check_mu(mu):
    if mu is not None and np.abs(mu).max(initial=0.0) >= 1.0:
        raise ValueError("Beltrami coefficient must satisfy |mu| < 1")


def solve_harmonic(mesh, mu=None, rho=None, init=None, tol=None, rel_tol=1e-9, max_iter=100, seed=0):
    """Newton minimisation of the discrete energy among rho-equivariant maps.

    ``init`` is an :class:`EquivariantMap`, ``"identity"`` (default) or
    ``"random"`` (identity perturbed by random tangent vectors).  Converges
    when the largest per-vertex gradient norm is below ``tol`` (default
    ``rel_tol * E``).  Returns ``(map, EnergyValue, history)``.
    """
    _check_mu(mu)
    if init is None or (isinstance(init, str) and init == "identity"):
        f = identity_map(mesh, target=rho, mu=mu)
    elif isinstance(init, str) and init == "random":
        f = perturbed_map(identity_map(mesh, target=rho, mu=mu), scale=0.2, seed=seed)
    else:
        f = init.copy(mu=mu)
        if rho is not None:
            f.target = rho
    sys = _edge_system(f, mu)
    V = mesh.n_vertices
    x = f.x
    energy = _energy(sys, x)
    history = {"energy": [energy], "gradient": [], "step": []}
    for it in range(max_iter + 1):
        grad, H = _gradient_hessian(sys, x, V)
        gnorm = float(np.sqrt((grad**2).sum(axis=1)).max())
        history["gradient"].append(gnorm)
        target_tol = tol if tol is not None else rel_tol * energy
        if gnorm < target_tol:
            f = f.copy(x=x)
            return f, EnergyValue(value=energy, gradient_norm=gnorm), history
        if it == max_iter:
            break
        step = -spla.spsolve(H.tocsc(), grad.ravel()).reshape(V, 2)
        slope = float(np.dot(grad.ravel(), step.ravel()))
        t = 1.0
        while True:
            x_new = _retract(x, t * step)
            e_new = _energy(sys, x_new)
            if e_new <= energy + 1e-4 * t * slope + 1e-14 * abs(energy):
                break
            t *= 0.5
            if t < 1e-12:
                raise HarmonicSolveError("line search failed", history)
        if np.abs(x_new[:, 0]).max() > 1e8:
            raise HarmonicSolveError("image drifted to the boundary: rho mismatched or not discrete", history)
        x, energy = x_new, e_new
        history["energy"].append(energy)
        history["step"].append(t)
    raise HarmonicSolveError(
        "no convergence after %d iterations (gradient %.3e)" % (max_iter, history["gradient"][-1]), history
    )


def discrete_energy(mesh, mu, f):
    """Cotangent energy of ``f`` in the structure ``mu`` with its gradient norm."""
    _check_mu(mu)
    if np.ptp(f.x, axis=0).max() < 1e-14:
        raise ValueError("a constant map is not equivariant for a non-elementary group")
    sys = _edge_system(f, mu)
    grad, _ = _gradient_hessian(sys, f.x, mesh.n_vertices, need_hessian=False)
    return EnergyValue(value=_energy(sys, f.x), gradient_norm=float(np.sqrt((grad**2).sum(axis=1)).max()))


def energy_gradient(mesh, mu, f):
    """Per-vertex gradient of the discrete energy in the boost frames of ``f.x``."""
    sys = _edge_system(f, mu)
    grad, _ = _gradient_hessian(sys, f.x, mesh.n_vertices, need_hessian=False)
    return grad


def energy_hessian(mesh, mu, f):
    """Riemannian Hessian (sparse, boost-frame coordinates) of the discrete energy."""
    sys = _edge_system(f, mu)
    return _gradient_hessian(sys, f.x, mesh.n_vertices)[1]


@dataclass
class TriangleDerivatives:
    base: np.ndarray  # (T, 3) base point of each triangle's normal chart
    frame: np.ndarray  # (T, 3, 2) orthonormal frame at the base point
    fz: np.ndarray  # (T,) complex: d/dzeta of the map in the frame
    fzbar: np.ndarray  # (T,) complex: d/dzeta_bar
    zeta_area: np.ndarray  # (T,) Euclidean area in the sheared coordinate
    corner_images: np.ndarray  # (T, 3, 3)


def triangle_derivatives(mesh, mu, f, images=None):
    """Linear-interpolant derivatives of ``f`` per triangle.

    The domain coordinate is ``zeta = z + mu_T z_bar``; the target is read in
    normal coordinates at the normalised corner average, written as a complex
    number ``w = v_1 + i v_2`` in the boost frame there.
    """
    from .surface.mesh import triangle_beltrami

    X = (f.point_images() if images is None else images)[mesh.triangles]
    s = X.sum(axis=1)
    base = s / np.sqrt(-geo.minkowski(s, s))[:, None]
    frame = geo.tangent_frame(base)
    logs = geo.log_map(base[:, None, :], X)
    v = np.einsum("tcik,tci->tck", frame[:, None], logs * np.array([-1.0, 1.0, 1.0]))
    w = v[..., 0] + 1j * v[..., 1]
    z = mesh.points[mesh.triangles]
    mu_t = triangle_beltrami(mesh, mu)
    zeta = z if mu_t is None else z + mu_t[:, None] * np.conj(z)
    e1, e2 = zeta[:, 1] - zeta[:, 0], zeta[:, 2] - zeta[:, 0]
    dw1, dw2 = w[:, 1] - w[:, 0], w[:, 2] - w[:, 0]
    det = e1 * np.conj(e2) - np.conj(e1) * e2
    fz = (dw1 * np.conj(e2) - np.conj(e1) * dw2) / det
    fzbar = (e1 * dw2 - e2 * dw1) / det
    area = 0.5 * (np.conj(e1) * e2).imag
    return TriangleDerivatives(base=base, frame=frame, fz=fz, fzbar=fzbar, zeta_area=area, corner_images=X)


@dataclass
class HopfDifferential:
    values: np.ndarray  # (T,) <f_zeta, f_zeta> per triangle
    energy_density: np.ndarray  # (T,) |f_zeta|^2 + |f_zeta_bar|^2
    vertex_values: np.ndarray  # (V,) area-averaged Hopf differential in the representative chart
    vertex_density: np.ndarray  # (V,) area-averaged energy density, same chart
    dbar_residual: float  # ||(dbar - mu d - 2 mu_z) Phi|| / ||e|| (chart L2 norms)
    relative_size: float  # ||Phi|| / ||e|| over vertex values (hyperbolic L2)
    max_relative_size: float  # max_v |Phi_v| / e_v


def _star_charts(mesh):
    """For every triangle corner: the triangle pulled back into the chart of
    the corner's representative point and the deck derivative at each vertex."""
    key = "star_charts"
    if key not in mesh._cache:
        tri = mesh.triangles
        deck = mesh.deck_matrices
        inv = np.linalg.inv(deck)
        z = mesh.points[tri]  # (T, 3)
        g = deck[mesh.deck[tri]]  # (T, 3, 2, 2): element of corner c
        gi = inv[mesh.deck[tri]]
        zz = geo.mobius(gi[:, :, None], z[:, None, :])  # (T, c, k)
        der = geo.mobius_derivative(g[:, :, None], zz)  # G_c'(z') at every vertex k
        mesh._cache[key] = (zz, der)
    return mesh._cache[key]


def hopf_differential(mesh, mu, f):
    """Hopf differential ``<f_zeta, f_zeta>`` in ``(dz + mu dz_bar)^2`` and its dbar residual.

    Per-triangle values are averaged to logical vertices in the chart of the
    representative point (quadratic-differential transformation law).  The
    residual is the Beltrami-twisted Cauchy-Riemann operator
    ``(d_zbar - mu d_z - 2 mu_z) Phi``, with derivatives from the
    circulations ``oint F dz = 2i int dF/dzbar`` and
    ``oint F dzbar = -2i int dF/dz`` around each vertex star, evaluated after
    pulling the whole star into one chart.
    """
    der = triangle_derivatives(mesh, mu, f)
    phi = der.fz * np.conj(der.fzbar)
    dens = np.abs(der.fz) ** 2 + np.abs(der.fzbar) ** 2
    tri = mesh.triangles
    V = mesh.n_vertices
    rep_z = mesh.points[mesh.rep[mesh.logical]]
    gp = geo.mobius_derivative(mesh.deck_matrices[mesh.deck], rep_z)  # (P,)
    area_t = np.abs(der.zeta_area)
    logical = mesh.logical[tri]
    num = np.zeros(V, dtype=complex)
    den = np.zeros(V)
    dens_v = np.zeros(V)
    for c in range(3):
        np.add.at(num, logical[:, c], area_t * phi * gp[tri[:, c]] ** 2)
        np.add.at(dens_v, logical[:, c], area_t * dens * np.abs(gp[tri[:, c]]) ** 2)
        np.add.at(den, logical[:, c], area_t)
    phi_v = num / den
    dens_v = dens_v / den

    zz, dg = _star_charts(mesh)  # (T, c, k)
    own = phi_v[logical] / gp[tri] ** 2  # value at corner k in the triangle's chart
    phi_s = own[:, None, :] * dg**2
    if mu is None:
        mu_s = np.zeros_like(phi_s)
        mu_v = np.zeros(V, dtype=complex)
    else:
        mu_p = np.broadcast_to(np.asarray(mu, dtype=complex), (mesh.n_points,))
        mu_s = mu_p[tri][:, None, :] * np.conj(dg) / dg
        mu_v = mu_p[mesh.rep]
    circ_dz = np.zeros(V, dtype=complex)
    circ_dzb = np.zeros(V, dtype=complex)
    circ_mu = np.zeros(V, dtype=complex)
    star_area = np.zeros(V)
    for c in range(3):
        c1, c2 = (c + 1) % 3, (c + 2) % 3
        dz = zz[:, c, c2] - zz[:, c, c1]
        mid_phi = 0.5 * (phi_s[:, c, c1] + phi_s[:, c, c2])
        mid_mu = 0.5 * (mu_s[:, c, c1] + mu_s[:, c, c2])
        np.add.at(circ_dz, logical[:, c], mid_phi * dz)
        np.add.at(circ_dzb, logical[:, c], mid_phi * np.conj(dz))
        np.add.at(circ_mu, logical[:, c], mid_mu * np.conj(dz))
        e1 = zz[:, c, 1] - zz[:, c, 0]
        e2 = zz[:, c, 2] - zz[:, c, 0]
        np.add.at(star_area, logical[:, c], 0.5 * np.abs((np.conj(e1) * e2).imag))
    dbar_phi = circ_dz / (2j * star_area)
    d_phi = -circ_dzb / (2j * star_area)
    d_mu = -circ_mu / (2j * star_area)
    resid = dbar_phi - mu_v * d_phi - 2 * d_mu * phi_v
    chart_area = star_area / 3.0
    num_l2 = np.sqrt(np.sum(np.abs(resid) ** 2 * chart_area))
    den_l2 = np.sqrt(np.sum(dens_v**2 * chart_area))
    lam = geo.conformal_factor(mesh.rep_points)
    hyp = mesh.vertex_areas
    rel = np.sqrt(np.sum(np.abs(phi_v) ** 2 / lam**2 * hyp) / np.sum(dens_v**2 / lam**2 * hyp))
    return HopfDifferential(
        values=phi,
        energy_density=dens,
        vertex_values=phi_v,
        vertex_density=dens_v,
        dbar_residual=float(num_l2 / den_l2),
        relative_size=float(rel),
        max_relative_size=float((np.abs(phi_v) / dens_v).max()),
    )
