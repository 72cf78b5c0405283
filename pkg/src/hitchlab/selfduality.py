"""Cyclic self-duality equations on the octagon surface.

For the Hitchin-section Higgs field with only ``q_n`` possibly non-zero, the
harmonic metric is diagonal, ``H = diag(exp(2 w_i))`` in the holomorphic
splitting.  With the hyperbolic density ``lambda`` we use the invariant
unknowns

    v_i = w_i + (n + 1 - 2 i) / 4 * log(lambda),        sum_i v_i = 0,

which are functions on the surface.  The equation ``F_H + [phi, phi^*] = 0``
becomes the cyclic Toda system (``Delta_g`` the hyperbolic Laplacian)

    Delta_g v_i = (n + 1 - 2 i) / 2 + T_{i-1} - T_i,
    T_i = 2 r_i^2 exp(2 (v_{i+1} - v_i)),    i = 1 .. n-1,
    T_0 = T_n = 2 |q_n|_g^2 exp(2 (v_1 - v_n)),   |q_n|_g^2 = |q_n|^2 lambda^-n.

At ``q_n = 0`` it is solved by constants with ``v_{i+1} - v_i = -log(2 r_i) / 2``.
The derivation is documented in docs/derivations.md and checked by the
holonomy of the flat connection ``D = nabla_H + phi + phi^*``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from .higgs import hitchin_higgs_field, higgs_energy_density, subdiagonal
from .surface.mesh import stiffness_matrix

# energy = C_E * integral of tr(phi phi^*H) / lambda over the surface; fixed by
# requiring the n = 2, q = 0 energy to equal the area 4 pi of the surface.
C_E = 4.0


def background_exponents(n):
    """``c_i = (n + 1 - 2 i) / 4`` with ``w_i = v_i - c_i log(lambda)``."""
    i = np.arange(1, n + 1)
    return (n + 1 - 2 * i) / 4.0


@dataclass
class CyclicHiggsData:
    """Rank ``n`` and ``q_n`` sampled at the representative point of each
    logical vertex (``None`` for the Fuchsian point ``q_n = 0``)."""

    n: int
    q: np.ndarray = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("rank must be >= 2")
        if self.q is not None:
            self.q = np.asarray(self.q, dtype=complex)

    def q_norm2(self, mesh):
        """Pointwise ``|q_n|_g^2 = |q_n|^2 lambda^-n`` per logical vertex."""
        if self.q is None:
            return np.zeros(mesh.n_vertices)
        lam = geo.conformal_factor(mesh.rep_points)
        return np.abs(np.broadcast_to(self.q, (mesh.n_vertices,))) ** 2 * lam ** (-self.n)

    def q_points(self, mesh):
        """``q_n`` in the chart of every mesh point (``q(Gz) = q(z) / G'(z)^n``)."""
        if self.q is None:
            return np.zeros(mesh.n_points, dtype=complex)
        q = np.broadcast_to(self.q, (mesh.n_vertices,))
        rep_z = mesh.points[mesh.rep[mesh.logical]]
        der = geo.mobius_derivative(mesh.deck_matrices[mesh.deck], rep_z)
        return q[mesh.logical] / der**self.n


@dataclass
class MetricWeights:
    """Per-logical-vertex ``v`` (invariant form) and ``w`` at the representative chart."""

    v: np.ndarray  # (V, n)
    w: np.ndarray  # (V, n)
    history: dict = field(default_factory=dict)

    @staticmethod
    def from_v(mesh, v, history=None):
        n = v.shape[1]
        loglam = np.log(geo.conformal_factor(mesh.rep_points))
        w = v - background_exponents(n)[None, :] * loglam[:, None]
        return MetricWeights(v=v, w=w, history=history or {})


def zero_sum_basis(n):
    """Orthonormal basis (n, n-1) of the vectors with zero sum."""
    q, _ = np.linalg.qr(np.eye(n)[:, :-1] - 1.0 / n)
    return q[:, : n - 1]


def fuchsian_closed_form(mesh, n):
    """Exact solution at ``q_n = 0``: constant ``v`` with steps ``-log(i (n - i)) / 2``."""
    steps = -0.5 * np.log(2 * subdiagonal(n))
    v = np.concatenate([[0.0], np.cumsum(steps)])
    v -= v.mean()
    return MetricWeights.from_v(mesh, np.tile(v, (mesh.n_vertices, 1)))


def _couplings(n, v, qn2):
    """``T`` on the cycle: link ``l`` joins node ``l`` to ``l + 1`` (mod n)."""
    c = np.empty((v.shape[0], n))
    c[:, : n - 1] = 2 * subdiagonal(n) ** 2
    c[:, n - 1] = 2 * qn2
    diff = np.roll(v, -1, axis=1) - v  # v_{l+1} - v_l, link n: v_1 - v_n
    return c * np.exp(2 * diff)


def _residual(K, A, v, qn2):
    """``G = -K v - A (S + T_{i-1} - T_i)`` (zero exactly at a solution)."""
    n = v.shape[1]
    S = 2 * background_exponents(n)
    T = _couplings(n, v, qn2)
    src = S[None, :] + np.roll(T, 1, axis=1) - T
    return -(K @ v) - A[:, None] * src, T


def _jacobian(K, A, T, B):
    """Jacobian of the residual in the zero-sum coordinates ``v = y B^T``."""
    V, n = T.shape
    m = n - 1
    # cycle Laplacian with weights 2 T per vertex
    L = np.zeros((V, n, n))
    idx = np.arange(n)
    nxt = (idx + 1) % n
    wt = 2 * T
    L[:, idx, idx] += wt
    L[:, nxt, nxt] += wt
    L[:, idx, nxt] -= wt
    L[:, nxt, idx] -= wt
    local = np.einsum("ia,vij,jb->vab", B, L, B) * A[:, None, None]
    rows = (np.arange(V)[:, None, None] * m + np.arange(m)[None, :, None]) + 0 * np.arange(m)[None, None, :]
    cols = (np.arange(V)[:, None, None] * m + np.arange(m)[None, None, :]) + 0 * np.arange(m)[None, :, None]
    blocks = sp.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(V * m, V * m))
    # vertex-major ordering: unknown (a, k) -> a * m + k
    return -(sp.kron(K, sp.identity(m), format="csr") + blocks)


class NewtonDivergence(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def solve_cyclic_metric(mesh, data, tol=1e-10, init=None, max_iter=60):
    """Damped Newton solve of the cyclic Toda system.

    ``tol`` bounds the pointwise residual ``|Delta_g v - RHS|`` (sup norm).
    ``init`` is a :class:`MetricWeights`, ``"fuchsian"`` (default) or ``"zero"``.
    The history records the residual after every step and the step lengths.
    """
    n = data.n
    K = stiffness_matrix(mesh)
    A = mesh.vertex_areas
    qn2 = data.q_norm2(mesh)
    B = zero_sum_basis(n)
    if init is None or (isinstance(init, str) and init == "fuchsian"):
        v = fuchsian_closed_form(mesh, n).v
    elif isinstance(init, str) and init == "zero":
        v = np.zeros((mesh.n_vertices, n))
    else:
        v = np.array(init.v, dtype=float)
    v = v - v.mean(axis=1, keepdims=True)

    G, T = _residual(K, A, v, qn2)
    res = np.abs(G / A[:, None]).max()
    history = {"residual": [float(res)], "step": []}
    for _ in range(max_iter):
        if res < tol:
            break
        Jm = _jacobian(K, A, T, B)
        rhs = -(G @ B).ravel()
        dy = spla.spsolve(Jm.tocsc(), rhs).reshape(-1, n - 1)
        dv = dy @ B.T
        norm0 = np.linalg.norm(G)
        t = 1.0
        while True:
            v_new = v + t * dv
            G_new, T_new = _residual(K, A, v_new, qn2)
            if np.linalg.norm(G_new) < (1 - 1e-4 * t) * norm0 or np.abs(G_new / A[:, None]).max() < tol:
                break
            t *= 0.5
            if t < 1e-8:
                raise NewtonDivergence("damped Newton stalled at residual %.3e" % res, history)
        v, G, T = v_new, G_new, T_new
        res = np.abs(G / A[:, None]).max()
        history["residual"].append(float(res))
        history["step"].append(t)
    else:
        if res >= tol:
            raise NewtonDivergence("no convergence: residual %.3e" % res, history)
    v = v - v.mean(axis=1, keepdims=True)
    history["zero_sum_defect"] = float(np.abs(v.sum(axis=1)).max())
    return MetricWeights.from_v(mesh, v, history)


def pde_residual(mesh, data, weights):
    """Sup norm of the pointwise discrete residual ``|Delta_g v - RHS|``."""
    K = stiffness_matrix(mesh)
    A = mesh.vertex_areas
    G, _ = _residual(K, A, weights.v, data.q_norm2(mesh))
    return float(np.abs(G / A[:, None]).max())


def energy_from_higgs(mesh, data, weights, c_e=C_E):
    """``c_E`` times the integral of ``tr(phi phi^*H) / lambda`` (a function on the surface)."""
    n = data.n
    z = mesh.rep_points
    q = np.zeros((mesh.n_vertices, n - 1), dtype=complex)
    if data.q is not None:
        q[:, -1] = data.q
    phi = hitchin_higgs_field(q)
    w = weights.w - weights.w.mean(axis=1, keepdims=True)
    density = higgs_energy_density(phi, w) / geo.conformal_factor(z)
    return c_e * float(density @ mesh.vertex_areas)


def _vertex_gradients(mesh, v):
    """Recovered ``d v / d z`` per chart point (area-weighted triangle average).

    Returns an array (P, n) in the chart of each point; ``dv/dz`` is a (1,0)
    form, so chart changes multiply by the deck derivative.
    """
    tri = mesh.triangles
    z = mesh.points[tri]
    vals = v[mesh.logical[tri]]  # (T, 3, n)
    e1 = z[:, 1] - z[:, 0]
    e2 = z[:, 2] - z[:, 0]
    d1 = vals[:, 1] - vals[:, 0]
    d2 = vals[:, 2] - vals[:, 0]
    det = (e1 * np.conj(e2) - np.conj(e1) * e2)[:, None]
    dz = (d1 * np.conj(e2)[:, None] - np.conj(e1)[:, None] * d2) / det
    area = np.abs(mesh.euclidean_areas)
    rep_z = mesh.points[mesh.rep[mesh.logical]]
    gp = geo.mobius_derivative(mesh.deck_matrices[mesh.deck], rep_z)
    V = mesh.n_vertices
    num = np.zeros((V, v.shape[1]), dtype=complex)
    den = np.zeros(V)
    for c in range(3):
        np.add.at(num, mesh.logical[tri[:, c]], area[:, None] * dz * gp[tri[:, c], None])
        np.add.at(den, mesh.logical[tri[:, c]], area)
    rep_grad = num / den[:, None]
    return rep_grad[mesh.logical] / gp[:, None]


_GAUSS = np.array([0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6])


def _connection(n, z, dz, v, dvz, q, with_higgs=True, background=True):
    """``-A(dz)`` for the unitary-frame connection at points ``z`` (stack)."""
    c = background_exponents(n)
    if background:
        loglam = np.log(geo.conformal_factor(z))
        dloglam = 2 * np.conj(z) / (1 - np.abs(z) ** 2)
    else:
        loglam = np.zeros(z.shape)
        dloglam = np.zeros(z.shape, dtype=complex)
    w = v - c[None, :] * loglam[:, None]
    wz = dvz - c[None, :] * dloglam[:, None]
    diag = wz * dz[:, None] - np.conj(wz) * np.conj(dz)[:, None]  # (N, n), purely imaginary
    A = np.zeros((len(z), n, n), dtype=complex)
    idx = np.arange(n)
    A[:, idx, idx] = diag
    if with_higgs:
        q_full = np.zeros((len(z), n - 1), dtype=complex)
        q_full[:, -1] = q
        phi = hitchin_higgs_field(q_full)
        scale = np.exp(w[:, :, None] - w[:, None, :])
        phi_u = phi * scale
        A += phi_u * dz[:, None, None] + np.conj(np.swapaxes(phi_u, 1, 2)) * np.conj(dz)[:, None, None]
    return -A


def flatness_residual(mesh, data, weights, with_higgs=True, background=True, return_faces=False):
    """Sup over faces of ``||Hol - I||_F / (hyperbolic face area)``.

    Each edge transport solves ``U' = -A(gamma') U`` along the chart segment
    with the fourth-order two-point Gauss-Magnus rule; the holonomy is the
    ordered product around the triangle.  ``v`` and ``q`` are interpolated
    linearly, ``dv/dz`` from recovered vertex gradients, and the background
    ``log lambda`` terms are evaluated analytically.
    """
    n = data.n
    tri = mesh.triangles
    T = len(tri)
    z = mesh.points[tri]
    v = weights.v[mesh.logical[tri]]  # (T, 3, n)
    dv = _vertex_gradients(mesh, weights.v)[tri]
    q = data.q_points(mesh)[tri]
    hol = np.broadcast_to(np.eye(n, dtype=complex), (T, n, n)).copy()
    for c in range(3):
        c1 = (c + 1) % 3
        dz = z[:, c1] - z[:, c]
        Ms = []
        for s in _GAUSS:
            pt = z[:, c] + s * dz
            vv = (1 - s) * v[:, c] + s * v[:, c1]
            dd = (1 - s) * dv[:, c] + s * dv[:, c1]
            qq = (1 - s) * q[:, c] + s * q[:, c1]
            Ms.append(_connection(n, pt, dz, vv, dd, qq, with_higgs, background))
        M1, M2 = Ms
        omega = 0.5 * (M1 + M2) + (np.sqrt(3) / 12) * (M2 @ M1 - M1 @ M2)
        hol = sla.expm(omega) @ hol
    err = np.linalg.norm(hol - np.eye(n), axis=(1, 2))
    area = np.abs(mesh.euclidean_areas) * geo.conformal_factor(z.mean(axis=1))
    per_face = err / area
    if return_faces:
        return float(per_face.max()), per_face
    return float(per_face.max())
