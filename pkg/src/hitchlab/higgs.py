"""Pointwise matrix algebra of the Hitchin section.

``hitchin_higgs_field(q)`` realises the Higgs field of the Hitchin section in a
local coordinate: zero diagonal, subdiagonal ``r_i = i (n - i) / 2`` and the
k-th superdiagonal equal to ``q_{k+1}``.  Hermitian metrics are diagonal,
``H = diag(exp(2 w_i))``, or a full Hermitian matrix where noted.
"""
import numpy as np


def subdiagonal(n):
    """The constants ``r_i = i (n - i) / 2`` for ``i = 1 .. n-1``."""
    i = np.arange(1, n)
    return i * (n - i) / 2.0


def hitchin_higgs_field(q):
    """Higgs field matrix for differentials ``q = (q_2, ..., q_n)``.

    ``q`` may carry leading batch axes: shape ``(..., n-1)`` -> ``(..., n, n)``.
    """
    q = np.asarray(q, dtype=complex)
    if q.ndim == 0 or q.shape[-1] < 1:
        raise ValueError("rank must be >= 2: need at least q_2")
    n = q.shape[-1] + 1
    phi = np.zeros(q.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n - 1)
    phi[..., idx + 1, idx] = subdiagonal(n)
    for k in range(1, n):  # k-th superdiagonal carries q_{k+1}
        j = np.arange(n - k)
        phi[..., j, j + k] = q[..., k - 1 : k]
    return phi


def grading_matrix(n, t):
    """``g_t = diag(t^{(n+1-2i)/2})``, the grading element of the principal sl2."""
    i = np.arange(1, n + 1)
    return np.diag(np.power(complex(t), (n + 1 - 2 * i) / 2.0))


def charpoly_invariants(A, tol=1e-10):
    """Coefficients ``(p_2, ..., p_n)`` of ``det(x - A) = x^n + sum_k p_k x^(n-k)``.

    Faddeev-LeVerrier recursion; ``A`` must be square and trace free.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("charpoly_invariants needs a square matrix")
    n = A.shape[0]
    norm = np.abs(A).max(initial=0.0)
    if abs(np.trace(A)) > tol * max(norm, 1.0):
        raise ValueError("matrix is not trace free")
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs[2:]


def verify_section_triangularity(n, sample_count=100, seed=0, step=1e-5):
    """Finite-difference Jacobian of ``q -> charpoly_invariants(hitchin_higgs_field(q))``.

    Returns a dict with the worst relative entry above the degree grading,
    the diagonal constants ``dp_k/dq_k`` at every sample and their spread.
    """
    if n < 2 or sample_count < 1:
        raise ValueError("need n >= 2 and sample_count >= 1")
    rng = np.random.default_rng(seed)
    m = n - 1
    worst_upper = 0.0
    diagonals = []
    for s in range(sample_count):
        if s == 0:
            q = np.zeros(m, dtype=complex)
        else:
            q = rng.normal(size=m) + 1j * rng.normal(size=m)
        jac = np.zeros((m, m), dtype=complex)
        for j in range(m):
            dq = np.zeros(m, dtype=complex)
            dq[j] = step
            plus = charpoly_invariants(hitchin_higgs_field(q + dq))
            minus = charpoly_invariants(hitchin_higgs_field(q - dq))
            jac[:, j] = (plus - minus) / (2 * step)
        scale = np.abs(jac).max()
        upper = np.abs(np.triu(jac, 1)).max(initial=0.0) / scale
        worst_upper = max(worst_upper, upper)
        diagonals.append(np.diag(jac))
    diagonals = np.array(diagonals)
    spread = np.abs(diagonals - diagonals[0]).max() / np.abs(diagonals[0]).max()
    smallest = np.abs(diagonals).min()
    return {
        "n": n,
        "samples": sample_count,
        "max_relative_upper": float(worst_upper),
        "diagonal_constants": diagonals[0].real.tolist(),
        "diagonal_spread": float(spread),
        "min_abs_diagonal": float(smallest),
        "triangular": bool(worst_upper < 1e-6 and smallest > 1e-8 and spread < 1e-6),
    }


def _metric(w):
    w = np.asarray(w, dtype=float)
    if abs(w.sum(axis=-1)).max(initial=0.0) > 1e-12:
        raise ValueError("metric weights must sum to zero")
    return np.exp(2 * w)


def adjoint(phi, h):
    """``phi^{*H} = H^-1 conj(phi)^T H``; ``h`` is a diagonal (vector) or full metric."""
    phi = np.asarray(phi, dtype=complex)
    h = np.asarray(h)
    if h.ndim == phi.ndim:  # full Hermitian matrix
        return np.linalg.solve(h, np.conj(np.swapaxes(phi, -1, -2)) @ h)
    return np.conj(np.swapaxes(phi, -1, -2)) * h[..., None, :] / h[..., :, None]


def metric_bracket(phi, w):
    """``[phi, phi^{*H}]`` for ``H = diag(exp(2 w))``.

    ``H`` times the result is Hermitian, i.e. ``-i [phi, phi^*]`` is
    anti-self-adjoint with respect to ``H``; the result is trace free.
    """
    star = adjoint(phi, _metric(w))
    return phi @ star - star @ phi


def higgs_energy_density(phi, w=None, metric=None):
    """``tr(phi phi^{*H})`` for ``H = diag(exp(2 w))`` or a full Hermitian ``metric``."""
    if metric is None:
        h = _metric(np.zeros(np.shape(phi)[-1]) if w is None else w)
    else:
        h = np.asarray(metric, dtype=complex)
    val = np.trace(phi @ adjoint(phi, h), axis1=-2, axis2=-1)
    return np.real(val)


def mu_phi_entry21(mu, phi):
    """The (2,1) entry of ``mu * phi``; equals ``r_1 mu = (n-1) mu / 2`` on the section."""
    phi = np.asarray(phi)
    if phi.shape[-1] < 2:
        raise ValueError("rank must be >= 2")
    return mu * phi[..., 1, 0]
