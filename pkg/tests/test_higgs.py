import numpy as np
import pytest

from hitchlab.higgs import (
    adjoint,
    charpoly_invariants,
    grading_matrix,
    higgs_energy_density,
    hitchin_higgs_field,
    metric_bracket,
    mu_phi_entry21,
    subdiagonal,
    verify_section_triangularity,
)

RNG = np.random.default_rng(7)


def random_q(n):
    return RNG.normal(size=n - 1) + 1j * RNG.normal(size=n - 1)


def test_rank2_fuchsian_field():
    phi = hitchin_higgs_field([0.0])
    assert np.array_equal(phi, np.array([[0, 0], [0.5, 0]]))


def test_rank1_rejected():
    with pytest.raises(ValueError):
        hitchin_higgs_field(np.zeros(0))


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_traceless_and_subdiagonal(n):
    phi = hitchin_higgs_field(random_q(n))
    assert np.trace(phi) == 0
    assert np.array_equal(np.diag(phi, -1), subdiagonal(n))
    assert np.all(np.tril(phi, -2) == 0)


def test_batched_field():
    q = RNG.normal(size=(4, 5, 2)) + 0j
    phi = hitchin_higgs_field(q)
    assert phi.shape == (4, 5, 3, 3)
    assert np.array_equal(phi[2, 3], hitchin_higgs_field(q[2, 3]))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_grading_identity(n):
    for t in (0.3, 2.0, 1.5 + 0.5j, -0.7 + 0.2j):
        q = random_q(n)
        scaled = q * np.power(complex(t), np.arange(2, n + 1))
        g = grading_matrix(n, t)
        rhs = t * g @ hitchin_higgs_field(q) @ np.linalg.inv(g)
        assert np.abs(hitchin_higgs_field(scaled) - rhs).max() < 1e-10


def test_charpoly_matches_numpy():
    for n in (2, 3, 4, 5):
        A = hitchin_higgs_field(random_q(n))
        ours = charpoly_invariants(A)
        ref = np.poly(A)[2:]
        assert np.allclose(ours, ref, atol=1e-9)


def test_charpoly_rejects_traced():
    with pytest.raises(ValueError):
        charpoly_invariants(np.eye(3))
    with pytest.raises(ValueError):
        charpoly_invariants(np.zeros((2, 3)))


def test_rank2_invariant_is_minus_q2():
    q2 = 0.7 - 0.2j
    # det(x - phi) = x^2 - q2 / 2 for phi = [[0, q2], [1/2, 0]]
    assert charpoly_invariants(hitchin_higgs_field([q2]))[0] == pytest.approx(-q2 / 2)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_triangularity(n):
    rep = verify_section_triangularity(n, sample_count=100)
    assert rep["triangular"]
    assert rep["max_relative_upper"] < 1e-6
    assert rep["min_abs_diagonal"] > 0


def test_triangularity_diagonal_constants():
    assert verify_section_triangularity(2, 5)["diagonal_constants"] == pytest.approx([-0.5])
    assert verify_section_triangularity(3, 5)["diagonal_constants"] == pytest.approx([-2.0, -1.0])


def test_mu_phi_entry21():
    for n in (2, 3, 4, 7):
        mu = 0.3 - 0.1j
        assert mu_phi_entry21(mu, hitchin_higgs_field(random_q(n))) == pytest.approx((n - 1) / 2 * mu, abs=0)


def test_metric_bracket_hermitian_and_traceless():
    n = 4
    w = RNG.normal(size=n)
    w -= w.mean()
    phi = hitchin_higgs_field(random_q(n))
    br = metric_bracket(phi, w)
    H = np.diag(np.exp(2 * w))
    assert abs(np.trace(br)) < 1e-10
    assert np.allclose(H @ br, (H @ br).conj().T, atol=1e-10)


def test_metric_bracket_rank2_example():
    # phi = [[0, 0], [1/2, 0]], H = identity: [phi, phi^*] = diag(-1/4, 1/4)
    br = metric_bracket(hitchin_higgs_field([0.0]), [0.0, 0.0])
    assert np.allclose(br, np.diag([-0.25, 0.25]))


def test_metric_weights_must_sum_to_zero():
    with pytest.raises(ValueError):
        metric_bracket(hitchin_higgs_field([0.0]), [0.1, 0.2])


def test_adjoint_full_and_diagonal_agree():
    w = np.array([0.3, -0.1, -0.2])
    phi = hitchin_higgs_field(random_q(3))
    h = np.exp(2 * w)
    assert np.allclose(adjoint(phi, h), adjoint(phi, np.diag(h)))


def test_energy_density_fuchsian():
    # tr(phi phi^*) at H = id equals sum r_i^2
    for n in (2, 3, 4):
        phi = hitchin_higgs_field(np.zeros(n - 1))
        assert higgs_energy_density(phi) == pytest.approx(np.sum(subdiagonal(n) ** 2))
