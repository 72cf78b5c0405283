import numpy as np
import pytest

from hitchlab import geometry as geo
from hitchlab.surface import (
    SurfaceMesh,
    beltrami_from_quaddiff,
    cotan_weights,
    integrate,
    poincare_theta_series,
    stiffness_matrix,
    triangulate,
)
from hitchlab.surface.theta import beltrami_invariance_residual, mesh_quaddiff


@pytest.mark.parametrize("level", [0, 1])
def test_mesh_topology_and_area(level, mesh0, mesh1):
    mesh = (mesh0, mesh1)[level]
    assert mesh.euler_characteristic() == -2
    area = integrate(mesh, np.ones(mesh.n_vertices))
    assert area == pytest.approx(4 * np.pi, rel=5e-3)


def test_area_converges(mesh0, mesh1):
    e0 = abs(mesh0.vertex_areas.sum() - 4 * np.pi)
    e1 = abs(mesh1.vertex_areas.sum() - 4 * np.pi)
    assert e1 < e0 / 3


def test_cotan_weights_nonnegative(mesh1):
    w, _ = cotan_weights(mesh1)
    assert w.min() > 0


def test_stiffness_rows_sum_to_zero(mesh1):
    K = stiffness_matrix(mesh1)
    assert np.abs(K.sum(axis=1)).max() < 1e-10
    assert abs(K - K.T).max() < 1e-12


def test_points_consistent_with_deck_transforms(mesh1):
    rep_z = mesh1.points[mesh1.rep[mesh1.logical]]
    moved = geo.mobius(mesh1.deck_matrices[mesh1.deck], rep_z)
    assert np.abs(moved - mesh1.points).max() < 1e-10


def test_mesh_roundtrip(tmp_path, mesh0):
    path = tmp_path / "mesh.npz"
    mesh0.save(path)
    loaded = SurfaceMesh.load(path)
    assert np.array_equal(loaded.triangles, mesh0.triangles)
    assert np.array_equal(loaded.points, mesh0.points)
    assert loaded.deck_words == mesh0.deck_words


def test_mesh_load_rejects_other_format(tmp_path, mesh0):
    path = tmp_path / "bad.npz"
    np.savez(path, format="something-else")
    with pytest.raises(ValueError):
        SurfaceMesh.load(path)


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        triangulate(level=-1)


def test_theta_series_invariance(mesh0):
    q = poincare_theta_series([1, 0, 0.3j], 5, mesh0.rep_points[:200], group=mesh0.group)
    assert q.invariance_residual < 1e-2
    assert np.all(np.isfinite(q.values))


def test_theta_residual_decreases_with_length(mesh0):
    z = mesh0.rep_points[::20]
    r3 = poincare_theta_series([1.0], 3, z, group=mesh0.group).invariance_residual
    r5 = poincare_theta_series([1.0], 5, z, group=mesh0.group).invariance_residual
    assert r5 < r3


def test_theta_interpolation_matches_direct(mesh0):
    rng = np.random.default_rng(3)
    z = 0.8 * np.sqrt(rng.random(600)) * np.exp(2j * np.pi * rng.random(600))
    fast = poincare_theta_series([1, 0.5], 3, z, group=mesh0.group).values
    direct = poincare_theta_series([1, 0.5], 3, z[:50], group=mesh0.group).values
    assert np.abs(fast[:50] - direct).max() < 1e-9 * np.abs(direct).max()


def test_theta_rejects_high_degree():
    with pytest.raises(ValueError):
        poincare_theta_series(np.ones(8), 2, [0.0])


def test_mesh_quaddiff_is_a_tensor(mesh0):
    q = mesh_quaddiff(mesh0, [1, 0, 0.3j], L=4)
    # copies of the same logical vertex are related by q(Gz) G'(z)^2 = q(z)
    rep = mesh0.rep[mesh0.logical]
    der = geo.mobius_derivative(mesh0.deck_matrices[mesh0.deck], mesh0.points[rep])
    assert np.allclose(q.values * der**2, q.values[rep], atol=1e-12)


def test_beltrami_sup_and_invariance(mesh0):
    q = mesh_quaddiff(mesh0, [1, 0, 0.3j], L=4)
    mu = beltrami_from_quaddiff(q, sup=0.1)
    assert np.abs(mu.values).max() == pytest.approx(0.1)
    assert mu.scale < 1
    assert beltrami_from_quaddiff(q, sup=10.0).scale == 1.0
    coeffs = [1, 0, 0.3j]
    group = mesh0.group

    def mu_fn(z):
        s = poincare_theta_series(coeffs, 5, z, group=group)
        return np.conj(s.values) / geo.conformal_factor(z)

    assert beltrami_invariance_residual(mu_fn, mesh0.rep_points[::50], group) < 1e-2


def test_beltrami_rejects_nonfinite(mesh0):
    q = mesh_quaddiff(mesh0, [1.0], L=2)
    q.values[0] = np.nan
    with pytest.raises(ValueError):
        beltrami_from_quaddiff(q)
