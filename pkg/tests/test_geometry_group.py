import numpy as np
import pytest

from hitchlab import geometry as geo
from hitchlab.surface import build_genus2_octagon
from hitchlab.surface.group import RELATION, inverse_index, octagon_geometry


@pytest.fixture(scope="module")
def group():
    return build_genus2_octagon()


def test_relation_holds(group):
    assert group.relation_defect() < 1e-12


def test_generators_are_su11(group):
    J = np.diag([1.0, -1.0])
    for g in group.generators:
        assert np.allclose(np.conj(g).T @ J @ g, J, atol=1e-12)
        assert abs(np.linalg.det(g) - 1) < 1e-12


def test_inverse_pairs(group):
    for i in range(8):
        prod = group.generators[i] @ group.generators[inverse_index(i)]
        assert np.allclose(prod, np.eye(2), atol=1e-12)
    assert sorted(RELATION) == list(range(8))


def test_side_pairings_map_vertices(group):
    verts = group.vertices
    for side, partner, gen in group.side_pairs:
        a, b = verts[side], verts[(side + 1) % 8]
        img = geo.mobius(group.generators[gen], np.array([a, b]))
        target = {complex(np.round(verts[partner], 9)), complex(np.round(verts[(partner + 1) % 8], 9))}
        assert {complex(np.round(w, 9)) for w in img} == target


def test_octagon_radii_have_angle_pi_over_4():
    circum, inradius = octagon_geometry()
    # regular hyperbolic n-gon with interior angle a: cosh R = cot(pi/n) cot(a/2)
    assert np.cosh(circum) == pytest.approx(1 / np.tan(np.pi / 8) ** 2, rel=1e-12)
    assert 0 < inradius < circum


def test_ball_elements_distinct(group):
    words, mats = group.ball(2)
    assert len(words) == len(mats) == 1 + 8 + 8 * 7  # free-group count up to the relation
    # the identity is the first element
    assert np.allclose(mats[0], np.eye(2))


def test_log_exp_roundtrip():
    rng = np.random.default_rng(1)
    z = 0.6 * (rng.random(20) - 0.5) + 0.6j * (rng.random(20) - 0.5)
    w = 0.6 * (rng.random(20) - 0.5) + 0.6j * (rng.random(20) - 0.5)
    x, y = geo.disk_to_hyperboloid(z), geo.disk_to_hyperboloid(w)
    v = geo.log_map(x, y)
    assert np.allclose(geo.exp_map(x, v), y, atol=1e-10)
    assert np.allclose(np.sqrt(geo.minkowski(v, v)), geo.distance(x, y), atol=1e-10)


def test_lorentz_matrix_matches_mobius(group):
    z = np.array([0.1 + 0.2j, -0.3j, 0.4])
    for g in group.generators[:4]:
        L = geo.lorentz_matrix(g)
        via_lorentz = geo.hyperboloid_to_disk(geo.disk_to_hyperboloid(z) @ L.T)
        assert np.allclose(via_lorentz, geo.mobius(g, z), atol=1e-10)
        assert np.allclose(L.T @ geo.MINKOWSKI @ L, geo.MINKOWSKI, atol=1e-10)
