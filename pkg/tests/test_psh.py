import numpy as np
import pytest

from hitchlab.psh import (
    DiskScenario,
    EnergySurface,
    energy_disk,
    equality_locus_gap,
    fd_laplacian,
    first_derivatives,
    hessian_probe,
    toledo_quantities,
)
from hitchlab.surface import beltrami_from_quaddiff
from hitchlab.surface.theta import mesh_quaddiff


def test_fd_laplacian_quadratic_exact():
    surf = EnergySurface.from_function(lambda s, t: 3 * s**2 + t**2 + s * t + 1, h=0.1, m=2)
    lap = fd_laplacian(surf)
    assert lap.value == pytest.approx(8.0, rel=1e-10)
    assert lap.error < 1e-10
    assert lap.verdict == "positive"


def test_fd_laplacian_richardson_error_tracks_quartic():
    surf = EnergySurface.from_function(lambda s, t: s**2 + t**2 + 50 * s**4, h=0.05, m=2)
    lap = fd_laplacian(surf)
    # 5-point error on s^4 is h^2 * 50 * 2, Richardson estimate (L_h - L_2h)/3 is exactly that
    assert lap.value - 4.0 == pytest.approx(lap.error, rel=1e-6)


def test_fd_laplacian_verdicts():
    neg = EnergySurface.from_function(lambda s, t: -(s**2 + t**2), h=0.1, m=2)
    assert fd_laplacian(neg).verdict == "negative"
    flat = EnergySurface.from_function(lambda s, t: 5 + 0 * s, h=0.1, m=2)
    assert fd_laplacian(flat).verdict == "degenerate"
    # a centre value off by h^2 cancels the step-h Laplacian but not the step-2h one
    noisy = EnergySurface.from_function(lambda s, t: s**2 + t**2, h=0.1, m=2)
    noisy.energies[2, 2] += 0.1**2
    lap = fd_laplacian(noisy)
    assert lap.verdict == "inconclusive"
    assert lap.error == pytest.approx(1.0)


def test_fd_laplacian_needs_two_rings():
    surf = EnergySurface.from_function(lambda s, t: s**2, h=0.1, m=1)
    with pytest.raises(ValueError):
        fd_laplacian(surf)


def test_first_derivatives_linear():
    surf = EnergySurface.from_function(lambda s, t: 2 * s - 3 * t, h=0.1, m=2)
    ds, dt = first_derivatives(surf)
    assert ds == pytest.approx(2) and dt == pytest.approx(-3)


@pytest.fixture(scope="module")
def mu0(mesh0):
    return beltrami_from_quaddiff(mesh_quaddiff(mesh0, [1, 0, 0.3j], L=4), sup=0.5).values


def test_scenario_validation(mesh0, mu0):
    unit = mu0 / np.abs(mu0).max()
    with pytest.raises(ValueError):
        DiskScenario(mesh0, unit, radius=0.6)
    with pytest.raises(ValueError):
        DiskScenario(mesh0, unit, radius=0.05, m=0)
    with pytest.raises(ValueError):
        DiskScenario(mesh0, unit, radius=0.2, base_mu=0.85 * unit)


def test_zero_direction_is_degenerate(mesh0):
    sc = DiskScenario(mesh0, np.zeros(mesh0.n_points, dtype=complex), radius=0.08, m=2)
    lap = fd_laplacian(energy_disk(sc, stencil_only=True))
    assert lap.verdict == "degenerate"
    assert lap.value == pytest.approx(0, abs=1e-9)


@pytest.fixture(scope="module")
def fuchsian_disk(mesh0, mu0):
    return energy_disk(DiskScenario(mesh0, mu0, radius=0.08, m=2))


def test_disk_minimum_at_fuchsian(fuchsian_disk):
    surf = fuchsian_disk
    assert surf.energy(0, 0) <= np.nanmin(surf.energies) + 1e-12
    ds, dt = first_derivatives(surf)
    assert abs(ds) < 1e-4 and abs(dt) < 1e-4
    lap = fd_laplacian(surf)
    assert lap.verdict == "positive" and lap.value > lap.error


def test_toledo_at_fuchsian(fuchsian_disk):
    tol = toledo_quantities(fuchsian_disk)
    assert all(tol.checks().values())
    assert tol.b == pytest.approx(tol.diagnostics["b_continuum"], rel=0.02)


def test_toledo_off_minimum(mesh0, mu0):
    other = beltrami_from_quaddiff(mesh_quaddiff(mesh0, [0, 1, 0, 0.5], L=4), sup=0.5).values
    sc = DiskScenario(mesh0, other, radius=0.08, m=2, base_mu=0.6 * mu0)
    tol = toledo_quantities(energy_disk(sc, stencil_only=True))
    checks = tol.checks()
    assert all(checks.values()), checks
    assert tol.alpha > 0 and tol.rho <= 0
    assert abs(tol.alpha - (tol.a / 2 + tol.rho)) < 0.1 * tol.alpha


def test_equality_gap_positive(fuchsian_disk):
    gap = equality_locus_gap(fuchsian_disk)
    assert not gap.degenerate
    assert gap.ratio > 0.5


def test_hessian_rejects_dependent_directions(mesh0, mu0):
    with pytest.raises(ValueError):
        hessian_probe(mesh0, [mu0, 2j * mu0], h=0.04)
