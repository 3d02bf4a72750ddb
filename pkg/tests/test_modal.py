import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, linalg

from micropillar import modal
from micropillar.physmodel import QUARTZ, CrossSection, Frame, Material, published_geometry

FREE = published_geometry(membrane_stiffness_scale=0.0)
# sqrt(102.7e9 / 2648) / (2 * 1 mm), evaluated by hand
NU1 = 3.1138396e6
TOTAL_MASS = 66.045e-9


def default_frame():
    return Frame(0.5e-3, CrossSection("square", 0.5e-3), QUARTZ.young_modulus * 20e-6)


def test_analytic_fundamental_and_harmonic():
    (f1, shape1), (f2, _) = modal.analytic_modes(QUARTZ, FREE, 2)
    assert f1 == pytest.approx(NU1, rel=1e-6)
    assert f1 == pytest.approx(3.114e6, abs=0.5e3)
    assert f2 == pytest.approx(2 * f1, rel=1e-15)
    assert shape1(0.0) == pytest.approx(1.0)
    assert shape1(1e-3) == pytest.approx(-1.0)


def test_analytic_length_scaling():
    f1 = modal.analytic_modes(QUARTZ, FREE, 1)[0][0]
    f2 = modal.analytic_modes(QUARTZ, dataclasses.replace(FREE, length=2e-3), 1)[0][0]
    assert f2 == pytest.approx(f1 / 2, rel=1e-15)


def test_analytic_needs_one_mode():
    with pytest.raises(ValueError):
        modal.analytic_modes(QUARTZ, FREE, 0)


def test_free_rod_has_one_rigid_mode():
    s = modal.assemble_system(QUARTZ, FREE, 10)
    w = np.linalg.eigvalsh(s.stiffness)
    assert np.sum(np.abs(w) < 1e-9 * np.abs(w).max()) == 1


def test_mass_matrix_sums_to_structural_mass():
    s = modal.assemble_system(QUARTZ, FREE, 200)
    assert s.total_mass == pytest.approx(TOTAL_MASS, rel=1e-4)
    assert s.total_mass == pytest.approx(FREE.total_mass(QUARTZ), rel=1e-12)


def test_membrane_mass_adds_to_total():
    g = dataclasses.replace(FREE, membrane_mass=1e-9)
    assert modal.assemble_system(QUARTZ, g, 20).total_mass == pytest.approx(FREE.total_mass(QUARTZ) + 1e-9)


def test_grounding_spring_makes_k_nonsingular():
    s = modal.assemble_system(QUARTZ, published_geometry(), 10)
    w = np.linalg.eigvalsh(s.stiffness)
    assert w.min() > 1e-12 * w.max()


def test_matrices_are_symmetric():
    s = modal.assemble_system(QUARTZ, published_geometry(frame=default_frame(), membrane_offset=3e-6), 40)
    assert np.allclose(s.stiffness, s.stiffness.T, rtol=0, atol=1e-12 * np.abs(s.stiffness).max())
    assert np.array_equal(s.mass, s.mass.T)
    assert np.linalg.eigvalsh(s.mass).min() > 0
    assert set(s.region_tags) == {"pillar", "membrane", "frame", "outer-membrane"}


def test_too_few_elements():
    with pytest.raises(ValueError, match="n_elements"):
        modal.assemble_system(QUARTZ, FREE, 3)


def test_fem_matches_analytic_oracle():
    r = modal.modes(QUARTZ, FREE, 200)
    assert r.frequencies[0] < 1.0
    assert r.frequencies[1] == pytest.approx(NU1, rel=1e-3)


def test_fem_agrees_with_library_generalized_solver():
    s = modal.assemble_system(QUARTZ, published_geometry(frame=default_frame(), membrane_offset=5e-6), 60)
    ours = modal.solve_modes(s, 10).frequencies
    w2 = linalg.eigh(s.stiffness, s.mass, eigvals_only=True)[:10]
    ref = np.sqrt(np.clip(w2, 0, None)) / (2 * math.pi)
    assert np.allclose(ours, ref, rtol=1e-9)


def test_mass_orthonormal_modes():
    s = modal.assemble_system(QUARTZ, published_geometry(frame=default_frame(), membrane_offset=5e-6), 100)
    r = modal.solve_modes(s, 20)
    gram = r.mode_shapes.T @ s.mass @ r.mode_shapes
    assert np.abs(gram - np.eye(20)).max() < 1e-9


def test_energy_partition_sums_to_one():
    r = modal.modes(QUARTZ, published_geometry(frame=default_frame(), membrane_offset=5e-6), 80, 12)
    for part in r.energy_partition:
        assert sum(part.values()) == pytest.approx(1.0, abs=1e-9)
    free = modal.modes(QUARTZ, FREE, 40, 3)
    assert sum(free.energy_partition[0].values()) == pytest.approx(1.0, abs=1e-9)


def test_n_modes_bounds():
    s = modal.assemble_system(QUARTZ, FREE, 10)
    with pytest.raises(ValueError):
        modal.solve_modes(s, 12)


def test_singular_mass_is_reported():
    s = modal.assemble_system(QUARTZ, FREE, 10)
    s.mass[0, 0] = -1.0
    with pytest.raises(linalg.LinAlgError, match="positive definite"):
        modal.solve_modes(s)


@pytest.mark.parametrize("factor,expected", [(4.0, 2.0), (0.25, 0.5)])
def test_modulus_scaling(factor, expected):
    base = modal.modes(QUARTZ, FREE, 50, 6).frequencies[1:]
    mat = Material(QUARTZ.young_modulus * factor, QUARTZ.density, QUARTZ.intrinsic_q)
    scaled = modal.modes(mat, FREE, 50, 6).frequencies[1:]
    assert np.allclose(scaled / base, expected, rtol=1e-9)


def test_density_scaling():
    base = modal.modes(QUARTZ, FREE, 50, 6).frequencies[1:]
    mat = Material(QUARTZ.young_modulus, 4 * QUARTZ.density, QUARTZ.intrinsic_q)
    assert np.allclose(modal.modes(mat, FREE, 50, 6).frequencies[1:] / base, 0.5, rtol=1e-9)


def test_convergence_is_second_order():
    f_an = modal.analytic_modes(QUARTZ, FREE, 1)[0][0]
    ns = [25, 50, 100, 200]
    errs = [abs(modal.modes(QUARTZ, FREE, n, 3).frequencies[1] / f_an - 1) for n in ns]
    orders = modal.convergence_order(errs, [1 / n for n in ns])
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert min(orders) >= 2.0


def test_effective_mass_of_cosine_mode():
    # oracle: rho A integral of cos^2(pi z / L) over the rod, by quadrature
    area = FREE.cross_section.area
    integral, _ = integrate.quad(lambda z: math.cos(math.pi * z / 1e-3) ** 2, 0, 1e-3)
    expected = QUARTZ.density * area * integral
    assert expected == pytest.approx(33.0e-9, rel=1e-3)
    r = modal.modes(QUARTZ, FREE, 200, 3)
    assert modal.effective_mass(r, 1) == pytest.approx(expected, rel=1e-4)
    assert r.effective_mass[1] == pytest.approx(expected, rel=1e-4)


def test_rigid_mode_effective_mass_is_total_mass():
    r = modal.modes(QUARTZ, FREE, 50, 3)
    assert modal.effective_mass(r, 0) == pytest.approx(FREE.total_mass(QUARTZ), rel=1e-9)


def test_effective_mass_at_node_raises():
    r = modal.modes(QUARTZ, FREE, 50, 3)
    with pytest.raises(modal.ObservationAtNodeError):
        modal.effective_mass(r, 1, z=0.5e-3)


def test_effective_mass_at_max_node_bounded_by_total_mass():
    g = published_geometry(frame=default_frame(), membrane_offset=5e-6)
    r = modal.modes(QUARTZ, g, 60, 10)
    total = r.system.total_mass
    for j in range(r.n_modes):
        u = r.mode_shapes[:, j]
        node = int(np.argmax(np.abs(u)))
        assert modal.effective_mass(r, j, node=node) <= total * (1 + 1e-12)


def test_mode_amplitude_node_and_symmetry():
    r = modal.modes(QUARTZ, published_geometry(), 200, 4)
    j = modal.fundamental_index(r)
    assert abs(modal.mode_amplitude_at(r, j, 0.5e-3)) <= 1e-3
    assert modal.mode_amplitude_at(r, j, 1e-3) == pytest.approx(1.0)
    assert modal.mode_amplitude_at(r, j, 0.0) == pytest.approx(-1.0, rel=1e-9)


def test_mode_amplitude_outside_span():
    r = modal.modes(QUARTZ, FREE, 20, 3)
    with pytest.raises(ValueError):
        modal.mode_amplitude_at(r, 1, 2e-3)


def test_frame_moves_against_adjacent_pillar_half():
    offset = 5e-6
    g = published_geometry(frame=default_frame(), membrane_offset=offset)
    r = modal.modes(QUARTZ, g, 200, 8)
    j = modal.fundamental_index(r)
    z = g.length / 2 + offset
    pillar = modal.mode_amplitude_at(r, j, z)
    frame = modal.mode_amplitude_at(r, j, z, member="frame")
    assert pillar > 0
    assert frame < 0
    # the whole frame moves in phase, against the pillar half it is attached to
    zs = r.system.node_positions[r.system.frame_nodes]
    assert all(modal.mode_amplitude_at(r, j, zz, "frame") < 0 for zz in zs[::20])


def test_momentum_balance_with_frame():
    g = published_geometry(frame=default_frame(), membrane_offset=5e-6)
    r = modal.modes(QUARTZ, g, 200, 8)
    assert modal.net_momentum_ratio(r, modal.fundamental_index(r)) < 0.01


def test_frame_reduces_clamping_loss():
    bare = modal.modes(QUARTZ, published_geometry(membrane_offset=5e-6), 200, 6)
    framed = modal.modes(QUARTZ, published_geometry(frame=default_frame(), membrane_offset=5e-6), 200, 8)
    q_bare = modal.clamping_q(bare, modal.fundamental_index(bare))
    q_framed = modal.clamping_q(framed, modal.fundamental_index(framed))
    assert not q_bare.unbounded
    assert q_framed.value > 100 * q_bare.value


def test_grounded_fundamental_within_two_percent_of_free():
    free = modal.modes(QUARTZ, FREE, 200, 4)
    grounded = modal.modes(QUARTZ, published_geometry(), 200, 4)
    for g in (published_geometry(), published_geometry(membrane_offset=10e-6)):
        r = modal.modes(QUARTZ, g, 200, 4)
        f = r.frequencies[modal.fundamental_index(r)]
        assert f == pytest.approx(free.frequencies[1], rel=0.02)
    assert grounded.frequencies[modal.fundamental_index(grounded)] == pytest.approx(free.frequencies[1], rel=1e-9)


def test_two_rigid_modes_with_unattached_frame():
    g = published_geometry(frame=Frame(0.5e-3, CrossSection("square", 0.5e-3), 0.0), membrane_stiffness_scale=0.0)
    r = modal.modes(QUARTZ, g, 30, 5)
    assert sum(r.is_rigid(j) for j in range(r.n_modes)) == 2


@pytest.mark.parametrize("fraction,q,unbounded", [(1e-6, 1e6, False), (1.0, 1.0, False), (0.0, math.inf, True)])
def test_clamping_q_mapping(fraction, q, unbounded):
    out = modal.q_from_fraction(fraction)
    assert out.value == q
    assert out.unbounded is unbounded


def test_symmetric_pillar_has_unbounded_clamping_q():
    r = modal.modes(QUARTZ, published_geometry(), 200, 4)
    assert modal.clamping_q(r, modal.fundamental_index(r)).unbounded


def test_loss_budget():
    assert modal.loss_budget([(1.0, 5e6)]) == 5e6
    assert modal.loss_budget([(1.0, 3e5), (1.0, 3e5)]) == pytest.approx(1.5e5, rel=1e-15)
    assert modal.loss_budget([(1.0, 5e6), (1.0, 1.25e6)]) == pytest.approx(1e6, rel=1e-15)
    assert modal.loss_budget([(0.5, 1e3)]) == pytest.approx(2e3)
    with pytest.raises(ValueError):
        modal.loss_budget([])
    with pytest.raises(ValueError):
        modal.loss_budget([(1.5, 1e3)])
