"""Longitudinal modes of the pillar / membrane / frame structure.

The structure is reduced to axial rods built from two-node linear
elements with consistent mass.  The central membrane is a lumped spring
between the pillar node nearest the membrane plane and either ground or
the mid-node of the dynamical frame; the outer membrane grounds the frame
mid-node.  A free-free uniform rod gives the closed-form check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .physmodel import Material, PillarGeometry, validate

REGIONS = ("pillar", "membrane", "frame", "outer-membrane")

# Membrane lumped stiffness = MEMBRANE_CALIBRATION * E * thickness.  For a
# membrane on the nodal plane this leaves the compression mode unchanged
# (well inside the 2 % budget) and puts the membrane bounce mode near 0.9 MHz.
MEMBRANE_CALIBRATION = 1.0

RIGID_MODE_HZ = 1.0
MIN_ELEMENTS = 4
UNDERFLOW_FRACTION = 1e-20


class ObservationAtNodeError(ValueError):
    """The reference point sits on a displacement node of the mode."""


def membrane_stiffness(material: Material, geometry: PillarGeometry) -> float:
    """Lumped axial stiffness of the central membrane in N/m."""
    if geometry.membrane_stiffness_scale is not None:
        return geometry.membrane_stiffness_scale
    return MEMBRANE_CALIBRATION * material.young_modulus * geometry.membrane_thickness


def analytic_modes(material: Material, geometry: PillarGeometry, n_max: int):
    """Free-free uniform rod: nu_n = n c / 2L, shape cos(n pi z / L).

    Returns a list of ``(frequency_hz, shape)`` where ``shape`` is a
    callable of z (m).
    """
    validate(material)
    validate(geometry)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    length = geometry.length
    c = material.sound_speed
    out = []
    for n in range(1, n_max + 1):
        def shape(z, n=n):
            return np.cos(n * np.pi * np.asarray(z, dtype=float) / length)
        out.append((n * c / (2.0 * length), shape))
    return out


@dataclass
class DiscreteSystem:
    """Assembled stiffness and mass matrices with bookkeeping for regions."""

    node_positions: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    elements: list
    """``(dof_i, dof_j or None, region)`` per element/spring; ``None`` is ground."""
    region_stiffness: dict
    pillar_nodes: np.ndarray
    attach_node: int
    frame_nodes: Optional[np.ndarray] = None
    frame_mid_node: Optional[int] = None
    pillar_length: float = 0.0
    loss_region: str = "membrane"
    membrane_k: float = 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.node_positions)

    @property
    def region_tags(self) -> list:
        return [e[2] for e in self.elements]

    @property
    def top_node(self) -> int:
        return int(self.pillar_nodes[-1])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def _rod(n_el: int, length: float, ea: float, rho_a: float):
    h = length / n_el
    k = np.zeros((n_el + 1, n_el + 1))
    m = np.zeros((n_el + 1, n_el + 1))
    ke = ea / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    me = rho_a * h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    for e in range(n_el):
        k[e:e + 2, e:e + 2] += ke
        m[e:e + 2, e:e + 2] += me
    return k, m


def assemble_system(material: Material, geometry: PillarGeometry, n_elements: int = 200) -> DiscreteSystem:
    """Assemble K and M for the pillar (and frame, if any).

    ``n_elements`` is per member.  Pillar nodes come first, ordered from
    z = 0 (bottom) to z = L (top face carrying the mirror).
    """
    validate(material)
    validate(geometry)
    if n_elements < MIN_ELEMENTS:
        raise ValueError(f"n_elements must be >= {MIN_ELEMENTS} (got {n_elements})")

    length = geometry.length
    area = geometry.cross_section.area
    e_mod, rho = material.young_modulus, material.density
    z_membrane = length / 2 + geometry.membrane_offset
    k_m = membrane_stiffness(material, geometry)

    n_p = n_elements + 1
    frame = geometry.frame
    n_f = n_elements + 1 if frame is not None else 0
    ndof = n_p + n_f

    K = np.zeros((ndof, ndof))
    M = np.zeros((ndof, ndof))
    regions = {r: np.zeros((ndof, ndof)) for r in REGIONS}
    elements = []

    kp, mp = _rod(n_elements, length, e_mod * area, rho * area)
    K[:n_p, :n_p] += kp
    M[:n_p, :n_p] += mp
    regions["pillar"][:n_p, :n_p] += kp
    elements += [(e, e + 1, "pillar") for e in range(n_elements)]
    z = list(np.linspace(0.0, length, n_p))
    attach = int(round(z_membrane / length * n_elements))

    frame_nodes = frame_mid = None
    if frame is None:
        other = None
    else:
        fa = frame.frame_cross_section.area
        kf, mf = _rod(n_elements, frame.frame_length, e_mod * fa, rho * fa)
        sl = slice(n_p, ndof)
        K[sl, sl] += kf
        M[sl, sl] += mf
        regions["frame"][sl, sl] += kf
        elements += [(n_p + e, n_p + e + 1, "frame") for e in range(n_elements)]
        frame_nodes = np.arange(n_p, ndof)
        frame_mid = n_p + n_elements // 2
        z += list(z_membrane + np.linspace(-frame.frame_length / 2, frame.frame_length / 2, n_f))
        other = frame_mid

    def spring(i, j, k, region):
        block = np.zeros((ndof, ndof))
        block[i, i] += k
        if j is not None:
            block[j, j] += k
            block[i, j] -= k
            block[j, i] -= k
        regions[region] += block
        K[:] += block
        elements.append((i, j, region))

    spring(attach, other, k_m, "membrane")
    M[attach, attach] += geometry.membrane_mass
    if frame is not None:
        spring(frame_mid, None, frame.outer_membrane_stiffness, "outer-membrane")

    return DiscreteSystem(
        node_positions=np.asarray(z),
        stiffness=K,
        mass=M,
        elements=elements,
        region_stiffness=regions,
        pillar_nodes=np.arange(n_p),
        attach_node=attach,
        frame_nodes=frame_nodes,
        frame_mid_node=frame_mid,
        pillar_length=length,
        loss_region="outer-membrane" if frame is not None else "membrane",
        membrane_k=k_m,
    )


@dataclass
class ModalResult:
    frequencies: np.ndarray
    mode_shapes: np.ndarray
    """Mass-normalized shapes, one column per mode."""
    top_normalized: np.ndarray
    """Same shapes scaled to unit displacement at the pillar top face (NaN if it is a node)."""
    effective_mass: np.ndarray
    energy_partition: list
    system: DiscreteSystem = field(repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    def is_rigid(self, mode: int) -> bool:
        return self.frequencies[mode] < RIGID_MODE_HZ


def solve_modes(system: DiscreteSystem, n_modes: Optional[int] = None) -> ModalResult:
    """Generalized symmetric eigenproblem K u = w^2 M u.

    M = L L^T is factored, the problem is reduced to the standard form
    L^-1 K L^-T y = w^2 y and solved densely; u = L^-T y is then
    M-orthonormal by construction.
    """
    K, M = system.stiffness, system.mass
    n = system.n_nodes
    if n_modes is None:
        n_modes = n
    if not 1 <= n_modes <= n:
        raise ValueError(f"n_modes must be in [1, {n}] (got {n_modes})")
    try:
        chol = linalg.cholesky(M, lower=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError("mass matrix is not positive definite; assembly is inconsistent") from exc

    tmp = linalg.solve_triangular(chol, K, lower=True)
    A = linalg.solve_triangular(chol, tmp.T, lower=True).T
    A = 0.5 * (A + A.T)
    w2, Y = linalg.eigh(A, subset_by_index=[0, n_modes - 1])
    U = linalg.solve_triangular(chol.T, Y, lower=False)

    order = np.argsort(w2)
    w2, U = w2[order], U[:, order]
    freqs = np.sqrt(np.clip(w2, 0.0, None)) / (2.0 * math.pi)

    # deterministic sign: top face positive, else largest component positive
    top = system.top_node
    for j in range(U.shape[1]):
        ref = U[top, j] if abs(U[top, j]) > 1e-12 * np.abs(U[:, j]).max() else U[np.argmax(np.abs(U[:, j])), j]
        if ref < 0:
            U[:, j] = -U[:, j]

    top_disp = U[top, :]
    scale = np.abs(U).max(axis=0)
    at_node = np.abs(top_disp) <= 1e-9 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        top_normalized = np.where(at_node, np.nan, U / top_disp)
        m_eff = np.where(at_node, np.inf, 1.0 / top_disp**2)

    partition = []
    for j in range(U.shape[1]):
        u = U[:, j]
        energy = {r: float(u @ system.region_stiffness[r] @ u) for r in REGIONS}
        total = sum(energy.values())
        if freqs[j] < RIGID_MODE_HZ or total <= 0:
            # no strain energy in a rigid mode: report the kinetic share instead
            energy = _kinetic_partition(system, u)
            total = sum(energy.values())
        partition.append({r: v / total for r, v in energy.items()})

    return ModalResult(
        frequencies=freqs,
        mode_shapes=U,
        top_normalized=top_normalized,
        effective_mass=m_eff,
        energy_partition=partition,
        system=system,
    )


def _kinetic_partition(system: DiscreteSystem, u: np.ndarray) -> dict:
    mu = system.mass @ u
    out = {r: 0.0 for r in REGIONS}
    out["pillar"] = float(u[system.pillar_nodes] @ mu[system.pillar_nodes])
    if system.frame_nodes is not None:
        out["frame"] = float(u[system.frame_nodes] @ mu[system.frame_nodes])
    return out


def modes(material: Material, geometry: PillarGeometry, n_elements: int = 200,
          n_modes: Optional[int] = 12) -> ModalResult:
    """Assemble and solve in one call."""
    system = assemble_system(material, geometry, n_elements)
    return solve_modes(system, min(n_modes or system.n_nodes, system.n_nodes))


def _member(result: ModalResult, member: str):
    s = result.system
    if member == "pillar":
        return s.pillar_nodes
    if member == "frame":
        if s.frame_nodes is None:
            raise ValueError("structure has no frame")
        return s.frame_nodes
    raise ValueError(f"unknown member {member!r}")


def effective_mass(result: ModalResult, mode: int, z: Optional[float] = None,
                   node: Optional[int] = None) -> float:
    """Modal mass referred to the displacement at one point.

    M_eff = u^T M u / u(ref)^2.  The reference is the pillar top face unless
    a pillar coordinate ``z`` or a global ``node`` index is given.
    """
    u = result.mode_shapes[:, mode]
    modal_mass = float(u @ result.system.mass @ u)
    if node is not None:
        ref = u[node]
    else:
        ref = _interp(result, u, result.system.pillar_length if z is None else z, "pillar")
    if abs(ref) <= 1e-6 * np.abs(u).max():
        raise ObservationAtNodeError(f"mode {mode} has a displacement node at the observation point")
    return modal_mass / ref**2


def _interp(result: ModalResult, u: np.ndarray, z: float, member: str) -> float:
    nodes = _member(result, member)
    zs = result.system.node_positions[nodes]
    if not zs[0] - 1e-15 <= z <= zs[-1] + 1e-15:
        raise ValueError(f"z={z!r} outside {member} span [{zs[0]}, {zs[-1]}]")
    return float(np.interp(z, zs, u[nodes]))


def mode_amplitude_at(result: ModalResult, mode: int, z: float, member: str = "pillar") -> float:
    """Signed displacement at axial position z, relative to the pillar top face.

    ``z`` is in pillar coordinates (0 at the bottom face); frame positions
    use the same axis.
    """
    u = result.mode_shapes[:, mode]
    top = u[result.system.top_node]
    if abs(top) <= 1e-9 * np.abs(u).max():
        raise ObservationAtNodeError(f"mode {mode} has a node at the pillar top face")
    return _interp(result, u, z, member) / top


@dataclass(frozen=True)
class ClampingQ:
    value: float
    unbounded: bool
    fraction: float


def clamping_q(result: ModalResult, mode: int) -> ClampingQ:
    """Q = 1 / (strain-energy fraction stored in the lossy membrane).

    The lossy membrane is the outer one when a frame is present, otherwise
    the central membrane that grounds the pillar.
    """
    fraction = result.energy_partition[mode][result.system.loss_region]
    return q_from_fraction(fraction)


def q_from_fraction(fraction: float) -> ClampingQ:
    if not 0 <= fraction <= 1:
        raise ValueError(f"energy fraction must lie in [0, 1] (got {fraction!r})")
    if fraction <= UNDERFLOW_FRACTION:
        return ClampingQ(math.inf, True, fraction)
    return ClampingQ(1.0 / fraction, False, fraction)


def loss_budget(contributions: Sequence[tuple]) -> float:
    """Combine loss channels: 1/Q_total = sum(participation_i / Q_i)."""
    if not contributions:
        raise ValueError("loss budget needs at least one contribution")
    inv = 0.0
    for participation, q in contributions:
        if not 0 <= participation <= 1:
            raise ValueError(f"participation must lie in [0, 1] (got {participation!r})")
        if not q > 0:
            raise ValueError(f"quality factor must be positive (got {q!r})")
        inv += participation / q
    return math.inf if inv == 0 else 1.0 / inv


def fundamental_index(result: ModalResult) -> int:
    """Index of the first compression-expansion mode of the pillar.

    That is the lowest non-rigid mode whose two pillar end faces move in
    opposite directions; membrane bounce modes move both ends together.
    """
    s = result.system
    bottom, top = s.pillar_nodes[0], s.pillar_nodes[-1]
    for j in range(result.n_modes):
        if result.is_rigid(j):
            continue
        u = result.mode_shapes[:, j]
        if u[bottom] * u[top] < 0:
            return j
    raise ValueError("no compression-expansion mode among the computed modes")


def net_momentum_ratio(result: ModalResult, mode: int) -> float:
    """|1^T M u| / sum|M u|: zero when the structure's momenta cancel."""
    mu = result.system.mass @ result.mode_shapes[:, mode]
    return float(abs(mu.sum()) / np.abs(mu).sum())


def convergence_order(errors: Sequence[float], sizes: Sequence[float]) -> list:
    """Observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    return [math.log(errors[i] / errors[i + 1]) / math.log(sizes[i] / sizes[i + 1])
            for i in range(len(errors) - 1)]
