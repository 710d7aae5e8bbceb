"""Quasi-static gravity-plane deflection of the deployed boom.

Joint constitutive law
----------------------
Each deployed joint sags below its load-bearing pitch stop by

    sag_i = backlash * [M_i > 0] + max(0, M_i - M_hold) / (k_c + k_p,i)

where M_i is the gravity moment at the joint computed on the deformed
geometry, M_hold = mu * r_f * T_jam is the friction deadband from the
center jamming wire, k_c is the clearance stiffness past the stop, and
k_p,i is the membrane stiffness contribution, zeroed at joints whose
moment exceeds the wrinkling onset for the current pressure. The free
play from pin clearance is taken up by any positive moment; friction
cannot act across an open clearance, so jamming only shrinks the elastic
term. This is the simplest law that reproduces the three measured
behaviors at desk scale: a large self-weight sag, a modest benefit from
pressurization, and a modest benefit from jamming.

The solver iterates geometry -> moments -> sag angles to a fixed point.
No small-angle assumption is made; the pose is rebuilt every iteration
because the self-weight sag is a few degrees, marginal for
linearization. If the plain iteration oscillates (a joint hovering at
the wrinkle threshold can flip its stiffness), the update is
progressively damped; the converged point satisfies the same fixed-point
equation either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import math

import numpy as np

from .actuation import JointLockState, LockMode, holding_torque, joint_lock_state
from .errors import SolverError
from .model import (ChainSpec, LoadCase, MechanismConfig, MembraneSpec,
                    SolverSettings)
from .kinematics import ChainPose


@dataclass(frozen=True)
class StiffnessModel:
    """Free parameters of the joint law, separated from the specs so the
    calibration can vary them without rebuilding a config."""

    clearance_stiffness: float   # N*m/rad, k_c
    backlash: float              # rad
    membrane_coeff: float        # dimensionless, c_p
    membrane_radius: float       # m

    def __post_init__(self):
        if self.clearance_stiffness <= 0:
            raise ValueError("clearance_stiffness must be > 0")
        if self.backlash < 0 or self.membrane_coeff < 0:
            raise ValueError("backlash and membrane_coeff must be >= 0")

    @classmethod
    def from_config(cls, config: MechanismConfig) -> "StiffnessModel":
        link = config.chain.link
        return cls(clearance_stiffness=link.clearance_stiffness,
                   backlash=link.backlash,
                   membrane_coeff=config.membrane.pressure_stiffness_coeff,
                   membrane_radius=config.membrane.radius)


@dataclass(frozen=True)
class EquilibriumResult:
    pitch_angles: np.ndarray        # rad per joint, negative = sagged down
    tip_deflection: float           # m, downward positive
    per_joint_moments: np.ndarray   # N*m
    lock_states: tuple[JointLockState, ...]
    wrinkled: np.ndarray            # bool per joint
    residual: float                 # N*m, max moment-balance violation
    iterations: int
    limit_violations: tuple[str, ...] = ()

    def joint_rows(self) -> list[tuple[int, float, float, str]]:
        """Rows of (joint_index, pitch_rad, moment_nm, lock_mode) for export."""
        return [(i, float(self.pitch_angles[i]), float(self.per_joint_moments[i]),
                 self.lock_states[i].mode.value)
                for i in range(len(self.lock_states))]


def membrane_joint_stiffness(pressure: float, membrane: MembraneSpec) -> float:
    """Per-joint torsional stiffness contributed by the pressurized tube:
    c_p * p * r^3 (the coefficient absorbs the section shape)."""
    if pressure < 0:
        raise ValueError("pressure must be >= 0")
    return membrane.pressure_stiffness_coeff * pressure * membrane.radius ** 3


def wrinkle_moment(pressure: float, radius: float) -> float:
    """Bending moment at which the tube wall wrinkles: (pi/2) * p * r^3.

    A joint whose gravity moment exceeds this loses the membrane
    stiffness contribution.
    """
    if pressure < 0 or radius < 0:
        raise ValueError("pressure and radius must be >= 0")
    return 0.5 * math.pi * pressure * radius ** 3


def retraction_tension(pressure: float, radius: float) -> float:
    """Tension needed to pull the tip back in, proportional to pressure
    through the bore area: p * pi * r^2."""
    if pressure < 0 or radius < 0:
        raise ValueError("pressure and radius must be >= 0")
    return pressure * math.pi * radius ** 2


# ---------------------------------------------------------------------------
# Gravity moments
# ---------------------------------------------------------------------------

def _mass_stations(n: int, spacing: float, link_mass: float, loads: LoadCase,
                   folded_tip_mass: float,
                   line_mass: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Arc positions and masses of every station loading the chain.

    Link masses (plus any membrane line mass) lump at link midpoints,
    point loads at their arc positions, the folded-link cluster at the
    tip.
    """
    arcs = []
    masses = []
    station_mass = link_mass + line_mass * spacing
    for i in range(n):
        arcs.append((i + 0.5) * spacing)
        masses.append(station_mass)
    for pos, mass in loads.point_loads:
        arcs.append(pos)
        masses.append(mass)
    if folded_tip_mass > 0.0:
        arcs.append(n * spacing)
        masses.append(folded_tip_mass)
    return np.asarray(arcs, dtype=float), np.asarray(masses, dtype=float)


def _planar_joint_positions(sag: np.ndarray, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """x and z of each joint plus the tip for downward sag angles (rad)."""
    phi = -np.cumsum(sag)
    x = np.concatenate(([0.0], np.cumsum(spacing * np.cos(phi))))
    z = np.concatenate(([0.0], np.cumsum(spacing * np.sin(phi))))
    return x, z


def _planar_station_xy(arcs: np.ndarray, x: np.ndarray, z: np.ndarray,
                       spacing: float, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Locate arc stations on the deformed chain; returns (x, z, owner link)."""
    link_idx = np.minimum((arcs / spacing).astype(int), n - 1)
    t = arcs - link_idx * spacing
    dx = (x[link_idx + 1] - x[link_idx]) / spacing
    dz = (z[link_idx + 1] - z[link_idx]) / spacing
    return x[link_idx] + t * dx, z[link_idx] + t * dz, link_idx


def _planar_moments(sag: np.ndarray, spacing: float, arcs: np.ndarray,
                    masses: np.ndarray, gravity: float) -> np.ndarray:
    """Gravity moment about each pitch joint on the deformed planar chain."""
    n = sag.shape[0]
    x, z = _planar_joint_positions(sag, spacing)
    sx, _, link_idx = _planar_station_xy(arcs, x, z, spacing, n)
    # Joint i carries every station owned by link >= i.
    w = masses * gravity
    s0 = np.zeros(n + 1)
    s1 = np.zeros(n + 1)
    np.add.at(s0, link_idx, w)
    np.add.at(s1, link_idx, w * sx)
    suf0 = np.cumsum(s0[::-1])[::-1]
    suf1 = np.cumsum(s1[::-1])[::-1]
    return suf1[:n] - x[:n] * suf0[:n]


def gravity_moments(pose: ChainPose, chain: ChainSpec, loads: LoadCase,
                    folded_tip_mass: float = 0.0,
                    line_mass: float = 0.0) -> np.ndarray:
    """Pitch-axis gravity moment at each joint of an arbitrary pose.

    The lever of a mass about joint i is the horizontal component of its
    offset along the link's heading, so a straight horizontal chain
    reduces to textbook cantilever statics.
    """
    n = pose.rotations.shape[0]
    spacing = chain.link.axis_spacing
    deployed_length = n * spacing
    bad = [p for p, _ in loads.point_loads if p > deployed_length + 1e-9]
    if bad:
        raise ValueError(f"load at arc {bad[0]:.6g} m lies beyond the tip")
    arcs, masses = _mass_stations(n, spacing, chain.link.link_mass, loads,
                                  folded_tip_mass, line_mass)
    if arcs.size == 0:
        return np.zeros(n)
    link_idx = np.minimum((arcs / spacing).astype(int), n - 1)
    t = arcs - link_idx * spacing
    starts = pose.positions[link_idx]
    dirs = (pose.positions[link_idx + 1] - pose.positions[link_idx]) / spacing
    stations = starts + t[:, None] * dirs

    moments = np.zeros(n)
    for i in range(n):
        heading = pose.positions[i + 1] - pose.positions[i]
        heading[2] = 0.0
        norm = np.linalg.norm(heading)
        heading = heading / norm if norm > 0 else np.array([1.0, 0.0, 0.0])
        distal = link_idx >= i
        levers = (stations[distal] - pose.positions[i]) @ heading
        moments[i] = loads.gravity * np.sum(masses[distal] * levers)
    return moments


# ---------------------------------------------------------------------------
# Deflection solver
# ---------------------------------------------------------------------------

def solve_pitch_deflection(chain: ChainSpec, membrane: MembraneSpec,
                           stiffness: StiffnessModel, loads: LoadCase,
                           pressure: float, jam_tension: float,
                           settings: SolverSettings | None = None,
                           deployed_count: int | None = None,
                           folded_tip_mass: float = 0.0,
                           skeleton: bool = True) -> EquilibriumResult:
    """Converge the gravity-plane sag of the deployed boom.

    With ``skeleton=False`` the joints keep only the membrane stiffness
    (no backlash, no clearance stiffness, no link mass): the solver then
    raises :class:`SolverError` when any loaded joint has no restoring
    stiffness at all, which the harness reports as excessive deflection.
    """
    if jam_tension < 0:
        raise ValueError("jam_tension must be >= 0")
    if pressure < 0:
        raise ValueError("pressure must be >= 0")
    settings = settings or SolverSettings()
    n = chain.n_links if deployed_count is None else deployed_count
    if n < 0 or n > chain.n_links:
        raise ValueError("deployed_count outside 0..n_links")
    link = chain.link
    spacing = link.axis_spacing
    bad = [p for p, _ in loads.point_loads if p > n * spacing + 1e-9]
    if bad:
        raise ValueError(f"load at arc {bad[0]:.6g} m lies beyond the tip")
    if n == 0:
        return EquilibriumResult(np.zeros(0), 0.0, np.zeros(0), (),
                                 np.zeros(0, dtype=bool), 0.0, 0)

    line_mass = membrane.areal_mass * 2.0 * math.pi * membrane.radius
    link_mass = link.link_mass if skeleton else 0.0
    arcs, masses = _mass_stations(n, spacing, link_mass, loads,
                                  folded_tip_mass if skeleton else 0.0, line_mass)

    k_p = stiffness.membrane_coeff * pressure * stiffness.membrane_radius ** 3
    m_wrinkle = wrinkle_moment(pressure, stiffness.membrane_radius)
    m_hold = holding_torque(link.friction_coeff, link.jam_contact_radius,
                            jam_tension)
    k_c = stiffness.clearance_stiffness if skeleton else 0.0
    backlash = stiffness.backlash if skeleton else 0.0

    def law(moments: np.ndarray) -> np.ndarray:
        engaged = moments > 0.0
        wrinkled = moments > m_wrinkle
        k = k_c + np.where(wrinkled, 0.0, k_p)
        if not skeleton and np.any(engaged & (k <= 0.0)):
            raise SolverError(
                "unbounded deflection: a loaded joint has no restoring stiffness")
        excess = np.maximum(0.0, moments - m_hold)
        elastic = np.divide(excess, k, out=np.zeros_like(excess), where=k > 0.0)
        return np.where(engaged, backlash + elastic, 0.0)

    sag = np.zeros(n)
    relax = 1.0
    prev_change = math.inf
    iterations = 0
    for iterations in range(1, settings.max_iterations + 1):
        moments = _planar_moments(sag, spacing, arcs, masses, loads.gravity)
        target = law(moments)
        change = float(np.max(np.abs(target - sag))) if n else 0.0
        if change < settings.tolerance_rad:
            sag = target
            break
        # Halve the step whenever the fixed-point residual stops shrinking
        # (stiffness flips at the wrinkle threshold can cause a 2-cycle).
        if change > prev_change and relax > 0.125:
            relax *= 0.5
        prev_change = change
        sag = sag + relax * (target - sag)
    else:
        moments = _planar_moments(sag, spacing, arcs, masses, loads.gravity)
        residual = float(np.max(np.abs(law(moments) - sag)))
        raise SolverError("deflection iteration did not converge",
                          residual=residual * (k_c + k_p),
                          iterations=settings.max_iterations)

    moments = _planar_moments(sag, spacing, arcs, masses, loads.gravity)
    residual_rad = float(np.max(np.abs(law(moments) - sag)))
    wrinkled = moments > m_wrinkle
    k_per_joint = k_c + np.where(wrinkled, 0.0, k_p)
    residual = residual_rad * float(np.max(k_per_joint))

    _, z = _planar_joint_positions(sag, spacing)
    lock = tuple(joint_lock_state(float(m), m_hold) for m in moments)
    violations = []
    span = link.pitch_max - link.pitch_min
    for i, s in enumerate(sag):
        if s > span:
            violations.append(
                f"joint {i}: sag {s:.4g} rad exceeds the pitch range {span:.4g} rad")
    return EquilibriumResult(
        pitch_angles=-sag, tip_deflection=float(-z[-1]),
        per_joint_moments=moments, lock_states=lock, wrinkled=wrinkled,
        residual=residual, iterations=iterations,
        limit_violations=tuple(violations))


# ---------------------------------------------------------------------------
# Buckling
# ---------------------------------------------------------------------------

class BucklingStatus(Enum):
    OK = "ok"
    BUCKLES = "buckles"


@dataclass(frozen=True)
class BucklingReport:
    vertical: BucklingStatus
    horizontal: BucklingStatus
    cause: str
    retract_tension: float       # N
    disturbing_moment: float     # N*m (skeleton path)
    restoring_moment: float      # N*m friction available (skeleton path)
    critical_load: float | None  # N Euler load (membrane-only path)

    @property
    def ok(self) -> bool:
        return (self.vertical is BucklingStatus.OK
                and self.horizontal is BucklingStatus.OK)


def buckling_check(deployed_length: float, skeleton_present: bool,
                   retract_tension_n: float, config: MechanismConfig,
                   pressure: float, jam_tension: float = 0.0) -> BucklingReport:
    """Retraction buckling check.

    With the skeleton inside, vertical buckling is impossible by the
    pitch-stop geometry; horizontal buckling is resisted by joint face
    friction, which the retraction tension itself (plus any jamming
    tension) generates. The disturbing moment is the retraction tension
    acting on a small lateral imperfection offset. Without the skeleton
    the pressurized tube is compared against its Euler load built from
    the per-joint membrane stiffness.
    """
    if retract_tension_n < 0:
        raise ValueError("retract tension must be >= 0")
    link = config.chain.link
    if skeleton_present:
        offset = config.imperfection_offset
        disturb = retract_tension_n * offset
        restore = holding_torque(link.friction_coeff, link.jam_contact_radius,
                                 retract_tension_n + jam_tension)
        horizontal = (BucklingStatus.OK if disturb <= restore + 1e-12
                      else BucklingStatus.BUCKLES)
        cause = ("pitch stops block vertical buckling; joint friction "
                 + ("resists" if horizontal is BucklingStatus.OK else "cannot resist")
                 + " the lateral imperfection moment")
        return BucklingReport(BucklingStatus.OK, horizontal, cause,
                              retract_tension_n, disturb, restore, None)

    k_p = membrane_joint_stiffness(pressure, config.membrane)
    k_beam = k_p * link.axis_spacing  # N*m^2 equivalent bending stiffness
    if deployed_length <= 0:
        return BucklingReport(BucklingStatus.OK, BucklingStatus.OK,
                              "nothing deployed", retract_tension_n, 0.0, 0.0, None)
    critical = math.pi ** 2 * k_beam / deployed_length ** 2
    buckles = retract_tension_n > critical
    status = BucklingStatus.BUCKLES if buckles else BucklingStatus.OK
    cause = ("membrane-only column: retraction tension "
             + ("exceeds" if buckles else "is below")
             + " the Euler load of the pressurized tube")
    return BucklingReport(status, status, cause, retract_tension_n,
                          0.0, 0.0, critical)
