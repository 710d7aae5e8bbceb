"""Chain kinematics and membrane/storage geometry.

All operations are pure functions of their inputs. The chain is a serial
stack of two-axis joints: each link first pitches about its local
horizontal axis (positive pitch tilts the link up, toward the fold
limit), then yaws about the pitched local vertical axis, then translates
by one axis spacing. The base frame has x forward, y left, z up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .model import ChainSpec, MembraneSpec, deployed_joint_count


@dataclass(frozen=True)
class ChainPose:
    """Joint frames of a deployed chain in the base frame.

    ``positions`` has one row per joint plus the tip; ``rotations`` holds
    the cumulative orientation of each link after its joint rotations.
    """

    positions: np.ndarray   # (n+1, 3), joint origins then the tip
    rotations: np.ndarray   # (n, 3, 3)

    @property
    def joint_frames(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.positions[i], self.rotations[i])
                for i in range(self.rotations.shape[0])]

    @property
    def tip_position(self) -> np.ndarray:
        return self.positions[-1]


def _pitch_matrix(theta: float) -> np.ndarray:
    # Positive pitch rotates the forward axis toward +z.
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _yaw_matrix(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(chain: ChainSpec, pitch_angles, yaw_angles) -> ChainPose:
    """Pose of the deployed chain for one angle pair per joint.

    Angle limits are not enforced here (solver output legitimately sits a
    little below the pitch stop); callers validate states separately.
    """
    pitch = np.asarray(pitch_angles, dtype=float)
    yaw = np.asarray(yaw_angles, dtype=float)
    if pitch.shape != yaw.shape or pitch.ndim != 1:
        raise ValueError("pitch_angles and yaw_angles must be 1-D and equally long")
    n = pitch.shape[0]
    spacing = chain.link.axis_spacing

    positions = np.zeros((n + 1, 3))
    rotations = np.zeros((n, 3, 3))
    rot = np.eye(3)
    pos = np.zeros(3)
    for i in range(n):
        rot = rot @ _pitch_matrix(pitch[i]) @ _yaw_matrix(yaw[i])
        rotations[i] = rot
        positions[i] = pos
        pos = pos + rot @ np.array([spacing, 0.0, 0.0])
    positions[n] = pos
    return ChainPose(positions=positions, rotations=rotations)


def eversion_extension(feed: float) -> float:
    """Everted length gained from a membrane feed: exactly half of it."""
    if feed < 0:
        raise ValueError("feed must be >= 0")
    return feed / 2.0


def fold_partition(deployed_length: float, chain: ChainSpec) -> tuple[int, int]:
    """Split the skeleton into deployed links and links still folded at the tip."""
    if deployed_length < 0:
        raise ValueError("deployed_length must be >= 0")
    if deployed_length > chain.total_length + 1e-9:
        raise GeometryError(
            f"deployed_length {deployed_length:.6g} m exceeds the "
            f"{chain.total_length:.6g} m skeleton")
    deployed = min(deployed_joint_count(deployed_length, chain), chain.n_links)
    return deployed, chain.n_links - deployed


def membrane_offset(a: float, b: float) -> float:
    """Extra membrane length absorbed by the tip fold: 2a + 2b."""
    if a < 0 or b < 0:
        raise ValueError("offset constants must be >= 0")
    return 2.0 * a + 2.0 * b


def required_membrane_length(chain: ChainSpec, membrane: MembraneSpec) -> float:
    """Membrane length to cut: twice the skeleton length (the tube folds
    back on itself) plus the tip-fold offset."""
    return 2.0 * chain.total_length + membrane_offset(membrane.offset_a,
                                                      membrane.offset_b)


def min_wrap_radius(chain: ChainSpec) -> float:
    """Circumradius of the tightest uniform wrap, every joint at yaw_max.

    A chain with all joints at yaw angle psi traces a regular polygon of
    side L; its vertices sit on a circle of radius L / (2 sin(psi/2)).
    """
    yaw_max = chain.link.yaw_max
    if yaw_max <= 0:
        raise GeometryError("yaw_max = 0 allows only a straight chain (infinite radius)")
    return chain.link.axis_spacing / (2.0 * math.sin(yaw_max / 2.0))


def min_curl_radius(chain: ChainSpec) -> float:
    """Tightest coil the pitch joints allow (all joints at pitch_max)."""
    pitch_max = chain.link.pitch_max
    if pitch_max <= 0:
        raise GeometryError("pitch_max = 0 allows only a straight chain")
    return chain.link.axis_spacing / (2.0 * math.sin(pitch_max / 2.0))


def spiral_outer_diameter(length: float, thickness: float, inner_radius: float) -> float:
    """Outer diameter of an Archimedean-spiral packing of ``length`` of
    material with radial ``thickness`` per turn, by area equivalence:
    pi (r_out^2 - r_in^2) = thickness * length.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    if thickness <= 0:
        raise GeometryError("link_thickness must be > 0 to pack a spiral")
    if inner_radius <= 0:
        raise GeometryError("inner_radius must be > 0")
    return 2.0 * math.sqrt(inner_radius ** 2 + thickness * length / math.pi)


def reel_storage_diameter(chain: ChainSpec, inner_radius: float) -> float:
    """Outer diameter when the whole skeleton is reeled up for storage."""
    r_curl = min_curl_radius(chain)
    if inner_radius < r_curl - 1e-12:
        raise GeometryError(
            f"inner_radius {inner_radius:.4g} m is below the minimum curl "
            f"radius {r_curl:.4g} m set by the pitch limit")
    return spiral_outer_diameter(chain.total_length, chain.link.link_thickness,
                                 inner_radius)
