"""Wire statics: bending moments from the side wires, friction holding
torque from the center jamming wire, stick/slip classification, and
friction-coefficient extraction from measured sweeps.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, EvsimError


class LockMode(Enum):
    STICK = "Stick"
    SLIP = "Slip"
    FREE = "Free"


@dataclass(frozen=True)
class JointLockState:
    mode: LockMode
    transmitted_moment: float  # N*m actually carried by friction


def bend_moment(r_b: float, tension_left: float, tension_right: float) -> float:
    """Yaw moment from the two side wires, positive toward the left wire.

    With one wire slack this reduces to the single-wire product r_b * T.
    """
    if r_b <= 0:
        raise ValueError("bend wire radius must be > 0")
    if tension_left < 0 or tension_right < 0:
        raise ValueError("wire tensions must be >= 0")
    return r_b * (tension_left - tension_right)


def holding_torque(mu: float, r_f: float, tension_center: float) -> float:
    """Friction moment a jammed joint can resist: mu * r_f * T."""
    if mu < 0 or r_f < 0 or tension_center < 0:
        raise ValueError("holding torque inputs must be >= 0")
    return mu * r_f * tension_center


def holding_force_at(torque: float, lever: float) -> float:
    """Force that a holding torque can retain at the given lever arm."""
    if lever <= 0:
        raise ValueError("lever must be > 0")
    return torque / lever


def joint_lock_state(external_moment: float, hold: float) -> JointLockState:
    """Coulomb stick/slip classification of one jammed joint.

    Below the friction limit the joint sticks and transmits the full
    external moment; above it the joint slips and transmits exactly the
    limit. An unjammed joint (zero limit) is free.
    """
    if hold < 0:
        raise ValueError("holding torque must be >= 0")
    if hold == 0.0:
        return JointLockState(LockMode.FREE, 0.0)
    if abs(external_moment) <= hold:
        return JointLockState(LockMode.STICK, external_moment)
    sign = 1.0 if external_moment > 0 else -1.0
    return JointLockState(LockMode.SLIP, sign * hold)


def fit_friction_coefficient(samples, r_f: float) -> float:
    """Least-squares slope through the origin of (tension, torque) pairs,
    divided by the contact radius: mu = sum(T M) / (r_f sum(T^2)).

    A single sample is enough; the fit only degenerates when every
    tension is zero.
    """
    pairs = list(samples)
    if r_f <= 0:
        raise ValueError("contact radius must be > 0")
    if len(pairs) < 1:
        raise EvsimError("friction fit needs at least one (tension, torque) sample")
    st2 = sum(t * t for t, _ in pairs)
    if st2 == 0.0:
        raise EvsimError("friction fit is degenerate: all tensions are zero")
    stm = sum(t * m for t, m in pairs)
    return stm / (r_f * st2)


def read_measured_samples(text: str) -> list[tuple[float, float]]:
    """Parse a measured holding-torque sweep, header ``tension_n,torque_nm``."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or \
            {"tension_n", "torque_nm"} - set(reader.fieldnames):
        raise ConfigError('measured CSV must have a "tension_n,torque_nm" header')
    samples = []
    for i, row in enumerate(reader):
        try:
            samples.append((float(row["tension_n"]), float(row["torque_nm"])))
        except (TypeError, ValueError):
            raise ConfigError(f"measured CSV row {i + 1}: non-numeric value") from None
    if not samples:
        raise ConfigError("measured CSV contains no samples")
    return samples


def derating_factor(derating: tuple[tuple[float, float], ...], angle_deg: float) -> float:
    """Multiplicative holding-torque derating at a bent joint.

    The table holds (angle_deg, factor) pairs; between entries the factor
    is interpolated linearly, beyond the last entry it is held. An empty
    table means no derating.
    """
    if not derating:
        return 1.0
    if angle_deg <= derating[0][0]:
        return derating[0][1]
    for (a0, f0), (a1, f1) in zip(derating, derating[1:]):
        if angle_deg <= a1:
            if a1 == a0:
                return f1
            w = (angle_deg - a0) / (a1 - a0)
            return f0 + w * (f1 - f0)
    return derating[-1][1]
