"""Rigid-body kinematics and recursive Newton-Euler dynamics for a serial arm
mounted on a floating base.

Conventions
-----------
* Orientation angles ``(roll, pitch, yaw)`` are extrinsic x-y-z, i.e.
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
* Quaternions are scalar-first ``(w, x, y, z)``.
* A :class:`Wrench` carries its torque as the moment about
  ``application_point``, both expressed in the frame named by ``frame``.
* The inverse-dynamics wrench is the reaction the arm exerts ON the base,
  i.e. the load the base has to carry. A static arm therefore produces a
  downward force equal to its weight.
* Inside RNEA the base has zero twist and zero acceleration; gravity is kept.

Array routines accept leading batch dimensions (``q`` of shape ``(..., N)``)
so a whole trajectory can be evaluated in one call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

GRAVITY = np.array([0.0, 0.0, -9.81])


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def cross(a, b) -> np.ndarray:
    """Batched cross product over the last axis (cheaper than ``np.cross`` for small batches)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def rpy_to_matrix(rpy: np.ndarray) -> np.ndarray:
    """Extrinsic x-y-z rotation matrix, batched over leading dimensions."""
    rpy = np.asarray(rpy, dtype=float)
    cr, sr = np.cos(rpy[..., 0]), np.sin(rpy[..., 0])
    cp, sp = np.cos(rpy[..., 1]), np.sin(rpy[..., 1])
    cy, sy = np.cos(rpy[..., 2]), np.sin(rpy[..., 2])
    R = np.empty(rpy.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def rpy_to_matrix_derivatives(rpy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation matrix and its partials w.r.t. roll, pitch and yaw.

    Returns ``R`` with shape ``(..., 3, 3)`` and ``dR`` with shape
    ``(..., 3, 3, 3)`` where ``dR[..., k, :, :] = dR / d rpy[k]``.
    """
    rpy = np.asarray(rpy, dtype=float)
    zero = np.zeros(rpy.shape[:-1])
    one = np.ones(rpy.shape[:-1])
    cr, sr = np.cos(rpy[..., 0]), np.sin(rpy[..., 0])
    cp, sp = np.cos(rpy[..., 1]), np.sin(rpy[..., 1])
    cy, sy = np.cos(rpy[..., 2]), np.sin(rpy[..., 2])

    def mat(rows):
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    Rx = mat([[one, zero, zero], [zero, cr, -sr], [zero, sr, cr]])
    Ry = mat([[cp, zero, sp], [zero, one, zero], [-sp, zero, cp]])
    Rz = mat([[cy, -sy, zero], [sy, cy, zero], [zero, zero, one]])
    dRx = mat([[zero, zero, zero], [zero, -sr, -cr], [zero, cr, -sr]])
    dRy = mat([[-sp, zero, cp], [zero, zero, zero], [-cp, zero, -sp]])
    dRz = mat([[-sy, -cy, zero], [cy, -sy, zero], [zero, zero, zero]])

    RzRy = Rz @ Ry
    R = RzRy @ Rx
    dR = np.stack([RzRy @ dRx, Rz @ dRy @ Rx, dRz @ Ry @ Rx], axis=-3)
    return R, dR


def matrix_to_rpy(R: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(R).as_euler("xyz")


def axis_angle_matrix(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rodrigues rotation about a fixed unit ``axis`` for a batch of angles."""
    angle = np.asarray(angle, dtype=float)
    K = skew(axis)
    s = np.sin(angle)[..., None, None]
    c = np.cos(angle)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


# ---------------------------------------------------------------------------
# poses and wrenches
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform from a child frame into its parent (usually world)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.quaternion, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if not np.all(np.isfinite(p)) or not np.isfinite(n) or n < 1e-12:
            raise ValueError("pose must be finite with a non-zero quaternion")
        if q[0] < 0.0:
            q = -q
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", q / n)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_rpy(cls, position=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)) -> "Pose":
        q = Rotation.from_euler("xyz", rpy).as_quat(scalar_first=True)
        return cls(np.asarray(position, dtype=float), q)

    @classmethod
    def from_matrix(cls, position, rotation) -> "Pose":
        q = Rotation.from_matrix(np.asarray(rotation, dtype=float)).as_quat(scalar_first=True)
        return cls(np.asarray(position, dtype=float), q)

    @property
    def rotation(self) -> np.ndarray:
        w, x, y, z = self.quaternion
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    @property
    def rpy(self) -> np.ndarray:
        return Rotation.from_quat(self.quaternion, scalar_first=True).as_euler("xyz")

    def compose(self, other: "Pose") -> "Pose":
        """``self * other``: express ``other`` (given in this frame) in the parent."""
        R = self.rotation
        q = (Rotation.from_quat(self.quaternion, scalar_first=True)
             * Rotation.from_quat(other.quaternion, scalar_first=True))
        return Pose(self.position + R @ other.position, q.as_quat(scalar_first=True))

    def inverse(self) -> "Pose":
        R = self.rotation
        q = self.quaternion * np.array([1.0, -1.0, -1.0, -1.0])
        return Pose(-R.T @ self.position, q)

    def transform_point(self, p) -> np.ndarray:
        return self.position + self.rotation @ np.asarray(p, dtype=float)

    def __repr__(self) -> str:
        return f"Pose(position={self.position.tolist()}, quaternion={self.quaternion.tolist()})"


class Frame(str, Enum):
    WORLD = "world"
    BASE = "base"


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force and moment acting on the base.

    ``torque`` is the moment about ``application_point``; everything is
    expressed in ``frame``.
    """

    force: np.ndarray
    torque: np.ndarray
    frame: Frame
    application_point: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.frame is None:
            raise ValueError("wrench frame tag must be set")
        object.__setattr__(self, "frame", Frame(self.frame))
        for name in ("force", "torque", "application_point"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    @classmethod
    def from_vector(cls, v, frame: Frame, application_point=(0.0, 0.0, 0.0)) -> "Wrench":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:], frame, np.asarray(application_point, dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def moment_about(self, point) -> np.ndarray:
        return self.torque + cross(self.application_point - np.asarray(point, dtype=float), self.force)

    def shifted_to(self, point) -> "Wrench":
        """Same physical wrench, referenced at another point of the same frame."""
        point = np.asarray(point, dtype=float)
        return Wrench(self.force, self.moment_about(point), self.frame, point)


def reexpress_wrench(w: Wrench, frm: Pose, to: Pose, frame: Frame | None = None) -> Wrench:
    """Express ``w`` (given in frame ``frm``) in frame ``to``.

    Both poses are given relative to a common parent. The force is rotated;
    the moment is shifted to the origin of ``to`` (lever arm of the
    application-point displacement) and rotated. The result is referenced at
    the origin of ``to``. The output frame tag defaults to the other tag of
    ``w.frame``.
    """
    if frame is None:
        frame = Frame.BASE if w.frame == Frame.WORLD else Frame.WORLD
    R_from = frm.rotation
    R_to = to.rotation
    f = R_from @ w.force
    p = frm.position + R_from @ w.application_point
    m = R_from @ w.torque + cross(p - to.position, f)
    return Wrench(R_to.T @ f, R_to.T @ m, frame, np.zeros(3))


# ---------------------------------------------------------------------------
# robot model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        com = np.asarray(self.com, dtype=float).reshape(3)
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape == (6,):
            ixx, iyy, izz, ixy, ixz, iyz = inertia
            inertia = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        inertia = inertia.reshape(3, 3)
        if not np.isfinite(self.mass) or self.mass < 0.0:
            raise ValueError(f"link {self.name!r}: mass must be non-negative")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValueError(f"link {self.name!r}: inertia must be symmetric")
        if np.linalg.eigvalsh(inertia).min() < -1e-12:
            raise ValueError(f"link {self.name!r}: inertia must be positive semi-definite")
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", com)
        object.__setattr__(self, "inertia", inertia)


@dataclass(frozen=True, eq=False)
class Joint:
    """Revolute joint. ``origin`` places the joint frame in the parent link frame."""

    name: str
    axis: np.ndarray
    origin: Pose
    lower: float
    upper: float
    velocity_limit: float = np.inf
    nominal: float = 0.0

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise ValueError(f"joint {self.name!r}: zero axis")
        if not self.lower < self.upper:
            raise ValueError(f"joint {self.name!r}: lower limit must be below upper limit")
        if self.velocity_limit <= 0:
            raise ValueError(f"joint {self.name!r}: velocity limit must be positive")
        object.__setattr__(self, "axis", axis / n)


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Serial arm on a floating base.

    Link ``i`` is carried by joint ``i``; the chain starts at ``mount`` (pose of
    the arm root in the base frame, whose origin is the base geometric
    center). ``ee_offset`` is the end-effector point in the last link frame.
    """

    links: tuple
    joints: tuple
    mount: Pose = field(default_factory=Pose)
    ee_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    nominal_height: float = 0.55
    name: str = "arm"

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        if len(self.links) != len(self.joints):
            raise ValueError("need exactly one link per joint")
        object.__setattr__(self, "ee_offset", np.asarray(self.ee_offset, dtype=float).reshape(3))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float).reshape(3))

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def nominal(self) -> np.ndarray:
        return np.array([j.nominal for j in self.joints])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity_limit for j in self.joints])

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    def scaled_masses(self, factors) -> "RobotModel":
        """Copy with link masses (and inertias) multiplied by ``factors``."""
        factors = np.broadcast_to(np.asarray(factors, dtype=float), (self.n_joints,))
        links = tuple(replace(l, mass=l.mass * f, inertia=l.inertia * f) for l, f in zip(self.links, factors))
        return replace(self, links=links)

    def check_q(self, q, name="q") -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.n_joints,):
            raise ValueError(f"{name} must have trailing dimension {self.n_joints}, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError(f"{name} must be finite")
        return q


@dataclass(frozen=True, eq=False)
class ArmState:
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray

    def __post_init__(self):
        for name in ("q", "dq", "ddq"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.q.shape == self.dq.shape == self.ddq.shape):
            raise ValueError("q, dq and ddq must share a shape")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.dq)) and np.all(np.isfinite(self.ddq))):
            raise ValueError("arm state must be finite")

    @classmethod
    def at_rest(cls, q) -> "ArmState":
        q = np.asarray(q, dtype=float)
        return cls(q, np.zeros_like(q), np.zeros_like(q))


# ---------------------------------------------------------------------------
# JSON model format
# ---------------------------------------------------------------------------

_EXPECTED_UNITS = {"length": "m", "mass": "kg", "angle": "rad", "time": "s"}


def _pose_from_dict(d) -> Pose:
    if d is None:
        return Pose()
    return Pose.from_rpy(d.get("xyz", (0.0, 0.0, 0.0)), d.get("rpy", (0.0, 0.0, 0.0)))


def _pose_to_dict(p: Pose) -> dict:
    return {"xyz": p.position.tolist(), "rpy": p.rpy.tolist()}


def model_from_dict(d: dict) -> RobotModel:
    units = d.get("units", {})
    for key, value in units.items():
        if key in _EXPECTED_UNITS and value != _EXPECTED_UNITS[key]:
            raise ValueError(f"unsupported unit for {key}: {value!r} (expected {_EXPECTED_UNITS[key]!r})")
    links_d, joints_d = d["links"], d["joints"]
    if len(links_d) != len(joints_d):
        raise ValueError("model needs one link entry per joint entry")
    links = [Link(l.get("name", f"link{i}"), l["mass"], l.get("com", (0, 0, 0)), l.get("inertia", np.zeros(6)))
             for i, l in enumerate(links_d)]
    joints = []
    for i, j in enumerate(joints_d):
        lim = j.get("limits", {})
        joints.append(Joint(
            name=j.get("name", f"joint{i}"),
            axis=j.get("axis", (0.0, 0.0, 1.0)),
            origin=_pose_from_dict(j.get("origin")),
            lower=float(lim.get("lower", -np.pi)),
            upper=float(lim.get("upper", np.pi)),
            velocity_limit=float(lim.get("velocity", np.inf)),
            nominal=float(j.get("nominal", 0.0)),
        ))
    nominal = d.get("nominal_posture")
    if nominal is not None:
        if len(nominal) != len(joints):
            raise ValueError("nominal_posture length must equal the number of joints")
        joints = [replace(j, nominal=float(v)) for j, v in zip(joints, nominal)]
    return RobotModel(
        links=tuple(links),
        joints=tuple(joints),
        mount=_pose_from_dict(d.get("mount")),
        ee_offset=d.get("ee_offset", (0.0, 0.0, 0.0)),
        gravity=d.get("gravity", GRAVITY.tolist()),
        nominal_height=float(d.get("nominal_height", 0.55)),
        name=d.get("name", "arm"),
    )


def model_to_dict(model: RobotModel) -> dict:
    return {
        "name": model.name,
        "units": dict(_EXPECTED_UNITS),
        "gravity": model.gravity.tolist(),
        "nominal_height": model.nominal_height,
        "mount": _pose_to_dict(model.mount),
        "ee_offset": model.ee_offset.tolist(),
        "nominal_posture": model.nominal.tolist(),
        "links": [{"name": l.name, "mass": l.mass, "com": l.com.tolist(), "inertia": l.inertia.tolist()}
                  for l in model.links],
        "joints": [{"name": j.name, "axis": j.axis.tolist(), "origin": _pose_to_dict(j.origin),
                    "limits": {"lower": j.lower, "upper": j.upper,
                               "velocity": None if np.isinf(j.velocity_limit) else j.velocity_limit}}
                   for j in model.joints],
    }


def load_model(path) -> RobotModel:
    d = json.loads(Path(path).read_text())
    for j in d.get("joints", []):
        lim = j.get("limits", {})
        if lim.get("velocity", 0) is None:
            lim.pop("velocity")
    return model_from_dict(d)


def box_inertia(mass: float, size: Sequence[float]) -> np.ndarray:
    x, y, z = size
    return mass / 12.0 * np.diag([y * y + z * z, x * x + z * z, x * x + y * y])


def default_model() -> RobotModel:
    """Four-joint arm with a 3 kg end-effector load on a quadruped-sized base.

    Joint order: shoulder rotation (z), shoulder flexion (y), elbow (y),
    wrist (y). Geometry and masses are representative, not a calibrated
    model of any specific robot.
    """
    upper, fore = 0.40, 0.40
    links = (
        Link("shoulder", 2.0, (0.0, 0.0, 0.05), box_inertia(2.0, (0.1, 0.1, 0.1))),
        Link("upper_arm", 2.5, (upper / 2, 0.0, 0.0), box_inertia(2.5, (upper, 0.08, 0.08))),
        Link("forearm", 1.5, (fore / 2, 0.0, 0.0), box_inertia(1.5, (fore, 0.06, 0.06))),
        Link("wrist_ee", 3.5, (0.08, 0.0, 0.0), box_inertia(3.5, (0.12, 0.1, 0.1))),
    )
    joints = (
        Joint("SH_ROT", (0, 0, 1), Pose(), -2.5, 2.5, 6.0, 0.0),
        Joint("SH_FLE", (0, 1, 0), Pose((0.0, 0.0, 0.1)), -2.0, 0.6, 6.0, -1.0),
        Joint("EL_FLE", (0, 1, 0), Pose((upper, 0.0, 0.0)), -0.2, 2.6, 6.0, 1.2),
        Joint("WR_FLE", (0, 1, 0), Pose((fore, 0.0, 0.0)), -1.8, 1.8, 6.0, 0.0),
    )
    return RobotModel(
        links=links,
        joints=joints,
        mount=Pose((0.30, 0.0, 0.10)),
        ee_offset=np.array([0.15, 0.0, 0.0]),
        nominal_height=0.55,
        name="quadruped_arm_4dof",
    )


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChainFrames:
    """Joint origins, joint axes, link rotations and EE point in the base frame."""

    origins: np.ndarray    # (..., N, 3)
    axes: np.ndarray       # (..., N, 3)
    rotations: np.ndarray  # (..., N, 3, 3)
    ee: np.ndarray         # (..., 3)

    def ee_jacobian(self) -> np.ndarray:
        """Positional EE Jacobian w.r.t. q, shape (..., 3, N)."""
        lever = self.ee[..., None, :] - self.origins
        return np.swapaxes(cross(self.axes, lever), -1, -2)


def chain_frames(model: RobotModel, q) -> ChainFrames:
    q = model.check_q(q)
    batch = q.shape[:-1]
    R = np.broadcast_to(model.mount.rotation, batch + (3, 3))
    p = np.broadcast_to(model.mount.position, batch + (3,))
    origins, axes, rotations = [], [], []
    for i, joint in enumerate(model.joints):
        p = p + R @ joint.origin.position
        R = R @ joint.origin.rotation
        axes.append(R @ joint.axis)
        origins.append(p)
        R = R @ axis_angle_matrix(joint.axis, q[..., i])
        rotations.append(R)
    ee = p + R @ model.ee_offset
    if model.n_joints == 0:
        empty = np.zeros(batch + (0, 3))
        return ChainFrames(empty, empty, np.zeros(batch + (0, 3, 3)), ee)
    return ChainFrames(np.stack(origins, axis=-2), np.stack(axes, axis=-2), np.stack(rotations, axis=-3), ee)


def forward_kinematics(model: RobotModel, base_pose: Pose, q) -> Pose:
    """World-frame end-effector pose."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_joints,):
        raise ValueError(f"expected {model.n_joints} joint positions, got shape {q.shape}")
    frames = chain_frames(model, q)
    R_ee = frames.rotations[-1] if model.n_joints else model.mount.rotation
    return base_pose.compose(Pose.from_matrix(frames.ee, R_ee))


# ---------------------------------------------------------------------------
# inverse dynamics
# ---------------------------------------------------------------------------


def _rnea(model: RobotModel, gravity_base, q, dq, ddq):
    """Recursive Newton-Euler on a fixed base, all vectors in the base frame.

    Returns joint torques ``(..., N)`` and the force/moment (about the base
    origin) that the base applies to the first link.
    """
    q = model.check_q(q)
    dq = model.check_q(dq, "dq")
    ddq = model.check_q(ddq, "ddq")
    g = np.asarray(gravity_base, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gravity must be finite")
    q, dq, ddq = np.broadcast_arrays(q, dq, ddq)
    batch = np.broadcast_shapes(q.shape[:-1], g.shape[:-1])
    fr = chain_frames(model, np.broadcast_to(q, batch + q.shape[-1:]))
    n = model.n_joints

    w = np.zeros(batch + (3,))
    wd = np.zeros(batch + (3,))
    a = np.zeros(batch + (3,))  # acceleration of the current joint origin
    prev = np.broadcast_to(model.mount.position, batch + (3,))
    F, Nm, rc = [], [], []
    for i, link in enumerate(model.links):
        o = fr.origins[..., i, :]
        r = o - prev
        a = a + cross(wd, r) + cross(w, cross(w, r))
        z = fr.axes[..., i, :]
        zd = z * dq[..., i, None]
        wd = wd + z * ddq[..., i, None] + cross(w, zd)
        w = w + zd
        Rl = fr.rotations[..., i, :, :]
        c = Rl @ link.com
        ac = a + cross(wd, c) + cross(w, cross(w, c))
        Iw = Rl @ link.inertia @ np.swapaxes(Rl, -1, -2)
        F.append(link.mass * (ac - g))
        Nm.append((Iw @ wd[..., None])[..., 0] + cross(w, (Iw @ w[..., None])[..., 0]))
        rc.append(c)
        prev = o

    tau = np.zeros(batch + (n,))
    f = np.zeros(batch + (3,))
    m = np.zeros(batch + (3,))  # moment about the next joint origin
    nxt = None
    for i in reversed(range(n)):
        o = fr.origins[..., i, :]
        if nxt is not None:
            m = m + cross(nxt - o, f)
        m = m + Nm[i] + cross(rc[i], F[i])
        f = f + F[i]
        tau[..., i] = np.einsum("...k,...k->...", fr.axes[..., i, :], m)
        nxt = o
    if n:
        m = m + cross(fr.origins[..., 0, :], f)
    return tau, f, m


def gravity_in_base(model: RobotModel, base_rotation) -> np.ndarray:
    R = np.asarray(base_rotation, dtype=float)
    return (np.swapaxes(R, -1, -2) @ model.gravity[:, None])[..., 0]


def base_wrench_batch(model: RobotModel, base_rotation, q, dq, ddq) -> np.ndarray:
    """Reaction wrench on the base at its origin, base frame, shape (..., 6)."""
    tau, f, m = _rnea(model, gravity_in_base(model, base_rotation), q, dq, ddq)
    return np.concatenate([-f, -m], axis=-1)


def _check_state(model: RobotModel, base_pose: Pose, arm: ArmState):
    for name in ("q", "dq", "ddq"):
        v = getattr(arm, name)
        if v.shape != (model.n_joints,):
            raise ValueError(f"{name} must have shape ({model.n_joints},), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite")


def rnea_base_wrench(model: RobotModel, base_pose: Pose, arm: ArmState) -> Wrench:
    """Wrench the arm exerts on the base, at the base origin in the base frame."""
    _check_state(model, base_pose, arm)
    v = base_wrench_batch(model, base_pose.rotation, arm.q, arm.dq, arm.ddq)
    return Wrench.from_vector(v, Frame.BASE)


def rnea_mount_wrench(model: RobotModel, base_pose: Pose, arm: ArmState) -> Wrench:
    """Same reaction wrench, referenced at the arm mounting point."""
    return rnea_base_wrench(model, base_pose, arm).shifted_to(model.mount.position)


def rnea_joint_torques(model: RobotModel, base_pose: Pose, arm: ArmState) -> np.ndarray:
    _check_state(model, base_pose, arm)
    tau, _, _ = _rnea(model, gravity_in_base(model, base_pose.rotation), arm.q, arm.dq, arm.ddq)
    return tau
