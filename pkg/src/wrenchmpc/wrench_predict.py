"""Turn a solved plan into the predicted base-wrench observation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .ocp import PlanTrajectory
from .spatial import RobotModel, base_wrench_batch, rpy_to_matrix
from .wrenchgen import DEFAULT_OFFSETS, GeneratorEpisode, WrenchObservation, query_prediction


class WrenchSource(str, Enum):
    MPC_PLAN = "mpc_plan"
    GENERATOR = "generator"


@dataclass(frozen=True, eq=False)
class WrenchPlan:
    """Predicted wrenches at ``offsets`` (s from now), body frame at offset 0."""

    offsets: np.ndarray
    wrenches: np.ndarray
    source: WrenchSource

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        wrenches = np.asarray(self.wrenches, dtype=float)
        if wrenches.shape != (offsets.size, 6):
            raise ValueError("wrenches must have shape (len(offsets), 6)")
        if not np.all(np.isfinite(wrenches)):
            raise ValueError("wrench plan must be finite")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "wrenches", wrenches)
        object.__setattr__(self, "source", WrenchSource(self.source))

    def to_dict(self) -> dict:
        return {"offsets": self.offsets.tolist(), "wrenches": self.wrenches.tolist(), "source": self.source.value}

    @classmethod
    def from_dict(cls, d: dict) -> "WrenchPlan":
        return cls(d["offsets"], d["wrenches"], d["source"])


class PlanInterpolant:
    """Continuous-time view of a plan.

    Positions (base pose, joint angles) use cubic splines through the knots;
    joint velocities and accelerations are interpolated linearly. The
    acceleration at the final knot repeats the last input.
    """

    def __init__(self, plan: PlanTrajectory):
        n = plan.n_joints
        self.plan = plan
        self.n = n
        self.times = plan.times
        pos_cols = np.r_[0:6, 6:6 + n]
        self._pos = CubicSpline(plan.times, plan.states[:, pos_cols], axis=0)
        self._vel = plan.states[:, 6 + n:6 + 2 * n]
        self._acc = np.vstack([plan.inputs[:, 3:3 + n], plan.inputs[-1:, 3:3 + n]])

    def _linear(self, values, t):
        return np.stack([np.interp(t, self.times, values[:, j]) for j in range(values.shape[1])], axis=-1)

    def sample(self, t):
        """Base pose ``(K, 6)`` and joint ``q, dq, ddq`` ``(K, N)`` at absolute times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pos = self._pos(t)
        return pos[:, :6], pos[:, 6:], self._linear(self._vel, t), self._linear(self._acc, t)


def _body_frame_wrenches(model: RobotModel, base, q, dq, ddq) -> np.ndarray:
    R = rpy_to_matrix(base[:, 3:6])
    w = base_wrench_batch(model, R, q, dq, ddq)
    # rotate each sample from the body frame at its own time into the body frame at offset 0
    rel = np.swapaxes(R[0], -1, -2)[None] @ R
    return np.concatenate([(rel @ w[:, :3, None])[..., 0], (rel @ w[:, 3:, None])[..., 0]], axis=1)


def plan_to_wrench(plan: PlanTrajectory | PlanInterpolant, model: RobotModel,
                   offsets=DEFAULT_OFFSETS, t_now: float | None = None) -> WrenchPlan:
    """Predicted reaction wrench of the arm on the base along the plan.

    Offsets are measured from ``t_now`` (default: plan start). Every sample
    is evaluated with inverse dynamics at the interpolated plan state and
    expressed in the body frame at ``t_now``, referenced at the base center.
    """
    interp = plan if isinstance(plan, PlanInterpolant) else PlanInterpolant(plan)
    if interp.n != model.n_joints:
        raise ValueError("plan and model disagree on the number of joints")
    offsets = np.asarray(offsets, dtype=float)
    t0 = interp.plan.t_start if t_now is None else float(t_now)
    times = t0 + offsets
    if np.any(offsets < 0) or times[0] < interp.plan.t_start - 1e-12 or times[-1] > interp.plan.t_end + 1e-9:
        raise ValueError("prediction offsets must lie inside the plan horizon")
    base, q, dq, ddq = interp.sample(times)
    return WrenchPlan(offsets, _body_frame_wrenches(model, base, q, dq, ddq), WrenchSource.MPC_PLAN)


def generator_to_wrench(ep: GeneratorEpisode, base_pose, offsets=DEFAULT_OFFSETS) -> WrenchPlan:
    return WrenchPlan(offsets, query_prediction(ep, base_pose, offsets), WrenchSource.GENERATOR)


def assemble_observation(wp: WrenchPlan, commands, base_twist) -> WrenchObservation:
    """Build the controller observation; ``base_twist`` is ``(v, omega)`` or a 6-vector."""
    twist = np.asarray(base_twist, dtype=float).reshape(6) if not isinstance(base_twist, tuple) \
        else np.concatenate([np.asarray(base_twist[0], float), np.asarray(base_twist[1], float)])
    return WrenchObservation(wp.wrenches, commands, twist[:3], twist[3:])
