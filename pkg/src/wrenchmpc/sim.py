"""Closed-loop desk-scale simulation of a legged base carrying an MPC-driven arm.

The learned locomotion policy is replaced by an analytic stand-in:

* planar velocity and yaw rate follow the commands with a first-order lag;
* height, roll and pitch decay to their set points (the same structure the
  MPC assumes);
* the net wrench on the base (arm reaction + disturbances - controller
  compensation) perturbs the base twist through a constant admittance;
* the controller counters the wrench it expects by commanding a
  compensation wrench, realized through a first-order actuation lag and a
  saturation.

The three controllers differ only in how much of the wrench observation they
use: the full prediction sequence (predictive), the current sample
(reactive), or nothing (naive).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .ocp import OcpDefinition, PlanTrajectory, RecedingHorizonController, SolverSettings
from .spatial import (Pose, RobotModel, base_wrench_batch, chain_frames, default_model, rpy_to_matrix, skew)
from .wrench_predict import PlanInterpolant, WrenchPlan, WrenchSource, assemble_observation, plan_to_wrench
from .wrenchgen import DEFAULT_OFFSETS, WrenchObservation, sample_in_ball

CONTROLLERS = ("predictive", "reactive", "naive")
# fraction of the actuation lag the predictive controller looks ahead; plan revisions at each replan make
# far predictions less reliable, so the full lag (gain 1) over-previews at fast arm motions
DEFAULT_PREVIEW_GAIN = 0.5


# ---------------------------------------------------------------------------
# base response and controllers
# ---------------------------------------------------------------------------


@dataclass
class BaseResponseModel:
    """Stand-in for the locomotion policy's closed-loop base behaviour.

    The admittance is ``T^T diag(compliance) T`` where ``T`` moves a wrench
    from the base center to the support point ``support_height`` below it;
    this couples lateral force into roll and longitudinal force into pitch
    and is symmetric positive semi-definite by construction.
    """

    velocity_time_constant: float = 0.2
    kappa: tuple = (5.0, 10.0, 10.0)
    nominal_height: float = 0.55
    support_height: float = 0.5
    compliance: np.ndarray = field(default_factory=lambda: np.array([0.002, 0.002, 0.0005, 0.02, 0.02, 0.005]))
    actuation_time_constant: float = 0.15
    compensation_limit: np.ndarray = field(default_factory=lambda: np.array([150.0, 100.0, 300.0, 60.0, 60.0, 40.0]))
    max_speed: float = 0.5
    max_yaw_rate: float = 1.0

    def __post_init__(self):
        self.kappa = tuple(float(k) for k in self.kappa)
        self.compliance = np.broadcast_to(np.asarray(self.compliance, dtype=float), (6,)).copy()
        self.compensation_limit = np.broadcast_to(np.asarray(self.compensation_limit, dtype=float), (6,)).copy()
        if self.velocity_time_constant <= 0 or self.actuation_time_constant <= 0:
            raise ValueError("time constants must be positive")
        if min(self.kappa) <= 0:
            raise ValueError("decay gains must be positive")
        if np.any(self.compliance < 0) or np.any(self.compensation_limit < 0):
            raise ValueError("compliance and compensation limits must be non-negative")

    @property
    def admittance(self) -> np.ndarray:
        T = np.eye(6)
        T[3:, :3] = skew(np.array([0.0, 0.0, self.support_height]))
        return T.T @ np.diag(self.compliance) @ T


@dataclass(frozen=True, eq=False)
class ControllerOutput:
    twist_command: np.ndarray   # (v_x, v_y, omega_z), world frame
    compensation: np.ndarray    # target counter-wrench, base frame


class BaseController:
    name = "base"

    def __init__(self, response: BaseResponseModel, preview_gain: float = DEFAULT_PREVIEW_GAIN):
        self.response = response
        self.preview_gain = float(preview_gain)
        self.offsets = np.asarray(DEFAULT_OFFSETS)

    def compensation_target(self, obs: WrenchObservation) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, obs: WrenchObservation) -> ControllerOutput:
        r = self.response
        cmd = obs.commands.copy()
        speed = math.hypot(cmd[0], cmd[1])
        if speed > r.max_speed:
            cmd[:2] *= r.max_speed / speed
        cmd[2] = np.clip(cmd[2], -r.max_yaw_rate, r.max_yaw_rate)
        comp = np.clip(self.compensation_target(obs), -r.compensation_limit, r.compensation_limit)
        return ControllerOutput(cmd, comp)


class PredictiveController(BaseController):
    """Feed-forward on the predicted wrench, previewed by the actuation lag.

    The target is the prediction interpolated at
    ``preview_gain * actuation_time_constant`` ahead, which offsets the lag of
    the compensation channel.
    """

    name = "predictive"

    def compensation_target(self, obs):
        preds = obs.predictions
        offsets = self.offsets[:preds.shape[0]]
        tau = self.preview_gain * self.response.actuation_time_constant
        return np.array([np.interp(tau, offsets, preds[:, j]) for j in range(6)])


class ReactiveController(BaseController):
    name = "reactive"

    def compensation_target(self, obs):
        return obs.predictions[0].copy()


class NaiveController(BaseController):
    name = "naive"

    def compensation_target(self, obs):
        return np.zeros(6)


def make_controller(name: str, response: BaseResponseModel, preview_gain: float = DEFAULT_PREVIEW_GAIN) -> BaseController:
    classes = {"predictive": PredictiveController, "reactive": ReactiveController, "naive": NaiveController}
    try:
        return classes[name](response, preview_gain)
    except KeyError:
        raise ValueError(f"unknown controller {name!r}; choose from {CONTROLLERS}") from None


# ---------------------------------------------------------------------------
# configuration and trace
# ---------------------------------------------------------------------------


@dataclass
class SimConfig:
    dt: float = 0.01
    mpc_period: float = 0.1
    response: BaseResponseModel = field(default_factory=BaseResponseModel)
    unobserved: bool = True
    unobserved_force_radius: float = 1.0
    unobserved_torque_radius: float = 0.1
    acceleration_filter: float = 0.05   # time constant of the acceleration seen by the coupling term (s)
    noise_std: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0, 0.3, 0.3, 0.3]))
    fall_tilt: float = math.radians(60.0)
    fall_height_ratio: float = 0.5
    stop_on_fall: bool = True
    mpc_max_iter: int = 4

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.acceleration_filter < self.dt:
            raise ValueError("acceleration_filter must be at least one simulation step")
        if self.mpc_period < self.dt:
            raise ValueError("mpc_period must be at least one simulation step")
        self.noise_std = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (6,)).copy()


def _plain(v):
    return v.tolist() if isinstance(v, np.ndarray) else list(v) if isinstance(v, tuple) else v


def sim_config_to_dict(cfg: SimConfig) -> dict:
    out = {f.name: _plain(getattr(cfg, f.name)) for f in fields(cfg) if f.name != "response"}
    out["response"] = {f.name: _plain(getattr(cfg.response, f.name)) for f in fields(cfg.response)}
    return out


def sim_config_from_dict(d: dict) -> SimConfig:
    d = dict(d)
    resp = dict(d.pop("response", {}) or {})
    known = {f.name for f in fields(SimConfig)}
    known_resp = {f.name for f in fields(BaseResponseModel)}
    bad = sorted(set(d) - known) + sorted(f"response.{k}" for k in set(resp) - known_resp)
    if bad:
        raise ValueError(f"unknown simulation config keys: {bad}")
    return SimConfig(response=BaseResponseModel(**resp), **d)


_TRACE_FIELDS = (
    "time", "position", "rpy", "linear_velocity", "angular_velocity", "q", "dq", "ddq",
    "arm_wrench", "unobserved_wrench", "external_wrench", "predicted_wrench", "commands",
    "compensation", "ee_position", "ee_reference",
)


@dataclass
class SimTrace:
    """Per-step records with a uniform time step.

    ``angular_velocity`` holds roll/pitch/yaw rates; the pose at step k+1 is
    the pose at step k advanced by ``dt`` times the stored twist. Wrenches are
    base-frame 6-vectors (force, torque) at the base center.
    """

    dt: float
    nominal_height: float
    time: np.ndarray
    position: np.ndarray
    rpy: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray
    arm_wrench: np.ndarray
    unobserved_wrench: np.ndarray
    external_wrench: np.ndarray
    predicted_wrench: np.ndarray
    commands: np.ndarray
    compensation: np.ndarray
    ee_position: np.ndarray
    ee_reference: np.ndarray

    def __len__(self) -> int:
        return len(self.time)

    @classmethod
    def from_records(cls, dt, nominal_height, records: list[dict]) -> "SimTrace":
        arrays = {}
        for name in _TRACE_FIELDS:
            arrays[name] = np.array([r[name] for r in records], dtype=float) if records else np.zeros((0,))
        return cls(dt=dt, nominal_height=nominal_height, **arrays)

    def records(self):
        for k in range(len(self)):
            yield {name: (getattr(self, name)[k].tolist() if getattr(self, name).ndim > 1
                          else float(getattr(self, name)[k])) for name in _TRACE_FIELDS}

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")

    def write_csv(self, path):
        header = []
        for name in _TRACE_FIELDS:
            arr = getattr(self, name)
            header += [name] if arr.ndim == 1 else [f"{name}_{i}" for i in range(arr.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self)):
                row = []
                for name in _TRACE_FIELDS:
                    arr = getattr(self, name)
                    row += [repr(float(arr[k]))] if arr.ndim == 1 else [repr(float(v)) for v in arr[k]]
                w.writerow(row)


@dataclass
class Metrics:
    mean_abs_tilt: float
    mean_ang_vel_magnitude_rollpitch: float
    mean_lin_vel_tracking_error: float
    fall_count: int
    time_before_falling: float | None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def tilt_angles(rpy) -> np.ndarray:
    """Angle between the base z-axis and world z for each row of ``rpy``."""
    z = rpy_to_matrix(np.asarray(rpy, dtype=float))[..., :, 2]
    return np.arctan2(np.hypot(z[..., 0], z[..., 1]), z[..., 2])


def compute_metrics(trace: SimTrace, fall_tilt: float = math.radians(60.0),
                    fall_height_ratio: float = 0.5) -> Metrics:
    if len(trace) == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    tilt = tilt_angles(trace.rpy)
    angvel = np.hypot(trace.angular_velocity[:, 0], trace.angular_velocity[:, 1])
    track = np.hypot(*(trace.commands[:, :2] - trace.linear_velocity[:, :2]).T)
    fallen = (tilt > fall_tilt) | (trace.position[:, 2] < fall_height_ratio * trace.nominal_height)
    onsets = np.flatnonzero(fallen & ~np.concatenate([[False], fallen[:-1]]))
    first = float(trace.time[onsets[0]] - trace.time[0]) if onsets.size else None
    return Metrics(float(tilt.mean()), float(angvel.mean()), float(track.mean()), int(onsets.size), first)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

ExternalWrench = Callable[[float], np.ndarray]   # world-frame (force, torque) at the base center


class Simulation:
    """One closed-loop run. Single-threaded; all randomness comes from ``seed``.

    ``external`` is a scheduled world-frame wrench at the base center that is
    also announced in the prediction channel.
    """

    def __init__(self, model: RobotModel, controller: BaseController, config: SimConfig | None = None,
                 seed: int = 0, mpc: RecedingHorizonController | None = None,
                 external: ExternalWrench | None = None, initial_base=(0.0, 0.0, 0.0),
                 initial_q=None, ee_reference: Callable[[float], np.ndarray] | None = None,
                 arm_present: bool = True):
        self.model = model
        self.controller = controller
        self.config = config or SimConfig()
        self.mpc = mpc
        self.external = external
        self.ee_reference = ee_reference
        self.arm_present = arm_present
        self.rng = np.random.default_rng(seed)
        cfg = self.config
        self.v_force = sample_in_ball(self.rng, cfg.unobserved_force_radius)
        self.v_torque = sample_in_ball(self.rng, cfg.unobserved_torque_radius)
        r = cfg.response

        self.step_index = 0
        self.t = 0.0
        x0, y0, yaw0 = initial_base
        self.position = np.array([x0, y0, r.nominal_height])
        self.rpy = np.array([0.0, 0.0, yaw0])
        self.planar_velocity = np.zeros(2)
        self.yaw_rate = 0.0
        self.compensation = np.zeros(6)
        self.q = model.nominal.copy() if initial_q is None else np.asarray(initial_q, dtype=float).copy()
        self.dq = np.zeros(model.n_joints)
        self.prev_lin_vel = np.zeros(3)
        self.prev_ang_vel = np.zeros(3)
        self.filtered_acc = np.zeros(6)
        self.plan: PlanTrajectory | None = None
        self.interp: PlanInterpolant | None = None
        self.t_plan = -np.inf
        self.offsets = np.asarray(DEFAULT_OFFSETS)
        self.records: list[dict] = []
        self.fallen = False

    # -- helpers ---------------------------------------------------------

    def measured_state(self) -> np.ndarray:
        return np.concatenate([self.position, self.rpy, self.q, self.dq])

    def base_pose(self) -> Pose:
        return Pose.from_rpy(self.position, self.rpy)

    def _external_base(self, times, R) -> np.ndarray:
        if self.external is None:
            return np.zeros((len(times), 6))
        w = np.array([self.external(t) for t in times], dtype=float)
        return np.concatenate([w[:, :3] @ R, w[:, 3:] @ R], axis=1)

    def _arm_wrench(self, R, ddq) -> np.ndarray:
        if not self.arm_present or self.model.n_joints == 0:
            return np.zeros(6)
        return base_wrench_batch(self.model, R, self.q, self.dq, ddq)

    def prediction(self, R, ddq) -> WrenchPlan:
        """Wrench prediction for the current step (arm plan + scheduled wrench)."""
        K = len(self.offsets)
        if self.interp is not None and self.arm_present:
            arm = plan_to_wrench(self.interp, self.model, self.offsets, t_now=self.t).wrenches
        else:
            arm = np.broadcast_to(self._arm_wrench(R, ddq), (K, 6))
        ext = self._external_base(self.t + self.offsets, R)
        return WrenchPlan(self.offsets, arm + ext, WrenchSource.MPC_PLAN)

    # -- main loop -------------------------------------------------------

    def step(self) -> dict:
        cfg, r = self.config, self.config.response
        dt = cfg.dt
        t = self.t

        if self.mpc is not None and (self.plan is None or t - self.t_plan >= cfg.mpc_period - 1e-9):
            _, self.plan = self.mpc.step(self.measured_state(), t)
            self.interp = PlanInterpolant(self.plan)
            self.t_plan = t
        u = self.plan.input_at(t) if self.plan is not None else np.zeros(3 + self.model.n_joints)
        ddq = u[3:]

        R = rpy_to_matrix(self.rpy)
        wp = self.prediction(R, ddq)
        body_lin = R.T @ self.prev_lin_vel
        obs = assemble_observation(wp, u[:3], (body_lin, self.prev_ang_vel))
        out = self.controller(obs)

        arm_w = self._arm_wrench(R, ddq)
        ext_w = self._external_base([t], R)[0]
        if cfg.unobserved:
            noise = self.rng.standard_normal(6) * cfg.noise_std
            unobs = np.concatenate([self.v_force * (R.T @ self.filtered_acc[:3]),
                                    self.v_torque * self.filtered_acc[3:]]) + noise
        else:
            unobs = np.zeros(6)

        self.compensation = self.compensation + dt / r.actuation_time_constant * (out.compensation - self.compensation)
        self.compensation = np.clip(self.compensation, -r.compensation_limit, r.compensation_limit)
        net = arm_w + ext_w + unobs - self.compensation
        pert = r.admittance @ net

        self.planar_velocity = self.planar_velocity + dt / r.velocity_time_constant * (out.twist_command[:2] - self.planar_velocity)
        self.yaw_rate = self.yaw_rate + dt / r.velocity_time_constant * (out.twist_command[2] - self.yaw_rate)
        k1, k2, k3 = r.kappa
        lin_vel = np.array([self.planar_velocity[0], self.planar_velocity[1],
                            -k1 * (self.position[2] - r.nominal_height)]) + R @ pert[:3]
        ang_vel = np.array([-k2 * self.rpy[0] + pert[3], -k3 * self.rpy[1] + pert[4], self.yaw_rate + pert[5]])

        if self.ee_reference is not None:
            ee_ref = np.asarray(self.ee_reference(t), dtype=float)
        else:
            ee_ref = np.full(3, np.nan)
        ee = self.position + R @ chain_frames(self.model, self.q).ee if self.model.n_joints else self.position
        rec = {
            "time": t, "position": self.position.copy(), "rpy": self.rpy.copy(),
            "linear_velocity": lin_vel, "angular_velocity": ang_vel,
            "q": self.q.copy(), "dq": self.dq.copy(), "ddq": ddq.copy(),
            "arm_wrench": arm_w, "unobserved_wrench": unobs, "external_wrench": ext_w,
            "predicted_wrench": wp.wrenches[0].copy(), "commands": out.twist_command,
            "compensation": self.compensation.copy(), "ee_position": ee, "ee_reference": ee_ref,
        }
        self.records.append(rec)
        # judged on the recorded state so the trace metrics see the same fall
        if tilt_angles(self.rpy) > cfg.fall_tilt or self.position[2] < cfg.fall_height_ratio * r.nominal_height:
            self.fallen = True

        self.position = self.position + dt * lin_vel
        self.rpy = self.rpy + dt * ang_vel
        self.q = self.q + dt * self.dq + 0.5 * dt * dt * ddq
        self.dq = self.dq + dt * ddq
        # the coupling sees a filtered acceleration; an unfiltered one closes an algebraic loop through the admittance
        raw_acc = np.concatenate([lin_vel - self.prev_lin_vel, ang_vel - self.prev_ang_vel]) / dt
        self.filtered_acc = self.filtered_acc + dt / cfg.acceleration_filter * (raw_acc - self.filtered_acc)
        self.prev_lin_vel, self.prev_ang_vel = lin_vel, ang_vel
        self.step_index += 1
        self.t = self.step_index * dt

        return rec

    def run(self, duration: float) -> SimTrace:
        n = int(round(duration / self.config.dt))
        for _ in range(n):
            self.step()
            if self.fallen and self.config.stop_on_fall:
                break
        return self.trace()

    def trace(self) -> SimTrace:
        return SimTrace.from_records(self.config.dt, self.config.response.nominal_height, self.records)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

DESK_DURATION = 60.0
FULL_DURATION = 1800.0


def experiment_2_reference(tau: float) -> np.ndarray:
    return np.array([0.5, 0.5 * math.sin(tau / 0.6), 1.1])


def shoulder_reference(model: RobotModel, omega: float) -> Callable[[float], np.ndarray]:
    nominal = model.nominal.copy()

    def ref(t):
        q = nominal.copy()
        q[0] = 0.5 * math.pi * math.sin(omega * t)
        return q
    return ref


def default_ocp(model: RobotModel, **overrides) -> OcpDefinition:
    kw = dict(kappa=(5.0, 10.0, 10.0), horizon=1.0, dt=0.01, w_ee=100.0, w_theta=0.5, w_omega=0.2,
              barrier_mu=1e-2, barrier_delta=5e-2)
    kw.update(overrides)
    return OcpDefinition(model, **kw)


def experiment_1_reference(seed: int, duration: float, period: float = 5.0) -> Callable[[float], np.ndarray]:
    rng = np.random.default_rng([seed, 1])
    n = int(math.ceil((duration + 2.0) / period)) + 1
    targets = np.column_stack([rng.uniform(-1.5, 1.5, n), rng.uniform(-1.5, 1.5, n), rng.uniform(0.6, 1.1, n)])

    def ref(t):
        return targets[min(int(t // period), n - 1)]
    return ref


@dataclass
class ScenarioSetup:
    simulation: Simulation
    duration: float


def build_scenario(scenario: str, controller: str, seed: int = 0, duration: float | None = None,
                   full: bool = False, model: RobotModel | None = None, config: SimConfig | None = None,
                   preview_gain: float = DEFAULT_PREVIEW_GAIN, omega: float = 0.0) -> ScenarioSetup:
    model = model or default_model()
    config = config or SimConfig()
    if duration is None:
        duration = FULL_DURATION if full else DESK_DURATION
    ctrl = make_controller(controller, config.response, preview_gain)
    settings = SolverSettings(max_iter=config.mpc_max_iter, warn_on_degraded=False)
    jitter = np.random.default_rng([seed, 2]).uniform(-0.05, 0.05, 3)
    if scenario == "exp1":
        ref = experiment_1_reference(seed, duration)
        d = default_ocp(model, ee_reference=ref)
    elif scenario == "exp2":
        ref = experiment_2_reference
        d = default_ocp(model, ee_reference=ref, base_reference=np.zeros(3), w_base=(20.0, 20.0, 20.0))
    elif scenario == "sweep":
        ref = None
        d = default_ocp(model, w_ee=0.0, joint_reference=shoulder_reference(model, omega),
                        w_joint_ref=np.r_[200.0, np.zeros(model.n_joints - 1)],
                        base_reference=np.zeros(3), w_base=(20.0, 20.0, 20.0))
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    mpc = RecedingHorizonController(d, settings)
    sim = Simulation(model, ctrl, config, seed, mpc=mpc, initial_base=tuple(jitter), ee_reference=ref)
    return ScenarioSetup(sim, duration)


def simulate(scenario: str, controller: str, seed: int = 0, duration: float | None = None,
             full: bool = False, **kw) -> tuple[SimTrace, Metrics]:
    setup = build_scenario(scenario, controller, seed, duration, full, **kw)
    if setup.duration <= 0:
        raise ValueError("duration must be positive")
    trace = setup.simulation.run(setup.duration)
    cfg = setup.simulation.config
    return trace, compute_metrics(trace, cfg.fall_tilt, cfg.fall_height_ratio)


def run_experiment_1(seed: int, duration: float = DESK_DURATION, controller: str = "predictive", **kw) -> Metrics:
    """Random EE targets in a 3 m x 3 m square, height U(0.6, 1.1) m, re-sampled every 5 s."""
    return simulate("exp1", controller, seed, duration, **kw)[1]


def run_experiment_2(seed: int, duration: float = DESK_DURATION, controller: str = "predictive", **kw) -> Metrics:
    """EE target oscillating laterally, base held at the origin with zero yaw."""
    return simulate("exp2", controller, seed, duration, **kw)[1]


# -- leaning -----------------------------------------------------------------


@dataclass
class LeanConfig:
    onset: float = 1.5
    length: float = 1.0
    duration: float = 4.0
    step_tilt: float = 0.08   # tilt beyond which the robot would have to step (rad)


@dataclass
class LeanResult:
    force: float
    stabilized: bool
    peak_tilt: float
    pre_onset_compensation: float
    trace: SimTrace | None = None


def step_force(magnitude: float, onset: float, length: float) -> ExternalWrench:
    def w(t):
        on = onset <= t < onset + length
        return np.array([0.0, magnitude if on else 0.0, 0.0, 0.0, 0.0, 0.0])
    return w


def run_leaning(force_magnitude: float, controller: str, lean: LeanConfig | None = None,
                model: RobotModel | None = None, config: SimConfig | None = None,
                preview_gain: float = DEFAULT_PREVIEW_GAIN, keep_trace: bool = False) -> LeanResult:
    """Lateral step force with advance notice in the prediction channel.

    The arm load is left out so that the only wrench acting on the base is
    the push; with zero force the base stays exactly level.
    """
    lean = lean or LeanConfig()
    model = model or default_model()
    config = config or SimConfig(unobserved=False, stop_on_fall=False)
    ctrl = make_controller(controller, config.response, preview_gain)
    sim = Simulation(model, ctrl, config, seed=0, external=step_force(force_magnitude, lean.onset, lean.length),
                     arm_present=False)
    trace = sim.run(lean.duration)
    peak = float(tilt_angles(trace.rpy).max())
    pre = trace.time < lean.onset
    pre_comp = float(np.abs(trace.compensation[pre]).max())
    return LeanResult(force_magnitude, peak < lean.step_tilt, peak, pre_comp, trace if keep_trace else None)


def max_stabilized_force(controller: str, increment: float = 10.0, max_force: float = 1000.0,
                         **kw) -> float:
    """Largest force, in ``increment`` steps, the controller holds without stepping."""
    best = 0.0
    f = 0.0
    while f <= max_force:
        if not run_leaning(f, controller, **kw).stabilized:
            break
        best = f
        f += increment
    return best


# -- frequency sweep -----------------------------------------------------------


def run_frequency_sweep(omegas: Sequence[float] = (0.0, 2.0, 4.0, 5.0), controllers: Sequence[str] = CONTROLLERS,
                        seed: int = 0, duration: float = 20.0, **kw) -> dict:
    """Shoulder rotation ``(pi/2) sin(omega t)``; returns ``{(omega, controller): Metrics}``."""
    table = {}
    for omega in omegas:
        for c in controllers:
            table[(float(omega), c)] = simulate("sweep", c, seed, duration, omega=omega, **kw)[1]
    return table
