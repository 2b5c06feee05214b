"""Random wrench sequences for training wrench-aware base controllers.

Each of the six wrench dimensions follows its own quadratic over a sliding
two-second window. The quadratic is pinned by three anchors at 0 s, 1 s and
2 s ahead of the current time. Every step the two near anchors are carried
over from the previous polynomial and a new far anchor is drawn around the
previous far anchor, with a band width scaled by the per-episode ``beta``,
then clipped to the configured bounds.

On top of this observed part, an unobserved disturbance couples the base
accelerations to per-episode random vectors and adds Gaussian noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .spatial import Pose

DEFAULT_OFFSETS = (0.0, 0.2, 0.4, 0.6, 0.8)
ANCHOR_TIMES = np.array([0.0, 1.0, 2.0])
WINDOW = 2.0


def _vec6(v) -> np.ndarray:
    return np.broadcast_to(np.asarray(v, dtype=float), (6,)).copy()


@dataclass
class GeneratorConfig:
    """Generator parameters.

    Default bounds, radii and noise levels are working values, not
    calibrated against any particular robot.

    ``far_anchor_rule`` selects how the new far anchor is drawn:

    * ``"band"`` (default): ``Uniform(w2 + beta * w_min, w2 + beta * w_max)``,
      a band of width ``beta * (w_max - w_min)`` around the previous far
      anchor ``w2``.
    * ``"literal"``: ``Uniform(w2 - beta * w_min, w2 + beta * w_max)``. With
      sign-symmetric bounds this collapses to a deterministic upward drift;
      kept for sensitivity studies.
    """

    w_min: np.ndarray = field(default_factory=lambda: np.array([-60.0, -60.0, -60.0, -20.0, -20.0, -20.0]))
    w_max: np.ndarray = field(default_factory=lambda: np.array([60.0, 60.0, 60.0, 20.0, 20.0, 20.0]))
    beta_range: tuple = (0.0, 0.1)
    dt: float = 0.02
    horizon_points: tuple = DEFAULT_OFFSETS
    unobserved_force_radius: float = 5.0
    unobserved_torque_radius: float = 1.0
    noise_std: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 2.0, 0.5, 0.5, 0.5]))
    obs_noise_std: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 5.0, 1.0, 1.0, 1.0]))
    far_anchor_rule: str = "band"

    def __post_init__(self):
        self.w_min = _vec6(self.w_min)
        self.w_max = _vec6(self.w_max)
        self.noise_std = _vec6(self.noise_std)
        self.obs_noise_std = _vec6(self.obs_noise_std)
        self.beta_range = tuple(float(b) for b in self.beta_range)
        self.horizon_points = tuple(float(o) for o in self.horizon_points)
        self.validate()

    def validate(self):
        if not np.all(self.w_min < self.w_max):
            raise ValueError("w_min must be strictly below w_max in every dimension")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        lo, hi = self.beta_range
        if not 0.0 <= lo <= hi:
            raise ValueError("beta_range must satisfy 0 <= low <= high")
        pts = np.asarray(self.horizon_points)
        if pts.size == 0 or pts[0] != 0.0 or np.any(np.diff(pts) <= 0) or pts[-1] > WINDOW:
            raise ValueError("horizon_points must be ascending, start at 0 and stay within the 2 s window")
        if self.unobserved_force_radius < 0 or self.unobserved_torque_radius < 0:
            raise ValueError("sphere radii must be non-negative")
        if np.any(self.noise_std < 0) or np.any(self.obs_noise_std < 0):
            raise ValueError("noise standard deviations must be non-negative")
        if self.far_anchor_rule not in ("band", "literal"):
            raise ValueError(f"unknown far_anchor_rule {self.far_anchor_rule!r}")

    @property
    def range(self) -> np.ndarray:
        return self.w_max - self.w_min

    def to_dict(self) -> dict:
        return {
            "w_min": self.w_min.tolist(),
            "w_max": self.w_max.tolist(),
            "beta_range": list(self.beta_range),
            "dt": self.dt,
            "horizon_points": list(self.horizon_points),
            "unobserved_force_radius": self.unobserved_force_radius,
            "unobserved_torque_radius": self.unobserved_torque_radius,
            "noise_std": self.noise_std.tolist(),
            "obs_noise_std": self.obs_noise_std.tolist(),
            "far_anchor_rule": self.far_anchor_rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator config keys: {sorted(unknown)}")
        return cls(**d)


def fit_quadratic(anchors: np.ndarray) -> np.ndarray:
    """Coefficients ``(a, b, c)`` of ``a s^2 + b s + c`` through anchors at s = 0, 1, 2.

    ``anchors`` has shape ``(3, ...)``; the result has the same shape.
    """
    w0, w1, w2 = anchors
    a = 0.5 * (w0 - 2.0 * w1 + w2)
    b = 0.5 * (-3.0 * w0 + 4.0 * w1 - w2)
    return np.stack([a, b, np.array(w0, dtype=float, copy=True)])


def eval_quadratic(coeffs: np.ndarray, s) -> np.ndarray:
    """Evaluate at times ``s`` (scalar or 1-D); returns ``s.shape + coeffs.shape[1:]``."""
    s = np.asarray(s, dtype=float)
    a, b, c = coeffs
    ss = s.reshape(s.shape + (1,) * (coeffs.ndim - 1))
    return (a * ss + b) * ss + c


def sample_in_ball(rng: np.random.Generator, radius: float, n: int | None = None) -> np.ndarray:
    """Uniform sample from the 3-D ball; shape (3,) or (n, 3)."""
    if n is None:
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        return d * radius * rng.uniform() ** (1.0 / 3.0)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)


@dataclass
class GeneratorEpisode:
    """Mutable per-episode generator state. One writer per episode."""

    coeffs: np.ndarray     # (3, 6) rows a, b, c; world frame. (3, B, 6) for a batch
    anchors: np.ndarray    # (3, 6) values at 0, 1, 2 s ahead
    beta: float            # (B, 1) for a batch
    v_force: np.ndarray
    v_torque: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    step_count: int = 0
    sampled_anchors: list = field(default_factory=list, repr=False)

    def evaluate(self, offsets) -> np.ndarray:
        """Observed wrench (world frame) at ``time + offsets``."""
        return eval_quadratic(self.coeffs, offsets)

    def applied(self) -> np.ndarray:
        """Observed wrench applied at the current time (world frame)."""
        return self.coeffs[2].copy()

    @property
    def unobserved_magnitudes(self) -> tuple[float, float]:
        """Norms of ``v_force`` and ``v_torque`` (decoder regression targets)."""
        return float(np.linalg.norm(self.v_force)), float(np.linalg.norm(self.v_torque))


def episode_init(cfg: GeneratorConfig, seed, batch: int | None = None) -> GeneratorEpisode:
    """Start an episode. ``seed`` is an int, a SeedSequence or a Generator.

    With ``batch`` set, the returned object holds that many independent
    episodes stacked along a second axis (used for statistics).
    """
    cfg.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if batch is None:
        anchors = rng.uniform(cfg.w_min, cfg.w_max, size=(3, 6))
        beta = float(rng.uniform(*cfg.beta_range))
    else:
        anchors = rng.uniform(cfg.w_min, cfg.w_max, size=(3, batch, 6))
        beta = rng.uniform(*cfg.beta_range, size=(batch, 1))
    v_force = sample_in_ball(rng, cfg.unobserved_force_radius, batch)
    v_torque = sample_in_ball(rng, cfg.unobserved_torque_radius, batch)
    return GeneratorEpisode(
        coeffs=fit_quadratic(anchors),
        anchors=anchors,
        beta=beta,
        v_force=v_force,
        v_torque=v_torque,
        rng=rng,
        sampled_anchors=[anchors.copy()],
    )


def sample_far_anchor(prev_far: np.ndarray, beta: float, cfg: GeneratorConfig, rng: np.random.Generator):
    if cfg.far_anchor_rule == "band":
        lo = prev_far + beta * cfg.w_min
        hi = prev_far + beta * cfg.w_max
    else:
        lo = prev_far - beta * cfg.w_min
        hi = prev_far + beta * cfg.w_max
    raw = lo + (hi - lo) * rng.uniform(size=np.shape(prev_far))
    return np.clip(raw, cfg.w_min, cfg.w_max)


def episode_step(ep: GeneratorEpisode, cfg: GeneratorConfig, record_anchors: bool = False) -> GeneratorEpisode:
    """Advance ``ep`` by ``cfg.dt`` in place and return it."""
    near = eval_quadratic(ep.coeffs, np.array([cfg.dt, 1.0 + cfg.dt]))
    far = sample_far_anchor(ep.anchors[2], ep.beta, cfg, ep.rng)
    ep.anchors = np.stack([near[0], near[1], far])
    ep.coeffs = fit_quadratic(ep.anchors)
    ep.step_count += 1
    ep.time = ep.step_count * cfg.dt
    if record_anchors:
        ep.sampled_anchors.append(far[None, :].copy())
    return ep


def query_prediction(ep: GeneratorEpisode, base_pose: Pose, offsets: Sequence[float] = DEFAULT_OFFSETS) -> np.ndarray:
    """Predicted observed wrench at ``offsets`` in the current base frame, shape (K, 6).

    All samples are rotated by the current base orientation; the wrench acts
    at the base center so no lever arm is involved.
    """
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets < 0.0) or np.any(offsets > WINDOW):
        raise ValueError("prediction offsets must lie in [0, 2] s")
    w = ep.evaluate(offsets)
    Rt = base_pose.rotation.T
    return np.concatenate([w[..., :3] @ Rt.T, w[..., 3:] @ Rt.T], axis=-1)


def unobserved_disturbance(ep: GeneratorEpisode, base_lin_acc, base_ang_acc, cfg: GeneratorConfig,
                           rng: np.random.Generator | None = None) -> np.ndarray:
    """Acceleration-coupled disturbance plus Gaussian residual, shape (6,).

    The coupling is elementwise: ``force = v_force * a_base``,
    ``torque = v_torque * alpha_base``. Output is in the frame the
    accelerations are given in.
    """
    a = np.asarray(base_lin_acc, dtype=float).reshape(3)
    alpha = np.asarray(base_ang_acc, dtype=float).reshape(3)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(alpha))):
        raise ValueError("base accelerations must be finite")
    rng = ep.rng if rng is None else rng
    noise = rng.standard_normal(6) * cfg.noise_std
    return np.concatenate([ep.v_force * a, ep.v_torque * alpha]) + noise


# ---------------------------------------------------------------------------
# observation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WrenchObservation:
    """Wrench part of the base controller input.

    ``predictions`` holds one base-frame wrench per prediction offset,
    followed by the velocity commands ``(v_x, v_y, omega_z)`` and the base
    twist. The layout is the same whether the predictions come from the
    training-time generator or from an MPC plan.
    """

    predictions: np.ndarray
    commands: np.ndarray
    base_linear_velocity: np.ndarray
    base_angular_velocity: np.ndarray

    def __post_init__(self):
        preds = np.array(self.predictions, dtype=float)
        if preds.ndim != 2 or preds.shape[1] != 6:
            raise ValueError("predictions must have shape (K, 6)")
        object.__setattr__(self, "predictions", preds)
        for name in ("commands", "base_linear_velocity", "base_angular_velocity"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, v)
        if not all(np.all(np.isfinite(getattr(self, n))) for n in
                   ("predictions", "commands", "base_linear_velocity", "base_angular_velocity")):
            raise ValueError("observation entries must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.predictions.ravel(), self.commands,
                               self.base_linear_velocity, self.base_angular_velocity])

    def to_dict(self) -> dict:
        return {
            "predictions": self.predictions.tolist(),
            "commands": self.commands.tolist(),
            "base_linear_velocity": self.base_linear_velocity.tolist(),
            "base_angular_velocity": self.base_angular_velocity.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WrenchObservation":
        return cls(d["predictions"], d["commands"], d["base_linear_velocity"], d["base_angular_velocity"])

    @classmethod
    def from_json(cls, s: str) -> "WrenchObservation":
        return cls.from_dict(json.loads(s))


def noisify_observation(obs: WrenchObservation, cfg: GeneratorConfig, rng: np.random.Generator) -> WrenchObservation:
    """Student-style observation: Gaussian noise on every prediction sample only."""
    noise = rng.standard_normal(obs.predictions.shape) * cfg.obs_noise_std
    return WrenchObservation(obs.predictions + noise, obs.commands,
                             obs.base_linear_velocity, obs.base_angular_velocity)


def generator_observation(ep: GeneratorEpisode, cfg: GeneratorConfig, base_pose: Pose,
                          commands, base_linear_velocity, base_angular_velocity) -> WrenchObservation:
    preds = query_prediction(ep, base_pose, cfg.horizon_points)
    return WrenchObservation(preds, commands, base_linear_velocity, base_angular_velocity)


def rollout(cfg: GeneratorConfig, seed, duration: float) -> Iterator[dict]:
    """Per-step records for a stand-alone generator run.

    No robot is attached, so the base is held at the identity pose with zero
    acceleration and the unobserved part reduces to its Gaussian residual.
    """
    ep = episode_init(cfg, seed)
    n_steps = int(round(duration / cfg.dt))
    zero = np.zeros(3)
    for _ in range(n_steps + 1):
        yield {
            "time": ep.time,
            "observed": ep.applied().tolist(),
            "unobserved": unobserved_disturbance(ep, zero, zero, cfg).tolist(),
            "predictions": query_prediction(ep, Pose(), cfg.horizon_points).tolist(),
        }
        episode_step(ep, cfg)
