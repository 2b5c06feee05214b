"""Receding-horizon optimal control for the simplified floating-base arm.

State ``x = [p_x, p_y, p_z, r_x, r_y, r_z, theta_1..N, omega_1..N]`` and input
``u = [v_x, v_y, omega_z, alpha_1..N]``. The base follows commanded planar
velocity and yaw rate exactly while height, roll and pitch decay to their
set points; the joints are double integrators.

The problem is solved with an iLQR-style sequential linear-quadratic scheme:
RK4 discretization, Gauss-Newton quadratization of the end-effector term,
relaxed log-barriers for joint position limits, a regularized Riccati
backward pass and a backtracking line search on the true cost.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .spatial import RobotModel, chain_frames, rpy_to_matrix_derivatives

log = logging.getLogger(__name__)

CONVERGED = "CONVERGED"
DEGRADED = "DEGRADED"


class SolverDivergence(RuntimeError):
    """Raised when a rollout leaves the finite range."""

    def __init__(self, message, iteration, cost_history):
        super().__init__(f"{message} (iteration {iteration}, cost history {cost_history})")
        self.iteration = iteration
        self.cost_history = list(cost_history)


def constant_reference(value) -> Callable[[float], np.ndarray]:
    value = np.asarray(value, dtype=float).copy()
    return lambda t: value


# ---------------------------------------------------------------------------
# problem definition
# ---------------------------------------------------------------------------


@dataclass
class OcpDefinition:
    """Cost, dynamics parameters and references of one OCP instance.

    Weights are diagonals. ``ee_reference``/``joint_reference`` map absolute
    time to a world-frame EE target / joint targets. ``base_reference`` is
    ``(x, y, yaw)``; it is used only when ``w_base`` is non-zero.
    """

    model: RobotModel
    kappa: tuple = (5.0, 10.0, 10.0)
    h_des: float | None = None
    horizon: float = 1.0
    dt: float = 0.01
    w_ee: np.ndarray = field(default_factory=lambda: np.full(3, 100.0))
    w_u: np.ndarray | None = None
    w_theta: np.ndarray | float = 0.5
    w_omega: np.ndarray | float = 0.2
    barrier_mu: float = 1e-2
    barrier_delta: float = 5e-2
    ee_reference: Callable[[float], np.ndarray] | None = None
    base_reference: np.ndarray | None = None
    w_base: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joint_reference: Callable[[float], np.ndarray] | None = None
    w_joint_ref: np.ndarray | float = 0.0

    def __post_init__(self):
        n = self.model.n_joints
        self.kappa = tuple(float(k) for k in self.kappa)
        if self.h_des is None:
            self.h_des = self.model.nominal_height
        if self.w_u is None:
            self.w_u = np.concatenate([[1.0, 1.0, 1.0], np.full(n, 0.02)])
        self.w_ee = np.broadcast_to(np.asarray(self.w_ee, dtype=float), (3,)).copy()
        self.w_u = np.broadcast_to(np.asarray(self.w_u, dtype=float), (3 + n,)).copy()
        self.w_theta = np.broadcast_to(np.asarray(self.w_theta, dtype=float), (n,)).copy()
        self.w_omega = np.broadcast_to(np.asarray(self.w_omega, dtype=float), (n,)).copy()
        self.w_joint_ref = np.broadcast_to(np.asarray(self.w_joint_ref, dtype=float), (n,)).copy()
        self.w_base = np.broadcast_to(np.asarray(self.w_base, dtype=float), (3,)).copy()
        if self.base_reference is not None:
            self.base_reference = np.asarray(self.base_reference, dtype=float).reshape(3)
        if self.ee_reference is not None and not callable(self.ee_reference):
            self.ee_reference = constant_reference(self.ee_reference)
        if self.joint_reference is not None and not callable(self.joint_reference):
            self.joint_reference = constant_reference(self.joint_reference)
        self.validate()

    def validate(self):
        if min(self.kappa) <= 0:
            raise ValueError("kappa gains must be positive")
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        for name in ("w_ee", "w_u", "w_theta", "w_omega", "w_joint_ref", "w_base"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be non-negative")
        if self.barrier_mu < 0 or self.barrier_delta <= 0:
            raise ValueError("barrier parameters must satisfy mu >= 0, delta > 0")
        if np.any(self.w_ee > 0) and self.ee_reference is None:
            raise ValueError("an end-effector reference is required when w_ee > 0")

    @property
    def n_joints(self) -> int:
        return self.model.n_joints

    @property
    def nx(self) -> int:
        return 6 + 2 * self.n_joints

    @property
    def nu(self) -> int:
        return 3 + self.n_joints

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def split_state(self, x):
        n = self.n_joints
        return x[..., 0:3], x[..., 3:6], x[..., 6:6 + n], x[..., 6 + n:6 + 2 * n]


@dataclass
class SolverSettings:
    max_iter: int = 50
    tol: float = 1e-7          # relative cost decrease for convergence
    abs_tol: float = 1e-9
    reg_init: float = 1e-6
    reg_max: float = 1e10
    armijo: float = 1e-4
    line_search_factor: float = 0.5
    line_search_steps: int = 12
    warn_on_degraded: bool = True


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------


def dynamics(x, u, d: OcpDefinition) -> np.ndarray:
    """Continuous-time state derivative."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n = d.n_joints
    k1, k2, k3 = d.kappa
    return np.concatenate([
        u[..., 0:2],
        (-k1 * (x[..., 2] - d.h_des))[..., None],
        (-k2 * x[..., 3])[..., None],
        (-k3 * x[..., 4])[..., None],
        u[..., 2:3],
        x[..., 6 + n:6 + 2 * n],
        u[..., 3:3 + n],
    ], axis=-1)


def dynamics_jacobians(x, u, d: OcpDefinition) -> tuple[np.ndarray, np.ndarray]:
    """``(df/dx, df/du)``; constant because the model is affine."""
    n = d.n_joints
    A = np.zeros((d.nx, d.nx))
    B = np.zeros((d.nx, d.nu))
    A[2, 2], A[3, 3], A[4, 4] = -d.kappa[0], -d.kappa[1], -d.kappa[2]
    A[6:6 + n, 6 + n:] = np.eye(n)
    B[0, 0] = B[1, 1] = B[5, 2] = 1.0
    B[6 + n:, 3:] = np.eye(n)
    return A, B


def rk4_step(x, u, d: OcpDefinition, h: float | None = None) -> np.ndarray:
    h = d.dt if h is None else h
    k1 = dynamics(x, u, d)
    k2 = dynamics(x + 0.5 * h * k1, u, d)
    k3 = dynamics(x + 0.5 * h * k2, u, d)
    k4 = dynamics(x + h * k3, u, d)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_jacobians(x, u, d: OcpDefinition, h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of the RK4 map by chain rule through the four stages."""
    h = d.dt if h is None else h
    I = np.eye(d.nx)
    k1 = dynamics(x, u, d)
    A1, B1 = dynamics_jacobians(x, u, d)
    x2 = x + 0.5 * h * k1
    k2 = dynamics(x2, u, d)
    A2, B2 = dynamics_jacobians(x2, u, d)
    x3 = x + 0.5 * h * k2
    A3, B3 = dynamics_jacobians(x3, u, d)
    k3 = dynamics(x3, u, d)
    A4, B4 = dynamics_jacobians(x + h * k3, u, d)
    K1x, K1u = A1, B1
    K2x, K2u = A2 @ (I + 0.5 * h * K1x), A2 @ (0.5 * h * K1u) + B2
    K3x, K3u = A3 @ (I + 0.5 * h * K2x), A3 @ (0.5 * h * K2u) + B3
    K4x, K4u = A4 @ (I + h * K3x), A4 @ (h * K3u) + B4
    Fx = I + h / 6.0 * (K1x + 2 * K2x + 2 * K3x + K4x)
    Fu = h / 6.0 * (K1u + 2 * K2u + 2 * K3u + K4u)
    return Fx, Fu


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------


def relaxed_barrier(h, mu: float, delta: float):
    """Relaxed log-barrier value, first and second derivative w.r.t. ``h``.

    ``-mu*log(h)`` for ``h > delta``; a quadratic extension below ``delta``
    that matches value, slope and curvature at ``delta``.
    """
    h = np.asarray(h, dtype=float)
    inside = h > delta
    hs = np.where(inside, h, delta)
    log_val = -mu * np.log(hs)
    z = (h - 2.0 * delta) / delta
    quad_val = 0.5 * mu * (z * z - 1.0) - mu * np.log(delta)
    val = np.where(inside, log_val, quad_val)
    d1 = np.where(inside, -mu / hs, mu * (h - 2.0 * delta) / delta ** 2)
    d2 = np.where(inside, mu / hs ** 2, mu / delta ** 2)
    return val, d1, d2


def ee_position_world(x, d: OcpDefinition, with_jacobian: bool = False):
    """World EE position for a batch of states, optionally with d(ee)/dx (..., 3, nx)."""
    x = np.asarray(x, dtype=float)
    p, r, theta, _ = d.split_state(x)
    fr = chain_frames(d.model, theta)
    R, dR = rpy_to_matrix_derivatives(r)
    ee = p + (R @ fr.ee[..., None])[..., 0]
    if not with_jacobian:
        return ee
    J = np.zeros(x.shape[:-1] + (3, d.nx))
    J[..., :, 0:3] = np.eye(3)
    J[..., :, 3:6] = np.swapaxes((dR @ fr.ee[..., None, :, None])[..., 0], -1, -2)
    n = d.n_joints
    J[..., :, 6:6 + n] = R @ fr.ee_jacobian()
    return ee, J


@dataclass
class StageQuadratic:
    """Cost value, gradient and (Gauss-Newton) Hessian blocks per knot."""

    value: np.ndarray
    lx: np.ndarray
    lu: np.ndarray
    lxx: np.ndarray
    luu: np.ndarray
    lux: np.ndarray


def _state_terms(X, T, d: OcpDefinition, derivatives: bool):
    """State part of the running cost, shared with the terminal cost."""
    K = X.shape[0]
    n = d.n_joints
    p, r, theta, omega = d.split_state(X)
    val = np.zeros(K)
    lx = np.zeros((K, d.nx))
    lxx = np.zeros((K, d.nx, d.nx))
    it = slice(6, 6 + n)
    io = slice(6 + n, 6 + 2 * n)

    if np.any(d.w_ee > 0):
        ref = np.stack([np.asarray(d.ee_reference(t), dtype=float) for t in T])
        if derivatives:
            ee, J = ee_position_world(X, d, with_jacobian=True)
        else:
            ee = ee_position_world(X, d)
        e = ee - ref
        val += np.einsum("ki,i,ki->k", e, d.w_ee, e)
        if derivatives:
            WJ = d.w_ee[None, :, None] * J
            lx += 2.0 * np.einsum("ki,kij->kj", e, WJ)
            lxx += 2.0 * np.einsum("kij,kil->kjl", J, WJ)

    dth = theta - d.model.nominal
    val += np.einsum("kj,j,kj->k", dth, d.w_theta, dth) + np.einsum("kj,j,kj->k", omega, d.w_omega, omega)
    if derivatives:
        lx[:, it] += 2.0 * d.w_theta * dth
        lx[:, io] += 2.0 * d.w_omega * omega
        idx_t = np.arange(6, 6 + n)
        idx_o = np.arange(6 + n, 6 + 2 * n)
        lxx[:, idx_t, idx_t] += 2.0 * d.w_theta
        lxx[:, idx_o, idx_o] += 2.0 * d.w_omega

    if d.joint_reference is not None and np.any(d.w_joint_ref > 0):
        jref = np.stack([np.asarray(d.joint_reference(t), dtype=float) for t in T])
        dj = theta - jref
        val += np.einsum("kj,j,kj->k", dj, d.w_joint_ref, dj)
        if derivatives:
            lx[:, it] += 2.0 * d.w_joint_ref * dj
            idx_t = np.arange(6, 6 + n)
            lxx[:, idx_t, idx_t] += 2.0 * d.w_joint_ref

    if d.base_reference is not None and np.any(d.w_base > 0):
        bref = d.base_reference
        db = np.stack([p[:, 0] - bref[0], p[:, 1] - bref[1], r[:, 2] - bref[2]], axis=1)
        val += np.einsum("kj,j,kj->k", db, d.w_base, db)
        if derivatives:
            for col, j in ((0, 0), (1, 1), (5, 2)):
                lx[:, col] += 2.0 * d.w_base[j] * db[:, j]
                lxx[:, col, col] += 2.0 * d.w_base[j]

    if d.barrier_mu > 0 and n:
        lo, hi = d.model.lower, d.model.upper
        v1, g1, h1 = relaxed_barrier(theta - lo, d.barrier_mu, d.barrier_delta)
        v2, g2, h2 = relaxed_barrier(hi - theta, d.barrier_mu, d.barrier_delta)
        val += v1.sum(axis=1) + v2.sum(axis=1)
        if derivatives:
            lx[:, it] += g1 - g2
            idx_t = np.arange(6, 6 + n)
            lxx[:, idx_t, idx_t] += h1 + h2
    return val, lx, lxx


def stage_cost(X, U, T, d: OcpDefinition, derivatives: bool = True) -> StageQuadratic:
    """Running cost ``l(x, u, t)`` (not yet multiplied by dt) for K knots."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    val, lx, lxx = _state_terms(X, T, d, derivatives)
    val = val + np.einsum("kj,j,kj->k", U, d.w_u, U)
    K = X.shape[0]
    if not derivatives:
        return StageQuadratic(val, None, None, None, None, None)
    lu = 2.0 * d.w_u * U
    luu = np.broadcast_to(np.diag(2.0 * d.w_u), (K, d.nu, d.nu)).copy()
    lux = np.zeros((K, d.nu, d.nx))
    return StageQuadratic(val, lx, lu, lxx, luu, lux)


def cost(x, u, t, d: OcpDefinition) -> float:
    """Running cost at one point."""
    return float(stage_cost(x, u, [t], d, derivatives=False).value[0])


def cost_gradient(x, u, t, d: OcpDefinition) -> tuple[np.ndarray, np.ndarray]:
    q = stage_cost(x, u, [t], d)
    return q.lx[0], q.lu[0]


def cost_terminal(x, d: OcpDefinition, t: float | None = None) -> float:
    """State part of the running cost at the final time."""
    t = d.horizon if t is None else t
    val, _, _ = _state_terms(np.atleast_2d(np.asarray(x, dtype=float)), np.array([t]), d, False)
    return float(val[0])


def trajectory_cost(X, U, T, d: OcpDefinition) -> float:
    run = stage_cost(X[:-1], U, T[:-1], d, derivatives=False).value
    term, _, _ = _state_terms(X[-1:], T[-1:], d, False)
    return float(d.dt * run.sum() + term[0])


# ---------------------------------------------------------------------------
# plan container
# ---------------------------------------------------------------------------


@dataclass
class PlanTrajectory:
    times: np.ndarray        # (K+1,)
    states: np.ndarray       # (K+1, nx)
    inputs: np.ndarray       # (K, nu), held constant over each interval
    gains: np.ndarray        # (K, nu, nx)
    cost: float
    iterations: int
    status: str = CONVERGED
    cost_history: list = field(default_factory=list)
    solve_time: float = 0.0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_joints(self) -> int:
        return (self.states.shape[1] - 6) // 2

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def input_at(self, t: float) -> np.ndarray:
        """Zero-order-hold input at absolute time ``t`` (clamped to the horizon)."""
        k = int(np.floor((t - self.times[0]) / self.dt + 1e-9))
        return self.inputs[min(max(k, 0), len(self.inputs) - 1)]

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
            "gains": self.gains.tolist(),
            "cost": self.cost,
            "iterations": self.iterations,
            "status": self.status,
            "cost_history": list(self.cost_history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanTrajectory":
        states = np.asarray(d["states"], dtype=float)
        inputs = np.asarray(d["inputs"], dtype=float)
        gains = d.get("gains")
        gains = np.zeros((inputs.shape[0], inputs.shape[1], states.shape[1])) if gains is None else np.asarray(gains, dtype=float)
        return cls(np.asarray(d["times"], dtype=float), states, inputs, gains,
                   float(d["cost"]), int(d["iterations"]), d.get("status", CONVERGED),
                   list(d.get("cost_history", [])))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def discrete_affine(d: OcpDefinition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Fx, Fu, c)`` with ``rk4_step(x, u) == Fx x + Fu u + c`` (exact for affine dynamics)."""
    Fx, Fu = rk4_jacobians(np.zeros(d.nx), np.zeros(d.nu), d)
    return Fx, Fu, rk4_step(np.zeros(d.nx), np.zeros(d.nu), d)


def _rollout(d: OcpDefinition, x0, U, affine=None):
    Fx, Fu, c = affine or discrete_affine(d)
    X = np.empty((U.shape[0] + 1, d.nx))
    X[0] = x0
    for k in range(U.shape[0]):
        X[k + 1] = Fx @ X[k] + Fu @ U[k] + c
    return X


def _backward_pass(Fx, Fu, q: StageQuadratic, term_x, term_xx, dt, reg):
    K = q.lx.shape[0]
    nx, nu = Fx.shape[0], Fu.shape[1]
    ks = np.zeros((K, nu))
    Ks = np.zeros((K, nu, nx))
    Vx, Vxx = term_x, term_xx
    dV1 = dV2 = 0.0
    FxT, FuT = Fx.T, Fu.T
    for k in range(K - 1, -1, -1):
        Qx = dt * q.lx[k] + FxT @ Vx
        Qu = dt * q.lu[k] + FuT @ Vx
        VF = Vxx @ Fx
        Qxx = dt * q.lxx[k] + FxT @ VF
        Qux = dt * q.lux[k] + FuT @ VF
        Quu = dt * q.luu[k] + FuT @ Vxx @ Fu
        Quu_r = Quu + reg * np.eye(nu)
        try:
            factor = cho_factor(Quu_r, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        sol = cho_solve(factor, np.column_stack([Qu, Qux]), check_finite=False)
        kk, KK = -sol[:, 0], -sol[:, 1:]
        ks[k], Ks[k] = kk, KK
        dV1 += kk @ Qu
        dV2 += 0.5 * kk @ Quu @ kk
        Vx = Qx + KK.T @ Quu @ kk + KK.T @ Qu + Qux.T @ kk
        Vxx = Qxx + KK.T @ Quu @ KK + KK.T @ Qux + Qux.T @ KK
        Vxx = 0.5 * (Vxx + Vxx.T)
    return ks, Ks, dV1, dV2


def solve(d: OcpDefinition, x0, warm_start=None, t0: float = 0.0,
          settings: SolverSettings | None = None) -> PlanTrajectory:
    """Solve the OCP from ``x0`` at absolute time ``t0``.

    ``warm_start`` may be a :class:`PlanTrajectory` or an input array of shape
    ``(K, nu)``. Returns the best trajectory found; ``status`` is DEGRADED
    when the iteration budget ran out before the cost settled.
    """
    settings = settings or SolverSettings()
    started = _time.perf_counter()
    x0 = np.asarray(x0, dtype=float).reshape(d.nx)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    K = d.n_steps
    T = t0 + d.dt * np.arange(K + 1)
    if warm_start is None:
        U = np.zeros((K, d.nu))
    else:
        U = np.array(warm_start.inputs if isinstance(warm_start, PlanTrajectory) else warm_start, dtype=float)
        if U.shape != (K, d.nu):
            raise ValueError(f"warm start inputs must have shape {(K, d.nu)}, got {U.shape}")

    affine = discrete_affine(d)
    X = _rollout(d, x0, U, affine)
    J = trajectory_cost(X, U, T, d)
    history = [J]
    if not (np.all(np.isfinite(X)) and np.isfinite(J)):
        raise SolverDivergence("initial rollout is not finite", 0, history)

    # affine dynamics: the discrete Jacobians are identical at every knot
    Fx, Fu, c = affine
    reg = settings.reg_init
    gains = np.zeros((K, d.nu, d.nx))
    status = DEGRADED
    it = 0
    while it < settings.max_iter:
        it += 1
        q = stage_cost(X[:-1], U, T[:-1], d)
        _, tx, txx = _state_terms(X[-1:], T[-1:], d, True)
        bp = None
        while bp is None:
            bp = _backward_pass(Fx, Fu, q, tx[0], txx[0], d.dt, reg)
            if bp is None:
                reg = max(10.0 * reg, 1e-8)
                if reg > settings.reg_max:
                    raise SolverDivergence("backward pass failed to regularize", it, history)
        ks, Ks, dV1, dV2 = bp
        expected_full = -(dV1 + dV2)
        if expected_full < settings.abs_tol + settings.tol * abs(J):
            gains = Ks
            status = CONVERGED
            break

        accepted = False
        alpha = 1.0
        for _ in range(settings.line_search_steps):
            Xn = np.empty_like(X)
            Un = np.empty_like(U)
            Xn[0] = x0
            for k in range(K):
                Un[k] = U[k] + alpha * ks[k] + Ks[k] @ (Xn[k] - X[k])
                Xn[k + 1] = Fx @ Xn[k] + Fu @ Un[k] + c
            if np.all(np.isfinite(Xn)):
                Jn = trajectory_cost(Xn, Un, T, d)
                expected = -(alpha * dV1 + alpha * alpha * dV2)
                if np.isfinite(Jn) and Jn <= J and (J - Jn) >= settings.armijo * expected:
                    accepted = True
                    break
            alpha *= settings.line_search_factor

        if not accepted:
            reg = max(10.0 * reg, 1e-8)
            if reg > settings.reg_max:
                break
            continue

        dJ = J - Jn
        X, U, J = Xn, Un, Jn
        gains = Ks
        history.append(J)
        reg = max(settings.reg_init, reg / 10.0)
        if dJ < settings.abs_tol + settings.tol * abs(J):
            status = CONVERGED
            break

    if status == DEGRADED and settings.warn_on_degraded:
        log.warning("SLQ stopped after %d iterations without convergence (cost %.6g)", it, J)
    return PlanTrajectory(T, X, U, gains, J, it, status, history, _time.perf_counter() - started)


# ---------------------------------------------------------------------------
# receding horizon
# ---------------------------------------------------------------------------


class RecedingHorizonController:
    """Re-solves the OCP from measured states, warm-starting from the last plan."""

    def __init__(self, definition: OcpDefinition, settings: SolverSettings | None = None):
        self.definition = definition
        self.settings = settings or SolverSettings()
        self.plan: PlanTrajectory | None = None

    def reset(self):
        self.plan = None

    def _shifted_inputs(self, t: float) -> np.ndarray | None:
        if self.plan is None:
            return None
        d = self.definition
        times = t + d.dt * np.arange(d.n_steps)
        return np.stack([self.plan.input_at(tk) for tk in times])

    def step(self, x_measured, t: float) -> tuple[np.ndarray, PlanTrajectory]:
        warm = self._shifted_inputs(t)
        self.plan = solve(self.definition, x_measured, warm, t0=t, settings=self.settings)
        return self.plan.inputs[0].copy(), self.plan


def with_references(d: OcpDefinition, **changes) -> OcpDefinition:
    return replace(d, **changes)
