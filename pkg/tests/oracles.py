"""Reference implementations used only by the tests.

They are written from first principles with different building blocks than
the package (homogeneous transforms, scipy rotations, Jacobian sums, dense
Riccati algebra) so that agreement is evidence of correctness.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from wrenchmpc.spatial import Joint, Link, Pose, RobotModel


def homogeneous(R, p):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def link_kinematics(model, q, dq):
    """Per joint: origin o_j, axis z_j, link rotation R_j (base frame) via 4x4 products."""
    T = homogeneous(model.mount.rotation, model.mount.position)
    origins, axes, rots = [], [], []
    for j, joint in enumerate(model.joints):
        T = T @ homogeneous(joint.origin.rotation, joint.origin.position)
        origins.append(T[:3, 3].copy())
        axes.append(T[:3, :3] @ joint.axis)
        T = T @ homogeneous(Rotation.from_rotvec(joint.axis * q[j]).as_matrix(), np.zeros(3))
        rots.append(T[:3, :3].copy())
    return np.array(origins), np.array(axes), np.array(rots)


def newton_euler_oracle(model, R_base, q, dq, ddq):
    """Joint torques and the reaction wrench on the base (about the base origin).

    Link accelerations come from Jacobian sums ``J ddq + Jdot dq`` rather than
    a forward recursion; forces are summed link by link.
    """
    q, dq, ddq = (np.asarray(v, dtype=float) for v in (q, dq, ddq))
    g = R_base.T @ model.gravity
    o, z, Rl = link_kinematics(model, q, dq)
    n = len(model.joints)
    # angular velocity of link i and of the parent of joint j
    omega = [sum((z[k] * dq[k] for k in range(i + 1)), np.zeros(3)) for i in range(n)]
    omega_parent = [omega[j - 1] if j > 0 else np.zeros(3) for j in range(n)]
    zdot = [np.cross(omega_parent[j], z[j]) for j in range(n)]
    # velocity of joint origin j (a point on its parent link)
    odot = [sum((np.cross(z[k], o[j] - o[k]) * dq[k] for k in range(j)), np.zeros(3)) for j in range(n)]

    F, N, C = [], [], []
    for i, link in enumerate(model.links):
        # link frame sits at the joint origin, rotated by the joint
        c = o[i] + Rl[i] @ link.com
        cdot = sum((np.cross(z[k], c - o[k]) * dq[k] for k in range(i + 1)), np.zeros(3))
        acc = np.zeros(3)
        alpha = np.zeros(3)
        for j in range(i + 1):
            acc += np.cross(z[j], c - o[j]) * ddq[j]
            acc += (np.cross(zdot[j], c - o[j]) + np.cross(z[j], cdot - odot[j])) * dq[j]
            alpha += z[j] * ddq[j] + zdot[j] * dq[j]
        Iw = Rl[i] @ link.inertia @ Rl[i].T
        F.append(link.mass * (acc - g))
        N.append(Iw @ alpha + np.cross(omega[i], Iw @ omega[i]))
        C.append(c)

    tau = np.array([z[j] @ sum((np.cross(C[i] - o[j], F[i]) + N[i] for i in range(j, n)), np.zeros(3))
                    for j in range(n)])
    f = sum(F, np.zeros(3))
    m = sum((np.cross(C[i], F[i]) + N[i] for i in range(n)), np.zeros(3))
    return tau, np.concatenate([-f, -m])


def random_chain(rng, n_links, zero_mass=False):
    links, joints = [], []
    for i in range(n_links):
        axis = rng.normal(size=3)
        A = rng.normal(size=(3, 3)) * 0.1
        inertia = np.zeros((3, 3)) if zero_mass else A @ A.T + 1e-3 * np.eye(3)
        mass = 0.0 if zero_mass else rng.uniform(0.2, 4.0)
        links.append(Link(f"l{i}", mass, rng.uniform(-0.2, 0.2, 3), inertia))
        origin = Pose.from_rpy(rng.uniform(-0.3, 0.3, 3), rng.uniform(-np.pi, np.pi, 3))
        joints.append(Joint(f"j{i}", axis, origin, -np.pi, np.pi, 10.0, 0.0))
    mount = Pose.from_rpy(rng.uniform(-0.3, 0.3, 3), rng.uniform(-0.5, 0.5, 3))
    return RobotModel(links, joints, mount, rng.uniform(-0.1, 0.1, 3))


def rk4_affine_discretization(A, B, c, h):
    """Exact RK4 map of ``xdot = A x + B u + c`` with u held: x+ = Ad x + Bd u + cd."""
    n = A.shape[0]
    I = np.eye(n)
    S = h * I + h ** 2 / 2 * A + h ** 3 / 6 * A @ A + h ** 4 / 24 * A @ A @ A
    Ad = I + S @ A
    return Ad, S @ B, S @ c


def affine_lqr(Ad, Bd, cd, Q, q, R, Qf, qf, x0, K, dt):
    """Minimise dt*sum(x'Qx + 2q'x + u'Ru) + x_K'Qf x_K + 2 qf'x_K via an augmented state [x, 1]."""
    n, m = Bd.shape
    Aa = np.block([[Ad, cd[:, None]], [np.zeros((1, n)), np.ones((1, 1))]])
    Ba = np.vstack([Bd, np.zeros((1, m))])
    Qa = np.block([[Q, q[:, None]], [q[None, :], np.zeros((1, 1))]]) * dt
    P = np.block([[Qf, qf[:, None]], [qf[None, :], np.zeros((1, 1))]])
    gains = []
    for _ in range(K):
        G = R * dt + Ba.T @ P @ Ba
        L = np.linalg.solve(G, Ba.T @ P @ Aa)
        P = Qa + Aa.T @ P @ (Aa - Ba @ L)
        P = 0.5 * (P + P.T)
        gains.append(L)
    gains.reverse()
    xa = np.append(x0, 1.0)
    X, U = [xa[:n].copy()], []
    for L in gains:
        u = -L @ xa
        xa = Aa @ xa + Ba @ u
        U.append(u)
        X.append(xa[:n].copy())
    return np.array(X), np.array(U)


def _com_and_omega(model, q, dq):
    o, z, Rl = link_kinematics(model, q, dq)
    out = []
    for i, link in enumerate(model.links):
        c = o[i] + Rl[i] @ link.com
        v = sum((np.cross(z[k], c - o[k]) * dq[k] for k in range(i + 1)), np.zeros(3))
        w = sum((z[k] * dq[k] for k in range(i + 1)), np.zeros(3))
        out.append((c, v, w, Rl[i] @ link.inertia @ Rl[i].T))
    return out


def kinetic_energy(model, q, dq):
    return sum(0.5 * link.mass * v @ v + 0.5 * w @ I @ w
               for link, (c, v, w, I) in zip(model.links, _com_and_omega(model, q, dq)))


def potential_energy(model, R_base, q):
    g = R_base.T @ model.gravity
    return -sum(link.mass * g @ c for link, (c, _, _, _) in zip(model.links, _com_and_omega(model, q, q * 0)))


def lagrangian_torques(model, R_base, q, dq, ddq, h=1e-5):
    """tau = M ddq + Mdot dq - dT/dq + dV/dq with M from the kinetic energy and derivatives by central differences."""
    n = len(q)
    E = np.eye(n)

    def mass_matrix(qq):
        # T is quadratic in dq, so polarization recovers M exactly
        M = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                M[i, j] = kinetic_energy(model, qq, E[i] + E[j]) - kinetic_energy(model, qq, E[i]) \
                    - kinetic_energy(model, qq, E[j])
        return M

    M = mass_matrix(q)
    Mdot = sum((mass_matrix(q + h * E[k]) - mass_matrix(q - h * E[k])) / (2 * h) * dq[k] for k in range(n))
    dT = np.array([(kinetic_energy(model, q + h * E[k], dq) - kinetic_energy(model, q - h * E[k], dq)) / (2 * h)
                   for k in range(n)])
    dV = np.array([(potential_energy(model, R_base, q + h * E[k]) - potential_energy(model, R_base, q - h * E[k]))
                   / (2 * h) for k in range(n)])
    return M @ ddq + Mdot @ dq - dT + dV
