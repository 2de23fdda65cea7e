"""Kinematic tree of the mobile manipulator and its recursive propagation.

The model is a tree of frames rooted at the world frame. Every non-root
frame hangs off its parent through a fixed offset followed by one joint
displacement ``exp([s] q)``. The two closed suspension chains are cut at the
rod eye: the tree keeps both branches (``Tc_R`` on the bogie and
``Tcb_R`` at the end of the actuator) and the dependent joint coordinates are
filled in from the actuator position by :mod:`articulated_suspension.chain`.

Generalised coordinate layout (length ``6 + n_arm + 4 + 8``)::

    [q_fb(6) | q_arm(n_arm) | q_w(4: FR FL RR RL) | R: th th1 x th2 | L: th th1 x th2]

The floating base chart is prismatic x, y, z (world axes) followed by
revolute z, y, x.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from . import chain as ch
from . import spatial as sp
from .errors import UnknownFrame

FIXED, REVOLUTE, PRISMATIC = 0, 1, 2
_KINDS = {"fixed": FIXED, "revolute": REVOLUTE, "prismatic": PRISMATIC}

SIDES = ("R", "L")
WHEELS = ("FR", "FL", "RR", "RL")
GRAVITY = 9.81

_E = np.eye(6)
_WHEEL_SCREW = np.array([0.0, 0.0, 0.0, 0.0, 0.0, -1.0])  # bogie z is base -y


def _offset(spec):
    if spec is None:
        return np.eye(4)
    xyz = np.asarray(spec.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
    r, p, y = spec.get("rpy", [0.0, 0.0, 0.0])
    return sp.transform(sp.rot_z(y) @ sp.rot_y(p) @ sp.rot_x(r), xyz)


def _inertia(spec):
    I = spec.get("inertia")
    if I is None:
        I = np.diag(spec["diag"])
    return sp.make_inertia(spec["mass"], spec.get("com", [0.0, 0.0, 0.0]), np.asarray(I, float))


@dataclass
class Model:
    """Immutable-after-load description of the platform."""

    name: str
    names: list
    parent: np.ndarray
    kind: np.ndarray
    screw: np.ndarray
    offset: np.ndarray
    coord: np.ndarray
    body_frame: np.ndarray
    body_inertia: np.ndarray
    body_group: list
    chains: dict
    n_arm: int
    wheel_radius: float
    x_min: np.ndarray
    x_max: np.ndarray
    x_nominal: np.ndarray
    gravity: float = GRAVITY
    index: dict = field(init=False)
    raw: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.names)}
        groups = np.array(self.body_group)
        self.manipulator_mask = groups == "manipulator"
        self.platform_mask = ~self.manipulator_mask
        self.n_coords = 6 + self.n_arm + 4 + 8

    def frame(self, name):
        try:
            return self.index[name]
        except KeyError:
            raise UnknownFrame(name) from None

    @property
    def total_mass(self):
        return float(self.body_inertia[:, 0, 0].sum())

    def chain_coords(self, side):
        base = 6 + self.n_arm + 4 + 4 * SIDES.index(side)
        return base, base + 1, base + 2, base + 3

    def wheel_coord(self, wheel):
        return 6 + self.n_arm + WHEELS.index(wheel)

    @property
    def half_track(self):
        return abs(self.chains["R"].pivot[1] - self.chains["L"].pivot[1]) / 2

    @property
    def pivot_height(self):
        """Height of the bogie pivots above flat ground with level bogies."""
        f = self.offset[self.frame("wFR")][:3, 3]
        r = self.offset[self.frame("wRR")][:3, 3]
        return self.wheel_radius - 0.5 * (f[1] + r[1])


def load_model(path=None):
    """Load a model config (JSON); the bundled reference platform by default."""
    if path is None:
        text = resources.files("articulated_suspension.data").joinpath(
            "reference_platform.json").read_text()
    else:
        text = Path(path).read_text()
    return build_model(json.loads(text))


def build_model(cfg):
    names, parent, kind, screw, offset, coord = [], [], [], [], [], []
    body_frame, body_inertia, body_group = [], [], []
    n_arm = int(cfg["manipulator_dof"])
    arm0 = 6
    wheel0 = 6 + n_arm
    chain0 = wheel0 + 4

    def add(name, par, k, s=None, T=None, c=-1):
        if name in names:
            raise ValueError(f"duplicate frame {name!r}")
        names.append(name)
        parent.append(-1 if par is None else names.index(par))
        kind.append(k)
        screw.append(np.zeros(6) if s is None else np.asarray(s, float))
        offset.append(np.eye(4) if T is None else T)
        coord.append(c)

    def body(frame, spec, group):
        body_frame.append(names.index(frame))
        body_inertia.append(_inertia(spec))
        body_group.append(group)

    add("world", None, FIXED)
    chart = [("fb_x", PRISMATIC, 0), ("fb_y", PRISMATIC, 1), ("fb_z", PRISMATIC, 2),
             ("fb_yaw", REVOLUTE, 5), ("fb_pitch", REVOLUTE, 4), ("fb", REVOLUTE, 3)]
    prev = "world"
    for i, (n, k, axis) in enumerate(chart):
        add(n, prev, k, _E[axis], c=i)
        prev = n
    body("fb", cfg["base"]["body"], "platform")

    susp = cfg["suspension"]
    chains = {}
    for side, key in zip(SIDES, ("right", "left")):
        g = ch.ChainGeometry(susp["L_a"], susp["L_b"], susp["L_c0"], susp["L_c"],
                             susp["alpha"], np.asarray(susp["pivots"][key], float))
        chains[side] = g
        c = chain0 + 4 * SIDES.index(side)
        add(f"B1_{side}", "fb", REVOLUTE, ch.S_Z, g.T_fb_B1, c)
        add(f"Tc_{side}", f"B1_{side}", FIXED, T=g.T_B1_Tc)
        for pos in ("F", "R"):
            wheel = pos + side
            xyz = np.asarray(susp["wheels"]["front" if pos == "F" else "rear"], float)
            add(f"w{wheel}", f"B1_{side}", REVOLUTE, _WHEEL_SCREW, sp.translation(xyz),
                wheel0 + WHEELS.index(wheel))
        add(f"B3_{side}", "fb", REVOLUTE, ch.S_Z, g.T_fb_B3, c + 1)
        add(f"B4_{side}", f"B3_{side}", PRISMATIC, ch.S_X, g.T_B3_B4, c + 2)
        add(f"Tcb_{side}", f"B4_{side}", REVOLUTE, ch.S_Z, g.T_B4_Tc, c + 3)
        body(f"B1_{side}", susp["bodies"]["bogie"], "platform")
        body(f"B3_{side}", susp["bodies"]["cylinder"], "platform")
        body(f"B4_{side}", susp["bodies"]["piston"], "platform")
        for pos in ("F", "R"):
            body(f"w{pos}{side}", susp["wheels"]["body"], "platform")

    for f in cfg["frames"]:
        k = _KINDS[f.get("kind", "fixed")]
        c = -1
        if k != FIXED:
            group, idx = f["coordinate"].split(":")
            if group != "arm":
                raise ValueError(f"unsupported coordinate group {group!r}")
            c = arm0 + int(idx)
        s = f.get("screw")
        if k != FIXED and not sp.is_unit_screw(s):
            raise ValueError(f"frame {f['name']!r}: screw must be unit")
        add(f["name"], f["parent"], k, s, _offset(f.get("offset")), c)
    for b in cfg.get("bodies", []):
        body(b["frame"], b, b.get("group", "manipulator"))
    for required in ("m", "tcp"):
        if required not in names:
            raise ValueError(f"model config must define frame {required!r}")

    return Model(
        name=cfg.get("name", "model"),
        names=names,
        parent=np.array(parent, dtype=np.int64),
        kind=np.array(kind, dtype=np.int64),
        screw=np.array(screw),
        offset=np.array(offset),
        coord=np.array(coord, dtype=np.int64),
        body_frame=np.array(body_frame, dtype=np.int64),
        body_inertia=np.array(body_inertia),
        body_group=body_group,
        chains=chains,
        n_arm=n_arm,
        wheel_radius=float(cfg["wheel_radius"]),
        x_min=np.full(2, float(susp["x_min"])),
        x_max=np.full(2, float(susp["x_max"])),
        x_nominal=np.full(2, float(susp["x_nominal"])),
        gravity=float(cfg.get("gravity", GRAVITY)),
        raw=cfg,
    )


@dataclass(frozen=True)
class PlatformState:
    """Positions, rates and accelerations of every independent coordinate.

    Suspension vectors are ``[right, left]``; wheels ``[FR, FL, RR, RL]``.
    """

    q_fb: np.ndarray
    q_arm: np.ndarray
    q_w: np.ndarray
    x: np.ndarray
    qd_fb: np.ndarray = None
    qd_arm: np.ndarray = None
    qd_w: np.ndarray = None
    xd: np.ndarray = None
    qdd_fb: np.ndarray = None
    qdd_arm: np.ndarray = None
    qdd_w: np.ndarray = None
    xdd: np.ndarray = None

    def __post_init__(self):
        for name in ("q_fb", "q_arm", "q_w", "x"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("q_fb", "q_arm", "q_w", "x"):
            ref = getattr(self, name)
            for prefix in ("qd", "qdd") if name != "x" else ("xd", "xdd"):
                attr = prefix + name[1:] if name != "x" else prefix
                val = getattr(self, attr)
                val = np.zeros_like(ref) if val is None else np.asarray(val, dtype=float)
                object.__setattr__(self, attr, val)

    def replace(self, **kw):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return PlatformState(**d)


def expand(model, state):
    """Full tree coordinate vectors ``(q, qd, qdd)`` plus the chain states."""
    n = model.n_coords
    q, qd, qdd = np.zeros(n), np.zeros(n), np.zeros(n)
    a = 6 + model.n_arm
    q[:6], qd[:6], qdd[:6] = state.q_fb, state.qd_fb, state.qdd_fb
    q[6:a], qd[6:a], qdd[6:a] = state.q_arm, state.qd_arm, state.qdd_arm
    q[a:a + 4], qd[a:a + 4], qdd[a:a + 4] = state.q_w, state.qd_w, state.qdd_w
    states = {}
    for j, side in enumerate(SIDES):
        cs = ch.chain_state(model.chains[side], state.x[j], state.xd[j], state.xdd[j])
        states[side] = cs
        idx = list(model.chain_coords(side))
        th, th1, th2 = cs.theta
        q[idx] = (th, th1, cs.x, th2)
        qd[idx] = cs.rates
        qdd[idx] = cs.accels
    return q, qd, qdd, states


@njit(cache=True)
def _propagate(parent, kind, screw, offset, coord, q, qd, qdd, root_acc):
    n = parent.shape[0]
    T_world = np.empty((n, 4, 4))
    T_local = np.empty((n, 4, 4))
    nu = np.zeros((n, 6))
    acc = np.zeros((n, 6))
    E = np.empty((4, 4))
    T_world[0] = np.eye(4)
    T_local[0] = np.eye(4)
    acc[0] = root_acc
    for i in range(1, n):
        p = parent[i]
        s = screw[i]
        if kind[i] == 0:
            T_local[i] = offset[i]
            dq = 0.0
            ddq = 0.0
        else:
            c = coord[i]
            sp.exp6_into(s, q[c], E)
            sp.compose_into(offset[i], E, T_local[i])
            dq = qd[c]
            ddq = qdd[c]
        T = T_local[i]
        sp.compose_into(T_world[p], T, T_world[i])
        sp.adjoint_inv_apply_into(T, nu[p], nu[i])
        sp.adjoint_inv_apply_into(T, acc[p], acc[i])
        if dq != 0.0 or ddq != 0.0:
            v = nu[i]
            for k in range(6):
                v[k] += s[k] * dq
                acc[i, k] += s[k] * ddq
            # [nu, s] dq
            a = acc[i]
            a[0] += (v[4] * s[2] - v[5] * s[1] + v[1] * s[5] - v[2] * s[4]) * dq
            a[1] += (v[5] * s[0] - v[3] * s[2] + v[2] * s[3] - v[0] * s[5]) * dq
            a[2] += (v[3] * s[1] - v[4] * s[0] + v[0] * s[4] - v[1] * s[3]) * dq
            a[3] += (v[4] * s[5] - v[5] * s[4]) * dq
            a[4] += (v[5] * s[3] - v[3] * s[5]) * dq
            a[5] += (v[3] * s[4] - v[4] * s[3]) * dq
    return T_world, T_local, nu, acc


@njit(cache=True)
def _poses(parent, kind, screw, offset, coord, q):
    """World poses only; the position part of :func:`_propagate`."""
    n = parent.shape[0]
    T_world = np.empty((n, 4, 4))
    T_local = np.empty((4, 4))
    E = np.empty((4, 4))
    T_world[0] = np.eye(4)
    for i in range(1, n):
        if kind[i] == 0:
            sp.compose_into(T_world[parent[i]], offset[i], T_world[i])
        else:
            sp.exp6_into(screw[i], q[coord[i]], E)
            sp.compose_into(offset[i], E, T_local)
            sp.compose_into(T_world[parent[i]], T_local, T_world[i])
    return T_world


@njit(cache=True)
def _body_wrenches(body_frame, inertia, nu, acc):
    nb = body_frame.shape[0]
    F = np.empty((nb, 6))
    for b in range(nb):
        i = body_frame[b]
        sp.body_wrench_into(inertia[b], nu[i], acc[i], F[b])
    return F


@njit(cache=True)
def _project_wrenches(T_world, target, body_frame, F, mask):
    """Sum of body wrenches transported into frame ``target``."""
    world = np.zeros(6)
    for b in range(body_frame.shape[0]):
        if mask[b]:
            sp.coadjoint_accumulate(T_world[body_frame[b]], F[b], world)
    out = np.zeros(6)
    sp.coadjoint_accumulate(sp.inverse(T_world[target]), world, out)
    return out


@njit(cache=True)
def _backward_pass(parent, kind, screw, coord, T_local, body_frame, F, n_coords):
    n = parent.shape[0]
    Ftot = np.zeros((n, 6))
    for b in range(body_frame.shape[0]):
        Ftot[body_frame[b]] += F[b]
    tau = np.zeros(n_coords)
    for i in range(n - 1, 0, -1):
        if kind[i] != 0:
            tau[coord[i]] = np.sum(screw[i] * Ftot[i])
        sp.coadjoint_accumulate(T_local[i], Ftot[i], Ftot[parent[i]])
    return tau


class Kinematics:
    """Result of one propagation pass over the tree.

    Twists and accelerations are body quantities in each frame's own
    coordinates; accelerations include the fictitious upward gravity term
    when ``gravity`` was on.
    """

    def __init__(self, model, state, gravity=True):
        self.model = model
        self.state = state
        q, qd, qdd, self.chain_states = expand(model, state)
        self.q, self.qd, self.qdd = q, qd, qdd
        self.root_acc = np.zeros(6)
        if gravity:
            self.root_acc[2] = model.gravity
        self.T_world, self.T_local, self.nu, self.acc = _propagate(
            model.parent, model.kind, model.screw, model.offset, model.coord,
            q, qd, qdd, self.root_acc)
        self._wrenches = None

    def pose(self, name):
        return self.T_world[self.model.frame(name)]

    def twist(self, name):
        return self.nu[self.model.frame(name)]

    def accel(self, name):
        return self.acc[self.model.frame(name)]

    def relative(self, a, b):
        """``T_ab``: pose of frame b expressed in frame a."""
        return sp.inverse(self.pose(a)) @ self.pose(b)

    def gravity_accel(self, name):
        """The part of :meth:`accel` due to the root gravity term."""
        R = self.pose(name)[:3, :3]
        out = np.zeros(6)
        out[:3] = R.T @ self.root_acc[:3]
        return out

    @property
    def wrenches(self):
        if self._wrenches is None:
            m = self.model
            self._wrenches = _body_wrenches(m.body_frame, m.body_inertia, self.nu, self.acc)
        return self._wrenches

    def total_wrench(self, frame="m", mask=None):
        m = self.model
        if mask is None:
            mask = m.manipulator_mask
        return _project_wrenches(self.T_world, m.frame(frame), m.body_frame,
                                 self.wrenches, np.asarray(mask))

    def joint_forces(self):
        m = self.model
        return _backward_pass(m.parent, m.kind, m.screw, m.coord, self.T_local,
                              m.body_frame, self.wrenches, m.n_coords)


def forward_kinematics(model, state):
    k = Kinematics(model, state, gravity=False)
    return {n: k.T_world[i] for i, n in enumerate(model.names)}


def propagate_twist(model, state):
    k = Kinematics(model, state, gravity=False)
    return {n: k.nu[i] for i, n in enumerate(model.names)}


def propagate_accel(model, state, gravity=True):
    k = Kinematics(model, state, gravity=gravity)
    return {n: k.acc[i] for i, n in enumerate(model.names)}


def total_wrench_at(model, state, frame="m"):
    """Manipulator wrench summed over its bodies and expressed at ``frame``."""
    return Kinematics(model, state).total_wrench(frame)


def arm_inverse_dynamics(model, state):
    """Joint forces/torques of the manipulator chain (including gravity)."""
    tau = Kinematics(model, state).joint_forces()
    return tau[6:6 + model.n_arm]


@dataclass(frozen=True)
class ChassisMotion:
    """Planar motion of the chassis frame over flat ground."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    speed: float = 0.0
    yaw_rate: float = 0.0
    accel: float = 0.0
    yaw_accel: float = 0.0

    def as_array(self):
        return np.array([self.x, self.y, self.yaw, self.speed, self.yaw_rate,
                         self.accel, self.yaw_accel], dtype=float)


def wheel_motion(model, qd_w):
    """Forward speed and yaw rate of skid steering from wheel rates."""
    r = model.wheel_radius
    fr, fl, rr, rl = qd_w
    right, left = 0.5 * (fr + rr) * r, 0.5 * (fl + rl) * r
    return 0.5 * (right + left), (right - left) / (2 * model.half_track)


@njit(cache=True)
def _placement(d, height, p, dp, ddp, chassis):
    """Floating-base coordinates and derivatives for flat-ground placement.

    ``chassis`` is ``[x, y, yaw, speed, yaw_rate, accel, yaw_accel]``; ``d``
    is the base-frame offset from the pivot midpoint to the base origin.
    """
    yaw, dyaw, ddyaw = chassis[2], chassis[4], chassis[6]
    v, a = chassis[3], chassis[5]
    EY = sp.skew(np.array([0.0, 1.0, 0.0]))
    EZ = sp.skew(np.array([0.0, 0.0, 1.0]))
    Rz, Ry = sp.rot_z(yaw), sp.rot_y(p)
    mm = sp.mm
    R = mm(Rz, Ry)
    ZR = mm(mm(Rz, EZ), Ry)
    RY = mm(R, EY)
    Rd = ZR * dyaw + RY * dp
    Rdd = (mm(mm(Rz, mm(EZ, EZ)), Ry) * dyaw ** 2 + ZR * ddyaw
           + 2.0 * mm(ZR, EY) * dyaw * dp + mm(RY, EY) * dp ** 2 + RY * ddp)
    cy, sy = np.cos(yaw), np.sin(yaw)
    q = np.zeros(6)
    qd = np.zeros(6)
    qdd = np.zeros(6)
    q[:3] = np.array([chassis[0], chassis[1], height]) + sp.mv(R, d)
    qd[:3] = np.array([v * cy, v * sy, 0.0]) + sp.mv(Rd, d)
    qdd[:3] = np.array([a * cy - v * dyaw * sy, a * sy + v * dyaw * cy, 0.0]) + sp.mv(Rdd, d)
    q[3], q[4] = yaw, p
    qd[3], qd[4] = dyaw, dp
    qdd[3], qdd[4] = ddyaw, ddp
    return q, qd, qdd


def flat_ground_state(model, x, xd=(0.0, 0.0), xdd=(0.0, 0.0), q_arm=None, qd_arm=None,
                      qdd_arm=None, q_w=None, qd_w=None, qdd_w=None, chassis=None):
    """Platform state with the floating base placed on flat ground.

    The base pitch is the mean relative bogie angle so that the bogies are
    level on average, and the base is positioned so that the midpoint of the
    bogie pivots sits at :attr:`Model.pivot_height` over the chassis
    position. Unequal strokes therefore tilt the bogies slightly instead of
    rolling the base.
    """
    chassis = chassis or ChassisMotion()
    x, xd, xdd = (np.asarray(v, dtype=float) for v in (x, xd, xdd))
    th, dth, ddth = [], [], []
    for j, side in enumerate(SIDES):
        cs = ch.chain_state(model.chains[side], x[j], xd[j], xdd[j])
        th.append(cs.theta[0])
        dth.append(cs.rates[0])
        ddth.append(cs.accels[0])
    p, dp, ddp = np.mean(th), np.mean(dth), np.mean(ddth)
    d = -0.5 * (model.chains["R"].pivot + model.chains["L"].pivot)
    q_fb, qd_fb, qdd_fb = _placement(d, model.pivot_height, p, dp, ddp, chassis.as_array())

    n = model.n_arm
    zeros = np.zeros(n)
    return PlatformState(
        q_fb=q_fb,
        qd_fb=qd_fb,
        qdd_fb=qdd_fb,
        q_arm=zeros if q_arm is None else q_arm,
        qd_arm=zeros if qd_arm is None else qd_arm,
        qdd_arm=zeros if qdd_arm is None else qdd_arm,
        q_w=np.zeros(4) if q_w is None else q_w,
        qd_w=np.zeros(4) if qd_w is None else qd_w,
        qdd_w=np.zeros(4) if qdd_w is None else qdd_w,
        x=x, xd=xd, xdd=xdd,
    )


@njit(cache=True)
def _chassis_kernel(T_fb, nu, a, r, root_acc):
    R_fb = np.ascontiguousarray(T_fb[:3, :3])
    v_b, w_b = nu[:3], nu[3:]
    vr = v_b + sp.cross3(w_b, r)
    vel = sp.mv(R_fb, vr)
    acc = sp.mv(R_fb, a[:3] + sp.cross3(a[3:], r) + sp.cross3(w_b, vr))
    wz = np.sum(R_fb[2] * w_b)
    dwz = np.sum(R_fb[2] * a[3:])
    yaw = np.arctan2(R_fb[1, 0], R_fb[0, 0])
    Rc = sp.rot_z(yaw)
    T_wc = sp.transform(Rc, T_fb[:3, 3] + sp.mv(R_fb, r))
    nu_c = np.zeros(6)
    RcT = np.ascontiguousarray(Rc.T)
    nu_c[:3] = sp.mv(RcT, vel)
    nu_c[5] = wz
    nu_c_dot = np.zeros(6)
    om = np.array([0.0, 0.0, wz])
    nu_c_dot[:3] = sp.mv(RcT, acc + root_acc[:3]) - sp.cross3(om, nu_c[:3])
    nu_c_dot[5] = dwz
    return T_wc, nu_c, nu_c_dot


def chassis_frame(kin):
    """Pose, twist and acceleration of the chassis frame.

    The chassis frame sits midway between the bogie pivots with its z axis
    vertical and its x axis along the heading of the base. Returns
    ``(T_w_c, nu_c, nu_c_dot)``; the acceleration carries the gravity term.
    """
    m = kin.model
    i = m.frame("fb")
    r = 0.5 * (m.chains["R"].pivot + m.chains["L"].pivot)
    a = kin.acc[i] - kin.gravity_accel("fb")
    return _chassis_kernel(kin.T_world[i], kin.nu[i], a, r, np.asarray(kin.root_acc, float))
