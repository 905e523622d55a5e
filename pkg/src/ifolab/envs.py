"""Desk-scale continuous-control environments with pixel rendering.

Two tasks, chosen so that a low-dimensional proprioceptive state is
recoverable from small binary images:

* ``pendulum`` -- torque-limited pendulum balancing near upright.
  Internal state (theta, theta_dot) with theta unwrapped; the exposed
  proprioceptive state is (cos theta, sin theta, theta_dot) to avoid
  angle-wrap discontinuities in regression targets.  Physics mirrors the
  classic benchmark: g=10, m=1, l=1, dt=0.05, torque clip +-2, 200 steps.
* ``reacher`` -- a point mass accelerating in the unit box toward a fixed
  target at the center; exposed state (x, y, xdot, ydot).

Conventions shared by both:

* Episodes never terminate early; ``done`` fires exactly at
  ``max_episode_steps`` so every episode has the same length.
* The task reward returned by ``step`` is for evaluation/reporting only;
  imitation learners must never train on it.
* ``render`` is a pure function of the state producing a binary G x G
  float image (background 0.0, body 1.0), so identical states give
  bit-identical frames on any platform.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    env_id: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    dt: float
    max_episode_steps: int
    image_size: int = 32

    def __post_init__(self):
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be positive")
        if not np.all(self.action_low < self.action_high):
            raise ValueError("action_low must be below action_high")


@dataclass
class EnvState:
    """Proprioceptive state as exposed to learners, plus integrator state."""
    proprio: np.ndarray
    internal: np.ndarray
    step_index: int


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    return -((math.pi - theta) % (2.0 * math.pi) - math.pi)


def _check_action(action, dim):
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (dim,):
        raise ValueError(f"action must have {dim} dims, got shape {np.shape(action)}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite action")
    return a


def _bresenham(r0, c0, r1, c1):
    """Integer line pixels from (r0,c0) to (r1,c1), endpoints included."""
    pixels = []
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        pixels.append((r, c))
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
    return pixels


class Pendulum:
    """Balance task: start near upright, keep the rod up."""

    GRAVITY = 10.0
    MASS = 1.0
    LENGTH = 1.0
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0

    def __init__(self, image_size=32):
        self.spec = EnvSpec(
            env_id="pendulum",
            state_dim=3,
            action_dim=1,
            action_low=np.array([-self.MAX_TORQUE]),
            action_high=np.array([self.MAX_TORQUE]),
            dt=0.05,
            max_episode_steps=200,
            image_size=image_size,
        )

    def _expose(self, theta, theta_dot):
        return np.array([math.cos(theta), math.sin(theta), theta_dot])

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-0.5, 0.5)
        theta_dot = rng.uniform(-0.1, 0.1)
        return EnvState(self._expose(theta, theta_dot), np.array([theta, theta_dot]), 0)

    def step(self, state, action):
        u = float(_check_action(action, 1)[0])
        u = min(max(u, -self.MAX_TORQUE), self.MAX_TORQUE)
        theta, theta_dot = state.internal
        if not (math.isfinite(theta) and math.isfinite(theta_dot)):
            raise ValueError("non-finite environment state")
        # reward on the pre-step state and the executed (clipped) torque
        tw = wrap_angle(theta)
        reward = -(tw * tw + 0.1 * theta_dot * theta_dot + 0.001 * u * u)
        g, m, l, dt = self.GRAVITY, self.MASS, self.LENGTH, self.spec.dt
        theta_dot = theta_dot + dt * (3.0 * g / (2.0 * l) * math.sin(theta) + 3.0 / (m * l * l) * u)
        theta_dot = min(max(theta_dot, -self.MAX_SPEED), self.MAX_SPEED)
        theta = theta + dt * theta_dot
        step_index = state.step_index + 1
        done = step_index == self.spec.max_episode_steps
        nxt = EnvState(self._expose(theta, theta_dot), np.array([theta, theta_dot]), step_index)
        return nxt, reward, done

    def render(self, state):
        g = self.spec.image_size
        frame = np.zeros((g, g))
        theta = float(state.internal[0])
        c = g // 2
        length = round(0.4 * g)
        tip_col = c + int(round(length * math.sin(theta)))
        tip_row = c + int(round(-length * math.cos(theta)))
        for r, col in _bresenham(c, c, tip_row, tip_col):
            if 0 <= r < g and 0 <= col < g:
                frame[r, col] = 1.0
        return frame


class PointReacher:
    """Point mass in the unit box accelerating toward a fixed center target."""

    TARGET = np.array([0.5, 0.5])
    MAX_ACCEL = 1.0
    MAX_SPEED = 2.0

    def __init__(self, image_size=32):
        self.spec = EnvSpec(
            env_id="reacher",
            state_dim=4,
            action_dim=2,
            action_low=np.array([-self.MAX_ACCEL, -self.MAX_ACCEL]),
            action_high=np.array([self.MAX_ACCEL, self.MAX_ACCEL]),
            dt=0.05,
            max_episode_steps=200,
            image_size=image_size,
        )

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        pos = rng.uniform(0.0, 1.0, size=2)
        vec = np.array([pos[0], pos[1], 0.0, 0.0])
        return EnvState(vec.copy(), vec.copy(), 0)

    def step(self, state, action):
        u = _check_action(action, 2)
        u = np.clip(u, -self.MAX_ACCEL, self.MAX_ACCEL)
        pos = state.internal[:2].copy()
        vel = state.internal[2:].copy()
        if not np.all(np.isfinite(state.internal)):
            raise ValueError("non-finite environment state")
        d = pos - self.TARGET
        reward = -(float(d @ d) + 0.001 * float(u @ u))
        dt = self.spec.dt
        vel = np.clip(vel + dt * u, -self.MAX_SPEED, self.MAX_SPEED)
        raw = pos + dt * vel
        new_pos = np.clip(raw, 0.0, 1.0)
        vel[raw != new_pos] = 0.0  # hitting a wall stops motion on that axis
        step_index = state.step_index + 1
        done = step_index == self.spec.max_episode_steps
        vec = np.array([new_pos[0], new_pos[1], vel[0], vel[1]])
        nxt = EnvState(vec.copy(), vec.copy(), step_index)
        return nxt, reward, done

    def render(self, state):
        g = self.spec.image_size
        frame = np.zeros((g, g))
        tr = int(round(self.TARGET[1] * (g - 1)))
        tc = int(round(self.TARGET[0] * (g - 1)))
        frame[tr, tc] = 1.0
        x, y = float(state.internal[0]), float(state.internal[1])
        ac = min(max(int(round(x * (g - 2))), 0), g - 2)
        ar = min(max(int(round(y * (g - 2))), 0), g - 2)
        frame[ar:ar + 2, ac:ac + 2] = 1.0
        return frame


_ENVS = {"pendulum": Pendulum, "reacher": PointReacher}


def make_env(env_id, image_size=32):
    if env_id not in _ENVS:
        raise ValueError(f"unknown env {env_id!r}; choose from {sorted(_ENVS)}")
    return _ENVS[env_id](image_size=image_size)


def stack_frames(history):
    """Stack the last <=3 frames into a (3, G, G) observation.

    Channel order is oldest -> newest; missing history at episode start
    is filled by repeating the oldest available frame.
    """
    frames = list(history)[-3:]
    if not frames:
        raise ValueError("cannot stack an empty frame history")
    while len(frames) < 3:
        frames.insert(0, frames[0])
    return np.stack(frames)


class FrameStacker:
    """Stateful 3-frame window used during rollouts."""

    def __init__(self):
        self._history = []

    def reset(self, frame):
        self._history = [frame]
        return stack_frames(self._history)

    def push(self, frame):
        self._history.append(frame)
        if len(self._history) > 3:
            self._history = self._history[-3:]
        return stack_frames(self._history)
