"""Desk-scale partially observable control tasks.

Pendulum and CartPole integrate their physics with semi-implicit Euler over
the observation interval, so the interval reported to the encoder and the
one the dynamics saw are the same clock. Occlusion modes drop position- or
velocity-related observation entries; the irregular clock draws each
interval uniformly from (0, 2*dt].
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

OCCLUSIONS = ("full", "position", "velocity")
CLOCKS = ("fixed", "irregular")
ENV_NAMES = ("pendulum", "cartpole", "semicircle")


class EnvError(ValueError):
    pass


class EnvStep(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    dt: float


def wrap_angle(x):
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - x) % (2.0 * math.pi)


def irregular_clock(rng, delta):
    """One interval from U(0, 2*delta]; zero is excluded."""
    if delta <= 0:
        raise EnvError(f"delta must be positive, got {delta}")
    return 2.0 * delta * (1.0 - rng.random())


def occlude(env_name, full_obs, mode):
    """Project a full observation down to the occluded view."""
    full_obs = np.asarray(full_obs, dtype=np.float64)
    if mode == "full":
        return full_obs
    if env_name == "pendulum":
        if mode == "position":
            return full_obs[0:1]
        if mode == "velocity":
            return full_obs[1:2]
    elif env_name == "cartpole":
        if mode == "position":
            return full_obs[[0, 2]]
        if mode == "velocity":
            return full_obs[[1, 3]]
    elif env_name == "semicircle":
        raise EnvError(f"semicircle has no {mode!r} occlusion (positions only)")
    raise EnvError(f"unknown occlusion {mode!r} for env {env_name!r}")


class _BaseEnv:
    """Shared clock/episode plumbing; subclasses provide the physics."""

    name = ""
    horizon = 0

    def __init__(self, occlusion="full", clock="fixed", dt=None, seed=0):
        if clock not in CLOCKS:
            raise EnvError(f"unknown clock {clock!r}, expected one of {CLOCKS}")
        if occlusion not in OCCLUSIONS:
            raise EnvError(f"unknown occlusion {occlusion!r}, expected one of {OCCLUSIONS}")
        self.occlusion = occlusion
        self.clock = clock
        self.dt = float(dt) if dt is not None else self.default_dt
        if self.dt <= 0:
            raise EnvError(f"dt must be positive, got {self.dt}")
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self._reset_state()
        self.obs_dim = len(self._observe())

    def _next_dt(self):
        if self.clock == "irregular":
            return irregular_clock(self.rng, self.dt)
        return self.dt

    def _observe(self):
        return occlude(self.name, self.full_state()[: self.obs_dim_full], self.occlusion)

    def reset(self):
        """New episode; returns (obs, dt) for the first observation."""
        self.steps = 0
        self._reset_state()
        return self._observe(), self._next_dt()

    def step(self, action):
        if self.steps >= self.horizon:
            raise EnvError("step() after episode end; call reset()")
        dt = self._next_dt()
        reward, terminal = self._physics(np.asarray(action, dtype=np.float64).reshape(-1), dt)
        self.steps += 1
        done = terminal or self.steps >= self.horizon
        return EnvStep(self._observe(), reward, done, dt)


class Pendulum(_BaseEnv):
    """Torque-limited swing-up; angle measured from upright, zero is up."""

    name = "pendulum"
    horizon = 200
    default_dt = 0.05
    act_dim = 1
    action_low, action_high = -2.0, 2.0
    obs_dim_full = 2
    gravity = 10.0
    mass = 1.0
    length = 1.0
    max_speed = 8.0

    def _reset_state(self):
        self.theta = self.rng.uniform(-math.pi, math.pi)
        self.omega = self.rng.uniform(-1.0, 1.0)

    def full_state(self):
        return np.array([self.theta, self.omega])

    def _physics(self, action, dt):
        u = float(np.clip(action[0], self.action_low, self.action_high))
        cost = wrap_angle(self.theta) ** 2 + 0.1 * self.omega**2 + 0.001 * u**2
        g, m, l = self.gravity, self.mass, self.length
        omega = self.omega + dt * (3.0 * g / (2.0 * l) * math.sin(self.theta) + 3.0 / (m * l**2) * u)
        self.omega = float(np.clip(omega, -self.max_speed, self.max_speed))
        self.theta = wrap_angle(self.theta + dt * self.omega)
        return -cost, False


class CartPole(_BaseEnv):
    """Continuous-force cart-pole balance; +1 reward per step alive."""

    name = "cartpole"
    horizon = 1000
    default_dt = 0.02
    act_dim = 1
    action_low, action_high = -10.0, 10.0
    obs_dim_full = 4
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    half_length = 0.5
    theta_limit = 12.0 * math.pi / 180.0
    x_limit = 2.4

    def _reset_state(self):
        self.state = self.rng.uniform(-0.05, 0.05, size=4)

    def full_state(self):
        return self.state.copy()

    def _physics(self, action, dt):
        force = float(np.clip(action[0], self.action_low, self.action_high))
        x, x_dot, theta, theta_dot = self.state
        total_mass = self.masscart + self.masspole
        polemass_length = self.masspole * self.half_length
        sin_t, cos_t = math.sin(theta), math.cos(theta)
        temp = (force + polemass_length * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.gravity * sin_t - cos_t * temp) / (
            self.half_length * (4.0 / 3.0 - self.masspole * cos_t**2 / total_mass)
        )
        x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
        x_dot += dt * x_acc
        x += dt * x_dot
        theta_dot += dt * theta_acc
        theta += dt * theta_dot
        self.state = np.array([x, x_dot, theta, theta_dot])
        terminal = abs(theta) > self.theta_limit or abs(x) > self.x_limit
        return 1.0, terminal


class SemiCircle(_BaseEnv):
    """Point robot; the goal sits on the upper unit semicircle, unobserved."""

    name = "semicircle"
    horizon = 100
    default_dt = 0.1
    act_dim = 2
    action_low, action_high = -0.1, 0.1
    obs_dim_full = 2
    goal_radius = 0.2

    def _reset_state(self):
        self.pos = np.zeros(2)
        phi = self.rng.uniform(0.0, math.pi)
        self.goal = np.array([math.cos(phi), math.sin(phi)])

    def full_state(self):
        return np.concatenate([self.pos, self.goal])

    def _physics(self, action, dt):
        self.pos = self.pos + np.clip(action, self.action_low, self.action_high)
        reward = 1.0 if np.linalg.norm(self.pos - self.goal) < self.goal_radius else 0.0
        return reward, False


_ENV_CLASSES = {"pendulum": Pendulum, "cartpole": CartPole, "semicircle": SemiCircle}


def make_env(name, occlusion="full", clock="fixed", dt=None, seed=0):
    if name not in _ENV_CLASSES:
        raise EnvError(f"unknown env {name!r}, expected one of {ENV_NAMES}")
    return _ENV_CLASSES[name](occlusion=occlusion, clock=clock, dt=dt, seed=seed)
