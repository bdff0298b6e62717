"""Episode-structured replay with fixed-length subsequence sampling.

Episodes are stored whole; sampling draws a uniformly random transition as
the window start and runs up to seq_len steps, never crossing the episode
boundary. Windows that hit the end are padded and masked. Each stored step
keeps its observation interval so irregular tasks replay their true clocks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .checkpoint import load_arrays, save_arrays


class ReplayError(ValueError):
    pass


@dataclass
class EpisodeTrace:
    """T transitions: T+1 observations/intervals, T actions/rewards/dones."""

    obs: np.ndarray   # (T+1, obs_dim)
    act: np.ndarray   # (T, act_dim)
    rew: np.ndarray   # (T,)
    dt: np.ndarray    # (T+1,)
    done: np.ndarray  # (T,)

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=np.float64)
        self.act = np.asarray(self.act, dtype=np.float64)
        self.rew = np.asarray(self.rew, dtype=np.float64)
        self.dt = np.asarray(self.dt, dtype=np.float64)
        self.done = np.asarray(self.done, dtype=np.float64)
        n = len(self)
        if n == 0:
            raise ReplayError("empty episode trace")
        if self.obs.shape[0] != n + 1 or self.dt.shape[0] != n + 1:
            raise ReplayError(
                f"trace arrays misaligned: {n} transitions but obs {self.obs.shape[0]}, dt {self.dt.shape[0]}"
            )
        if self.rew.shape[0] != n or self.done.shape[0] != n:
            raise ReplayError("trace arrays misaligned: rew/done length != act length")

    def __len__(self):
        return self.act.shape[0]


@dataclass
class SequenceBatch:
    """B windows of L transitions plus the surrounding encoder inputs.

    obs/a_prev/r_arr/dt cover L+1 observation slots (the extra slot is the
    next observation of the last transition); act/rew/done/mask cover the L
    transitions. a_prev[t] is the action that preceded obs[t] and r_arr[t]
    the reward that arrived with it. mask is 1 for real steps, 0 for padding
    past the episode end.
    """

    obs: np.ndarray     # (B, L+1, obs_dim)
    a_prev: np.ndarray  # (B, L+1, act_dim)
    r_arr: np.ndarray   # (B, L+1, 1)
    dt: np.ndarray      # (B, L+1)
    act: np.ndarray     # (B, L, act_dim)
    rew: np.ndarray     # (B, L)
    done: np.ndarray    # (B, L)
    mask: np.ndarray    # (B, L)


class ReplayBuffer:
    def __init__(self, capacity=1_000_000):
        self.capacity = int(capacity)
        self.episodes = deque()
        self.total = 0
        self._starts = np.zeros(0, dtype=np.int64)

    def __len__(self):
        return self.total

    @property
    def num_episodes(self):
        return len(self.episodes)

    def push_episode(self, trace):
        if not isinstance(trace, EpisodeTrace):
            raise ReplayError(f"expected EpisodeTrace, got {type(trace).__name__}")
        self.episodes.append(trace)
        self.total += len(trace)
        # evict whole oldest episodes; a buffer never drops below one episode
        while self.total > self.capacity and len(self.episodes) > 1:
            self.total -= len(self.episodes.popleft())
        self._reindex()

    def _reindex(self):
        lengths = [len(ep) for ep in self.episodes]
        self._starts = np.concatenate([[0], np.cumsum(lengths)])

    def sample_batch(self, rng, batch_size=64, seq_len=64):
        if self.total == 0:
            raise ReplayError("sample from empty buffer")
        flat = rng.integers(0, self.total, size=batch_size)
        ep_idx = np.searchsorted(self._starts, flat, side="right") - 1
        t0 = flat - self._starts[ep_idx]

        first = self.episodes[0]
        obs_dim = first.obs.shape[1]
        act_dim = first.act.shape[1]
        B, L = batch_size, seq_len
        obs = np.zeros((B, L + 1, obs_dim))
        a_prev = np.zeros((B, L + 1, act_dim))
        r_arr = np.zeros((B, L + 1, 1))
        dt = np.full((B, L + 1), 1.0)
        act = np.zeros((B, L, act_dim))
        rew = np.zeros((B, L))
        done = np.zeros((B, L))
        mask = np.zeros((B, L))

        for i in range(B):
            ep = self.episodes[ep_idx[i]]
            s = int(t0[i])
            v = min(L, len(ep) - s)
            obs[i, : v + 1] = ep.obs[s : s + v + 1]
            dt[i, : v + 1] = ep.dt[s : s + v + 1]
            act[i, :v] = ep.act[s : s + v]
            rew[i, :v] = ep.rew[s : s + v]
            done[i, :v] = ep.done[s : s + v]
            mask[i, :v] = 1.0
            # inputs that arrived with each observation
            if s > 0:
                a_prev[i, 0] = ep.act[s - 1]
                r_arr[i, 0, 0] = ep.rew[s - 1]
            a_prev[i, 1 : v + 1] = ep.act[s : s + v]
            r_arr[i, 1 : v + 1, 0] = ep.rew[s : s + v]
        return SequenceBatch(obs, a_prev, r_arr, dt, act, rew, done, mask)

    def save(self, path):
        arrays = {"meta.count": np.array([float(len(self.episodes))]),
                  "meta.capacity": np.array([float(self.capacity)])}
        for i, ep in enumerate(self.episodes):
            for field in ("obs", "act", "rew", "dt", "done"):
                arrays[f"ep{i}.{field}"] = getattr(ep, field)
        save_arrays(path, arrays)

    @classmethod
    def load(cls, path):
        arrays = load_arrays(path)
        buf = cls(capacity=int(arrays["meta.capacity"][0]))
        for i in range(int(arrays["meta.count"][0])):
            buf.push_episode(EpisodeTrace(
                obs=arrays[f"ep{i}.obs"], act=arrays[f"ep{i}.act"], rew=arrays[f"ep{i}.rew"],
                dt=arrays[f"ep{i}.dt"], done=arrays[f"ep{i}.done"],
            ))
        return buf


class TraceRecorder:
    """Accumulates one episode during rollout and emits an EpisodeTrace."""

    def __init__(self, obs0, dt0):
        self.obs = [np.asarray(obs0, dtype=np.float64)]
        self.dt = [float(dt0)]
        self.act = []
        self.rew = []
        self.done = []

    def add(self, action, step, dt=None):
        """Record one transition; dt overrides the env-reported interval."""
        self.act.append(np.asarray(action, dtype=np.float64))
        self.rew.append(float(step.reward))
        self.done.append(float(step.done))
        self.obs.append(np.asarray(step.obs, dtype=np.float64))
        self.dt.append(float(step.dt if dt is None else dt))

    def __len__(self):
        return len(self.act)

    def finish(self):
        return EpisodeTrace(
            obs=np.stack(self.obs), act=np.stack(self.act), rew=np.array(self.rew),
            dt=np.array(self.dt), done=np.array(self.done),
        )
