"""Rollout/update loop, evaluation, metrics output, and latent export.

One process runs one config. metrics.csv holds only deterministic columns so
two runs with the same seed produce byte-identical files; wall-clock timings
go to timings.csv. Metrics are flushed after every evaluation block so an
interrupted run keeps its rows.
"""

from __future__ import annotations

import csv
import os
import time

import numpy as np

from . import autodiff as ad
from .agents import AgentError, make_agent
from .config import RunConfig
from .envs import make_env
from .replay import ReplayBuffer, TraceRecorder

METRIC_COLUMNS = ("env_step", "return_mean", "return_std", "critic_loss",
                  "actor_loss", "kl_actor", "kl_critic")


class TrainAbort(RuntimeError):
    """Raised when a loss goes non-finite; state is checkpointed first."""


def _env_dt(cfg):
    return cfg.env_dt if cfg.env_dt > 0 else None


def _encoder_dt(cfg, env_reported_dt):
    # fixed-clock tasks use the configured constant; irregular tasks consume
    # the environment's sampled interval
    return env_reported_dt if cfg.clock == "irregular" else cfg.encoder_dt


def build_env(cfg: RunConfig, seed):
    return make_env(cfg.env, occlusion=cfg.occlusion, clock=cfg.clock, dt=_env_dt(cfg), seed=seed)


def build_agent(cfg: RunConfig, env, seed):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5EED)))
    return make_agent(cfg.agent, rng, env.obs_dim, env.act_dim, env.action_high, cfg.agent_config())


class Rollout:
    """Tracks per-episode encoder state and the (a_prev, r_prev) inputs."""

    def __init__(self, agent, env, cfg):
        self.agent = agent
        self.env = env
        self.cfg = cfg
        self.reset()

    def reset(self):
        obs, dt0 = self.env.reset()
        self.obs = obs
        self.enc_state = self.agent.init_encoder_state()
        self.a_prev = np.zeros(self.env.act_dim)
        self.r_prev = 0.0
        self.dt = _encoder_dt(self.cfg, dt0)
        return obs

    def act(self, mode, rng=None, forced_action=None):
        action, self.enc_state = self.agent.act(
            self.obs, self.a_prev, self.r_prev, self.dt, self.enc_state, mode, rng)
        if forced_action is not None:
            action = forced_action
        return action

    def observe(self, action, step):
        self.obs = step.obs
        self.a_prev = np.asarray(action, dtype=np.float64).reshape(-1)
        self.r_prev = step.reward
        self.dt = _encoder_dt(self.cfg, step.dt)


def run_episode(agent, env, cfg, mode, rng=None):
    """One full episode; returns (episode return, episode length)."""
    rollout = Rollout(agent, env, cfg)
    total, steps = 0.0, 0
    done = False
    while not done:
        action = rollout.act(mode, rng)
        step = env.step(action)
        rollout.observe(action, step)
        total += step.reward
        steps += 1
        done = step.done
    return total, steps


def evaluate(agent, cfg, episodes, seed_seq):
    """Deterministic-mode rollouts; returns (mean, std, mean length)."""
    if episodes <= 0:
        raise ValueError(f"eval episodes must be positive, got {episodes}")
    returns, lengths = [], []
    for i in range(episodes):
        env = build_env(cfg, np.random.SeedSequence((cfg.seed, 0xE7A1, seed_seq, i)))
        ret, length = run_episode(agent, env, cfg, "eval")
        returns.append(ret)
        lengths.append(length)
    return float(np.mean(returns)), float(np.std(returns)), float(np.mean(lengths))


def random_policy_baseline(cfg, episodes=200, seed_offset=0x8A5E):
    """Return and episode-length statistics of uniform random actions."""
    returns, lengths = [], []
    for i in range(episodes):
        env = build_env(cfg, np.random.SeedSequence((cfg.seed, seed_offset, i)))
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, seed_offset, i, 1)))
        env.reset()
        total, steps, done = 0.0, 0, False
        while not done:
            action = rng.uniform(env.action_low, env.action_high, size=env.act_dim)
            step = env.step(action)
            total += step.reward
            steps += 1
            done = step.done
        returns.append(total)
        lengths.append(steps)
    returns, lengths = np.asarray(returns), np.asarray(lengths)
    return {"mean": float(returns.mean()), "std": float(returns.std()),
            "len_mean": float(lengths.mean()), "len_std": float(lengths.std())}


def train(cfg: RunConfig, out_dir, log=print):
    """Run the training loop; writes metrics.csv, timings.csv, config, checkpoints."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved"), "w") as fh:
        fh.write(cfg.to_text())

    env = build_env(cfg, np.random.SeedSequence((cfg.seed, 0xE0)))
    agent = build_agent(cfg, env, cfg.seed)
    buffer = ReplayBuffer(capacity=cfg.buffer_size)
    explore_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xAC7)))
    update_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x0B7)))

    metrics_path = os.path.join(out_dir, "metrics.csv")
    timings_path = os.path.join(out_dir, "timings.csv")
    metrics_fh = open(metrics_path, "w", newline="")
    metrics = csv.writer(metrics_fh)
    metrics.writerow(METRIC_COLUMNS)
    timings_fh = open(timings_path, "w", newline="")
    timings = csv.writer(timings_fh)
    timings.writerow(("env_step", "wall_seconds"))
    t_start = time.monotonic()

    rollout = Rollout(agent, env, cfg)
    recorder = TraceRecorder(rollout.obs, rollout.dt)
    loss_sums = {"critic_loss": 0.0, "actor_loss": 0.0, "kl_actor": 0.0, "kl_critic": 0.0}
    loss_count = 0
    eval_blocks = 0

    def write_eval_row(step_no):
        nonlocal loss_count, eval_blocks
        mean, std, _ = evaluate(agent, cfg, cfg.eval_episodes, eval_blocks)
        denom = max(loss_count, 1)
        metrics.writerow((
            step_no, f"{mean:.10g}", f"{std:.10g}",
            f"{loss_sums['critic_loss'] / denom:.10g}", f"{loss_sums['actor_loss'] / denom:.10g}",
            f"{loss_sums['kl_actor'] / denom:.10g}", f"{loss_sums['kl_critic'] / denom:.10g}",
        ))
        metrics_fh.flush()
        timings.writerow((step_no, f"{time.monotonic() - t_start:.3f}"))
        timings_fh.flush()
        for k in loss_sums:
            loss_sums[k] = 0.0
        loss_count = 0
        eval_blocks += 1
        log(f"step {step_no}: eval return {mean:.1f} +- {std:.1f}")

    try:
        for step_no in range(1, cfg.total_steps + 1):
            if step_no <= cfg.start_steps:
                forced = explore_rng.uniform(env.action_low, env.action_high, size=env.act_dim)
                action = rollout.act("explore", explore_rng, forced_action=forced)
            else:
                action = rollout.act("explore", explore_rng)
            step = env.step(action)
            rollout.observe(action, step)
            # store the encoder-facing interval, not the raw physics interval
            recorder.add(action, step, dt=rollout.dt)
            if step.done:
                buffer.push_episode(recorder.finish())
                rollout.reset()
                recorder = TraceRecorder(rollout.obs, rollout.dt)

            if step_no >= cfg.update_after and step_no % cfg.update_every == 0 and len(buffer) > 0:
                batch = buffer.sample_batch(update_rng, cfg.batch_size, cfg.sampled_seq_len)
                try:
                    info = agent.update(batch, update_rng)
                except AgentError:
                    agent.save(os.path.join(out_dir, "abort.ckpt"), cfg.config_hash())
                    raise TrainAbort(f"non-finite loss at step {step_no}; state saved to abort.ckpt")
                for k in loss_sums:
                    loss_sums[k] += info.get(k, 0.0)
                loss_count += 1

            if step_no % cfg.eval_every == 0:
                write_eval_row(step_no)
    finally:
        metrics_fh.close()
        timings_fh.close()

    agent.save(os.path.join(out_dir, "final.ckpt"), cfg.config_hash())
    return agent


def load_agent(cfg: RunConfig, checkpoint_path):
    env = build_env(cfg, 0)
    agent = build_agent(cfg, env, cfg.seed)
    agent.load(checkpoint_path, cfg.config_hash())
    return agent


def export_latents(agent, cfg, out_path, episodes=1):
    """Per-step context parameters next to the env's true physical state.

    Columns: t, mu_0..mu_{d-1}, sigma_0..sigma_{d-1}, state_0..state_{k-1}.
    """
    d = agent.cfg.context_dim
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        state_dim = len(build_env(cfg, 0).full_state())
        writer.writerow(
            ["t"] + [f"mu_{i}" for i in range(d)] + [f"sigma_{i}" for i in range(d)]
            + [f"state_{i}" for i in range(state_dim)])
        for ep in range(episodes):
            env = build_env(cfg, np.random.SeedSequence((cfg.seed, 0x1A7, ep)))
            rollout = Rollout(agent, env, cfg)
            done, t = False, 0
            while not done:
                # peek at the context the policy sees for this observation
                with ad.no_grad():
                    _, ctx, _ = agent.actor_encoder.step(
                        rollout.enc_state, rollout.obs.reshape(1, -1),
                        rollout.a_prev.reshape(1, -1), [[rollout.r_prev]], rollout.dt)
                row = ([t] + [f"{v:.10g}" for v in ctx.mu.data[0]]
                       + [f"{v:.10g}" for v in ctx.sigma.data[0]]
                       + [f"{v:.10g}" for v in env.full_state()])
                writer.writerow(row)
                action = rollout.act("eval")
                step = env.step(action)
                rollout.observe(action, step)
                done = step.done
                t += 1
    return out_path
