"""Run configuration: flat key=value files with CLI overrides.

Unknown keys are rejected. Defaults follow the hyperparameter tables the
experiments use everywhere (lr 3e-4, gamma 0.99, balance weight 0.5, tau
0.005, [256,256] heads, 64x64 sequence batches, 1e6-transition buffer).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .agents import AgentConfig
from .envs import CLOCKS, ENV_NAMES, OCCLUSIONS
from .nn import INPUT_MODES
from .odeint import SOLVERS


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # environment
    env: str = "pendulum"
    occlusion: str = "position"
    clock: str = "fixed"
    env_dt: float = 0.0          # 0 means the environment's standard interval
    # agent
    agent: str = "td3"
    gamma: float = 0.99
    lr: float = 3e-4
    lambda_actor: float = 0.5
    lambda_critic: float = 0.5
    tau: float = 0.005
    exploration_noise: float = 0.1
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    sac_alpha: float = 0.2
    sac_auto_alpha: bool = True
    alpha_lr: float = 3e-4
    shared_encoder: bool = False
    input_mode: str = "oar"
    solver: str = "euler"
    substeps: int = 1
    encoder_dt: float = 0.1      # encoder interval on fixed-clock tasks
    gru_hidden_size: int = 128
    context_dim: int = 32
    sigma_floor: float = 1e-4
    policy_layers: str = "256,256"
    dqn_layers: str = "256,256"
    observ_embedding_size: int = 32
    action_embedding_size: int = 16
    reward_embedding_size: int = 16
    # replay
    sampled_seq_len: int = 64
    batch_size: int = 64
    buffer_size: int = 1_000_000
    # schedule
    total_steps: int = 150_000
    start_steps: int = 1_000
    update_after: int = 1_000
    update_every: int = 16
    eval_every: int = 5_000
    eval_episodes: int = 20
    seed: int = 1

    def validate(self):
        checks = [
            ("env", self.env in ENV_NAMES, ENV_NAMES),
            ("occlusion", self.occlusion in OCCLUSIONS, OCCLUSIONS),
            ("clock", self.clock in CLOCKS, CLOCKS),
            ("agent", self.agent in ("td3", "sac"), ("td3", "sac")),
            ("input_mode", self.input_mode in INPUT_MODES, INPUT_MODES),
            ("solver", self.solver in SOLVERS, SOLVERS),
        ]
        for key, ok, allowed in checks:
            if not ok:
                raise ConfigError(f"{key}={getattr(self, key)!r} not in {allowed}")
        for key in ("gamma", "lr", "tau", "encoder_dt", "eval_episodes", "eval_every",
                    "total_steps", "sampled_seq_len", "batch_size", "buffer_size",
                    "update_every", "substeps"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.env_dt < 0:
            raise ConfigError(f"env_dt must be >= 0, got {self.env_dt}")
        _parse_layers(self.policy_layers)
        _parse_layers(self.dqn_layers)
        return self

    def agent_config(self):
        return AgentConfig(
            gamma=self.gamma, lr=self.lr, lambda_actor=self.lambda_actor,
            lambda_critic=self.lambda_critic, tau=self.tau,
            exploration_noise=self.exploration_noise, target_noise=self.target_noise,
            target_noise_clip=self.target_noise_clip, policy_delay=self.policy_delay,
            sac_alpha=self.sac_alpha, sac_auto_alpha=self.sac_auto_alpha,
            alpha_lr=self.alpha_lr, shared_encoder=self.shared_encoder,
            input_mode=self.input_mode, solver=self.solver, substeps=self.substeps,
            hidden_dim=self.gru_hidden_size, context_dim=self.context_dim,
            policy_layers=_parse_layers(self.policy_layers),
            dqn_layers=_parse_layers(self.dqn_layers), sigma_floor=self.sigma_floor,
            obs_embed=self.observ_embedding_size, act_embed=self.action_embedding_size,
            rew_embed=self.reward_embedding_size,
        )

    def to_text(self):
        lines = [f"{f.name}={_format_value(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _parse_layers(text):
    try:
        sizes = tuple(int(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"layer sizes must be comma-separated ints, got {text!r}") from None
    if not sizes or any(s <= 0 for s in sizes):
        raise ConfigError(f"layer sizes must be positive, got {text!r}")
    return sizes


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name, kind, raw):
    if not isinstance(raw, str):
        return kind(raw)
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_key_values(pairs):
    """Split 'key=value' strings; duplicate keys keep the last value."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value
    return out


def read_config_file(path):
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            pairs.append(line)
    return parse_key_values(pairs)


def build_config(file_path=None, overrides=None):
    """RunConfig from defaults, then file keys, then override keys."""
    values = {}
    if file_path:
        values.update(read_config_file(file_path))
    if overrides:
        values.update(overrides)
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    cfg = RunConfig()
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, types[key], raw))
    return cfg.validate()
