"""Recurrent TD3 and SAC over sequence batches from the replay buffer.

Actor and critic each own a context encoder (one shared encoder in the
ablation mode). Training unrolls the encoders along sampled subsequences;
all feedforward heads then run on time-major flattened rows so the large
matmuls happen once per update instead of once per step.

Loss shapes: squared TD errors and policy terms are averaged over valid
(unmasked) steps; the per-step KL regularizer is summed over valid steps,
scaled by its balance weight, and divided by the batch size.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, ShapeError, Tensor
from .checkpoint import load_arrays, save_arrays
from .encoder import ContextEncoder
from .nn import Linear, Mlp, OBS_EMBED_DIM

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class AgentError(ValueError):
    pass


@dataclass
class AgentConfig:
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
    hidden_dim: int = 128
    context_dim: int = 32
    policy_layers: tuple = (256, 256)
    dqn_layers: tuple = (256, 256)
    sigma_floor: float = 1e-4
    obs_embed: int = 32
    act_embed: int = 16
    rew_embed: int = 16
    dyn_hidden: tuple = (128, 128)


def polyak_update(online, target, tau=0.005):
    """target <- (1 - tau) * target + tau * online, elementwise over the tree."""
    if online.keys() != target.keys():
        raise ShapeError("polyak: parameter trees have different keys")
    for k in online:
        t = target[k].data
        t *= 1.0 - tau
        t += tau * online[k].data


def set_requires_grad(tree, flag):
    for p in tree.values():
        p.requires_grad = flag


def _flat(arr):
    """(B, L, ...) -> (L*B, ...) in time-major row order."""
    arr = np.asarray(arr, dtype=np.float64)
    B, L = arr.shape[0], arr.shape[1]
    rest = arr.shape[2:]
    return np.ascontiguousarray(arr.swapaxes(0, 1).reshape((L * B,) + rest))


def _stack_contexts(contexts, lo, hi, attr):
    return ad.concat([getattr(c, attr) for c in contexts[lo:hi]], axis=0)


class _QHead:
    """One critic head: (obs-embed, raw action, context) -> scalar value."""

    def __init__(self, rng, obs_dim, act_dim, context_dim, layers, prefix, obs_embed=OBS_EMBED_DIM):
        self.obs_embed = Linear(rng, obs_dim, obs_embed, f"{prefix}.obsembed")
        self.mlp = Mlp(rng, [obs_embed + act_dim + context_dim, *layers, 1], f"{prefix}.q", hidden="tanh")

    def __call__(self, obs, act, z):
        x = ad.concat([ad.relu(self.obs_embed(obs)), act, z], axis=-1)
        return self.mlp(x)

    def params(self):
        return {**self.obs_embed.params(), **self.mlp.params()}


class _DeterministicPolicy:
    """(obs-embed, context) -> tanh-squashed action scaled to the bounds."""

    def __init__(self, rng, obs_dim, context_dim, act_dim, act_scale, layers, prefix, obs_embed=OBS_EMBED_DIM):
        self.act_scale = act_scale
        self.obs_embed = Linear(rng, obs_dim, obs_embed, f"{prefix}.obsembed")
        self.mlp = Mlp(rng, [obs_embed + context_dim, *layers, act_dim], f"{prefix}.pi",
                       hidden="tanh", final_scale=0.01)

    def __call__(self, obs, z):
        x = ad.concat([ad.relu(self.obs_embed(obs)), z], axis=-1)
        return ad.tanh(self.mlp(x)) * self.act_scale

    def params(self):
        return {**self.obs_embed.params(), **self.mlp.params()}


class _StochasticPolicy:
    """Tanh-squashed diagonal Gaussian with change-of-variables log-prob."""

    def __init__(self, rng, obs_dim, context_dim, act_dim, act_scale, layers, prefix, obs_embed=OBS_EMBED_DIM):
        self.act_scale = act_scale
        self.act_dim = act_dim
        self.obs_embed = Linear(rng, obs_dim, obs_embed, f"{prefix}.obsembed")
        self.trunk = Mlp(rng, [obs_embed + context_dim, *layers], f"{prefix}.trunk", hidden="tanh")
        self.mu_head = Linear(rng, layers[-1], act_dim, f"{prefix}.mu", scale=0.01)
        self.log_std_head = Linear(rng, layers[-1], act_dim, f"{prefix}.logstd")

    def dist_params(self, obs, z):
        feat = ad.tanh(self.trunk(ad.concat([ad.relu(self.obs_embed(obs)), z], axis=-1)))
        mu = self.mu_head(feat)
        log_std = ad.clamp(self.log_std_head(feat), LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def sample(self, obs, z, eps):
        """Reparameterized action and its log-prob under the squashed density."""
        mu, log_std = self.dist_params(obs, z)
        std = ad.exp(log_std)
        u = mu + std * eps
        # log N(u | mu, std) summed over action dims
        logp_gauss = ad.tsum(ad.square((u - mu) / std) * -0.5 - log_std - HALF_LOG_2PI, axis=-1, keepdims=True)
        # d(scale * tanh(u))/du correction: log(1 - tanh(u)^2) = 2(log2 - u - softplus(-2u))
        correction = ad.tsum(
            2.0 * (math.log(2.0) - u - ad.softplus(-2.0 * u)) + math.log(self.act_scale),
            axis=-1, keepdims=True,
        )
        action = ad.tanh(u) * self.act_scale
        return action, logp_gauss - correction

    def mean_action(self, obs, z):
        mu, _ = self.dist_params(obs, z)
        return ad.tanh(mu) * self.act_scale

    def params(self):
        out = {**self.obs_embed.params(), **self.trunk.params(),
               **self.mu_head.params(), **self.log_std_head.params()}
        return out


class _AgentBase:
    """Wires encoders, policies, twin critics, targets, and optimizers."""

    stochastic = False

    def __init__(self, rng, obs_dim, act_dim, act_scale, cfg: AgentConfig):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.act_scale = float(act_scale)

        enc_kwargs = dict(input_mode=cfg.input_mode, hidden_dim=cfg.hidden_dim,
                          context_dim=cfg.context_dim, solver=cfg.solver,
                          substeps=cfg.substeps, sigma_floor=cfg.sigma_floor,
                          embed_dims=(cfg.obs_embed, cfg.act_embed, cfg.rew_embed),
                          dyn_hidden=cfg.dyn_hidden)
        self.critic_encoder = ContextEncoder(rng, obs_dim, act_dim, "critic.enc", **enc_kwargs)
        if cfg.shared_encoder:
            self.actor_encoder = self.critic_encoder
        else:
            self.actor_encoder = ContextEncoder(rng, obs_dim, act_dim, "actor.enc", **enc_kwargs)

        pol_cls = _StochasticPolicy if self.stochastic else _DeterministicPolicy
        self.policy = pol_cls(rng, obs_dim, cfg.context_dim, act_dim, self.act_scale,
                              cfg.policy_layers, "actor.pi", obs_embed=cfg.obs_embed)
        self.q1 = _QHead(rng, obs_dim, act_dim, cfg.context_dim, cfg.dqn_layers, "critic.q1",
                         obs_embed=cfg.obs_embed)
        self.q2 = _QHead(rng, obs_dim, act_dim, cfg.context_dim, cfg.dqn_layers, "critic.q2",
                         obs_embed=cfg.obs_embed)

        # the shared-encoder ablation trains the single encoder through the
        # critic objective (where the KL term lives once)
        self.actor_params = dict(self.policy.params())
        if not cfg.shared_encoder:
            self.actor_params.update(self.actor_encoder.params())
        self.critic_params = {**self.critic_encoder.params(), **self.q1.params(), **self.q2.params()}

        self.target_critic_encoder = ContextEncoder(rng, obs_dim, act_dim, "critic.enc", **enc_kwargs)
        self.target_q1 = _QHead(rng, obs_dim, act_dim, cfg.context_dim, cfg.dqn_layers, "critic.q1",
                                obs_embed=cfg.obs_embed)
        self.target_q2 = _QHead(rng, obs_dim, act_dim, cfg.context_dim, cfg.dqn_layers, "critic.q2",
                                obs_embed=cfg.obs_embed)
        self.target_critic_params = {**self.target_critic_encoder.params(),
                                     **self.target_q1.params(), **self.target_q2.params()}
        set_requires_grad(self.target_critic_params, False)
        for k in self.critic_params:
            self.target_critic_params[k].data[...] = self.critic_params[k].data

        self._init_targets_extra(rng, enc_kwargs)

        self.actor_opt = Adam(self.actor_params, lr=cfg.lr)
        self.critic_opt = Adam(self.critic_params, lr=cfg.lr)
        self.updates = 0
        self.actor_updates = 0
        self._last = {"actor_loss": 0.0, "kl_actor": 0.0}

    def _init_targets_extra(self, rng, enc_kwargs):
        pass

    # ------------------------------------------------------------------
    # shared plumbing

    def _obs_mask(self, batch):
        """Mask over the L+1 observation slots (slot 0 is always valid)."""
        B = batch.mask.shape[0]
        return np.concatenate([np.ones((B, 1)), batch.mask], axis=1)

    def _kl_term(self, result, obs_mask, lam):
        """lambda * sum of valid per-step KLs / batch size."""
        B = obs_mask.shape[0]
        total = None
        for t, kl in enumerate(result.kls):
            masked = ad.tsum(kl * obs_mask[:, t])
            total = masked if total is None else total + masked
        return total * (lam / B)

    def _masked_mean(self, per_row, mask_flat, valid):
        return ad.tsum(per_row * mask_flat.reshape(-1, 1)) * (1.0 / valid)

    def _encode(self, encoder, batch, rng):
        return encoder.encode_arrays(batch.obs, batch.a_prev, batch.r_arr, batch.dt, rng)

    # ------------------------------------------------------------------
    # rollout-time action selection

    def init_encoder_state(self):
        return self.actor_encoder.initial_state(1)

    def act(self, obs, a_prev, r_prev, dt, enc_state, mode, rng=None):
        """Step the online encoder and pick an action; returns (a, new state).

        explore mode samples the context and adds exploration noise; eval is
        fully deterministic (context mean, policy mean).
        """
        if mode not in ("explore", "eval"):
            raise AgentError(f"unknown act mode {mode!r}")
        explore = mode == "explore"
        with ad.no_grad():
            eps = rng.standard_normal((1, self.cfg.context_dim)) if explore else None
            new_state, ctx, _ = self.actor_encoder.step(
                enc_state, np.asarray(obs).reshape(1, -1), np.asarray(a_prev).reshape(1, -1),
                np.asarray([[float(r_prev)]]), float(dt), eps,
            )
            z = ctx.sample if explore else ctx.mu
            obs_t = Tensor(np.asarray(obs, dtype=np.float64).reshape(1, -1))
            action = self._select_action(obs_t, z, explore, rng)
        return action.reshape(self.act_dim), new_state

    def checkpoint_arrays(self, extra=None):
        arrays = {}
        for prefix, tree in self._trees().items():
            for k, p in tree.items():
                arrays[f"{prefix}/{k}"] = p.data
        arrays.update({f"opt.actor/{k}": v for k, v in self.actor_opt.state_arrays().items()})
        arrays.update({f"opt.critic/{k}": v for k, v in self.critic_opt.state_arrays().items()})
        if extra:
            arrays.update(extra)
        return arrays

    def save(self, path, config_hash=""):
        digest = hashlib.sha256(config_hash.encode()).digest()
        extra = {"_meta/config_hash": np.frombuffer(digest, dtype=np.uint8).astype(np.float64)}
        save_arrays(path, self.checkpoint_arrays(extra))

    def load(self, path, config_hash=None):
        arrays = load_arrays(path)
        if config_hash is not None:
            digest = hashlib.sha256(config_hash.encode()).digest()
            want = np.frombuffer(digest, dtype=np.uint8).astype(np.float64)
            got = arrays.get("_meta/config_hash")
            if got is None or not np.array_equal(got, want):
                raise AgentError("checkpoint was written with a different config")
        for prefix, tree in self._trees().items():
            for k, p in tree.items():
                key = f"{prefix}/{k}"
                if key not in arrays:
                    raise AgentError(f"checkpoint missing {key!r}")
                p.data[...] = arrays[key].reshape(p.data.shape)
        self.actor_opt.load_state_arrays(
            {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("opt.actor/")})
        self.critic_opt.load_state_arrays(
            {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("opt.critic/")})

    def _trees(self):
        return {"actor": self.actor_params, "critic": self.critic_params,
                "target_critic": self.target_critic_params}


class RecurrentTD3(_AgentBase):
    stochastic = False

    def _init_targets_extra(self, rng, enc_kwargs):
        cfg = self.cfg
        self.target_actor_encoder = ContextEncoder(rng, self.obs_dim, self.act_dim, "actor.enc", **enc_kwargs)
        self.target_policy = _DeterministicPolicy(
            rng, self.obs_dim, cfg.context_dim, self.act_dim, self.act_scale, cfg.policy_layers,
            "actor.pi", obs_embed=cfg.obs_embed)
        self.target_actor_params = {**self.target_actor_encoder.params(), **self.target_policy.params()}
        set_requires_grad(self.target_actor_params, False)
        online = {**self.actor_encoder.params(), **self.policy.params()}
        for k in self.target_actor_params:
            self.target_actor_params[k].data[...] = online[k].data

    def _trees(self):
        return {**super()._trees(), "target_actor": self.target_actor_params}

    def _select_action(self, obs_t, z, explore, rng):
        action = self.policy(obs_t, z).data.copy()
        if explore:
            action += rng.normal(0.0, self.cfg.exploration_noise * self.act_scale, size=action.shape)
        return np.clip(action, -self.act_scale, self.act_scale)

    def critic_loss(self, batch, rng):
        """Masked twin TD loss plus the critic encoder's KL term."""
        cfg = self.cfg
        B, L = batch.mask.shape
        valid = batch.mask.sum()
        obs_cur = _flat(batch.obs[:, :-1])
        obs_next = _flat(batch.obs[:, 1:])
        act_flat = _flat(batch.act)
        mask_flat = _flat(batch.mask)

        res_c = self._encode(self.critic_encoder, batch, rng)
        with ad.no_grad():
            res_ct = self._encode(self.target_critic_encoder, batch, rng)
            res_at = self._encode(self.target_actor_encoder, batch, rng)
            z_next = _stack_contexts(res_ct.contexts, 1, L + 1, "sample")
            za_next = _stack_contexts(res_at.contexts, 1, L + 1, "sample")
            a_next = self.target_policy(Tensor(obs_next), za_next).data
            noise = rng.normal(0.0, cfg.target_noise * self.act_scale, size=a_next.shape)
            clip = cfg.target_noise_clip * self.act_scale
            a_next = np.clip(a_next + np.clip(noise, -clip, clip), -self.act_scale, self.act_scale)
            q1t = self.target_q1(Tensor(obs_next), Tensor(a_next), z_next).data
            q2t = self.target_q2(Tensor(obs_next), Tensor(a_next), z_next).data
            target = _flat(batch.rew).reshape(-1, 1) + cfg.gamma * (
                1.0 - _flat(batch.done).reshape(-1, 1)) * np.minimum(q1t, q2t)

        z_cur = _stack_contexts(res_c.contexts, 0, L, "sample")
        obs_cur_t, act_t = Tensor(obs_cur), Tensor(act_flat)
        td1 = self._masked_mean(ad.square(self.q1(obs_cur_t, act_t, z_cur) - target), mask_flat, valid)
        td2 = self._masked_mean(ad.square(self.q2(obs_cur_t, act_t, z_cur) - target), mask_flat, valid)
        kl = self._kl_term(res_c, self._obs_mask(batch), cfg.lambda_critic)
        return td1 + td2 + kl, {"td1": td1.item(), "td2": td2.item(), "kl_critic": kl.item()}

    def actor_loss(self, batch, rng):
        """-Q1 at the policy action plus the actor encoder's KL term."""
        cfg = self.cfg
        B, L = batch.mask.shape
        valid = batch.mask.sum()
        obs_cur = _flat(batch.obs[:, :-1])
        mask_flat = _flat(batch.mask)

        res_a = self._encode(self.actor_encoder, batch, rng)
        z_a = _stack_contexts(res_a.contexts, 0, L, "sample")
        with ad.no_grad():
            res_c = self._encode(self.critic_encoder, batch, rng)
            z_c = _stack_contexts(res_c.contexts, 0, L, "sample")

        obs_t = Tensor(obs_cur)
        a_pi = self.policy(obs_t, z_a)
        set_requires_grad(self.critic_params, False)
        try:
            q1 = self.q1(obs_t, a_pi, z_c)
        finally:
            set_requires_grad(self.critic_params, True)
        loss = -1.0 * self._masked_mean(q1, mask_flat, valid)
        if not cfg.shared_encoder:
            kl = self._kl_term(res_a, self._obs_mask(batch), cfg.lambda_actor)
            loss = loss + kl
            kl_val = kl.item()
        else:
            kl_val = 0.0
        return loss, {"kl_actor": kl_val}

    def update(self, batch, rng):
        """One critic step; actor and targets every policy_delay-th call."""
        self.critic_opt.zero_grad()
        self.actor_opt.zero_grad()
        closs, cinfo = self.critic_loss(batch, rng)
        if not np.isfinite(closs.data):
            raise AgentError("non-finite critic loss")
        ad.backward(closs)
        self.critic_opt.step()
        self.updates += 1

        metrics = {"critic_loss": closs.item(), **cinfo, **self._last}
        if self.updates % self.cfg.policy_delay == 0:
            self.critic_opt.zero_grad()
            self.actor_opt.zero_grad()
            aloss, ainfo = self.actor_loss(batch, rng)
            if not np.isfinite(aloss.data):
                raise AgentError("non-finite actor loss")
            ad.backward(aloss)
            self.actor_opt.step()
            self.actor_updates += 1
            polyak_update(self.critic_params, self.target_critic_params, self.cfg.tau)
            online_actor = {**self.actor_encoder.params(), **self.policy.params()}
            polyak_update(online_actor, self.target_actor_params, self.cfg.tau)
            self._last = {"actor_loss": aloss.item(), **ainfo}
            metrics.update(self._last)
        return metrics


class RecurrentSAC(_AgentBase):
    stochastic = True

    def _init_targets_extra(self, rng, enc_kwargs):
        self.log_alpha = Tensor(np.array([math.log(self.cfg.sac_alpha)]), requires_grad=True,
                                name="alpha.log")
        self.alpha_opt = Adam({"alpha.log": self.log_alpha}, lr=self.cfg.alpha_lr)
        self.target_entropy = -float(self.act_dim)

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha.data[0]))

    def _select_action(self, obs_t, z, explore, rng):
        if explore:
            eps = rng.standard_normal((1, self.act_dim))
            action, _ = self.policy.sample(obs_t, z, eps)
        else:
            action = self.policy.mean_action(obs_t, z)
        return action.data.copy()

    def critic_loss(self, batch, rng):
        cfg = self.cfg
        B, L = batch.mask.shape
        valid = batch.mask.sum()
        obs_cur = _flat(batch.obs[:, :-1])
        obs_next = _flat(batch.obs[:, 1:])
        act_flat = _flat(batch.act)
        mask_flat = _flat(batch.mask)

        res_c = self._encode(self.critic_encoder, batch, rng)
        with ad.no_grad():
            res_ct = self._encode(self.target_critic_encoder, batch, rng)
            res_a = self._encode(self.actor_encoder, batch, rng)
            z_next_t = _stack_contexts(res_ct.contexts, 1, L + 1, "sample")
            z_a_next = _stack_contexts(res_a.contexts, 1, L + 1, "sample")
            eps = rng.standard_normal((obs_next.shape[0], self.act_dim))
            a_next, logp_next = self.policy.sample(Tensor(obs_next), z_a_next, eps)
            q1t = self.target_q1(Tensor(obs_next), a_next, z_next_t).data
            q2t = self.target_q2(Tensor(obs_next), a_next, z_next_t).data
            soft_v = np.minimum(q1t, q2t) - self.alpha * logp_next.data
            target = _flat(batch.rew).reshape(-1, 1) + cfg.gamma * (
                1.0 - _flat(batch.done).reshape(-1, 1)) * soft_v

        z_cur = _stack_contexts(res_c.contexts, 0, L, "sample")
        obs_cur_t, act_t = Tensor(obs_cur), Tensor(act_flat)
        td1 = self._masked_mean(ad.square(self.q1(obs_cur_t, act_t, z_cur) - target), mask_flat, valid)
        td2 = self._masked_mean(ad.square(self.q2(obs_cur_t, act_t, z_cur) - target), mask_flat, valid)
        kl = self._kl_term(res_c, self._obs_mask(batch), cfg.lambda_critic)
        return td1 + td2 + kl, {"td1": td1.item(), "td2": td2.item(), "kl_critic": kl.item()}

    def actor_and_alpha_loss(self, batch, rng):
        cfg = self.cfg
        B, L = batch.mask.shape
        valid = batch.mask.sum()
        obs_cur = _flat(batch.obs[:, :-1])
        mask_flat = _flat(batch.mask)

        res_a = self._encode(self.actor_encoder, batch, rng)
        z_a = _stack_contexts(res_a.contexts, 0, L, "sample")
        with ad.no_grad():
            res_c = self._encode(self.critic_encoder, batch, rng)
            z_c = Tensor(_stack_contexts(res_c.contexts, 0, L, "sample").data)

        obs_t = Tensor(obs_cur)
        eps = rng.standard_normal((obs_cur.shape[0], self.act_dim))
        a_pi, logp = self.policy.sample(obs_t, z_a, eps)
        set_requires_grad(self.critic_params, False)
        try:
            qmin = ad.minimum(self.q1(obs_t, a_pi, z_c), self.q2(obs_t, a_pi, z_c))
        finally:
            set_requires_grad(self.critic_params, True)
        loss = self._masked_mean(logp * self.alpha - qmin, mask_flat, valid)
        kl_val = 0.0
        if not cfg.shared_encoder:
            kl = self._kl_term(res_a, self._obs_mask(batch), cfg.lambda_actor)
            loss = loss + kl
            kl_val = kl.item()

        alpha_loss = None
        if cfg.sac_auto_alpha:
            # stop-gradient on log-probs; only log_alpha is trained here
            mean_term = float(((logp.data + self.target_entropy) * mask_flat.reshape(-1, 1)).sum() / valid)
            alpha_loss = ad.tsum(self.log_alpha * -mean_term)
        return loss, alpha_loss, {"kl_actor": kl_val, "entropy": float(-logp.data.mean())}

    def sac_losses(self, batch, rng):
        """(critic loss, actor loss, alpha loss) for one batch."""
        closs, _ = self.critic_loss(batch, rng)
        aloss, alpha_loss, _ = self.actor_and_alpha_loss(batch, rng)
        return closs, aloss, alpha_loss

    def update(self, batch, rng):
        self.critic_opt.zero_grad()
        self.actor_opt.zero_grad()
        closs, cinfo = self.critic_loss(batch, rng)
        if not np.isfinite(closs.data):
            raise AgentError("non-finite critic loss")
        ad.backward(closs)
        self.critic_opt.step()
        self.updates += 1

        self.critic_opt.zero_grad()
        self.actor_opt.zero_grad()
        aloss, alpha_loss, ainfo = self.actor_and_alpha_loss(batch, rng)
        if not np.isfinite(aloss.data):
            raise AgentError("non-finite actor loss")
        ad.backward(aloss)
        self.actor_opt.step()
        self.actor_updates += 1
        if alpha_loss is not None:
            self.alpha_opt.zero_grad()
            ad.backward(alpha_loss)
            self.alpha_opt.step()
        polyak_update(self.critic_params, self.target_critic_params, self.cfg.tau)
        return {"critic_loss": closs.item(), **cinfo, "actor_loss": aloss.item(),
                "alpha": self.alpha, **ainfo}

    def _trees(self):
        return {**super()._trees(), "alpha": {"alpha.log": self.log_alpha}}

    def checkpoint_arrays(self, extra=None):
        arrays = super().checkpoint_arrays(extra)
        arrays.update({f"opt.alpha/{k}": v for k, v in self.alpha_opt.state_arrays().items()})
        return arrays

    def load(self, path, config_hash=None):
        super().load(path, config_hash)
        arrays = load_arrays(path)
        self.alpha_opt.load_state_arrays(
            {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("opt.alpha/")})


AGENT_TYPES = {"td3": RecurrentTD3, "sac": RecurrentSAC}


def make_agent(name, rng, obs_dim, act_dim, act_scale, cfg):
    if name not in AGENT_TYPES:
        raise AgentError(f"unknown agent {name!r}, expected one of {tuple(AGENT_TYPES)}")
    return AGENT_TYPES[name](rng, obs_dim, act_dim, act_scale, cfg)
