"""Recurrent context encoder with a continuously evolved hidden state.

Each step folds the embedded input into the hidden state with a GRU cell,
evolves the result through a learned vector field over the observation
interval dt, and reads out a diagonal Gaussian context:

    h_tilde = gru(h, x_t)
    h'      = ode_solve(f, h_tilde, dt_t)
    mu, sigma = head(h')

The per-step KL regularizer is computed against the previous step's
posterior (detached), starting from a standard normal prior at h = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import GaussianHead, GruCell, InputEmbedder, SIGMA_FLOOR
from .odeint import HiddenDynamics, ode_solve

HIDDEN_DIM = 128
CONTEXT_DIM = 32


class EncodeError(ValueError):
    pass


@dataclass
class GaussianContext:
    mu: Tensor
    sigma: Tensor
    sample: Tensor


@dataclass
class EncoderState:
    h: Tensor            # (B, d_h)
    prior_mu: np.ndarray     # (B, d_z), detached
    prior_sigma: np.ndarray  # (B, d_z), detached
    t: int = 0


def gaussian_kl(mu, sigma, prior_mu, prior_sigma):
    """KL(N(mu, sigma) || N(prior_mu, prior_sigma)) summed over the last axis.

    Diagonal Gaussians; priors are held constant (no gradient). Per dimension:
    log(sp / s) + ((mu - mp)^2 + s^2) / (2 sp^2) - 1/2.
    """
    prior_mu = np.asarray(prior_mu, dtype=np.float64)
    prior_sigma = np.asarray(prior_sigma, dtype=np.float64)
    inv_two_var = 1.0 / (2.0 * prior_sigma**2)
    terms = (
        ad.log(sigma) * -1.0
        + np.log(prior_sigma)
        + (ad.square(mu - prior_mu) + ad.square(sigma)) * inv_two_var
        - 0.5
    )
    return ad.tsum(terms, axis=-1)


def gaussian_kl_value(mu, sigma, prior_mu, prior_sigma):
    """Closed-form KL on plain arrays (no tape)."""
    mu, sigma = np.asarray(mu, float), np.asarray(sigma, float)
    prior_mu, prior_sigma = np.asarray(prior_mu, float), np.asarray(prior_sigma, float)
    per_dim = (
        np.log(prior_sigma / sigma)
        + ((mu - prior_mu) ** 2 + sigma**2) / (2.0 * prior_sigma**2)
        - 0.5
    )
    return per_dim.sum(axis=-1)


@dataclass
class EncodeResult:
    contexts: list            # GaussianContext per step
    kls: list                 # (B,) Tensor per step
    state: EncoderState

    @property
    def kl_total(self):
        total = self.kls[0]
        for kl in self.kls[1:]:
            total = total + kl
        return total


class ContextEncoder:
    """Embedder + GRU cell + hidden dynamics + Gaussian context head."""

    def __init__(self, rng, obs_dim, act_dim, prefix, input_mode="oar",
                 hidden_dim=HIDDEN_DIM, context_dim=CONTEXT_DIM,
                 solver="euler", substeps=1, sigma_floor=SIGMA_FLOOR,
                 embed_dims=None, dyn_hidden=None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden_dim = hidden_dim
        self.context_dim = context_dim
        self.solver = solver
        self.substeps = substeps
        embed_kwargs = {}
        if embed_dims is not None:
            embed_kwargs = dict(zip(("obs_embed", "act_embed", "rew_embed"), embed_dims))
        self.embedder = InputEmbedder(rng, obs_dim, act_dim, input_mode, f"{prefix}.embed", **embed_kwargs)
        self.gru = GruCell(rng, self.embedder.out_dim, hidden_dim, f"{prefix}.gru")
        dyn_kwargs = {} if dyn_hidden is None else {"hidden": dyn_hidden}
        self.dynamics = HiddenDynamics(rng, hidden_dim, f"{prefix}.dyn", **dyn_kwargs)
        self.head = GaussianHead(rng, hidden_dim, context_dim, f"{prefix}.head", sigma_floor=sigma_floor)
        # finite-difference checks freeze the stop-gradient priors at the base
        # point so numeric and taped gradients differentiate the same function
        self.frozen_priors = None
        self.record_priors = False
        self.recorded_priors = []

    def params(self):
        out = {}
        for module in (self.embedder, self.gru, self.dynamics, self.head):
            out.update(module.params())
        return out

    def initial_state(self, batch=1):
        return EncoderState(
            h=Tensor(np.zeros((batch, self.hidden_dim))),
            prior_mu=np.zeros((batch, self.context_dim)),
            prior_sigma=np.ones((batch, self.context_dim)),
        )

    def _advance(self, state, x, dt, eps):
        h_tilde = self.gru(state.h, x)
        h_next = ode_solve(self.dynamics, h_tilde, dt, self.solver, self.substeps)
        if not np.all(np.isfinite(h_next.data)):
            raise EncodeError(f"non-finite hidden state at step {state.t}")
        mu, sigma = self.head(h_next)
        sample = ad.gaussian_reparameterize(mu, sigma, eps) if eps is not None else mu
        prior_mu, prior_sigma = state.prior_mu, state.prior_sigma
        if self.frozen_priors is not None:
            prior_mu, prior_sigma = self.frozen_priors[state.t]
        elif self.record_priors:
            self.recorded_priors.append((prior_mu, prior_sigma))
        kl = gaussian_kl(mu, sigma, prior_mu, prior_sigma)
        new_state = EncoderState(
            h=h_next, prior_mu=mu.data.copy(), prior_sigma=sigma.data.copy(), t=state.t + 1
        )
        return new_state, GaussianContext(mu, sigma, sample), kl

    def step(self, state, obs, a_prev, reward, dt, eps=None):
        """One online encoding step from raw (o, a_prev, r) arrays."""
        obs = obs if isinstance(obs, Tensor) else Tensor(np.atleast_2d(obs))
        a_prev = a_prev if isinstance(a_prev, Tensor) else Tensor(np.atleast_2d(a_prev))
        reward = reward if isinstance(reward, Tensor) else Tensor(np.atleast_2d(reward))
        x = self.embedder(obs, a_prev, reward)
        return self._advance(state, x, dt, eps)

    def encode_embedded(self, x_steps, dt_steps, eps_steps=None):
        """Left-fold over already-embedded per-step inputs (spec-shaped API)."""
        if not x_steps:
            raise EncodeError("encode: empty sequence")
        if self.record_priors:
            self.recorded_priors = []
        batch = x_steps[0].shape[0]
        state = self.initial_state(batch)
        contexts, kls = [], []
        for t, (x, dt) in enumerate(zip(x_steps, dt_steps)):
            eps = None if eps_steps is None else eps_steps[t]
            state, ctx, kl = self._advance(state, x, dt, eps)
            contexts.append(ctx)
            kls.append(kl)
        return EncodeResult(contexts, kls, state)

    def encode_arrays(self, obs, a_prev, rew, dt, rng=None):
        """Encode a (B, T, ...) batch; embeds all steps in one fused pass.

        rng draws the reparameterization noise; None gives deterministic
        contexts (sample == mu).
        """
        obs = np.asarray(obs, dtype=np.float64)
        a_prev = np.asarray(a_prev, dtype=np.float64)
        rew = np.asarray(rew, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        B, T = obs.shape[0], obs.shape[1]
        # time-major flattening keeps each step's rows contiguous
        flat = lambda a, d: Tensor(np.ascontiguousarray(a.swapaxes(0, 1).reshape(T * B, d)))
        x_all = self.embedder(flat(obs, self.obs_dim), flat(a_prev, self.act_dim), flat(rew, 1))
        x_steps = [ad.rows(x_all, t * B, (t + 1) * B) for t in range(T)]
        dt_steps = [dt[:, t].reshape(B, 1) for t in range(T)]
        eps_steps = None
        if rng is not None:
            eps_steps = [rng.standard_normal((B, self.context_dim)) for _ in range(T)]
        return self.encode_embedded(x_steps, dt_steps, eps_steps)
