"""Finite-difference gradient checks and the solver convergence suite.

Central differences with step 1e-6 on float64 leave ~1e-9 headroom against
the 1e-5 acceptance threshold, so a failure here means a wrong derivative,
not noise. Each check rebuilds the forward pass per evaluation, so any
randomness must come from an rng reseeded inside the closure.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .agents import AgentConfig, RecurrentSAC, RecurrentTD3
from .encoder import ContextEncoder
from .nn import GaussianHead, GruCell, InputEmbedder, Linear, Mlp
from .odeint import HiddenDynamics, SOLVERS, convergence_order, ode_solve
from .replay import SequenceBatch

FD_STEP = 1e-6
TOL_OPS = 1e-5
TOL_SEQUENCE = 1e-4

ORDER_TOLERANCES = {"euler": (1.0, 0.15), "heun": (2.0, 0.25), "rk4": (4.0, 0.5)}


def numeric_grad(fn, tensor, step=FD_STEP):
    """Central-difference gradient of scalar fn() w.r.t. tensor.data."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn().data)
        flat[i] = orig - step
        lo = float(fn().data)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def check_grads(fn, params, tol=TOL_OPS, step=FD_STEP, freeze_encoders=()):
    """Max relative error between taped and numeric grads over a param tree.

    Relative error uses max(1, |analytic|, |numeric|) as denominator, i.e.
    absolute error for small gradients. Encoders listed in freeze_encoders
    get their stop-gradient priors pinned at the base point first, so the
    numeric difference probes the same function the tape differentiates.
    """
    params = dict(params)
    for p in params.values():
        p.grad = None
    try:
        for enc in freeze_encoders:
            enc.record_priors = True
        if freeze_encoders:
            fn()
        for enc in freeze_encoders:
            enc.record_priors = False
            enc.frozen_priors = list(enc.recorded_priors)
        loss = fn()
        ad.backward(loss)
        worst = 0.0
        worst_name = None
        for name, p in params.items():
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            numeric = numeric_grad(fn, p, step)
            denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
            err = float((np.abs(analytic - numeric) / denom).max())
            if err > worst:
                worst, worst_name = err, name
        return worst, worst_name, worst <= tol
    finally:
        for enc in freeze_encoders:
            enc.frozen_priors = None
            enc.record_priors = False


def _leaf(rng, shape, name):
    return ad.Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _op_cases(rng):
    """Every forward op with at least three input shapes each."""
    shapes2 = [(1, 1), (2, 3), (4, 5)]
    cases = []

    for si, shape in enumerate(shapes2):
        a = _leaf(rng, shape, "a")
        b = _leaf(rng, shape, "b")
        bias = _leaf(rng, shape[-1:], "bias")
        pos = ad.Tensor(rng.uniform(0.5, 2.0, shape), requires_grad=True, name="pos")
        w = _leaf(rng, (shape[1], 3), "w")
        eps = rng.standard_normal(shape)
        cases += [
            (f"add/{si}", {"a": a, "b": b}, lambda a=a, b=b: ad.mean(ad.add(a, b))),
            (f"add_bias/{si}", {"a": a, "bias": bias}, lambda a=a, bias=bias: ad.mean(ad.add(a, bias))),
            (f"sub/{si}", {"a": a, "b": b}, lambda a=a, b=b: ad.mean(ad.sub(a, b))),
            (f"mul/{si}", {"a": a, "b": b}, lambda a=a, b=b: ad.mean(ad.mul(a, b))),
            (f"div/{si}", {"a": a, "pos": pos}, lambda a=a, pos=pos: ad.mean(ad.div(a, pos))),
            (f"neg/{si}", {"a": a}, lambda a=a: ad.mean(ad.neg(a))),
            (f"matmul/{si}", {"a": a, "w": w}, lambda a=a, w=w: ad.mean(ad.matmul(a, w))),
            (f"concat/{si}", {"a": a, "b": b},
             lambda a=a, b=b: ad.mean(ad.square(ad.concat([a, b], axis=-1)))),
            (f"rows/{si}", {"a": a}, lambda a=a, n=shape[0]: ad.mean(ad.square(ad.rows(a, 0, max(1, n - 1))))),
            (f"cols/{si}", {"a": a}, lambda a=a, n=shape[1]: ad.mean(ad.square(ad.cols(a, 0, max(1, n - 1))))),
            (f"tanh/{si}", {"a": a}, lambda a=a: ad.mean(ad.tanh(a))),
            (f"sigmoid/{si}", {"a": a}, lambda a=a: ad.mean(ad.sigmoid(a))),
            (f"relu/{si}", {"a": a}, lambda a=a: ad.mean(ad.relu(a))),
            (f"softplus/{si}", {"a": a}, lambda a=a: ad.mean(ad.softplus(a))),
            (f"exp/{si}", {"a": a}, lambda a=a: ad.mean(ad.exp(a))),
            (f"log/{si}", {"pos": pos}, lambda pos=pos: ad.mean(ad.log(pos))),
            (f"square/{si}", {"a": a}, lambda a=a: ad.mean(ad.square(a))),
            (f"clamp/{si}", {"pos": pos}, lambda pos=pos: ad.mean(ad.clamp(pos, 0.6, 1.9))),
            (f"minimum/{si}", {"a": a, "b": b}, lambda a=a, b=b: ad.mean(ad.minimum(a, b))),
            (f"mean/{si}", {"a": a}, lambda a=a: ad.mean(ad.square(a))),
            (f"sum/{si}", {"a": a}, lambda a=a: ad.tsum(ad.square(a))),
            (f"sum_axis/{si}", {"a": a}, lambda a=a: ad.mean(ad.square(ad.tsum(a, axis=-1)))),
            (f"reparameterize/{si}", {"a": a, "pos": pos},
             lambda a=a, pos=pos, eps=eps: ad.mean(ad.gaussian_reparameterize(a, pos, eps))),
        ]
    return cases


def _nn_cases(rng):
    cases = []
    lin = Linear(rng, 3, 2, "lin")
    x = rng.standard_normal((4, 3))
    cases.append(("nn.linear", lin.params(),
                  lambda: ad.mean(ad.square(lin(ad.Tensor(x))))))

    mlp = Mlp(rng, [3, 5, 2], "mlp", hidden="tanh")
    cases.append(("nn.mlp", mlp.params(),
                  lambda: ad.mean(ad.square(mlp(ad.Tensor(x))))))

    gru = GruCell(rng, 3, 4, "gru")
    h = rng.standard_normal((2, 4))
    xg = rng.standard_normal((2, 3))
    cases.append(("nn.gru_cell", gru.params(),
                  lambda: ad.tsum(gru(ad.Tensor(h), ad.Tensor(xg)))))

    head = GaussianHead(rng, 4, 3, "head")

    def head_loss():
        mu, sigma = head(ad.Tensor(h))
        return ad.mean(ad.square(mu)) + ad.mean(ad.square(sigma))

    cases.append(("nn.gaussian_head", head.params(), head_loss))

    emb = InputEmbedder(rng, 2, 1, "oar", "emb", obs_embed=4, act_embed=3, rew_embed=2)
    o = rng.standard_normal((2, 2))
    a = rng.standard_normal((2, 1))
    r = rng.standard_normal((2, 1))
    cases.append(("nn.embed_input", emb.params(),
                  lambda: ad.mean(ad.square(emb(ad.Tensor(o), ad.Tensor(a), ad.Tensor(r))))))
    return cases


def _ode_cases(rng):
    cases = []
    for method in SOLVERS:
        dyn = HiddenDynamics(rng, 3, f"dyn_{method}", hidden=(5,))
        h0 = ad.Tensor(rng.standard_normal((2, 3)), requires_grad=True, name="h0")
        params = {**dyn.params(), "h0": h0}
        cases.append((f"odeint.{method}", params,
                      lambda dyn=dyn, h0=h0, m=method: ad.tsum(ode_solve(dyn, h0, 0.3, m, substeps=2))))
    return cases


def _encoder_case(rng, seq_len=8):
    enc = ContextEncoder(rng, 2, 1, "enc", input_mode="oar", hidden_dim=6, context_dim=3,
                         embed_dims=(4, 3, 2), dyn_hidden=(5,))
    B, T = 2, seq_len
    obs = rng.standard_normal((B, T, 2))
    a_prev = rng.standard_normal((B, T, 1))
    rew = rng.standard_normal((B, T, 1))
    dt = rng.uniform(0.05, 0.15, (B, T))
    eps = [rng.standard_normal((B, 3)) for _ in range(T)]

    def loss():
        res = enc.encode_arrays(obs, a_prev, rew, dt)
        total = ad.tsum(res.kl_total)
        for t, ctx in enumerate(res.contexts):
            total = total + ad.tsum(ad.square(ad.gaussian_reparameterize(ctx.mu, ctx.sigma, eps[t])))
        return total

    return ("encoder.sequence", enc.params(), loss, (enc,))


def tiny_batch(rng, obs_dim=2, act_dim=1, B=2, L=3):
    L_valid = [L, L - 1]
    obs = rng.standard_normal((B, L + 1, obs_dim))
    a_prev = rng.standard_normal((B, L + 1, act_dim))
    r_arr = rng.standard_normal((B, L + 1, 1))
    dt = rng.uniform(0.05, 0.15, (B, L + 1))
    act = rng.uniform(-1, 1, (B, L, act_dim))
    rew = rng.standard_normal((B, L))
    done = np.zeros((B, L))
    mask = np.zeros((B, L))
    for i, v in enumerate(L_valid):
        mask[i, :v] = 1.0
        if v < L:
            done[i, v - 1] = 1.0
    return SequenceBatch(obs, a_prev, r_arr, dt, act, rew, done, mask)


def tiny_agent_config(**overrides):
    base = dict(hidden_dim=6, context_dim=3, policy_layers=(8,), dqn_layers=(8,),
                obs_embed=4, act_embed=3, rew_embed=2, dyn_hidden=(5,))
    base.update(overrides)
    return AgentConfig(**base)


def _agent_cases(rng):
    cases = []
    batch = tiny_batch(rng)

    td3 = RecurrentTD3(rng, 2, 1, 1.0, tiny_agent_config())
    cases.append(("agents.td3_critic_loss", td3.critic_params,
                  lambda: td3.critic_loss(batch, np.random.default_rng(7))[0],
                  (td3.critic_encoder,)))
    cases.append(("agents.td3_actor_loss", td3.actor_params,
                  lambda: td3.actor_loss(batch, np.random.default_rng(11))[0],
                  (td3.actor_encoder,)))

    sac = RecurrentSAC(rng, 2, 1, 1.0, tiny_agent_config())
    cases.append(("agents.sac_critic_loss", sac.critic_params,
                  lambda: sac.critic_loss(batch, np.random.default_rng(13))[0],
                  (sac.critic_encoder,)))
    cases.append(("agents.sac_actor_loss", sac.actor_params,
                  lambda: sac.actor_and_alpha_loss(batch, np.random.default_rng(17))[0],
                  (sac.actor_encoder,)))
    return cases


def run_gradient_suite(log=print, seed=0):
    """All finite-difference checks; returns True when every case passes."""
    rng = np.random.default_rng(seed)
    groups = [
        (TOL_OPS, _op_cases(rng)),
        (TOL_OPS, _nn_cases(rng)),
        (TOL_OPS, _ode_cases(rng)),
        (TOL_SEQUENCE, [_encoder_case(rng)]),
        (TOL_SEQUENCE, _agent_cases(rng)),
    ]
    all_ok = True
    for tol, cases in groups:
        for case in cases:
            name, params, fn = case[:3]
            freeze = case[3] if len(case) > 3 else ()
            err, worst, ok = check_grads(fn, params, tol=tol, freeze_encoders=freeze)
            all_ok &= ok
            status = "PASS" if ok else "FAIL"
            log(f"[{status}] {name}: max rel err {err:.3e} (tol {tol:g}, worst {worst})")
    return all_ok


def run_order_suite(log=print):
    """Empirical convergence orders on dh/dt = -h against e^{-t}."""
    steps = [0.1, 0.05, 0.025, 0.0125]
    field = lambda h: -1.0 * h
    all_ok = True
    for method, (want, tol) in ORDER_TOLERANCES.items():
        slope = convergence_order(field, np.array([1.0]), 1.0, method, steps, np.exp(-1.0))
        ok = abs(slope - want) <= tol
        all_ok &= ok
        log(f"[{'PASS' if ok else 'FAIL'}] {method}: slope {slope:.4f} (want {want} +- {tol})")
    return all_ok
