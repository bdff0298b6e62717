"""Fixed-step explicit ODE solvers for the continuous hidden-state transition.

All schemes are differentiable through both the vector field and the initial
state because each step is composed from taped tensor ops. dt may be a float
or a per-row (B, 1) array for irregularly sampled batches.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Mlp

SOLVERS = ("euler", "heun", "rk4")

DEFAULT_DYNAMICS_LAYERS = (128, 128)


class OdeError(ValueError):
    pass


class HiddenDynamics:
    """Autonomous vector field f: R^d_h -> R^d_h as a tanh MLP."""

    def __init__(self, rng, d_h, prefix, hidden=DEFAULT_DYNAMICS_LAYERS):
        self.d_h = d_h
        self.mlp = Mlp(rng, [d_h, *hidden, d_h], prefix, hidden="tanh")

    def __call__(self, h):
        return self.mlp(h)

    def params(self):
        return self.mlp.params()


def _euler_step(f, h, dt):
    return h + dt * f(h)


def _heun_step(f, h, dt):
    k1 = f(h)
    k2 = f(h + dt * k1)
    return h + (0.5 * dt) * (k1 + k2)


def _rk4_step(f, h, dt):
    k1 = f(h)
    k2 = f(h + (0.5 * dt) * k1)
    k3 = f(h + (0.5 * dt) * k2)
    k4 = f(h + dt * k3)
    return h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_STEPPERS = {"euler": _euler_step, "heun": _heun_step, "rk4": _rk4_step}


def ode_solve(f, h0, dt, method="euler", substeps=1):
    """Advance h0 over an interval dt with `substeps` steps of the scheme."""
    if method not in _STEPPERS:
        raise OdeError(f"unknown solver {method!r}, expected one of {SOLVERS}")
    if substeps < 1:
        raise OdeError(f"substeps must be >= 1, got {substeps}")
    if np.any(np.asarray(dt) <= 0.0):
        raise OdeError(f"dt must be positive, got {dt}")
    step = _STEPPERS[method]
    sub_dt = dt / substeps if substeps > 1 else dt
    h = h0 if isinstance(h0, Tensor) else Tensor(h0)
    for i in range(substeps):
        h = step(f, h, sub_dt)
        if not np.all(np.isfinite(h.data)):
            raise OdeError(f"non-finite state after {method} substep {i + 1}/{substeps}")
    return h


def convergence_order(f, h0, horizon, method, step_sizes, exact_final):
    """Log-log slope of global error at `horizon` versus step size.

    Integrates the scalar/vector problem dh/dt = f(h) from h0 with a fixed
    step for each size and regresses log(error) on log(step).
    """
    if len(step_sizes) < 3:
        raise OdeError(f"need at least 3 step sizes, got {len(step_sizes)}")
    errors = []
    exact = np.asarray(exact_final, dtype=np.float64)
    for s in step_sizes:
        n = int(round(horizon / s))
        if abs(n * s - horizon) > 1e-9 * horizon:
            raise OdeError(f"step size {s} does not divide horizon {horizon}")
        with ad.no_grad():
            h = Tensor(np.asarray(h0, dtype=np.float64))
            for _ in range(n):
                h = _STEPPERS[method](f, h, s)
        errors.append(np.linalg.norm(h.data - exact))
    slope = np.polyfit(np.log(np.asarray(step_sizes)), np.log(np.asarray(errors)), 1)[0]
    return float(slope)
