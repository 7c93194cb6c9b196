"""Time integration for evolution equations with a convolution memory term.

Two steppers discretize the same problem
``B dv/dt + int_0^t ktil(t-s) A v(s) ds + C v = phi(t)``:

* the compressed stepper keeps one auxiliary grid function per exponential
  term of the kernel and advances everything with a two-level weighted
  scheme, solving a single shifted SPD system per step;
* the full-history baseline evaluates the memory integral with a
  trapezoidal product rule over all past levels, so its memory and per-step
  cost grow linearly with the step index.

The weighted scheme is unconditionally stable for weight sigma >= 0.5; the
composite energy ``(|y|_B^2 + sum_i a_i |y_i|_A^2)**0.5`` is then
non-increasing for zero forcing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import GridFunction, l2_norm
from .kernels import PronySeries, prony_eval
from .operators import (
    IdentityOperator,
    ScaledSum,
    SpdOperator,
    a_norm,
    cg_solve,
)

__all__ = [
    "SchemeConfig",
    "ProblemSpec",
    "SoeState",
    "HistoryState",
    "SchemeConfigError",
    "AuxiliaryResidualError",
    "soe_init",
    "soe_step",
    "general_step",
    "history_init",
    "quadrature_step",
    "energy",
    "scalar_ode_oracle",
]

ForcingFn = Callable[[float], GridFunction]


class SchemeConfigError(ValueError):
    """Invalid scheme configuration (weight, step, counts)."""


class AuxiliaryResidualError(AssertionError):
    """The per-step auxiliary-equation residual exceeded rounding scale."""


@dataclass(frozen=True)
class SchemeConfig:
    """Two-level weighted scheme parameters.

    sigma in (0, 1] is the implicitness weight (0.5 symmetric, 1 backward
    Euler); sigma >= 0.5 guarantees unconditional stability.  When
    ``forcing_blend`` is set, the mid-level forcing is the sigma-blend of
    the two level values instead of a point evaluation at t_n + sigma*tau.
    """

    sigma: float
    tau: float
    n_steps: int = 1
    cg_tol: float = 1e-10
    cg_max_iter: Optional[int] = None
    forcing_blend: bool = False
    check_residuals: bool = True

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise SchemeConfigError(f"sigma={self.sigma} must lie in (0, 1]")
        if not self.tau > 0:
            raise SchemeConfigError(f"tau={self.tau} must be > 0")
        if self.n_steps < 1:
            raise SchemeConfigError(f"n_steps={self.n_steps} must be >= 1")

    @property
    def stability_guaranteed(self) -> bool:
        return self.sigma >= 0.5


@dataclass(frozen=True)
class ProblemSpec:
    """Memory problem  mass * dv/dt + int ktil(t-s) A v ds + reaction*v = phi.

    ``operator`` is the positive definite spatial operator under the memory
    integral; ``mass`` (positive definite, default identity) multiplies the
    time derivative; ``reaction`` (positive semidefinite) is an optional
    zeroth-order term.  ``forcing`` maps a time to a grid function; None
    means zero forcing.
    """

    operator: SpdOperator
    kernel: PronySeries
    initial: GridFunction
    forcing: Optional[ForcingFn] = None
    mass: SpdOperator = field(default_factory=IdentityOperator)
    reaction: Optional[SpdOperator] = None

    @property
    def is_plain(self) -> bool:
        """True when mass is the identity and there is no reaction term."""
        return isinstance(self.mass, IdentityOperator) and self.reaction is None


@dataclass(frozen=True)
class SoeState:
    """Compressed stepper state: solution plus one memory function per term."""

    y: GridFunction
    aux: tuple[GridFunction, ...]
    n: int
    t: float


@dataclass(frozen=True)
class HistoryState:
    """Baseline state: every past level (the linear growth is the point).

    ``applied`` caches the spatial operator applied to each level so the
    quadrature does not reapply the stencil to the whole history each step.
    """

    ys: tuple[GridFunction, ...]
    applied: tuple[GridFunction, ...]
    n: int
    t: float


def _forcing_value(p: ProblemSpec, cfg: SchemeConfig, t_n: float) -> Optional[GridFunction]:
    if p.forcing is None:
        return None
    if cfg.forcing_blend:
        return cfg.sigma * p.forcing(t_n + cfg.tau) + (1.0 - cfg.sigma) * p.forcing(t_n)
    return p.forcing(t_n + cfg.sigma * cfg.tau)


def soe_init(p: ProblemSpec) -> SoeState:
    """Initial state: y = u0, all compressed memory functions zero."""
    zeros = tuple(p.initial.grid.zeros() for _ in range(p.kernel.n_terms))
    return SoeState(y=p.initial, aux=zeros, n=0, t=0.0)


def _check_aux_residual(cfg: SchemeConfig, b_i: float, y_new, y_old, yi_new, yi_old):
    sig, tau = cfg.sigma, cfg.tau
    residual = (
        (yi_new - yi_old) / tau
        + b_i * (sig * yi_new + (1.0 - sig) * yi_old)
        - (sig * y_new + (1.0 - sig) * y_old)
    )
    bound = 1e-12 * (l2_norm(y_new) + l2_norm(yi_new)) / tau
    r = l2_norm(residual)
    if r > bound:
        raise AuxiliaryResidualError(
            f"auxiliary update residual {r:.3e} exceeds rounding bound {bound:.3e} "
            f"(rate b={b_i})"
        )


def _weighted_step(p: ProblemSpec, cfg: SchemeConfig, s: SoeState) -> SoeState:
    """Shared elimination core of the compressed weighted scheme.

    The auxiliary update is derived algebraically from the implicit
    auxiliary equation: (1 + sigma*b_i*tau) y_i_new =
    (1 - (1-sigma)*b_i*tau) y_i + tau*(sigma*y_new + (1-sigma)*y).
    """
    sig, tau = cfg.sigma, cfg.tau
    a = p.kernel.weights
    b = p.kernel.rates
    y = s.y

    denom = [1.0 + sig * bi * tau for bi in b]
    chi = [
        ((1.0 - sig) * tau * y + (1.0 - (1.0 - sig) * bi * tau) * yi) / di
        for bi, di, yi in zip(b, denom, s.aux)
    ]
    mu = math.fsum(sig * ai * tau / di for ai, di in zip(a, denom))

    # sum_i a_i * A((1-sigma) y_i + sigma chi_i), with the single operator
    # application pulled outside the sum by linearity.
    mem_values = np.zeros(y.grid.shape)
    for ai, yi, ci in zip(a, s.aux, chi):
        mem_values += ai * ((1.0 - sig) * yi.values + sig * ci.values)
    memory_term = p.operator.apply(GridFunction(y.grid, mem_values))

    rhs = p.mass.apply(y)
    if p.reaction is not None:
        rhs = rhs - ((1.0 - sig) * tau) * p.reaction.apply(y)
    rhs = rhs - tau * memory_term
    phi = _forcing_value(p, cfg, s.t)
    if phi is not None:
        rhs = rhs + tau * phi

    terms = [(1.0, p.mass), (sig * tau * mu, p.operator)]
    if p.reaction is not None:
        terms.append((sig * tau, p.reaction))
    lhs = ScaledSum(terms)

    y_new = cg_solve(lhs, rhs, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter)

    aux_new = tuple(
        (sig * tau / di) * y_new + ci for di, ci in zip(denom, chi)
    )
    if cfg.check_residuals:
        for bi, yi_old, yi_new in zip(b, s.aux, aux_new):
            _check_aux_residual(cfg, bi, y_new, y, yi_new, yi_old)
    return SoeState(y=y_new, aux=aux_new, n=s.n + 1, t=s.t + tau)


def soe_step(p: ProblemSpec, cfg: SchemeConfig, s: SoeState) -> SoeState:
    """One step of the compressed scheme for the plain problem (identity
    mass, no reaction).  Use :func:`general_step` otherwise."""
    if not p.is_plain:
        raise SchemeConfigError(
            "soe_step handles only identity mass and no reaction; "
            "use general_step"
        )
    return _weighted_step(p, cfg, s)


def general_step(p: ProblemSpec, cfg: SchemeConfig, s: SoeState) -> SoeState:
    """One step of the compressed scheme with general mass and reaction
    operators; reduces exactly to :func:`soe_step` in the plain case."""
    return _weighted_step(p, cfg, s)


def history_init(p: ProblemSpec) -> HistoryState:
    """Initial state for the full-history baseline."""
    if not p.is_plain:
        raise SchemeConfigError("the full-history baseline handles only the plain problem")
    return HistoryState(
        ys=(p.initial,),
        applied=(p.operator.apply(p.initial),),
        n=0,
        t=0.0,
    )


def _product_trapezoid_weights(
    kernel: PronySeries, tau: float, n_levels: int
) -> tuple[np.ndarray, float]:
    """Weights of the product trapezoidal rule for int_0^{n*tau} ktil(t-s) g(s) ds.

    Each exponential term of the kernel is integrated exactly against the
    piecewise-linear interpolant of g, which keeps the rule accurate even
    for stiff decay rates where plain node sampling of the kernel fails.
    Returns the weights for levels 0..n_levels-1 plus the endpoint weight
    for level n_levels (the implicit one).  All weights include the tau
    factor.
    """
    a = np.asarray(kernel.weights)
    c = tau * np.asarray(kernel.rates)
    small = c < 1e-8

    # Endpoint factors, written via expm1 to survive c -> 0; the c = 0 limits
    # are the plain trapezoid values 1/2, 1, 1/2.
    with np.errstate(divide="ignore", invalid="ignore"):
        start_factor = np.where(small, 0.5, (np.expm1(c) - c) / np.where(small, 1.0, c) ** 2)
        end_factor = np.where(small, 0.5, (c + np.expm1(-c)) / np.where(small, 1.0, c) ** 2)
        inner_factor = np.where(
            small, 1.0, 4.0 * np.sinh(c / 2.0) ** 2 / np.where(small, 1.0, c) ** 2
        )

    end_weight = tau * float(a @ end_factor)
    if n_levels == 0:
        return np.zeros(0), end_weight

    # decay[i, j] = exp(-c_i * (n_levels - j)) for levels j = 0..n_levels-1
    lags = np.arange(n_levels, 0, -1, dtype=float)
    decay = np.exp(-np.multiply.outer(c, lags))
    factors = np.tile(inner_factor[:, None], (1, n_levels))
    factors[:, 0] = start_factor  # level 0 has only a right half-hat
    weights = tau * (a @ (decay * factors))
    return weights, end_weight


def quadrature_step(p: ProblemSpec, cfg: SchemeConfig, h: HistoryState) -> HistoryState:
    """One step of the full-history baseline.

    The memory integral at each of the two time levels is evaluated with the
    product trapezoidal rule over the uniform time grid, and the two levels
    are blended with the scheme weight.  The new level enters implicitly
    through the endpoint weight, leaving one shifted SPD solve per step.
    """
    if not p.is_plain:
        raise SchemeConfigError("the full-history baseline handles only the plain problem")
    sig, tau = cfg.sigma, cfg.tau
    n = h.n

    stacked = np.stack([g.values for g in h.applied])

    # int_0^{t_{n+1}}: known part over levels 0..n plus the implicit
    # endpoint weight on A y_new.
    w_new, w_new_end = _product_trapezoid_weights(p.kernel, tau, n + 1)
    s_new = np.tensordot(w_new, stacked, axes=1)

    # int_0^{t_n}: fully known, over levels 0..n (zero when n = 0).
    if n >= 1:
        w_old, w_old_end = _product_trapezoid_weights(p.kernel, tau, n)
        w_old_full = np.concatenate([w_old, [w_old_end]])
        s_old = np.tensordot(w_old_full, stacked, axes=1)
    else:
        s_old = np.zeros(h.ys[0].grid.shape)

    grid = h.ys[0].grid
    rhs_values = h.ys[-1].values - tau * (sig * s_new + (1.0 - sig) * s_old)
    rhs = GridFunction(grid, rhs_values)
    phi = _forcing_value(p, cfg, h.t)
    if phi is not None:
        rhs = rhs + tau * phi

    lhs = ScaledSum([(1.0, IdentityOperator()), (sig * tau * w_new_end, p.operator)])
    y_new = cg_solve(lhs, rhs, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter)
    return HistoryState(
        ys=h.ys + (y_new,),
        applied=h.applied + (p.operator.apply(y_new),),
        n=n + 1,
        t=h.t + tau,
    )


def energy(p: ProblemSpec, s: SoeState) -> float:
    """Composite stability energy (|y|_mass^2 + sum_i a_i |y_i|_A^2)**0.5."""
    total = a_norm(p.mass, s.y) ** 2
    for ai, yi in zip(p.kernel.weights, s.aux):
        total += ai * a_norm(p.operator, yi) ** 2
    return float(np.sqrt(total))


def scalar_ode_oracle(a1: float, b1: float, lam: float, u0: float, t) -> float:
    """Closed-form solution of u'' + b1 u' + a1*lam*u = 0, u(0)=u0, u'(0)=0.

    This is the single-exponential memory problem reduced to a local
    second-order ODE with a scalar spatial operator lam > 0; it serves as
    the independent convergence oracle for the m = 1 steppers.
    """
    if not (a1 > 0 and b1 >= 0 and lam > 0):
        raise ValueError("need a1 > 0, b1 >= 0, lam > 0")
    t = np.asarray(t, dtype=float)
    c = a1 * lam
    disc = b1 * b1 - 4.0 * c
    if disc > 0:
        root = np.sqrt(disc)
        r1 = 0.5 * (-b1 + root)
        r2 = 0.5 * (-b1 - root)
        out = u0 * (r2 * np.exp(r1 * t) - r1 * np.exp(r2 * t)) / (r2 - r1)
    elif disc < 0:
        omega = 0.5 * np.sqrt(-disc)
        decay = np.exp(-0.5 * b1 * t)
        out = u0 * decay * (np.cos(omega * t) + (0.5 * b1 / omega) * np.sin(omega * t))
    else:
        r = -0.5 * b1
        out = u0 * (1.0 - r * t) * np.exp(r * t)
    return out if out.ndim else float(out)
