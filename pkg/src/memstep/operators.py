"""Symmetric positive (semi)definite operators on grid functions.

All operators are matrix-free: the five-point Laplacian applies its stencil
directly (implicit zero ghost values on the Dirichlet boundary) and the
per-step shifted systems are solved with unpreconditioned conjugate
gradients.  Application is deterministic: fixed sequential accumulation
order, no threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid2D, GridFunction, GridMismatchError, inner_product, l2_norm

__all__ = [
    "SpdOperator",
    "FivePointLaplacian",
    "IdentityOperator",
    "DiagonalScaling",
    "ScaledSum",
    "a_norm",
    "laplacian_min_eigenvalue",
    "cg_solve",
    "ConvergenceError",
    "NotSpdError",
]


class ConvergenceError(RuntimeError):
    """CG failed to reach the requested tolerance within max_iter."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotSpdError(ValueError):
    """A quadratic form came out negative beyond rounding slack."""


class SpdOperator:
    """Abstract symmetric positive (semi)definite linear map."""

    def apply(self, w: GridFunction) -> GridFunction:
        raise NotImplementedError

    def __call__(self, w: GridFunction) -> GridFunction:
        return self.apply(w)


@dataclass(frozen=True)
class FivePointLaplacian(SpdOperator):
    """Discrete -Laplace on the usual five-point stencil, Dirichlet boundary."""

    grid: Grid2D

    def apply(self, w: GridFunction) -> GridFunction:
        if w.grid != self.grid:
            raise GridMismatchError(f"function grid {w.grid} != operator grid {self.grid}")
        v = w.values
        out = (2.0 / self.grid.h1**2 + 2.0 / self.grid.h2**2) * v
        out[1:, :] -= v[:-1, :] / self.grid.h1**2
        out[:-1, :] -= v[1:, :] / self.grid.h1**2
        out[:, 1:] -= v[:, :-1] / self.grid.h2**2
        out[:, :-1] -= v[:, 1:] / self.grid.h2**2
        return GridFunction(w.grid, out)


@dataclass(frozen=True)
class IdentityOperator(SpdOperator):
    def apply(self, w: GridFunction) -> GridFunction:
        return w


class DiagonalScaling(SpdOperator):
    """Pointwise multiplication by a nonnegative coefficient (scalar or field)."""

    __slots__ = ("coefficient",)

    def __init__(self, coefficient):
        coefficient = np.asarray(coefficient, dtype=float)
        if np.any(coefficient < 0):
            raise NotSpdError("diagonal coefficient must be >= 0 everywhere")
        self.coefficient = coefficient

    def apply(self, w: GridFunction) -> GridFunction:
        return GridFunction(w.grid, self.coefficient * w.values)


class ScaledSum(SpdOperator):
    """Nonnegative linear combination  sum_k  weight_k * op_k."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        terms = tuple((float(c), op) for c, op in terms)
        for c, _ in terms:
            if c < 0:
                raise NotSpdError(f"combination weight {c} must be >= 0")
        self.terms = terms

    def apply(self, w: GridFunction) -> GridFunction:
        out = np.zeros(w.grid.shape)
        for c, op in self.terms:
            if c == 0.0:
                continue
            out += c * op.apply(w).values
        return GridFunction(w.grid, out)


def a_norm(op: SpdOperator, w: GridFunction) -> float:
    """Energy norm (op w, w)**0.5 for a symmetric positive semidefinite op."""
    q = inner_product(op.apply(w), w)
    nrm2 = inner_product(w, w)
    if q < -1e-12 * max(nrm2, 1e-300):
        raise NotSpdError(f"quadratic form is negative: {q}")
    return float(np.sqrt(max(q, 0.0)))


def laplacian_min_eigenvalue(grid: Grid2D) -> float:
    """Smallest eigenvalue of the five-point Laplacian on ``grid``."""
    lam1 = (4.0 / grid.h1**2) * np.sin(np.pi * grid.h1 / 2) ** 2
    lam2 = (4.0 / grid.h2**2) * np.sin(np.pi * grid.h2 / 2) ** 2
    return float(lam1 + lam2)


def cg_solve(
    op: SpdOperator,
    rhs: GridFunction,
    tol: float = 1e-10,
    max_iter: int | None = None,
    x0: GridFunction | None = None,
) -> GridFunction:
    """Conjugate gradients for op x = rhs, relative-residual stopping rule.

    Raises ConvergenceError when max_iter (default 10*(n1+n2)) is exhausted.
    """
    if tol <= 0:
        raise ValueError(f"tol={tol} must be > 0")
    grid = rhs.grid
    if max_iter is None:
        max_iter = 10 * (grid.n1 + grid.n2)
    rhs_norm = l2_norm(rhs)
    if rhs_norm == 0.0:
        return grid.zeros()
    x = grid.zeros() if x0 is None else x0
    r = rhs - op.apply(x)
    p = r
    rr = inner_product(r, r)
    target = tol * rhs_norm
    for _ in range(max_iter):
        if np.sqrt(rr) <= target:
            return x
        ap = op.apply(p)
        pap = inner_product(p, ap)
        if pap <= 0:
            raise NotSpdError(f"CG detected a non-SPD operator: (p, Ap) = {pap}")
        alpha = rr / pap
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = inner_product(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    if np.sqrt(rr) <= target:
        return x
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations "
        f"(relative residual {np.sqrt(rr) / rhs_norm:.3e} > {tol:.3e})",
        residual=float(np.sqrt(rr)),
        iterations=max_iter,
    )
