"""Limited-memory BFGS with a backtracking (Armijo) line search.

This is the reference version of the optimizer. ``_core.pyx`` carries a
line-by-line C translation of the same iteration for the per-point
refinement problems; keep the two in step when editing either.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CONVERGED = 0
MAXITER = 1
LINESEARCH = 2
STALLED = 3

STATUS_NAMES = {
    CONVERGED: "converged",
    MAXITER: "maxiter",
    LINESEARCH: "linesearch",
    STALLED: "stalled",
}

C1 = 1e-4
MAX_BACKTRACKS = 60
CURVATURE_EPS = 1e-12
STALL_RTOL = 1e-15


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    f0: float
    grad_norm: float
    iterations: int
    status: int
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def status_name(self) -> str:
        return STATUS_NAMES[self.status]


def _two_loop(g, S, Y, rho, count, head, memory):
    q = g.copy()
    alpha = np.empty(memory)
    for k in range(count):
        j = (head - 1 - k) % memory
        alpha[j] = rho[j] * (S[j] @ q)
        q -= alpha[j] * Y[j]
    newest = (head - 1) % memory
    gamma = (S[newest] @ Y[newest]) / (Y[newest] @ Y[newest])
    q *= gamma
    for k in range(count - 1, -1, -1):
        j = (head - 1 - k) % memory
        beta = rho[j] * (Y[j] @ q)
        q += (alpha[j] - beta) * S[j]
    return -q


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    gtol: float = 1e-6,
    maxiter: int = 500,
    memory: int = 10,
    record: bool = False,
) -> LbfgsResult:
    """Minimize ``fun`` starting from ``x0``.

    ``fun`` returns ``(value, gradient)``. Terminates when the gradient
    infinity-norm drops below ``gtol``, after ``maxiter`` accepted steps, when
    no step along a descent direction satisfies the sufficient-decrease
    condition, or when the objective stops decreasing in floating point.
    Accepted steps never increase the objective.

    With ``record=True`` the returned ``history`` holds one
    ``(iteration, value, grad_inf_norm)`` tuple per accepted iterate,
    starting with the initial point.
    """
    x = np.array(x0, dtype=np.float64).ravel()
    n = x.size
    f, g = fun(x)
    f0 = f
    S = np.zeros((memory, n))
    Y = np.zeros((memory, n))
    rho = np.zeros(memory)
    count = 0
    head = 0
    it = 0
    history = []
    gnorm = float(np.max(np.abs(g))) if n else 0.0
    if record:
        history.append((0, f, gnorm))
    status = MAXITER
    while True:
        if gnorm < gtol:
            status = CONVERGED
            break
        if it >= maxiter:
            status = MAXITER
            break
        if count > 0:
            d = _two_loop(g, S, Y, rho, count, head, memory)
            gd = g @ d
            if not gd < 0.0:
                count = 0
                head = 0
        if count == 0:
            d = -g
            gd = -(g @ g)
            step = min(1.0, 1.0 / np.sqrt(-gd))
        else:
            step = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            xn = x + step * d
            fn, gn = fun(xn)
            if fn <= f + C1 * step * gd:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if count > 0:
                count = 0
                head = 0
                continue
            status = LINESEARCH
            break
        s = xn - x
        y = gn - g
        sy = s @ y
        if sy > CURVATURE_EPS * np.sqrt((s @ s) * (y @ y)):
            S[head] = s
            Y[head] = y
            rho[head] = 1.0 / sy
            head = (head + 1) % memory
            count = min(count + 1, memory)
        decrease = f - fn
        x, f, g = xn, fn, gn
        it += 1
        gnorm = float(np.max(np.abs(g)))
        if record:
            history.append((it, f, gnorm))
        if decrease <= STALL_RTOL * max(1.0, abs(f)) and gnorm >= gtol:
            status = STALLED
            break
    return LbfgsResult(x=x, f=float(f), f0=float(f0), grad_norm=gnorm,
                       iterations=it, status=status, history=history)
