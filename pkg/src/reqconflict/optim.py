"""Limited-memory quasi-Newton minimizer with optional orthant-wise L1.

Minimizes F(x) = f(x) + l1 * ||x||_1 where f is smooth and supplied as a
value/gradient callable. With l1 = 0 this is plain L-BFGS with Armijo
backtracking; with l1 > 0 the orthant-wise variant is used (pseudo-gradient,
direction sign alignment, and orthant projection during the line search).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

FunGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _pseudo_gradient(x: np.ndarray, g: np.ndarray, l1: float) -> np.ndarray:
    if l1 == 0.0:
        return g.copy()
    pg = np.where(x > 0, g + l1, np.where(x < 0, g - l1, 0.0))
    at_zero = x == 0
    right = g + l1
    left = g - l1
    pg[at_zero & (right < 0)] = right[at_zero & (right < 0)]
    pg[at_zero & (left > 0)] = left[at_zero & (left > 0)]
    return pg


def _two_loop(v: np.ndarray, s_list: list[np.ndarray], y_list: list[np.ndarray]) -> np.ndarray:
    q = v.copy()
    alphas = []
    rhos = [1.0 / float(np.dot(y, s)) for s, y in zip(s_list, y_list)]
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rhos)):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
    for (s, y, rho), a in zip(zip(s_list, y_list, rhos), reversed(alphas)):
        b = rho * float(np.dot(y, q))
        q += (a - b) * s
    return q


def minimize(
    fun_grad: FunGrad,
    x0: np.ndarray,
    l1: float = 0.0,
    max_iter: int = 100,
    memory: int = 10,
    tol: float = 1e-6,
    armijo: float = 1e-4,
) -> tuple[np.ndarray, list[float]]:
    """Returns the final point and the accepted-step objective history.

    The history is non-increasing by construction of the line search.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    obj = f + l1 * float(np.abs(x).sum())
    history = [obj]
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []

    for _ in range(max_iter):
        pg = _pseudo_gradient(x, g, l1)
        if float(np.max(np.abs(pg))) < tol:
            break
        v = -pg
        d = _two_loop(v, s_list, y_list)
        if l1 > 0.0:
            d[d * v <= 0.0] = 0.0  # stay aligned with the descent orthant
            xi = np.where(x != 0, np.sign(x), np.sign(v))
        if float(np.dot(d, v)) <= 0.0:
            d = v.copy()  # fall back to steepest descent on a bad direction

        alpha = 1.0
        accepted = False
        for _ in range(50):
            x_new = x + alpha * d
            if l1 > 0.0:
                x_new[np.sign(x_new) != xi] = 0.0
            f_new, g_new = fun_grad(x_new)
            obj_new = f_new + l1 * float(np.abs(x_new).sum())
            if obj_new <= obj + armijo * float(np.dot(pg, x_new - x)):
                accepted = True
                break
            alpha *= 0.5
        if not accepted or not np.any(x_new != x):
            break

        s = x_new - x
        y = g_new - g
        if float(np.dot(s, y)) > 1e-12:
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
        x, g, obj = x_new, g_new, obj_new
        history.append(obj)
    return x, history
