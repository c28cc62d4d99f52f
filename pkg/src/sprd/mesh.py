"""Generalized Shishkin meshes.

The half mesh is sampled from a piecewise mesh-generating function that is
linear on ``[0, 1/4]`` (the fine layer part) and a cubic ``C^2`` continuation
on ``[1/4, 1/2]``; the right half is the mirror image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

L_MODES = ("lstar", "lnN", "explicit")


def solve_l_star(n: float, tol: float = 1e-13) -> float:
    """Positive root of ``L * exp(L) = n`` by bisection on ``[ln ln n, ln n]``.

    ``n`` may be any real with ``n >= e`` (below that the lower end of the
    bracket is undefined or negative).
    """
    n = float(n)
    if not n >= math.e:
        raise ValueError(f"L* bracket [ln(ln n), ln n] needs n >= e, got n={n}")
    lo, hi = math.log(math.log(n)), math.log(n)
    g = lambda s: s * math.exp(s) - n  # noqa: E731
    if g(hi) == 0.0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def transition_parameter(epsilon: float, l_value: float, sigma0: float) -> float:
    if epsilon <= 0.0 or l_value <= 0.0 or sigma0 <= 0.0:
        raise ValueError("epsilon, L and sigma0 must be positive")
    return min(0.25, sigma0 * math.sqrt(epsilon) * l_value)


def cubic_coefficient(sigma: float) -> float:
    # K(1/2) = p/64 + σ + σ = 1/2
    return 32.0 - 128.0 * sigma


def mesh_generating_function(t, sigma: float):
    """Evaluate the mesh-generating function on ``[0, 1/2]``; accepts arrays."""
    if not 0.0 < sigma <= 0.25:
        raise ValueError(f"sigma must lie in (0, 1/4], got {sigma}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 0.5):
        raise ValueError("t must lie in [0, 1/2]")
    p = cubic_coefficient(sigma)
    s = t_arr - 0.25
    k = np.where(t_arr <= 0.25, 4.0 * sigma * t_arr, p * s**3 + 4.0 * sigma * s + sigma)
    return float(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class MeshConfig:
    n: int
    sigma0: float = 4.0
    l_mode: str = "lstar"
    l_explicit: Optional[float] = None

    def __post_init__(self):
        if self.n < 8 or self.n % 4:
            raise ValueError(f"N must be a multiple of 4 and at least 8, got {self.n}")
        if not self.sigma0 > 0.0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.l_mode not in L_MODES:
            raise ValueError(f"l_mode must be one of {L_MODES}, got {self.l_mode!r}")
        if self.l_mode == "explicit":
            if self.l_explicit is None:
                raise ValueError("explicit l_mode needs a value")
            lo, hi = math.log(math.log(self.n)), math.log(self.n)
            if not lo < self.l_explicit <= hi:
                raise ValueError(
                    f"L={self.l_explicit} outside (ln ln N, ln N] = ({lo:.6g}, {hi:.6g}]"
                )

    def l_value(self) -> float:
        if self.l_mode == "lstar":
            return solve_l_star(self.n)
        if self.l_mode == "lnN":
            return math.log(self.n)
        return float(self.l_explicit)


@dataclass(frozen=True, eq=False)
class GeneralizedShishkinMesh:
    nodes: np.ndarray
    sigma: float
    l_value: float
    p_coeff: float
    epsilon: float
    widths: np.ndarray = field(init=False)
    layer: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        h = np.diff(x)
        h.setflags(write=False)
        object.__setattr__(self, "widths", h)
        # Layer nodes sit strictly inside (0, σ) or (1-σ, 1); for the base
        # mesh that is exactly i < N/4 or i > 3N/4.
        layer = (x < self.sigma) | (x > 1.0 - self.sigma)
        layer[0] = layer[-1] = False
        layer.setflags(write=False)
        object.__setattr__(self, "layer", layer)

    @property
    def n(self) -> int:
        return self.nodes.size - 1

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    def refine_midpoints(self) -> "GeneralizedShishkinMesh":
        """Mesh with ``2N`` intervals: every node plus every interval midpoint."""
        x = self.nodes
        fine = np.empty(2 * x.size - 1)
        fine[0::2] = x
        fine[1::2] = 0.5 * (x[:-1] + x[1:])
        return GeneralizedShishkinMesh(fine, self.sigma, self.l_value, self.p_coeff, self.epsilon)


def build_mesh(config: Union[MeshConfig, int], epsilon: float) -> GeneralizedShishkinMesh:
    if not isinstance(config, MeshConfig):
        config = MeshConfig(int(config))
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = config.n
    l_value = config.l_value()
    sigma = transition_parameter(epsilon, l_value, config.sigma0)
    half = mesh_generating_function(np.arange(n // 2 + 1) / n, sigma)
    nodes = np.empty(n + 1)
    nodes[: n // 2 + 1] = half
    nodes[n // 2] = 0.5
    # mirrored, so x_{N-j} = 1 - x_j holds bit for bit
    nodes[n // 2 + 1:] = 1.0 - half[: n // 2][::-1]
    return GeneralizedShishkinMesh(nodes, sigma, l_value, cubic_coefficient(sigma), float(epsilon))
