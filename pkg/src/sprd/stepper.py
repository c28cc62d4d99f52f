"""Totally discrete Crank-Nicolson stepping with the hybrid spatial scheme.

The state carries ``W = L^N U`` next to ``U``.  ``W`` is never recomputed from
``U``; it advances through the Crank-Nicolson identity

    W^{n+1} = -W^n - 2 (U^{n+1} - U^n) / dt + f^n + f^{n+1}

at every node, boundary nodes included, since the compact quadrature at the
first and last interior nodes reads ``F`` at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .blocktri import BlockThomasFactor, BlockTridiagonal
from .mesh import GeneralizedShishkinMesh
from .scheme import (
    DEFAULT_GAMMA,
    StencilWeights,
    assemble_lhs,
    assemble_q_operator,
    compute_weights,
)
from .systems import CoupledSystem


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0.0 or self.n_steps < 1:
            raise ValueError(f"need dt > 0 and at least one step, got {self.dt}, {self.n_steps}")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float) -> "TimeGrid":
        if not dt > 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        steps = round(horizon / dt)
        if steps < 1 or abs(steps * dt - horizon) > 1e-12 * horizon:
            raise ValueError(f"T/dt = {horizon}/{dt} is not a positive integer")
        return cls(float(dt), int(steps))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass
class EvolutionState:
    u: np.ndarray
    w: np.ndarray
    step_index: int = 0

    @classmethod
    def zero(cls, n_nodes: int, m: int) -> "EvolutionState":
        return cls(np.zeros((n_nodes, m)), np.zeros((n_nodes, m)), 0)


@dataclass
class Trajectory:
    times: np.ndarray
    nodes: np.ndarray
    values: np.ndarray  # (levels, N + 1, M)
    final: EvolutionState


class RecursionIdentityError(AssertionError):
    pass


def recursion_residual(prev: EvolutionState, new: EvolutionState, f_now, f_next, dt: float) -> float:
    lhs = new.w + prev.w
    rhs = -2.0 * (new.u - prev.u) / dt + f_now + f_next
    return float(np.max(np.abs(lhs - rhs)))


def cn_step(
    state: EvolutionState,
    system: CoupledSystem,
    mesh: GeneralizedShishkinMesh,
    lhs: Union[BlockTridiagonal, BlockThomasFactor],
    q_op: BlockTridiagonal,
    grid: TimeGrid,
    f_now: Optional[np.ndarray] = None,
    f_next: Optional[np.ndarray] = None,
) -> EvolutionState:
    """Advance one time level.  ``lhs`` may be passed pre-factorized."""
    n = state.step_index
    if n >= grid.n_steps:
        raise ValueError(f"step {n} is past the last level {grid.n_steps}")
    dt = grid.dt
    if f_now is None:
        f_now = system.source_at(mesh.nodes, n * dt)
    if f_next is None:
        f_next = system.source_at(mesh.nodes, (n + 1) * dt)
    factor = lhs if isinstance(lhs, BlockThomasFactor) else lhs.factorize()
    f_sum = f_now + f_next
    rhs = q_op.matvec(state.u + 0.5 * dt * (f_sum - state.w))
    rhs[0] = 0.0
    rhs[-1] = 0.0
    u_next = factor.solve(rhs)
    w_next = -state.w - 2.0 * (u_next - state.u) / dt + f_sum
    return EvolutionState(u_next, w_next, n + 1)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything that stays fixed across time steps for one (system, mesh, dt)."""

    weights: StencilWeights
    lhs: BlockTridiagonal
    q_op: BlockTridiagonal
    factor: BlockThomasFactor

    @classmethod
    def build(cls, system, mesh, dt, gamma=DEFAULT_GAMMA, diagnostics=None) -> "Discretization":
        weights = compute_weights(mesh, system, dt, gamma, diagnostics)
        lhs = assemble_lhs(mesh, system, dt, weights)
        return cls(weights, lhs, assemble_q_operator(mesh, weights), lhs.factorize())


def integrate(
    system: CoupledSystem,
    mesh: GeneralizedShishkinMesh,
    grid: TimeGrid,
    record: str = "all",
    gamma: float = DEFAULT_GAMMA,
    check_recursion: bool = False,
    disc: Optional[Discretization] = None,
) -> Trajectory:
    """Run all steps from zero initial data; ``record`` is ``"all"`` or ``"final"``."""
    if record not in ("all", "final"):
        raise ValueError(f"record must be 'all' or 'final', got {record!r}")
    if not math.isclose(grid.n_steps * grid.dt, system.horizon, rel_tol=1e-12):
        raise ValueError("time grid does not end at the system horizon")
    if disc is None:
        disc = Discretization.build(system, mesh, grid.dt, gamma)
    x = mesh.nodes
    state = EvolutionState.zero(x.size, system.m)
    levels = [state.u] if record == "all" else None
    f_now = system.source_at(x, 0.0)
    for n in range(grid.n_steps):
        f_next = system.source_at(x, (n + 1) * grid.dt)
        new = cn_step(state, system, mesh, disc.factor, disc.q_op, grid, f_now, f_next)
        if check_recursion:
            res = recursion_residual(state, new, f_now, f_next, grid.dt)
            tol = 1e-11 * (1.0 + np.max(np.abs(f_now)))
            if res > tol:
                raise RecursionIdentityError(f"recursion identity off by {res:.3g} at step {n + 1}")
        state, f_now = new, f_next
        if levels is not None:
            levels.append(state.u)
    if levels is None:
        times = np.array([grid.n_steps * grid.dt])
        values = state.u[None]
    else:
        times = grid.times
        values = np.stack(levels)
    return Trajectory(times, x, values, state)
