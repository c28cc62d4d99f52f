"""Double-mesh error estimates, convergence rates and the transition operator.

The transition operator advances the source-free scheme by one step.  With
``B`` the left-hand operator and ``Q`` the quadrature operator, applying ``Q``
to the Crank-Nicolson step and eliminating ``W`` gives

    B U^{n+1} = (2 Q - B) U^n,   so   R_N = B^{-1} (2 Q - B) = 2 B^{-1} Q - I.
"""

from __future__ import annotations

import logging
import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .blocktri import BlockThomasFactor, BlockTridiagonal
from .mesh import MeshConfig, build_mesh
from .scheme import DEFAULT_GAMMA
from .stepper import Discretization, TimeGrid, integrate
from .systems import CoupledSystem, SystemDiagnostics, validate_coupling

log = logging.getLogger(__name__)

# The tabulated "spectral radius" is the largest real eigenvalue of R_N; the
# stiff modes near -1 that set the true modulus are not what gets reported.
MEASURES = ("real", "modulus")
TABLE_MEASURE = "real"
DENSE_DIRECT_LIMIT = 600
DENSE_FALLBACK_LIMIT = 4096

Ladder = Sequence[Tuple[int, float]]


class SpectralError(RuntimeError):
    pass


def default_sigma0(diagnostics: SystemDiagnostics) -> float:
    if not diagnostics.beta_star > 0.0:
        raise ValueError(f"row sums of A must be positive, got beta*={diagnostics.beta_star}")
    return 4.0 / math.sqrt(diagnostics.beta_star)


def worker_count() -> int:
    env = os.environ.get("SPRD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def refinement_ladder(n0: int = 64, dt0: float = 0.5, levels: int = 5) -> List[Tuple[int, float]]:
    """``(N, dt)`` columns refining as ``(2N, dt/4)``."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    return [(n0 * 2**j, dt0 / 4**j) for j in range(levels)]


def _check_ladder(ladder: Ladder) -> None:
    for (n1, dt1), (n2, dt2) in zip(ladder, ladder[1:]):
        if n2 != 2 * n1 or not math.isclose(dt2, dt1 / 4.0, rel_tol=1e-12):
            raise ValueError(f"ladder step ({n1}, {dt1}) -> ({n2}, {dt2}) is not (2N, dt/4)")


@dataclass(frozen=True)
class SolveSettings:
    sigma0: Optional[float] = None
    l_mode: str = "lstar"
    l_explicit: Optional[float] = None
    gamma: float = DEFAULT_GAMMA

    def mesh_config(self, n: int, diagnostics: SystemDiagnostics) -> MeshConfig:
        sigma0 = self.sigma0 if self.sigma0 is not None else default_sigma0(diagnostics)
        return MeshConfig(n, sigma0, self.l_mode, self.l_explicit)


def double_mesh_error(
    system: CoupledSystem,
    n: int,
    dt: float,
    epsilon: Optional[float] = None,
    settings: SolveSettings = SolveSettings(),
    diagnostics: Optional[SystemDiagnostics] = None,
) -> float:
    """Max nodal difference between the (N, dt) solve and the (2N, dt/2) solve.

    The fine mesh keeps every coarse node and adds interval midpoints, so the
    fine solution is read off at coarse nodes and coarse time levels directly.
    """
    if epsilon is not None:
        system = system.with_epsilon(epsilon)
    if diagnostics is None:
        diagnostics = validate_coupling(system)
    mesh = build_mesh(settings.mesh_config(n, diagnostics), system.epsilon)
    fine_mesh = mesh.refine_midpoints()
    coarse = integrate(system, mesh, TimeGrid.from_horizon(system.horizon, dt), gamma=settings.gamma)
    fine = integrate(system, fine_mesh, TimeGrid.from_horizon(system.horizon, dt / 2.0), gamma=settings.gamma)
    return float(np.max(np.abs(coarse.values - fine.values[::2, ::2])))


@dataclass
class ErrorTable:
    eps_exps: List[int]
    ladder: List[Tuple[int, float]]
    values: np.ndarray  # (len(eps_exps), len(ladder))

    @property
    def robust_row(self) -> np.ndarray:
        return self.values.max(axis=0)

    def entry(self, eps_exp: int, n: int, dt: float) -> float:
        col = next(j for j, (nn, dd) in enumerate(self.ladder) if nn == n and math.isclose(dd, dt))
        return float(self.values[self.eps_exps.index(eps_exp), col])


@dataclass
class RateTable:
    """Rates between consecutive ladder columns; NaN marks an absent rate."""

    eps_exps: List[int]
    ladder: List[Tuple[int, float]]
    classical: np.ndarray  # (len(eps_exps), len(ladder) - 1)
    robust: np.ndarray  # (len(ladder) - 1,)


def pair_rate(coarse_error: float, fine_error: float) -> Optional[float]:
    """``log2(E(N, dt) / E(2N, dt/4))``, or None when either error is not positive."""
    if not (coarse_error > 0.0 and fine_error > 0.0):
        return None
    if not (math.isfinite(coarse_error) and math.isfinite(fine_error)):
        return None
    return math.log2(coarse_error / fine_error)


def _rates(values: np.ndarray) -> np.ndarray:
    out = np.full(values.shape[:-1] + (values.shape[-1] - 1,), np.nan)
    for idx in np.ndindex(out.shape):
        *row, j = idx
        r = pair_rate(values[(*row, j)], values[(*row, j + 1)])
        if r is not None:
            out[idx] = r
    return out


def convergence_rates(errors: ErrorTable, ladder: Optional[Ladder] = None) -> RateTable:
    ladder = list(errors.ladder if ladder is None else ladder)
    _check_ladder(ladder)
    if len(ladder) != errors.values.shape[1]:
        raise ValueError("ladder length does not match the error table")
    return RateTable(
        eps_exps=list(errors.eps_exps),
        ladder=ladder,
        classical=_rates(errors.values),
        robust=_rates(errors.robust_row),
    )


def _run_cells(fn, cells, workers: Optional[int]):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    # results come back in submission order whatever the completion order
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def error_table(
    system: CoupledSystem,
    eps_exps: Sequence[int],
    ladder: Ladder,
    settings: SolveSettings = SolveSettings(),
    workers: Optional[int] = None,
) -> ErrorTable:
    ladder = [(int(n), float(dt)) for n, dt in ladder]
    _check_ladder(ladder)
    diagnostics = validate_coupling(system)
    cells = [(k, n, dt) for k in eps_exps for n, dt in ladder]

    def run(cell):
        k, n, dt = cell
        err = double_mesh_error(system, n, dt, 2.0**-k, settings, diagnostics)
        log.info("error eps=2^-%d N=%d dt=%g: %.3e", k, n, dt, err)
        return err

    values = np.array(_run_cells(run, cells, workers)).reshape(len(eps_exps), len(ladder))
    return ErrorTable(list(eps_exps), ladder, values)


@dataclass(eq=False)
class TransitionOperator:
    """``R_N`` acting on stacked interior vectors of length ``M (N - 1)``."""

    b_ref: BlockTridiagonal
    c_ref: BlockTridiagonal
    q_ref: BlockTridiagonal
    factor: BlockThomasFactor
    rho: Optional[float] = None
    method: Optional[str] = None
    measure: Optional[str] = None

    @property
    def m(self) -> int:
        return self.b_ref.m

    @property
    def dimension(self) -> int:
        return self.m * self.b_ref.n_interior

    def _embed(self, v: np.ndarray) -> np.ndarray:
        g = np.zeros((self.b_ref.n_nodes, self.m))
        g[1:-1] = np.asarray(v, dtype=float).reshape(-1, self.m)
        return g

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs[0] = 0.0
        rhs[-1] = 0.0
        return self.factor.solve(rhs)[1:-1].ravel()

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._solve(self.c_ref.matvec(self._embed(v)))

    def apply_half_shift(self, v: np.ndarray) -> np.ndarray:
        """``(R_N + I) / 2 = B^{-1} Q``; shares eigenvectors with ``R_N``."""
        return self._solve(self.q_ref.matvec(self._embed(v)))

    def to_dense(self, half_shift: bool = False) -> np.ndarray:
        apply = self.apply_half_shift if half_shift else self.apply
        d = self.dimension
        out = np.empty((d, d))
        e = np.zeros(d)
        for j in range(d):
            e[j] = 1.0
            out[:, j] = apply(e)
            e[j] = 0.0
        return out


def assemble_transition(b: BlockTridiagonal, q: BlockTridiagonal) -> TransitionOperator:
    c = BlockTridiagonal(2.0 * q.sub - b.sub, 2.0 * q.diag - b.diag, 2.0 * q.sup - b.sup)
    return TransitionOperator(b_ref=b, c_ref=c, q_ref=q, factor=b.factorize())


def transition_for(
    system: CoupledSystem,
    n: int,
    dt: float,
    epsilon: Optional[float] = None,
    settings: SolveSettings = SolveSettings(),
    diagnostics: Optional[SystemDiagnostics] = None,
) -> TransitionOperator:
    if epsilon is not None:
        system = system.with_epsilon(epsilon)
    if diagnostics is None:
        diagnostics = validate_coupling(system)
    mesh = build_mesh(settings.mesh_config(n, diagnostics), system.epsilon)
    disc = Discretization.build(system, mesh, dt, settings.gamma)
    return assemble_transition(disc.lhs, disc.q_op)


def _dense_value(op: TransitionOperator, measure: str) -> float:
    ev = np.linalg.eigvals(op.to_dense())
    return float(ev.real.max()) if measure == "real" else float(np.abs(ev).max())


def _power_iteration(apply, dimension, tol, max_iters, window, seed) -> Optional[float]:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dimension)
    v /= np.linalg.norm(v)
    logs = deque(maxlen=window)
    for _ in range(max_iters):
        w = apply(v)
        g = np.linalg.norm(w)
        if g == 0.0:
            return 0.0
        if not math.isfinite(g):
            return None
        v = w / g
        logs.append(math.log(g))
        if len(logs) == window:
            gs = np.exp(np.array(logs))
            mean = float(np.exp(np.mean(logs)))
            if (gs.max() - gs.min()) < tol * mean:
                return mean
    return None


def spectral_radius(
    op: TransitionOperator,
    tol: float = 1e-9,
    max_iters: int = 5000,
    measure: str = TABLE_MEASURE,
    window: int = 50,
    seed: int = 20100,
    dense_limit: int = DENSE_FALLBACK_LIMIT,
) -> float:
    """Dominant eigenvalue of ``R_N``.

    ``measure="modulus"`` gives the spectral radius proper.  ``measure="real"``
    gives the largest real eigenvalue, found by power iteration on
    ``(R_N + I) / 2`` whose dominant eigenvalue ``mu`` maps back as ``2 mu - 1``.
    Growth factors are averaged geometrically over a trailing window, which
    also converges for rotating complex pairs.  Small operators, and those the
    iteration cannot settle, go to a dense eigenvalue solve.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}, got {measure!r}")
    dim = op.dimension
    value = None
    method = "dense_spectrum"
    if dim > DENSE_DIRECT_LIMIT:
        apply = op.apply_half_shift if measure == "real" else op.apply
        mu = _power_iteration(apply, dim, tol, max_iters, window, seed)
        if mu is not None:
            value = 2.0 * mu - 1.0 if measure == "real" else mu
            method = "power_iteration"
        elif dim > dense_limit:
            raise SpectralError(
                f"power iteration did not settle in {max_iters} iterations and "
                f"dimension {dim} exceeds the dense limit {dense_limit}"
            )
        else:
            log.info("power iteration unsettled at dimension %d; dense fallback", dim)
    if value is None:
        value = _dense_value(op, measure)
    op.rho, op.method, op.measure = value, method, measure
    return value


@dataclass
class SpectralTable:
    eps_exps: List[int]
    ladder: List[Tuple[int, float]]
    values: np.ndarray
    methods: List[List[str]] = field(default_factory=list)


def spectral_table(
    system: CoupledSystem,
    eps_exps: Sequence[int],
    ladder: Ladder,
    settings: SolveSettings = SolveSettings(),
    measure: str = TABLE_MEASURE,
    workers: Optional[int] = None,
) -> SpectralTable:
    ladder = [(int(n), float(dt)) for n, dt in ladder]
    diagnostics = validate_coupling(system)
    cells = [(k, n, dt) for k in eps_exps for n, dt in ladder]

    def run(cell):
        k, n, dt = cell
        op = transition_for(system, n, dt, 2.0**-k, settings, diagnostics)
        rho = spectral_radius(op, measure=measure)
        log.info("rho eps=2^-%d N=%d dt=%g: %.5f (%s)", k, n, dt, rho, op.method)
        return rho, op.method

    results = _run_cells(run, cells, workers)
    values = np.array([r[0] for r in results]).reshape(len(eps_exps), len(ladder))
    methods = [[results[i * len(ladder) + j][1] for j in range(len(ladder))] for i in range(len(eps_exps))]
    return SpectralTable(list(eps_exps), ladder, values, methods)
