"""Coupled singularly perturbed parabolic reaction-diffusion systems.

A system is ``u_t - eps * u_xx + A(x) u = f(x, t)`` on ``(0, 1) x (0, T]`` with
``M >= 2`` components, zero initial data and homogeneous Dirichlet boundary
data.  Evaluators are vectorised over ``x``:

* ``coupling(x)`` maps an array of shape ``(n,)`` to ``(n, M, M)``;
* ``source(x, t)`` maps ``(n,)`` and a scalar time to ``(n, M)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

CouplingFn = Callable[[np.ndarray], np.ndarray]
SourceFn = Callable[[np.ndarray, float], np.ndarray]

DEFAULT_SAMPLE_COUNT = 10001


@dataclass(frozen=True)
class CoupledSystem:
    m: int
    epsilon: float
    horizon: float
    coupling: CouplingFn
    source: SourceFn
    name: str = "system"
    # Known status of the corner compatibility conditions; None when unknown.
    compatible: Optional[bool] = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"need at least two equations, got m={self.m}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def coupling_at(self, x) -> np.ndarray:
        """Coupling matrices at ``x``; a scalar ``x`` gives one ``(M, M)`` matrix."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        a = np.asarray(self.coupling(xs), dtype=float)
        return a[0] if np.ndim(x) == 0 else a

    def source_at(self, x, t: float) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        f = np.asarray(self.source(xs, float(t)), dtype=float)
        return f[0] if np.ndim(x) == 0 else f

    def with_epsilon(self, epsilon: float) -> "CoupledSystem":
        return dataclasses.replace(self, epsilon=float(epsilon))


@dataclass(frozen=True)
class SystemDiagnostics:
    beta_star: float
    diag_sup: np.ndarray
    offdiag_ok: bool
    rowsum_ok: bool
    diag_positive_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.offdiag_ok and self.rowsum_ok and self.diag_positive_ok


def validate_coupling(
    system: CoupledSystem,
    sample_count: int = DEFAULT_SAMPLE_COUNT,
    extra_points: Optional[np.ndarray] = None,
) -> SystemDiagnostics:
    """Check the sign and row-sum conditions on ``A`` by pointwise sampling.

    ``A`` is evaluated on ``sample_count`` equispaced points of ``[0, 1]``
    (endpoints included), plus ``extra_points`` when given (typically the mesh
    nodes).  Failures are reported in the flags, never raised.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    xs = np.linspace(0.0, 1.0, int(sample_count))
    if extra_points is not None:
        xs = np.concatenate([xs, np.asarray(extra_points, dtype=float).ravel()])
    a = system.coupling_at(xs)
    m = system.m
    diag = a[:, np.arange(m), np.arange(m)]
    off_mask = ~np.eye(m, dtype=bool)
    offdiag_ok = bool(np.all(a[:, off_mask] <= 0.0))
    diag_positive_ok = bool(np.all(diag > 0.0))
    beta_star = float(a.sum(axis=2).min())
    return SystemDiagnostics(
        beta_star=beta_star,
        diag_sup=np.abs(diag).max(axis=0),
        offdiag_ok=offdiag_ok,
        rowsum_ok=beta_star > 0.0,
        diag_positive_ok=diag_positive_ok,
    )


def exponential_shift(system: CoupledSystem, beta0: float) -> CoupledSystem:
    """System for ``u * exp(-beta0 t)``: ``A + beta0 I`` and ``f * exp(-beta0 t)``."""
    if beta0 < 0.0:
        raise ValueError(f"beta0 must be nonnegative, got {beta0}")
    if beta0 == 0.0:
        return system
    coupling, source, m = system.coupling, system.source, system.m
    shift = beta0 * np.eye(m)

    def shifted_coupling(x):
        return np.asarray(coupling(x), dtype=float) + shift

    def shifted_source(x, t):
        return np.asarray(source(x, t), dtype=float) * np.exp(-beta0 * t)

    return dataclasses.replace(
        system,
        coupling=shifted_coupling,
        source=shifted_source,
        name=f"{system.name} (shift {beta0:g})",
    )


# Built-in catalog. Id 0 is a hidden zero-source system used by tests.

def _example1_coupling(x):
    a = np.empty((x.size, 2, 2))
    a[:, 0, 0] = 2.0 + x
    a[:, 0, 1] = -(1.0 + x)
    a[:, 1, 0] = -(1.0 + x)
    a[:, 1, 1] = np.exp(x) + 1.0
    return a


def _example1_source(x, t):
    g = x**2 * (1.0 - x) ** 2
    return np.stack([g, g], axis=1)


def _example2_coupling(x):
    a = np.empty((x.size, 3, 3))
    a[:, 0, 0] = 3.0
    a[:, 0, 1] = -(1.0 - x)
    a[:, 0, 2] = -(1.0 - x)
    a[:, 1, 0] = -2.0
    a[:, 1, 1] = 4.0 + x
    a[:, 1, 2] = -1.0
    a[:, 2, 0] = -2.0
    a[:, 2, 1] = -3.0
    a[:, 2, 2] = 6.0 + x
    return a


def _example2_source(x, t):
    g = 16.0 * x**2 * (1.0 - x) ** 2
    return np.stack([g, np.full_like(x, t**3), g], axis=1)


_EXAMPLE3_A = np.array([[2.0, -1.0], [-1.0, 2.0]])


def _example3_coupling(x):
    return np.broadcast_to(_EXAMPLE3_A, (x.size, 2, 2)).copy()


def _example3_source(x, t):
    return np.ones((x.size, 2))


def _zero_source(x, t):
    return np.zeros((x.size, 2))


_CATALOG = {
    1: dict(m=2, coupling=_example1_coupling, source=_example1_source,
            name="example 1", compatible=True),
    2: dict(m=3, coupling=_example2_coupling, source=_example2_source,
            name="example 2", compatible=True),
    # f = 1 at the corners (0, 0) and (1, 0): zeroth-order compatibility fails.
    3: dict(m=2, coupling=_example3_coupling, source=_example3_source,
            name="example 3", compatible=False),
    0: dict(m=2, coupling=_example3_coupling, source=_zero_source,
            name="zero source", compatible=True),
}

CATALOG_IDS = (1, 2, 3)


def builtin_example(example_id: int, epsilon: float = 1.0, horizon: float = 1.0) -> CoupledSystem:
    try:
        entry = _CATALOG[int(example_id)]
    except (KeyError, TypeError, ValueError):
        listing = ", ".join(f"{k}: {_CATALOG[k]['name']}" for k in CATALOG_IDS)
        raise ValueError(f"unknown example id {example_id!r}; available: {listing}") from None
    return CoupledSystem(epsilon=float(epsilon), horizon=float(horizon), **entry)
