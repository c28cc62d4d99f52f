"""Hybrid compact / central stencils and the assembled discrete operators.

For component ``k`` at interior node ``i`` the scheme reads

    R(U_k)_i + (dt/2) * sum_{j != k} Q(a_kj U_j)_i = Q(F_k)_i

with three-point weights ``q`` (quadrature of the right-hand side) and ``r``
(the diagonal operator).  Layer nodes always use the fourth-order compact
weights (1/12, 5/6, 1/12); regular nodes use a non-equidistant compact variant
when the mesh is fine enough relative to ``epsilon``, otherwise central
differencing with ``q = (0, 1, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .blocktri import BlockTridiagonal
from .mesh import GeneralizedShishkinMesh
from .systems import CoupledSystem, SystemDiagnostics, validate_coupling

COMPACT = "compact"
CENTRAL = "central"
DEFAULT_GAMMA = 1.0 / 6.0
LAYER_WEIGHTS = (1.0 / 12.0, 5.0 / 6.0, 1.0 / 12.0)


@dataclass(frozen=True, eq=False)
class StencilWeights:
    """``q`` and ``r`` have shape ``(N - 1, M, 3)``: interior node, component, (-, c, +)."""

    q: np.ndarray
    r: np.ndarray
    regime: Tuple[str, ...]
    gamma: float
    a_hat_sup: np.ndarray


def node_diagnostics(system: CoupledSystem, mesh: GeneralizedShishkinMesh) -> SystemDiagnostics:
    """Coefficient diagnostics sampled on the mesh nodes plus the default uniform grid."""
    return validate_coupling(system, extra_points=mesh.nodes)


def select_regime(
    mesh: GeneralizedShishkinMesh,
    diagnostics: SystemDiagnostics,
    dt: float,
    gamma: float = DEFAULT_GAMMA,
) -> Tuple[str, ...]:
    """Per-component choice for the regular region.

    Compact weights only when ``gamma * h_max**2 * sup|a_kk + 2/dt| <= eps``;
    the test is global per component, not per node.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    a_hat = np.asarray(diagnostics.diag_sup) + 2.0 / dt
    lhs = gamma * mesh.h_max**2 * a_hat
    return tuple(COMPACT if v <= mesh.epsilon else CENTRAL for v in lhs)


def quadrature_weights(mesh: GeneralizedShishkinMesh, regime: str, i: int) -> Tuple[float, float, float]:
    n = mesh.n
    if not 1 <= i <= n - 1:
        raise IndexError(f"interior index must lie in [1, {n - 1}], got {i}")
    if mesh.layer[i]:
        return LAYER_WEIGHTS
    if regime == CENTRAL:
        return (0.0, 1.0, 0.0)
    hl, hr = mesh.widths[i - 1], mesh.widths[i]
    s = 6.0 * (hl + hr)
    return ((2.0 * hl - hr) / s, 5.0 / 6.0, (2.0 * hr - hl) / s)


def _q_column(mesh: GeneralizedShishkinMesh, regime: str) -> np.ndarray:
    hl = mesh.widths[:-1]
    hr = mesh.widths[1:]
    q = np.empty((mesh.n - 1, 3))
    if regime == CENTRAL:
        q[:] = (0.0, 1.0, 0.0)
    elif regime == COMPACT:
        s = 6.0 * (hl + hr)
        q[:, 0] = (2.0 * hl - hr) / s
        q[:, 1] = 5.0 / 6.0
        q[:, 2] = (2.0 * hr - hl) / s
    else:
        raise ValueError(f"unknown regime {regime!r}")
    q[mesh.layer[1:-1]] = LAYER_WEIGHTS
    return q


def stencil_weights_r(
    epsilon: float,
    dt: float,
    hl: float,
    hr: float,
    q: Sequence[float],
    a_left: float,
    a_mid: float,
    a_right: float,
) -> Tuple[float, float, float]:
    """Operator weights at one node from its quadrature weights and ``a_kk`` values.

    Works elementwise on numpy arrays as well as on scalars.
    """
    qm, qc, qp = q
    half = 0.5 * dt
    rm = half * (-2.0 * epsilon / (hl * (hl + hr)) + qm * (a_left + 2.0 / dt))
    rp = half * (-2.0 * epsilon / (hr * (hl + hr)) + qp * (a_right + 2.0 / dt))
    rc = half * (qm * a_left + qc * a_mid + qp * a_right) - rm - rp + 1.0
    return rm, rc, rp


def compute_weights(
    mesh: GeneralizedShishkinMesh,
    system: CoupledSystem,
    dt: float,
    gamma: float = DEFAULT_GAMMA,
    diagnostics: Optional[SystemDiagnostics] = None,
) -> StencilWeights:
    if diagnostics is None:
        diagnostics = node_diagnostics(system, mesh)
    regime = select_regime(mesh, diagnostics, dt, gamma)
    a = system.coupling_at(mesh.nodes)
    hl, hr = mesh.widths[:-1], mesh.widths[1:]
    m = system.m
    q = np.empty((mesh.n - 1, m, 3))
    r = np.empty_like(q)
    for k in range(m):
        qk = _q_column(mesh, regime[k])
        q[:, k] = qk
        akk = a[:, k, k]
        rm, rc, rp = stencil_weights_r(
            mesh.epsilon, dt, hl, hr, qk.T, akk[:-2], akk[1:-1], akk[2:]
        )
        r[:, k, 0], r[:, k, 1], r[:, k, 2] = rm, rc, rp
    return StencilWeights(
        q=q,
        r=r,
        regime=regime,
        gamma=gamma,
        a_hat_sup=np.asarray(diagnostics.diag_sup) + 2.0 / dt,
    )


def _empty_blocks(n_nodes: int, m: int):
    sub = np.zeros((n_nodes, m, m))
    diag = np.zeros((n_nodes, m, m))
    sup = np.zeros((n_nodes, m, m))
    diag[0] = diag[-1] = np.eye(m)
    return sub, diag, sup


def assemble_lhs(
    mesh: GeneralizedShishkinMesh,
    system: CoupledSystem,
    dt: float,
    weights: StencilWeights,
) -> BlockTridiagonal:
    a = system.coupling_at(mesh.nodes)
    n, m = mesh.n, system.m
    sub, diag, sup = _empty_blocks(n + 1, m)
    idx = np.arange(m)
    for off, blocks in ((-1, sub), (0, diag), (1, sup)):
        # cross-component coupling (dt/2) q a_kj at the neighbouring node
        blk = 0.5 * dt * weights.q[:, :, off + 1, None] * a[1 + off:n + off]
        blk[:, idx, idx] = weights.r[:, :, off + 1]
        blocks[1:n] = blk
    return BlockTridiagonal(sub, diag, sup)


def assemble_q_operator(mesh: GeneralizedShishkinMesh, weights: StencilWeights) -> BlockTridiagonal:
    n, m = mesh.n, weights.q.shape[1]
    sub, diag, sup = _empty_blocks(n + 1, m)
    idx = np.arange(m)
    for off, blocks in ((-1, sub), (0, diag), (1, sup)):
        blocks[1:n, idx, idx] = weights.q[:, :, off + 1]
    return BlockTridiagonal(sub, diag, sup)


@dataclass
class PositivityReport:
    mesh_lhs: float
    mesh_rhs: float
    mesh_ok: bool
    # (component, gamma*h_max^2*|a_hat|, epsilon, holds) for compact components
    regime_checks: List[Tuple[int, float, float, bool]] = field(default_factory=list)
    sign_violations: List[Tuple[int, int, float]] = field(default_factory=list)

    @property
    def hypothesis_ok(self) -> bool:
        return self.mesh_ok and all(c[3] for c in self.regime_checks)

    @property
    def passed(self) -> bool:
        return self.hypothesis_ok and not self.sign_violations

    def format(self) -> str:
        lines = [
            f"# positive-type check: {'PASS' if self.passed else 'FAIL'}",
            f"#   (N/L)^2 = {self.mesh_lhs:.6g} > max_k 4 sigma0^2 (|a_kk| + 2/dt)/3 = "
            f"{self.mesh_rhs:.6g}: {self.mesh_ok}",
        ]
        for k, lhs, eps, ok in self.regime_checks:
            lines.append(
                f"#   component {k + 1}: gamma h_max^2 |a_hat| = {lhs:.6g} <= eps = {eps:.6g}: {ok}"
            )
        if self.sign_violations:
            lines.append(f"#   {len(self.sign_violations)} sign violation(s) in the operator")
            for row, col, val in self.sign_violations[:10]:
                lines.append(f"#     ({row}, {col}) = {val:.6g}")
        return "\n".join(lines)


def scan_signs(op: BlockTridiagonal, limit: int = 1000) -> List[Tuple[int, int, float]]:
    bad = []
    for row, col, val in op.entries():
        if (row == col and val <= 0.0) or (row != col and val > 0.0):
            bad.append((row, col, val))
            if len(bad) >= limit:
                break
    # a zero diagonal never shows up among the nonzero entries
    diag = np.einsum("nii->ni", op.diag).ravel()
    for row in np.flatnonzero(diag == 0.0)[: max(0, limit - len(bad))]:
        bad.append((int(row), int(row), 0.0))
    return bad


def verify_positive_type(
    mesh: GeneralizedShishkinMesh,
    system: CoupledSystem,
    dt: float,
    sigma0: float,
    gamma: float = DEFAULT_GAMMA,
    diagnostics: Optional[SystemDiagnostics] = None,
    weights: Optional[StencilWeights] = None,
) -> PositivityReport:
    if diagnostics is None:
        diagnostics = node_diagnostics(system, mesh)
    diag_sup = np.asarray(diagnostics.diag_sup)
    mesh_lhs = (mesh.n / mesh.l_value) ** 2
    mesh_rhs = float(np.max(4.0 * sigma0**2 * (diag_sup + 2.0 / dt) / 3.0))
    report = PositivityReport(mesh_lhs, mesh_rhs, mesh_lhs > mesh_rhs)
    if weights is None:
        weights = compute_weights(mesh, system, dt, gamma, diagnostics)
    for k, regime in enumerate(weights.regime):
        if regime == COMPACT:
            lhs = gamma * mesh.h_max**2 * (diag_sup[k] + 2.0 / dt)
            report.regime_checks.append((k, float(lhs), mesh.epsilon, bool(lhs <= mesh.epsilon)))
    report.sign_violations = scan_signs(assemble_lhs(mesh, system, dt, weights))
    return report
