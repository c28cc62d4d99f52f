"""Plain-text dumps of meshes, operators and trajectories.

Floats are written with ``repr`` so that parsing a dump and writing it again
reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, List, TextIO, Tuple

import numpy as np

from .blocktri import BlockTridiagonal
from .mesh import GeneralizedShishkinMesh
from .stepper import Trajectory

SOLUTION_HEADER = ["t", "x", "component", "value"]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mesh(mesh: GeneralizedShishkinMesh, out: TextIO) -> None:
    out.write(
        f"# N={mesh.n} sigma={_fmt(mesh.sigma)} L={_fmt(mesh.l_value)} p={_fmt(mesh.p_coeff)}\n"
    )
    out.write(f"0\t{_fmt(mesh.nodes[0])}\t\n")
    for j in range(1, mesh.n + 1):
        out.write(f"{j}\t{_fmt(mesh.nodes[j])}\t{_fmt(mesh.widths[j - 1])}\n")


def read_mesh(text: str) -> Tuple[dict, np.ndarray, np.ndarray]:
    """Return ``(header, nodes, widths)`` from a mesh dump."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("mesh dump lacks its header line")
    header = {}
    for item in lines[0][2:].split():
        key, _, val = item.partition("=")
        header[key] = int(val) if key == "N" else float(val)
    nodes, widths = [], []
    for line in lines[1:]:
        idx, x, h = line.split("\t")
        nodes.append(float(x))
        if int(idx) > 0:
            widths.append(float(h))
    return header, np.array(nodes), np.array(widths)


def write_mesh_arrays(header: dict, nodes: np.ndarray, widths: np.ndarray, out: TextIO) -> None:
    out.write(
        f"# N={header['N']} sigma={_fmt(header['sigma'])} L={_fmt(header['L'])} p={_fmt(header['p'])}\n"
    )
    out.write(f"0\t{_fmt(nodes[0])}\t\n")
    for j in range(1, nodes.size):
        out.write(f"{j}\t{_fmt(nodes[j])}\t{_fmt(widths[j - 1])}\n")


def write_operator(op: BlockTridiagonal, out: TextIO) -> None:
    for row, col, val in op.entries():
        out.write(f"{row}\t{col}\t{_fmt(val)}\n")


def read_operator(text: str) -> List[Tuple[int, int, float]]:
    entries = []
    for line in text.splitlines():
        row, col, val = line.split("\t")
        entries.append((int(row), int(col), float(val)))
    return entries


def write_solution(traj: Trajectory, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SOLUTION_HEADER)
    m = traj.values.shape[2]
    for n, t in enumerate(traj.times):
        for i, x in enumerate(traj.nodes):
            for k in range(m):
                w.writerow([_fmt(t), _fmt(x), k + 1, _fmt(traj.values[n, i, k])])


def read_solution(text: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(times, nodes, values)`` with ``values`` shaped ``(levels, N + 1, M)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != SOLUTION_HEADER:
        raise ValueError("solution CSV lacks the t,x,component,value header")
    data = rows[1:]
    times = sorted({float(r[0]) for r in data})
    m = max(int(r[2]) for r in data)
    nodes: List[float] = []
    for r in data:
        if float(r[0]) != times[0]:
            break
        if int(r[2]) == 1:
            nodes.append(float(r[1]))
    values = np.array([float(r[3]) for r in data]).reshape(len(times), len(nodes), m)
    return np.array(times), np.array(nodes), values


def write_solution_arrays(times: Iterable[float], nodes: np.ndarray, values: np.ndarray, out: TextIO) -> None:
    traj = Trajectory(np.asarray(list(times)), np.asarray(nodes), np.asarray(values), None)
    write_solution(traj, out)
