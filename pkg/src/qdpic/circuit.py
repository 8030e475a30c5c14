"""Programmable MZI mesh: forward synthesis and Clements-style compilation.

Conventions
-----------
Every coupler is the symmetric 50:50 splitter ``(1/sqrt2)[[1, i], [i, 1]]``.
An MZI cell with internal phase ``theta`` and external phase ``phi`` has
transfer matrix ``BS @ diag(e^{i theta}, 1) @ BS @ diag(e^{i phi}, 1)``, so
``theta = pi`` is the bar state, ``theta = 0`` the cross state and
``theta = pi/2`` a balanced splitter. Matrices act on column vectors of
input amplitudes: ``U[out, in]``. Mode labels are 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .linalg import as_unitary

TWO_PI = 2.0 * np.pi
BS = np.array([[1, 1j], [1j, 1]], dtype=complex) / np.sqrt(2)

# below this a sin/cos of theta/2 is treated as exactly zero during compilation
_DEGENERATE = 1e-13


def wrap_phase(x: float) -> float:
    """Map a phase onto [0, 2pi)."""
    y = float(np.mod(x, TWO_PI))
    return 0.0 if y >= TWO_PI else y


def mzi_unitary(theta: float, phi: float) -> np.ndarray:
    """2x2 transfer matrix of one MZI cell."""
    inner = np.diag([np.exp(1j * theta), 1.0])
    outer = np.diag([np.exp(1j * phi), 1.0])
    return BS @ inner @ BS @ outer


@dataclass(frozen=True)
class MziCell:
    layer: int
    top_mode: int
    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_phase(self.theta))
        object.__setattr__(self, "phi", wrap_phase(self.phi))
        if self.layer < 0:
            raise InvalidConfigError(f"negative layer index {self.layer}")
        if self.top_mode < 1:
            raise InvalidConfigError(f"top_mode must be >= 1, got {self.top_mode}")


@dataclass(frozen=True)
class MeshConfig:
    """Layered rectangular mesh of MZI cells followed by per-mode output phases."""

    num_modes: int
    cells: tuple[MziCell, ...]
    output_phases: tuple[float, ...] = field(default=())

    def __post_init__(self):
        m = self.num_modes
        if m < 2:
            raise InvalidConfigError(f"mesh needs at least 2 modes, got {m}")
        cells = tuple(self.cells)
        phases = tuple(self.output_phases) or (0.0,) * m
        if len(phases) != m:
            raise InvalidConfigError(f"expected {m} output phases, got {len(phases)}")
        occupied: dict[int, set[int]] = {}
        for c in cells:
            if c.top_mode + 1 > m:
                raise InvalidConfigError(f"cell on modes ({c.top_mode}, {c.top_mode + 1}) exceeds {m} modes")
            used = occupied.setdefault(c.layer, set())
            if c.top_mode in used or c.top_mode + 1 in used:
                raise InvalidConfigError(f"overlapping cells in layer {c.layer} at mode {c.top_mode}")
            used.update((c.top_mode, c.top_mode + 1))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "output_phases", tuple(wrap_phase(p) for p in phases))

    @property
    def num_layers(self) -> int:
        return 1 + max((c.layer for c in self.cells), default=-1)

    def to_dict(self) -> dict:
        return {
            "num_modes": self.num_modes,
            "cells": [
                {"layer": c.layer, "top_mode": c.top_mode, "theta": c.theta, "phi": c.phi}
                for c in self.cells
            ],
            "output_phases": list(self.output_phases),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeshConfig":
        expected = {"num_modes", "cells", "output_phases"}
        if set(d) != expected:
            raise InvalidConfigError(f"mesh document keys {sorted(d)} != {sorted(expected)}")
        cells = []
        for i, rec in enumerate(d["cells"]):
            if set(rec) != {"layer", "top_mode", "theta", "phi"}:
                raise InvalidConfigError(f"cell record {i} has keys {sorted(rec)}")
            cells.append(MziCell(int(rec["layer"]), int(rec["top_mode"]), float(rec["theta"]), float(rec["phi"])))
        return cls(int(d["num_modes"]), tuple(cells), tuple(float(p) for p in d["output_phases"]))

    def to_json(self) -> str:
        # json emits repr() floats, i.e. shortest round-tripping form (<= 17 significant digits)
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MeshConfig":
        return cls.from_dict(json.loads(text))


def embed(two_by_two: np.ndarray, top_mode: int, m: int) -> np.ndarray:
    """Identity on m modes with a 2x2 block on (top_mode, top_mode + 1)."""
    out = np.eye(m, dtype=complex)
    i = top_mode - 1
    out[i : i + 2, i : i + 2] = two_by_two
    return out


def mesh_to_unitary(cfg: MeshConfig) -> np.ndarray:
    """Transfer matrix of the mesh: layers applied in order, then output phases."""
    m = cfg.num_modes
    u = np.eye(m, dtype=complex)
    for layer in range(cfg.num_layers):
        block = np.eye(m, dtype=complex)
        for c in cfg.cells:
            if c.layer == layer:
                i = c.top_mode - 1
                block[i : i + 2, i : i + 2] = mzi_unitary(c.theta, c.phi)
        u = block @ u
    u = np.exp(1j * np.array(cfg.output_phases))[:, None] * u
    return as_unitary(u)


def dft_unitary(m: int) -> np.ndarray:
    """m-mode discrete Fourier transform, entries exp[2 pi i (j-1)(k-1)/m]/sqrt(m)."""
    if m < 2:
        raise InvalidInputError(f"DFT needs m >= 2, got {m}")
    j = np.arange(m)
    # reduce the exponent mod m first so entries like the (3,3) one are exactly real
    u = np.exp(2j * np.pi * (np.outer(j, j) % m) / m) / np.sqrt(m)
    return as_unitary(u)


def _null_from_right(a: complex, b: complex) -> tuple[float, float]:
    """(theta, phi) such that [a, b] @ T(theta, phi)^dagger has zero first entry."""
    if max(abs(a), abs(b)) < _DEGENERATE:
        return np.pi, 0.0  # nothing to null: keep the cell in the bar state
    theta = 2.0 * np.arctan2(abs(b), abs(a))
    if abs(a) == 0.0 or abs(b) == 0.0:
        return theta, 0.0
    return theta, np.angle(a) - np.angle(b) - np.pi


def _null_from_left(a: complex, b: complex) -> tuple[float, float]:
    """(theta, phi) such that T(theta, phi) @ [a, b]^T has zero second entry."""
    if max(abs(a), abs(b)) < _DEGENERATE:
        return np.pi, 0.0
    theta = 2.0 * np.arctan2(abs(a), abs(b))
    if abs(a) == 0.0 or abs(b) == 0.0:
        return theta, 0.0
    return theta, np.angle(b) - np.angle(a)


def _split_phases(a: np.ndarray) -> tuple[float, float, complex, complex]:
    """Write a 2x2 unitary as diag(d1, d2) @ T(theta, phi)."""
    # T = g [[e^{i phi} s, c], [e^{i phi} c, -s]] with g = i e^{i theta/2}
    c = min(1.0, abs(a[0, 1]))
    s = min(1.0, abs(a[1, 1]))
    theta = 2.0 * np.arctan2(s, c)
    g = 1j * np.exp(0.5j * theta)
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    if c >= s:
        d1 = a[0, 1] / (g * c)
        if s < _DEGENERATE:
            eip = 1.0
        else:
            eip = a[0, 0] / (d1 * g * s)
        d2 = a[1, 0] / (g * c * eip)
    else:
        d2 = -a[1, 1] / (g * s)
        if c < _DEGENERATE:
            eip = 1.0
        else:
            eip = a[1, 0] / (d2 * g * c)
        d1 = a[0, 0] / (g * s * eip)
    return theta, float(np.angle(eip)), d1 / abs(d1), d2 / abs(d2)


def _assign_layers(sequence: Sequence[tuple[int, float, float]], m: int) -> list[MziCell]:
    depth = [0] * (m + 1)  # next free layer per 1-based mode
    cells = []
    for top, theta, phi in sequence:
        layer = max(depth[top], depth[top + 1])
        depth[top] = depth[top + 1] = layer + 1
        cells.append(MziCell(layer, top, theta, phi))
    return cells


def compile_unitary(u, max_modes: int = 16) -> MeshConfig:
    """Phases of a rectangular mesh realizing ``u``.

    Elements below the anti-diagonals are nulled alternately by column
    operations (applied from the right) and row operations (applied from the
    left). The left-hand cells are then pushed through the residual diagonal
    so that the final mesh is cells followed by output phases. The result
    reproduces ``u`` exactly up to rounding; ties pick ``theta`` in [0, pi].
    """
    u = np.array(as_unitary(u), dtype=complex)
    m = u.shape[0]
    if m > max_modes:
        raise InvalidInputError(f"compilation limited to {max_modes} modes, got {m}")
    right: list[tuple[int, float, float]] = []
    left: list[tuple[int, float, float]] = []
    for i in range(1, m):
        if i % 2 == 1:
            for j in range(i):
                r, c = m - 1 - j, i - 1 - j
                theta, phi = _null_from_right(u[r, c], u[r, c + 1])
                t = embed(mzi_unitary(theta, phi), c + 1, m)
                u = u @ t.conj().T
                right.append((c + 1, theta, phi))
        else:
            for j in range(1, i + 1):
                r, c = m + j - i - 1, j - 1
                theta, phi = _null_from_left(u[r - 1, c], u[r, c])
                t = embed(mzi_unitary(theta, phi), r, m)
                u = t @ u
                left.append((r, theta, phi))
    # now  L_k ... L_1 U R_1^dag ... R_p^dag = D, i.e. U = L_1^dag ... L_k^dag D R_p ... R_1
    d = np.diag(u).copy()
    moved: list[tuple[int, float, float]] = []
    for top, theta, phi in reversed(left):
        i = top - 1
        block = mzi_unitary(theta, phi).conj().T @ np.diag(d[i : i + 2])
        theta2, phi2, d1, d2 = _split_phases(block)
        d[i], d[i + 1] = d1, d2
        moved.append((top, theta2, phi2))
    # U = D' T'_1 ... T'_k R_p ... R_1: apply R_1 first, ..., T'_k, ..., T'_1 last
    sequence = right + moved
    cells = _assign_layers(sequence, m)
    return MeshConfig(m, tuple(cells), tuple(np.angle(d)))


def input_phase_residual(a, b) -> float:
    """min over diagonal unitaries D of max |a @ D - b|.

    The best phase for column k is arg(<a_k, b_k>), which minimizes the
    Euclidean column distance and in practice the max-entry distance too.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    overlap = np.sum(a.conj() * b, axis=0)
    phases = np.where(np.abs(overlap) > 0, overlap / np.where(overlap == 0, 1, np.abs(overlap)), 1.0)
    return float(np.max(np.abs(a * phases[None, :] - b)))


def unitary_equiv_up_to_input_phases(a, b, tol: float = 1e-8) -> bool:
    """True when ``a`` and ``b`` differ only by a phase on each input mode."""
    return input_phase_residual(a, b) < tol
