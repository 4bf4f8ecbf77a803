"""Harmonic approximation at the wells.

Each well x_j contributes an oscillator K_j = −Δ + ⟨x, A_j x⟩ + c_j with
A_j = B_j^{1/2} Ã_j B_j^{1/2}; its levels Σ_ν ω_ν(2α_ν + 1) + c_j, merged over
all wells, predict the low spectrum of H_ε divided by ε.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .lattice import LatticeBox
from .model import ModelError, ModelSpec
from .symbols import eval_B, eval_t0_t1

__all__ = [
    "WellData",
    "HarmonicLevel",
    "BoxTooSmallError",
    "well_data",
    "merged_levels",
    "hermite_eval",
    "hermite_function",
    "quasimode",
    "quasimode_margin",
    "write_levels_csv",
    "read_levels_csv",
    "HERMITE_MAX",
]

HERMITE_MAX = 60


class BoxTooSmallError(ValueError):
    pass


def _sym_eig(M: np.ndarray):
    """Ascending eigenpairs with each eigenvector's first nonzero component positive."""
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    for i in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, i]) > 1e-12)
        if nz.size and V[nz[0], i] < 0:
            V[:, i] = -V[:, i]
    return w, V


def _sqrtm_pd(M: np.ndarray, power: float = 0.5) -> np.ndarray:
    w, V = _sym_eig(M)
    if np.any(w <= 0):
        raise ModelError("matrix is not positive definite")
    R = (V * w**power) @ V.T
    return 0.5 * (R + R.T)


@dataclass(frozen=True)
class WellData:
    index: int
    location: np.ndarray
    hessian_half: np.ndarray
    kinetic: np.ndarray
    A: np.ndarray
    frequencies: np.ndarray
    axes: np.ndarray
    offset: float

    @property
    def dimension(self) -> int:
        return len(self.location)

    @property
    def kinetic_sqrt(self) -> np.ndarray:
        return _sqrtm_pd(self.kinetic, 0.5)

    @property
    def kinetic_inv_sqrt(self) -> np.ndarray:
        return _sqrtm_pd(self.kinetic, -0.5)

    def level(self, alpha: Sequence[int]) -> float:
        alpha = np.asarray(alpha)
        return float(np.sum(self.frequencies * (2 * alpha + 1)) + self.offset)


@dataclass(frozen=True)
class HarmonicLevel:
    value: float
    well: int
    alpha: Tuple[int, ...]
    rank: int


def well_data(model: ModelSpec, j: int) -> WellData:
    """Harmonic data of well ``j``: Ã, B, A = B^{1/2} Ã B^{1/2}, ω = √eig(A), axes, offset.

    The offset is c_j = V1(x_j) + t_1(x_j, 0).
    """
    wells = model.wells
    if not 0 <= j < len(wells):
        raise IndexError(f"well index {j} out of range for {len(wells)} wells")
    xj = wells[j]
    At = model.potential.hessian_half(j)
    if np.linalg.eigvalsh(At)[0] <= 0:
        raise ModelError(f"Ã at well {j} is not positive definite")
    B = eval_B(model, xj)
    Bh = _sqrtm_pd(B, 0.5)
    A = Bh @ At @ Bh
    A = 0.5 * (A + A.T)
    w2, Y = _sym_eig(A)
    if w2[0] <= 0:
        raise ModelError(f"A at well {j} is not positive definite")
    t1 = eval_t0_t1(model, xj, np.zeros(model.dimension))[1]
    offset = float(model.potential.V1(xj[None, :])[0]) + float(np.real(t1))
    return WellData(j, xj.copy(), At, B, A, np.sqrt(w2), Y, offset)


def merged_levels(model: ModelSpec, n_max: int, wells: Sequence[WellData] = None) -> List[HarmonicLevel]:
    """The n_max lowest levels of K = ⊕_j K_j, counted with multiplicity.

    Ties are ordered by (value, well, α).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    wells = wells if wells is not None else [well_data(model, j) for j in range(len(model.wells))]
    # best-first enumeration: every α is reached from α − e_ν, whose level is lower
    heap = []
    seen = set()
    for wd in wells:
        a0 = (0,) * wd.dimension
        heapq.heappush(heap, (wd.level(a0), wd.index, a0))
        seen.add((wd.index, a0))
    by_index = {wd.index: wd for wd in wells}
    out: List[Tuple[float, int, Tuple[int, ...]]] = []
    # pop until n_max levels are fixed and the frontier lies beyond the last one
    while heap and (len(out) < n_max or heap[0][0] <= out[-1][0]):
        value, j, alpha = heapq.heappop(heap)
        out.append((value, j, alpha))
        wd = by_index[j]
        for nu in range(wd.dimension):
            nxt = list(alpha)
            nxt[nu] += 1
            nxt = tuple(nxt)
            if (j, nxt) not in seen:
                seen.add((j, nxt))
                heapq.heappush(heap, (wd.level(nxt), j, nxt))
    out.sort()
    return [HarmonicLevel(v, j, a, r + 1) for r, (v, j, a) in enumerate(out[:n_max])]


def hermite_function(k: int, t) -> np.ndarray:
    """h_k(t)·e^{−t²/2}, orthonormal in L²(R), by the three-term recurrence."""
    if not 0 <= k <= HERMITE_MAX:
        raise ValueError(f"Hermite degree must be in [0, {HERMITE_MAX}], got {k}")
    t = np.asarray(t, dtype=float)
    prev = np.zeros_like(t)
    cur = np.pi**-0.25 * np.exp(-0.5 * t**2)
    for n in range(k):
        prev, cur = cur, np.sqrt(2.0 / (n + 1)) * t * cur - np.sqrt(n / (n + 1.0)) * prev
    return cur


def hermite_eval(k: int, t) -> np.ndarray:
    """Normalized physicists' Hermite polynomial h_k(t) = H_k(t)/√(2^k k! √π).

    Uses the recurrence for h_k(t) e^{−t²/2} and multiplies back where the
    Gaussian factor is representable; elsewhere runs the same recurrence on
    the bare polynomial.
    """
    if not 0 <= k <= HERMITE_MAX:
        raise ValueError(f"Hermite degree must be in [0, {HERMITE_MAX}], got {k}")
    t = np.asarray(t, dtype=float)
    safe = np.abs(t) < 25.0
    out = np.empty_like(t)
    out[safe] = hermite_function(k, t[safe]) * np.exp(0.5 * t[safe] ** 2)
    if np.any(~safe):
        tt = t[~safe]
        prev = np.zeros_like(tt)
        cur = np.full_like(tt, np.pi**-0.25)
        for n in range(k):
            prev, cur = cur, np.sqrt(2.0 / (n + 1)) * tt * cur - np.sqrt(n / (n + 1.0)) * prev
        out[~safe] = cur
    return out[()] if out.ndim == 0 else out


def quasimode_margin(alpha: Sequence[int], eps: float) -> float:
    return 2.0 * math.sqrt(eps) * (max(alpha) + 4)


def quasimode(box: LatticeBox, wd: WellData, alpha: Sequence[int], eps: float = None) -> np.ndarray:
    """Lattice restriction of the oscillator eigenfunction g_{αj} (not normalized).

    g(x) = |det B^{-1/2}|^{1/2} ε^{−d/4} Π_ν ω_ν^{1/4} ψ_{α_ν}(√ω_ν ⟨z, y_ν⟩),
    z = B^{−1/2}(x − x_j)/√ε, with ψ_k the Hermite functions. The ω^{1/4}
    and √ω factors make it an exact, L²-normalized eigenfunction of the
    frozen quadratic operator, so ε^d ‖g‖² → 1.
    """
    eps = box.eps if eps is None else eps
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != wd.dimension:
        raise ValueError("multi-index length must equal the dimension")
    if not box.contains(wd.location, quasimode_margin(alpha, eps)):
        raise BoxTooSmallError(
            f"box of half-width {box.half_width} lacks margin {quasimode_margin(alpha, eps):.3g} around well {wd.index}"
        )
    d = wd.dimension
    Binv = wd.kinetic_inv_sqrt
    z = (box.points() - wd.location) @ Binv.T / math.sqrt(eps)
    u = z @ wd.axes  # coordinates in the eigenbasis of A
    g = np.full(box.size, math.sqrt(abs(np.linalg.det(Binv))) * eps ** (-d / 4))
    for nu, k in enumerate(alpha):
        om = wd.frequencies[nu]
        g *= om**0.25 * hermite_function(k, math.sqrt(om) * u[:, nu])
    return g


def write_levels_csv(levels: Sequence[HarmonicLevel], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "value", "well", "alpha"])
        for lv in levels:
            w.writerow([lv.rank, f"{lv.value:.17g}", lv.well, " ".join(str(a) for a in lv.alpha)])
    return path


def read_levels_csv(path) -> List[HarmonicLevel]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        HarmonicLevel(float(r["value"]), int(r["well"]), tuple(int(a) for a in r["alpha"].split()), int(r["rank"]))
        for r in rows
    ]
