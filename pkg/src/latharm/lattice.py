"""Finite boxes of the lattice (εZ)^d and operators assembled on them."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .eigensolver import DENSE_MAX, extreme_eigenvalue
from .model import ModelError, ModelSpec, as_points

__all__ = [
    "LatticeBox",
    "BoxSizeError",
    "BoundaryError",
    "AssemblyError",
    "MAX_SITES",
    "build_lattice",
    "smooth_step",
    "bump",
    "chi",
    "chi_complement",
    "assemble_hamiltonian",
    "assemble_kinetic",
    "diag_cutoff",
    "partition_of_unity",
    "fourier_multiplier",
    "fourier_cutoff",
    "operator_norm",
    "write_coo",
    "read_coo",
    "DEFAULT_S",
]

MAX_SITES = 5_000_000
DEFAULT_S = 0.4
SYMMETRY_TOL = 1e-12


class BoxSizeError(ValueError):
    pass


class BoundaryError(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeBox:
    """Sites ε·k with integer k in [lo, hi] along every axis.

    Sites are enumerated in row-major order of their integer coordinates.
    """

    dimension: int
    eps: float
    lo: int
    hi: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "periodic"):
            raise BoundaryError(f"boundary must be 'dirichlet' or 'periodic', got {self.boundary!r}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.hi < self.lo:
            raise ValueError("empty box")

    @property
    def n_axis(self) -> int:
        return self.hi - self.lo + 1

    @property
    def shape(self):
        return (self.n_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.n_axis**self.dimension

    @property
    def half_width(self) -> float:
        return self.eps * max(-self.lo, self.hi)

    def int_coords(self) -> np.ndarray:
        axes = [np.arange(self.lo, self.hi + 1)] * self.dimension
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def points(self) -> np.ndarray:
        return self.eps * self.int_coords()

    def index(self, k) -> np.ndarray:
        """Flat index of integer site coordinates (shape (..., d))."""
        k = np.asarray(k, dtype=np.int64)
        if np.any(k < self.lo) or np.any(k > self.hi):
            raise IndexError("site outside the box")
        return np.ravel_multi_index(tuple(np.moveaxis(k - self.lo, -1, 0)), self.shape)

    def site(self, idx) -> np.ndarray:
        """Integer coordinates of flat indices."""
        return np.stack(np.unravel_index(np.asarray(idx), self.shape), axis=-1) + self.lo

    def shift(self, eta):
        """Targets of the hop k -> k + eta: (flat target index, mask of valid hops)."""
        k = self.int_coords() + np.asarray(eta, dtype=np.int64)
        if self.boundary == "periodic":
            k = (k - self.lo) % self.n_axis + self.lo
            valid = np.ones(len(k), dtype=bool)
        else:
            valid = np.all((k >= self.lo) & (k <= self.hi), axis=1)
            k = np.clip(k, self.lo, self.hi)
        return self.index(k), valid

    def dual_grid(self) -> np.ndarray:
        """Dual frequencies 2πm/n (m centred) per axis, as points of shape (n^d, d)."""
        n = self.n_axis
        m = np.arange(n) - n // 2
        mesh = np.meshgrid(*([m] * self.dimension), indexing="ij")
        return 2 * np.pi * np.stack([g.ravel() for g in mesh], axis=-1) / n

    def dual_int(self) -> np.ndarray:
        n = self.n_axis
        m = np.arange(n) - n // 2
        mesh = np.meshgrid(*([m] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x - margin >= self.lo * self.eps - 1e-12) and np.all(x + margin <= self.hi * self.eps + 1e-12))


def build_lattice(
    d: int,
    eps: float,
    L: Optional[float] = None,
    boundary: str = "dirichlet",
    *,
    n: Optional[int] = None,
    max_sites: int = MAX_SITES,
) -> LatticeBox:
    """Box {x ∈ (εZ)^d : |x_ν| ≤ L}, or ``n`` consecutive sites per axis.

    With ``L`` the box has 2⌊L/ε⌋ + 1 sites per axis, centred at the
    origin. ``n`` gives sites lo = −⌊n/2⌋ … lo + n − 1 (e.g. even circulants).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if (L is None) == (n is None):
        raise ValueError("give exactly one of L or n")
    if n is None:
        if L <= 0:
            raise ValueError("L must be positive")
        half = int(np.floor(L / eps + 1e-9))
        lo, hi = -half, half
    else:
        lo = -(n // 2)
        hi = lo + n - 1
    n_axis = hi - lo + 1
    if float(n_axis) ** d > max_sites:
        raise BoxSizeError(f"box with {n_axis}^{d} sites exceeds the cap of {max_sites}")
    return LatticeBox(d, float(eps), lo, hi, boundary)


# ----------------------------------------------------------------------------
# cutoff functions


def smooth_step(t):
    """C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, exp(−1/t)/(exp(−1/t) + exp(−1/(1−t))) between."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tt = np.where(inside, t, 0.5)
    # ratio form avoids 0/0 near the ends; exp overflow there correctly gives 0
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(1.0 / tt - 1.0 / (1.0 - tt)))
    return np.where(t >= 1, 1.0, np.where(t <= 0, 0.0, out))


def bump(r, inner: float = 1.0, outer: float = 2.0):
    """Radial cutoff: 1 for r ≤ inner, 0 for r ≥ outer, with √(1 − bump²) smooth."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.sqrt(smooth_step((outer - r) / (outer - inner)))


def chi(x):
    """The fixed cutoff χ on R^d (norm taken over the last axis)."""
    x = np.asarray(x, dtype=float)
    return bump(np.linalg.norm(x, axis=-1))


def chi_complement(x):
    """√(1 − χ²), evaluated without cancellation."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    return np.sqrt(smooth_step((r - 1.0) / 1.0))


def diag_cutoff(box: LatticeBox, center, s: float = DEFAULT_S, eps: Optional[float] = None) -> sp.csr_matrix:
    """Diagonal operator with entries χ(ε^{−s}(x − center))."""
    eps = box.eps if eps is None else eps
    center = as_points(center, box.dimension)
    return sp.diags(chi((box.points() - center) / eps**s)).tocsr()


def partition_of_unity(box: LatticeBox, centers, s: float = DEFAULT_S) -> List[np.ndarray]:
    """[χ_0, χ_1, …, χ_m] on the box sites, with Σ_j χ_j² = 1.

    χ_0 = √(1 − Σ_{j≥1} χ_j²); the supports of χ_1 … χ_m must be disjoint.
    """
    centers = as_points(centers, box.dimension).reshape(-1, box.dimension)
    x = box.points()
    scale = box.eps**s
    local = [chi((x - c) / scale) for c in centers]
    overlap = sum((loc > 0).astype(int) for loc in local)
    if np.any(overlap > 1):
        raise ValueError("cutoff supports overlap; eps too large for the well separation")
    # χ_0 via the complement form, exact where only one local cutoff is active
    chi0 = np.ones(len(x))
    for c in centers:
        near = np.linalg.norm(x - c, axis=1) < 2 * scale
        chi0[near] = chi_complement((x[near] - c) / scale)
    return [chi0] + local


def fourier_multiplier(box: LatticeBox, values) -> np.ndarray:
    """Dense matrix of the multiplier ``values`` (sampled on ``box.dual_grid()``)."""
    if box.boundary != "periodic":
        raise BoundaryError("Fourier multipliers require a periodic box")
    n = box.n_axis
    d = box.dimension
    values = np.asarray(values).reshape((n,) * d)
    # M[k, k'] = n^{-d} Σ_m a(ξ_m) e^{i (k'−k)·ξ_m} depends on (k' − k) mod n only
    kernel = np.fft.ifftn(np.fft.ifftshift(values))
    k = box.int_coords()
    delta = (k[None, :, :] - k[:, None, :]) % n
    return kernel[tuple(np.moveaxis(delta, -1, 0))]


def fourier_cutoff(box: LatticeBox, s: float = DEFAULT_S, eps: Optional[float] = None) -> np.ndarray:
    """Op(φ_0) with φ_0(ξ) = χ(ε^{−s} ξ), as a real symmetric dense matrix."""
    if box.boundary != "periodic":
        raise BoundaryError("fourier_cutoff requires a periodic box")
    eps = box.eps if eps is None else eps
    vals = chi(box.dual_grid() / eps**s)
    M = fourier_multiplier(box, vals).real
    return 0.5 * (M + M.T)


# ----------------------------------------------------------------------------
# Hamiltonian assembly


def _check_model(model: ModelSpec, box: LatticeBox, check: bool):
    if model.dimension != box.dimension:
        raise ModelError(f"model dimension {model.dimension} != box dimension {box.dimension}")
    if check and not model.report.passed:
        names = ", ".join(c.clause for c in model.report.failed())
        raise ModelError(f"model {model.label!r} fails validation: {names}")
    if box.n_axis <= 2 * model.hopping.range:
        raise BoxSizeError(f"box with {box.n_axis} sites per axis too small for hopping range {model.hopping.range}")


def assemble_kinetic(model: ModelSpec, box: LatticeBox, *, check: bool = True) -> sp.csr_matrix:
    """T_ε restricted to the box: entry (x, x + γ) = a_γ(x, ε)."""
    _check_model(model, box, check)
    x = box.points()
    rows, cols, vals = [], [], []
    idx = np.arange(box.size)
    for eta in model.hopping.stencil:
        target, valid = box.shift(eta)
        coef = model.hopping.coefficient(eta, x, box.eps)
        rows.append(idx[valid])
        cols.append(target[valid])
        vals.append(coef[valid])
    T = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(box.size, box.size)
    ).tocsr()
    return _symmetric(T)


def assemble_hamiltonian(
    model: ModelSpec, box: LatticeBox, *, check: bool = True, potential: bool = True
) -> sp.csr_matrix:
    """H_ε = T_ε + V_ε restricted to the box.

    Dirichlet boxes drop hops that leave the box (the form restriction
    1_Λ H 1_Λ); periodic boxes wrap them.
    """
    T = assemble_kinetic(model, box, check=check)
    if not potential:
        return T
    pot = model.potential
    V = pot.V0(box.points()) + box.eps * pot.V1(box.points())
    if not np.all(np.isfinite(V)):
        raise ModelError("non-finite potential on the box")
    return (T + sp.diags(V)).tocsr()


def _symmetric(A: sp.csr_matrix) -> sp.csr_matrix:
    A.sum_duplicates()
    A.eliminate_zeros()
    diff = abs(A - A.T)
    asym = diff.max() if diff.nnz else 0.0
    if asym > SYMMETRY_TOL:
        raise AssemblyError(f"assembled operator is asymmetric by {asym:.3g}")
    S = ((A + A.T) * 0.5).tocsr()
    S.sort_indices()
    return S


# ----------------------------------------------------------------------------
# norms and export


def operator_norm(A, tol: float = 1e-8, *, method: str = "auto", max_steps: Optional[int] = None) -> float:
    """Spectral norm ‖A‖.

    Symmetric (Hermitian) operators use the largest |eigenvalue|; anything
    else uses √λ_max(AᴴA). ``method='dense'`` is exact LAPACK,
    ``'lanczos'`` is iterative to relative tolerance ``tol``.
    """
    A = A.tocsr() if sp.issparse(A) else np.asarray(A)
    n = A.shape[0]
    scale = abs(A).max() if sp.issparse(A) else np.abs(A).max(initial=0.0)
    if scale == 0:
        return 0.0
    gap = abs(A - A.conj().T).max()
    symmetric = not np.iscomplexobj(A) and gap <= 1e-14 * scale
    if method == "auto":
        method = "dense" if n <= DENSE_MAX else "lanczos"
    if method == "dense":
        M = A.toarray() if sp.issparse(A) else A
        if gap <= 1e-14 * scale:
            w = np.linalg.eigvalsh(M)
            return float(max(abs(w[0]), abs(w[-1])))
        return float(np.linalg.norm(M, 2))
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    if symmetric:
        hi = extreme_eigenvalue(A, largest=True, tol=tol, max_steps=max_steps)
        lo = extreme_eigenvalue(A, largest=False, tol=tol, max_steps=max_steps)
        return max(abs(hi), abs(lo))
    G = A.conj().T @ A
    if np.iscomplexobj(G):
        # real symmetric embedding of the Hermitian Gram matrix; same spectrum, doubled
        blocks = [[G.real, -G.imag], [G.imag, G.real]]
        G = sp.bmat(blocks).tocsr() if sp.issparse(G) else np.block(blocks)
    return float(np.sqrt(max(extreme_eigenvalue(G, largest=True, tol=tol, max_steps=max_steps), 0.0)))


def write_coo(A, path) -> Path:
    """Write "row col value" triples (17 significant digits), one per line."""
    path = Path(path)
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with path.open("w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]}\n")
        for i in order:
            fh.write(f"{C.row[i]} {C.col[i]} {C.data[i]:.17g}\n")
    return path


def read_coo(path) -> sp.csr_matrix:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().lstrip("#").split()
        shape = (int(header[0]), int(header[1]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape).tocsr()
