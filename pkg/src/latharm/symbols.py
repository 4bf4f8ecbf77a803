"""Symbols on R^d × T^d, their lattice quantization and #-compositions.

All torus integrals are exact sums over the dual grid of a periodic box,
so quantized operators are plain dense matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .lattice import BoundaryError, LatticeBox, bump, chi, fourier_multiplier
from .model import Constant, ModelError, ModelSpec, as_points

__all__ = [
    "TorusSymbol",
    "eval_t0_t1",
    "eval_B",
    "t_tilde0",
    "quadratic_cutoff",
    "quadratic_symbol",
    "kinetic_symbol",
    "quadratic_torus_symbol",
    "translation_symbol",
    "cutoff_symbol",
    "wrap",
    "character_matrix",
    "discrete_fourier",
    "inverse_discrete_fourier",
    "quantize",
    "moyal_partial_sum",
    "FD_STEP",
]

FD_STEP = 1e-3


def wrap(xi):
    """Representative of ξ in [−π, π)."""
    return (np.asarray(xi, dtype=float) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class TorusSymbol:
    """Symbol a(x, ξ) with ξ on the torus.

    ``func(x, xi)`` must broadcast over leading axes of arrays shaped
    (..., d). ``order`` and ``delta`` are metadata for rate checks only.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dimension: int
    order: float = 0.0
    delta: float = 0.0
    x_independent: bool = False
    xi_independent: bool = False

    def __call__(self, x, xi) -> np.ndarray:
        x = as_points(x, self.dimension)
        xi = as_points(xi, self.dimension)
        return np.asarray(self.func(x, xi), dtype=complex)


# ----------------------------------------------------------------------------
# kinetic symbol and its pieces


def _phases(model: ModelSpec, xi: np.ndarray):
    for eta in model.hopping.stencil:
        yield eta, np.exp(-1j * (xi @ np.asarray(eta, dtype=float)))


def eval_t0_t1(model: ModelSpec, x, xi):
    """(t_0(x, ξ), t_1(x, ξ)) with t_j = Σ_η a^{(j)}_η(x) e^{−iη·ξ}."""
    d = model.dimension
    x = as_points(x, d)
    xi = as_points(xi, d)
    shape = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
    t0 = np.zeros(shape, dtype=complex)
    t1 = np.zeros(shape, dtype=complex)
    for eta, ph in _phases(model, xi):
        t0 = t0 + model.hopping.order(0, eta, x) * ph
        t1 = t1 + model.hopping.order(1, eta, x) * ph
    if t0.ndim == 0:
        return complex(t0), complex(t1)
    return t0, t1


def t_tilde0(model: ModelSpec, x, xi) -> np.ndarray:
    """t̃_0(x, ξ) = −Σ_η a^{(0)}_η(x) cosh(η·ξ) for real ξ."""
    d = model.dimension
    x = as_points(x, d)
    xi = as_points(xi, d)
    out = 0.0
    for eta in model.hopping.stencil:
        out = out - model.hopping.order(0, eta, x) * np.cosh(xi @ np.asarray(eta, dtype=float))
    return out


def eval_B(model: ModelSpec, x, eps: Optional[float] = None) -> np.ndarray:
    """Kinetic matrix B(x) = −½ Σ_η a^{(0)}_η(x) η ηᵀ (ε-independent).

    Raises ModelError if B(x) is not positive definite.
    """
    d = model.dimension
    x = as_points(x, d).reshape(d)
    B = np.zeros((d, d))
    for eta in model.hopping.stencil:
        e = np.asarray(eta, dtype=float)
        B -= 0.5 * float(model.hopping.order(0, eta, x[None, :])[0]) * np.outer(e, e)
    lam = np.linalg.eigvalsh(B)
    if lam[0] <= 0:
        raise ModelError(f"B(x) at x={x.tolist()} is not positive definite (eigenvalues {lam.tolist()})")
    return B


def quadratic_cutoff(xi) -> np.ndarray:
    """k(ξ): 1 for |ξ| ≤ 2, 0 for |ξ| ≥ 3 (so supp k ⊂ (−π, π)^d)."""
    xi = np.asarray(xi, dtype=float)
    return bump(np.linalg.norm(xi, axis=-1), 2.0, 3.0)


def quadratic_symbol(model: ModelSpec, x, xi, eps: float, frozen_well: Optional[int] = None):
    """t_{π,q}(x, ξ) = (⟨ξ, B(x)ξ⟩ + ε t_1(x, 0))·k(ξ) for ξ ∈ R^d.

    With ``frozen_well = j`` the coefficients are frozen at x_j.
    """
    d = model.dimension
    xi = as_points(xi, d)
    if frozen_well is not None:
        x = model.wells[frozen_well]
    x = as_points(x, d)
    pts = x.reshape(-1, d)
    Bs = np.array([eval_B(model, p) for p in pts]).reshape(x.shape[:-1] + (d, d))
    t1_0 = np.real(eval_t0_t1(model, x, np.zeros(d))[1])
    quad = np.einsum("...i,...ij,...j->...", xi, Bs, xi)
    out = (quad + eps * t1_0) * quadratic_cutoff(xi)
    return out[()] if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# symbol constructors


def kinetic_symbol(model: ModelSpec, eps: float) -> TorusSymbol:
    """Full symbol t(x, ξ; ε) = Σ_η a_{εη}(x, ε) e^{−iη·ξ}."""

    def func(x, xi):
        out = 0.0
        for eta, ph in _phases(model, xi):
            out = out + model.hopping.coefficient(eta, x, eps) * ph
        return out

    fields = list(model.hopping.a0.values()) + list(model.hopping.a1.values())
    constant = all(isinstance(f, Constant) for f in fields)
    return TorusSymbol(func, model.dimension, x_independent=constant)


def quadratic_torus_symbol(model: ModelSpec, eps: float, frozen_well: Optional[int] = None) -> TorusSymbol:
    """t̃_{π,q} (or its frozen version) continued periodically from (−π, π)^d."""

    def func(x, xi):
        xw = wrap(xi)
        if frozen_well is not None:
            return quadratic_symbol(model, model.wells[frozen_well], xw, eps)
        return quadratic_symbol(model, x, xw, eps)

    return TorusSymbol(func, model.dimension, x_independent=frozen_well is not None)


def translation_symbol(eta) -> TorusSymbol:
    """e^{−iη·ξ}, whose quantization is the translation by γ = εη."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    return TorusSymbol(lambda x, xi: np.exp(-1j * (xi @ eta)), len(eta), x_independent=True)


def cutoff_symbol(d: int, eps: float, s: float = 0.4) -> TorusSymbol:
    """φ̃_0(ξ) = χ(ε^{−s} ξ) continued periodically."""
    return TorusSymbol(lambda x, xi: chi(wrap(xi) / eps**s), d, delta=s, x_independent=True)


# ----------------------------------------------------------------------------
# discrete Fourier transform and quantization


def character_matrix(box: LatticeBox) -> np.ndarray:
    """E[m, k] = exp(i k·ξ_m) with exact integer phase reduction."""
    n = box.n_axis
    k = box.int_coords()
    m = box.dual_int()
    phase = (m @ k.T) % n
    return np.exp(2j * np.pi * phase / n)


def _require_periodic(box: LatticeBox):
    if box.boundary != "periodic":
        raise BoundaryError("quantization and the discrete Fourier transform need a periodic box")


def discrete_fourier(box: LatticeBox, u) -> np.ndarray:
    """û(ξ_m) = n^{−d/2} Σ_x e^{i x·ξ_m/ε} u(x), ordered like ``box.dual_grid()``."""
    _require_periodic(box)
    u = np.asarray(u)
    if u.shape != (box.size,):
        raise ValueError(f"expected a lattice vector of length {box.size}, got shape {u.shape}")
    return character_matrix(box) @ u / np.sqrt(box.size)


def inverse_discrete_fourier(box: LatticeBox, v) -> np.ndarray:
    """u(x) = n^{−d/2} Σ_m e^{−i x·ξ_m/ε} v(ξ_m)."""
    _require_periodic(box)
    v = np.asarray(v)
    if v.shape != (box.size,):
        raise ValueError(f"expected a dual vector of length {box.size}, got shape {v.shape}")
    return character_matrix(box).conj().T @ v / np.sqrt(box.size)


def quantize(box: LatticeBox, a: TorusSymbol, eps: Optional[float] = None) -> np.ndarray:
    """Op_ε^T(a) on a periodic box.

    Entry (x, y) = n^{−d} Σ_m e^{i(y−x)·ξ_m/ε} a(x, ξ_m).
    """
    _require_periodic(box)
    if a.dimension != box.dimension:
        raise ValueError("symbol and box dimensions differ")
    x = box.points()
    if a.xi_independent:
        return np.diag(a(x, np.zeros_like(x)))
    xi = box.dual_grid()
    if a.x_independent:
        return fourier_multiplier(box, a(np.zeros_like(xi), xi))
    E = character_matrix(box)
    A = a(x[:, None, :], xi[None, :, :])
    return (A * E.conj().T) @ E / box.size


# ----------------------------------------------------------------------------
# #-product partial sums


def _multi_indices(d: int, order: int):
    for alpha in itertools.product(range(order + 1), repeat=d):
        if sum(alpha) == order:
            yield alpha


def _derivative(f, x, xi, alpha, wrt_xi: bool, h: float):
    """Nested central differences ∂^α f in x (or ξ)."""
    alpha = list(alpha)
    for nu, a_nu in enumerate(alpha):
        if a_nu:
            alpha[nu] -= 1
            e = np.zeros(x.shape[-1])
            e[nu] = h
            if wrt_xi:
                plus = _derivative(f, x, xi + e, alpha, wrt_xi, h)
                minus = _derivative(f, x, xi - e, alpha, wrt_xi, h)
            else:
                plus = _derivative(f, x + e, xi, alpha, wrt_xi, h)
                minus = _derivative(f, x - e, xi, alpha, wrt_xi, h)
            return (plus - minus) / (2 * h)
    return f(x, xi)


def moyal_partial_sum(a: TorusSymbol, b: TorusSymbol, N: int, eps: float, h: float = FD_STEP) -> TorusSymbol:
    """Σ_{j<N} Σ_{|α|=j} (iε)^{|α|}/α! (∂_ξ^α a)(∂_x^α b).

    Derivatives are nested central differences with step ``h``.
    """
    if not 1 <= N <= 4:
        raise ValueError("N must be between 1 and 4")
    d = a.dimension
    terms = [
        (alpha, (1j * eps) ** j / math.prod(math.factorial(c) for c in alpha))
        for j in range(N)
        for alpha in _multi_indices(d, j)
    ]

    def func(x, xi):
        out = 0.0
        for alpha, coef in terms:
            if sum(alpha) and (a.xi_independent or b.x_independent):
                continue
            da = _derivative(a, x, xi, alpha, True, h)
            db = _derivative(b, x, xi, alpha, False, h)
            out = out + coef * da * db
        return out

    return TorusSymbol(
        func,
        d,
        order=a.order + b.order,
        delta=max(a.delta, b.delta),
        x_independent=a.x_independent and b.x_independent,
        xi_independent=a.xi_independent and b.xi_independent,
    )
