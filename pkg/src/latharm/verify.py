"""Quantitative studies comparing lattice spectra with the harmonic prediction.

Every "O(ε^p)" statement is turned into a measured exponent by a log-log
least-squares fit over an ε sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .eigensolver import CLUSTER_TOL, DENSE_MAX, dense_spectrum, lowest_eigenvalues
from .harmonic import merged_levels, quasimode, quasimode_margin, well_data
from .lattice import (
    DEFAULT_S,
    assemble_hamiltonian,
    assemble_kinetic,
    build_lattice,
    fourier_cutoff,
    operator_norm,
    partition_of_unity,
)
from .model import ModelSpec, as_points, default_half_width, eval_potential
from .symbols import TorusSymbol, kinetic_symbol, moyal_partial_sum, quadratic_torus_symbol, quantize

__all__ = [
    "RateFit",
    "InsufficientDataError",
    "PreconditionError",
    "DegenerateBallError",
    "ConvergenceReport",
    "DefectReport",
    "QuasimodeDiagnostics",
    "PerssonResult",
    "fit_rate",
    "trimmed_fit",
    "match_levels",
    "convergence_study",
    "DEFECT_KINDS",
    "localization_defects",
    "defect_operator",
    "quasimode_gram_and_rayleigh",
    "persson_estimate",
    "FIT_FLOOR",
    "PsidoReport",
    "PSIDO_CHECKS",
    "psido_study",
    "quantization_mismatch",
    "composition_defect",
    "moyal_test_pair",
    "cv_test_symbol",
]

FIT_FLOOR = 1e-13
DEFECT_KINDS = ("ims", "double_commutator", "microlocal", "quadratic_replacement")
# log-space noise floor for the outlier rule; a near-perfect fit of the
# remaining points should not by itself condemn the largest-eps point
_SIGMA_FLOOR = 1e-2


class InsufficientDataError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class DegenerateBallError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    n_points: int
    excluded_largest: bool = False


def fit_rate(points: Sequence[Tuple[float, float]]) -> RateFit:
    """Least-squares line through (log ε, log value).

    Points with value ≤ 1e−13 are dropped; at least three must remain.
    ``residual`` is the RMS deviation in log space.
    """
    pts = [(float(e), float(v)) for e, v in points if v > FIT_FLOOR and e > 0]
    if len(pts) < 3:
        raise InsufficientDataError(f"need at least 3 points with value > {FIT_FLOOR}, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    (slope, intercept), *_ = np.linalg.lstsq(np.vstack([x, np.ones_like(x)]).T, y, rcond=None)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(float(slope), float(intercept), resid, len(pts))


def trimmed_fit(points: Sequence[Tuple[float, float]]) -> RateFit:
    """fit_rate, dropping the largest-ε point if it is a >3σ outlier.

    σ is the RMS log residual of the fit through the remaining points
    (floored at 1e−2); needs at least four usable points to trim.
    """
    full = fit_rate(points)
    pts = sorted(((e, v) for e, v in points if v > FIT_FLOOR and e > 0), reverse=True)
    if len(pts) < 4:
        return full
    rest = fit_rate(pts[1:])
    e0, v0 = pts[0]
    dev = abs(math.log(v0) - (rest.slope * math.log(e0) + rest.intercept))
    if dev > 3 * max(rest.residual, _SIGMA_FLOOR):
        return RateFit(rest.slope, rest.intercept, rest.residual, rest.n_points, True)
    return full


def _safe_fit(points) -> Optional[RateFit]:
    try:
        return trimmed_fit(points)
    except InsufficientDataError:
        return None


# ----------------------------------------------------------------------------
# eigenvalue convergence


@dataclass
class ConvergenceReport:
    label: str
    ks: int
    rows: List[Tuple[float, int, float, float, float]]  # (eps, k, E_k, eps*e_k, abs_error)
    fits: dict  # k -> RateFit or None
    metadata: dict = field(default_factory=dict)

    def errors(self, k: int) -> List[Tuple[float, float]]:
        return [(r[0], r[4]) for r in self.rows if r[1] == k]

    def scaled_errors(self, eps: float) -> np.ndarray:
        """|E_k/ε − e_k| for k = 1..ks at the given ε."""
        return np.array([r[4] / r[0] for r in self.rows if r[0] == eps])

    def slope(self, k: int) -> float:
        fit = self.fits.get(k)
        return float("nan") if fit is None else fit.slope


def match_levels(computed, predicted, tol: float = CLUSTER_TOL) -> List[Tuple[float, float]]:
    """Pair eigenvalues with predicted values as multisets.

    Predicted values are grouped into clusters (relative spread δ = tol·(1+|λ|));
    inside each cluster, and globally, the pairing is by sorted order.
    """
    computed = np.sort(np.asarray(computed, dtype=float))
    predicted = np.sort(np.asarray(predicted, dtype=float))
    if len(computed) != len(predicted):
        raise ValueError("multiset sizes differ")
    clusters = []
    for i, p in enumerate(predicted):
        if clusters and abs(p - predicted[clusters[-1][-1]]) <= tol * (1 + abs(p)):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    pairs = []
    for cl in clusters:
        for i in cl:
            pairs.append((float(computed[i]), float(predicted[i])))
    return pairs


def _box_half_width(model: ModelSpec, box_policy) -> float:
    if box_policy is None:
        return default_half_width(model)
    if callable(box_policy):
        return float(box_policy(model))
    return float(box_policy)


def convergence_study(
    model: ModelSpec,
    ks: int,
    eps_list: Sequence[float],
    box_policy=None,
    *,
    tol: float = 1e-10,
    dense_max: int = DENSE_MAX,
) -> ConvergenceReport:
    """Compare the ks lowest eigenvalues of H_ε with ε·e_k over an ε sweep.

    ``box_policy`` is a half-width, a callable model -> half-width, or None
    for max_j |x_j| + 2. Boxes are Dirichlet.
    """
    eps_list = sorted({float(e) for e in eps_list}, reverse=True)
    if len(eps_list) < 4:
        raise PreconditionError("eps_list needs at least 4 distinct values")
    if eps_list[0] / eps_list[-1] < 8 - 1e-12:
        raise PreconditionError("eps_list must span a factor of at least 8")
    levels = merged_levels(model, ks)
    e = np.array([lv.value for lv in levels])
    L = _box_half_width(model, box_policy)
    rows = []
    sizes = {}
    methods = {}
    for eps in eps_list:
        box = build_lattice(model.dimension, eps, L, "dirichlet")
        H = assemble_hamiltonian(model, box)
        res = lowest_eigenvalues(H, ks, tol, dense_max=dense_max)
        sizes[eps] = box.size
        methods[eps] = res.method
        for k, (E, pred) in enumerate(match_levels(res.eigenvalues, eps * e), start=1):
            rows.append((eps, k, E, pred, abs(E - pred)))
    fits = {}
    for k in range(1, ks + 1):
        pts = [(r[0], r[4]) for r in rows if r[1] == k]
        fits[k] = _safe_fit(pts)
    meta = {"half_width": L, "boundary": "dirichlet", "sizes": sizes, "methods": methods, "tol": tol}
    return ConvergenceReport(model.label, ks, rows, fits, meta)


# ----------------------------------------------------------------------------
# localization defects


@dataclass
class DefectReport:
    kind: str
    rows: List[Tuple[float, float]]  # (eps, norm)
    fit: Optional[RateFit]
    label: str = ""

    @property
    def slope(self) -> float:
        return float("nan") if self.fit is None else self.fit.slope


def defect_operator(
    model: ModelSpec,
    kind: str,
    eps: float,
    *,
    s: float = DEFAULT_S,
    half_width: Optional[float] = None,
    partition: Optional[Callable] = None,
):
    """The defect operator of the given kind at one ε, as a dense matrix.

    ims:                   H − Σ_{j≥0} χ_j H χ_j                  (Dirichlet box, sparse)
    double_commutator:     ½ Σ_{j≥0} [χ_j, [χ_j, H]]              (Dirichlet box, sparse)
    microlocal:            χ_j Φ (T − T_{q,j}) Φ χ_j, worst well   (periodic box)
    quadratic_replacement: χ_j Φ (T_q − T_{q,j}) Φ χ_j, worst well (periodic box)

    Φ = Op(φ_0). ``partition(box)`` may override the cutoff family.
    Returns a list of matrices (one per well for the microlocal kinds, which
    are dense because Φ mixes all sites).
    """
    if kind not in DEFECT_KINDS:
        raise ValueError(f"unknown defect kind {kind!r}; expected one of {DEFECT_KINDS}")
    L = half_width if half_width is not None else default_half_width(model)
    if kind in ("ims", "double_commutator"):
        # both stay sparse: diagonal cutoffs only rescale the stencil entries
        box = build_lattice(model.dimension, eps, L, "dirichlet")
        H = assemble_hamiltonian(model, box)
        chis = partition(box) if partition is not None else partition_of_unity(box, model.wells, s)
        if kind == "ims":
            D = H.copy()
            for c in chis:
                C = sp.diags(c)
                D = D - C @ H @ C
        else:
            D = sp.csr_matrix(H.shape)
            for c in chis:
                C = sp.diags(c)
                inner = C @ H - H @ C
                D = D + 0.5 * (C @ inner - inner @ C)
        D = sp.csr_matrix(D)
        D.eliminate_zeros()
        return [D]
    box = build_lattice(model.dimension, eps, L, "periodic")
    Phi = fourier_cutoff(box, s)
    chis = partition(box) if partition is not None else partition_of_unity(box, model.wells, s)
    if kind == "microlocal":
        T = assemble_kinetic(model, box).toarray()
    else:
        T = quantize(box, quadratic_torus_symbol(model, eps)).real
    out = []
    for j in range(len(model.wells)):
        Tqj = quantize(box, quadratic_torus_symbol(model, eps, frozen_well=j)).real
        c = chis[j + 1]
        M = Phi @ (T - Tqj) @ Phi
        out.append(c[:, None] * M * c[None, :])
    return out


def localization_defects(
    model: ModelSpec,
    kind: str,
    eps_list: Sequence[float],
    *,
    s: float = DEFAULT_S,
    half_width: Optional[float] = None,
    partition: Optional[Callable] = None,
) -> DefectReport:
    """Operator norms of a localization defect over an ε sweep, with fitted rate."""
    if not eps_list:
        raise PreconditionError("eps_list is empty")
    rows = []
    for eps in sorted({float(e) for e in eps_list}, reverse=True):
        mats = defect_operator(model, kind, eps, s=s, half_width=half_width, partition=partition)
        rows.append((eps, max(operator_norm(M, 1e-10) for M in mats)))
    return DefectReport(kind, rows, _safe_fit(rows), model.label)


# ----------------------------------------------------------------------------
# quasimodes


@dataclass
class QuasimodeDiagnostics:
    eps: float
    levels: List[Tuple[int, Tuple[int, ...]]]
    gram: np.ndarray
    rayleigh: np.ndarray
    predicted: np.ndarray  # ε·e for each requested level

    @property
    def gram_defect(self) -> float:
        return float(np.max(np.abs(self.gram - np.eye(len(self.levels)))))

    @property
    def rayleigh_defect(self) -> float:
        return float(np.max(np.abs(self.rayleigh - np.diag(self.predicted))))

    def quotient_errors(self) -> np.ndarray:
        """|⟨g, Hg⟩/⟨g, g⟩ − ε e| per level."""
        return np.abs(np.diag(self.rayleigh) / np.diag(self.gram) - self.predicted)


def quasimode_gram_and_rayleigh(
    model: ModelSpec,
    eps: float,
    levels: Sequence[Tuple[int, Sequence[int]]],
    *,
    half_width: Optional[float] = None,
) -> QuasimodeDiagnostics:
    """Gram ε^d⟨g_m|g_n⟩ and Rayleigh ε^d⟨g_m|H_ε g_n⟩ matrices of quasimodes."""
    L = half_width if half_width is not None else default_half_width(model)
    box = build_lattice(model.dimension, eps, L, "dirichlet")
    H = assemble_hamiltonian(model, box)
    wells = {}
    G = []
    pred = []
    levels = [(int(j), tuple(int(a) for a in alpha)) for j, alpha in levels]
    for j, alpha in levels:
        if j not in wells:
            wells[j] = well_data(model, j)
        G.append(quasimode(box, wells[j], alpha, eps))
        pred.append(eps * wells[j].level(alpha))
    G = np.array(G).T
    scale = eps**model.dimension
    gram = scale * (G.T @ G)
    rayleigh = scale * (G.T @ (H @ G))
    return QuasimodeDiagnostics(eps, levels, gram, 0.5 * (rayleigh + rayleigh.T), np.array(pred))


# ----------------------------------------------------------------------------
# Persson estimator


@dataclass
class PerssonResult:
    eps: float
    radius: float
    centers: np.ndarray
    values: np.ndarray  # Λ_R(x) per center
    potential_bounds: np.ndarray  # min of V_ε over the lattice ball

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))


def persson_estimate(model: ModelSpec, eps: float, R: float, probe_centers) -> PerssonResult:
    """Λ_R(x): lowest eigenvalue of H_ε restricted to lattice sites in the ball B_x(R).

    The kinetic part of every such restriction is positive semidefinite, so
    min_{B_x(R)} V_ε is a lower bound reported alongside.
    """
    d = model.dimension
    centers = as_points(probe_centers, d).reshape(-1, d)
    vals = []
    bounds = []
    for c in centers:
        L = float(np.max(np.abs(c))) + R + (model.hopping.range + 1) * eps
        box = build_lattice(d, eps, L, "dirichlet")
        pts = box.points()
        inside = np.flatnonzero(np.linalg.norm(pts - c, axis=1) <= R + 1e-12)
        if inside.size < 2:
            raise DegenerateBallError(f"ball of radius {R} around {c.tolist()} holds {inside.size} lattice site(s)")
        H = assemble_hamiltonian(model, box)
        sub = H[inside][:, inside]
        if inside.size <= DENSE_MAX:
            lam = dense_spectrum(sub).eigenvalues[0]
        else:
            lam = lowest_eigenvalues(sub, 1).eigenvalues[0]
        vals.append(float(lam))
        bounds.append(float(np.min(eval_potential(model, pts[inside], eps))))
    return PerssonResult(eps, R, centers, np.array(vals), np.array(bounds))


# ----------------------------------------------------------------------------
# pseudodifferential checks


def moyal_test_pair() -> Tuple[TorusSymbol, TorusSymbol]:
    """a = cos(x₁)e^{iξ₁}, b = e^{−x₁²/2}cos(ξ₁).

    a is a single translation times a multiplier, so a # b is known in closed
    form and every truncation has an exact O(ε^N) remainder.
    """

    def fa(x, xi):
        return np.cos(x[..., 0]) * np.exp(1j * xi[..., 0])

    def fb(x, xi):
        return np.exp(-0.5 * x[..., 0] ** 2) * np.cos(xi[..., 0])

    return TorusSymbol(fa, 1), TorusSymbol(fb, 1)


def cv_test_symbol() -> TorusSymbol:
    """Bounded symbol cos(x₁)sin(ξ₁) for the uniform-norm sweep."""
    return TorusSymbol(lambda x, xi: np.cos(x[..., 0]) * np.sin(xi[..., 0]), 1)


@dataclass
class PsidoReport:
    rows: List[Tuple[str, float, int, float]]  # (check, eps, order, value)
    label: str = ""

    def values(self, check: str, order: int = 0) -> List[Tuple[float, float]]:
        return [(r[1], r[3]) for r in self.rows if r[0] == check and r[2] == order]

    def slope(self, check: str, order: int = 0) -> float:
        fit = _safe_fit(self.values(check, order))
        return float("nan") if fit is None else fit.slope


PSIDO_CHECKS = ("quantization", "moyal", "calderon_vaillancourt")


def quantization_mismatch(model: ModelSpec, eps: float, half_width: Optional[float] = None) -> float:
    """max |Op(t) − T_ε| entrywise on a periodic box."""
    L = half_width if half_width is not None else default_half_width(model)
    box = build_lattice(model.dimension, eps, L, "periodic")
    Q = quantize(box, kinetic_symbol(model, eps))
    return float(np.max(np.abs(Q - assemble_kinetic(model, box).toarray())))


def composition_defect(a: TorusSymbol, b: TorusSymbol, N: int, eps: float, half_width: float = 9.0) -> float:
    """‖Op(a)Op(b) − Op(a #_N b)‖ on a periodic 1D box."""
    box = build_lattice(a.dimension, eps, half_width, "periodic")
    lhs = quantize(box, a) @ quantize(box, b)
    rhs = quantize(box, moyal_partial_sum(a, b, N, eps))
    return operator_norm(lhs - rhs, method="dense")


def psido_study(
    model: ModelSpec,
    eps_list: Sequence[float],
    *,
    orders: Sequence[int] = (1, 2, 3),
    checks: Sequence[str] = PSIDO_CHECKS,
) -> PsidoReport:
    """Quantization consistency, #-product truncation defects and CV norms over an ε sweep."""
    bad = set(checks) - set(PSIDO_CHECKS)
    if bad:
        raise ValueError(f"unknown psido checks {sorted(bad)}; expected a subset of {PSIDO_CHECKS}")
    rows = []
    a, b = moyal_test_pair()
    c = cv_test_symbol()
    for eps in sorted({float(e) for e in eps_list}, reverse=True):
        if "quantization" in checks:
            rows.append(("quantization", eps, 0, quantization_mismatch(model, eps)))
        if "moyal" in checks:
            for N in orders:
                rows.append(("moyal", eps, int(N), composition_defect(a, b, int(N), eps)))
        if "calderon_vaillancourt" in checks:
            box = build_lattice(1, eps, 2 * np.pi, "periodic")
            rows.append(("calderon_vaillancourt", eps, 0, operator_norm(quantize(box, c), method="dense")))
    return PsidoReport(rows, model.label)
