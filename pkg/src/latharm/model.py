"""Model specifications for ε-scaled lattice Hamiltonians.

A model is a finite hopping stencil with smooth per-offset coefficient
fields plus a multi-well potential. ``validate_hypotheses`` checks the
structural assumptions (balance, sign, reversibility, span, non-degenerate
wells, positivity of the kinetic symbol) on sampled grids.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Constant",
    "Polynomial",
    "HoppingFamily",
    "PotentialSpec",
    "ModelSpec",
    "ClauseResult",
    "ValidationReport",
    "ModelError",
    "ModelEvaluationError",
    "CatalogError",
    "validate_hypotheses",
    "builtin_model",
    "builtin_names",
    "eval_potential",
    "hessian_fd",
    "default_half_width",
    "as_points",
    "model_from_config",
]

Offset = Tuple[int, ...]
Field = Callable[[np.ndarray], np.ndarray]

EQ_TOL = 1e-10
FD_STEP = 1e-4


class ModelError(ValueError):
    """A model violates a structural requirement."""


class ModelEvaluationError(ModelError):
    """A coefficient or potential field returned a non-finite value."""


class CatalogError(KeyError):
    """Unknown built-in model name."""


class Constant:
    """Spatially constant field ``x -> value``."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.value)

    def __repr__(self):
        return f"Constant({self.value!r})"


class Polynomial:
    """Real polynomial on R^d given as ``[(coef, exponents), ...]``.

    Carries closed-form gradient and Hessian so that well data does not need
    finite differences.
    """

    def __init__(self, terms: Sequence[Tuple[float, Sequence[int]]], dimension: Optional[int] = None):
        cleaned = []
        for coef, powers in terms:
            powers = tuple(int(p) for p in np.atleast_1d(powers))
            if any(p < 0 for p in powers):
                raise ValueError(f"negative exponent in {powers}")
            cleaned.append((float(coef), powers))
        if dimension is None:
            if not cleaned:
                raise ValueError("empty polynomial needs an explicit dimension")
            dimension = len(cleaned[0][1])
        for _, powers in cleaned:
            if len(powers) != dimension:
                raise ValueError(f"exponent tuple {powers} does not match dimension {dimension}")
        self.terms = cleaned
        self.dimension = dimension

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for coef, powers in self.terms:
            term = np.full(x.shape[:-1], coef)
            for nu, p in enumerate(powers):
                if p:
                    term = term * x[..., nu] ** p
            out = out + term
        return out

    def derivative(self, nu: int) -> "Polynomial":
        terms = []
        for coef, powers in self.terms:
            if powers[nu] == 0:
                continue
            new = list(powers)
            new[nu] -= 1
            terms.append((coef * powers[nu], tuple(new)))
        return Polynomial(terms, self.dimension)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = self.dimension
        out = np.empty((d, d))
        for nu in range(d):
            dnu = self.derivative(nu)
            for mu in range(nu, d):
                out[nu, mu] = out[mu, nu] = float(dnu.derivative(mu)(x))
        return out

    def __repr__(self):
        return f"Polynomial({self.terms!r})"


@dataclass(frozen=True)
class HoppingFamily:
    """Finite stencil of offsets η ∈ Z^d with coefficient fields.

    The hopping coefficient for the lattice step γ = εη is
    ``a0[η](x) + eps * a1[η](x)``; missing ``a1`` entries are zero.
    """

    dimension: int
    a0: Mapping[Offset, Field]
    a1: Mapping[Offset, Field] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ModelError("dimension must be >= 1")
        a0 = {tuple(int(c) for c in eta): f for eta, f in self.a0.items()}
        a1 = {tuple(int(c) for c in eta): f for eta, f in self.a1.items()}
        for eta in itertools.chain(a0, a1):
            if len(eta) != self.dimension:
                raise ModelError(f"offset {eta} does not have dimension {self.dimension}")
        extra = set(a1) - set(a0)
        if extra:
            raise ModelError(f"a1 offsets {sorted(extra)} missing from the a0 stencil")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a1", a1)

    @property
    def stencil(self) -> List[Offset]:
        return sorted(self.a0)

    @property
    def range(self) -> int:
        return max(max(abs(c) for c in eta) for eta in self.a0)

    def coefficient(self, eta: Offset, x, eps: float) -> np.ndarray:
        """a_γ(x, ε) for γ = ε·eta, evaluated on points ``x`` of shape (..., d)."""
        eta = tuple(eta)
        x = np.asarray(x, dtype=float)
        val = _evaluate(self.a0[eta], x, f"a0{eta}")
        if eta in self.a1:
            val = val + eps * _evaluate(self.a1[eta], x, f"a1{eta}")
        return val

    def order(self, j: int, eta: Offset, x) -> np.ndarray:
        table = self.a0 if j == 0 else self.a1
        x = np.asarray(x, dtype=float)
        if eta not in table:
            return np.zeros(x.shape[:-1])
        return _evaluate(table[eta], x, f"a{j}{eta}")


@dataclass(frozen=True)
class PotentialSpec:
    """V̂_ε = V0 + ε V1 together with the declared wells.

    ``confinement = (R, C)`` declares V0 > C outside |x| ≥ R.
    ``hessian`` optionally returns the closed-form D²V0 at a point.
    """

    V0: Field
    V1: Field
    wells: np.ndarray
    confinement: Tuple[float, float] = (np.inf, 0.0)
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        wells = np.atleast_2d(np.asarray(self.wells, dtype=float))
        if wells.shape[0] < 1:
            raise ModelError("at least one well is required")
        wells.setflags(write=False)
        object.__setattr__(self, "wells", wells)
        if self.hessian is None and isinstance(self.V0, Polynomial):
            object.__setattr__(self, "hessian", self.V0.hessian)

    @property
    def dimension(self) -> int:
        return self.wells.shape[1]

    def hessian_half(self, j: int) -> np.ndarray:
        """½ D²V0 at well ``j`` (closed form if available, else central differences)."""
        xj = self.wells[j]
        hess = self.hessian(xj) if self.hessian is not None else hessian_fd(self.V0, xj)
        hess = np.asarray(hess, dtype=float)
        return 0.25 * (hess + hess.T)


@dataclass(frozen=True)
class ModelSpec:
    hopping: HoppingFamily
    potential: PotentialSpec
    label: str = "custom"

    def __post_init__(self):
        if self.hopping.dimension != self.potential.dimension:
            raise ModelError(
                f"hopping dimension {self.hopping.dimension} != potential dimension {self.potential.dimension}"
            )

    @property
    def dimension(self) -> int:
        return self.hopping.dimension

    @property
    def wells(self) -> np.ndarray:
        return self.potential.wells

    @functools.cached_property
    def report(self) -> "ValidationReport":
        """Validation on the default grids, computed once."""
        return validate_hypotheses(self)


def _evaluate(f: Field, x: np.ndarray, name: str) -> np.ndarray:
    val = np.asarray(f(x), dtype=float)
    val = np.broadcast_to(val, x.shape[:-1])
    if not np.all(np.isfinite(val)):
        bad = np.argwhere(~np.isfinite(val))[0]
        point = x[tuple(bad)] if x.ndim > 1 else x
        raise ModelEvaluationError(f"non-finite value of {name} at x={np.asarray(point).tolist()}")
    return val


def hessian_fd(f: Field, x0, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Hessian of a scalar field."""
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    out = np.empty((d, d))
    e = np.eye(d) * h
    f0 = float(f(x0))
    for nu in range(d):
        out[nu, nu] = (float(f(x0 + e[nu])) - 2 * f0 + float(f(x0 - e[nu]))) / h**2
        for mu in range(nu + 1, d):
            val = (
                float(f(x0 + e[nu] + e[mu]))
                - float(f(x0 + e[nu] - e[mu]))
                - float(f(x0 - e[nu] + e[mu]))
                + float(f(x0 - e[nu] - e[mu]))
            ) / (4 * h**2)
            out[nu, mu] = out[mu, nu] = val
    return out


def eval_potential(model: ModelSpec, x, eps: float) -> np.ndarray:
    """V0(x) + eps·V1(x); the O(ε²) remainder is identically zero."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_points(x, model.dimension)
    pot = model.potential
    out = _evaluate(pot.V0, x, "V0") + eps * _evaluate(pot.V1, x, "V1")
    return out[()] if out.ndim == 0 else out


def as_points(x, d: int) -> np.ndarray:
    """Coerce scalars / coordinate lists to an array of shape (..., d)."""
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def default_half_width(model: ModelSpec) -> float:
    """Box half-width max_j |x_j| + 2."""
    return float(np.max(np.linalg.norm(model.wells, axis=1))) + 2.0


# ----------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    passed: bool
    violation: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    label: str
    clauses: Tuple[ClauseResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> List[ClauseResult]:
        return [c for c in self.clauses if not c.passed]

    def __getitem__(self, clause: str) -> ClauseResult:
        for c in self.clauses:
            if c.clause == clause:
                return c
        raise KeyError(clause)


def default_sample_grid(model: ModelSpec, n_points: int = 100) -> np.ndarray:
    d = model.dimension
    L = default_half_width(model)
    per_axis = int(np.ceil(n_points ** (1.0 / d)))
    axis = np.linspace(-L, L, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def default_xi_grid(d: int, n: int = 64) -> np.ndarray:
    axis = -np.pi + 2 * np.pi * np.arange(n) / n
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    xi = np.stack([m.ravel() for m in mesh], axis=-1)
    return xi[np.any(xi != 0, axis=1)]


def _t0(hop: HoppingFamily, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """t_0(x, ξ) for a single x and many ξ (real part; imaginary part returned separately)."""
    total = np.zeros(len(xi), dtype=complex)
    for eta in hop.stencil:
        coef = float(hop.order(0, eta, x[None, :])[0])
        total += coef * np.exp(-1j * (xi @ np.asarray(eta, dtype=float)))
    return total


def validate_hypotheses(
    model: ModelSpec,
    sample_grid=None,
    xi_grid=None,
    eps_values: Sequence[float] = (0.1, 0.01),
    tol: float = EQ_TOL,
) -> ValidationReport:
    """Check the model assumptions clause by clause on sampled grids.

    Clauses: ``(a)(ii)`` balance and sign of the leading hopping, ``(a)(iii)``
    reversibility of the full family, ``(a)(v)`` span of the negative
    offsets, ``(b)(ii)`` declared confinement, ``(b)(iii)`` non-negative V0
    vanishing at non-degenerate wells, ``(c)`` t_0(x_j, ξ) > 0 for ξ ≠ 0.
    """
    hop = model.hopping
    pot = model.potential
    d = model.dimension
    x = default_sample_grid(model) if sample_grid is None else np.asarray(sample_grid, dtype=float).reshape(-1, d)
    xi = default_xi_grid(d) if xi_grid is None else np.asarray(xi_grid, dtype=float).reshape(-1, d)
    if len(x) == 0 or len(xi) == 0:
        raise ValueError("sample grids must be nonempty")
    xi = xi[np.any(xi != 0, axis=1)]
    results = []

    # (a)(ii)
    a0 = {eta: hop.order(0, eta, x) for eta in hop.stencil}
    balance = np.abs(sum(a0.values())).max()
    zero = (0,) * d
    sign = max([float(np.max(v)) for eta, v in a0.items() if eta != zero] + [0.0])
    # a sign failure usually breaks the balance too; report the sign magnitude then
    worst = sign if sign > 0 else balance
    msgs = []
    if balance > tol:
        msgs.append(f"sum of a0 deviates from 0 by {balance:.3g}")
    if sign > 0:
        msgs.append(f"off-diagonal a0 positive up to {sign:.3g}")
    results.append(ClauseResult("(a)(ii)", not msgs, float(worst), "; ".join(msgs)))

    # (a)(iii)
    rev = 0.0
    for eps in eps_values:
        for eta in hop.stencil:
            neg = tuple(-c for c in eta)
            shifted = x + eps * np.asarray(eta, dtype=float)
            lhs = hop.coefficient(eta, x, eps)
            rhs = hop.coefficient(neg, shifted, eps) if neg in hop.a0 else np.zeros(len(x))
            rev = max(rev, float(np.max(np.abs(lhs - rhs))))
    results.append(
        ClauseResult("(a)(iii)", rev <= tol, rev, "" if rev <= tol else f"reversibility residual {rev:.3g}")
    )

    # (a)(v)
    worst_rank = d
    for i in range(len(x)):
        neg = [eta for eta in hop.stencil if eta != zero and a0[eta][i] < 0]
        rank = np.linalg.matrix_rank(np.asarray(neg, dtype=float)) if neg else 0
        worst_rank = min(worst_rank, rank)
    results.append(
        ClauseResult(
            "(a)(v)", worst_rank == d, float(d - worst_rank),
            "" if worst_rank == d else f"negative offsets span only rank {worst_rank}",
        )
    )

    # (b)(ii)
    R, C = pot.confinement
    conf_detail = ""
    conf_viol = 0.0
    if np.isfinite(R):
        far = x[np.linalg.norm(x, axis=1) >= R]
        if len(far):
            gap = C - _evaluate(pot.V0, far, "V0")
            conf_viol = max(float(np.max(gap)), 0.0)
        if conf_viol > 0:
            conf_detail = f"V0 <= {C} outside radius {R}"
    results.append(ClauseResult("(b)(ii)", conf_viol == 0.0, conf_viol, conf_detail))

    # (b)(iii)
    v0 = _evaluate(pot.V0, x, "V0")
    msgs = []
    worst = max(-float(np.min(v0)), 0.0)
    if worst > tol:
        msgs.append(f"V0 negative down to {-worst:.3g}")
    for j, xj in enumerate(pot.wells):
        val = abs(float(_evaluate(pot.V0, xj[None, :], "V0")[0]))
        worst = max(worst, val)
        if val > tol:
            msgs.append(f"V0(x_{j}) = {val:.3g} != 0")
        At = pot.hessian_half(j)
        lam = float(np.linalg.eigvalsh(At).min())
        if lam <= 0:
            worst = max(worst, -lam)
            msgs.append(f"Hessian at x_{j} not positive definite (min eigenvalue {lam:.3g})")
    results.append(ClauseResult("(b)(iii)", not msgs, worst, "; ".join(msgs)))

    # (c)
    worst_min = np.inf
    for xj in pot.wells:
        worst_min = min(worst_min, float(np.min(_t0(hop, xj, xi).real)))
    results.append(
        ClauseResult(
            "(c)", worst_min > 0, max(-worst_min, 0.0),
            "" if worst_min > 0 else f"min t0(x_j, xi) = {worst_min:.3g}",
        )
    )
    return ValidationReport(model.label, tuple(results))


# ----------------------------------------------------------------------------
# catalog


def _nearest_neighbour(d: int) -> HoppingFamily:
    a0 = {(0,) * d: Constant(2.0 * d)}
    for nu in range(d):
        for sgn in (1, -1):
            eta = [0] * d
            eta[nu] = sgn
            a0[tuple(eta)] = Constant(-1.0)
    return HoppingFamily(d, a0)


def _double_well() -> PotentialSpec:
    # (x^2 - 1)^2 = x^4 - 2x^2 + 1
    V0 = Polynomial([(1.0, (4,)), (-2.0, (2,)), (1.0, (0,))])
    return PotentialSpec(V0, Constant(0.0), np.array([[-1.0], [1.0]]), confinement=(2.0, 1.0))


def _m1() -> ModelSpec:
    return ModelSpec(_nearest_neighbour(1), _double_well(), "M1")


def _m2() -> ModelSpec:
    V0 = Polynomial([(1.0, (2, 0)), (2.0, (1, 1)), (3.0, (0, 2))])
    pot = PotentialSpec(V0, Constant(0.0), np.zeros((1, 2)), confinement=(1.0, 0.25))
    return ModelSpec(_nearest_neighbour(2), pot, "M2")


def _m3() -> ModelSpec:
    etas = np.arange(1, 6)
    weights = np.exp(-etas.astype(float))
    # normalised so that B = 1, matching M1's harmonic frequencies
    scale = 1.0 / float(np.sum(weights * etas**2))
    a0: Dict[Offset, Field] = {}
    for eta, w in zip(etas, weights):
        a0[(int(eta),)] = Constant(-scale * w)
        a0[(-int(eta),)] = Constant(-scale * w)
    a0[(0,)] = Constant(2.0 * scale * float(np.sum(weights)))
    return ModelSpec(HoppingFamily(1, a0), _double_well(), "M3")


_CATALOG = {"M1": _m1, "M2": _m2, "M3": _m3}


def builtin_names() -> List[str]:
    return sorted(_CATALOG)


def builtin_model(name: str) -> ModelSpec:
    """Return a catalog model.

    M1: 1D nearest-neighbour Laplacian, V0 = (x² − 1)², wells ±1.
    M2: 2D nearest-neighbour Laplacian, V0 = x₁² + 2x₁x₂ + 3x₂², well at 0.
    M3: 1D hopping ∝ −e^{−|η|} for 1 ≤ |η| ≤ 5 (normalised to B = 1), M1's double well.
    """
    try:
        return _CATALOG[name]()
    except KeyError:
        raise CatalogError(f"unknown model {name!r}; valid names: {', '.join(builtin_names())}") from None


# ----------------------------------------------------------------------------
# configuration


def _field_from_config(entry, d: int, what: str) -> Field:
    if entry is None:
        return Constant(0.0)
    if isinstance(entry, (int, float)):
        return Constant(entry)
    if isinstance(entry, Mapping) and "terms" in entry:
        terms = [(t["coef"], t["powers"]) for t in entry["terms"]]
        return Polynomial(terms, d)
    raise ModelError(f"{what}: expected a number or a mapping with 'terms'")


def model_from_config(cfg) -> ModelSpec:
    """Build a model from a parsed configuration entry.

    Either a built-in name (``"M1"`` or ``{"builtin": "M1"}``) or an inline
    definition::

        label: toy
        dimension: 1
        hopping:
          - {offset: [0], a0: 2.0}
          - {offset: [1], a0: -1.0}
          - {offset: [-1], a0: -1.0}
        V0: {terms: [{coef: 1.0, powers: [2]}]}
        V1: 0.0
        wells: [[0.0]]
        confinement: {radius: 1.0, bound: 0.5}
    """
    if isinstance(cfg, str):
        return builtin_model(cfg)
    if not isinstance(cfg, Mapping):
        raise ModelError("model entry must be a name or a mapping")
    if "builtin" in cfg:
        return builtin_model(cfg["builtin"])
    try:
        d = int(cfg["dimension"])
        a0: Dict[Offset, Field] = {}
        a1: Dict[Offset, Field] = {}
        for row in cfg["hopping"]:
            eta = tuple(int(c) for c in row["offset"])
            a0[eta] = Constant(row["a0"])
            if row.get("a1", 0.0):
                a1[eta] = Constant(row["a1"])
        V0 = _field_from_config(cfg["V0"], d, "V0")
        V1 = _field_from_config(cfg.get("V1"), d, "V1")
        wells = np.asarray(cfg["wells"], dtype=float).reshape(-1, d)
    except KeyError as exc:
        raise ModelError(f"model definition missing field {exc.args[0]!r}") from None
    conf = cfg.get("confinement")
    confinement = (float(conf["radius"]), float(conf["bound"])) if conf else (np.inf, 0.0)
    pot = PotentialSpec(V0, V1, wells, confinement=confinement)
    return ModelSpec(HoppingFamily(d, a0, a1), pot, str(cfg.get("label", "custom")))
