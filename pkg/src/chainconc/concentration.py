"""Martingale machinery, Gamma constructions, variance proxies, tail bounds.

The pipeline: a function's local oscillations are propagated by an
upper-triangular Gamma matrix (from contraction coefficients, mixing-time
blocks, or brute-force coupling), giving a subgaussian variance proxy for
f - E f and a tail-bound curve. Three variance conventions are exposed
rather than silently picking one:

  exact   : (1/4) ||Gamma c||^2      (tightest, per-coordinate weights)
  opnorm  : (1/4) ||Gamma||^2 ||c||^2
  paper   : ||Gamma||^2 ||c||^2      (the form often quoted without the 1/4)

Always sigma2_exact <= sigma2_opnorm = sigma2_paper / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    ChainSpec,
    Trajectory,
    conditional_law,
    dobrushin_coefficient,
    prefix_probability,
    t_step_pair_tv,
)
from .coupling import wasserstein_matrix_tv
from .errors import EnumerationCapError, NoMixError, ValidationError, enumeration_cap
from .gamma import GammaMatrix, gamma_contractive, gamma_ergodic, operator_norm

CONVENTIONS = ("exact", "opnorm", "paper")
METHODS = ("contractive", "ergodic", "brute_force")

T_GRID_MULTIPLIERS = tuple(0.5 * k for k in range(1, 11))

CONVENTION_CAVEAT = (
    "sigma2_paper = ||Gamma||^2 ||c||^2 without the 1/4 factor; "
    "sigma2_opnorm = sigma2_paper / 4 and sigma2_exact <= sigma2_opnorm always"
)


@dataclass(frozen=True)
class LipschitzWeights:
    """Weighted-Hamming Lipschitz constants: |f(x)-f(y)| <= sum_i c_i 1{x_i != y_i}."""

    c: np.ndarray

    @classmethod
    def from_array(cls, arr) -> "LipschitzWeights":
        c = np.asarray(arr, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValidationError("weights must be a nonempty 1-d vector")
        if np.any(c < 0):
            raise ValidationError("weights must be nonnegative")
        return cls(c)

    @classmethod
    def ones(cls, n: int) -> "LipschitzWeights":
        return cls(np.ones(n))

    def __len__(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class TabularFunction:
    """Real-valued function on the joint space, stored flat in row-major order."""

    values: np.ndarray

    @classmethod
    def from_callable(cls, spec: ChainSpec, fn, cap: int | None = None) -> "TabularFunction":
        """Tabulate fn(states_tuple) over every trajectory; small instances only."""
        from .chain import coordinate_grid

        grids = coordinate_grid(spec.coord_sizes, cap=cap)
        vals = np.array([float(fn(tuple(int(g[k]) for g in grids))) for k in range(grids[0].size)])
        return cls(vals)

    @classmethod
    def from_vectorized(cls, spec: ChainSpec, fn, cap: int | None = None) -> "TabularFunction":
        """Tabulate fn(list_of_coordinate_arrays) -> values array in one shot."""
        from .chain import coordinate_grid

        grids = coordinate_grid(spec.coord_sizes, cap=cap)
        vals = np.asarray(fn(grids), dtype=float)
        if vals.shape != grids[0].shape:
            raise ValidationError("vectorized tabulation returned a wrong-shaped array")
        return cls(vals)

    def table(self, spec: ChainSpec) -> np.ndarray:
        if self.values.size != spec.joint_size():
            raise ValidationError(
                f"table length {self.values.size} does not match joint size {spec.joint_size()}"
            )
        return self.values.reshape(spec.coord_sizes)

    def at(self, spec: ChainSpec, states) -> float:
        return float(self.table(spec)[tuple(int(s) for s in states)])


def local_oscillation_vector(f: TabularFunction, spec: ChainSpec, cap: int | None = None) -> np.ndarray:
    """Exact local oscillation of f at each coordinate, by exhaustive pair enumeration.

    Entry i is the maximum of |f(x) - f(y)| over pairs differing only in
    coordinate i (discrete metric, so no normalization).
    """
    limit = enumeration_cap(cap)
    if spec.joint_size() > limit:
        raise EnumerationCapError(f"joint space of size {spec.joint_size()} exceeds cap {limit}")
    table = f.table(spec)
    osc = np.empty(spec.n)
    for c in range(spec.n):
        view = np.moveaxis(table, c, -1).reshape(-1, spec.coord_sizes[c])
        osc[c] = float((view.max(axis=1) - view.min(axis=1)).max()) if view.size else 0.0
    return osc


# ---------------------------------------------------------------------------
# conditional expectations and martingale differences


def conditional_expectation(f: TabularFunction, spec: ChainSpec, prefix,
                            cap: int | None = None) -> float:
    """Exact E[f | X_0..X_{i-1} = prefix] by suffix enumeration.

    An empty prefix gives E[f]; a full prefix gives f at that trajectory.
    """
    states = [int(s) for s in prefix]
    table = f.table(spec)
    if len(states) == spec.n:
        if prefix_probability(spec, states) <= 0.0:
            raise ValidationError(f"trajectory {tuple(states)} has zero probability")
        return float(table[tuple(states)])
    law = conditional_law(spec, states, len(states), cap=cap)
    suffix_values = table[tuple(states)].ravel()
    return float(law.probs @ suffix_values)


def conditional_expectation_tables(f: TabularFunction, spec: ChainSpec,
                                   cap: int | None = None) -> list[np.ndarray]:
    """All prefix-conditional expectations at once, by backward recursion.

    Returns [T_0, ..., T_n] where T_m has shape coord_sizes[:m] and
    T_m[p] = E[f | X_0..X_{m-1} = p]; T_0 is the scalar E[f] (shape ()) and
    T_n is f itself. Zero-probability prefixes carry the natural
    kernel-product extension.
    """
    limit = enumeration_cap(cap)
    if spec.joint_size() > limit:
        raise EnumerationCapError(f"joint space of size {spec.joint_size()} exceeds cap {limit}")
    tables = [None] * (spec.n + 1)
    tables[spec.n] = f.table(spec).astype(float)
    for m in range(spec.n - 1, 0, -1):
        tables[m] = np.einsum("...uv,uv->...u", tables[m + 1], spec.kernels[m - 1].rows)
    tables[0] = np.asarray(tables[1] @ spec.initial.probs)
    return tables


def martingale_differences(f: TabularFunction, spec: ChainSpec, traj: Trajectory,
                           cap: int | None = None) -> np.ndarray:
    """Martingale increments of the Doob decomposition of f along a trajectory.

    Entry i is E[f | X_0..X_i] - E[f | X_0..X_{i-1}] evaluated along traj;
    the increments telescope to f(traj) - E[f].
    """
    states = [int(s) for s in traj.states] if isinstance(traj, Trajectory) else [int(s) for s in traj]
    if len(states) != spec.n:
        raise ValidationError(f"trajectory length {len(states)} does not match chain length {spec.n}")
    if prefix_probability(spec, states) <= 0.0:
        raise ValidationError(f"trajectory {tuple(states)} has zero probability")
    tables = conditional_expectation_tables(f, spec, cap=cap)
    out = np.empty(spec.n)
    for i in range(spec.n):
        upper = float(tables[i + 1][tuple(states[: i + 1])])
        lower = float(tables[i][tuple(states[:i])])
        out[i] = upper - lower
    return out


@dataclass(frozen=True)
class MartingaleBrackets:
    """Per-prefix bracketing of one martingale increment.

    lower/upper are flat over prefixes of coordinates < i (row-major);
    prefix_probs marks which prefixes are realizable. width is the sup of
    upper - lower over realizable prefixes, and oscillation_bound is the
    local oscillation of the tabulated conditional expectation at
    coordinate i, which dominates width.
    """

    coordinate: int
    lower: np.ndarray
    upper: np.ndarray
    prefix_probs: np.ndarray
    width: float
    oscillation_bound: float


def martingale_brackets(f: TabularFunction, spec: ChainSpec, i: int,
                        cap: int | None = None) -> MartingaleBrackets:
    """Bracket the i-th martingale increment between prefix functions A_i and B_i.

    For each realizable prefix p of coordinates < i, the increment lies in
    [A_i(p), B_i(p)] where the bracket endpoints scan the admissible values
    of coordinate i. Verifies sup(B_i - A_i) <= oscillation of the tabulated
    conditional expectation at coordinate i (within 1e-12) and raises
    ValidationError otherwise: a violation would falsify the bracketing
    theorem and means a numerical bug.
    """
    if not 0 <= i < spec.n:
        raise ValidationError(f"coordinate {i} out of range for chain of length {spec.n}")
    tables = conditional_expectation_tables(f, spec, cap=cap)
    g = tables[i + 1].reshape(-1, spec.coord_sizes[i])  # rows: prefixes, cols: value at coord i
    center = tables[i].ravel()

    # conditional probability of each coordinate-i value given the prefix
    if i == 0:
        cond = np.broadcast_to(spec.initial.probs, g.shape)
        prefix_probs = np.ones(1)
    else:
        flat_prefix_probs = _prefix_probability_table(spec, i)
        last = _last_coordinate_indices(spec, i)
        cond = spec.kernels[i - 1].rows[last]
        prefix_probs = flat_prefix_probs

    admissible = cond > 0.0
    lower = np.where(admissible, g, np.inf).min(axis=1) - center
    upper = np.where(admissible, g, -np.inf).max(axis=1) - center
    realizable = prefix_probs > 0.0
    width = float((upper - lower)[realizable].max()) if realizable.any() else 0.0

    kf = TabularFunction(_broadcast_prefix_table(tables[i + 1], spec).ravel())
    bound = float(local_oscillation_vector(kf, spec, cap=cap)[i])
    if width > bound + 1e-12:
        raise ValidationError(
            f"bracket width {width} exceeds oscillation bound {bound} at coordinate {i}"
        )
    return MartingaleBrackets(i, lower, upper, prefix_probs, width, bound)


def _prefix_probability_table(spec: ChainSpec, m: int) -> np.ndarray:
    """Flat table of P(X_0..X_{m-1} = p) over all prefixes of length m >= 1."""
    probs = spec.initial.probs
    for c in range(m - 1):
        last = np.arange(probs.size) % spec.coord_sizes[c]
        probs = (probs[:, None] * spec.kernels[c].rows[last, :]).ravel()
    return probs

def _last_coordinate_indices(spec: ChainSpec, m: int) -> np.ndarray:
    """Coordinate m-1 of each flat prefix of length m (row-major, stride 1)."""
    total = math.prod(spec.coord_sizes[:m])
    return np.arange(total) % spec.coord_sizes[m - 1]


def _broadcast_prefix_table(table: np.ndarray, spec: ChainSpec) -> np.ndarray:
    """Extend a prefix-indexed table to the full joint space (constant in later coords)."""
    m = table.ndim
    shape = table.shape + (1,) * (spec.n - m)
    return np.broadcast_to(table.reshape(shape), spec.coord_sizes)


# ---------------------------------------------------------------------------
# mixing time, variance proxies, tail bounds


def mixing_time(spec: ChainSpec, eps: float) -> int | None:
    """Smallest t with worst-case t-step pair TV <= eps at every position, else None.

    None means the chain does not mix to level eps within its horizon
    ("no-mix"); callers that need a finite mixing time must treat it as such.
    """
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"eps = {eps} must lie in (0, 1)")
    for t in range(1, spec.n):
        worst = max(t_step_pair_tv(spec, i, t) for i in range(spec.n - t))
        if worst <= eps:
            return t
    return None


def variance_proxy(g: GammaMatrix, c: LipschitzWeights, convention: str) -> float:
    """Subgaussian variance proxy under the named convention (exact/opnorm/paper)."""
    if convention not in CONVENTIONS:
        raise ValidationError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    if g.n != len(c):
        raise ValidationError(f"gamma is {g.n}x{g.n} but weights have length {len(c)}")
    if convention == "exact":
        prop = g.entries @ c.c
        return 0.25 * float(prop @ prop)
    paper = operator_norm(g) ** 2 * float(c.c @ c.c)
    return paper if convention == "paper" else 0.25 * paper


def tail_bound(sigma2: float, t: float) -> float:
    """One-sided subgaussian tail bound exp(-t^2 / (2 sigma2))."""
    if sigma2 <= 0:
        raise ValidationError(f"sigma2 = {sigma2} must be positive")
    return math.exp(-(t * t) / (2.0 * sigma2))


def default_t_grid(sigma2: float) -> np.ndarray:
    """Deviation grid {0.5, 1, ..., 5} * sqrt(sigma2)."""
    return np.array(T_GRID_MULTIPLIERS) * math.sqrt(sigma2)


# ---------------------------------------------------------------------------
# the assembled certificate


@dataclass(frozen=True)
class ConcentrationReport:
    """Everything certify computes: Gamma, all variance conventions, tail curve."""

    method: str
    convention: str
    gamma: GammaMatrix
    weights: np.ndarray
    effective_weights: np.ndarray
    sigma2_exact: float
    sigma2_opnorm: float
    sigma2_paper: float
    sigma2_selected: float
    tail_curve: tuple[tuple[float, float], ...]
    details: dict = field(default_factory=dict)
    caveats: tuple[str, ...] = (CONVENTION_CAVEAT,)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "convention": self.convention,
            "gamma": self.gamma.to_dict(),
            "weights": self.weights.tolist(),
            "effective_weights": self.effective_weights.tolist(),
            "sigma2_exact": self.sigma2_exact,
            "sigma2_opnorm": self.sigma2_opnorm,
            "sigma2_paper": self.sigma2_paper,
            "sigma2_selected": self.sigma2_selected,
            "tail_curve": [[t, b] for t, b in self.tail_curve],
            "details": self.details,
            "caveats": list(self.caveats),
        }

    def tail_curve_csv(self) -> str:
        lines = ["t,bound"]
        lines += [f"{t!r},{b!r}" for t, b in self.tail_curve]
        return "\n".join(lines) + "\n"


def certify(spec: ChainSpec, weights: LipschitzWeights, method: str,
            eps: float | None = None, convention: str = "opnorm",
            cap: int | None = None, t_grid=None) -> ConcentrationReport:
    """Build a concentration certificate for weighted-Hamming Lipschitz functions.

    method selects the Gamma construction: "contractive" uses running
    products of per-step Dobrushin coefficients, "ergodic" partitions the
    chain into mixing-time blocks at level eps (block weights are sums of
    the per-coordinate weights), "brute_force" enumerates conditional laws.
    The tail curve is evaluated at the selected convention's sigma2.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    if convention not in CONVENTIONS:
        raise ValidationError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    if len(weights) != spec.n:
        raise ValidationError(f"weights length {len(weights)} does not match chain length {spec.n}")

    details: dict = {}
    if method == "contractive":
        thetas = [dobrushin_coefficient(k) for k in spec.kernels]
        gamma = gamma_contractive(thetas)
        effective = weights
        details["thetas"] = thetas
    elif method == "ergodic":
        if eps is None:
            raise ValidationError("ergodic method requires eps")
        if spec.n == 1:
            tau = 1  # single coordinate: one block, nothing to mix across
        else:
            tau = mixing_time(spec, eps)
            if tau is None:
                raise NoMixError(f"chain does not mix to eps = {eps} within horizon {spec.n}")
        n_blocks = -(-spec.n // tau)
        block_sums = [float(weights.c[k * tau: min((k + 1) * tau, spec.n)].sum())
                      for k in range(n_blocks)]
        gamma = gamma_ergodic(n_blocks, eps)
        effective = LipschitzWeights(np.asarray(block_sums))
        details.update({"eps": eps, "tau": tau, "n_blocks": n_blocks, "block_weights": block_sums})
    else:
        gamma = wasserstein_matrix_tv(spec, cap=cap)
        effective = weights

    prop = gamma.entries @ effective.c
    sigma2_exact = 0.25 * float(prop @ prop)
    sigma2_paper = operator_norm(gamma) ** 2 * float(effective.c @ effective.c)
    sigma2_opnorm = 0.25 * sigma2_paper
    selected = {"exact": sigma2_exact, "opnorm": sigma2_opnorm, "paper": sigma2_paper}[convention]

    if t_grid is None:
        t_grid = default_t_grid(selected) if selected > 0 else np.array([])
    curve = tuple((float(t), tail_bound(selected, float(t))) for t in np.asarray(t_grid))

    return ConcentrationReport(
        method=method,
        convention=convention,
        gamma=gamma,
        weights=weights.c,
        effective_weights=effective.c,
        sigma2_exact=sigma2_exact,
        sigma2_opnorm=sigma2_opnorm,
        sigma2_paper=sigma2_paper,
        sigma2_selected=selected,
        tail_curve=curve,
        details=details,
    )
