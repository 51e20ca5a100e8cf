"""Finite-state, time-inhomogeneous Markov chains.

A chain over coordinates 0..n-1 is given by an initial distribution on the
first coordinate and one row-stochastic kernel per step. All per-coordinate
metrics are the discrete 0/1 metric; Lipschitz weights live in the
concentration module. Everything here is a pure function of immutable
values: validation normalizes once, after which operations trust their
inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PROB_TOL, EnumerationCapError, ValidationError, enumeration_cap
from .rng import replicate_uniforms, uniform_matrix


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite set of states."""

    probs: np.ndarray

    @classmethod
    def from_array(cls, arr, where: str = "distribution") -> "Distribution":
        """Validate and normalize a probability vector.

        Entries must be nonnegative and sum to 1 within ``PROB_TOL``; sums
        inside the tolerance are renormalized, anything worse is rejected.
        """
        probs = np.asarray(arr, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValidationError(f"{where}: expected a nonempty 1-d probability vector")
        if np.any(probs < 0):
            idx = int(np.argmin(probs))
            raise ValidationError(f"{where}: negative entry {probs[idx]} at index {idx}")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"{where}: entries sum to {total}, not 1 within {PROB_TOL}")
        return cls(probs / total)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic matrix: rows[s] is the distribution of the next state given s."""

    rows: np.ndarray

    @classmethod
    def from_array(cls, arr, where: str = "kernel") -> "Kernel":
        rows = np.asarray(arr, dtype=float)
        if rows.ndim != 2 or rows.size == 0:
            raise ValidationError(f"{where}: expected a nonempty 2-d matrix")
        if np.any(rows < 0):
            i, j = np.unravel_index(int(np.argmin(rows)), rows.shape)
            raise ValidationError(f"{where}: negative entry {rows[i, j]} at row {i}, column {j}")
        sums = rows.sum(axis=1)
        bad = np.abs(sums - 1.0) > PROB_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(f"{where}: row {i} sums to {sums[i]}, not 1 within {PROB_TOL}")
        return cls(rows / sums[:, None])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


@dataclass(frozen=True)
class ChainSpec:
    """Joint law of (X_0, ..., X_{n-1}): initial distribution plus step kernels.

    kernels[i] maps coordinate i to coordinate i+1 and has shape
    (coord_sizes[i], coord_sizes[i+1]). A homogeneous chain is the special
    case of one kernel repeated.
    """

    coord_sizes: tuple[int, ...]
    initial: Distribution
    kernels: tuple[Kernel, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return len(self.coord_sizes)

    def joint_size(self) -> int:
        return math.prod(self.coord_sizes)


@dataclass(frozen=True)
class Trajectory:
    """One realization (x_0, ..., x_{n-1}), one coordinate index per position."""

    states: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.states)


def validate_chain(spec: ChainSpec) -> ChainSpec:
    """Check every chain invariant, returning a normalized copy.

    Probability rows within PROB_TOL of stochastic are renormalized; the
    first violated invariant is reported with its coordinate or kernel index.
    """
    if len(spec.coord_sizes) < 1:
        raise ValidationError("chain must have at least one coordinate")
    for i, size in enumerate(spec.coord_sizes):
        if int(size) < 1:
            raise ValidationError(f"coord_sizes[{i}] = {size} must be a positive integer")
    sizes = tuple(int(s) for s in spec.coord_sizes)
    initial = Distribution.from_array(spec.initial.probs, where="initial distribution")
    if len(initial) != sizes[0]:
        raise ValidationError(
            f"initial distribution has length {len(initial)}, expected coord_sizes[0] = {sizes[0]}"
        )
    if len(spec.kernels) != len(sizes) - 1:
        raise ValidationError(
            f"expected {len(sizes) - 1} kernels for {len(sizes)} coordinates, got {len(spec.kernels)}"
        )
    kernels = []
    for i, k in enumerate(spec.kernels):
        validated = Kernel.from_array(k.rows, where=f"kernel {i}")
        if validated.shape != (sizes[i], sizes[i + 1]):
            raise ValidationError(
                f"kernel {i} has shape {validated.shape}, expected ({sizes[i]}, {sizes[i + 1]})"
            )
        kernels.append(validated)
    return ChainSpec(sizes, initial, tuple(kernels))


def homogeneous_chain(kernel, n: int, initial=None) -> ChainSpec:
    """Chain with one kernel repeated n-1 times; uniform initial by default."""
    k = Kernel.from_array(kernel)
    if k.shape[0] != k.shape[1]:
        raise ValidationError(f"homogeneous kernel must be square, got {k.shape}")
    if n < 1:
        raise ValidationError(f"n = {n} must be >= 1")
    size = k.shape[0]
    if initial is None:
        init = Distribution(np.full(size, 1.0 / size))
    else:
        init = Distribution.from_array(initial, where="initial distribution")
    return validate_chain(ChainSpec((size,) * n, init, (k,) * (n - 1)))


def tv_distance(p: Distribution, q: Distribution) -> float:
    """Total variation distance: half the L1 distance between probability vectors."""
    if len(p) != len(q):
        raise ValidationError(f"tv_distance: length mismatch {len(p)} vs {len(q)}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def dobrushin_coefficient(k: Kernel) -> float:
    """Max TV distance between any two rows of the kernel (Dobrushin/Doeblin coefficient)."""
    rows = k.rows
    # pairwise half-L1 via broadcasting; source counts are small by construction
    diffs = np.abs(rows[:, None, :] - rows[None, :, :]).sum(axis=2)
    return 0.5 * float(diffs.max())


# ---------------------------------------------------------------------------
# mixed-radix indexing over the joint space


def strides_for(sizes: tuple[int, ...]) -> tuple[int, ...]:
    """Row-major strides: flat index = sum_i states[i] * strides[i]."""
    out = [1] * len(sizes)
    for i in range(len(sizes) - 2, -1, -1):
        out[i] = out[i + 1] * sizes[i + 1]
    return tuple(out)


def flatten_state(states, sizes: tuple[int, ...]) -> int:
    strides = strides_for(sizes)
    return int(sum(int(s) * st for s, st in zip(states, strides)))


def coordinate_grid(sizes: tuple[int, ...], cap: int | None = None) -> list[np.ndarray]:
    """Per-coordinate index arrays over the flattened joint space.

    Entry c is an int array of length prod(sizes) giving coordinate c of each
    flat index. Raises EnumerationCapError when the joint space exceeds the cap.
    """
    total = math.prod(sizes)
    limit = enumeration_cap(cap)
    if total > limit:
        raise EnumerationCapError(f"joint space of size {total} exceeds enumeration cap {limit}")
    idx = np.arange(total)
    strides = strides_for(sizes)
    return [(idx // strides[c]) % sizes[c] for c in range(len(sizes))]


def prefix_probability(spec: ChainSpec, prefix) -> float:
    """P(X_0 = prefix[0], ..., X_{i-1} = prefix[i-1]) under the chain."""
    states = [int(s) for s in prefix]
    if len(states) > spec.n:
        raise ValidationError(f"prefix of length {len(states)} exceeds chain length {spec.n}")
    for c, s in enumerate(states):
        if not 0 <= s < spec.coord_sizes[c]:
            raise ValidationError(f"prefix[{c}] = {s} out of range for coordinate size {spec.coord_sizes[c]}")
    if not states:
        return 1.0
    p = float(spec.initial.probs[states[0]])
    for c in range(len(states) - 1):
        p *= float(spec.kernels[c].rows[states[c], states[c + 1]])
    return p


def marginal(spec: ChainSpec, j: int) -> Distribution:
    """Exact marginal law of X_j, by forward kernel products."""
    if not 0 <= j < spec.n:
        raise ValidationError(f"coordinate {j} out of range for chain of length {spec.n}")
    law = spec.initial.probs
    for c in range(j):
        law = law @ spec.kernels[c].rows
    return Distribution(law)


def _expand_block(spec: ChainSpec, law_at_j: np.ndarray, j: int, cap: int | None) -> Distribution:
    """Joint law of (X_j, ..., X_{n-1}) from the law of X_j, flattened row-major."""
    total = math.prod(spec.coord_sizes[j:])
    limit = enumeration_cap(cap)
    if total > limit:
        raise EnumerationCapError(f"block of size {total} exceeds enumeration cap {limit}")
    joint = law_at_j
    for c in range(j, spec.n - 1):
        last = np.arange(joint.size) % spec.coord_sizes[c]
        joint = (joint[:, None] * spec.kernels[c].rows[last, :]).ravel()
    return Distribution(joint)


def conditional_law(spec: ChainSpec, prefix, j: int, cap: int | None = None) -> Distribution:
    """Exact law of the block (X_j, ..., X_{n-1}) given X_0..X_{i-1} = prefix.

    The prefix fixes the first len(prefix) coordinates and must have positive
    probability; j must satisfy len(prefix) <= j < n. The block law is
    returned flattened row-major over coord_sizes[j:]. By the Markov property
    it depends on the prefix only through its last coordinate.
    """
    states = [int(s) for s in prefix]
    i = len(states)
    if not i <= j < spec.n:
        raise ValidationError(f"block start {j} must lie in [{i}, {spec.n})")
    if prefix_probability(spec, states) <= 0.0:
        raise ValidationError(f"prefix {tuple(states)} has zero probability")
    if i == 0:
        law = spec.initial.probs
        start = 0
    else:
        law = spec.kernels[i - 1].rows[states[-1]]
        start = i
    for c in range(start, j):
        law = law @ spec.kernels[c].rows
    return _expand_block(spec, law, j, cap)


def block_law_given_coordinate(spec: ChainSpec, i: int, value: int, j: int,
                               cap: int | None = None) -> Distribution:
    """Law of the block (X_j, ..., X_{n-1}) given X_i = value, for j > i.

    Equals conditional_law for any positive-probability prefix ending in
    `value` at coordinate i (Markov property); requires only that `value`
    have positive marginal probability.
    """
    if not 0 <= i < j < spec.n:
        raise ValidationError(f"need 0 <= i < j < n, got i={i}, j={j}, n={spec.n}")
    if float(marginal(spec, i).probs[value]) <= 0.0:
        raise ValidationError(f"coordinate {i} value {value} has zero marginal probability")
    law = np.zeros(spec.coord_sizes[i])
    law[value] = 1.0
    for c in range(i, j):
        law = law @ spec.kernels[c].rows
    return _expand_block(spec, law, j, cap)


def t_step_pair_tv(spec: ChainSpec, i: int, t: int) -> float:
    """Worst-case TV distance between t-step laws started from two states at position i."""
    if not 0 <= i < spec.n:
        raise ValidationError(f"position {i} out of range for chain of length {spec.n}")
    if t < 0 or i + t >= spec.n:
        raise ValidationError(f"step count {t} from position {i} leaves the horizon (n = {spec.n})")
    size = spec.coord_sizes[i]
    prod = np.eye(size)
    for c in range(i, i + t):
        prod = prod @ spec.kernels[c].rows
    return dobrushin_coefficient(Kernel(prod))


# ---------------------------------------------------------------------------
# deterministic sampling


def _inverse_cdf_step(cdf_rows: np.ndarray, states: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF: next state = #{k : cdf[state, k] <= u}."""
    picked = cdf_rows[states]
    nxt = (picked <= u[:, None]).sum(axis=1)
    return np.minimum(nxt, cdf_rows.shape[1] - 1)


def trajectories_from_uniforms(spec: ChainSpec, u: np.ndarray) -> np.ndarray:
    """Drive one trajectory per row of u by inverse-CDF, one uniform per coordinate.

    Sharing the same u across different chains couples them by common random
    numbers.
    """
    if u.ndim != 2 or u.shape[1] != spec.n:
        raise ValidationError(f"uniform matrix must have {spec.n} columns, got shape {u.shape}")
    out = np.empty((u.shape[0], spec.n), dtype=np.int64)
    init_cdf = np.cumsum(spec.initial.probs)
    out[:, 0] = np.minimum((init_cdf <= u[:, 0][:, None]).sum(axis=1), len(init_cdf) - 1)
    for c in range(spec.n - 1):
        cdf = np.cumsum(spec.kernels[c].rows, axis=1)
        out[:, c + 1] = _inverse_cdf_step(cdf, out[:, c], u[:, c + 1])
    return out


def sample_trajectories(spec: ChainSpec, seed: int, replicates: int, first: int = 0) -> np.ndarray:
    """Sample `replicates` trajectories, one row each, deterministically.

    Row r is driven by the counter-based variates for (seed, first + r), one
    uniform per coordinate, so results are identical however the replicate
    range is chunked across calls.
    """
    return trajectories_from_uniforms(spec, uniform_matrix(seed, replicates, spec.n, first=first))


def sample_trajectory(spec: ChainSpec, seed: int, replicate: int = 0) -> Trajectory:
    """One trajectory for (seed, replicate); identical inputs give identical output."""
    u = replicate_uniforms(seed, replicate, spec.n)
    states = []
    cdf = np.cumsum(spec.initial.probs)
    s = int(min((cdf <= u[0]).sum(), len(cdf) - 1))
    states.append(s)
    for c in range(spec.n - 1):
        cdf = np.cumsum(spec.kernels[c].rows[s])
        s = int(min((cdf <= u[c + 1]).sum(), len(cdf) - 1))
        states.append(s)
    return Trajectory(tuple(states))


# ---------------------------------------------------------------------------
# JSON interface


def chain_from_dict(doc: dict) -> ChainSpec:
    """Build a validated ChainSpec from its JSON document form.

    Either {"coord_sizes": [...], "initial": [...], "kernels": [[[...]], ...]}
    or the homogeneous shorthand {"kernel": [[...]], "n": N, "initial": [...]}
    (initial optional, uniform by default).
    """
    if "kernel" in doc:
        if "n" not in doc:
            raise ValidationError('homogeneous chain shorthand requires "n"')
        return homogeneous_chain(doc["kernel"], int(doc["n"]), initial=doc.get("initial"))
    try:
        sizes = tuple(int(s) for s in doc["coord_sizes"])
        initial = Distribution(np.asarray(doc["initial"], dtype=float))
        kernels = tuple(Kernel(np.asarray(k, dtype=float)) for k in doc["kernels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed chain document: {exc}") from exc
    return validate_chain(ChainSpec(sizes, initial, kernels))


def load_chain(path: str) -> ChainSpec:
    with open(path, encoding="utf-8") as fh:
        return chain_from_dict(json.load(fh))


def chain_to_dict(spec: ChainSpec) -> dict:
    return {
        "coord_sizes": list(spec.coord_sizes),
        "initial": spec.initial.probs.tolist(),
        "kernels": [k.rows.tolist() for k in spec.kernels],
    }
