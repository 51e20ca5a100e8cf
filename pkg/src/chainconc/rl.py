"""Tabular MDPs, policy classes, and expected-supremum bounds on value functions.

A fixed policy turns an MDP into a finite-horizon Markov chain over states,
so every chain certificate applies to the trajectory sum of stage rewards
(which is weighted-Hamming Lipschitz with the stage reward caps as weights).
The bounds on E sup over a policy class are the subgaussian maximal
inequality, its covering-number refinement for Lipschitz processes, and the
entropy-integral (chaining) bound.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, Distribution, Kernel, validate_chain
from .errors import DEFAULT_POLICY_CAP, EnumerationCapError, ValidationError


@dataclass(frozen=True)
class MdpSpec:
    """Finite MDP: S states, A actions, horizon H, transition tensor, stage rewards.

    rewards[s, a] must lie in [0, min(stage_caps)]; stage_caps (default all 1)
    are the per-stage reward bounds that become Lipschitz weights.
    """

    n_states: int
    n_actions: int
    horizon: int
    transitions: np.ndarray  # (S, A, S)
    rewards: np.ndarray  # (S, A)
    initial: Distribution
    stage_caps: np.ndarray  # (H,)

    @classmethod
    def build(cls, n_states: int, n_actions: int, horizon: int, transitions, rewards,
              initial, stage_caps=None) -> "MdpSpec":
        if n_states < 1 or n_actions < 1 or horizon < 1:
            raise ValidationError("S, A and H must all be positive")
        trans = np.asarray(transitions, dtype=float)
        if trans.shape != (n_states, n_actions, n_states):
            raise ValidationError(
                f"transition tensor has shape {trans.shape}, expected {(n_states, n_actions, n_states)}"
            )
        for s in range(n_states):
            for a in range(n_actions):
                Distribution.from_array(trans[s, a], where=f"transitions[{s}][{a}]")
        rew = np.asarray(rewards, dtype=float)
        if rew.shape != (n_states, n_actions):
            raise ValidationError(f"rewards have shape {rew.shape}, expected {(n_states, n_actions)}")
        caps = np.ones(horizon) if stage_caps is None else np.asarray(stage_caps, dtype=float)
        if caps.shape != (horizon,):
            raise ValidationError(f"stage_caps must have length {horizon}")
        if np.any(caps < 0):
            raise ValidationError("stage_caps must be nonnegative")
        if np.any(rew < 0) or np.any(rew > caps.min()):
            raise ValidationError(
                f"rewards must lie in [0, {caps.min()}] to respect every stage cap"
            )
        init = Distribution.from_array(initial, where="mdp initial distribution")
        if len(init) != n_states:
            raise ValidationError(f"initial distribution has length {len(init)}, expected {n_states}")
        return cls(n_states, n_actions, horizon, trans, rew, init, caps)


@dataclass(frozen=True)
class Policy:
    """Deterministic policy: stationary action table, or one table per stage."""

    actions: tuple[int, ...]
    stage_actions: tuple[tuple[int, ...], ...] | None = None

    def action(self, stage: int, state: int) -> int:
        if self.stage_actions is not None:
            return self.stage_actions[stage][state]
        return self.actions[state]

    def action_table(self, stage: int) -> np.ndarray:
        if self.stage_actions is not None:
            return np.asarray(self.stage_actions[stage], dtype=int)
        return np.asarray(self.actions, dtype=int)

    def key(self) -> tuple:
        return (self.actions, self.stage_actions)


class HammingMetric:
    """d(pi, pi') = scale * #{s : pi(s) != pi'(s)} on stationary action tables."""

    name = "hamming"

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValidationError("metric scale must be positive")
        self.scale = scale

    def __call__(self, a: Policy, b: Policy) -> float:
        ta, tb = np.asarray(a.actions), np.asarray(b.actions)
        if ta.shape != tb.shape:
            raise ValidationError("policies act on different state spaces")
        return self.scale * float((ta != tb).sum())


class MixingTimeMetric:
    """d(pi, pi') = scale * |tau_pi(eps) - tau_pi'(eps)| on induced chains.

    Policies whose induced chain never reaches level eps within the horizon
    get tau = H, one past the largest attainable mixing time, so the metric
    stays finite.
    """

    name = "mixing"

    def __init__(self, mdp: MdpSpec, eps: float, scale: float = 1.0):
        from .concentration import mixing_time

        if scale <= 0:
            raise ValidationError("metric scale must be positive")
        self.mdp = mdp
        self.eps = eps
        self.scale = scale
        self._mixing_time = mixing_time
        self._cache: dict[tuple, int] = {}

    def tau(self, pi: Policy) -> int:
        k = pi.key()
        if k not in self._cache:
            t = self._mixing_time(induced_chain(self.mdp, pi), self.eps)
            self._cache[k] = self.mdp.horizon if t is None else t
        return self._cache[k]

    def __call__(self, a: Policy, b: Policy) -> float:
        return self.scale * abs(self.tau(a) - self.tau(b))


@dataclass(frozen=True)
class PolicyClass:
    """Finite, duplicate-free collection of policies with a metric on it."""

    policies: tuple[Policy, ...]
    metric: object  # callable (Policy, Policy) -> float with a .name

    def __post_init__(self):
        if not self.policies:
            raise ValidationError("policy class must be nonempty")
        keys = [p.key() for p in self.policies]
        if len(set(keys)) != len(keys):
            raise ValidationError("policy class contains duplicate policies")

    def __len__(self) -> int:
        return len(self.policies)

    def distance_matrix(self) -> np.ndarray:
        m = len(self.policies)
        d = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                d[i, j] = d[j, i] = self.metric(self.policies[i], self.policies[j])
        return d


# ---------------------------------------------------------------------------
# policy-induced chains and exact values


def induced_chain(mdp: MdpSpec, pi: Policy) -> ChainSpec:
    """The state chain under a fixed policy: kernel rows P(. | s, pi(s)) per stage."""
    kernels = []
    for stage in range(mdp.horizon - 1):
        acts = pi.action_table(stage)
        if acts.shape != (mdp.n_states,) or np.any(acts < 0) or np.any(acts >= mdp.n_actions):
            raise ValidationError(f"policy actions out of range at stage {stage}")
        kernels.append(Kernel(mdp.transitions[np.arange(mdp.n_states), acts, :]))
    return validate_chain(
        ChainSpec((mdp.n_states,) * mdp.horizon, mdp.initial, tuple(kernels))
    )


def value_function(mdp: MdpSpec, pi: Policy, traj) -> float:
    """Sum of stage rewards along a trajectory under the policy.

    Weighted-Hamming Lipschitz with the stage caps as weights: changing one
    state changes at most that stage's reward.
    """
    states = [int(s) for s in (traj.states if hasattr(traj, "states") else traj)]
    if len(states) != mdp.horizon:
        raise ValidationError(f"trajectory length {len(states)} does not match horizon {mdp.horizon}")
    return float(sum(mdp.rewards[s, pi.action(stage, s)] for stage, s in enumerate(states)))


def exact_value(mdp: MdpSpec, pi: Policy) -> float:
    """E[V_pi] by backward induction over stages."""
    v = np.zeros(mdp.n_states)
    for stage in range(mdp.horizon - 1, -1, -1):
        acts = pi.action_table(stage)
        idx = np.arange(mdp.n_states)
        stage_reward = mdp.rewards[idx, acts]
        if stage == mdp.horizon - 1:
            v = stage_reward.astype(float)
        else:
            v = stage_reward + mdp.transitions[idx, acts, :] @ v
    return float(mdp.initial.probs @ v)


def enumerate_policies(n_states: int, n_actions: int, metric=None,
                       cap: int = DEFAULT_POLICY_CAP) -> PolicyClass:
    """All A^S stationary deterministic policies in lexicographic order."""
    count = n_actions**n_states
    if count > cap:
        raise EnumerationCapError(f"{count} policies exceed the policy cap {cap}")
    policies = tuple(
        Policy(actions) for actions in itertools.product(range(n_actions), repeat=n_states)
    )
    return PolicyClass(policies, metric or HammingMetric())


# ---------------------------------------------------------------------------
# expected-supremum bounds


def maximal_bound(sigma2: float, class_size: int) -> float:
    """Subgaussian maximal inequality: sqrt(2 sigma2 log class_size)."""
    if class_size < 1:
        raise ValidationError("class_size must be >= 1")
    if sigma2 < 0:
        raise ValidationError("sigma2 must be nonnegative")
    return math.sqrt(2.0 * sigma2 * math.log(class_size))


def greedy_net_radii(pc: PolicyClass, scale: float = 1.0) -> list[float]:
    """Insertion radii of the farthest-point traversal from the first policy.

    radii[k] is the distance at which the (k+1)-th center was inserted
    (radii[0] = inf for the seed); they are nonincreasing after the seed.
    The traversal stops once every remaining policy is at distance zero, so
    the greedy covering number at radius eps is #{k : radii[k] > eps}.
    """
    dist = scale * pc.distance_matrix()
    m = len(pc)
    centers = [0]
    radii = [math.inf]
    nearest = dist[0].copy()
    while True:
        far = int(np.argmax(nearest))
        r = float(nearest[far])
        if r <= 0.0:
            break
        centers.append(far)
        radii.append(r)
        nearest = np.minimum(nearest, dist[far])
        if len(centers) == m:
            break
    return radii


def covering_number(pc: PolicyClass, eps: float, scale: float = 1.0) -> int:
    """Size of the deterministic greedy eps-net: an upper bound on the minimal cover."""
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    radii = greedy_net_radii(pc, scale=scale)
    return sum(1 for r in radii if r > eps)


def lipschitz_process_bound(sigma2: float, expected_c: float, pc: PolicyClass,
                            eps_grid) -> float:
    """Covering refinement: min over eps of eps E[C] + sqrt(2 sigma2 log N(eps))."""
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise ValidationError("eps grid must be nonempty")
    best = math.inf
    for eps in grid:
        n_eps = covering_number(pc, eps)
        best = min(best, eps * expected_c + math.sqrt(2.0 * sigma2 * math.log(n_eps)))
    return best


def dudley_bound(pc: PolicyClass, scale: float = 1.0) -> float:
    """Entropy-integral bound 12 * integral of sqrt(log N(eps)) d eps, exactly.

    The covering function of a finite class is a staircase whose breakpoints
    are the greedy insertion radii, so the integral is a finite sum of
    segment widths times sqrt(log k).
    """
    if scale <= 0:
        raise ValidationError("scale must be positive")
    radii = greedy_net_radii(pc, scale=scale)
    total = 0.0
    for k in range(1, len(radii)):
        upper = radii[k]
        lower = radii[k + 1] if k + 1 < len(radii) else 0.0
        total += (upper - lower) * math.sqrt(math.log(k + 1))
    return 12.0 * total


def finite_state_bound(horizon: int, tau_mix: float, n_states: int, n_actions: int,
                       variant: str) -> float:
    """Closed-form finite state-action bounds on E sup of value functions.

    "max_mix" is sqrt(H tau log(SA)); "union" is sqrt(H S A tau log(SA)),
    realizing the suppressed log factor as the same log(SA).
    """
    if variant not in ("max_mix", "union"):
        raise ValidationError(f"unknown variant {variant!r}; expected max_mix or union")
    if horizon < 1 or tau_mix <= 0 or n_states < 1 or n_actions < 1:
        raise ValidationError("horizon, tau_mix, n_states and n_actions must be positive")
    log_sa = math.log(n_states * n_actions)
    if variant == "max_mix":
        return math.sqrt(horizon * tau_mix * log_sa)
    return math.sqrt(horizon * n_states * n_actions * tau_mix * log_sa)


# ---------------------------------------------------------------------------
# JSON interface


def mdp_from_dict(doc: dict) -> MdpSpec:
    try:
        return MdpSpec.build(
            int(doc["S"]), int(doc["A"]), int(doc["H"]),
            doc["transitions"], doc["rewards"], doc["initial"],
            stage_caps=doc.get("stage_caps"),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed MDP document: {exc}") from exc


def load_mdp(path: str) -> MdpSpec:
    with open(path, encoding="utf-8") as fh:
        return mdp_from_dict(json.load(fh))


def policy_to_dict(pi: Policy) -> dict:
    doc: dict = {"actions": list(pi.actions)}
    if pi.stage_actions is not None:
        doc["stage_actions"] = [list(row) for row in pi.stage_actions]
    return doc
