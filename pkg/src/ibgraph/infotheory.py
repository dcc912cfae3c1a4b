"""Exact information theory on small finite alphabets.

Exhaustive verification of the inequalities behind the training objective:
the nuisance-invariance bound, the variational upper bounds on the
prediction and compression terms, and their beta-weighted combination. All
quantities are in nats and computed by direct summation over joint tables,
so every check is exact up to float rounding.

The Markov chains under test have the form (Y, N) -> G -> Z where Y is the
label, N a task-irrelevant nuisance independent of Y, G the observed object
and Z the learned summary of G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError, ValidationError

_ATOL = 1e-12  # normalization tolerance for distributions
SLACK = 1e-10  # slack applied to every inequality check

MAX_ALPHABET = 6  # keeps joint tables tiny and checks sub-second


@dataclass(frozen=True)
class DiscreteJoint:
    """Exact joint probability table over named finite variables."""

    names: tuple
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        names = tuple(self.names)
        if t.ndim != len(names):
            raise ValidationError(
                f"table rank {t.ndim} does not match {len(names)} variable names"
            )
        if any(s > MAX_ALPHABET for s in t.shape):
            raise ValidationError(f"alphabet sizes {t.shape} exceed cap {MAX_ALPHABET}")
        if t.min() < -_ATOL:
            raise ValidationError(f"negative probability {t.min()}")
        if abs(t.sum() - 1.0) > _ATOL:
            raise ValidationError(f"table sums to {t.sum()}, not 1")
        t = np.clip(t, 0.0, None)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "names", names)

    def _axes(self, variables):
        variables = (variables,) if isinstance(variables, str) else tuple(variables)
        unknown = [v for v in variables if v not in self.names]
        if unknown:
            raise ContractError(f"unknown variable names {unknown}; have {self.names}")
        return tuple(self.names.index(v) for v in variables)

    def marginal(self, variables):
        """Marginal table with axes ordered as requested."""
        keep = self._axes(variables)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        m = self.table.sum(axis=drop) if drop else self.table
        return np.ascontiguousarray(np.transpose(m, np.argsort(np.argsort(keep))))


@dataclass(frozen=True)
class Channel:
    """Conditional table p(out | in); rows over the last axis sum to one."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim < 2:
            raise ValidationError("channel needs at least one input and one output axis")
        rows = t.reshape(-1, t.shape[-1])
        if rows.min() < -_ATOL:
            raise ValidationError(f"negative channel entry {rows.min()}")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > _ATOL):
            raise ValidationError("channel rows must sum to 1")
        t = np.clip(t, 0.0, None)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)


def _plogp(p):
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def entropy(joint, variables):
    """Shannon entropy of a marginal, in nats, with 0 log 0 := 0."""
    p = joint.marginal(variables)
    return float(-_plogp(p).sum())


def mutual_information(joint, vars_a, vars_b):
    """Exact I(A; B) >= 0 in nats; tiny negative rounding is clipped to 0."""
    a = (vars_a,) if isinstance(vars_a, str) else tuple(vars_a)
    b = (vars_b,) if isinstance(vars_b, str) else tuple(vars_b)
    if set(a) & set(b):
        raise ContractError(f"variable sets overlap: {a} and {b}")
    mi = entropy(joint, a) + entropy(joint, b) - entropy(joint, a + b)
    if mi < 0:
        if mi < -1e-9:
            raise ContractError(f"mutual information {mi} is negative beyond rounding")
        mi = 0.0
    return mi


def build_markov_chain(p_y, p_n, channel_g, channel_z):
    """Joint p(Y, N, G, Z) = p(Y) p(N) p(G|Y,N) p(Z|G).

    Y and the nuisance N are independent by construction; Z depends on
    (Y, N) only through G.
    """
    p_y = np.asarray(p_y, dtype=np.float64)
    p_n = np.asarray(p_n, dtype=np.float64)
    for name, p in (("p_y", p_y), ("p_n", p_n)):
        if p.ndim != 1 or abs(p.sum() - 1.0) > _ATOL or p.min() < -_ATOL:
            raise ValidationError(f"{name} is not a probability vector")
    cg = channel_g.table if isinstance(channel_g, Channel) else Channel(channel_g).table
    cz = channel_z.table if isinstance(channel_z, Channel) else Channel(channel_z).table
    if cg.shape[:2] != (p_y.size, p_n.size):
        raise ValidationError(
            f"channel_g input axes {cg.shape[:2]} do not match ({p_y.size}, {p_n.size})"
        )
    if cz.shape[0] != cg.shape[2]:
        raise ValidationError(
            f"channel_z input axis {cz.shape[0]} does not match |G| = {cg.shape[2]}"
        )
    table = np.einsum("y,n,yng,gz->yngz", p_y, p_n, cg, cz)
    return DiscreteJoint(names=("Y", "N", "G", "Z"), table=table)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    tight: bool

    @property
    def violation(self):
        return max(0.0, self.lhs - self.rhs) if math.isfinite(self.rhs) else 0.0


def _check(lhs, rhs, slack=SLACK):
    holds = lhs <= rhs + slack
    tight = math.isfinite(rhs) and abs(lhs - rhs) <= slack
    return BoundCheck(lhs=lhs, rhs=rhs, holds=holds, tight=tight)


def check_lemma1(joint):
    """Nuisance invariance: I(Z; N) <= I(Z; G) - I(Z; Y)."""
    lhs = mutual_information(joint, "Z", "N")
    rhs = mutual_information(joint, "Z", "G") - mutual_information(joint, "Z", "Y")
    return _check(lhs, rhs)


def _prediction_bound_value(joint, q):
    """-sum p(y, z) log q(y | z) - H(Y); +inf when q has a zero on support."""
    qt = q.table if isinstance(q, Channel) else Channel(q).table
    p_yz = joint.marginal(("Y", "Z"))
    if qt.shape != (p_yz.shape[1], p_yz.shape[0]):
        raise ValidationError(
            f"classifier table shape {qt.shape} does not match (|Z|, |Y|) = "
            f"{(p_yz.shape[1], p_yz.shape[0])}"
        )
    support = p_yz > 0
    qv = qt.T  # align to (Y, Z)
    if np.any(qv[support] == 0.0):
        return math.inf
    cross = -float((p_yz[support] * np.log(qv[support])).sum())
    return cross - entropy(joint, "Y")


def check_prediction_bound(joint, q):
    """-I(Y; Z) <= -E[log q(Y|Z)] - H(Y), with equality at the true posterior."""
    lhs = -mutual_information(joint, "Y", "Z")
    return _check(lhs, _prediction_bound_value(joint, q))


def _compression_bound_value(joint, r):
    """sum p(g, z) log(p(z|g) / r(z)); +inf when r misses support."""
    r = np.asarray(r, dtype=np.float64)
    p_gz = joint.marginal(("G", "Z"))
    if r.shape != (p_gz.shape[1],):
        raise ValidationError(f"prior length {r.shape} does not match |Z| = {p_gz.shape[1]}")
    if abs(r.sum() - 1.0) > _ATOL or r.min() < -_ATOL:
        raise ValidationError("r is not a probability vector")
    p_g = p_gz.sum(axis=1)
    total = 0.0
    for gi in range(p_gz.shape[0]):
        if p_g[gi] == 0:
            continue
        cond = p_gz[gi] / p_g[gi]
        nz = cond > 0
        if np.any(r[nz] == 0.0):
            return math.inf
        total += p_g[gi] * float((cond[nz] * np.log(cond[nz] / r[nz])).sum())
    return total


def check_compression_bound(joint, r):
    """I(Z; G) <= E_G[KL(p(Z|G) || r)], with equality at the true marginal."""
    lhs = mutual_information(joint, "Z", "G")
    return _check(lhs, _compression_bound_value(joint, r))


def check_combined_bound(joint, q, r, beta):
    """-I(Y; Z) + beta I(Z; G) against the summed variational bounds."""
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    lhs = -mutual_information(joint, "Y", "Z") + beta * mutual_information(joint, "Z", "G")
    pred = _prediction_bound_value(joint, q)
    comp = _compression_bound_value(joint, r)
    rhs = math.inf if math.isinf(pred) or math.isinf(comp) else pred + beta * comp
    return _check(lhs, rhs)


def true_posterior(joint):
    """p(Y | Z) as a Channel indexed (Z, Y); uniform rows off support."""
    p_yz = joint.marginal(("Y", "Z"))
    p_z = p_yz.sum(axis=0)
    ny = p_yz.shape[0]
    rows = np.full((p_z.size, ny), 1.0 / ny)
    nz = p_z > 0
    rows[nz] = (p_yz[:, nz] / p_z[nz]).T
    return Channel(rows)


def true_marginal(joint):
    return joint.marginal("Z")


# -- randomized verification ------------------------------------------------


def _dirichlet_rows(rng, shape):
    g = rng.gamma(1.0, size=shape)
    return g / g.sum(axis=-1, keepdims=True)


def random_instance(rng, max_alphabet=4):
    """Random chain joint plus random variational terms (q, r, beta)."""
    sizes = rng.integers(2, max_alphabet + 1, size=4)
    ny, nn, ng, nz = (int(s) for s in sizes)
    joint = build_markov_chain(
        _dirichlet_rows(rng, (ny,)),
        _dirichlet_rows(rng, (nn,)),
        _dirichlet_rows(rng, (ny, nn, ng)),
        _dirichlet_rows(rng, (ng, nz)),
    )
    q = Channel(_dirichlet_rows(rng, (nz, ny)))
    r = _dirichlet_rows(rng, (nz,))
    beta = float(rng.uniform(0.0, 1.0))
    return joint, q, r, beta


def verify_bounds(instances=1000, seed=7, max_alphabet=4):
    """Run every inequality on randomized chains; JSON-friendly summary.

    For each instance the variational checks run twice: once with random
    (q, r) and once with the true posterior/marginal, where the bound must
    be tight.
    """
    if instances < 1:
        raise ParameterError(f"instances must be >= 1, got {instances}")
    rng = np.random.default_rng(seed)
    checks = {
        "nuisance": {"instances": 0, "failures": 0, "max_violation": 0.0},
        "prediction": {"instances": 0, "failures": 0, "max_violation": 0.0},
        "compression": {"instances": 0, "failures": 0, "max_violation": 0.0},
        "combined": {"instances": 0, "failures": 0, "max_violation": 0.0},
        "tightness": {"instances": 0, "failures": 0, "max_violation": 0.0},
        "data_processing": {"instances": 0, "failures": 0, "max_violation": 0.0},
    }

    def tally(key, result, require_tight=False):
        c = checks[key]
        c["instances"] += 1
        ok = result.tight if require_tight else result.holds
        if not ok:
            c["failures"] += 1
        gap = result.violation if not require_tight else abs(result.lhs - result.rhs)
        c["max_violation"] = max(c["max_violation"], gap)

    for _ in range(instances):
        joint, q, r, beta = random_instance(rng, max_alphabet=max_alphabet)
        tally("nuisance", check_lemma1(joint))
        tally("prediction", check_prediction_bound(joint, q))
        tally("compression", check_compression_bound(joint, r))
        tally("combined", check_combined_bound(joint, q, r, beta))
        dpi = _check(
            mutual_information(joint, "Z", ("Y", "N")),
            mutual_information(joint, "Z", "G"),
        )
        tally("data_processing", dpi)
        q_star = true_posterior(joint)
        r_star = true_marginal(joint)
        tally("tightness", check_prediction_bound(joint, q_star), require_tight=True)
        tally("tightness", check_compression_bound(joint, r_star), require_tight=True)
        tally("tightness", check_combined_bound(joint, q_star, r_star, beta), require_tight=True)

    failures = int(np.sum([c["failures"] for c in checks.values()]))
    max_violation = float(np.max([c["max_violation"] for c in checks.values()]))
    return {
        "instances": instances,
        "seed": seed,
        "failures": failures,
        "max_violation": max_violation,
        "checks": checks,
    }


# -- Gaussian cross-checks ---------------------------------------------------


def gaussian_kl_closed_form(mu, sigma):
    """KL(N(mu, sigma^2) || N(0, 1)) for scalars, by the analytic identity."""
    return 0.5 * (mu * mu + sigma * sigma - 1.0 - 2.0 * math.log(sigma))


_SQRT2 = math.sqrt(2.0)


def _normal_mass(a, b, mu=0.0, sigma=1.0):
    """Mass of N(mu, sigma^2) on [a, b]; erfc keeps far tails above zero."""
    za = (a - mu) / (sigma * _SQRT2)
    zb = (b - mu) / (sigma * _SQRT2)
    if za >= 0.0:
        return 0.5 * (math.erfc(za) - math.erfc(zb))
    if zb <= 0.0:
        return 0.5 * (math.erfc(-zb) - math.erfc(-za))
    return 0.5 * (math.erf(zb) - math.erf(za))


def gaussian_kl_quantized(mu, sigma, bins=512, span=8.0):
    """KL between bin-mass discretizations of N(mu, sigma^2) and N(0, 1).

    The grid covers both distributions out to ``span`` deviations; leftover
    tail mass is folded into the edge bins. Converges to the closed form
    from below as bins grow.
    """
    if bins < 2:
        raise ParameterError(f"need at least 2 bins, got {bins}")
    lo = min(mu - span * sigma, -span)
    hi = max(mu + span * sigma, span)
    edges = np.linspace(lo, hi, bins + 1)
    p = np.array([
        _normal_mass(a, b, mu, sigma) for a, b in zip(edges[:-1], edges[1:])
    ])
    r = np.array([_normal_mass(a, b) for a, b in zip(edges[:-1], edges[1:])])
    p[0] += _normal_mass(-np.inf, lo, mu, sigma)
    p[-1] += _normal_mass(hi, np.inf, mu, sigma)
    r[0] += _normal_mass(-np.inf, lo)
    r[-1] += _normal_mass(hi, np.inf)
    nz = p > 0
    if np.any(r[nz] == 0.0):
        return math.inf
    return float((p[nz] * np.log(p[nz] / r[nz])).sum())
