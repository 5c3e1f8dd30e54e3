"""Numeric verification of the three scalability and error guarantees.

1. Domain invariance: embedding components follow the same distribution for
   integer-domain and string-domain items (two-sample KS per component).
2. Sub-skewness: hash-splitting a Zipf stream across K bricks preserves the
   local log-log slope around a sub-rank in expectation; the truncated
   double sum is checked against a Bernoulli rank-thinning simulation.
3. Error bound: the rule-path estimate exceeds the true frequency by
   epsilon * N with probability at most 1 / (epsilon * d2); checked by
   Monte-Carlo over fresh hash seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import hashing
from .embedding import EmbeddingTable
from .nn import rule_only_bundle
from .sketch import BrickSketch
from .streams import ZipfSpec, gen_rank_stream


# -- sub-skewness (Theorem 2) -------------------------------------------------


def sub_skewness_point(alpha: float, r_prime: int, d: int, r: int) -> float:
    """Local log-log slope around sub-rank r_prime when the item of global
    rank r is followed, D global ranks later, by the next item landing in
    the same brick: alpha * log(1 + D/r) / log(1 + 1/r_prime)."""
    if d < 1 or r_prime < 1 or r < r_prime:
        raise ValueError("need d >= 1 and r >= r_prime >= 1")
    return alpha * math.log1p(d / r) / math.log1p(1.0 / r_prime)


@dataclass(frozen=True)
class SubSkewnessParams:
    """Inputs for the expected sub-skewness sum.

    The rank distance D is geometric with success rate 1/K and the global
    rank r sits r - r_prime negative-binomial failures above the sub-rank;
    truncating at (d_max, r_max) must leave combined tail mass below 1e-9.

    A 40K margin on r_max would leave a ~1e-7 negative-binomial tail at
    typical parameters (K=10, r_prime=50), so the defaults use a wider 80K
    margin.
    """

    alpha: float
    k: int
    r_prime: int
    d_max: int | None = None
    r_max: int | None = None

    def resolved(self) -> tuple[int, int]:
        d_max = self.d_max if self.d_max is not None else math.ceil(60 * self.k)
        r_max = (
            self.r_max
            if self.r_max is not None
            else self.r_prime + math.ceil(80 * self.k) + d_max
        )
        return d_max, r_max


def truncation_tail_mass(k: int, r_prime: int, d_max: int, r_max: int) -> float:
    """Probability mass outside the (d_max, r_max) truncation box."""
    if k == 1:
        return 0.0
    p = 1.0 / k
    geom_tail = (1.0 - p) ** d_max
    nb_tail = float(stats.nbinom.sf(r_max - r_prime, r_prime, p))
    return geom_tail + nb_tail


def expected_sub_skewness(params: SubSkewnessParams) -> float:
    """Truncated double sum of the slope against its mixing weights.

    Weights are (K-1)^(r+D-r'-1) / K^(D+r) * C(r-1, r'-1), evaluated in log
    space. At K=1 only the (D=1, r=r') term carries mass (0^0 = 1) and the
    sum is exactly alpha.
    """
    alpha, k, r_prime = params.alpha, params.k, params.r_prime
    if k < 1 or r_prime < 1:
        raise ValueError("need k >= 1 and r_prime >= 1")
    log_denom = math.log1p(1.0 / r_prime)
    if k == 1:
        return alpha * (math.log1p(1.0 / r_prime) / log_denom)
    d_max, r_max = params.resolved()
    tail = truncation_tail_mass(k, r_prime, d_max, r_max)
    if tail > 1e-9:
        raise ValueError(
            f"truncation too small: tail mass {tail:.3e} exceeds 1e-9 "
            f"at d_max={d_max}, r_max={r_max}"
        )
    d = np.arange(1, d_max + 1, dtype=np.float64)[:, None]
    r = np.arange(r_prime, r_max + 1, dtype=np.float64)[None, :]
    log_w = (
        (r + d - r_prime - 1) * math.log(k - 1)
        - (d + r) * math.log(k)
        + gammaln(r)
        - gammaln(r_prime)
        - gammaln(r - r_prime + 1)
    )
    value = np.log1p(d / r) / log_denom
    return alpha * float(np.sum(value * np.exp(log_w)))


def sub_skewness_mc(
    alpha: float,
    k: int,
    r_prime: int,
    trials: int = 50000,
    seed: int = 42,
    chunk: int = 5000,
) -> tuple[float, float]:
    """Monte-Carlo oracle by direct Bernoulli(1/K) rank thinning.

    Walks global ranks 1, 2, ... keeping each with probability 1/K, finds the
    global ranks of the r_prime-th and (r_prime+1)-th kept items, and
    averages the resulting slope samples. Returns (mean, standard error).
    """
    p = 1.0 / k
    horizon = int((r_prime + 1) * k + 40 * k * math.sqrt(r_prime + 1)) + 8
    rng = np.random.default_rng(seed)
    log_denom = math.log1p(1.0 / r_prime)
    samples = []
    remaining = trials
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        kept = rng.random((m, horizon)) < p
        csum = np.cumsum(kept, axis=1)
        if np.any(csum[:, -1] < r_prime + 1):
            raise RuntimeError("thinning horizon too short; raise it")
        r_i = np.argmax(csum >= r_prime, axis=1) + 1
        r_j = np.argmax(csum >= r_prime + 1, axis=1) + 1
        d = r_j - r_i
        samples.append(alpha * np.log1p(d / r_i) / log_denom)
    values = np.concatenate(samples)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


# -- error bound (Theorem 3) --------------------------------------------------


def error_bound(epsilon: float, d2: int) -> float:
    """Probability bound 1 / (epsilon * d2) on an overshoot of epsilon * N."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d2 < 1:
        raise ValueError("d2 must be >= 1")
    return 1.0 / (epsilon * d2)


def mc_error_check(
    stream_spec: ZipfSpec,
    epsilon: float,
    trials: int = 50,
    seed: int = 42,
    d1: int = 5,
    d2: int = 5120,
) -> dict:
    """Estimate P(rule estimate - truth >= epsilon * N) over fresh seeds.

    Each trial draws new hash seeds and a new stream from the spec's shape,
    stores it into a single rule-only brick, and queries every distinct
    item. Passes when the observed exceed rate stays within three binomial
    standard errors of the bound.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    bound = error_bound(epsilon, d2)
    threshold = epsilon * stream_spec.length
    seeds = hashing.seed_sequence(stream_spec.seed ^ hashing.mix64(seed), 2 * trials)
    exceed = 0
    total = 0
    min_slack = math.inf
    for t in range(trials):
        spec = ZipfSpec(stream_spec.n, stream_spec.alpha, stream_spec.length, seed=seeds[2 * t])
        ranks = gen_rank_stream(spec)
        counts = np.bincount(ranks, minlength=spec.n + 1)[1:]
        present = np.nonzero(counts)[0]
        items = [b"item_%d" % (r + 1) for r in present.tolist()]
        sketch = BrickSketch(
            rule_only_bundle(seed=seeds[2 * t + 1], d1=d1, d2=d2), k=1
        )
        sketch.store_many([b"item_%d" % r for r in ranks.tolist()])
        est = sketch.query_many(items)
        truth = counts[present].astype(np.float64)
        diff = est - truth
        exceed += int(np.count_nonzero(diff >= threshold))
        total += diff.size
        min_slack = min(min_slack, float(diff.min()))
    rate = exceed / total
    se = math.sqrt(max(rate * (1.0 - rate), 1e-300) / total)
    return {
        "exceed_rate": rate,
        "bound": bound,
        "stderr": se,
        "pass": rate <= bound + 3 * se,
        "trials": trials,
        "pairs": total,
        "min_overshoot": min_slack,
    }


# -- domain invariance (Theorem 1) ---------------------------------------------


def random_integer_items(samples: int, rng: np.random.Generator) -> list[bytes]:
    vals = rng.integers(0, 2**63, size=samples, dtype=np.uint64)
    return [int(v).to_bytes(8, "little") for v in vals.tolist()]


def random_string_items(samples: int, rng: np.random.Generator) -> list[bytes]:
    lengths = rng.integers(4, 17, size=samples)
    codes = rng.integers(97, 123, size=(samples, 16), dtype=np.uint8)
    return [bytes(codes[i, : lengths[i]]) for i in range(samples)]


def ks_component_test(
    a: np.ndarray, b: np.ndarray, significance: float = 0.01
) -> tuple[list[tuple[float, float]], bool]:
    """Two-sample KS per column with Bonferroni correction across columns.

    Returns ((statistic, p-value) per component, no component rejected).
    """
    d = a.shape[1]
    results = []
    passed = True
    for k in range(d):
        stat, p = stats.ks_2samp(a[:, k], b[:, k])
        results.append((float(stat), float(p)))
        if p < significance / d:
            passed = False
    return results, passed


def domain_invariance_check(
    table: EmbeddingTable,
    samples: int = 100000,
    seed: int = 42,
    significance: float = 0.01,
) -> tuple[list[tuple[float, float]], bool]:
    """Compare embedding component distributions across item domains:
    `samples` random 8-byte integer items against `samples` random ASCII
    strings. Passes when no component's KS test rejects at the Bonferroni-
    corrected significance."""
    rng = np.random.default_rng(seed)
    emb_int = table.embed_digests(hashing.base_hash_many(random_integer_items(samples, rng)))
    emb_str = table.embed_digests(hashing.base_hash_many(random_string_items(samples, rng)))
    return ks_component_test(emb_int, emb_str, significance)


# -- verdict wrappers ----------------------------------------------------------


def verify_theorem1(samples: int = 100000, seed: int = 42, table: EmbeddingTable | None = None) -> dict:
    if table is None:
        table = EmbeddingTable.default()
    results, passed = domain_invariance_check(table, samples, seed)
    return {
        "theorem": 1,
        "parameters": {"samples": samples, "seed": seed, "d1": table.d1},
        "statistic": max(stat for stat, _ in results),
        "bound_or_pvalue": min(p for _, p in results),
        "components": results,
        "pass": passed,
    }


def verify_theorem2(
    alpha: float = 0.8,
    k: int = 10,
    r_prime: int = 50,
    trials: int = 50000,
    seed: int = 42,
    rel_tol: float = 0.05,
) -> dict:
    expected = expected_sub_skewness(SubSkewnessParams(alpha=alpha, k=k, r_prime=r_prime))
    mc_mean, mc_se = sub_skewness_mc(alpha, k, r_prime, trials=trials, seed=seed)
    agree = abs(expected - mc_mean) <= 3 * mc_se
    close = abs(expected - alpha) <= rel_tol * alpha if alpha > 0 else expected == 0.0
    return {
        "theorem": 2,
        "parameters": {"alpha": alpha, "k": k, "r_prime": r_prime, "trials": trials, "seed": seed},
        "statistic": expected,
        "bound_or_pvalue": 3 * mc_se,
        "mc_mean": mc_mean,
        "mc_stderr": mc_se,
        "pass": agree and close,
    }


def verify_theorem3(
    epsilon: float = 0.01,
    n: int = 10000,
    alpha: float = 0.7,
    length: int = 100000,
    trials: int = 50,
    seed: int = 42,
    d1: int = 5,
    d2: int = 5120,
) -> dict:
    spec = ZipfSpec(n=n, alpha=alpha, length=length, seed=seed)
    result = mc_error_check(spec, epsilon, trials=trials, seed=seed, d1=d1, d2=d2)
    return {
        "theorem": 3,
        "parameters": {
            "epsilon": epsilon,
            "n": n,
            "alpha": alpha,
            "length": length,
            "trials": trials,
            "seed": seed,
            "d1": d1,
            "d2": d2,
        },
        "statistic": result["exceed_rate"],
        "bound_or_pvalue": result["bound"],
        "stderr": result["stderr"],
        "min_overshoot": result["min_overshoot"],
        "pass": result["pass"],
    }
