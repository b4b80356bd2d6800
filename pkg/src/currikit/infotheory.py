"""Information-theoretic text complexity under a nearest-neighbor chain model.

A document maps to a sequence of binary variables: position i is 1 when
a text drawn uniformly from the corpus carries this document's token at
position i. The marginal p_i and the adjacent joint q_i = P(match at
i-1 and match at i) both come from one pass over the corpus, which
guarantees the Frechet consistency bounds

    max(0, p_{i-1} + p_i - 1) <= q_i <= min(p_{i-1}, p_i).

Entropy of any subset of positions is evaluated under a chain model in
which only pairs adjacent in the original sequence interact; variables
separated by a gap are independent. Total entropy of a subset A is then

    H(X_A) = sum_{i in A} h_i  -  sum_{i-1, i both in A} mi_i

with h_i the binary marginal entropy and mi_i the mutual information of
the adjacent pair. On top of this model the module computes excess
entropy (sum of leave-one-out entropies minus (n-1) times the full
entropy) and Tononi-Sporns-Edelman (TSE) complexity, the latter both in
closed form and by literal subset enumeration as a cross-check oracle.

All entropies are in nats; 0 * ln(0) is taken as 0.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, CorpusStats, Document
from .metrics import ComplexityScores

#: Negative joint-probability mass below this magnitude is clamped to zero;
#: anything larger is treated as inconsistent input.
NEGATIVE_CELL_TOLERANCE = 1e-12

#: Hard cap for the enumeration oracle (2^20 subsets).
BRUTE_FORCE_MAX_N = 20

#: Documents are truncated to this many positions for scoring.
DEFAULT_MAX_POSITIONS = 128


class StatsMismatchError(ValueError):
    """A document references a token/position the stats never observed."""


@dataclass(frozen=True)
class BernoulliSequence:
    """Positional match probabilities for one document.

    marginals[i] is the probability that a random corpus text matches
    this document at position i; joint11[i-1] is the probability that it
    matches at both i-1 and i.
    """

    marginals: np.ndarray
    joint11: np.ndarray

    def __post_init__(self) -> None:
        marg = np.asarray(self.marginals, dtype=np.float64)
        joint = np.asarray(self.joint11, dtype=np.float64)
        if marg.ndim != 1 or marg.size < 1:
            raise ValueError("marginals must be a non-empty 1-D array")
        if joint.shape != (marg.size - 1,):
            raise ValueError("joint11 must have length n-1")
        if not (np.all(np.isfinite(marg)) and np.all(np.isfinite(joint))):
            raise ValueError("probabilities must be finite")
        if np.any(marg < 0.0) or np.any(marg > 1.0):
            raise ValueError("marginals must lie in [0, 1]")
        object.__setattr__(self, "marginals", marg)
        object.__setattr__(self, "joint11", joint)

    @property
    def n(self) -> int:
        return int(self.marginals.size)


@dataclass(frozen=True)
class EntropyProfile:
    """Marginal, conditional, and pairwise mutual-information arrays.

    h[i] is the marginal entropy of position i. h_cond[i-1] is
    H(X_i | X_{i-1}) and mi[i-1] = h[i] - h_cond[i-1], both defined for
    i >= 1.
    """

    h: np.ndarray
    h_cond: np.ndarray
    mi: np.ndarray

    @property
    def n(self) -> int:
        return int(self.h.size)


def _plogp(x: float) -> float:
    return 0.0 if x <= 0.0 else -x * math.log(x)


def binary_entropy(p: float) -> float:
    """Entropy of a Bernoulli(p) variable in nats."""
    return _plogp(p) + _plogp(1.0 - p)


def to_bernoulli(
    doc: Document,
    stats: CorpusStats,
    max_positions: int | None = DEFAULT_MAX_POSITIONS,
) -> BernoulliSequence:
    """Look up the document's positional match probabilities.

    Raises StatsMismatchError when a token was never observed at its
    position, which signals the stats were built from a different
    corpus.
    """
    tokens = doc.tokens if max_positions is None else doc.tokens[:max_positions]
    n = len(tokens)
    marg = np.empty(n, dtype=np.float64)
    joint = np.empty(max(n - 1, 0), dtype=np.float64)
    for i, tok in enumerate(tokens):
        p = stats.p(i, tok)
        if p <= 0.0:
            raise StatsMismatchError(
                f"document {doc.id}: token {tok!r} never observed at position {i}"
            )
        marg[i] = p
        if i >= 1:
            joint[i - 1] = stats.q(i, tokens[i - 1], tok)
    return BernoulliSequence(marg, joint)


def entropy_profile(seq: BernoulliSequence) -> EntropyProfile:
    """Marginal and adjacent-pair entropies for one sequence.

    The conditional entropy at i comes from the 2x2 joint of the pair
    (i-1, i). Joint cells that are negative within the floating-point
    tolerance are clamped to zero; larger negatives raise.
    """
    p = seq.marginals
    n = seq.n
    h = np.array([binary_entropy(pi) for pi in p])
    h_cond = np.empty(max(n - 1, 0), dtype=np.float64)
    mi = np.empty(max(n - 1, 0), dtype=np.float64)
    for i in range(1, n):
        q11 = float(seq.joint11[i - 1])
        cells = (
            q11,
            p[i - 1] - q11,
            p[i] - q11,
            1.0 - p[i - 1] - p[i] + q11,
        )
        joint_entropy = 0.0
        for cell in cells:
            if cell < -NEGATIVE_CELL_TOLERANCE:
                raise ValueError(
                    f"inconsistent joint at position {i}: cell mass {cell:.3e} < 0"
                )
            joint_entropy += _plogp(max(cell, 0.0))
        cond = joint_entropy - h[i - 1]
        # mathematically 0 <= cond <= h_i for a valid joint; guard rounding
        cond = min(max(cond, 0.0), h[i])
        h_cond[i - 1] = cond
        mi[i - 1] = h[i] - cond
    return EntropyProfile(h=h, h_cond=h_cond, mi=mi)


def chain_entropy(profile: EntropyProfile, index_set: Iterable[int]) -> float:
    """Entropy of a position subset under the chain model.

    Only pairs adjacent in the original sequence contribute interaction;
    across a gap the variables are independent. The empty set has zero
    entropy.
    """
    idx = list(index_set)
    if not idx:
        return 0.0
    if idx[0] < 0 or idx[-1] >= profile.n:
        raise ValueError("index set out of range")
    total = 0.0
    prev = None
    for i in idx:
        if prev is not None and i <= prev:
            raise ValueError("index set must be sorted and duplicate-free")
        total += profile.h[i]
        if prev == i - 1:
            total -= profile.mi[i - 1]
        prev = i
    return float(total)


def excess_entropy(seq: BernoulliSequence) -> float:
    """Sum of leave-one-out entropies minus (n-1) times the full entropy.

    Zero for a single position and for any fully independent sequence.
    """
    n = seq.n
    if n == 1:
        return 0.0
    profile = entropy_profile(seq)
    full = list(range(n))
    h_full = chain_entropy(profile, full)
    loo_sum = sum(chain_entropy(profile, full[:v] + full[v + 1 :]) for v in range(n))
    return float(loo_sum - (n - 1) * h_full)


def tse_closed_form(seq: BernoulliSequence) -> float:
    """TSE complexity via expected subset entropies.

    Under the chain model the average entropy over uniform size-k
    subsets is exactly

        (k/n) * sum(h)  -  k(k-1)/(n(n-1)) * sum(mi)

    because an element is included with probability k/n and an adjacent
    pair with probability k(k-1)/(n(n-1)). Each deviation term is
    C(k) = (n/k) * avg - H(full), and the result is
    sum_{k=1}^{n-1} (k/n) * C(k).
    """
    n = seq.n
    if n == 1:
        return 0.0
    profile = entropy_profile(seq)
    sum_h = float(np.sum(profile.h))
    sum_mi = float(np.sum(profile.mi))
    h_full = sum_h - sum_mi
    total = 0.0
    for k in range(1, n):
        avg_k = (k / n) * sum_h - (k * (k - 1)) / (n * (n - 1)) * sum_mi
        c_k = (n / k) * avg_k - h_full
        total += (k / n) * c_k
    return float(total)


def tse_bruteforce(seq: BernoulliSequence) -> float:
    """TSE by literal enumeration of every subset of each size.

    Exponential in n; the guard keeps it a test-only oracle.
    """
    n = seq.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force disallowed for n > {BRUTE_FORCE_MAX_N}")
    if n == 1:
        return 0.0
    profile = entropy_profile(seq)
    h_full = chain_entropy(profile, range(n))
    total = 0.0
    for k in range(1, n):
        subset_sum = 0.0
        count = 0
        for subset in itertools.combinations(range(n), k):
            subset_sum += chain_entropy(profile, subset)
            count += 1
        c_k = (n / (k * count)) * subset_sum - h_full
        total += (k / n) * c_k
    return float(total)


def score_infotheoretic(
    corpus: Corpus,
    stats: CorpusStats,
    which: str,
    *,
    max_positions: int | None = DEFAULT_MAX_POSITIONS,
) -> ComplexityScores:
    """Score every document with TSE or excess entropy."""
    if which == "tse":
        functional = tse_closed_form
    elif which == "ee":
        functional = excess_entropy
    else:
        raise ValueError(f"unknown info-theoretic metric: {which!r}")
    values = np.array(
        [functional(to_bernoulli(doc, stats, max_positions)) for doc in corpus]
    )
    return ComplexityScores(which, values)
