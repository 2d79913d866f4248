"""Independent oracles shared across the test suite.

These deliberately avoid the library's own code paths: brute-force
enumeration, arbitrary-precision arithmetic, and textbook formulas.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import mpmath

mpmath.mp.dps = 50


# -- entropy ----------------------------------------------------------------


def entropy_mp(counts: Sequence[int]) -> mpmath.mpf:
    """Shannon entropy at 50 decimal digits."""
    total = sum(counts)
    h = mpmath.mpf(0)
    for c in counts:
        if c:
            p = mpmath.mpf(c) / total
            h -= p * mpmath.log(p)
    return h


def _to_mpf(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def untrustworthiness_mp(t: int, r, t_max: int) -> mpmath.mpf:
    if r == 0:
        return mpmath.mpf(0)
    a = mpmath.mpf(t) / t_max
    r = _to_mpf(r)
    return 2 * r * a / (r + a)


# -- set partitions and modularity ------------------------------------------


def labelings(n: int, max_parts: int | None = None) -> Iterator[list[int]]:
    """All set partitions of n items as canonical label arrays (restricted growth)."""
    limit = n if max_parts is None else max_parts

    def grow(prefix: list[int], used: int) -> Iterator[list[int]]:
        if len(prefix) == n:
            yield prefix
            return
        for label in range(min(used + 1, limit)):
            yield from grow(prefix + [label], max(used, label + 1))

    yield from grow([0], 1)


def modularity_oracle(pairs: dict[tuple[int, int], float], n: int, labels: Sequence[int]) -> float:
    """Textbook modularity from a plain undirected pair-weight dict."""
    m = sum(pairs.values())
    strength = [0.0] * n
    for (u, v), w in pairs.items():
        strength[u] += w
        strength[v] += w
    n_comm = max(labels) + 1
    sum_in = [0.0] * n_comm
    sum_tot = [0.0] * n_comm
    for (u, v), w in pairs.items():
        if labels[u] == labels[v]:
            sum_in[labels[u]] += 2 * w
    for i in range(n):
        sum_tot[labels[i]] += strength[i]
    return sum(si / (2 * m) - (st / (2 * m)) ** 2 for si, st in zip(sum_in, sum_tot))


def best_partition_bruteforce(
    pairs: dict[tuple[int, int], float], n: int, max_parts: int | None = None
) -> tuple[list[int], float]:
    best_labels: list[int] = [0] * n
    best_q = -math.inf
    for labels in labelings(n, max_parts):
        q = modularity_oracle(pairs, n, labels)
        if q > best_q:
            best_q = q
            best_labels = labels
    return best_labels, best_q


# -- normalized mutual information -------------------------------------------


def nmi(a: Sequence[int], b: Sequence[int]) -> float:
    """NMI with sqrt normalization; 1.0 when the labelings agree up to renaming."""
    n = len(a)
    assert n == len(b) and n > 0
    from collections import Counter

    ca = Counter(a)
    cb = Counter(b)
    joint = Counter(zip(a, b))
    mi = 0.0
    for (la, lb), c in joint.items():
        mi += (c / n) * math.log(n * c / (ca[la] * cb[lb]))
    ha = -sum((c / n) * math.log(c / n) for c in ca.values())
    hb = -sum((c / n) * math.log(c / n) for c in cb.values())
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    return mi / math.sqrt(ha * hb)


# -- Mann-Whitney by full enumeration -----------------------------------------


def mw_enumeration(
    a: Sequence[float], b: Sequence[float], alternative: str = "two-sided"
) -> tuple[float, Fraction]:
    """U statistic for sample a and the exact p by enumerating every group assignment."""
    n1, n2 = len(a), len(b)
    pooled = list(a) + list(b)
    n = n1 + n2

    def u_of(indices: tuple[int, ...]) -> float:
        group_a = [pooled[i] for i in indices]
        group_b = [pooled[i] for i in range(n) if i not in set(indices)]
        u = 0.0
        for x in group_a:
            for y in group_b:
                if x > y:
                    u += 1.0
                elif x == y:
                    u += 0.5
        return u

    u_obs = u_of(tuple(range(n1)))
    mu = n1 * n2 / 2.0
    hits = 0
    total = 0
    for indices in itertools.combinations(range(n), n1):
        u = u_of(indices)
        total += 1
        if alternative == "two-sided":
            if abs(u - mu) >= abs(u_obs - mu) - 1e-12:
                hits += 1
        elif alternative == "greater":
            if u >= u_obs - 1e-12:
                hits += 1
        else:
            if u <= u_obs + 1e-12:
                hits += 1
    return u_obs, Fraction(hits, total)


# -- misc ----------------------------------------------------------------------


def pair_dict(edges: Iterable[tuple[int, int]], weight: float = 1.0) -> dict[tuple[int, int], float]:
    pairs: dict[tuple[int, int], float] = {}
    for u, v in edges:
        key = (u, v) if u < v else (v, u)
        pairs[key] = pairs.get(key, 0.0) + weight
    return pairs
