"""Independent brute-force oracles used to freeze expected metric values.

These deliberately avoid the production code paths they check.
"""

from __future__ import annotations

from itertools import combinations


def is_subsequence(needle, haystack) -> bool:
    it = iter(haystack)
    return all(any(tok == h for h in it) for tok in needle)


def brute_force_lcs_len(x, y) -> int:
    """Max length over all subsequences of the shorter sequence that embed in the longer."""
    short, long_ = (x, y) if len(x) <= len(y) else (y, x)
    for length in range(len(short), 0, -1):
        for idx in combinations(range(len(short)), length):
            candidate = [short[i] for i in idx]
            if is_subsequence(candidate, long_):
                return length
    return 0
