"""Multi-index words over the alphabet {0, ..., r}.

A word indexes an iterated integral; the letter 0 stands for the time
component and counts twice in the degree, so a word's degree is its
length plus its number of zeros.  Words are plain tuples of ints, the
empty tuple being the empty word.
"""

from itertools import product

MultiIndex = tuple[int, ...]

EMPTY: MultiIndex = ()


def degree(beta: MultiIndex) -> int:
    """Length of the word plus the number of zero letters."""
    return len(beta) + sum(1 for e in beta if e == 0)


def concat(beta1: MultiIndex, beta2: MultiIndex) -> MultiIndex:
    return tuple(beta1) + tuple(beta2)


def enumerate_degree_set(m: int, r: int) -> list[MultiIndex]:
    """All words over {0,...,r} of degree at most m.

    The set is finite because degree >= length.  Output is ordered
    lexicographically by (length, entries) so callers get a stable
    enumeration.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if r < 1:
        raise ValueError("r must be positive")
    words: list[MultiIndex] = [EMPTY]
    for length in range(1, m + 1):
        for word in product(range(r + 1), repeat=length):
            if length + word.count(0) <= m:
                words.append(word)
    return words


def frontier(m: int, r: int) -> list[MultiIndex]:
    """Words outside the degree-m set whose tail (first letter removed) is inside."""
    inside = set(enumerate_degree_set(m, r))
    out: list[MultiIndex] = []
    for word in enumerate_degree_set(m + 2, r):
        if word and word not in inside and word[1:] in inside:
            out.append(word)
    return out
