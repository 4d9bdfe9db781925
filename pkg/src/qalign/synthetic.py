"""Seeded synthetic corpora for tests, search trials and demos."""

from __future__ import annotations

import numpy as np

from .encoder import Corpus

_SYLLABLES = (
    "ka to ri ne mu sa lo pe vi da gu ze ho fi ba ly cor tin ast mel pro gen "
    "ox cy neu derm path card hem lip ost my"
).split()


def make_vocabulary(n_words: int, rng: np.random.Generator) -> list[str]:
    words: set[str] = set()
    while len(words) < n_words:
        k = int(rng.integers(2, 4))
        words.add("".join(rng.choice(_SYLLABLES, size=k)))
    return sorted(words)


def alignment_pair(
    n_left: int = 200,
    n_right: int = 50,
    seed: int = 0,
    n_words: int = 400,
    target_len: tuple[int, int] = (3, 7),
    swap_prob: float = 0.2,
) -> tuple[Corpus, Corpus, list[int]]:
    """Build a (left, right) corpus pair with known gold targets.

    Each right text is a random phrase; each left text copies one right text,
    swaps each word for a random one with probability ``swap_prob`` and
    shuffles the order. Returns the corpora and the gold right index of each
    left row.
    """
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(n_words, rng)
    right = []
    for _ in range(n_right):
        k = int(rng.integers(target_len[0], target_len[1] + 1))
        right.append(list(rng.choice(vocab, size=k, replace=False)))
    gold = [int(g) for g in rng.integers(0, n_right, size=n_left)]
    left = []
    for g in gold:
        words = [str(rng.choice(vocab)) if rng.random() < swap_prob else w for w in right[g]]
        rng.shuffle(words)
        left.append(" ".join(words).capitalize() + ("." if rng.random() < 0.5 else ""))
    left_c = Corpus((f"L{i:04d}", t) for i, t in enumerate(left))
    right_c = Corpus((f"R{j:04d}", " ".join(w)) for j, w in enumerate(right))
    return left_c, right_c, gold
