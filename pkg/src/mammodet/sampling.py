"""Training batch composition by biopsy stratum.

Each slot of a batch comes from a biopsied exam with probability
``biopsy_ratio`` and from a non-biopsied exam otherwise; the image is then
drawn uniformly within that stratum. ``exact_quota`` replaces the per-slot
coin flip with ``round(ratio * n)`` biopsied slots in shuffled positions.
"""

from dataclasses import dataclass

import numpy as np

from ._random import as_rng
from ._validation import check_positive_int, check_probability


@dataclass(frozen=True)
class SamplerConfig:
    biopsy_ratio: float = 0.5
    seed: int = 0
    exact_quota: bool = False
    exam_uniform: bool = False

    def __post_init__(self):
        object.__setattr__(self, "biopsy_ratio", check_probability(self.biopsy_ratio, "biopsy_ratio"))


class EmptyStratumError(ValueError):
    def __init__(self, stratum):
        self.stratum = stratum
        super().__init__(f"no images in the {stratum} stratum")


def stratify(corpus):
    """Split image ids by their exam's biopsied flag, in corpus order."""
    biopsied, other = [], []
    for e in corpus.exams:
        target = biopsied if e.biopsied else other
        target.extend(img.image_id for img in e.images)
    return biopsied, other


def _exam_groups(corpus, biopsied):
    return [
        [img.image_id for img in e.images]
        for e in corpus.exams
        if e.biopsied == biopsied and e.images
    ]


class BiopsyRatioSampler:
    """Stateful sampler; owns its random stream, so use one per worker.

    Parameters
    ----------
    corpus : Corpus
    config : SamplerConfig
    rng : numpy.random.Generator, optional
        Defaults to a PCG64 stream seeded from ``config.seed``.
    """

    def __init__(self, corpus, config=None, rng=None):
        self.config = config or SamplerConfig()
        self.rng = as_rng(rng, self.config.seed)
        if self.config.exam_uniform:
            self._strata = (_exam_groups(corpus, True), _exam_groups(corpus, False))
        else:
            self._strata = stratify(corpus)
        r = self.config.biopsy_ratio
        if r > 0 and not self._strata[0]:
            raise EmptyStratumError("biopsied")
        if r < 1 and not self._strata[1]:
            raise EmptyStratumError("non-biopsied")

    def _draw(self, stratum, k):
        if k == 0:
            return []
        if self.config.exam_uniform:
            exams = self.rng.integers(0, len(stratum), size=k)
            out = []
            for i in exams:
                group = stratum[i]
                out.append(group[self.rng.integers(0, len(group))])
            return out
        idx = self.rng.integers(0, len(stratum), size=k)
        return [stratum[i] for i in idx]

    def sample(self, n):
        n = check_positive_int(n, "n")
        r = self.config.biopsy_ratio
        if self.config.exact_quota:
            from_biopsied = np.zeros(n, dtype=bool)
            from_biopsied[: int(np.floor(r * n + 0.5))] = True
            self.rng.shuffle(from_biopsied)
        else:
            from_biopsied = self.rng.random(n) < r
        slots = np.flatnonzero(from_biopsied)
        other_slots = np.flatnonzero(~from_biopsied)
        out = [None] * n
        for positions, stratum in ((slots, self._strata[0]), (other_slots, self._strata[1])):
            for pos, image_id in zip(positions, self._draw(stratum, len(positions))):
                out[pos] = image_id
        return out


def sample_batch(corpus, n, config, rng=None):
    """Draw ``n`` image ids; see :class:`BiopsyRatioSampler`."""
    return BiopsyRatioSampler(corpus, config, rng).sample(n)
