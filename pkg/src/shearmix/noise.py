"""Reproducible i.i.d. uniform phase streams.

Each stream is a Philox counter-based generator keyed by ``(seed, stream)``.
The k-th phase pair of a stream occupies raw words 2k and 2k+1, so any pair
can be produced without generating its predecessors; results never depend on
how work is split across calls or threads.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .torus import TWO_PI

DEFAULT_SEED = 12345
_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter step

MAX_SEED = 2**64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _key(seed: int, stream: int) -> np.ndarray:
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(stream),))
    return ss.generate_state(2, np.uint64)


def _bit_generator(seed: int, stream: int, word: int) -> tuple[np.random.Philox, int]:
    """Philox positioned at the block containing raw word ``word``; returns the
    generator and the number of words to discard inside that block."""
    bg = np.random.Philox(key=_key(seed, stream))
    block, skip = divmod(word, _WORDS_PER_BLOCK)
    if block:
        bg.advance(block)
    return bg, skip


def raw_words(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit outputs ``start .. start+count-1`` of a stream."""
    bg, skip = _bit_generator(seed, stream, start)
    return bg.random_raw(skip + count)[skip:]


def uniform_block(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) doubles from words ``start .. start+count-1``."""
    words = raw_words(seed, stream, start, count)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class PhaseSequence:
    seed: int = DEFAULT_SEED
    stream_index: int = 0
    position: int = 0


def derive_stream(seed: int, trajectory_index: int) -> PhaseSequence:
    if trajectory_index < 0:
        raise ValueError("trajectory_index must be nonnegative")
    return PhaseSequence(_check_seed(seed), int(trajectory_index), 0)


def phases_at(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Phase pairs ``start .. start+count-1`` of a stream, shape (count, 2)."""
    u = uniform_block(seed, stream, 2 * start, 2 * count)
    return (TWO_PI * u).reshape(count, 2)


def next_phases(seq: PhaseSequence, count: int) -> tuple[np.ndarray, PhaseSequence]:
    """The next ``count`` phase pairs and the advanced sequence."""
    out = phases_at(seq.seed, seq.stream_index, seq.position, count)
    return out, replace(seq, position=seq.position + count)


def next_phase(seq: PhaseSequence) -> tuple[np.ndarray, PhaseSequence]:
    out, seq = next_phases(seq, 1)
    return out[0], seq


def bootstrap_rng(seed: int, purpose: int) -> np.random.Generator:
    """Auxiliary generator for resampling and sampling of initial data."""
    return np.random.Generator(np.random.Philox(key=_key(seed, 2**32 + int(purpose))))
