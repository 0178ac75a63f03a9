"""
"Classical" audio features.

Two phases:
  1. Short-term: every 50 ms window (25 ms hop) yields 34 base features plus
     their frame-to-frame deltas.
  2. Long-term: mean and population std of the 68 per-frame values over the
     clip, giving a 136-d vector for the random forest.

Base feature order:
    zcr, energy, energy_entropy, spectral_centroid, spectral_spread,
    spectral_entropy, spectral_flux, spectral_rolloff, mfcc_1..13,
    chroma_1..12, chroma_std

Conventions:
    - Spectral features use the magnitude DFT of a Hamming-windowed frame;
      frequencies are normalised to the sample rate (so they lie in [0, 0.5]).
    - A frame with an all-zero spectrum has centroid, spread, entropy, flux
      and rolloff equal to 0; silent frames never produce NaN.
    - MFCC: 40-band mel bank over 0..sr/2 on the power spectrum, natural log
      with floor 1e-10, orthonormal DCT-II, first 13 coefficients. Scaling the
      signal by c shifts mfcc_1 by 2·√40·ln c and leaves mfcc_2..13 unchanged.
    - Chroma: DFT bins mapped to the nearest equal-tempered pitch class
      (A4 = 440 Hz, C = class 0), energies normalised to sum 1 (all 0 when
      silent); chroma_std is the population std of the 12 bins.
"""

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import librosa
import numpy as np
import pandas as pd
import scipy.fft
import scipy.signal

from src.models.media import AudioClip
from src.utils.exceptions import DomainError, TooShortError

DEFAULT_WINDOW = 0.050
DEFAULT_HOP = 0.025

N_MFCC = 13
N_MELS = 40
N_CHROMA = 12
N_SUBBANDS = 10
ROLLOFF_FRACTION = 0.90
LOG_FLOOR = 1e-10

FEATURE_NAMES: tuple[str, ...] = (
    "zcr",
    "energy",
    "energy_entropy",
    "spectral_centroid",
    "spectral_spread",
    "spectral_entropy",
    "spectral_flux",
    "spectral_rolloff",
    *(f"mfcc_{i}" for i in range(1, N_MFCC + 1)),
    *(f"chroma_{i}" for i in range(1, N_CHROMA + 1)),
    "chroma_std",
)
N_BASE = len(FEATURE_NAMES)
N_LONG_TERM = 4 * N_BASE
FRAME_COLUMNS: tuple[str, ...] = FEATURE_NAMES + tuple(f"delta_{name}" for name in FEATURE_NAMES)
LONG_TERM_COLUMNS: tuple[str, ...] = tuple(f"mean_{c}" for c in FRAME_COLUMNS) + tuple(f"std_{c}" for c in FRAME_COLUMNS)

_MFCC_SLICE = slice(8, 8 + N_MFCC)


@dataclass(frozen=True)
class ShortTermFrame:
    """Base features of one window and their backward difference to the previous window."""

    base: np.ndarray
    delta: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.base, self.delta])


@dataclass(frozen=True)
class LongTermVector:
    """136-d summary: [mean of (base‖delta) ‖ std of (base‖delta)]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (N_LONG_TERM,):
            raise DomainError(component="features.audio", message=f"LongTermVector must have {N_LONG_TERM} values, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def mean(self) -> np.ndarray:
        return self.values[: 2 * N_BASE]

    @property
    def std(self) -> np.ndarray:
        return self.values[2 * N_BASE:]


# ─────────────────────────────────────────────
# FILTER BANKS (cached per sample rate / frame size)
# ─────────────────────────────────────────────

@functools.lru_cache(maxsize=32)
def _mel_bank(sample_rate: int, n_fft: int) -> np.ndarray:
    return librosa.filters.mel(
        sr=sample_rate, n_fft=n_fft, n_mels=N_MELS, fmin=0.0, fmax=sample_rate / 2, norm=None
    )


@functools.lru_cache(maxsize=32)
def _chroma_map(sample_rate: int, n_fft: int) -> np.ndarray:
    n_bins = n_fft // 2 + 1
    mapping = np.zeros((N_CHROMA, n_bins))
    freqs = np.arange(1, n_bins) * sample_rate / n_fft
    pitch_class = np.mod(np.round(12 * np.log2(freqs / 440.0)) + 69, N_CHROMA).astype(int)
    mapping[pitch_class, np.arange(1, n_bins)] = 1.0
    return mapping


# ─────────────────────────────────────────────
# PER-FRAME FEATURES (vectorised over frames)
# ─────────────────────────────────────────────

def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _entropy_of_blocks(energies: np.ndarray, n_blocks: int) -> np.ndarray:
    """Shannon entropy (bits) of the energy share of n_blocks equal blocks per row."""
    block = energies.shape[1] // n_blocks
    blocks = energies[:, : block * n_blocks].reshape(energies.shape[0], n_blocks, block).sum(axis=2)
    share = _safe_ratio(blocks, blocks.sum(axis=1, keepdims=True))
    logs = np.zeros_like(share)
    np.log2(share, out=logs, where=share > 0)
    return -(share * logs).sum(axis=1)


def _frame_features(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    n_frames, win_len = frames.shape
    features = np.empty((n_frames, N_BASE))

    signs = np.sign(frames)
    features[:, 0] = np.abs(np.diff(signs, axis=1)).sum(axis=1) / 2.0 / (win_len - 1)
    sample_energy = frames ** 2
    features[:, 1] = sample_energy.sum(axis=1) / win_len
    features[:, 2] = _entropy_of_blocks(sample_energy, N_SUBBANDS)

    window = scipy.signal.get_window("hamming", win_len)
    spectrum = np.fft.rfft(frames * window, axis=1)
    magnitude = np.abs(spectrum) / win_len
    power = np.abs(spectrum) ** 2
    freqs = np.arange(magnitude.shape[1]) / win_len

    mag_sum = magnitude.sum(axis=1)
    centroid = _safe_ratio((magnitude * freqs).sum(axis=1), mag_sum)
    spread = np.sqrt(_safe_ratio((magnitude * (freqs - centroid[:, None]) ** 2).sum(axis=1), mag_sum))
    features[:, 3] = centroid
    features[:, 4] = spread
    features[:, 5] = _entropy_of_blocks(power, N_SUBBANDS)

    normalised = _safe_ratio(magnitude, mag_sum[:, None])
    flux = np.zeros(n_frames)
    flux[1:] = ((normalised[1:] - normalised[:-1]) ** 2).sum(axis=1)
    features[:, 6] = flux

    cumulative = np.cumsum(power, axis=1)
    total = cumulative[:, -1]
    rolloff_bin = np.argmax(cumulative >= ROLLOFF_FRACTION * total[:, None], axis=1)
    features[:, 7] = np.where(total > 0, rolloff_bin / win_len, 0.0)

    mel_energy = power @ _mel_bank(sample_rate, win_len).T
    log_mel = np.log(np.maximum(mel_energy, LOG_FLOOR))
    features[:, _MFCC_SLICE] = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, :N_MFCC]

    chroma = power @ _chroma_map(sample_rate, win_len).T
    chroma = _safe_ratio(chroma, chroma.sum(axis=1, keepdims=True))
    features[:, 8 + N_MFCC: 8 + N_MFCC + N_CHROMA] = chroma
    features[:, -1] = chroma.std(axis=1)
    return features


# ─────────────────────────────────────────────
# PUBLIC API
# ─────────────────────────────────────────────

def frame_count(n_samples: int, win_len: int, hop_len: int) -> int:
    """1 + floor((len − win_len) / hop_len) for len ≥ win_len."""
    return 1 + (n_samples - win_len) // hop_len


def short_term_features(
    clip: AudioClip,
    window: float = DEFAULT_WINDOW,
    hop: float = DEFAULT_HOP,
) -> list[ShortTermFrame]:
    """
    Compute per-window base features and their backward deltas.

    Args:
        clip: Mono audio clip
        window: Window length in seconds (default 50 ms)
        hop: Hop length in seconds (default 25 ms)

    Returns:
        One ShortTermFrame per window; the first frame's delta is zero.

    Raises:
        DomainError: Non-positive window or hop
        TooShortError: Clip shorter than one window
    """
    win_len = int(round(window * clip.sample_rate))
    hop_len = int(round(hop * clip.sample_rate))
    if win_len < 2 or hop_len < 1:
        raise DomainError(
            component="features.audio",
            message="Window must span at least 2 samples and hop at least 1",
            details={"win_len": win_len, "hop_len": hop_len},
        )
    if len(clip) < win_len:
        raise TooShortError(
            component="features.audio",
            message=f"Clip of {clip.duration:.4f}s is shorter than one {window}s window",
            details={"samples": len(clip), "win_len": win_len},
        )

    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, win_len)[::hop_len]
    base = _frame_features(np.ascontiguousarray(frames), clip.sample_rate)
    delta = np.zeros_like(base)
    delta[1:] = np.diff(base, axis=0)
    return [ShortTermFrame(base=b, delta=d) for b, d in zip(base, delta)]


def aggregate_long_term(frames: Sequence[ShortTermFrame]) -> LongTermVector:
    """
    Mean and population std of the 68 per-frame values.

    Raises:
        DomainError: Empty frame sequence
    """
    if len(frames) == 0:
        raise DomainError(component="features.audio", message="Cannot aggregate an empty frame sequence")
    table = np.stack([frame.as_vector() for frame in frames])
    return LongTermVector(values=np.concatenate([table.mean(axis=0), table.std(axis=0)]))


def classical_features(clip: AudioClip) -> LongTermVector:
    """136-d long-term vector with the default 50 ms window and 25 ms hop."""
    return aggregate_long_term(short_term_features(clip))


def classical_feature_matrix(clips: Sequence[AudioClip]) -> np.ndarray:
    """Stack classical_features of several clips into an n×136 matrix."""
    return np.stack([classical_features(clip).values for clip in clips])


def write_frame_table(frames: Sequence[ShortTermFrame], path: str | Path) -> None:
    """Dump the per-frame table (one row per frame, 68 named columns) as CSV."""
    table = pd.DataFrame([frame.as_vector() for frame in frames], columns=list(FRAME_COLUMNS))
    table.to_csv(Path(path), index=False, float_format="%.10g")
