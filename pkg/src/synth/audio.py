"""
Class-conditioned pouring sounds.

    empty : white noise floor, amplitude 1e-4
    water : noise low-passed at 1 kHz, 2 Hz amplitude modulation, rms 0.1
    rice  : sparse Poisson impacts (200/s), each ringing at 4 kHz with 3 ms decay, peak 0.5
    pasta : sparse Poisson impacts (30/s), each ringing at 1.5 kHz with 10 ms decay, peak 0.8

An impact is one signed spike in an otherwise zero train; the train is
convolved with a damped cosine ringing at the class frequency.

With level_percent set, the pour occupies the first 0.3 + 0.6·level/100 of the
clip and the rest is the empty floor, so the clip also carries level evidence.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.signal

from src.models.labels import FillingType
from src.models.media import AudioClip
from src.utils.exceptions import DomainError

MIN_DURATION = 0.5
FLOOR_AMPLITUDE = 1e-4
WATER_CUTOFF_HZ = 1000.0
WATER_AM_HZ = 2.0
WATER_RMS = 0.1

# filling type → (impacts per second, ring decay seconds, ring frequency Hz, peak amplitude)
IMPACT_PARAMS = {
    FillingType.RICE: (200.0, 0.003, 4000.0, 0.5),
    FillingType.PASTA: (30.0, 0.010, 1500.0, 0.8),
}


@dataclass(frozen=True)
class AudioSpec:
    filling_type: FillingType
    duration: float = 2.0
    sample_rate: int = 16000
    seed: int = 0
    level_percent: Optional[int] = None

    def __post_init__(self) -> None:
        if self.duration < MIN_DURATION:
            raise DomainError(component="synth.audio", message=f"duration must be ≥ {MIN_DURATION}s, got {self.duration}")
        if self.sample_rate <= 0:
            raise DomainError(component="synth.audio", message="sample_rate must be positive")

    @property
    def active_fraction(self) -> float:
        if self.level_percent is None:
            return 1.0
        return 0.3 + 0.6 * self.level_percent / 100.0


def _water(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    sos = scipy.signal.butter(4, WATER_CUTOFF_HZ, btype="low", fs=sample_rate, output="sos")
    noise = scipy.signal.sosfiltfilt(sos, rng.standard_normal(n))
    t = np.arange(n) / sample_rate
    signal = noise * (1.0 + 0.5 * np.sin(2 * np.pi * WATER_AM_HZ * t + rng.uniform(0, 2 * np.pi)))
    rms = np.sqrt(np.mean(signal ** 2))
    return signal * (WATER_RMS / rms) if rms > 0 else signal


def impact_train(n: int, sample_rate: int, rng: np.random.Generator, rate: float, amplitude: float) -> np.ndarray:
    """Sparse spike train: Poisson impact times, random sign, magnitude in [amplitude/2, amplitude]."""
    train = np.zeros(n)
    count = rng.poisson(rate * n / sample_rate)
    positions = rng.integers(0, n, size=count)
    magnitudes = amplitude * rng.uniform(0.5, 1.0, count) * rng.choice((-1.0, 1.0), count)
    np.add.at(train, positions, magnitudes)
    return train


def impact_kernel(sample_rate: int, decay: float, ring_hz: float) -> np.ndarray:
    """Ring of one grain hitting the container; peak 1 at the first sample."""
    t = np.arange(max(1, int(round(5 * decay * sample_rate)))) / sample_rate
    return np.exp(-t / decay) * np.cos(2 * np.pi * ring_hz * t)


def _impacts(n: int, sample_rate: int, rng: np.random.Generator, params: tuple[float, float, float, float]) -> np.ndarray:
    rate, decay, ring_hz, amplitude = params
    train = impact_train(n, sample_rate, rng, rate, amplitude)
    return scipy.signal.fftconvolve(train, impact_kernel(sample_rate, decay, ring_hz))[:n]


def synth_audio(spec: AudioSpec) -> AudioClip:
    """Deterministic clip for (filling type, duration, rate, seed, level)."""
    n = int(round(spec.duration * spec.sample_rate))
    rng = np.random.default_rng(spec.seed)
    samples = rng.uniform(-FLOOR_AMPLITUDE, FLOOR_AMPLITUDE, n)

    filling_type = FillingType(spec.filling_type)
    if filling_type != FillingType.EMPTY:
        active = max(1, int(round(spec.active_fraction * n)))
        if filling_type == FillingType.WATER:
            pour = _water(active, spec.sample_rate, rng)
        else:
            pour = _impacts(active, spec.sample_rate, rng, IMPACT_PARAMS[filling_type])
        samples[:active] += pour

    return AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=spec.sample_rate)
