"""
WAV reading and writing.

A thin wrapper around scipy.io.wavfile that normalises every supported PCM
encoding to mono float64 in [-1, 1]:
    - int16 / int32: divided by the type maximum (32767 → 1.0 exactly)
    - uint8: centred at 128 and divided by 127
    - float32: taken as is
Multi-channel clips are downmixed by the arithmetic channel mean.
"""

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from src.models.media import AudioClip
from src.utils.exceptions import MediaFormatError, UnsupportedEncodingError

_MAX_CHANNELS = 8
_SCALE = {
    np.dtype(np.int16): float(np.iinfo(np.int16).max),
    np.dtype(np.int32): float(np.iinfo(np.int32).max),
}


def _check_riff_header(path: Path) -> None:
    with path.open("rb") as fh:
        header = fh.read(12)
    if len(header) < 12 or header[:4] not in (b"RIFF", b"RIFX") or header[8:12] != b"WAVE":
        raise MediaFormatError(
            component="media.wav",
            message="Not a RIFF/WAVE file",
            details={"path": str(path), "header": header[:12].hex()},
        )


def _to_float(data: np.ndarray, path: Path) -> np.ndarray:
    if data.dtype in _SCALE:
        return data.astype(np.float64) / _SCALE[data.dtype]
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 127.0
    if data.dtype == np.float32:
        return data.astype(np.float64)
    raise UnsupportedEncodingError(
        component="media.wav",
        message=f"Unsupported sample type {data.dtype}",
        details={"path": str(path)},
    )


def read_wav(path: str | Path) -> AudioClip:
    """
    Read a PCM WAV file (8/16/32-bit integer or 32-bit float, 1–8 channels).

    Args:
        path: WAV file path

    Returns:
        Mono AudioClip with samples in [-1, 1]

    Raises:
        MediaFormatError: Malformed or truncated file
        UnsupportedEncodingError: Encoding or channel count not supported
    """
    path = Path(path)
    _check_riff_header(path)
    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as e:
        text = str(e).lower()
        if "unknown" in text or "unsupported" in text or "bit depth" in text:
            raise UnsupportedEncodingError(component="media.wav", message=str(e), details={"path": str(path)}) from e
        raise MediaFormatError(component="media.wav", message=str(e), details={"path": str(path)}) from e
    except EOFError as e:
        raise MediaFormatError(component="media.wav", message="Truncated WAV payload", details={"path": str(path)}) from e

    if data.ndim == 2:
        if not 1 <= data.shape[1] <= _MAX_CHANNELS:
            raise UnsupportedEncodingError(
                component="media.wav",
                message=f"{data.shape[1]} channels, at most {_MAX_CHANNELS} supported",
                details={"path": str(path)},
            )
        samples = _to_float(data, path).mean(axis=1)
    else:
        samples = _to_float(data, path)

    return AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=int(sample_rate))


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono (samples rounded to the nearest code)."""
    codes = np.round(clip.samples * _SCALE[np.dtype(np.int16)]).astype(np.int16)
    wavfile.write(Path(path), clip.sample_rate, codes)
