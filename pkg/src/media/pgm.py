"""
PGM mask reading and writing.

Masks travel as PGM so no image codec is needed: binary P5 or ASCII P2,
maxval up to 65535 (16-bit P5 payloads are big-endian). A pixel is
foreground when its value is ≥ threshold; the default threshold is maxval/2.
"""

import re
from pathlib import Path

import numpy as np

from src.models.media import MaskImage
from src.utils.exceptions import MediaFormatError, MediaValidationError

_COMMENT = re.compile(rb"#[^\n\r]*")
_MAX_MAXVAL = 65535


def _header_tokens(raw: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, skipping # comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise MediaFormatError(component="media.pgm", message="Truncated PGM header")
        if raw[pos:pos + 1] == b"#":
            match = _COMMENT.match(raw, pos)
            pos = match.end()
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(raw[start:pos])
    return tokens, pos


def _parse_int(token: bytes, name: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise MediaFormatError(component="media.pgm", message=f"Bad {name} in header: {token!r}") from None
    if value <= 0:
        raise MediaFormatError(component="media.pgm", message=f"{name} must be positive, got {value}")
    return value


def read_pgm_mask(path: str | Path, threshold: float | None = None) -> MaskImage:
    """
    Read a PGM (P5 or P2) and binarise it.

    Args:
        path: PGM file path
        threshold: foreground iff value ≥ threshold; must lie in (0, maxval).
            Defaults to maxval / 2.

    Returns:
        MaskImage

    Raises:
        MediaFormatError: Non-PGM magic, bad header or truncated payload
        MediaValidationError: Threshold outside (0, maxval)
    """
    path = Path(path)
    raw = path.read_bytes()
    magic = raw[:2]
    if magic not in (b"P5", b"P2"):
        raise MediaFormatError(
            component="media.pgm",
            message=f"Not a PGM file (magic {magic!r})",
            details={"path": str(path)},
        )

    tokens, end = _header_tokens(raw[2:], 3)
    width = _parse_int(tokens[0], "width")
    height = _parse_int(tokens[1], "height")
    maxval = _parse_int(tokens[2], "maxval")
    if maxval > _MAX_MAXVAL:
        raise MediaFormatError(component="media.pgm", message=f"maxval {maxval} exceeds {_MAX_MAXVAL}")

    if threshold is None:
        threshold = maxval / 2
    if not 0 < threshold < maxval:
        raise MediaValidationError(
            component="media.pgm",
            message=f"threshold must lie in (0, {maxval}), got {threshold}",
            details={"path": str(path)},
        )

    n_pixels = width * height
    payload = raw[2 + end + 1:]
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        needed = n_pixels * dtype.itemsize
        if len(payload) < needed:
            raise MediaFormatError(
                component="media.pgm",
                message=f"Truncated payload: {len(payload)} of {needed} bytes",
                details={"path": str(path)},
            )
        values = np.frombuffer(payload[:needed], dtype=dtype).astype(np.int64)
    else:
        fields = _COMMENT.sub(b" ", raw[2 + end:]).split()
        if len(fields) < n_pixels:
            raise MediaFormatError(
                component="media.pgm",
                message=f"Truncated payload: {len(fields)} of {n_pixels} values",
                details={"path": str(path)},
            )
        try:
            values = np.array([int(f) for f in fields[:n_pixels]], dtype=np.int64)
        except ValueError as e:
            raise MediaFormatError(component="media.pgm", message=f"Non-integer pixel value: {e}") from e

    return MaskImage(foreground=(values >= threshold).reshape(height, width))


def write_pgm_mask(path: str | Path, mask: MaskImage) -> None:
    """Write a mask as binary P5, maxval 255 (foreground 255, background 0)."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = np.where(mask.foreground, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)
