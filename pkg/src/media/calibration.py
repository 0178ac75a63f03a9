"""
Camera calibration JSON.

Document shape (world→camera convention, x_cam = R · x_world + t):
    {"fx": 800, "fy": 800, "cx": 320, "cy": 240,
     "R": [r11, r12, r13, r21, r22, r23, r31, r32, r33],
     "t": [tx, ty, tz]}

Missing keys are format errors; bad values (non-positive focal length,
non-orthonormal R, reflections) are validation errors.
"""

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.models.media import CameraCalibration
from src.utils.exceptions import MediaFormatError, MediaValidationError

ORTHONORMAL_TOLERANCE = 1e-6


class CalibrationDocument(BaseModel):
    """On-disk calibration schema."""

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    R: list[float] = Field(min_length=9, max_length=9)
    t: list[float] = Field(min_length=3, max_length=3)


def read_calibration(path: str | Path) -> CameraCalibration:
    """
    Load and validate one camera calibration.

    Raises:
        MediaFormatError: Not JSON, or a required key is missing
        MediaValidationError: Values violate CameraCalibration invariants
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MediaFormatError(component="media.calibration", message=f"Invalid JSON: {e}", details={"path": str(path)}) from e

    try:
        doc = CalibrationDocument.model_validate(raw)
    except ValidationError as e:
        errors = e.errors()
        missing = [".".join(str(p) for p in err["loc"]) for err in errors if err["type"] == "missing"]
        if missing or not isinstance(raw, dict):
            raise MediaFormatError(
                component="media.calibration",
                message=f"Missing key(s): {', '.join(missing) or '<document is not an object>'}",
                details={"path": str(path)},
            ) from e
        raise MediaValidationError(
            component="media.calibration",
            message="; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in errors),
            details={"path": str(path)},
        ) from e

    return CameraCalibration(
        fx=doc.fx,
        fy=doc.fy,
        cx=doc.cx,
        cy=doc.cy,
        R=np.array(doc.R).reshape(3, 3),
        t=np.array(doc.t),
        tolerance=ORTHONORMAL_TOLERANCE,
    )


def write_calibration(path: str | Path, calib: CameraCalibration) -> None:
    doc = {
        "fx": calib.fx,
        "fy": calib.fy,
        "cx": calib.cx,
        "cy": calib.cy,
        "R": [float(v) for v in calib.R.reshape(-1)],
        "t": [float(v) for v in calib.t],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
