"""
Container capacity from two calibrated silhouettes.

Per frame:
    1. centroid of each camera's foreground mask
    2. back-project both centroids and take the midpoint of the shortest
       segment between the rays as the 3D centroid X
    3. fit an upright cylinder around X: a stack of horizontal rings, each
       shrunk from r_max until its sampled circle projects inside the
       foreground of BOTH masks
    4. C = r̄² · h · π, with r̄ the mean non-zero ring radius and h the
       number of non-zero rings times the ring spacing (m³ → mL)

A sequence averages the frames that succeed and falls back to the training
prior when none do.

World frame is metric with +z up; cameras follow x_cam = R · x_world + t
with the pinhole model u = fx·x/z + cx, v = fy·y/z + cy.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.manifest import ManifestRecord
from src.models.media import CameraCalibration, MaskImage
from src.utils.exceptions import DegenerateGeometryError, DomainError, NoDetectionError

logger = logging.getLogger(__name__)

MIN_RAY_ANGLE_DEG = 0.5
FRAMES_FROM_END = 20
M3_TO_ML = 1e6


class FitConfig(BaseModel):
    """Cylinder fitting constants (metres)."""

    model_config = ConfigDict(frozen=True)

    r_max: float = Field(default=0.15, gt=0)
    half_height: float = Field(default=0.15, gt=0)
    ring_spacing: float = Field(default=0.005, gt=0)
    shrink_step: float = Field(default=0.002, gt=0)
    r_min: float = Field(default=0.005, gt=0)
    n_angles: int = Field(default=72, ge=3)
    # bisection steps after the coarse shrink; 0 keeps radii on the r_max − kδ grid
    refine_steps: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_radii(self) -> "FitConfig":
        if self.r_min >= self.r_max:
            raise ValueError(f"r_min ({self.r_min}) must be below r_max ({self.r_max})")
        return self

    @property
    def n_rings(self) -> int:
        return int(round(2 * self.half_height / self.ring_spacing)) + 1

    def coarse_radii(self) -> np.ndarray:
        """r_max, r_max − δ, … down to the last value ≥ r_min."""
        count = int(math.floor((self.r_max - self.r_min) / self.shrink_step + 1e-9)) + 1
        return self.r_max - np.arange(count) * self.shrink_step


@dataclass(frozen=True)
class Centroid2D:
    u: float
    v: float


@dataclass(frozen=True)
class Centroid3D:
    X: np.ndarray


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True)
class RingFit:
    """
    Outcome of one ring.

    Attributes:
        z: ring height (world)
        radius: accepted radius, 0 when nothing down to r_min fits
        trace: coarse radii tried, in order, ending at the accepted one
    """

    z: float
    radius: float
    trace: tuple[float, ...]


@dataclass
class CylinderModel:
    axis_point: np.ndarray
    ring_z: np.ndarray
    ring_r: np.ndarray
    ring_spacing: float
    rings: list[RingFit] = field(default_factory=list, repr=False)

    @property
    def is_empty(self) -> bool:
        return not np.any(self.ring_r > 0)

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.ring_r > 0))


@dataclass(frozen=True)
class CapacityEstimate:
    capacity: float
    used_prior: bool
    r_bar: float
    h: float
    frames_used: int = 0
    failures: tuple[str, ...] = ()


# ─────────────────────────────────────────────
# PROJECTIVE GEOMETRY
# ─────────────────────────────────────────────

def mask_centroid(mask: MaskImage) -> Optional[Centroid2D]:
    """Mean foreground pixel centre, or None for an empty mask."""
    rows, cols = np.nonzero(mask.foreground)
    if rows.size == 0:
        return None
    return Centroid2D(u=float(cols.mean() + 0.5), v=float(rows.mean() + 0.5))


def backproject_ray(calib: CameraCalibration, centroid: Centroid2D) -> Ray:
    d_cam = np.array([(centroid.u - calib.cx) / calib.fx, (centroid.v - calib.cy) / calib.fy, 1.0])
    return Ray(origin=calib.center, direction=calib.R.T @ (d_cam / np.linalg.norm(d_cam)))


def triangulate_midpoint(ray1: Ray, ray2: Ray) -> Centroid3D:
    """
    Midpoint of the common perpendicular between two rays.

    Raises:
        DegenerateGeometryError: Rays closer than 0.5° to parallel
    """
    d1 = ray1.direction / np.linalg.norm(ray1.direction)
    d2 = ray2.direction / np.linalg.norm(ray2.direction)
    b = float(d1 @ d2)
    if abs(b) > math.cos(math.radians(MIN_RAY_ANGLE_DEG)):
        raise DegenerateGeometryError(
            component="geometry.capacity",
            message="Rays are nearly parallel",
            details={"angle_deg": math.degrees(math.acos(min(1.0, abs(b))))},
        )
    w0 = ray1.origin - ray2.origin
    d = float(d1 @ w0)
    e = float(d2 @ w0)
    denom = 1.0 - b * b
    s = (b * e - d) / denom
    t = (e - b * d) / denom
    p1 = ray1.origin + s * d1
    p2 = ray2.origin + t * d2
    return Centroid3D(X=(p1 + p2) / 2.0)


def project_points(calib: CameraCalibration, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Pinhole projection of world points (…×3).

    Returns:
        (uv …×2, depth …); uv is NaN where depth ≤ 0
    """
    cam = points @ calib.R.T + calib.t
    depth = cam[..., 2]
    safe = np.where(depth > 0, depth, np.nan)
    u = calib.fx * cam[..., 0] / safe + calib.cx
    v = calib.fy * cam[..., 1] / safe + calib.cy
    return np.stack([u, v], axis=-1), depth


def _inside(mask: MaskImage, calib: CameraCalibration, points: np.ndarray) -> np.ndarray:
    """True where a point projects in front of the camera onto a foreground pixel."""
    uv, depth = project_points(calib, points)
    with np.errstate(invalid="ignore"):
        cols = np.floor(uv[..., 0])
        rows = np.floor(uv[..., 1])
        valid = (depth > 0) & (cols >= 0) & (cols < mask.width) & (rows >= 0) & (rows < mask.height)
    out = np.zeros(depth.shape, dtype=bool)
    out[valid] = mask.foreground[rows[valid].astype(np.int64), cols[valid].astype(np.int64)]
    return out


# ─────────────────────────────────────────────
# CYLINDER FIT
# ─────────────────────────────────────────────

def _circle_points(center: np.ndarray, ring_z: np.ndarray, radii: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Points of shape ring_z.shape + radii-broadcast + (n_angles, 3)."""
    cos, sin = np.cos(angles), np.sin(angles)
    x = center[0] + radii[..., None] * cos
    y = center[1] + radii[..., None] * sin
    z = np.broadcast_to(ring_z.reshape(ring_z.shape + (1,) * (x.ndim - ring_z.ndim)), x.shape)
    return np.stack([x, y, z], axis=-1)


def _rings_fit(
    masks: Sequence[MaskImage],
    calibs: Sequence[CameraCalibration],
    center: np.ndarray,
    ring_z: np.ndarray,
    radii: np.ndarray,
    angles: np.ndarray,
) -> np.ndarray:
    points = _circle_points(center, ring_z, radii, angles)
    ok = np.ones(points.shape[:-2], dtype=bool)
    for mask, calib in zip(masks, calibs):
        ok &= _inside(mask, calib, points).all(axis=-1)
    return ok


def fit_cylinder(
    masks: Sequence[MaskImage],
    calibs: Sequence[CameraCalibration],
    X: Centroid3D,
    cfg: FitConfig,
) -> CylinderModel:
    """
    Fit a vertical stack of rings around X against every silhouette.

    Points behind a camera count as outside. Only the contiguous run of
    non-zero rings containing the centre ring is kept.

    Raises:
        DomainError: Mask/calibration count mismatch or an empty mask
    """
    if len(masks) != len(calibs) or not masks:
        raise DomainError(component="geometry.capacity", message="Need one calibration per mask")
    if any(mask.is_empty() for mask in masks):
        raise DomainError(component="geometry.capacity", message="fit_cylinder requires non-empty masks")

    center = np.asarray(X.X, dtype=np.float64)
    n_rings = cfg.n_rings
    ring_z = center[2] + (np.arange(n_rings) - (n_rings - 1) / 2.0) * cfg.ring_spacing
    angles = np.linspace(0.0, 2.0 * np.pi, cfg.n_angles, endpoint=False)

    coarse = cfg.coarse_radii()
    ok = _rings_fit(masks, calibs, center, ring_z, np.broadcast_to(coarse, (n_rings, coarse.size)), angles)
    accepted = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    radius = np.where(accepted, coarse[first], 0.0)

    lo = radius.copy()
    hi = np.where(accepted & (first > 0), lo + cfg.shrink_step, lo)
    for _ in range(cfg.refine_steps):
        refining = hi > lo
        if not refining.any():
            break
        mid = (lo + hi) / 2.0
        mid_ok = _rings_fit(masks, calibs, center, ring_z, mid, angles)
        lo = np.where(refining & mid_ok, mid, lo)
        hi = np.where(refining & ~mid_ok, mid, hi)
    radius = lo

    rings = [
        RingFit(
            z=float(ring_z[j]),
            radius=float(radius[j]),
            trace=tuple(float(r) for r in coarse[: (first[j] + 1) if accepted[j] else coarse.size]),
        )
        for j in range(n_rings)
    ]

    kept = np.zeros(n_rings)
    centre = n_rings // 2
    if radius[centre] > 0:
        lo_idx = centre
        while lo_idx > 0 and radius[lo_idx - 1] > 0:
            lo_idx -= 1
        hi_idx = centre
        while hi_idx < n_rings - 1 and radius[hi_idx + 1] > 0:
            hi_idx += 1
        kept[lo_idx: hi_idx + 1] = radius[lo_idx: hi_idx + 1]

    return CylinderModel(axis_point=center, ring_z=ring_z, ring_r=kept, ring_spacing=cfg.ring_spacing, rings=rings)


def capacity_from_cylinder(model: CylinderModel) -> tuple[float, float, float]:
    """
    (r̄, h, capacity in mL) with C = r̄² · h · π.

    Raises:
        NoDetectionError: No non-zero ring
    """
    if model.is_empty:
        raise NoDetectionError(component="geometry.capacity", message="Cylinder model has no non-zero ring")
    nonzero = model.ring_r[model.ring_r > 0]
    r_bar = float(nonzero.mean())
    h = nonzero.size * model.ring_spacing
    return r_bar, h, r_bar ** 2 * h * math.pi * M3_TO_ML


# ─────────────────────────────────────────────
# SEQUENCE LEVEL
# ─────────────────────────────────────────────

def select_frames(total_frames: int) -> tuple[int, int]:
    """First frame and the 20th-to-last frame, clamped at 0."""
    if total_frames < 1:
        raise DomainError(component="geometry.capacity", message=f"total_frames must be ≥ 1, got {total_frames}")
    return 0, max(0, total_frames - FRAMES_FROM_END)


def estimate_capacity_frame(
    masks: Sequence[MaskImage],
    calibs: Sequence[CameraCalibration],
    cfg: FitConfig,
) -> tuple[float, float, float]:
    """
    Centroid → triangulation → fit → capacity for one frame.

    Raises:
        NoDetectionError: An empty mask or an empty cylinder
        DegenerateGeometryError: Nearly parallel centroid rays
    """
    if len(masks) != 2 or len(calibs) != 2:
        raise DomainError(component="geometry.capacity", message="Capacity estimation uses exactly two cameras")
    centroids = [mask_centroid(mask) for mask in masks]
    if any(c is None for c in centroids):
        raise NoDetectionError(component="geometry.capacity", message="Object not detected in at least one view")
    rays = [backproject_ray(calib, c) for calib, c in zip(calibs, centroids)]
    X = triangulate_midpoint(rays[0], rays[1])
    return capacity_from_cylinder(fit_cylinder(masks, calibs, X, cfg))


def estimate_capacity_sequence(
    frame_pairs: Sequence[Sequence[MaskImage]],
    calibs: Sequence[CameraCalibration],
    prior_ml: float,
    cfg: Optional[FitConfig] = None,
) -> CapacityEstimate:
    """
    Average capacity over the frames that succeed; prior when none does.

    Args:
        frame_pairs: per selected frame, one mask per camera
        calibs: one calibration per camera
        prior_ml: fallback capacity (> 0)
    """
    if prior_ml <= 0:
        raise DomainError(component="geometry.capacity", message=f"prior_ml must be > 0, got {prior_ml}")
    cfg = cfg or FitConfig()

    results: list[tuple[float, float, float]] = []
    failures: list[str] = []
    for index, masks in enumerate(frame_pairs):
        try:
            results.append(estimate_capacity_frame(masks, calibs, cfg))
        except (NoDetectionError, DegenerateGeometryError) as e:
            failures.append(f"frame {index}: {e.message}")
            logger.debug("capacity frame %d failed: %s", index, e)

    if not results:
        return CapacityEstimate(capacity=prior_ml, used_prior=True, r_bar=0.0, h=0.0, failures=tuple(failures))
    r_bars, heights, capacities = zip(*results)
    return CapacityEstimate(
        capacity=float(np.mean(capacities)),
        used_prior=False,
        r_bar=float(np.mean(r_bars)),
        h=float(np.mean(heights)),
        frames_used=len(results),
        failures=tuple(failures),
    )


def capacity_prior(records: Iterable[ManifestRecord], fallback_ml: float) -> float:
    """Mean labelled capacity over records, or fallback_ml when none is labelled (or all are 0)."""
    capacities = [r.labels.capacity_ml for r in records if r.labels is not None]
    prior = float(np.mean(capacities)) if capacities else 0.0
    return prior if prior > 0 else float(fallback_ml)
