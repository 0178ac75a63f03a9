"""
Synthetic stereo scenes: an upright solid cylinder seen by two pinhole cameras.

Masks are exact: a pixel is foreground iff the ray through its centre hits the
solid cylinder (side wall or caps). Cameras are built with look_at_calibration
so they sit at the cylinder's centre height and look at its centre.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.models.media import CameraCalibration, MaskImage
from src.utils.exceptions import DomainError, SynthesisError

DEFAULT_IMAGE_SIZE = (640, 480)
DEFAULT_FOCAL = 800.0


@dataclass(frozen=True)
class SceneSpec:
    """
    Attributes:
        radius, height: cylinder size in metres
        center: cylinder centre (world, +z up)
        calibs: the two cameras
        image_size: (width, height) in pixels
    """

    radius: float
    height: float
    center: np.ndarray
    calibs: tuple[CameraCalibration, ...]
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.radius > 0 and self.height > 0):
            raise DomainError(component="synth.scene", message=f"Cylinder needs r, h > 0, got r={self.radius}, h={self.height}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))

    @property
    def capacity_ml(self) -> float:
        return math.pi * self.radius ** 2 * self.height * 1e6


def look_at_calibration(
    position: Sequence[float],
    target: Sequence[float],
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    focal: float = DEFAULT_FOCAL,
) -> CameraCalibration:
    """Camera at position with its optical axis through target; image rows point down (−z)."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, [0.0, 0.0, 1.0])
    if np.linalg.norm(right) < 1e-9:
        raise SynthesisError(component="synth.scene", message="Camera cannot look straight up or down")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    width, height = image_size
    return CameraCalibration(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, R=R, t=-R @ position)


def make_rig(
    target: Sequence[float],
    distance: float,
    azimuths_deg: Sequence[float],
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    focal: float = DEFAULT_FOCAL,
) -> tuple[CameraCalibration, ...]:
    """Horizontal cameras on a circle around target, one per azimuth."""
    target = np.asarray(target, dtype=np.float64)
    calibs = []
    for azimuth in azimuths_deg:
        a = math.radians(azimuth)
        position = target + distance * np.array([math.cos(a), math.sin(a), 0.0])
        calibs.append(look_at_calibration(position, target, image_size, focal))
    return tuple(calibs)


def make_scene(
    rng: np.random.Generator,
    radius: Optional[float] = None,
    height: Optional[float] = None,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    focal: float = DEFAULT_FOCAL,
) -> SceneSpec:
    """
    Random scene: cylinder standing on z = 0 with r ∈ [0.02, 0.06] m and
    h ∈ [0.06, 0.20] m unless given, two cameras 60°–90° apart at 0.9–1.1 m.
    """
    radius = float(rng.uniform(0.02, 0.06)) if radius is None else radius
    height = float(rng.uniform(0.06, 0.20)) if height is None else height
    center = np.array([0.0, 0.0, height / 2.0])
    distance = float(rng.uniform(0.9, 1.1))
    first = float(rng.uniform(0.0, 360.0))
    separation = float(rng.uniform(60.0, 90.0))
    calibs = make_rig(center, distance, (first, first + separation), image_size, focal)
    return SceneSpec(radius=radius, height=height, center=center, calibs=calibs, image_size=image_size)


def _hit_mask(scene: SceneSpec, calib: CameraCalibration) -> np.ndarray:
    width, height = scene.image_size
    u, v = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    d_cam = np.stack([(u - calib.cx) / calib.fx, (v - calib.cy) / calib.fy, np.ones_like(u)], axis=-1)
    d = d_cam @ calib.R
    o = calib.center - scene.center

    # side wall: (ox + s·dx)² + (oy + s·dy)² ≤ r²
    a = d[..., 0] ** 2 + d[..., 1] ** 2
    b = 2.0 * (o[0] * d[..., 0] + o[1] * d[..., 1])
    c = o[0] ** 2 + o[1] ** 2 - scene.radius ** 2
    disc = b * b - 4.0 * a * c
    hits_wall = (a > 0) & (disc >= 0)
    root = np.sqrt(np.where(hits_wall, disc, 0.0))
    safe_a = np.where(a > 0, a, 1.0)
    s_lo = np.where(hits_wall, (-b - root) / (2.0 * safe_a), np.where(c <= 0, -np.inf, np.inf))
    s_hi = np.where(hits_wall, (-b + root) / (2.0 * safe_a), np.where(c <= 0, np.inf, -np.inf))

    # slab between the caps: −h/2 ≤ oz + s·dz ≤ h/2
    half = scene.height / 2.0
    dz = d[..., 2]
    safe_dz = np.where(dz != 0, dz, 1.0)
    t1 = (-half - o[2]) / safe_dz
    t2 = (half - o[2]) / safe_dz
    inside_slab = abs(o[2]) <= half
    z_lo = np.where(dz != 0, np.minimum(t1, t2), -np.inf if inside_slab else np.inf)
    z_hi = np.where(dz != 0, np.maximum(t1, t2), np.inf if inside_slab else -np.inf)

    lo = np.maximum(s_lo, z_lo)
    hi = np.minimum(s_hi, z_hi)
    return (lo <= hi) & (hi > 0)


def render_cylinder_masks(scene: SceneSpec) -> tuple[MaskImage, ...]:
    """
    One exact silhouette per camera.

    Raises:
        SynthesisError: The cylinder lies entirely behind a camera
    """
    half = scene.height / 2.0
    corners = np.array(
        [[sx * scene.radius, sy * scene.radius, sz * half] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    ) + scene.center
    masks = []
    for index, calib in enumerate(scene.calibs, start=1):
        depth = (corners @ calib.R.T + calib.t)[:, 2]
        if np.all(depth <= 0):
            raise SynthesisError(
                component="synth.scene",
                message=f"Cylinder is entirely behind camera {index}",
                details={"center": scene.center.tolist()},
            )
        masks.append(MaskImage(foreground=_hit_mask(scene, calib)))
    return tuple(masks)


def occlude(mask: MaskImage, rect: tuple[int, int, int, int]) -> MaskImage:
    """Clear the rectangle rows [r0, r1) × cols [c0, c1), e.g. a hand over the container."""
    r0, c0, r1, c1 = rect
    foreground = mask.foreground.copy()
    foreground[r0:r1, c0:c1] = False
    return MaskImage(foreground=foreground)
