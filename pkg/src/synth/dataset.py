"""
Synthetic dataset generator.

Layout under out_dir:
    manifest.json
    calib_cam1.json, calib_cam2.json
    s0000/audio.wav
    s0000/audio_vggish.csv
    s0000/video_cam1.csv, s0000/video_cam2.csv
    s0000/masks/cam1_frame00000.pgm, ...   (the two frames capacity uses)

Nine containers (three cups, three glasses, three boxes) with seeded sizes are
filled with every (type, level) combination n_per_class times. An empty
container always gets level 0; water never goes into a box. Every file is
a pure function of (seed, sequence index), so regenerating with the same seed
reproduces the same bytes.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.fusion.mass import DensityTable, filling_mass
from src.geometry.capacity import select_frames
from src.media.calibration import write_calibration
from src.media.embeddings import expected_sequence_lengths, write_embedding_sequence
from src.media.manifest import write_manifest
from src.media.pgm import write_pgm_mask
from src.media.wav import write_wav
from src.models.labels import CONTAINER_TYPES, FillingLevel, FillingType
from src.models.manifest import DatasetManifest, EmbeddingPaths, ManifestRecord, RecordLabels
from src.models.media import AUDIO_EMBEDDING_DIM, VIDEO_EMBEDDING_DIM, CameraCalibration
from src.synth.audio import AudioSpec, synth_audio
from src.synth.embeddings import synth_embedding_sequence
from src.synth.scene import SceneSpec, make_rig, render_cylinder_masks
from src.utils.exceptions import DomainError

logger = logging.getLogger(__name__)

CONTAINERS_PER_TYPE = 3
CAMERA_IDS = (1, 2)
RIG_AZIMUTHS_DEG = (-37.5, 37.5)
RIG_HEIGHT = 0.10
DEFAULT_IMAGE_SIZE = (320, 240)
DEFAULT_FOCAL = 400.0
DEFAULT_DISTANCE = 0.6
FRAME_RANGE = (60, 200)
AUDIO_DURATION_RANGE = (3.0, 6.0)
SAMPLE_RATE = 16000
POSITION_JITTER = 0.01


@dataclass(frozen=True)
class Container:
    container_id: str
    container_type: str
    radius: float
    height: float


@dataclass(frozen=True)
class SequencePlan:
    index: int
    filling_type: FillingType
    level: FillingLevel
    container: Container

    @property
    def sequence_id(self) -> str:
        return f"s{self.index:04d}"


def make_containers(seed: int) -> list[Container]:
    rng = np.random.default_rng([seed, 0xC0])
    containers = []
    for container_type in CONTAINER_TYPES:
        for k in range(1, CONTAINERS_PER_TYPE + 1):
            containers.append(
                Container(
                    container_id=f"{container_type}_{k}",
                    container_type=container_type,
                    radius=round(float(rng.uniform(0.02, 0.06)), 4),
                    height=round(float(rng.uniform(0.06, 0.20)), 4),
                )
            )
    return containers


def plan_sequences(containers: list[Container], n_per_class: int) -> list[SequencePlan]:
    """n_per_class sequences per (type, level) pair, containers assigned round-robin."""
    any_container = list(containers)
    liquid_safe = [c for c in containers if c.container_type != "box"]
    cursors = {"any": 0, "liquid": 0}
    plans = []
    for filling_type in FillingType:
        for level in FillingLevel:
            for _ in range(n_per_class):
                pool, key = (liquid_safe, "liquid") if filling_type == FillingType.WATER else (any_container, "any")
                container = pool[cursors[key] % len(pool)]
                cursors[key] += 1
                effective_level = FillingLevel.EMPTY if filling_type == FillingType.EMPTY else level
                plans.append(SequencePlan(len(plans), filling_type, effective_level, container))
    return plans


def audio_class(filling_type: FillingType, level: FillingLevel) -> int:
    """Embedding class of the audio stream: one per (type, level) pair."""
    return int(filling_type) * len(FillingLevel) + int(level)


def _write_sequence(
    plan: SequencePlan,
    out_dir: Path,
    seed: int,
    calibs: tuple[CameraCalibration, ...],
    image_size: tuple[int, int],
    densities: DensityTable,
) -> ManifestRecord:
    rng = np.random.default_rng(np.random.SeedSequence([seed, plan.index]))
    seq_dir = out_dir / plan.sequence_id
    (seq_dir / "masks").mkdir(parents=True, exist_ok=True)

    duration = round(float(rng.uniform(*AUDIO_DURATION_RANGE)), 3)
    frame_count = int(rng.integers(FRAME_RANGE[0], FRAME_RANGE[1] + 1))
    clip = synth_audio(
        AudioSpec(
            filling_type=plan.filling_type,
            duration=duration,
            sample_rate=SAMPLE_RATE,
            seed=int(rng.integers(2 ** 32)),
            level_percent=plan.level.percent,
        )
    )
    write_wav(seq_dir / "audio.wav", clip)

    t_audio, t_video = expected_sequence_lengths(duration, frame_count)
    audio_seq = synth_embedding_sequence(
        audio_class(plan.filling_type, plan.level), max(1, t_audio), AUDIO_EMBEDDING_DIM, int(rng.integers(2 ** 32))
    )
    write_embedding_sequence(seq_dir / "audio_vggish.csv", audio_seq)

    video_paths: dict[int, str] = {}
    for camera in CAMERA_IDS:
        video_seq = synth_embedding_sequence(
            int(plan.level), max(1, t_video), VIDEO_EMBEDDING_DIM, int(rng.integers(2 ** 32)), camera_id=camera
        )
        write_embedding_sequence(seq_dir / f"video_cam{camera}.csv", video_seq)
        video_paths[camera] = f"{plan.sequence_id}/video_cam{camera}.csv"

    container = plan.container
    mask_paths: dict[int, dict[int, str]] = {camera: {} for camera in CAMERA_IDS}
    for frame in sorted(set(select_frames(frame_count))):
        jitter = rng.uniform(-POSITION_JITTER, POSITION_JITTER, 2)
        scene = SceneSpec(
            radius=container.radius,
            height=container.height,
            center=np.array([jitter[0], jitter[1], container.height / 2.0]),
            calibs=calibs,
            image_size=image_size,
        )
        for camera, mask in zip(CAMERA_IDS, render_cylinder_masks(scene)):
            rel = f"{plan.sequence_id}/masks/cam{camera}_frame{frame:05d}.pgm"
            write_pgm_mask(out_dir / rel, mask)
            mask_paths[camera][frame] = rel

    capacity = math.pi * container.radius ** 2 * container.height * 1e6
    return ManifestRecord(
        sequence_id=plan.sequence_id,
        container_id=container.container_id,
        container_type=container.container_type,
        audio=f"{plan.sequence_id}/audio.wav",
        frame_count=frame_count,
        masks=mask_paths,
        calibrations={camera: f"calib_cam{camera}.json" for camera in CAMERA_IDS},
        embeddings=EmbeddingPaths(audio=f"{plan.sequence_id}/audio_vggish.csv", video=video_paths),
        labels=RecordLabels(
            filling_type=plan.filling_type.label,
            filling_level=plan.level.percent,
            capacity_ml=capacity,
            mass_g=filling_mass(capacity, plan.level, plan.filling_type, densities),
        ),
    )


def generate_dataset(
    out_dir: str | Path,
    n_per_class: int,
    seed: int,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    focal: float = DEFAULT_FOCAL,
    camera_distance: float = DEFAULT_DISTANCE,
    densities: DensityTable | None = None,
    workers: int = 1,
) -> DatasetManifest:
    """
    Write a labelled synthetic dataset and its manifest.

    Args:
        out_dir: target directory (created if needed)
        n_per_class: sequences per (type, level) pair, ≥ 1
        seed: fixes containers, audio, embeddings and masks
        workers: sequences generated concurrently; output is identical for any value

    Raises:
        DomainError: n_per_class < 1
        OSError: out_dir is not writable
    """
    if n_per_class < 1:
        raise DomainError(component="synth.dataset", message=f"n_per_class must be ≥ 1, got {n_per_class}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    densities = densities or DensityTable()

    calibs = make_rig((0.0, 0.0, RIG_HEIGHT), camera_distance, RIG_AZIMUTHS_DEG, image_size, focal)
    for camera, calib in zip(CAMERA_IDS, calibs):
        write_calibration(out_dir / f"calib_cam{camera}.json", calib)

    plans = plan_sequences(make_containers(seed), n_per_class)
    logger.info("Generating %d sequences into %s", len(plans), out_dir)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        records = list(
            executor.map(lambda plan: _write_sequence(plan, out_dir, seed, calibs, image_size, densities), plans)
        )

    write_manifest(out_dir / "manifest.json", records)
    return DatasetManifest(records=records, root=out_dir)
