"""Synthetic untrimmed-video generation, feature/annotation files, resizing.

Feature file layout: magic "TADF" | version u32=1 | T u32 | C u32 | T*C
little-endian float32 scalars, row-major.  Annotations are a JSON document
with a top-level class list and per-video records; action times are stored
in seconds and converted to normalized (center, length) on load.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matching import GroundTruthAction
from .segments import Segment

FEATURE_MAGIC = b"TADF"
FEATURE_VERSION = 1


class FeatureFileError(ValueError):
    pass


class AnnotationError(ValueError):
    pass


@dataclass
class AnnotatedVideo:
    video_id: str
    duration_sec: float
    features: np.ndarray  # (T, C_V)
    actions: list[GroundTruthAction] = field(default_factory=list)  # normalized segments

    def actions_sec(self) -> list[tuple[int, float, float]]:
        """(label, start_sec, end_sec) triples in dataset-native seconds."""
        out = []
        for a in self.actions:
            s, e = a.segment.interval()
            out.append((a.label, s * self.duration_sec, e * self.duration_sec))
        return out


@dataclass
class SyntheticConfig:
    num_videos: int = 100
    num_classes: int = 5
    length: int = 100
    feature_dim: int = 16
    actions_per_video: tuple[int, int] = (1, 3)
    duration_fraction: tuple[float, float] = (0.10, 0.30)
    noise_sigma: float = 0.1
    seed: int = 0
    duration_sec: float = 100.0

    def __post_init__(self):
        if self.actions_per_video[0] > self.actions_per_video[1] or self.actions_per_video[0] < 1:
            raise ValueError("actions_per_video range is empty")
        if self.duration_fraction[0] > self.duration_fraction[1] or self.duration_fraction[0] <= 0:
            raise ValueError("duration_fraction range is empty")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def class_signatures(cfg: SyntheticConfig) -> np.ndarray:
    """The per-class unit feature vectors, fixed by the seed."""
    rng = np.random.default_rng(cfg.seed)
    sig = rng.normal(size=(cfg.num_classes, cfg.feature_dim))
    return sig / np.linalg.norm(sig, axis=1, keepdims=True)


def generate_synthetic(cfg: SyntheticConfig) -> list[AnnotatedVideo]:
    """Plant non-overlapping class-signature segments in gaussian noise."""
    rng = np.random.default_rng(cfg.seed)
    sig = rng.normal(size=(cfg.num_classes, cfg.feature_dim))
    sig /= np.linalg.norm(sig, axis=1, keepdims=True)
    videos = []
    for v in range(cfg.num_videos):
        n = int(rng.integers(cfg.actions_per_video[0], cfg.actions_per_video[1] + 1))
        lengths = rng.uniform(cfg.duration_fraction[0], cfg.duration_fraction[1], size=n)
        if lengths.sum() > 1.0:
            raise ValueError(
                f"video {v}: requested total action length {lengths.sum():.3f} "
                "exceeds the video"
            )
        free = 1.0 - lengths.sum()
        cuts = rng.uniform(0.0, 1.0, size=n + 1)
        gaps = cuts / cuts.sum() * free
        labels = rng.integers(0, cfg.num_classes, size=n)

        feats = rng.normal(size=(cfg.length, cfg.feature_dim)) * cfg.noise_sigma
        frame_pos = (
            np.linspace(0.0, 1.0, cfg.length) if cfg.length > 1 else np.zeros(1)
        )
        actions = []
        cursor = 0.0
        prev_idx = -1
        for i in range(n):
            start = cursor + gaps[i]
            end = start + lengths[i]
            cursor = end
            # Snap planted intervals to the frame grid so the annotation
            # boundaries coincide exactly with the support of the signal.
            a = int(round(start * (cfg.length - 1)))
            b = int(round(end * (cfg.length - 1)))
            a = min(max(a, prev_idx + 1), cfg.length - 2)
            b = min(max(b, a + 1), cfg.length - 1)
            prev_idx = b
            start, end = frame_pos[a], frame_pos[b]
            feats[a : b + 1] += sig[labels[i]]
            actions.append(
                GroundTruthAction(
                    label=int(labels[i]), segment=Segment.from_interval(start, end)
                )
            )
        videos.append(
            AnnotatedVideo(
                video_id=f"video_{v:04d}",
                duration_sec=cfg.duration_sec,
                features=feats,
                actions=actions,
            )
        )
    return videos


def resize_features(x: np.ndarray, length: int) -> np.ndarray:
    """Linear-interpolation resize along the time axis; endpoints preserved."""
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[0]
    if t < 2 or length < 2:
        raise ValueError(f"resize_features needs T >= 2 and L >= 2, got T={t}, L={length}")
    coords = np.arange(length) * (t - 1) / (length - 1)
    i0 = np.minimum(np.floor(coords).astype(np.int64), t - 2)
    f = coords - i0
    return (1.0 - f)[:, None] * x[i0] + f[:, None] * x[i0 + 1]


# -- feature files -----------------------------------------------------------


def store_features(path, x: np.ndarray) -> None:
    x = np.asarray(x)
    if x.ndim != 2:
        raise FeatureFileError(f"features must be 2-D, got shape {x.shape}")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, x.shape[0], x.shape[1]))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FEATURE_MAGIC:
        raise FeatureFileError(f"bad magic {blob[:4]!r}, expected {FEATURE_MAGIC!r}")
    if len(blob) < 16:
        raise FeatureFileError("truncated header")
    version, t, c = struct.unpack_from("<III", blob, 4)
    if version != FEATURE_VERSION:
        raise FeatureFileError(f"unsupported feature file version {version}")
    if t * c > 2**31:
        raise FeatureFileError(f"extent overflow: {t} x {c}")
    expected = 16 + 4 * t * c
    if len(blob) < expected:
        raise FeatureFileError(f"truncated payload: {len(blob)} bytes, expected {expected}")
    if len(blob) > expected:
        raise FeatureFileError(f"{len(blob) - expected} trailing bytes")
    data = np.frombuffer(blob, dtype="<f4", count=t * c, offset=16)
    return data.reshape(t, c).astype(np.float64)


# -- annotation files --------------------------------------------------------


def store_annotations(path, videos: list[AnnotatedVideo], class_names: list[str]) -> None:
    doc = {
        "classes": list(class_names),
        "videos": [
            {
                "video_id": v.video_id,
                "duration_sec": v.duration_sec,
                "actions": [
                    {
                        "label": class_names[label],
                        "start_sec": start,
                        "end_sec": end,
                    }
                    for label, start, end in v.actions_sec()
                ],
            }
            for v in videos
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_annotations(path) -> tuple[list[str], list[AnnotatedVideo]]:
    """Parse annotations; videos come back without feature arrays attached."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"malformed annotation file: {exc}") from None
    if "classes" not in doc:
        raise AnnotationError("missing top-level field 'classes'")
    if "videos" not in doc:
        raise AnnotationError("missing top-level field 'videos'")
    class_names = list(doc["classes"])
    index = {name: i for i, name in enumerate(class_names)}
    videos = []
    for rec in doc["videos"]:
        for field_name in ("video_id", "duration_sec", "actions"):
            if field_name not in rec:
                raise AnnotationError(
                    f"video record missing field {field_name!r}: {rec.get('video_id', '<unknown>')}"
                )
        vid = rec["video_id"]
        duration = float(rec["duration_sec"])
        if duration <= 0:
            raise AnnotationError(f"video {vid!r}: non-positive duration {duration}")
        actions = []
        for a in rec["actions"]:
            for field_name in ("label", "start_sec", "end_sec"):
                if field_name not in a:
                    raise AnnotationError(f"video {vid!r}: action missing field {field_name!r}")
            if a["label"] not in index:
                raise AnnotationError(f"video {vid!r}: unknown label {a['label']!r}")
            start, end = float(a["start_sec"]), float(a["end_sec"])
            if not 0.0 <= start < end <= duration:
                raise AnnotationError(
                    f"video {vid!r}: invalid interval [{start}, {end}] for duration {duration}"
                )
            actions.append(
                GroundTruthAction(
                    label=index[a["label"]],
                    segment=Segment.from_interval(start / duration, end / duration),
                )
            )
        videos.append(
            AnnotatedVideo(video_id=vid, duration_sec=duration, features=None, actions=actions)
        )
    return class_names, videos


def write_dataset(directory, videos: list[AnnotatedVideo], class_names: list[str]) -> None:
    """Store one .tadf per video plus annotations.json in ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for v in videos:
        store_features(directory / f"{v.video_id}.tadf", v.features)
    store_annotations(directory / "annotations.json", videos, class_names)


def load_dataset(features_dir, annotations_path) -> tuple[list[str], list[AnnotatedVideo]]:
    class_names, videos = load_annotations(annotations_path)
    features_dir = Path(features_dir)
    for v in videos:
        v.features = load_features(features_dir / f"{v.video_id}.tadf")
    return class_names, videos
