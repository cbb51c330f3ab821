"""Canonical data model for skeletons, poses, tracks, and multi-person scenes.

Coordinates are 64-bit reals in meters, Y up. The canonical skeleton has 15
joints in the following fixed order, used consistently by ingestion, synthesis,
and the predictor:

     0 pelvis (root)     5 right_knee       10 left_elbow
     1 left_hip          6 right_foot       11 left_wrist
     2 left_knee         7 neck             12 right_shoulder
     3 left_foot         8 head             13 right_elbow
     4 right_hip         9 left_shoulder    14 right_wrist

All types are immutable value objects; the wrapped numpy arrays are marked
read-only after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

CANONICAL_JOINT_NAMES = (
    "pelvis",
    "left_hip",
    "left_knee",
    "left_foot",
    "right_hip",
    "right_knee",
    "right_foot",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
)

CANONICAL_EDGES = (
    (0, 1), (1, 2), (2, 3),
    (0, 4), (4, 5), (5, 6),
    (0, 7), (7, 8),
    (7, 9), (9, 10), (10, 11),
    (7, 12), (12, 13), (13, 14),
)


def _frozen_array(values, shape=None, dtype=np.float64):
    arr = np.array(values, dtype=dtype)
    if shape is not None and arr.shape != shape:
        raise ShapeError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint count, limb connectivity, and reference indices of a skeleton."""

    joint_count: int
    edges: tuple[tuple[int, int], ...]
    root_index: int
    foot_indices: tuple[int, int]
    unit_scale: float = 1.0

    def __post_init__(self):
        v = self.joint_count
        if v < 2:
            raise ShapeError(f"skeleton needs at least 2 joints, got {v}")
        if not (0 <= self.root_index < v):
            raise ShapeError(f"root_index {self.root_index} out of range for {v} joints")
        for f in self.foot_indices:
            if not (0 <= f < v):
                raise ShapeError(f"foot index {f} out of range for {v} joints")
        adj = {i: set() for i in range(v)}
        for a, b in self.edges:
            if not (0 <= a < v and 0 <= b < v):
                raise ShapeError(f"edge ({a},{b}) out of range for {v} joints")
            adj[a].add(b)
            adj[b].add(a)
        if len(self.edges) != v - 1 or not _connected(adj, v):
            raise ShapeError("edges must form a connected tree over all joints")

    @property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64)


def _connected(adj, v):
    seen = {0}
    stack = [0]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == v


def canonical_skeleton() -> SkeletonSpec:
    """The fixed 15-joint skeleton shared by ingestion, training, and metrics."""
    return SkeletonSpec(
        joint_count=15,
        edges=CANONICAL_EDGES,
        root_index=0,
        foot_indices=(3, 6),
        unit_scale=1.0,
    )


@dataclass(frozen=True)
class Pose:
    """A single-frame pose: V x 3 joint coordinates in meters."""

    joints: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.joints, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ShapeError(f"pose must be (V, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("pose contains non-finite coordinates")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "joints", arr)

    @property
    def joint_count(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True)
class Track:
    """A time-ordered pose sequence for one person."""

    frames: tuple[Pose, ...]
    fps: float

    def __post_init__(self):
        if len(self.frames) == 0:
            raise ShapeError("track must contain at least one frame")
        if self.fps <= 0:
            raise ShapeError(f"fps must be positive, got {self.fps}")
        v = self.frames[0].joint_count
        for i, p in enumerate(self.frames):
            if p.joint_count != v:
                raise ShapeError(f"frame {i} has {p.joint_count} joints, expected {v}")
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def joint_count(self) -> int:
        return self.frames[0].joint_count

    def array(self) -> np.ndarray:
        """Copy out the track as a (T, V, 3) array."""
        return np.stack([p.joints for p in self.frames])

    @staticmethod
    def from_array(arr: np.ndarray, fps: float) -> "Track":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeError(f"track array must be (T, V, 3), got {arr.shape}")
        return Track(frames=tuple(Pose(f) for f in arr), fps=fps)


@dataclass(frozen=True)
class Scene:
    """N aligned person tracks with a history/future split."""

    persons: tuple[Track, ...]
    history_len: int
    future_len: int
    person_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.persons) < 1:
            raise ShapeError("scene needs at least one person")
        total = self.history_len + self.future_len
        fps = self.persons[0].fps
        for i, t in enumerate(self.persons):
            if len(t) != total:
                raise ShapeError(
                    f"person {i} has {len(t)} frames, expected history+future={total}"
                )
            if t.fps != fps:
                raise ShapeError("all tracks in a scene must share one fps")
        object.__setattr__(self, "persons", tuple(self.persons))
        if not self.person_ids:
            object.__setattr__(
                self, "person_ids", tuple(f"p{i}" for i in range(len(self.persons)))
            )
        elif len(self.person_ids) != len(self.persons):
            raise ShapeError("person_ids length must match persons")

    @property
    def person_count(self) -> int:
        return len(self.persons)

    @property
    def fps(self) -> float:
        return self.persons[0].fps

    def history(self) -> np.ndarray:
        """History frames as (N, T_h, V, 3)."""
        return np.stack([t.array()[: self.history_len] for t in self.persons])

    def future(self) -> np.ndarray:
        """Future frames as (N, T_p, V, 3)."""
        return np.stack([t.array()[self.history_len :] for t in self.persons])


@dataclass(frozen=True)
class PredictionSet:
    """M candidate futures for each of N persons."""

    predictions: tuple[tuple[Track, ...], ...]  # [m][n]
    source_intents: tuple[tuple[int, ...], ...]  # [m][n] codebook indices

    def __post_init__(self):
        if len(self.predictions) < 1:
            raise ShapeError("prediction set needs at least one candidate")
        n = len(self.predictions[0])
        t = len(self.predictions[0][0])
        for m, cand in enumerate(self.predictions):
            if len(cand) != n:
                raise ShapeError(f"candidate {m} has {len(cand)} persons, expected {n}")
            for track in cand:
                if len(track) != t:
                    raise ShapeError("all prediction tracks must share one length")

    @property
    def candidate_count(self) -> int:
        return len(self.predictions)

    @property
    def person_count(self) -> int:
        return len(self.predictions[0])

    def array(self) -> np.ndarray:
        """Copy out predictions as (M, N, T_p, V, 3)."""
        return np.stack([np.stack([t.array() for t in cand]) for cand in self.predictions])


def residuals(track: Track, anchor: Pose) -> np.ndarray:
    """Frame-to-frame deltas of a track, the first taken against ``anchor``.

    Returns a (T, V, 3) array: out[0] = frames[0] - anchor and
    out[t] = frames[t] - frames[t-1] for t >= 1.
    """
    if anchor.joint_count != track.joint_count:
        raise ShapeError(
            f"anchor has {anchor.joint_count} joints, track has {track.joint_count}"
        )
    arr = track.array()
    out = np.empty_like(arr)
    out[0] = arr[0] - anchor.joints
    out[1:] = arr[1:] - arr[:-1]
    return out


def integrate_residuals(anchor: Pose, deltas: np.ndarray, fps: float = 1.0) -> Track:
    """Exact cumulative-sum inverse of :func:`residuals`."""
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.ndim != 3 or deltas.shape[0] == 0:
        raise ShapeError(f"deltas must be non-empty (T, V, 3), got {deltas.shape}")
    if deltas.shape[1:] != anchor.joints.shape:
        raise ShapeError(
            f"delta frames {deltas.shape[1:]} do not match anchor {anchor.joints.shape}"
        )
    frames = anchor.joints + np.cumsum(deltas, axis=0)
    return Track.from_array(frames, fps=fps)


def split_root_pose(track: Track, skel: SkeletonSpec) -> tuple[np.ndarray, Track]:
    """Disentangle a track into its root trajectory and root-relative poses.

    Returns (root trajectory (T, 3), local track) where the local track has
    its root joint identically at the origin.
    """
    if track.joint_count != skel.joint_count:
        raise ShapeError(
            f"track has {track.joint_count} joints, skeleton has {skel.joint_count}"
        )
    arr = track.array()
    root = arr[:, skel.root_index, :].copy()
    local = arr - root[:, None, :]
    return root, Track.from_array(local, fps=track.fps)


def limb_lengths(pose: Pose, skel: SkeletonSpec) -> np.ndarray:
    """Euclidean length of every skeleton edge, in ``skel.edges`` order."""
    if pose.joint_count != skel.joint_count:
        raise ShapeError(
            f"pose has {pose.joint_count} joints, skeleton has {skel.joint_count}"
        )
    edges = skel.edge_array
    diff = pose.joints[edges[:, 0]] - pose.joints[edges[:, 1]]
    return np.sqrt(np.sum(diff * diff, axis=1))


def track_limb_lengths(frames: np.ndarray, skel: SkeletonSpec) -> np.ndarray:
    """Per-frame limb lengths of a (..., V, 3) array, shape (..., E)."""
    frames = np.asarray(frames, dtype=np.float64)
    edges = skel.edge_array
    diff = frames[..., edges[:, 0], :] - frames[..., edges[:, 1], :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def scene_to_json(scene: Scene) -> dict:
    """The canonical on-disk scene structure."""
    return {
        "fps": scene.fps,
        "history_len": scene.history_len,
        "future_len": scene.future_len,
        "persons": [
            {"id": pid, "frames": track.array().tolist()}
            for pid, track in zip(scene.person_ids, scene.persons)
        ],
    }


def scene_from_json(doc: dict) -> Scene:
    persons = []
    ids = []
    for entry in doc["persons"]:
        ids.append(str(entry["id"]))
        persons.append(Track.from_array(np.asarray(entry["frames"]), fps=float(doc["fps"])))
    return Scene(
        persons=tuple(persons),
        history_len=int(doc["history_len"]),
        future_len=int(doc["future_len"]),
        person_ids=tuple(ids),
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_json(scene), fh)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_json(json.load(fh))
