"""On-disk layout of a session bundle.

A bundle directory holds:

- ``session.json``: config, tasks, comparisons, ground truth
- ``trajectories.json``: every trajectory (targets included)
- ``scenes.json``: per-task scenes
- ``recordings/<task_id>.rec``: continuous recordings in the binary layout

All JSON is UTF-8 with a ``format`` tag; writers are atomic
(write to a temp name, then rename).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import DataFormatError
from .evaluation import PreferenceTask
from .signals import load_recording, save_recording
from .synth import Comparison, GroundTruth, SessionBundle, SynthConfig
from .trajectory import Scene, Trajectory

SESSION_FORMAT = "trajpref-session-v1"
TRAJECTORIES_FORMAT = "trajpref-trajectories-v1"
SCENES_FORMAT = "trajpref-scenes-v1"


def write_atomic(path, payload) -> None:
    """Write bytes or text to ``path`` through a temp file and rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(payload, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(payload)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def save_bundle(bundle: SessionBundle, directory) -> Path:
    """Write a session bundle into ``directory`` (created if missing)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "recordings").mkdir(exist_ok=True)

    session = {
        "format": SESSION_FORMAT,
        "config": bundle.config.to_dict(),
        "tasks": [t.to_dict() for t in bundle.tasks],
        "comparisons": [c.to_dict() for c in bundle.comparisons],
        "ground_truth": bundle.ground_truth.to_dict(),
    }
    write_atomic(directory / "session.json", dump_json(session))
    write_atomic(
        directory / "trajectories.json",
        dump_json(
            {
                "format": TRAJECTORIES_FORMAT,
                "trajectories": [bundle.trajectories[k].to_dict() for k in sorted(bundle.trajectories)],
            }
        ),
    )
    write_atomic(
        directory / "scenes.json",
        dump_json(
            {
                "format": SCENES_FORMAT,
                "scenes": [bundle.scenes[k].to_dict() for k in sorted(bundle.scenes)],
            }
        ),
    )
    for task_id in sorted(bundle.recordings):
        save_recording(bundle.recordings[task_id], directory / "recordings" / f"{task_id}.rec")
    return directory


def _load_json(path: Path, expected_format: str) -> dict:
    if not path.exists():
        raise DataFormatError(f"missing bundle file: {path}")
    try:
        with open(path, "r") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != expected_format:
        raise DataFormatError(
            f"{path}: expected format {expected_format!r}, got {payload.get('format')!r}"
        )
    return payload


def load_bundle(directory) -> SessionBundle:
    """Read a bundle directory back into memory.

    Raises :class:`DataFormatError` on any missing file, bad format tag, or
    schema violation.
    """
    directory = Path(directory)
    session = _load_json(directory / "session.json", SESSION_FORMAT)
    trajs = _load_json(directory / "trajectories.json", TRAJECTORIES_FORMAT)
    scenes_doc = _load_json(directory / "scenes.json", SCENES_FORMAT)
    try:
        config = SynthConfig.from_dict(session["config"])
        tasks = [PreferenceTask.from_dict(t) for t in session["tasks"]]
        comparisons = [Comparison.from_dict(c) for c in session["comparisons"]]
        ground_truth = GroundTruth.from_dict(session["ground_truth"])
        trajectories = {}
        for td in trajs["trajectories"]:
            traj = Trajectory.from_dict(td)
            trajectories[traj.id] = traj
        scenes = {}
        for sd in scenes_doc["scenes"]:
            scene = Scene.from_dict(sd)
            scenes[scene.env_id] = scene
    except DataFormatError:
        raise
    except Exception as exc:
        raise DataFormatError(f"{directory}: malformed bundle: {exc}") from exc

    recordings = {}
    for task in tasks:
        rec_path = directory / "recordings" / f"{task.task_id}.rec"
        if not rec_path.exists():
            raise DataFormatError(f"missing recording: {rec_path}")
        recordings[task.task_id] = load_recording(rec_path)

    for task in tasks:
        for tid in task.universe:
            if tid not in trajectories:
                raise DataFormatError(f"task {task.task_id}: trajectory {tid} missing")
        if task.task_id not in scenes:
            raise DataFormatError(f"task {task.task_id}: scene missing")

    return SessionBundle(
        config=config,
        tasks=tasks,
        comparisons=comparisons,
        trajectories=trajectories,
        scenes=scenes,
        recordings=recordings,
        ground_truth=ground_truth,
    )
