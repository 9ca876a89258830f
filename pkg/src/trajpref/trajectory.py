"""Robot trajectories, scenes, and the geometry defined on them.

A trajectory is a sequence of timed waypoints carrying joint angles and an
end-effector pose. Distances between trajectories integrate the Euclidean
gap between their interpolated end-effector paths over normalized time,
and the feature map summarizes kinematics plus clearance to scene objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import DegenerateInputError, InputError, NumericDomainError

# Shared quadrature / resampling grid size on normalized time [0, 1].
GRID_POINTS = 201

QUAT_NORM_ATOL = 1e-9


@dataclass(frozen=True)
class Waypoint:
    """One timed sample of a trajectory.

    ``t`` is an absolute time in seconds, ``joints`` the joint angles in
    radians, ``ee_pos`` the end-effector position in meters and ``ee_quat``
    a unit quaternion (w, x, y, z) for its orientation.
    """

    t: float
    joints: np.ndarray
    ee_pos: np.ndarray
    ee_quat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=float))
        object.__setattr__(self, "ee_pos", np.asarray(self.ee_pos, dtype=float))
        object.__setattr__(self, "ee_quat", np.asarray(self.ee_quat, dtype=float))
        if self.ee_pos.shape != (3,):
            raise NumericDomainError(f"ee_pos must have shape (3,), got {self.ee_pos.shape}")
        if self.ee_quat.shape != (4,):
            raise NumericDomainError(f"ee_quat must have shape (4,), got {self.ee_quat.shape}")
        if self.joints.ndim != 1 or self.joints.size == 0:
            raise NumericDomainError("joints must be a non-empty 1-d array")
        values = np.concatenate([[self.t], self.joints, self.ee_pos, self.ee_quat])
        if not np.all(np.isfinite(values)):
            raise NumericDomainError("waypoint has non-finite entries")
        norm = float(np.linalg.norm(self.ee_quat))
        if abs(norm - 1.0) > QUAT_NORM_ATOL:
            raise NumericDomainError(f"ee_quat is not unit length: |q| = {norm!r}")

    def to_dict(self) -> dict:
        return {
            "t": float(self.t),
            "joints": [float(v) for v in self.joints],
            "ee_pos": [float(v) for v in self.ee_pos],
            "ee_quat": [float(v) for v in self.ee_quat],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Waypoint":
        return cls(
            t=float(d["t"]),
            joints=np.asarray(d["joints"], dtype=float),
            ee_pos=np.asarray(d["ee_pos"], dtype=float),
            ee_quat=np.asarray(d["ee_quat"], dtype=float),
        )


@dataclass(frozen=True)
class Trajectory:
    """A timed waypoint sequence executed in a named environment.

    Waypoint times must be strictly increasing and at least two waypoints
    are required. All waypoints must agree on the joint count.
    """

    id: str
    env_id: str
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise DegenerateInputError(
                f"trajectory {self.id!r} needs at least 2 waypoints, got {len(self.waypoints)}"
            )
        times = np.array([w.t for w in self.waypoints])
        if not np.all(np.diff(times) > 0.0):
            raise DegenerateInputError(f"trajectory {self.id!r} has non-increasing waypoint times")
        joint_dims = {w.joints.shape[0] for w in self.waypoints}
        if len(joint_dims) != 1:
            raise DegenerateInputError(
                f"trajectory {self.id!r} mixes joint dimensions: {sorted(joint_dims)}"
            )

    @property
    def n_joints(self) -> int:
        return self.waypoints[0].joints.shape[0]

    @property
    def duration(self) -> float:
        return self.waypoints[-1].t - self.waypoints[0].t

    def normalized_times(self) -> np.ndarray:
        """Waypoint times mapped affinely onto [0, 1]."""
        t = np.array([w.t for w in self.waypoints])
        return (t - t[0]) / (t[-1] - t[0])

    def positions(self) -> np.ndarray:
        return np.stack([w.ee_pos for w in self.waypoints])

    def joint_matrix(self) -> np.ndarray:
        return np.stack([w.joints for w in self.waypoints])

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "env_id": self.env_id,
            "waypoints": [w.to_dict() for w in self.waypoints],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Trajectory":
        return cls(
            id=str(d["id"]),
            env_id=str(d["env_id"]),
            waypoints=tuple(Waypoint.from_dict(w) for w in d["waypoints"]),
        )


@dataclass(frozen=True)
class SceneObject:
    """A spherical obstacle or item of interest, by label."""

    label: str
    position: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise NumericDomainError(f"object position must have shape (3,), got {self.position.shape}")
        if not np.all(np.isfinite(self.position)) or not np.isfinite(self.radius):
            raise NumericDomainError("scene object has non-finite entries")
        if self.radius < 0.0:
            raise NumericDomainError(f"object radius must be >= 0, got {self.radius}")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "position": [float(v) for v in self.position],
            "radius": float(self.radius),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneObject":
        return cls(str(d["label"]), np.asarray(d["position"], dtype=float), float(d["radius"]))


@dataclass(frozen=True)
class Scene:
    """Workspace description: labeled objects and a goal position."""

    env_id: str
    objects: tuple[SceneObject, ...]
    goal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))
        if self.goal.shape != (3,):
            raise NumericDomainError(f"goal must have shape (3,), got {self.goal.shape}")
        if not np.all(np.isfinite(self.goal)):
            raise NumericDomainError("goal has non-finite entries")
        labels = [o.label for o in self.objects]
        if len(set(labels)) != len(labels):
            raise InputError(f"scene {self.env_id!r} has duplicate object labels")

    def to_dict(self) -> dict:
        return {
            "env_id": self.env_id,
            "objects": [o.to_dict() for o in self.objects],
            "goal": [float(v) for v in self.goal],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scene":
        return cls(
            env_id=str(d["env_id"]),
            objects=tuple(SceneObject.from_dict(o) for o in d["objects"]),
            goal=np.asarray(d["goal"], dtype=float),
        )


@dataclass(frozen=True)
class FeatureVector:
    """A named, finite feature vector for one trajectory."""

    values: np.ndarray
    layout: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "layout", tuple(self.layout))
        if self.values.ndim != 1 or self.values.shape[0] != len(self.layout):
            raise InputError(
                f"feature values/layout mismatch: {self.values.shape} vs {len(self.layout)} names"
            )
        if not np.all(np.isfinite(self.values)):
            raise NumericDomainError("feature vector has non-finite entries")

    def __len__(self) -> int:
        return len(self.layout)


def interpolate(traj: Trajectory) -> CubicSpline:
    """Natural cubic spline of the end-effector position over normalized time.

    The returned callable maps values in [0, 1] to positions of shape
    (..., 3) and passes through every waypoint exactly. Two waypoints give
    the straight segment between them.
    """
    u = traj.normalized_times()
    if np.any(np.diff(u) <= 0.0):
        raise DegenerateInputError(f"trajectory {traj.id!r} has collapsing normalized times")
    return CubicSpline(u, traj.positions(), axis=0, bc_type="natural")


def distance(a: Trajectory, b: Trajectory) -> float:
    """Trajectory distance: integrated end-effector gap over normalized time.

    ``d(a, b) = integral_0^1 || f_a(u) - f_b(u) ||_2 du`` where ``f`` is the
    interpolated end-effector path. Evaluated by composite Simpson
    quadrature on a fixed 201-node grid, which makes the value deterministic
    and symmetric in its arguments.
    """
    fa = interpolate(a)
    fb = interpolate(b)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    gap = np.linalg.norm(fa(grid) - fb(grid), axis=1)
    return float(simpson(gap, x=grid))


def label_by_median(d_targets: Mapping[str, float]) -> dict[str, str]:
    """Split trajectories into ``near`` / ``far`` at the median distance.

    Values strictly below the median map to ``"near"``, the rest to
    ``"far"``. With an even count the median is the midpoint of the two
    central values, so the split is balanced unless ties straddle it.
    """
    if not d_targets:
        raise DegenerateInputError("no distances to split")
    med = float(np.median(list(d_targets.values())))
    return {k: ("near" if v < med else "far") for k, v in d_targets.items()}


def features(traj: Trajectory, scene: Scene, n_bins: int = 10) -> FeatureVector:
    """Kinematic and scene-relative features of a trajectory.

    End-effector velocity, acceleration and jerk come from finite
    differences of the spline sampled on the shared 201-node grid, joint
    speeds from finite differences of linearly interpolated joint angles.
    Scene features are signed clearances (center distance minus radius) to
    each object: the minimum over the path and per-bin means over
    ``n_bins`` contiguous chunks of normalized time. The final block is the
    end-position distance to the goal.

    Objects contribute in sorted label order so the layout is stable.
    """
    if traj.env_id != scene.env_id:
        raise InputError(
            f"trajectory {traj.id!r} lives in {traj.env_id!r}, scene is {scene.env_id!r}"
        )
    if n_bins < 1:
        raise InputError(f"n_bins must be >= 1, got {n_bins}")

    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    pos = interpolate(traj)(grid)
    vel = np.gradient(pos, grid, axis=0)
    acc = np.gradient(vel, grid, axis=0)
    jerk = np.gradient(acc, grid, axis=0)

    sq = lambda m: (m ** 2).sum(axis=1)
    names = [
        "ee_mean_sq_vel",
        "ee_mean_sq_acc",
        "ee_mean_sq_jerk",
        "ee_max_sq_jerk",
        "joint_mean_speed",
        "joint_max_speed",
    ]
    u = traj.normalized_times()
    jmat = traj.joint_matrix()
    joints_grid = np.stack([np.interp(grid, u, jmat[:, j]) for j in range(traj.n_joints)], axis=1)
    jvel = np.gradient(joints_grid, grid, axis=0)
    jspeed = np.linalg.norm(jvel, axis=1)
    values = [
        sq(vel).mean(),
        sq(acc).mean(),
        sq(jerk).mean(),
        sq(jerk).max(),
        jspeed.mean(),
        jspeed.max(),
    ]

    bins = np.array_split(np.arange(GRID_POINTS), n_bins)
    for obj in sorted(scene.objects, key=lambda o: o.label):
        clearance = np.linalg.norm(pos - obj.position, axis=1) - obj.radius
        names.append(f"min_clearance[{obj.label}]")
        values.append(clearance.min())
        for k, idx in enumerate(bins):
            names.append(f"clearance[{obj.label}]@bin{k}")
            values.append(clearance[idx].mean())

    names.append("final_goal_dist")
    values.append(float(np.linalg.norm(pos[-1] - scene.goal)))

    return FeatureVector(np.array(values, dtype=float), tuple(names))
