"""Synthetic stand-in for the human preference experiment.

Generates, under one seed: candidate trajectories perturbed around a
reference, class-conditioned statement and observation signals embedded in
continuous event-annotated recordings, and noisily rational button
responses, together with the full ground truth needed for oracle tests.

Randomness is NumPy's PCG64 with splittable seed sequences: one substream
per task for geometry, one per comparison for signals and behavior, so
regenerating any piece is independent of the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, ParameterError
from .evaluation import PreferenceTask
from .signals import ContinuousRecording, Event, SignalWindow
from .trajectory import (
    Scene,
    SceneObject,
    Trajectory,
    Waypoint,
    distance,
    label_by_median,
)

# With 6 candidates and 9 comparisons, pair ranks (by true distance) so the
# win counts under error-free verdicts are (3, 2, 1, 2, 1, 0): the closest
# candidate is the unique winner and every candidate appears three times.
_PAIR_TEMPLATE_6_9 = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (3, 5), (4, 5))

# Timeline of one comparison, seconds relative to its block start.
_PRE_GAP = 0.6
_MID_GAP = 0.5
_STMT_GAP = 0.7
_STMT_SECONDS = 1.0
_BUTTON_DELAY = 1.8
_TAIL = 1.4

# Exponent on normalized distance when scaling the observation covariance
# shift per candidate; see gen_session.
_OBS_WEIGHT_POWER = 3.0


@dataclass(frozen=True)
class SynthConfig:
    """All knobs of the generator; every run is a pure function of these."""

    seed: int = 7
    n_tasks: int = 16
    comparisons_per_task: int = 9
    candidates_per_task: int = 6
    n_channels: int = 16
    raw_rate: float = 200.0
    statement_rate: float = 100.0
    erp_amplitude_uv: float = 8.0
    noise_sigma_uv: float = 10.0
    obs_cov_shift: float = 0.42
    button_flip_prob: float = 0.075
    traj_perturb_scale: float = 0.12
    exec_seconds: float = 3.0
    n_waypoints: int = 9
    n_joints: int = 7
    n_objects: int = 3
    artifact_prob: float = 0.0
    task_separability: tuple | None = None

    def __post_init__(self):
        # SeedSequence rejects negative entropy; catch it at the config layer.
        if self.seed < 0:
            raise ParameterError(f"seed must be >= 0, got {self.seed}")
        if self.n_tasks < 1 or self.comparisons_per_task < 1:
            raise ParameterError("need at least one task and one comparison per task")
        if self.candidates_per_task < 2:
            raise ParameterError("need at least two candidates per task")
        if self.n_channels < 2:
            raise ParameterError(f"n_channels must be >= 2, got {self.n_channels}")
        if self.raw_rate <= 0.0 or self.statement_rate <= 0.0:
            raise ParameterError("rates must be positive")
        ratio = self.raw_rate / self.statement_rate
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1.0:
            raise ParameterError(
                f"raw_rate {self.raw_rate} must be an integer multiple of "
                f"statement_rate {self.statement_rate}"
            )
        for name in ("erp_amplitude_uv", "noise_sigma_uv", "obs_cov_shift", "traj_perturb_scale"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")
        if not (0.0 <= self.button_flip_prob <= 0.5):
            raise ParameterError(
                f"button_flip_prob must be in [0, 0.5], got {self.button_flip_prob}"
            )
        if not (0.0 <= self.artifact_prob <= 1.0):
            raise ParameterError(f"artifact_prob must be in [0, 1], got {self.artifact_prob}")
        if self.exec_seconds < 2.0:
            raise ParameterError(
                "exec_seconds must be >= 2.0 so the observation window fits"
            )
        if self.n_waypoints < 3:
            raise ParameterError(f"n_waypoints must be >= 3, got {self.n_waypoints}")
        if self.n_joints < 1 or self.n_objects < 0:
            raise ParameterError("n_joints must be >= 1 and n_objects >= 0")
        if self.task_separability is not None:
            sep = tuple(float(v) for v in self.task_separability)
            if len(sep) != self.n_tasks:
                raise ParameterError(
                    f"task_separability needs {self.n_tasks} entries, got {len(sep)}"
                )
            if any(v < 0.0 for v in sep):
                raise ParameterError("task_separability entries must be >= 0")
            object.__setattr__(self, "task_separability", sep)

    def to_dict(self) -> dict:
        d = {
            "seed": int(self.seed),
            "n_tasks": int(self.n_tasks),
            "comparisons_per_task": int(self.comparisons_per_task),
            "candidates_per_task": int(self.candidates_per_task),
            "n_channels": int(self.n_channels),
            "raw_rate": float(self.raw_rate),
            "statement_rate": float(self.statement_rate),
            "erp_amplitude_uv": float(self.erp_amplitude_uv),
            "noise_sigma_uv": float(self.noise_sigma_uv),
            "obs_cov_shift": float(self.obs_cov_shift),
            "button_flip_prob": float(self.button_flip_prob),
            "traj_perturb_scale": float(self.traj_perturb_scale),
            "exec_seconds": float(self.exec_seconds),
            "n_waypoints": int(self.n_waypoints),
            "n_joints": int(self.n_joints),
            "n_objects": int(self.n_objects),
            "artifact_prob": float(self.artifact_prob),
            "task_separability": None
            if self.task_separability is None
            else [float(v) for v in self.task_separability],
        }
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        kwargs = dict(d)
        sep = kwargs.get("task_separability")
        if sep is not None:
            kwargs["task_separability"] = tuple(sep)
        return cls(**kwargs)


@dataclass
class GroundTruth:
    """Everything the generator knew, for oracle tests.

    Keyed by the global comparison id ``j`` except ``observation_class``,
    which is keyed by trajectory id (the class a candidate's executions
    were generated under, before any label correction).
    """

    statement_true: dict
    statement_class: dict
    response: dict
    flips: tuple
    nearer_slot: dict
    observation_class: dict

    def to_dict(self) -> dict:
        return {
            "statement_true": {str(j): bool(v) for j, v in sorted(self.statement_true.items())},
            "statement_class": {str(j): v for j, v in sorted(self.statement_class.items())},
            "response": {str(j): bool(v) for j, v in sorted(self.response.items())},
            "flips": [int(j) for j in self.flips],
            "nearer_slot": {str(j): int(v) for j, v in sorted(self.nearer_slot.items())},
            "observation_class": {k: v for k, v in sorted(self.observation_class.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        return cls(
            statement_true={int(j): bool(v) for j, v in d["statement_true"].items()},
            statement_class={int(j): str(v) for j, v in d["statement_class"].items()},
            response={int(j): bool(v) for j, v in d["response"].items()},
            flips=tuple(int(j) for j in d["flips"]),
            nearer_slot={int(j): int(v) for j, v in d["nearer_slot"].items()},
            observation_class={str(k): str(v) for k, v in d["observation_class"].items()},
        )


@dataclass(frozen=True)
class Comparison:
    """One pairwise comparison as presented: which ids sat in which slot."""

    j: int
    task_id: str
    ids: tuple
    statement_first_slot: int
    true_correct: bool
    response_correct: bool

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(self.ids) != 2 or self.ids[0] == self.ids[1]:
            raise InputError(f"comparison {self.j} needs two distinct ids")
        if self.statement_first_slot not in (1, 2):
            raise InputError("statement_first_slot must be 1 or 2")

    def to_dict(self) -> dict:
        return {
            "j": int(self.j),
            "task_id": self.task_id,
            "slot1": self.ids[0],
            "slot2": self.ids[1],
            "statement_first_slot": int(self.statement_first_slot),
            "true_correct": bool(self.true_correct),
            "response_correct": bool(self.response_correct),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Comparison":
        return cls(
            j=int(d["j"]),
            task_id=str(d["task_id"]),
            ids=(str(d["slot1"]), str(d["slot2"])),
            statement_first_slot=int(d["statement_first_slot"]),
            true_correct=bool(d["true_correct"]),
            response_correct=bool(d["response_correct"]),
        )


@dataclass
class SessionBundle:
    """One simulated session: tasks, geometry, recordings, ground truth."""

    config: SynthConfig
    tasks: list
    comparisons: list
    trajectories: dict
    scenes: dict
    recordings: dict
    ground_truth: GroundTruth

    def task_map(self) -> dict:
        return {t.task_id: t for t in self.tasks}

    def comparison_map(self) -> dict:
        return {c.j: c for c in self.comparisons}


def _default_rng(cfg: SynthConfig):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))


def _textured_noise(rng, n_channels: int, n_samples: int, rate: float) -> np.ndarray:
    """Unit-variance noise: half white, half moving-average smoothed.

    The smoothing window spans 1/20 s (a 20 Hz box filter), the cheap
    stand-in for the low-frequency weight of real recordings.
    """
    k = max(1, int(round(rate / 20.0)))
    white = rng.standard_normal((n_channels, n_samples))
    if k == 1:
        return white
    raw = rng.standard_normal((n_channels, n_samples + k - 1))
    csum = np.cumsum(raw, axis=1)
    sums = csum[:, k - 1 :].copy()
    sums[:, 1:] -= csum[:, :-k]
    smooth = sums / np.sqrt(k)  # box mean times sqrt(k) has unit variance
    return np.sqrt(0.5) * white + np.sqrt(0.5) * smooth


def _gauss(t: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * ((t - mu) / sigma) ** 2)


def _statement_templates(rate: float, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Visual-response and error-deflection time courses, unit peak each.

    Both are differences of Gaussians. The error course is symmetric about
    0.4 s so its peak lands exactly there.
    """
    t = np.arange(n_samples) / rate
    vis = _gauss(t, 0.20, 0.04) - 0.8 * _gauss(t, 0.10, 0.025)
    err = (_gauss(t, 0.40, 0.045) - 0.45 * _gauss(t, 0.40, 0.10)) / 0.55
    return vis, err


def _channel_profiles(rng, n_channels: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel gains: visual response everywhere, error response frontal."""
    vis = rng.uniform(0.3, 0.7, n_channels)
    err = np.zeros(n_channels)
    front = max(3, n_channels // 3)
    front = min(front, n_channels)
    err[:front] = np.linspace(1.0, 0.4, front)
    return vis, err


def _unit_direction(rng, n_channels: int) -> np.ndarray:
    v = rng.standard_normal(n_channels)
    return v / np.linalg.norm(v)


def _bump_field(rng, grid: np.ndarray, n_coords: int, mode: int = 3) -> np.ndarray:
    """Random smooth field on [0, 1] vanishing at the ends, shape (len(grid), n_coords).

    A single mid-band harmonic (no fundamental) with a random coordinate
    direction. The deviation oscillates around the reference instead of
    drifting to one side, and after normalizing the path integral every
    draw has identical velocity/curvature magnitude per unit amplitude,
    so kinematic roughness grows strictly with the applied gain.
    """
    coeff = rng.standard_normal(n_coords)
    return np.outer(np.sin(mode * np.pi * grid), coeff)


def gen_reference(cfg: SynthConfig, rng, task_id: str) -> Trajectory:
    """Reference (target) trajectory for one task: a lifted arc between
    two workspace points with linearly interpolated joints."""
    start = rng.uniform([0.20, -0.35, 0.30], [0.40, -0.15, 0.50])
    goal = rng.uniform([0.45, 0.15, 0.35], [0.65, 0.35, 0.55])
    lift = rng.uniform(0.06, 0.14)
    q0 = rng.uniform(-1.0, 1.0, cfg.n_joints)
    q1 = q0 + rng.uniform(-0.8, 0.8, cfg.n_joints)
    u = np.linspace(0.0, 1.0, cfg.n_waypoints)
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    wps = []
    for i, ui in enumerate(u):
        pos = (1.0 - ui) * start + ui * goal
        pos = pos + np.array([0.0, 0.0, lift * np.sin(np.pi * ui)])
        wps.append(
            Waypoint(
                t=float(ui * cfg.exec_seconds),
                joints=(1.0 - ui) * q0 + ui * q1,
                ee_pos=pos,
                ee_quat=quat,
            )
        )
    return Trajectory(id=f"{task_id}_target", env_id=task_id, waypoints=tuple(wps))


def gen_trajectories(
    cfg: SynthConfig,
    reference: Trajectory,
    n: int,
    rng=None,
    id_prefix: str | None = None,
) -> list:
    """Candidates around a reference with a graded distance ladder.

    Each candidate displaces the reference's interior waypoints along a
    smooth random field normalized to unit path-integrated magnitude, so
    its distance to the reference is close to ``gain * scale``. Gains form
    a jittered geometric ladder spanning a factor of six, which keeps the
    distance spread wide (coefficient of variation well above 0.3).
    First and last waypoints are copied from the reference unchanged.
    """
    if n < 2:
        raise ParameterError(f"need n >= 2 candidates, got {n}")
    if rng is None:
        rng = _default_rng(cfg)
    prefix = reference.id if id_prefix is None else id_prefix
    u = reference.normalized_times()
    ref_pos = reference.positions()
    ref_joints = reference.joint_matrix()
    fine = np.linspace(0.0, 1.0, 201)
    ratio = 6.0 ** (1.0 / (n - 1))
    out = []
    for c in range(n):
        gain = ratio ** c * (1.0 + 0.08 * rng.uniform(-1.0, 1.0))
        pos_field = _bump_field(rng, fine, 3)
        norm = np.trapezoid(np.linalg.norm(pos_field, axis=1), fine)
        joint_field = _bump_field(rng, fine, reference.n_joints)
        jnorm = np.trapezoid(np.linalg.norm(joint_field, axis=1), fine)
        pos_disp = np.zeros_like(ref_pos)
        joint_disp = np.zeros_like(ref_joints)
        if cfg.traj_perturb_scale > 0.0 and norm > 0.0:
            interp = np.stack([np.interp(u, fine, pos_field[:, d]) for d in range(3)], axis=1)
            pos_disp = cfg.traj_perturb_scale * gain * interp / norm
            jinterp = np.stack(
                [np.interp(u, fine, joint_field[:, d]) for d in range(reference.n_joints)],
                axis=1,
            )
            joint_disp = 2.5 * cfg.traj_perturb_scale * gain * jinterp / max(jnorm, 1e-12)
            pos_disp[0] = 0.0
            pos_disp[-1] = 0.0
            joint_disp[0] = 0.0
            joint_disp[-1] = 0.0
        wps = []
        for i, wp in enumerate(reference.waypoints):
            wps.append(
                Waypoint(
                    t=wp.t,
                    joints=ref_joints[i] + joint_disp[i],
                    ee_pos=ref_pos[i] + pos_disp[i],
                    ee_quat=wp.ee_quat,
                )
            )
        out.append(Trajectory(id=f"{prefix}_c{c:02d}", env_id=reference.env_id, waypoints=tuple(wps)))
    return out


def gen_scene(cfg: SynthConfig, rng, reference: Trajectory) -> Scene:
    """Scene for one task: spheres scattered beside the reference path,
    goal at the reference's final end-effector position."""
    ref_pos = reference.positions()
    objects = []
    for i in range(cfg.n_objects):
        anchor = ref_pos[rng.integers(1, len(ref_pos) - 1)]
        offset = rng.uniform(-1.0, 1.0, 3)
        offset = offset / max(np.linalg.norm(offset), 1e-12) * rng.uniform(0.15, 0.30)
        objects.append(
            SceneObject(
                label=f"obj{i}",
                position=anchor + offset,
                radius=float(rng.uniform(0.03, 0.06)),
            )
        )
    return Scene(env_id=reference.env_id, objects=tuple(objects), goal=ref_pos[-1])


def gen_statement_signal(cfg: SynthConfig, correct: bool, rng=None) -> SignalWindow:
    """One statement window at the statement rate.

    Every channel carries the common visual response; the erroneous class
    adds the frontocentral deflection peaking at 400 ms. Noise is the
    textured mixture at ``noise_sigma_uv``.
    """
    if rng is None:
        rng = _default_rng(cfg)
    n = int(round(1.0 * cfg.statement_rate))
    vis_gain, err_gain = _channel_profiles(rng, cfg.n_channels)
    vis, err = _statement_templates(cfg.statement_rate, n)
    data = cfg.erp_amplitude_uv * np.outer(vis_gain, vis)
    if not correct:
        data = data + cfg.erp_amplitude_uv * np.outer(err_gain, err)
    data = data + cfg.noise_sigma_uv * _textured_noise(rng, cfg.n_channels, n, cfg.statement_rate)
    return SignalWindow(
        kind="statement",
        data=data,
        rate=cfg.statement_rate,
        comparison=0,
        label="correct" if correct else "erroneous",
    )


def gen_observation_signal(cfg: SynthConfig, cls: str, rng=None) -> SignalWindow:
    """One observation window: stationary textured noise whose spatial
    covariance is inflated along a seeded direction for the far class.

    No time-locked structure distinguishes the classes; only second-order
    statistics do.
    """
    if cls not in ("near", "far"):
        raise InputError(f"observation class must be near or far, got {cls!r}")
    if rng is None:
        rng = _default_rng(cfg)
    direction = _unit_direction(rng, cfg.n_channels)
    n = int(round(2.0 * cfg.raw_rate))
    data = _textured_noise(rng, cfg.n_channels, n, cfg.raw_rate)
    if cls == "far" and cfg.obs_cov_shift > 0.0:
        extra = _textured_noise(rng, 1, n, cfg.raw_rate)
        data = data + np.sqrt(cfg.obs_cov_shift) * direction[:, None] * extra
    return SignalWindow(
        kind="observation",
        data=cfg.noise_sigma_uv * data,
        rate=cfg.raw_rate,
        comparison=0,
        label=cls,
    )


def gen_button(cfg: SynthConfig, true_correct: bool, rng=None) -> tuple[bool, bool]:
    """Behavioral answer to one statement.

    Returns ``(response, flipped)``: the answer equals the truth unless a
    flip (probability ``button_flip_prob``) inverted it.
    """
    if rng is None:
        rng = _default_rng(cfg)
    flipped = bool(rng.random() < cfg.button_flip_prob)
    return (bool(true_correct) ^ flipped, flipped)


def _balanced_bools(rng, n: int) -> np.ndarray:
    seq = np.zeros(n, dtype=bool)
    seq[: (n + 1) // 2] = True
    rng.shuffle(seq)
    return seq


def _pair_plan(cfg: SynthConfig, rng) -> list:
    """Comparison pairs as (better_rank, worse_rank) index tuples."""
    n = cfg.candidates_per_task
    cpt = cfg.comparisons_per_task
    if (n, cpt) == (6, 9):
        return list(_PAIR_TEMPLATE_6_9)
    all_pairs = list(combinations(range(n), 2))
    order = rng.permutation(len(all_pairs))
    return [all_pairs[order[i % len(all_pairs)]] for i in range(cpt)]


def gen_session(cfg: SynthConfig) -> SessionBundle:
    """Generate one full session.

    Per task: a reference, candidates with measured true distances, a
    scene, and one continuous recording containing every comparison's two
    executions, statement, and button press. Statement truth and
    first-named slot are balanced to within one count across the session.
    """
    root = np.random.SeedSequence(cfg.seed)
    session_ss, *task_ss = root.spawn(1 + cfg.n_tasks)
    rng_s = np.random.Generator(np.random.PCG64(session_ss))

    direction = _unit_direction(rng_s, cfg.n_channels)
    vis_gain, err_gain = _channel_profiles(rng_s, cfg.n_channels)

    n_total = cfg.n_tasks * cfg.comparisons_per_task
    truth_seq = _balanced_bools(rng_s, n_total)
    first_seq = np.where(_balanced_bools(rng_s, n_total), 1, 2)

    fs = cfg.raw_rate
    exec_n = int(round(cfg.exec_seconds * fs))
    pre_n = int(round(_PRE_GAP * fs))
    mid_n = int(round(_MID_GAP * fs))
    stmt_gap_n = int(round(_STMT_GAP * fs))
    stmt_n = int(round(_STMT_SECONDS * fs))
    button_n = int(round(_BUTTON_DELAY * fs))
    tail_n = int(round(_TAIL * fs))
    block_n = pre_n + exec_n + mid_n + exec_n + stmt_gap_n + stmt_n + tail_n
    total_n = cfg.comparisons_per_task * block_n + pre_n

    vis_t, err_t = _statement_templates(fs, stmt_n)
    channels = tuple(f"ch{i:02d}" for i in range(cfg.n_channels))

    tasks = []
    comparisons = []
    trajectories: dict = {}
    scenes: dict = {}
    recordings: dict = {}
    statement_true: dict = {}
    statement_class: dict = {}
    response: dict = {}
    flips = []
    nearer_slot: dict = {}
    observation_class: dict = {}

    j = 0
    for t, t_seed in enumerate(task_ss):
        parts = t_seed.spawn(1 + cfg.comparisons_per_task)
        rng_t = np.random.Generator(np.random.PCG64(parts[0]))
        task_id = f"t{t:02d}"
        sep = 1.0 if cfg.task_separability is None else cfg.task_separability[t]
        amp = cfg.erp_amplitude_uv * sep
        shift = cfg.obs_cov_shift * sep

        reference = gen_reference(cfg, rng_t, task_id)
        candidates = gen_trajectories(
            cfg, reference, cfg.candidates_per_task, rng=rng_t, id_prefix=task_id
        )
        scene = gen_scene(cfg, rng_t, reference)
        d_target = {c.id: distance(c, reference) for c in candidates}
        by_distance = sorted(d_target, key=lambda i: (d_target[i], i))
        obs_class = label_by_median(d_target)
        observation_class.update(obs_class)
        # Covariance shift grows with true distance, so observing a worse
        # execution inflates the signal more: the near/far split stays the
        # binary summary, but within-class pairs remain decodable. Cubing
        # keeps the variance ratio between adjacent quality ranks roughly
        # constant instead of collapsing near the top of the ladder.
        d_max = max(d_target.values())
        obs_weight = {
            i: ((d_target[i] / d_max) ** _OBS_WEIGHT_POWER if d_max > 0.0 else 0.0)
            for i in d_target
        }

        trajectories[reference.id] = reference
        for c in candidates:
            trajectories[c.id] = c
        scenes[task_id] = scene

        pairs = _pair_plan(cfg, rng_t)
        samples = np.empty((cfg.n_channels, total_n))
        samples[:, cfg.comparisons_per_task * block_n :] = (
            cfg.noise_sigma_uv * _textured_noise(rng_t, cfg.n_channels, pre_n, fs)
        )
        events = []
        task_j0 = j

        for ci, (rank_a, rank_b) in enumerate(pairs):
            rng_c = np.random.Generator(np.random.PCG64(parts[1 + ci]))
            near_id, far_id = by_distance[rank_a], by_distance[rank_b]
            truth = bool(truth_seq[j])
            first = int(first_seq[j])
            named = near_id if truth else far_id
            other = far_id if truth else near_id
            slots = [None, None]
            slots[first - 1] = named
            slots[2 - first] = other
            ids = (slots[0], slots[1])

            answer, flipped = gen_button(cfg, truth, rng=rng_c)
            if flipped:
                flips.append(j)

            s0 = ci * block_n
            samples[:, s0 : s0 + block_n] = cfg.noise_sigma_uv * _textured_noise(
                rng_c, cfg.n_channels, block_n, fs
            )

            starts = (s0 + pre_n, s0 + pre_n + exec_n + mid_n)
            for slot, start in enumerate(starts, start=1):
                base = _textured_noise(rng_c, cfg.n_channels, exec_n, fs)
                weight = shift * obs_weight[ids[slot - 1]]
                if weight > 0.0:
                    extra = _textured_noise(rng_c, 1, exec_n, fs)
                    base = base + np.sqrt(weight) * direction[:, None] * extra
                samples[:, start : start + exec_n] = cfg.noise_sigma_uv * base
                events.append(Event(start, "trajectory_start", j, slot))
                events.append(Event(start + exec_n, "trajectory_end", j, slot))

            onset = starts[1] + exec_n + stmt_gap_n
            template = amp * np.outer(vis_gain, vis_t)
            if not answer:
                template = template + amp * np.outer(err_gain, err_t)
            samples[:, onset : onset + stmt_n] += template
            if cfg.artifact_prob > 0.0 and rng_c.random() < cfg.artifact_prob:
                ch = int(rng_c.integers(cfg.n_channels))
                blip_n = max(2, int(round(0.08 * fs)))
                blip = 150.0 * np.hanning(blip_n)
                at = onset + (stmt_n - blip_n) // 2
                samples[ch, at : at + blip_n] += blip
            events.append(Event(onset, "statement_onset", j))
            events.append(Event(onset + button_n, "button_press", j))

            comparisons.append(
                Comparison(
                    j=j,
                    task_id=task_id,
                    ids=ids,
                    statement_first_slot=first,
                    true_correct=truth,
                    response_correct=answer,
                )
            )
            statement_true[j] = truth
            statement_class[j] = "correct" if answer else "erroneous"
            response[j] = answer
            nearer_slot[j] = ids.index(near_id) + 1
            j += 1

        recordings[task_id] = ContinuousRecording(
            channels=channels, samples=samples, rate=fs, events=tuple(events)
        )
        tasks.append(
            PreferenceTask(
                task_id=task_id,
                target_id=reference.id,
                universe=tuple(sorted(d_target)),
                comparison_ids=tuple(range(task_j0, j)),
                d_target=d_target,
            )
        )

    truth_gt = GroundTruth(
        statement_true=statement_true,
        statement_class=statement_class,
        response=response,
        flips=tuple(flips),
        nearer_slot=nearer_slot,
        observation_class=observation_class,
    )
    return SessionBundle(
        config=cfg,
        tasks=tasks,
        comparisons=comparisons,
        trajectories=trajectories,
        scenes=scenes,
        recordings=recordings,
        ground_truth=truth_gt,
    )


def noiseless_config(seed: int = 7, **overrides) -> SynthConfig:
    """A cleanly separable profile: huge SNR, huge covariance shift,
    no button flips. The decoder should be near-perfect on it."""
    base = dict(
        seed=seed,
        erp_amplitude_uv=8.0,
        noise_sigma_uv=0.2,
        obs_cov_shift=4000.0,
        button_flip_prob=0.0,
    )
    base.update(overrides)
    return SynthConfig(**base)


def calibrated_config(seed: int = 7, **overrides) -> SynthConfig:
    """The default profile, tuned so decoded accuracies land near the
    reference operating points (button 0.925, statement mid-0.7s,
    observation low-0.6s)."""
    base = dict(seed=seed)
    base.update(overrides)
    return SynthConfig(**base)
