"""Multichannel recordings, filtering, window extraction, and spatial filters.

A recording is a channels-by-samples float array plus a sample rate and a
list of timed events. Preprocessing is zero-phase band-pass filtering and
integer-factor resampling; decoding cuts fixed windows around events and,
for statement windows, applies a class-prototype spatial filter.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.signal import butter, sosfiltfilt

from .errors import (
    DataFormatError,
    ExtractionError,
    InputError,
    InsufficientDataError,
    NumericDomainError,
    ParameterError,
)

EVENT_KINDS = ("trajectory_start", "trajectory_end", "statement_onset", "button_press")

OBSERVATION_SECONDS = 2.0
STATEMENT_SECONDS = 1.0
BASELINE_SECONDS = 0.2
ARTIFACT_THRESHOLD_UV = 100.0
XDAWN_COMPONENTS = 3

_MAGIC = b"TPREC01\n"


@dataclass(frozen=True)
class Event:
    """A marker at an integer sample index.

    ``slot`` distinguishes the two executions of a comparison (1 or 2) and
    is None for statement and button markers.
    """

    sample: int
    kind: str
    comparison: int
    slot: int | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InputError(f"unknown event kind {self.kind!r}")
        if self.sample < 0:
            raise InputError(f"event sample must be >= 0, got {self.sample}")
        if self.kind in ("trajectory_start", "trajectory_end"):
            if self.slot not in (1, 2):
                raise InputError(f"{self.kind} events need slot 1 or 2, got {self.slot}")
        elif self.slot is not None:
            raise InputError(f"{self.kind} events carry no slot")

    def to_dict(self) -> dict:
        return {
            "sample": int(self.sample),
            "kind": self.kind,
            "comparison": int(self.comparison),
            "slot": None if self.slot is None else int(self.slot),
        }

    @classmethod
    def from_dict(cls, d) -> "Event":
        slot = d.get("slot")
        return cls(
            sample=int(d["sample"]),
            kind=str(d["kind"]),
            comparison=int(d["comparison"]),
            slot=None if slot is None else int(slot),
        )


@dataclass
class ContinuousRecording:
    """One continuous multichannel recording with event markers."""

    channels: tuple[str, ...]
    samples: np.ndarray
    rate: float
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        self.channels = tuple(str(c) for c in self.channels)
        self.samples = np.asarray(self.samples, dtype=float)
        self.events = tuple(self.events)
        if self.samples.ndim != 2:
            raise InputError(f"samples must be 2-d, got shape {self.samples.shape}")
        if len(self.channels) != self.samples.shape[0]:
            raise InputError(
                f"{len(self.channels)} channel names for {self.samples.shape[0]} rows"
            )
        if len(set(self.channels)) != len(self.channels):
            raise InputError("duplicate channel names")
        if self.rate <= 0.0:
            raise ParameterError(f"rate must be positive, got {self.rate}")
        if not np.all(np.isfinite(self.samples)):
            raise NumericDomainError("recording has non-finite samples")
        n = self.samples.shape[1]
        last = -1
        for ev in self.events:
            if ev.sample >= n:
                raise InputError(f"event at sample {ev.sample} beyond recording length {n}")
            if ev.sample < last:
                raise InputError("events must be ordered by sample index")
            last = ev.sample

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class SignalWindow:
    """A fixed-length epoch cut from a recording.

    ``kind`` is one of ``observation``, ``statement`` or
    ``statement_augmented``; ``label`` is the training class when known
    (``near``/``far`` for observation, ``correct``/``erroneous`` for
    statement windows).
    """

    kind: str
    data: np.ndarray
    rate: float
    comparison: int
    slot: int | None = None
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float))
        if self.kind not in ("observation", "statement", "statement_augmented"):
            raise InputError(f"unknown window kind {self.kind!r}")
        if self.data.ndim != 2 or 0 in self.data.shape:
            raise InputError(f"window data must be non-empty 2-d, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NumericDomainError("window has non-finite samples")
        if self.label is not None:
            valid = {"observation": ("near", "far")}.get(
                self.kind, ("correct", "erroneous")
            )
            if self.label not in valid:
                raise InputError(f"label {self.label!r} invalid for {self.kind} window")


def bandpass(rec: ContinuousRecording, lo: float, hi: float) -> ContinuousRecording:
    """Zero-phase Butterworth band-pass, order 4, applied forward and backward.

    Pads with ``3 * rate / lo`` reflected samples (clipped to the recording
    length) so the slow high-pass edge settles outside the data. Events and
    rate are preserved.
    """
    if not (0.0 < lo < hi < rec.rate / 2.0):
        raise ParameterError(
            f"band ({lo}, {hi}) must satisfy 0 < lo < hi < rate/2 = {rec.rate / 2.0}"
        )
    sos = butter(4, [lo, hi], btype="bandpass", fs=rec.rate, output="sos")
    padlen = min(rec.n_samples - 1, int(round(3.0 * rec.rate / lo)))
    filtered = sosfiltfilt(sos, rec.samples, axis=1, padlen=padlen)
    return ContinuousRecording(rec.channels, filtered, rec.rate, rec.events)


def resample_to(rec: ContinuousRecording, new_rate: float) -> ContinuousRecording:
    """Integer-factor downsampling with an anti-alias low-pass.

    The rate ratio must be a whole number. An order-8 zero-phase Butterworth
    low-pass at ``0.4 * new_rate`` precedes stride decimation; event sample
    indices are divided by the factor (floor).
    """
    if new_rate <= 0.0:
        raise ParameterError(f"new rate must be positive, got {new_rate}")
    ratio = rec.rate / new_rate
    q = int(round(ratio))
    if q < 1 or abs(ratio - q) > 1e-9:
        raise ParameterError(
            f"rate {rec.rate} is not an integer multiple of {new_rate}"
        )
    if q == 1:
        return ContinuousRecording(rec.channels, rec.samples.copy(), new_rate, rec.events)
    sos = butter(8, 0.4 * new_rate, btype="lowpass", fs=rec.rate, output="sos")
    padlen = min(rec.n_samples - 1, 30 * q)
    smoothed = sosfiltfilt(sos, rec.samples, axis=1, padlen=padlen)
    out = smoothed[:, ::q]
    events = tuple(
        Event(ev.sample // q, ev.kind, ev.comparison, ev.slot) for ev in rec.events
    )
    return ContinuousRecording(rec.channels, out, new_rate, events)


def _find_event(rec: ContinuousRecording, kind: str, comparison: int, slot: int | None) -> Event:
    hits = [
        ev
        for ev in rec.events
        if ev.kind == kind and ev.comparison == comparison and ev.slot == slot
    ]
    if len(hits) != 1:
        raise ExtractionError(
            f"expected exactly one {kind} event for comparison {comparison}"
            + ("" if slot is None else f" slot {slot}")
            + f", found {len(hits)}"
        )
    return hits[0]


def extract_observation(rec: ContinuousRecording, comparison: int, slot: int) -> SignalWindow:
    """Cut the 2 s observation window centered in one trajectory execution.

    The window midpoint is the midpoint of the start/end markers; the
    execution must be at least 2 s long and the window must lie inside the
    recording.
    """
    start = _find_event(rec, "trajectory_start", comparison, slot)
    end = _find_event(rec, "trajectory_end", comparison, slot)
    if end.sample <= start.sample:
        raise ExtractionError(
            f"trajectory_end at {end.sample} not after trajectory_start at {start.sample}"
        )
    n = int(round(OBSERVATION_SECONDS * rec.rate))
    if end.sample - start.sample < n:
        raise ExtractionError(
            f"execution spans {end.sample - start.sample} samples, "
            f"shorter than the {n}-sample window"
        )
    mid = (start.sample + end.sample) // 2
    begin = mid - n // 2
    if begin < 0 or begin + n > rec.n_samples:
        raise ExtractionError("observation window falls outside the recording")
    return SignalWindow(
        kind="observation",
        data=rec.samples[:, begin : begin + n].copy(),
        rate=rec.rate,
        comparison=comparison,
        slot=slot,
    )


def extract_statement(rec: ContinuousRecording, comparison: int) -> SignalWindow:
    """Cut the 1 s statement window, baselined on the 200 ms before onset.

    The mean of each channel over the pre-onset baseline span is subtracted
    from the window.
    """
    onset = _find_event(rec, "statement_onset", comparison, None)
    n = int(round(STATEMENT_SECONDS * rec.rate))
    nb = int(round(BASELINE_SECONDS * rec.rate))
    if onset.sample - nb < 0:
        raise ExtractionError(
            f"no room for the {nb}-sample baseline before onset at {onset.sample}"
        )
    if onset.sample + n > rec.n_samples:
        raise ExtractionError("statement window runs past the end of the recording")
    base = rec.samples[:, onset.sample - nb : onset.sample].mean(axis=1, keepdims=True)
    data = rec.samples[:, onset.sample : onset.sample + n] - base
    return SignalWindow(
        kind="statement",
        data=data,
        rate=rec.rate,
        comparison=comparison,
    )


def artifact_flag(window: SignalWindow, threshold_uv: float = ARTIFACT_THRESHOLD_UV) -> bool:
    """True when any channel's peak-to-peak span exceeds the threshold."""
    if threshold_uv <= 0.0:
        raise ParameterError(f"threshold must be positive, got {threshold_uv}")
    ptp = window.data.max(axis=1) - window.data.min(axis=1)
    return bool(np.any(ptp > threshold_uv))


@dataclass(frozen=True)
class XdawnModel:
    """Per-class spatial filters and class-average prototypes.

    ``filters`` maps each class label to a (3, n_channels) array of
    unit-norm rows; ``prototypes`` maps it to the (n_channels, n_samples)
    class average the filters were fit against.
    """

    filters: dict
    prototypes: dict

    @property
    def n_channels(self) -> int:
        return next(iter(self.prototypes.values())).shape[0]

    @property
    def n_samples(self) -> int:
        return next(iter(self.prototypes.values())).shape[1]


def fit_xdawn(windows: Sequence[SignalWindow]) -> XdawnModel:
    """Fit per-class spatial filters that maximize evoked-to-total power.

    For each class the filters solve the generalized eigenproblem between
    the outer product of the class-average window and the pooled
    second-moment matrix of all windows; the top three eigenvectors are
    kept, normalized to unit length, and sign-fixed so the first
    non-negligible coefficient is positive.

    Requires labeled statement windows with at least two examples per class
    and identical shapes.
    """
    if not windows:
        raise InsufficientDataError("no windows to fit")
    by_class: dict[str, list[np.ndarray]] = {"correct": [], "erroneous": []}
    shape = windows[0].data.shape
    for w in windows:
        if w.kind != "statement":
            raise InputError(f"fit_xdawn needs statement windows, got {w.kind!r}")
        if w.label not in by_class:
            raise InputError(f"statement window missing class label (got {w.label!r})")
        if w.data.shape != shape:
            raise InputError(f"window shapes differ: {w.data.shape} vs {shape}")
        by_class[w.label].append(w.data)
    for label, group in by_class.items():
        if len(group) < 2:
            raise InsufficientDataError(
                f"need at least 2 {label!r} windows, got {len(group)}"
            )
    n_ch, n_s = shape
    if n_ch < XDAWN_COMPONENTS:
        raise InsufficientDataError(
            f"need at least {XDAWN_COMPONENTS} channels, got {n_ch}"
        )

    stack = np.stack([w.data for w in windows])
    total = np.einsum("wcs,wds->cd", stack, stack) / (len(windows) * n_s)
    total = 0.5 * (total + total.T)
    # Relative ridge keeps the pooled moment invertible for flat windows.
    total.flat[:: n_ch + 1] += 1e-10 * max(np.trace(total) / n_ch, 1e-30)

    filters: dict[str, np.ndarray] = {}
    prototypes: dict[str, np.ndarray] = {}
    for label, group in by_class.items():
        proto = np.stack(group).mean(axis=0)
        evoked = (proto @ proto.T) / n_s
        evoked = 0.5 * (evoked + evoked.T)
        vals, vecs = eigh(evoked, total)
        comps = vecs[:, ::-1][:, :XDAWN_COMPONENTS].T
        rows = []
        for row in comps:
            row = row / np.linalg.norm(row)
            nz = np.flatnonzero(np.abs(row) > 1e-12 * np.abs(row).max())
            if row[nz[0]] < 0.0:
                row = -row
            rows.append(row)
        filters[label] = np.stack(rows)
        prototypes[label] = proto
    return XdawnModel(filters=filters, prototypes=prototypes)


def augment_statement(window: SignalWindow, model: XdawnModel) -> SignalWindow:
    """Stack filtered class prototypes on top of the filtered window.

    Output rows are, in order: filtered correct prototype, filtered
    erroneous prototype, correct-filtered window, erroneous-filtered
    window. With three filters per class that is 12 rows. The comparison
    id, slot, label and rate carry over.
    """
    if window.kind != "statement":
        raise InputError(f"can only augment statement windows, got {window.kind!r}")
    if window.data.shape != (model.n_channels, model.n_samples):
        raise InputError(
            f"window shape {window.data.shape} does not match the fitted "
            f"({model.n_channels}, {model.n_samples}) layout"
        )
    w_pos = model.filters["correct"]
    w_neg = model.filters["erroneous"]
    data = np.vstack(
        [
            w_pos @ model.prototypes["correct"],
            w_neg @ model.prototypes["erroneous"],
            w_pos @ window.data,
            w_neg @ window.data,
        ]
    )
    return SignalWindow(
        kind="statement_augmented",
        data=data,
        rate=window.rate,
        comparison=window.comparison,
        slot=window.slot,
        label=window.label,
    )


def save_recording(rec: ContinuousRecording, path) -> None:
    """Write a recording to the binary container.

    Layout: 8-byte magic, little-endian u32 header length, UTF-8 JSON
    header (channels, rate, sample count, events), then the samples as
    little-endian float32, channel-major.
    """
    header = json.dumps(
        {
            "channels": list(rec.channels),
            "rate": float(rec.rate),
            "n_samples": int(rec.n_samples),
            "events": [ev.to_dict() for ev in rec.events],
        },
        separators=(",", ":"),
    ).encode("utf-8")
    payload = np.ascontiguousarray(rec.samples, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def load_recording(path) -> ContinuousRecording:
    """Read a recording written by :func:`save_recording`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a recording file")
    off = len(_MAGIC)
    if len(blob) < off + 4:
        raise DataFormatError(f"{path}: truncated header length")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) < off + hlen:
        raise DataFormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[off : off + hlen].decode("utf-8"))
        channels = [str(c) for c in header["channels"]]
        rate = float(header["rate"])
        n_samples = int(header["n_samples"])
        events = tuple(Event.from_dict(d) for d in header["events"])
    except (KeyError, ValueError, TypeError, InputError) as exc:
        raise DataFormatError(f"{path}: malformed header: {exc}") from exc
    off += hlen
    expected = len(channels) * n_samples * 4
    if len(blob) - off != expected:
        raise DataFormatError(
            f"{path}: payload is {len(blob) - off} bytes, expected {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=len(channels) * n_samples, offset=off)
    samples = data.reshape(len(channels), n_samples).astype(float)
    return ContinuousRecording(tuple(channels), samples, rate, events)
