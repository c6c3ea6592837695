"""Core domain types and closed-form cost/quality computations.

All quantities are discrete-time: the capacity window is a sequence of
slots of fixed duration, capacity is piecewise-constant per slot, and the
continuous-time integrals of the cost model reduce to slot sums.

Units are plain SI throughout: capacities and bitrates in bits/second,
durations in seconds, frame counts in frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidScheduleError


@dataclass(frozen=True)
class CapacityTrace:
    """A predicted per-slot capacity window.

    Attributes:
        slot_duration: slot length in seconds (> 0).
        capacities: per-slot average capacity in bits/second (finite, >= 0).
        origin_time: absolute time of the window start, seconds.
    """

    slot_duration: float
    capacities: tuple[float, ...]
    origin_time: float = 0.0

    def __post_init__(self):
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be positive")
        caps = tuple(float(c) for c in self.capacities)
        if len(caps) == 0:
            raise ValueError("capacity window must contain at least one slot")
        for c in caps:
            if not math.isfinite(c) or c < 0:
                raise ValueError(f"capacities must be finite and >= 0, got {c}")
        object.__setattr__(self, "capacities", caps)

    @cached_property
    def as_array(self) -> np.ndarray:
        arr = np.asarray(self.capacities, dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def n_slots(self) -> int:
        return len(self.capacities)

    @property
    def window_length(self) -> float:
        return self.slot_duration * self.n_slots

    def tail(self, first_slot: int) -> "CapacityTrace":
        """Sub-window starting at ``first_slot`` (same slotting)."""
        if not 0 <= first_slot < self.n_slots:
            raise ValueError(f"first_slot {first_slot} outside window")
        return CapacityTrace(
            slot_duration=self.slot_duration,
            capacities=self.capacities[first_slot:],
            origin_time=self.origin_time + first_slot * self.slot_duration,
        )


@dataclass(frozen=True)
class QualityLevel:
    """One encoding of the video: bitrate in bps and its perception weight."""

    bitrate_bps: float
    weight: float


@dataclass(frozen=True)
class VideoSpec:
    """A multi-level encoded video and its playback parameters.

    Levels are 1-based and strictly increasing in both bitrate and weight;
    weights lie in (0, 1]. ``prefetch_frames`` is the start-up threshold:
    playback begins once that many frames are buffered.
    """

    n_segments: int
    frames_per_segment: int
    frame_rate: float
    levels: tuple[QualityLevel, ...]
    prefetch_frames: int

    def __post_init__(self):
        if self.n_segments < 1 or self.frames_per_segment < 1:
            raise ValueError("segment and frame counts must be >= 1")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if len(self.levels) < 1:
            raise ValueError("at least one quality level is required")
        prev = None
        for lvl in self.levels:
            if lvl.bitrate_bps <= 0:
                raise ValueError("bitrates must be positive")
            if not 0 < lvl.weight <= 1:
                raise ValueError("weights must lie in (0, 1]")
            if prev is not None and not (prev.bitrate_bps < lvl.bitrate_bps and prev.weight < lvl.weight):
                raise ValueError("bitrates and weights must be strictly increasing")
            prev = lvl
        if not 1 <= self.prefetch_frames <= self.total_frames:
            raise ValueError("prefetch_frames must be in [1, total frames]")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def total_frames(self) -> int:
        return self.n_segments * self.frames_per_segment

    @property
    def cache_segments(self) -> int:
        """Number of leading segments covered by the start-up threshold."""
        return min(self.n_segments, math.ceil(self.prefetch_frames / self.frames_per_segment))

    @property
    def full_quality_bits(self) -> float:
        """Total video size in bits at the top level."""
        return self.levels[-1].bitrate_bps * self.total_frames / self.frame_rate

    def frame_bits(self, level: int) -> float:
        """Size in bits of one frame encoded at ``level`` (1-based)."""
        return self.levels[level - 1].bitrate_bps / self.frame_rate

    @cached_property
    def frame_bits_by_level(self) -> np.ndarray:
        arr = np.array([lvl.bitrate_bps for lvl in self.levels]) / self.frame_rate
        arr.flags.writeable = False
        return arr

    @cached_property
    def weights(self) -> np.ndarray:
        arr = np.array([lvl.weight for lvl in self.levels])
        arr.flags.writeable = False
        return arr


def weights_from_bitrates(bitrates: Sequence[float], proportional_to_sum: bool = False) -> tuple[float, ...]:
    """Derive level weights from bitrates.

    Default normalizes by the top bitrate so the best level has weight 1.
    ``proportional_to_sum`` normalizes by the bitrate sum instead (weights
    then sum to 1 and the top weight is below 1).
    """
    bs = [float(b) for b in bitrates]
    denom = sum(bs) if proportional_to_sum else max(bs)
    return tuple(b / denom for b in bs)


@dataclass(frozen=True)
class QualityPlan:
    """Per-segment quality assignment (1-based level indices)."""

    segment_levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "segment_levels", tuple(int(v) for v in self.segment_levels))

    @cached_property
    def as_array(self) -> np.ndarray:
        arr = np.asarray(self.segment_levels, dtype=np.int64)
        arr.flags.writeable = False
        return arr

    @classmethod
    def uniform(cls, spec: VideoSpec, level: int) -> "QualityPlan":
        return cls((level,) * spec.n_segments)

    def validate(self, spec: VideoSpec) -> None:
        """Raise ValueError unless the plan fits ``spec``: correct length,
        levels in range, cache segments at level 1, non-decreasing after
        the cache."""
        levels = self.as_array
        if levels.shape[0] != spec.n_segments:
            raise ValueError(f"plan has {levels.shape[0]} segments, video has {spec.n_segments}")
        if levels.min() < 1 or levels.max() > spec.n_levels:
            raise ValueError("plan contains out-of-range level indices")
        cache = spec.cache_segments
        if np.any(levels[:cache] != 1):
            raise ValueError("prefetch-cache segments must stay at level 1")
        if np.any(np.diff(levels[cache:]) < 0):
            raise ValueError("levels must be non-decreasing after the cache segments")


@dataclass(frozen=True)
class ThresholdSchedule:
    """Pure threshold transmission rule: send at full capacity on slots at
    or above the threshold, stay idle elsewhere."""

    alpha: float
    per_slot_rate: tuple[float, ...]

    @cached_property
    def as_array(self) -> np.ndarray:
        arr = np.asarray(self.per_slot_rate, dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def active_slots(self) -> np.ndarray:
        return self.as_array > 0


def make_threshold_schedule(trace: CapacityTrace, alpha: float) -> ThresholdSchedule:
    """Build the threshold schedule for ``alpha``: r_k = c_k if c_k >= alpha
    else 0."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    c = trace.as_array
    rates = np.where(c >= alpha, c, 0.0)
    return ThresholdSchedule(alpha=float(alpha), per_slot_rate=tuple(rates.tolist()))


@dataclass(frozen=True)
class SessionOutcome:
    """Everything observable about one simulated streaming session."""

    arrived_frames: tuple[float, ...]  # cumulative u at each slot boundary
    watched_frames: tuple[float, ...]  # cumulative l at each slot boundary
    startup_slot: int
    stall_events: tuple[tuple[int, float], ...]  # (slot index, seconds)
    bits_used_per_slot: tuple[float, ...]
    utilization: float
    quality: float
    cost: float


_REL_EPS = 1e-9


def compute_utilization(trace: CapacityTrace, bits_used_per_slot, session_length: float) -> float:
    """Time-averaged fraction of network capacity consumed.

    Each slot contributes (bits used / slot volume) * slot_duration to the
    integral, divided by the session length. Slots with zero capacity and
    zero bits contribute nothing; bits on a zero-capacity slot are an
    invalid schedule.
    """
    if session_length <= 0:
        raise ValueError("session length must be positive")
    c = trace.as_array
    bits = np.asarray(bits_used_per_slot, dtype=float)
    if bits.shape != c.shape:
        raise ValueError("bits_used_per_slot length must match the trace")
    if np.any(bits < 0):
        raise InvalidScheduleError("negative bits on a slot")
    volume = c * trace.slot_duration
    over = bits > volume * (1 + _REL_EPS) + _REL_EPS
    if np.any(over):
        k = int(np.flatnonzero(over)[0])
        if c[k] == 0:
            raise InvalidScheduleError(f"bits used on zero-capacity slot {k}")
        raise InvalidScheduleError(f"slot {k} used {bits[k]} bits, volume is {volume[k]}")
    used = volume > 0
    ratio = np.zeros_like(bits)
    ratio[used] = bits[used] / volume[used]
    return float(ratio.sum() * trace.slot_duration / session_length)


def compute_quality(spec: VideoSpec, plan: QualityPlan) -> float:
    """Weight-averaged fraction of frames delivered at each level.

    Delivering one frame at level j consumes b_j / frame_rate bits, so the
    normalized weighted bit integral reduces to the weighted frame
    fraction: sum_j w_j * frames_at_level_j / total_frames.
    """
    levels = plan.as_array
    if levels.shape[0] != spec.n_segments:
        raise ValueError("plan length does not match the video")
    counts = np.bincount(levels, minlength=spec.n_levels + 1)[1:]
    return float(np.dot(spec.weights, counts) / spec.n_segments)


def compute_cost(sigma: float, rho: float, a: float) -> float:
    """Planner objective: utilization minus a times quality."""
    if a < 0:
        raise ValueError("trade-off parameter a must be >= 0")
    return sigma - a * rho
