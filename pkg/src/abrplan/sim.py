"""Deterministic playback-session simulator.

Transmits frames in video order under a threshold schedule (with greedy
prefetch of the cache segments), tracks the cumulative arrival curve u and
the cumulative playback curve l on the slot grid, and reports stalls.

Transmission rules:
  * frame f of a segment at level j costs b_j / frame_rate bits;
  * within a slot only one quality level may be streamed: the slot stops
    early when the next frame's level differs from what the slot already
    carried, and the residual capacity of that slot is wasted;
  * a partially transmitted frame carries its progress across slots;
  * cache segments are transmitted greedily (at full capacity) when
    ``prefetch_greedy`` is set; all other traffic follows the schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasiblePlanError
from .model import (
    CapacityTrace,
    QualityPlan,
    SessionOutcome,
    ThresholdSchedule,
    VideoSpec,
    compute_cost,
    compute_quality,
    compute_utilization,
    make_threshold_schedule,
)

_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Simulator knobs.

    prefetch_greedy: transmit the cache segments at full capacity instead
        of the threshold rule (reduces start-up delay).
    checkpoints_per_slot: granularity of the stall check; 1 checks at slot
        boundaries only, which matches the grid the capacity is given on.
    """

    prefetch_greedy: bool = True
    checkpoints_per_slot: int = 1

    def __post_init__(self):
        if self.checkpoints_per_slot < 1:
            raise ValueError("checkpoints_per_slot must be >= 1")


DEFAULT_SIM = SimConfig()


@dataclass(frozen=True)
class TransmitResult:
    bits_used_per_slot: np.ndarray
    frame_arrival_times: Optional[np.ndarray]  # only for delivered frames
    completed: bool
    # cumulative frames delivered at each slot boundary (length n_slots + 1)
    frames_at_boundary: np.ndarray = field(repr=False, default=None)


def _runs(spec: VideoSpec, plan: QualityPlan, prefetch_greedy: bool):
    """Split the frame sequence into (end_frame, level, frame_bits, greedy)
    runs: maximal stretches with constant level and constant phase."""
    levels = plan.as_array
    n_cache = spec.cache_segments
    cuts = set((np.flatnonzero(np.diff(levels) != 0) + 1).tolist())
    if prefetch_greedy and n_cache < spec.n_segments:
        cuts.add(n_cache)
    bounds = sorted(cuts) + [spec.n_segments]
    runs = []
    start = 0
    for end in bounds:
        lvl = int(levels[start])
        runs.append(
            (
                end * spec.frames_per_segment,
                lvl,
                spec.frame_bits(lvl),
                prefetch_greedy and start < n_cache,
            )
        )
        start = end
    return runs


def transmit_video(
    trace: CapacityTrace,
    schedule: ThresholdSchedule,
    spec: VideoSpec,
    plan: QualityPlan,
    config: SimConfig = DEFAULT_SIM,
    record_times: bool = True,
) -> TransmitResult:
    """Deliver frames in order under the schedule; see the module docstring
    for the transmission rules. ``completed`` is False (not an error) when
    the window ends before the last frame."""
    plan.validate(spec)
    c = trace.as_array
    r = schedule.as_array
    if r.shape != c.shape:
        raise ValueError("schedule was built on a different trace")
    dt = trace.slot_duration
    n_slots = trace.n_slots
    total = spec.total_frames

    runs = _runs(spec, plan, config.prefetch_greedy)
    bits_used = np.zeros(n_slots)
    arrivals = np.empty(total) if record_times else None
    boundary = np.zeros(n_slots + 1, dtype=np.int64)

    f = 0
    run_i = 0
    frame_rem = runs[0][2]  # bits still needed for the current frame
    for k in range(n_slots):
        if f >= total:
            boundary[k + 1 :] = total
            break
        time_left = dt
        slot_level = None
        sent_slot = 0.0
        while time_left > _EPS * dt and f < total:
            run_end, level, cost, greedy = runs[run_i]
            if slot_level is not None and level != slot_level:
                break  # one level per slot: waste the residual capacity
            rate = c[k] if greedy else r[k]
            if rate <= 0.0:
                break
            slot_level = level
            budget = rate * time_left
            need = frame_rem + (run_end - f - 1) * cost
            t0 = k * dt + (dt - time_left)
            if budget >= need * (1 - _EPS) - _EPS:
                m = run_end - f
                if record_times:
                    arrivals[f : f + m] = t0 + (frame_rem + np.arange(m) * cost) / rate
                sent_slot += need
                time_left -= need / rate
                f = run_end
                run_i += 1
                if run_i < len(runs):
                    frame_rem = runs[run_i][2]
            else:
                if budget >= frame_rem - _EPS * cost:
                    # finish the current frame plus any whole frames after it
                    m = min(1 + int((budget - frame_rem) / cost + _EPS), run_end - f)
                    if record_times:
                        arrivals[f : f + m] = t0 + (frame_rem + np.arange(m) * cost) / rate
                    f += m
                    leftover = budget - frame_rem - (m - 1) * cost
                    frame_rem = min(cost, max(cost - leftover, _EPS * cost))
                    if f >= run_end:  # numerically exact run boundary
                        run_i += 1
                        if run_i < len(runs):
                            frame_rem = runs[run_i][2]
                else:
                    frame_rem -= budget
                sent_slot += budget
                time_left = 0.0
        bits_used[k] = sent_slot
        boundary[k + 1] = f
    completed = f >= total
    times = arrivals[:f] if record_times else None
    return TransmitResult(
        bits_used_per_slot=bits_used,
        frame_arrival_times=times,
        completed=completed,
        frames_at_boundary=boundary,
    )


@dataclass(frozen=True)
class Trajectory:
    arrived: np.ndarray  # u at each checkpoint
    watched: np.ndarray  # l at each checkpoint
    startup_checkpoint: Optional[int]
    stall_events: tuple[tuple[int, float], ...]  # (slot index, seconds stalled)
    checkpoint_dt: float

    @property
    def stalled(self) -> bool:
        return len(self.stall_events) > 0


def playback_trajectory(
    frame_arrival_times,
    spec: VideoSpec,
    trace: CapacityTrace,
    config: SimConfig = DEFAULT_SIM,
) -> Trajectory:
    """Derive the buffer trajectory from frame arrival instants.

    Playback starts at the first checkpoint where the buffered frames reach
    the start-up threshold, then advances frame_rate * dt frames per
    checkpoint, freezing (a stall) whenever it would overtake the arrivals.
    """
    arr = np.asarray(frame_arrival_times, dtype=float)
    if arr.size > 1 and np.any(np.diff(arr) < -_EPS):
        raise ValueError("arrival times must be non-decreasing")
    m = config.checkpoints_per_slot
    cdt = trace.slot_duration / m
    n_cp = trace.n_slots * m
    times = np.arange(n_cp + 1) * cdt
    u = np.searchsorted(arr, times + _EPS * trace.slot_duration, side="right").astype(float)
    return _trajectory_from_counts(u, spec, cdt)


def _trajectory_from_counts(u: np.ndarray, spec: VideoSpec, cdt: float) -> Trajectory:
    total = spec.total_frames
    q0 = min(spec.prefetch_frames, total)
    startup = int(np.searchsorted(u, q0, side="left"))
    n_cp = u.shape[0] - 1
    watched = np.zeros_like(u)
    stalls: list[list] = []  # [checkpoint, seconds]
    if startup > n_cp:
        return Trajectory(u, watched, None, (), cdt)
    step = spec.frame_rate * cdt
    l_prev = 0.0
    in_stall = False
    for i in range(startup + 1, n_cp + 1):
        want = min(l_prev + step, float(total))
        have = min(want, u[i])
        if have < want - _EPS:
            dur = (want - have) / spec.frame_rate
            if in_stall:
                stalls[-1][1] += dur
            else:
                stalls.append([i, dur])
            in_stall = True
        else:
            in_stall = False
        watched[i] = have
        l_prev = have
        if l_prev >= total:
            watched[i:] = total
            break
    events = tuple((int(cp), float(sec)) for cp, sec in stalls)
    return Trajectory(u, watched, startup, events, cdt)


@dataclass(frozen=True)
class SessionRun:
    """One full simulated session: transmission plus playback."""

    transmit: TransmitResult
    trajectory: Trajectory
    violation: bool


def run_session(
    trace: CapacityTrace,
    alpha: float,
    spec: VideoSpec,
    plan: QualityPlan,
    config: SimConfig = DEFAULT_SIM,
) -> SessionRun:
    schedule = make_threshold_schedule(trace, alpha)
    record = config.checkpoints_per_slot > 1
    tx = transmit_video(trace, schedule, spec, plan, config, record_times=record)
    if record:
        traj = playback_trajectory(tx.frame_arrival_times, spec, trace, config)
    else:
        traj = _trajectory_from_counts(tx.frames_at_boundary.astype(float), spec, trace.slot_duration)
    violation = (
        not tx.completed
        or traj.startup_checkpoint is None
        or traj.stalled
        or traj.watched[-1] < spec.total_frames - _EPS
    )
    return SessionRun(transmit=tx, trajectory=traj, violation=violation)


def exist_violation(
    trace: CapacityTrace,
    alpha: float,
    spec: VideoSpec,
    plan: QualityPlan,
    config: SimConfig = DEFAULT_SIM,
) -> bool:
    """True iff the session stalls or does not deliver and play out the
    whole video within the window."""
    if config.checkpoints_per_slot > 1:
        return run_session(trace, alpha, spec, plan, config).violation
    # fast path: boundary counts and the untouched playback ramp suffice,
    # because l only deviates from the ramp after a first stall
    schedule = make_threshold_schedule(trace, alpha)
    tx = transmit_video(trace, schedule, spec, plan, config, record_times=False)
    if not tx.completed:
        return True
    u = tx.frames_at_boundary
    total = spec.total_frames
    q0 = min(spec.prefetch_frames, total)
    startup = int(np.searchsorted(u, q0, side="left"))
    n_cp = u.shape[0] - 1
    if startup > n_cp:
        return True
    step = spec.frame_rate * trace.slot_duration
    ramp = np.clip((np.arange(n_cp + 1) - startup) * step, 0.0, float(total))
    if ramp[-1] < total - _EPS:
        return True  # window ends before playback finishes
    return bool(np.any(ramp > u + _EPS))


def session_length(traj: Trajectory, spec: VideoSpec) -> float:
    """Seconds from request to the last watched frame: start-up delay plus
    playback time plus any stall time."""
    if traj.startup_checkpoint is None:
        raise InfeasiblePlanError("playback never started")
    stall_time = sum(sec for _, sec in traj.stall_events)
    return (
        traj.startup_checkpoint * traj.checkpoint_dt
        + spec.total_frames / spec.frame_rate
        + stall_time
    )


def evaluate(
    trace: CapacityTrace,
    alpha: float,
    spec: VideoSpec,
    plan: QualityPlan,
    a: float,
    config: SimConfig = DEFAULT_SIM,
    strict: bool = True,
) -> SessionOutcome:
    """Simulate and score a (threshold, plan) pair.

    In strict mode any stall or incomplete delivery raises
    InfeasiblePlanError. With ``strict=False`` the outcome is returned
    with the stall events recorded (used for robustness studies).
    """
    run = run_session(trace, alpha, spec, plan, config)
    if strict and run.violation:
        raise InfeasiblePlanError(
            f"session infeasible at alpha={alpha}: "
            + ("incomplete delivery" if not run.transmit.completed else "playback stalled")
        )
    traj = run.trajectory
    if traj.startup_checkpoint is None:
        raise InfeasiblePlanError("playback never started within the window")
    length = session_length(traj, spec)
    sigma = compute_utilization(trace, run.transmit.bits_used_per_slot, length)
    rho = compute_quality(spec, plan)
    # report u/l on the slot grid regardless of checkpoint granularity
    stride = config.checkpoints_per_slot
    u_slots = traj.arrived[::stride]
    l_slots = traj.watched[::stride]
    stall_slots = tuple((cp // stride, sec) for cp, sec in traj.stall_events)
    return SessionOutcome(
        arrived_frames=tuple(float(v) for v in u_slots),
        watched_frames=tuple(float(v) for v in l_slots),
        startup_slot=traj.startup_checkpoint // stride,
        stall_events=stall_slots,
        bits_used_per_slot=tuple(float(v) for v in run.transmit.bits_used_per_slot),
        utilization=sigma,
        quality=rho,
        cost=compute_cost(sigma, rho, a),
    )
