"""Transmission-threshold and quality-level planning.

Given a capacity window and a video, the planner searches threshold
candidates (either every distinct capacity value, or a coarser ladder that
abandons a fixed data quantum per step), fits the best ascending quality
plan to each threshold with a binary-search heuristic, and returns the
candidate minimizing utilization - a * quality.

An exhaustive tree search over all ascending plans is provided as a
desk-scale oracle for the heuristic, and a partitioning mode plans around
a fixed number of tolerated playback stalls.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import InfeasiblePartError, NoFeasibleSessionError, OracleBudgetError
from .model import (
    CapacityTrace,
    QualityPlan,
    SessionOutcome,
    VideoSpec,
    compute_cost,
    compute_quality,
    compute_utilization,
)
from .sim import DEFAULT_SIM, SimConfig, evaluate, exist_violation, run_session, session_length

ThresholdMode = Literal["optimal", "invest"]


@dataclass(frozen=True)
class InvestConfig:
    """Step configuration for the variable-footstep threshold ladder:
    each step abandons roughly ``quantum_bits`` of window volume."""

    quantum_bits: float

    def __post_init__(self):
        if self.quantum_bits <= 0:
            raise ValueError("quantum_bits must be positive")


@dataclass(frozen=True)
class PlanResult:
    alpha_th: float
    plan: QualityPlan
    outcome: SessionOutcome
    candidates_evaluated: int


@dataclass(frozen=True)
class Candidate:
    """One evaluated threshold: its fitted plan and a-independent scores."""

    alpha: float
    plan: QualityPlan
    outcome: SessionOutcome  # cost field is meaningless here (computed at a=0)

    @property
    def sigma(self) -> float:
        return self.outcome.utilization

    @property
    def rho(self) -> float:
        return self.outcome.quality


def invest_threshold(trace: CapacityTrace, step_index: int, quantum_bits: float) -> float:
    """Threshold after abandoning ~``step_index * quantum_bits`` of volume.

    Sorts the per-slot capacities ascending, cumulative-sums their bit
    volumes, and returns the capacity at the largest index whose cumulative
    volume stays within the budget; the smallest capacity when even the
    first slot exceeds it.
    """
    if step_index < 1:
        raise ValueError("step_index must be >= 1")
    if quantum_bits <= 0:
        raise ValueError("quantum_bits must be positive")
    sorted_c = np.sort(trace.as_array)
    cum = np.cumsum(sorted_c * trace.slot_duration)
    ind = int(np.searchsorted(cum, step_index * quantum_bits, side="right")) - 1
    return float(sorted_c[max(ind, 0)])


def optimal_threshold_candidates(trace: CapacityTrace) -> list[float]:
    """All distinct capacity values, ascending."""
    return [float(v) for v in np.unique(trace.as_array)]


def invest_threshold_candidates(trace: CapacityTrace, quantum_bits: float) -> list[float]:
    """The candidate ladder the variable-footstep mode walks: the minimum
    capacity, then the threshold after each further quantum, duplicates
    skipped."""
    total = float(np.sum(trace.as_array) * trace.slot_duration)
    out = [float(np.min(trace.as_array))]
    i = 2
    while (i - 1) * quantum_bits < total:
        alpha = invest_threshold(trace, i, quantum_bits)
        if alpha > out[-1]:
            out.append(alpha)
        i += 1
    top = float(np.max(trace.as_array))
    if out[-1] < top and (i - 1) * quantum_bits >= total:
        out.append(top)
    return out


@dataclass(frozen=True)
class LevelFit:
    feasible: bool
    plan: QualityPlan


def fit_ascending_levels(
    trace: CapacityTrace,
    alpha: float,
    spec: VideoSpec,
    config: SimConfig = DEFAULT_SIM,
) -> LevelFit:
    """Heuristic quality assignment for a fixed threshold.

    Starts with every segment at level 1 and, for each higher level in
    turn, binary-searches the earliest segment from which that level can
    run to the end of the video without a stall. Cache segments stay at
    level 1. Infeasible means even the all-level-1 session stalls.
    """
    n = spec.n_segments
    levels = [1] * n
    if exist_violation(trace, alpha, spec, QualityPlan(tuple(levels)), config):
        return LevelFit(False, QualityPlan(tuple(levels)))
    n_cache = spec.cache_segments
    for s in range(2, spec.n_levels + 1):
        try:
            first_prev = levels.index(s - 1)
        except ValueError:
            break  # level s-1 placed nowhere; heavier levels cannot fit either
        lo = max(first_prev, n_cache)
        best = n  # sentinel: do not place level s
        hi = n - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            trial = tuple(levels[:mid]) + (s,) * (n - mid)
            if exist_violation(trace, alpha, spec, QualityPlan(trial), config):
                lo = mid + 1
            else:
                best = mid
                hi = mid - 1
        if best < n:
            levels[best:] = [s] * (n - best)
    plan = QualityPlan(tuple(levels))
    feasible = not exist_violation(trace, alpha, spec, plan, config)
    return LevelFit(feasible, plan)


def enumerate_candidates(
    trace: CapacityTrace,
    spec: VideoSpec,
    mode: ThresholdMode = "optimal",
    invest: Optional[InvestConfig] = None,
    config: SimConfig = DEFAULT_SIM,
) -> tuple[list[Candidate], int]:
    """Walk the threshold ladder from the bottom, fitting a plan to each
    candidate, stopping at the first threshold where even the lowest
    quality stalls. Returns the feasible candidates (ascending threshold)
    and the number of thresholds examined."""
    if spec.total_frames / spec.frame_rate > trace.window_length:
        raise NoFeasibleSessionError(
            "capacity window is shorter than the video playback time"
        )
    if mode == "invest":
        if invest is None:
            raise ValueError("invest mode requires an InvestConfig")
        alphas = invest_threshold_candidates(trace, invest.quantum_bits)
    elif mode == "optimal":
        alphas = optimal_threshold_candidates(trace)
    else:
        raise ValueError(f"unknown threshold mode {mode!r}")
    out: list[Candidate] = []
    examined = 0
    for alpha in alphas:
        examined += 1
        fit = fit_ascending_levels(trace, alpha, spec, config)
        if not fit.feasible:
            break
        outcome = evaluate(trace, alpha, spec, fit.plan, a=0.0, config=config)
        out.append(Candidate(alpha=alpha, plan=fit.plan, outcome=outcome))
    return out, examined


def select_candidate(candidates: Sequence[Candidate], a: float) -> Candidate:
    """Argmin of utilization - a * quality; ties go to the smaller
    threshold, then the lexicographically smaller plan."""
    if not candidates:
        raise NoFeasibleSessionError("no feasible threshold candidate")
    best = None
    best_cost = None
    # candidates arrive in ascending-threshold order, so keeping the first
    # strict minimum realizes the smaller-threshold tie-break
    for cand in candidates:
        cost = compute_cost(cand.sigma, cand.rho, a)
        if best is None or cost < best_cost:
            best = cand
            best_cost = cost
    return best


def plan_session(
    trace: CapacityTrace,
    spec: VideoSpec,
    a: float,
    mode: ThresholdMode = "optimal",
    invest: Optional[InvestConfig] = None,
    config: SimConfig = DEFAULT_SIM,
) -> PlanResult:
    """End-to-end planning: enumerate thresholds, fit plans, pick the
    cost-minimizing candidate. Raises NoFeasibleSessionError when even the
    lowest-quality session at the minimum capacity threshold stalls."""
    candidates, examined = enumerate_candidates(trace, spec, mode, invest, config)
    best = select_candidate(candidates, a)
    outcome = dataclasses.replace(best.outcome, cost=compute_cost(best.sigma, best.rho, a))
    return PlanResult(
        alpha_th=best.alpha,
        plan=best.plan,
        outcome=outcome,
        candidates_evaluated=examined,
    )


@dataclass(frozen=True)
class OracleResult:
    plan: QualityPlan
    outcome: SessionOutcome
    nodes_visited: int


def exhaustive_best_plan(
    trace: CapacityTrace,
    alpha: float,
    spec: VideoSpec,
    a: float,
    max_nodes: int = 2_000_000,
    config: SimConfig = DEFAULT_SIM,
) -> Optional[OracleResult]:
    """Exhaustive search over ascending plans at a fixed threshold.

    Depth-first over level choices per segment (cache segments pinned at
    level 1, children never below their parent), pruning any prefix whose
    cheapest completion already stalls. Returns the feasible plan with
    maximal quality (ties: lower utilization, then lexicographically
    smaller plan), or None when nothing is feasible. Instances whose full
    tree exceeds ``max_nodes`` are refused outright.
    """
    n, L = spec.n_segments, spec.n_levels
    n_free = n - spec.cache_segments
    if (L + 1) ** n_free > max_nodes:
        raise OracleBudgetError(
            f"(L+1)^segments = {(L + 1) ** n_free} exceeds the {max_nodes} node budget"
        )
    cache = (1,) * spec.cache_segments
    best: dict = {"plan": None, "rho": -1.0, "sigma": None}
    nodes = 0

    def consider(plan: QualityPlan) -> None:
        rho = compute_quality(spec, plan)
        if rho < best["rho"]:
            return
        outcome = evaluate(trace, alpha, spec, plan, a=0.0, config=config)
        sigma = outcome.utilization
        if (
            best["plan"] is None
            or rho > best["rho"]
            or (rho == best["rho"] and sigma < best["sigma"])
            or (
                rho == best["rho"]
                and sigma == best["sigma"]
                and plan.segment_levels < best["plan"].segment_levels
            )
        ):
            best.update(plan=plan, rho=rho, sigma=sigma, outcome=outcome)

    def dfs(prefix: tuple[int, ...], min_level: int) -> None:
        nonlocal nodes
        pos = len(prefix)
        for lvl in range(min_level, L + 1):
            nodes += 1
            if nodes > max_nodes:
                raise OracleBudgetError(f"search exceeded the {max_nodes} node budget")
            filled = QualityPlan(cache + prefix + (lvl,) * (n_free - pos))
            if exist_violation(trace, alpha, spec, filled, config):
                break  # heavier fills only cost more: prune this level and above
            if pos == n_free - 1:
                consider(filled)
            else:
                dfs(prefix + (lvl,), lvl)

    if n_free == 0:
        plan = QualityPlan(cache)
        if exist_violation(trace, alpha, spec, plan, config):
            return None
        consider(plan)
    else:
        dfs((), 1)
    if best["plan"] is None:
        return None
    outcome = dataclasses.replace(
        best["outcome"], cost=compute_cost(best["sigma"], best["rho"], a)
    )
    return OracleResult(plan=best["plan"], outcome=outcome, nodes_visited=nodes)


@dataclass(frozen=True)
class StallPolicy:
    """Tolerate ``n_stalls`` playback interruptions.

    ``stall_segments`` are the 1-based segments at which the video is cut;
    when omitted they are detected by simulating the lowest quality at full
    utilization and taking the first stalls that occur.
    """

    n_stalls: int
    stall_segments: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.n_stalls < 0:
            raise ValueError("n_stalls must be >= 0")
        if self.stall_segments is not None:
            cuts = tuple(int(s) for s in self.stall_segments)
            if len(cuts) != self.n_stalls:
                raise ValueError("stall_segments must list exactly n_stalls cut points")
            if any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise ValueError("stall_segments must be strictly increasing")
            object.__setattr__(self, "stall_segments", cuts)


def detect_stall_segments(
    trace: CapacityTrace, spec: VideoSpec, k: int, config: SimConfig = DEFAULT_SIM
) -> tuple[int, ...]:
    """Segments where stalls occur under lowest quality at full
    utilization (threshold 0, i.e. greedy transmission)."""
    run = run_session(trace, 0.0, spec, QualityPlan.uniform(spec, 1), config)
    traj = run.trajectory
    cuts = []
    for cp, _ in traj.stall_events[:k]:
        seg = int(traj.watched[cp] // spec.frames_per_segment) + 1
        seg = max(2, min(seg, spec.n_segments))
        if not cuts or seg > cuts[-1]:
            cuts.append(seg)
    if len(cuts) < k:
        raise NoFeasibleSessionError(
            f"only {len(cuts)} natural stall positions found, {k} requested"
        )
    return tuple(cuts)


@dataclass(frozen=True)
class PartitionedPlan:
    """A session planned as independent parts around tolerated stalls."""

    parts: tuple[PlanResult, ...]
    cut_segments: tuple[int, ...]
    part_start_slots: tuple[int, ...]
    utilization: float
    quality: float
    cost: float
    session_length: float


def plan_with_stalls(
    trace: CapacityTrace,
    spec: VideoSpec,
    a: float,
    policy: StallPolicy,
    mode: ThresholdMode = "optimal",
    invest: Optional[InvestConfig] = None,
    config: SimConfig = DEFAULT_SIM,
) -> PartitionedPlan:
    """Split the video at the stall segments into independent sessions,
    plan each on its remaining capacity window, and rescore utilization,
    quality and cost over the whole (longer) session.

    Each later part re-buffers from empty before resuming, mirroring the
    start-up rule, so its start-up delay is the stall duration.
    """
    if policy.n_stalls == 0:
        result = plan_session(trace, spec, a, mode, invest, config)
        return PartitionedPlan(
            parts=(result,),
            cut_segments=(),
            part_start_slots=(0,),
            utilization=result.outcome.utilization,
            quality=result.outcome.quality,
            cost=result.outcome.cost,
            session_length=session_length_of(result.outcome, spec, trace.slot_duration),
        )
    cuts = policy.stall_segments or detect_stall_segments(trace, spec, policy.n_stalls, config)
    if cuts[0] < 2 or cuts[-1] > spec.n_segments:
        raise ValueError("cut segments must lie in [2, n_segments]")
    bounds = (1,) + tuple(cuts) + (spec.n_segments + 1,)
    parts: list[PlanResult] = []
    starts: list[int] = []
    all_bits = np.zeros(trace.n_slots)
    all_levels: list[int] = []
    offset = 0
    total_length = 0.0
    for idx, (seg_lo, seg_hi) in enumerate(zip(bounds, bounds[1:])):
        n_seg = seg_hi - seg_lo
        part_spec = dataclasses.replace(
            spec,
            n_segments=n_seg,
            prefetch_frames=min(spec.prefetch_frames, n_seg * spec.frames_per_segment),
        )
        if offset >= trace.n_slots:
            raise InfeasiblePartError(idx, f"no capacity window left for part {idx}")
        part_trace = trace.tail(offset)
        try:
            result = plan_session(part_trace, part_spec, a, mode, invest, config)
        except NoFeasibleSessionError as exc:
            raise InfeasiblePartError(idx, f"part {idx} (segments {seg_lo}..{seg_hi - 1}): {exc}") from exc
        parts.append(result)
        starts.append(offset)
        bits = np.asarray(result.outcome.bits_used_per_slot)
        all_bits[offset : offset + bits.shape[0]] += bits
        all_levels.extend(result.plan.segment_levels)
        length = session_length_of(result.outcome, part_spec, trace.slot_duration)
        total_length += length
        offset += int(np.ceil(length / trace.slot_duration - 1e-9))
    sigma = compute_utilization(trace, all_bits, total_length)
    rho = compute_quality(spec, _quality_view(all_levels, spec))
    return PartitionedPlan(
        parts=tuple(parts),
        cut_segments=tuple(cuts),
        part_start_slots=tuple(starts),
        utilization=sigma,
        quality=rho,
        cost=compute_cost(sigma, rho, a),
        session_length=total_length,
    )


def _quality_view(levels: list[int], spec: VideoSpec) -> QualityPlan:
    # concatenated part plans restart at level 1, so they are not globally
    # ascending; quality only depends on level multiplicities
    return QualityPlan(tuple(levels))


def session_length_of(outcome: SessionOutcome, spec: VideoSpec, slot_duration: float) -> float:
    stall_time = sum(sec for _, sec in outcome.stall_events)
    return outcome.startup_slot * slot_duration + spec.total_frames / spec.frame_rate + stall_time


def relative_performance_error(perf_real: float, perf_mean: float) -> float:
    """|(real - mean) / mean|; NaN flags an undefined (zero-mean) case."""
    if perf_mean == 0:
        return float("nan")
    return abs((perf_real - perf_mean) / perf_mean)
