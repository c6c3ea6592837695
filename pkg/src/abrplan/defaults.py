"""Stock simulation setup: a 3-minute video in five DASH-style levels
streamed over a 2 Mbps-mean window, 1 s slots."""

from __future__ import annotations

from .model import QualityLevel, VideoSpec
from .traces import SyntheticTraceConfig

DEFAULT_BITRATES_BPS = (0.4e6, 0.75e6, 1.0e6, 2.5e6, 4.5e6)
DEFAULT_WEIGHTS = (0.09, 0.17, 0.22, 0.55, 1.0)


def default_video_spec() -> VideoSpec:
    """180 one-second segments at 30 fps with a 4 s start-up cache."""
    return VideoSpec(
        n_segments=180,
        frames_per_segment=30,
        frame_rate=30.0,
        levels=tuple(
            QualityLevel(bitrate_bps=b, weight=w)
            for b, w in zip(DEFAULT_BITRATES_BPS, DEFAULT_WEIGHTS)
        ),
        prefetch_frames=120,
    )


def default_trace_config(seed: int = 0) -> SyntheticTraceConfig:
    """190 s window around a 2 Mbps mean (10 s of slack past the video)."""
    return SyntheticTraceConfig(
        mean_bps=2.0e6,
        window_slots=190,
        slot_duration=1.0,
        seed=seed,
        spread_fraction=0.5,
    )
