"""ABR streaming testbed: scheduled link emulation, synthetic DASH content,
a playback simulator with pluggable ABR policies, QoE metrics, and an
experiment orchestrator."""

from .link import (LinkParams, LinkStage, Trajectory, constant_trajectory, load_trajectory,
                   params_at, transfer_finish_time)
from .media import (ContentProfile, Manifest, Representation, build_manifest, builtin_profile,
                    segment_size_bytes)
from .metrics import MetricsReport, aggregate_runs, compute_report
from .player import (AbrContext, EventLog, PlaybackEvent, PlayerConfig, VirtualLink,
                     default_registry, run_playback)

__version__ = "0.1.0"
