import pytest
from hypothesis import given, strategies as st

from abrbench.link import constant_trajectory
from abrbench.media import ContentProfile, Representation, build_manifest, builtin_profile
from abrbench.player import (
    AbrContext,
    EventLog,
    PlayerConfig,
    VirtualLink,
    abr_buffer,
    abr_hybrid,
    abr_throughput,
    default_registry,
    run_playback,
    END,
    PLAY,
    QUALITY_SWITCH,
    SEGMENT_COMPLETED,
    STALL_START,
    STARTUP_COMPLETE,
)

FULLHD_LADDER = [400.0, 800.0, 1200.0, 2400.0, 4800.0]


def single_rep_manifest(total_s=20.0):
    profile = ContentProfile(
        name="single400",
        representations=(Representation(0, 400, 426, 238),),
        total_duration_s=total_s,
        include_audio=False,
    )
    return build_manifest(profile)


def ctx(buffer_level=0.0, samples=(), ladder=FULLHD_LADDER, capacity=30.0):
    return AbrContext(
        buffer_level_s=buffer_level,
        buffer_capacity_s=capacity,
        throughput_samples=list(samples),
        last_rep_id=None,
        segment_index=0,
        ladder_kbps=list(ladder),
    )


def samples_at_kbps(kbps, n=5):
    # one-second downloads carrying kbps*1000/8 bytes each
    return [(int(kbps * 1000 / 8), 1.0)] * n


class TestAbrThroughput:
    def test_cold_start_picks_lowest(self):
        assert abr_throughput(ctx(), {}) == 0

    def test_safety_factor_rule(self):
        assert abr_throughput(ctx(samples=samples_at_kbps(1000)), {}) == 1  # 800 <= 900 < 1200

    def test_clamps_at_top(self):
        assert abr_throughput(ctx(samples=samples_at_kbps(10000)), {}) == 4

    def test_harmonic_mean_window(self):
        # harmonic mean of [400, 1600] kbps = 640; 0.9*640 = 576 -> rep 0
        samples = [(int(400 * 125), 1.0), (int(1600 * 125), 1.0)]
        assert abr_throughput(ctx(samples=samples), {"window_k": 2}) == 0


class TestAbrBuffer:
    def test_empty_buffer_floor(self):
        assert abr_buffer(ctx(buffer_level=0.0), {}) == 0

    def test_saturation(self):
        assert abr_buffer(ctx(buffer_level=25.0), {}) == 4
        assert abr_buffer(ctx(buffer_level=29.0), {}) == 4

    def test_linear_map(self):
        assert abr_buffer(ctx(buffer_level=15.0), {}) == 2  # floor(10/20*4)


class TestAbrHybrid:
    def test_cold_start(self):
        assert abr_hybrid(ctx(), {}) == 0

    def test_full_buffer_matches_throughput_at_safety_one(self):
        c = ctx(buffer_level=30.0, samples=samples_at_kbps(1000))
        assert abr_hybrid(c, {}) == 1  # 1.0 * 1000 -> 800

    def test_empty_buffer_halves_budget(self):
        c = ctx(buffer_level=0.0, samples=samples_at_kbps(1000))
        assert abr_hybrid(c, {}) == 0  # 0.5 * 1000 = 500 -> 400


class TestRegistry:
    def test_duplicate_rejected(self):
        reg = default_registry()
        with pytest.raises(ValueError):
            reg.register("throughput", abr_throughput)

    def test_custom_policy_runs(self):
        reg = default_registry()
        reg.register("constant-lowest", lambda ctx, params: 0)
        cfg = PlayerConfig(abr="constant-lowest", fetch_audio=False)
        log = run_playback(single_rep_manifest(), VirtualLink(constant_trajectory(1000)),
                           cfg, seed=0, registry=reg)
        assert len(log.of_kind(QUALITY_SWITCH)) == 0
        assert "constant-lowest" in reg.names()

    def test_unknown_policy(self):
        with pytest.raises(KeyError):
            default_registry().get("nope")


class TestPlaybackHandSim:
    """Single 400 kbps rep, constant 1000 kbps link, no delay, audio off,
    5 four-second segments: each 200000 B segment downloads in 1.6 s."""

    @pytest.fixture()
    def log(self):
        cfg = PlayerConfig(abr="throughput", fetch_audio=False)
        return run_playback(single_rep_manifest(20.0), VirtualLink(constant_trajectory(1000)),
                            cfg, seed=0)

    def test_startup_at_1_6(self, log):
        t_play = log.of_kind(PLAY)[0].t
        t_started = log.of_kind(STARTUP_COMPLETE)[0].t
        assert t_play == 0.0
        assert t_started == pytest.approx(1.6)

    def test_no_stalls_no_switches(self, log):
        assert log.of_kind(STALL_START) == []
        assert log.of_kind(QUALITY_SWITCH) == []

    def test_five_segments_completed(self, log):
        completed = log.of_kind(SEGMENT_COMPLETED)
        assert len(completed) == 5
        assert completed[0].t == pytest.approx(1.6)
        assert all(e.data["download_s"] == pytest.approx(1.6) for e in completed)

    def test_end_time_identity(self, log):
        # end = startup + media duration + stall time
        assert log.of_kind(END)[0].t == pytest.approx(1.6 + 20.0 + 0.0)


class TestPlaybackStalls:
    def test_link_slower_than_lowest_rep_stalls(self):
        cfg = PlayerConfig(fetch_audio=False)
        log = run_playback(single_rep_manifest(40.0), VirtualLink(constant_trajectory(300)),
                           cfg, seed=0)
        assert len(log.of_kind(STALL_START)) >= 1

    def test_stall_events_pair_up(self):
        cfg = PlayerConfig(fetch_audio=False)
        log = run_playback(single_rep_manifest(40.0), VirtualLink(constant_trajectory(300)),
                           cfg, seed=0)
        kinds = [e.kind for e in log.events if e.kind in ("StallStart", "StallEnd")]
        for i in range(0, len(kinds) - 1, 2):
            assert kinds[i] == "StallStart"
            assert kinds[i + 1] == "StallEnd"


class TestPlaybackInvariants:
    @pytest.mark.parametrize("abr", ["throughput", "buffer", "hybrid"])
    def test_run_time_identity_on_paper_trajectory(self, paper_trajectory, abr):
        manifest = build_manifest(builtin_profile("fullhd"))
        cfg = PlayerConfig(abr=abr)
        log = run_playback(manifest, VirtualLink(paper_trajectory), cfg, seed=1)
        startup = log.of_kind(STARTUP_COMPLETE)[0].t
        end = log.of_kind(END)[0].t
        stall = 0.0
        open_t = None
        for e in log.events:
            if e.kind == "StallStart":
                open_t = e.t
            elif e.kind == "StallEnd":
                stall += e.t - open_t
                open_t = None
        assert open_t is None
        assert end == pytest.approx(startup + 630.0 + stall, abs=1e-6)

    def test_buffer_conservation(self, paper_trajectory):
        manifest = build_manifest(builtin_profile("fullhd"))
        cfg = PlayerConfig()
        log = run_playback(manifest, VirtualLink(paper_trajectory), cfg, seed=1)
        cap = cfg.buffer_capacity_s + manifest.profile.segment_duration_s
        for e in log.of_kind("BufferSample"):
            assert -1e-9 <= e.data["level_s"] <= cap + 1e-9

    def test_events_totally_ordered(self, paper_trajectory):
        manifest = build_manifest(builtin_profile("amazon"))
        log = run_playback(manifest, VirtualLink(paper_trajectory), PlayerConfig(), seed=3)
        times = [e.t for e in log.events]
        assert times == sorted(times)
        assert log.events[0].kind == PLAY
        assert log.events[-1].kind == END

    def test_switch_events_bracket_rep_changes(self, paper_trajectory):
        manifest = build_manifest(builtin_profile("amazon"))
        log = run_playback(manifest, VirtualLink(paper_trajectory), PlayerConfig(), seed=3)
        reps = [e.data["rep_id"] for e in log.of_kind(SEGMENT_COMPLETED)]
        changes = sum(1 for a, b in zip(reps, reps[1:]) if a != b)
        assert len(log.of_kind(QUALITY_SWITCH)) == changes

    def test_determinism(self, paper_trajectory):
        manifest = build_manifest(builtin_profile("fullhd"))
        a = run_playback(manifest, VirtualLink(paper_trajectory), PlayerConfig(), seed=5)
        b = run_playback(manifest, VirtualLink(paper_trajectory), PlayerConfig(), seed=5)
        assert a.to_jsonl() == b.to_jsonl()

    def test_eventlog_jsonl_round_trip(self, paper_trajectory):
        manifest = build_manifest(builtin_profile("fullhd"))
        log = run_playback(manifest, VirtualLink(paper_trajectory), PlayerConfig(), seed=5)
        back = EventLog.from_jsonl(log.to_jsonl())
        assert back.to_jsonl() == log.to_jsonl()


@given(
    level=st.floats(0, 60),
    n_samples=st.integers(0, 10),
    kbps=st.floats(10, 50000),
    ladder=st.lists(st.floats(50, 20000), min_size=1, max_size=15).map(sorted),
)
def test_policies_stay_within_ladder(level, n_samples, kbps, ladder):
    c = ctx(buffer_level=level, samples=samples_at_kbps(kbps, n_samples), ladder=ladder)
    for policy in (abr_throughput, abr_buffer, abr_hybrid):
        pick = policy(c, {})
        assert 0 <= pick < len(ladder)
