import math
import random

import numpy as np
import pytest

from abrbench.link import (
    LinkStage,
    Trajectory,
    TrajectoryError,
    constant_trajectory,
    load_trajectory,
    trajectory_from_dict,
)


def _rates_at(traj, times):
    """Vectorized effective bit-rate lookup for the oracle (independent of the
    integrator: resolves stages by boundary search, not stage walking)."""
    starts = np.array(traj._starts)  # cumulative stage starts + total
    total = starts[-1]
    t = np.asarray(times, dtype=float)
    if traj.repeat == "cycle":
        t = np.mod(t, total)
    else:
        t = np.minimum(t, np.nextafter(total, 0.0))
    idx = np.searchsorted(starts, t, side="right") - 1
    idx = np.clip(idx, 0, len(traj.stages) - 1)
    eff = np.array([s.effective_bps for s in traj.stages])
    return eff[idx]


def fixed_step_finish_oracle(traj, start_t, size_bytes, dt=0.001):
    """Independent 1 ms fixed-step drain of the transfer, with interpolation
    inside the final step."""
    p = traj.params_at(start_t)
    t0 = start_t + 2 * p.delay_ms / 1000.0
    bits = size_bytes * 8.0
    if bits == 0:
        return t0
    chunk = 200_000
    offset = 0
    while True:
        times = t0 + (offset + np.arange(chunk)) * dt
        rates = _rates_at(traj, times)
        drained = np.cumsum(rates * dt)
        idx = np.searchsorted(drained, bits)
        if idx < chunk:
            before = drained[idx - 1] if idx > 0 else 0.0
            return times[idx] + (bits - before) / rates[idx]
        bits -= drained[-1]
        offset += chunk


def random_trajectory(rng):
    # durations on the 1 ms grid so the fixed-step oracle hits stage
    # boundaries exactly instead of quantizing them
    stages = [
        LinkStage(
            bandwidth_kbps=rng.uniform(100, 8000),
            duration_s=round(rng.uniform(0.5, 20), 3),
            delay_ms=rng.choice([0, 0, 35, 70]),
            loss_pct=rng.choice([0, 0, 0, 2.0]),
        )
        for _ in range(rng.randint(1, 6))
    ]
    return Trajectory(stages, repeat=rng.choice(["clamp", "cycle"]))


def random_start(rng, traj, spread=1.2):
    return round(rng.uniform(0, traj.total_duration_s * spread), 3)


class TestSchema:
    def test_paper_trajectory_loads(self, paper_trajectory):
        assert len(paper_trajectory.stages) == 11
        assert paper_trajectory.total_duration_s == 630
        assert all(s.delay_ms == 70 for s in paper_trajectory.stages)

    def test_single_stage(self):
        traj = trajectory_from_dict(
            {"trajectory_version": 1, "stages": [{"bandwidth_kbps": 1000, "duration_s": 10}]})
        assert len(traj.stages) == 1
        assert traj.stages[0].delay_ms == 0
        assert traj.stages[0].loss_pct == 0

    def test_zero_duration_stage_rejected(self):
        with pytest.raises(TrajectoryError, match="stage 0"):
            trajectory_from_dict(
                {"trajectory_version": 1, "stages": [{"bandwidth_kbps": 1000, "duration_s": 0}]})

    def test_malformed_json_reports_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{\n  broken\n}")
        with pytest.raises(TrajectoryError, match="line"):
            load_trajectory(p)

    def test_missing_field_names_stage(self):
        with pytest.raises(TrajectoryError, match="stage 1"):
            trajectory_from_dict({"trajectory_version": 1, "stages": [
                {"bandwidth_kbps": 1000, "duration_s": 5}, {"duration_s": 5}]})


class TestParamsAt:
    @pytest.mark.parametrize("t,kbps", [(0, 750), (100, 350), (200, 2500), (400, 1500), (600, 500)])
    def test_paper_spot_checks(self, paper_trajectory, t, kbps):
        assert paper_trajectory.params_at(t).bandwidth_kbps == kbps

    def test_half_open_boundaries(self, paper_trajectory):
        assert paper_trajectory.params_at(64.999).bandwidth_kbps == 750
        assert paper_trajectory.params_at(65).bandwidth_kbps == 350

    def test_clamp_beyond_end(self, paper_trajectory):
        assert paper_trajectory.params_at(10_000).bandwidth_kbps == 500

    def test_cycle_wraps(self):
        traj = Trajectory(
            [LinkStage(1000, 10), LinkStage(500, 10)], repeat="cycle")
        assert traj.params_at(25).bandwidth_kbps == 1000
        assert traj.params_at(35).bandwidth_kbps == 500

    def test_step_set_matches_published_plot(self, paper_trajectory):
        steps = [(0, 750), (65, 350), (155, 2500), (275, 500), (365, 700), (395, 1500),
                 (425, 2500), (455, 3500), (485, 2000), (515, 1000), (545, 500)]
        for start, kbps in steps:
            assert paper_trajectory.params_at(start).bandwidth_kbps == kbps


class TestTransferFinishTime:
    def test_constant_link(self):
        traj = constant_trajectory(1000)
        assert traj.transfer_finish_time(0, 500_000) == pytest.approx(4.0)

    def test_integrates_across_boundary(self):
        traj = Trajectory([LinkStage(1000, 2), LinkStage(500, 1000)])
        # 2,000,000 bits drain in the first stage; remaining 1,000,000 take 2 s
        assert traj.transfer_finish_time(0, 375_000) == pytest.approx(4.0)

    def test_zero_size_costs_one_rtt(self):
        traj = constant_trajectory(1000, delay_ms=70)
        assert traj.transfer_finish_time(1.0, 0) == pytest.approx(1.14)

    def test_loss_reduces_effective_rate(self):
        traj = constant_trajectory(1000, loss_pct=50)
        assert traj.transfer_finish_time(0, 500_000) == pytest.approx(8.0)

    def test_strictly_increasing_in_size(self):
        rng = random.Random(7)
        for _ in range(50):
            traj = random_trajectory(rng)
            start = rng.uniform(0, traj.total_duration_s)
            a = rng.uniform(1, 5e6)
            b = a + rng.uniform(1, 5e6)
            assert traj.transfer_finish_time(start, a) < traj.transfer_finish_time(start, b)

    def test_agrees_with_fixed_step_oracle(self):
        rng = random.Random(42)
        for _ in range(60):
            traj = random_trajectory(rng)
            start = random_start(rng, traj)
            size = rng.uniform(10_000, 3e6)
            got = traj.transfer_finish_time(start, size)
            want = fixed_step_finish_oracle(traj, start, size)
            assert got == pytest.approx(want, rel=1e-3)

    def test_stage_conservation(self, paper_trajectory):
        # bits drained inside any stage never exceed its effective capacity
        size = 2_000_000
        start = 60.0
        finish = paper_trajectory.transfer_finish_time(start, size)
        p = paper_trajectory.params_at(start)
        t = start + 2 * p.delay_ms / 1000
        drained = 0.0
        while t < finish:
            st, remaining = paper_trajectory._stage_at(t)
            dt = min(finish - t, remaining)
            stage_bits = st.effective_bps * dt
            drained += stage_bits
            assert stage_bits <= st.effective_bps * dt + 1e-6
            t += dt
        assert drained == pytest.approx(size * 8, rel=1e-9)


class TestMeanBandwidth:
    def test_constant(self):
        traj = constant_trajectory(1000)
        assert traj.mean_effective_bandwidth_kbps(3, 7) == pytest.approx(1000)

    def test_straddling_boundary(self):
        traj = Trajectory([LinkStage(1000, 2), LinkStage(500, 1000)])
        assert traj.mean_effective_bandwidth_kbps(0, 4) == pytest.approx(750)

    def test_zero_length_interval(self):
        traj = Trajectory([LinkStage(1000, 2), LinkStage(500, 1000)])
        assert traj.mean_effective_bandwidth_kbps(3, 3) == pytest.approx(500)
