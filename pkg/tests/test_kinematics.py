import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestnav.kinematics import DroneState, KinematicsConfig, Vec2, clamp_command, compute_acceleration, step

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
speeds = st.floats(min_value=-2, max_value=2, allow_nan=False)
configs = st.builds(
    KinematicsConfig,
    dt=st.floats(min_value=0.01, max_value=0.5),
    max_acc=st.floats(min_value=0.1, max_value=10.0),
    v_max=st.just(2.0),
)


def exact_axis(x0, v0, v_req, dt, max_acc):
    """Rational evaluation of the per-axis update on the exact binary inputs."""
    x0, v0, v_req, dt, max_acc = map(Fraction, (x0, v0, v_req, dt, max_acc))
    a = min(max((v_req - v0) / dt, -max_acc), max_acc)
    v = v0 + a * dt
    x = x0 + v * dt + a * dt * dt / 2
    return a, v, x


class TestComputeAcceleration:
    def test_zero_error(self):
        assert compute_acceleration(1.0, 1.0, KinematicsConfig()) == 0.0

    def test_clamped_positive(self):
        cfg = KinematicsConfig(dt=0.1, max_acc=3.0)
        assert compute_acceleration(2.0, 0.0, cfg) == 3.0

    def test_clamped_negative(self):
        cfg = KinematicsConfig(dt=0.1, max_acc=3.0)
        assert compute_acceleration(-2.0, 0.0, cfg) == -3.0

    def test_unclamped(self):
        cfg = KinematicsConfig(dt=0.5, max_acc=3.0)
        assert compute_acceleration(1.0, 0.0, cfg) == 2.0

    @given(speeds, speeds, configs)
    def test_clamp_bound(self, v_req, v0, cfg):
        a = compute_acceleration(v_req, v0, cfg)
        assert math.isfinite(a)
        assert abs(a) <= cfg.max_acc


class TestStep:
    def test_equilibrium(self):
        s = DroneState()
        assert step(s, Vec2(0.0, 0.0), KinematicsConfig()) == s

    def test_uniform_motion(self):
        s = DroneState(Vec2(0.0, 0.0), Vec2(1.0, 0.0))
        out = step(s, Vec2(1.0, 0.0), KinematicsConfig(dt=0.1))
        assert out.velocity == Vec2(1.0, 0.0)
        assert out.position == Vec2(0.1, 0.0)

    def test_worked_example(self):
        cfg = KinematicsConfig(dt=0.1, max_acc=3.0)
        out = step(DroneState(), Vec2(2.0, 0.0), cfg)
        a, v, x = exact_axis(0.0, 0.0, 2.0, 0.1, 3.0)
        assert a == 3
        assert out.velocity.x == pytest.approx(float(v), rel=1e-15)
        assert out.position.x == pytest.approx(float(x), rel=1e-15)
        assert out.velocity.x == pytest.approx(0.3, rel=1e-15)
        assert out.position.x == pytest.approx(0.045, rel=1e-15)
        assert out.position.y == 0.0 and out.velocity.y == 0.0

    @given(finite, finite, speeds, speeds, speeds, speeds, configs)
    def test_matches_rational_evaluation(self, x, y, vx, vy, cx, cy, cfg):
        out = step(DroneState(Vec2(x, y), Vec2(vx, vy)), Vec2(cx, cy), cfg)
        for got_x, got_v, args in (
            (out.position.x, out.velocity.x, (x, vx, cx)),
            (out.position.y, out.velocity.y, (y, vy, cy)),
        ):
            _, v, p = exact_axis(*args, cfg.dt, cfg.max_acc)
            assert got_v == pytest.approx(float(v), rel=1e-12, abs=1e-12)
            assert got_x == pytest.approx(float(p), rel=1e-12, abs=1e-12)

    @given(finite, finite, speeds, speeds, speeds, speeds, configs)
    def test_axis_independence(self, x, y, vx, vy, cx, cy, cfg):
        s = DroneState(Vec2(x, y), Vec2(vx, vy))
        both = step(s, Vec2(cx, cy), cfg)
        only_x = step(s, Vec2(cx, vy), cfg)
        assert both.position.x == only_x.position.x
        assert both.velocity.x == only_x.velocity.x

    @given(speeds, speeds, speeds, configs)
    def test_deterministic(self, v0, x0, v_req, cfg):
        s = DroneState(Vec2(x0, 0.0), Vec2(v0, 0.0))
        assert step(s, Vec2(v_req, 0.0), cfg) == step(s, Vec2(v_req, 0.0), cfg)

    @settings(max_examples=200)
    @given(speeds, speeds, configs)
    def test_converges_without_overshoot(self, v0, v_req, cfg):
        s = DroneState(Vec2(0.0, 0.0), Vec2(v0, 0.0))
        sign = math.copysign(1.0, v_req - v0)
        n_max = math.ceil(abs(v_req - v0) / (cfg.max_acc * cfg.dt)) + 2
        for _ in range(n_max):
            s = step(s, Vec2(v_req, 0.0), cfg)
            # never past the command in the direction of travel (one rounding step of slack)
            assert sign * (s.velocity.x - v_req) <= 1e-12
            assert abs(s.velocity.x) <= cfg.v_max + 1e-12
        assert s.velocity.x == pytest.approx(v_req, abs=1e-12)
        s2 = step(s, Vec2(v_req, 0.0), cfg)
        assert s2.velocity.x == pytest.approx(v_req, abs=1e-12)


class TestTypes:
    def test_vec2_rejects_nan(self):
        with pytest.raises(ValueError):
            Vec2(float("nan"), 0.0)

    def test_vec2_rejects_inf(self):
        with pytest.raises(ValueError):
            Vec2(0.0, float("inf"))

    @pytest.mark.parametrize("field", ["dt", "max_acc", "v_max"])
    def test_config_rejects_nonpositive(self, field):
        with pytest.raises(ValueError, match=field):
            KinematicsConfig(**{field: 0.0})

    def test_clamp_command(self):
        cfg = KinematicsConfig(v_max=2.0)
        assert clamp_command(Vec2(5.0, -7.0), cfg) == Vec2(2.0, -2.0)
        assert clamp_command(Vec2(0.5, -1.0), cfg) == Vec2(0.5, -1.0)
