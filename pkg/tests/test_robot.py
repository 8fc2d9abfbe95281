"""Virtual robot: reference tracking, wall contact, force-balance statics."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hatpic.robot import RobotState, WorldConfig, step_robot

from _oracles import wall_balance

DT = 0.001


def run_to(p_ref, world, duration, state=None):
    state = state or RobotState()
    for _ in range(round(duration / DT)):
        state = step_robot(state, p_ref, world, DT)
    return state


class TestTracking:
    def test_first_order_convergence(self):
        world = WorldConfig(bandwidth=20.0)
        state = run_to(0.5, world, duration=5.0 / 20.0)  # five time constants
        assert state.p == pytest.approx(0.5, rel=0.01)

    def test_exponential_profile(self):
        world = WorldConfig(bandwidth=10.0)
        state = run_to(1.0, world, duration=0.1)  # one time constant
        assert state.p == pytest.approx(1.0 - math.exp(-1.0), rel=0.01)

    def test_speed_saturation(self):
        world = WorldConfig(bandwidth=20.0, max_speed=0.5)
        state = RobotState()
        for _ in range(100):
            state = step_robot(state, 10.0, world, DT)
            assert state.v == 0.5
        assert state.p == pytest.approx(0.05, rel=1e-9)

    def test_free_space_has_no_force(self):
        world = WorldConfig(wall_position=math.inf)
        state = run_to(2.0, world, duration=1.0)
        assert state.f_contact == 0.0

    def test_wall_at_infinity_matches_no_wall(self):
        far = WorldConfig(wall_position=math.inf)
        near_never_hit = WorldConfig(wall_position=100.0)
        a = run_to(0.7, far, duration=0.5)
        b = run_to(0.7, near_never_hit, duration=0.5)
        assert (a.p, a.v, a.f_contact) == (b.p, b.v, b.f_contact)


class TestWallContact:
    WORLD = WorldConfig(bandwidth=20.0, wall_position=0.2, wall_stiffness=500.0,
                        k_virtual=500.0)

    def test_force_is_one_sided(self):
        state = run_to(0.1, self.WORLD, duration=1.0)
        assert state.f_contact == 0.0

    def test_force_never_negative(self):
        state = RobotState()
        for k in range(3000):
            p_ref = 0.4 * math.sin(2 * math.pi * 0.7 * k * DT)
            state = step_robot(state, p_ref, self.WORLD, DT)
            assert state.f_contact >= 0.0

    def test_stored_force_consistent_with_position(self):
        state = run_to(0.4, self.WORLD, duration=2.0)
        pen = state.p - self.WORLD.wall_position
        assert pen > 0.0
        # settled: damping term gone, spring term only
        assert state.f_contact == pytest.approx(self.WORLD.wall_stiffness * pen, rel=1e-6)

    def test_static_balance_against_root_finder(self):
        for p_ref in (0.25, 0.30, 0.40, 0.55):
            state = run_to(p_ref, self.WORLD, duration=3.0)
            p_star, f_star = wall_balance(
                p_ref, self.WORLD.wall_position,
                self.WORLD.wall_stiffness, self.WORLD.k_virtual,
            )
            assert state.p == pytest.approx(p_star, rel=0.005)
            assert state.f_contact == pytest.approx(f_star, rel=0.005)

    def test_equal_stiffness_splits_penetration(self):
        # k_wall == k_virtual: robot parks halfway between wall and p_ref
        state = run_to(0.4, self.WORLD, duration=3.0)
        assert state.p == pytest.approx(0.3, rel=0.005)
        assert state.f_contact == pytest.approx(500.0 * 0.1, rel=0.005)

    def test_damping_only_on_approach(self):
        world = WorldConfig(bandwidth=20.0, wall_position=0.1, wall_stiffness=500.0,
                            wall_damping=50.0, k_virtual=500.0)
        state = RobotState()
        approach_extra = False
        for _ in range(2000):
            nxt = step_robot(state, 0.3, world, DT)
            spring = world.wall_stiffness * max(nxt.p - world.wall_position, 0.0)
            if nxt.v > 0 and nxt.p > world.wall_position:
                if nxt.f_contact > spring:
                    approach_extra = True
            elif nxt.v <= 0:
                assert nxt.f_contact == pytest.approx(spring, abs=1e-12)
            state = nxt
        assert approach_extra

    @settings(max_examples=40)
    @given(st.floats(0.21, 1.0))
    def test_steady_force_matches_oracle(self, p_ref):
        state = run_to(p_ref, self.WORLD, duration=3.0)
        _, f_star = wall_balance(p_ref, 0.2, 500.0, 500.0)
        assert state.f_contact == pytest.approx(f_star, rel=0.01)


class TestValidation:
    def test_world_invariants(self):
        with pytest.raises(ValueError):
            WorldConfig(bandwidth=0.0)
        with pytest.raises(ValueError):
            WorldConfig(wall_stiffness=-1.0)

    def test_state_must_be_finite(self):
        with pytest.raises(ValueError):
            RobotState(p=math.nan)

    def test_dt_must_be_positive(self):
        with pytest.raises(ValueError):
            step_robot(RobotState(), 0.0, WorldConfig(), 0.0)
