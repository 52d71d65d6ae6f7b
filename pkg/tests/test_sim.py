"""Simulator: world construction, forces, integration, metrics, determinism."""

import logging
import math

import numpy as np
import pytest

from shapefield.fields import Circle, Plane
from shapefield.morph import MorphSchedule
from shapefield.sim import (
    Disturbance,
    PackingError,
    SimConfig,
    SimulationDivergenceError,
    Trajectory,
    WorldState,
    apply_disturbance,
    as_field_driver,
    build_world,
    com_distance,
    contact_forces,
    control_forces,
    parse_sim_config,
    ring_radius_of,
    run,
    shape_error,
    spring_forces,
    stability_dt_bound,
    step,
)

QUIET = {"category": RuntimeWarning, "match": "stability"}


def small_config(**kw):
    # dt below the documented stability bound so runs stay warning-free
    base = dict(n_boundary=8, n_interior=12, duration=1.0, seed=3, dt=4e-4)
    base.update(kw)
    return SimConfig(**base)


def free_world(positions, velocities=None, mass=0.2, radius=0.03, springs=None, nb=None):
    """Hand-built world for focused force tests (no ring invariant implied)."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n, d = pos.shape
    vel = np.zeros_like(pos) if velocities is None else np.atleast_2d(
        np.asarray(velocities, dtype=float)
    )
    if springs is None:
        si = sj = np.zeros(0, dtype=np.intp)
        sk = sr = np.zeros(0)
    else:
        si = np.asarray([s[0] for s in springs], dtype=np.intp)
        sj = np.asarray([s[1] for s in springs], dtype=np.intp)
        sk = np.asarray([s[2] for s in springs], dtype=float)
        sr = np.asarray([s[3] for s in springs], dtype=float)
    mass = np.full(n, mass) if np.isscalar(mass) else np.asarray(mass, dtype=float)
    radius = np.full(n, radius) if np.isscalar(radius) else np.asarray(radius, dtype=float)
    return WorldState(
        pos=pos,
        vel=vel,
        theta=np.zeros(n) if d == 2 else None,
        omega=np.zeros(n) if d == 2 else None,
        radius=radius,
        mass=mass,
        boundary_count=n if nb is None else nb,
        spring_i=si,
        spring_j=sj,
        spring_k=sk,
        spring_rest=sr,
        time=0.0,
        seed=0,
    )


class TestBuildWorld:
    def test_default_counts(self):
        w = build_world(SimConfig())
        assert w.n == 210
        assert w.boundary_count == 30
        assert w.spring_i.size == 30

    def test_ring_only_world(self):
        w = build_world(SimConfig(n_interior=0))
        assert w.n == 30
        assert w.spring_i.size == 30

    def test_same_seed_is_bit_identical(self):
        a = build_world(SimConfig(seed=42))
        b = build_world(SimConfig(seed=42))
        for name in ("pos", "vel", "radius", "mass"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_different_seed_changes_packing(self):
        a = build_world(SimConfig(seed=1))
        b = build_world(SimConfig(seed=2))
        assert a.pos.tobytes() != b.pos.tobytes()

    def test_ring_topology_is_one_cycle(self):
        w = build_world(SimConfig(n_boundary=12, n_interior=0))
        neighbors = {k: set() for k in range(12)}
        for i, j in zip(w.spring_i, w.spring_j):
            neighbors[int(i)].add(int(j))
            neighbors[int(j)].add(int(i))
        assert all(len(v) == 2 for v in neighbors.values())
        seen = {0}
        prev, cur = None, 0
        for _ in range(12):
            nxt = [k for k in neighbors[cur] if k != prev]
            prev, cur = cur, nxt[0]
            seen.add(cur)
        assert seen == set(range(12))

    def test_no_initial_overlaps(self):
        w = build_world(SimConfig(seed=11))
        d = np.linalg.norm(w.pos[:, None, :] - w.pos[None, :, :], axis=2)
        rsum = w.radius[:, None] + w.radius[None, :]
        np.fill_diagonal(d, np.inf)
        assert np.all(d >= rsum - 1e-12)

    def test_grain_radii_equal_mixture(self):
        w = build_world(SimConfig())
        grains = w.radius[30:]
        small = np.sum(np.isclose(grains, 0.0325))
        large = np.sum(np.isclose(grains, 0.0325 * math.sqrt(2)))
        assert small == 90 and large == 90

    def test_robots_on_enclosing_circle(self):
        w = build_world(SimConfig(seed=5))
        rr = np.linalg.norm(w.pos[:30], axis=1)
        assert np.allclose(rr, rr[0])
        grain_extent = np.max(np.linalg.norm(w.pos[30:], axis=1) + w.radius[30:])
        assert rr[0] >= grain_extent + w.radius[0]

    def test_packing_limit_reports_achieved_count(self):
        with pytest.raises(PackingError) as err:
            build_world(SimConfig(max_packing_radius=0.3))
        assert err.value.achieved < err.value.requested

    def test_3d_point_agents(self):
        w = build_world(SimConfig(dimension=3, n_boundary=162, n_interior=0))
        assert w.n == 162
        assert w.dimension == 3
        assert w.spring_i.size == 0
        assert w.theta is None
        assert np.allclose(np.linalg.norm(w.pos, axis=1), 0.7)

    def test_3d_rejects_interior(self):
        with pytest.raises(ValueError):
            SimConfig(dimension=3, n_boundary=162, n_interior=10)

    def test_body_view(self):
        w = build_world(SimConfig())
        b = w.body(0)
        assert b.kind == "boundary-robot" and b.mass == 0.2 and b.radius == 0.03
        g = w.body(30)
        assert g.kind == "interior-grain" and g.mass == 0.03


class TestSpringForces:
    def test_rest_ring_has_zero_force(self):
        w = build_world(SimConfig(n_interior=0))
        F = spring_forces(w)
        assert np.max(np.abs(F)) < 1e-12

    def test_hookes_law_example(self):
        # k = 50 N/m, rest 0.1 m, separation 0.12 m -> 1.0 N attraction each
        w = free_world(
            [[0.0, 0.0], [0.12, 0.0]], springs=[(0, 1, 50.0, 0.1)]
        )
        F = spring_forces(w)
        assert F[0] == pytest.approx([1.0, 0.0], abs=1e-12)
        assert F[1] == pytest.approx([-1.0, 0.0], abs=1e-12)

    def test_newtons_third_law(self, rng):
        w = build_world(SimConfig(n_boundary=10, n_interior=0, seed=1))
        w = step(w, SimConfig(n_boundary=10, n_interior=0))  # perturb slightly
        F = spring_forces(w)
        assert np.max(np.abs(F.sum(axis=0))) < 1e-12

    def test_coincident_endpoints_zero_force(self, caplog):
        w = free_world([[0.0, 0.0], [0.0, 0.0]], springs=[(0, 1, 50.0, 0.1)])
        with caplog.at_level(logging.WARNING, logger="shapefield.sim"):
            F = spring_forces(w)
        assert np.all(F == 0.0)
        assert any("coincide" in r.message for r in caplog.records)


class TestContactForces:
    def test_no_overlap_no_force(self):
        w = free_world([[0.0, 0.0], [1.0, 0.0]], radius=0.0325)
        F = contact_forces(w, SimConfig())
        assert np.all(F == 0.0)

    def test_static_normal_force_example(self):
        # two grains r = 0.0325 m at 0.06 m apart, k_c = 5000 -> 25 N
        w = free_world([[0.0, 0.0], [0.06, 0.0]], radius=0.0325)
        cfg = SimConfig(contact_stiffness=5000.0)
        F = contact_forces(w, cfg)
        assert F[0, 0] == pytest.approx(-25.0, rel=1e-12)
        assert F[1, 0] == pytest.approx(25.0, rel=1e-12)
        assert F[0, 1] == F[1, 1] == 0.0

    def test_friction_cone_clamped(self, rng):
        cfg = SimConfig()
        mu = cfg.friction
        for _ in range(200):
            gap = rng.uniform(-0.02, -0.001)  # overlapping
            d = 0.065 + gap
            ang = rng.uniform(0, 2 * math.pi)
            p2 = [d * math.cos(ang), d * math.sin(ang)]
            w = free_world(
                [[0.0, 0.0], p2],
                velocities=rng.uniform(-1, 1, (2, 2)),
                radius=0.0325,
            )
            F = contact_forces(w, cfg)
            nvec = -np.asarray(p2) / d
            fn = float(F[0] @ nvec)
            ft = float(np.linalg.norm(F[0] - fn * nvec))
            assert fn >= 0.0
            assert ft <= mu * fn + 1e-12

    def test_pairwise_forces_cancel(self, rng):
        pos = rng.uniform(-0.1, 0.1, (12, 2))
        w = free_world(pos, velocities=rng.uniform(-1, 1, (12, 2)), radius=0.04)
        F = contact_forces(w, SimConfig())
        assert np.max(np.abs(F.sum(axis=0))) < 1e-12

    def test_damping_reduces_separating_force(self):
        cfg = SimConfig(contact_stiffness=5000.0, contact_damping=5.0)
        approaching = free_world(
            [[0.0, 0.0], [0.06, 0.0]], velocities=[[0.5, 0.0], [-0.5, 0.0]], radius=0.0325
        )
        separating = free_world(
            [[0.0, 0.0], [0.06, 0.0]], velocities=[[-0.5, 0.0], [0.5, 0.0]], radius=0.0325
        )
        Fa = contact_forces(approaching, cfg)[1, 0]
        Fs = contact_forces(separating, cfg)[1, 0]
        assert Fa > 25.0 > Fs


class TestControlForces:
    def test_zero_on_zero_set_in_squared_mode(self):
        field = as_field_driver(Circle((0.0, 0.0), 0.75))
        w = free_world([[0.75, 0.0]])
        F, u = control_forces(w, field, alpha=1.0, mode="squared")
        assert np.allclose(F, 0.0, atol=1e-15)

    def test_zero_gradient_at_center_in_paper_mode(self):
        field = as_field_driver(Circle((0.0, 0.0), 0.75))
        w = free_world([[0.0, 0.0]])
        F, u = control_forces(w, field, alpha=1.0, mode="paper")
        assert np.allclose(F, 0.0)

    def test_squared_mode_pushes_toward_boundary(self):
        # phi = 0.2083..., grad = (-2/3, 0): u = -phi*grad = (+0.1389, 0) N
        field = as_field_driver(Circle((0.0, 0.0), 0.75))
        w = free_world([[0.5, 0.0]])
        F, u = control_forces(w, field, alpha=1.0, mode="squared")
        assert F[0, 0] == pytest.approx(0.1388888888888889, rel=1e-12)
        assert F[0, 1] == 0.0

    def test_interior_grains_get_zero(self):
        cfg = small_config()
        w = build_world(cfg)
        field = as_field_driver(Circle((0.0, 0.0), ring_radius_of(w)))
        F, u = control_forces(w, field, alpha=1.0, mode="squared")
        assert np.all(F[w.boundary_count:] == 0.0)
        assert u.shape == (w.boundary_count, 2)

    def test_paper_mode_descends_phi(self):
        # paper-literal control pushes down-gradient: outward for an
        # inside-positive field
        field = as_field_driver(Circle((0.0, 0.0), 0.75))
        w = free_world([[0.5, 0.0]])
        F, _ = control_forces(w, field, alpha=1.0, mode="paper")
        assert F[0, 0] > 0.0


class TestStep:
    def test_no_force_no_motion(self):
        w = free_world([[0.3, -0.2]])
        cfg = SimConfig(drag=0.0)
        w2 = step(w, cfg, None, dt=0.01)
        assert np.array_equal(w2.pos, w.pos)
        assert np.array_equal(w2.vel, w.vel)
        assert w2.time == pytest.approx(0.01)

    def test_constant_force_velocity_exact(self):
        # dyadic constants so the semi-implicit recurrence is exact in
        # binary floating point: v_n = n * (F/m) * dt bit-for-bit
        class ConstantPull:
            """Duck-typed driver: unit force along +x in paper mode."""

            dimension = 2

            def values(self, pts, t):
                return np.zeros(pts.shape[0])

            def values_grads(self, pts, t):
                return np.zeros(pts.shape[0]), np.tile([-1.0, 0.0], (pts.shape[0], 1))

        cfg = SimConfig(drag=0.0, alpha=1.0, control_mode="paper", dt=1.0 / 1024.0)
        w = free_world([[0.0, 0.0]], mass=0.25)
        drv = ConstantPull()
        n = 1000
        for _ in range(n):
            w = step(w, cfg, drv, cfg.dt)
        assert w.vel[0, 0] == n * (1.0 / 0.25) * cfg.dt

    def test_spring_pair_energy_conservation(self):
        # isolated oscillator at dt = 1e-4: energy within 2% over 10 periods
        k, rest, m = 50.0, 0.1, 0.2
        w = free_world(
            [[0.0, 0.0], [0.12, 0.0]],
            mass=m,
            radius=1e-4,
            springs=[(0, 1, k, rest)],
        )
        cfg = SimConfig(drag=0.0, dt=1e-4)

        def energy(world):
            stretch = np.linalg.norm(world.pos[1] - world.pos[0]) - rest
            kinetic = 0.5 * (world.mass[:, None] * world.vel ** 2).sum()
            return kinetic + 0.5 * k * stretch ** 2

        e0 = energy(w)
        period = 2 * math.pi / math.sqrt(k / (m / 2.0))
        steps = int(round(10 * period / cfg.dt))
        worst = 0.0
        for i in range(steps):
            w = step(w, cfg, None, cfg.dt)
            worst = max(worst, abs(energy(w) - e0) / e0)
        assert worst < 0.02

    def test_divergence_is_reported_with_body(self):
        w = build_world(SimConfig(n_boundary=6, n_interior=0, seed=0))
        pos = w.pos.copy()
        pos[0] *= 1.5  # stretch one link hard
        import dataclasses

        w = dataclasses.replace(w, pos=pos)
        cfg = SimConfig(n_boundary=6, n_interior=0, dt=10.0, drag=0.0)
        with pytest.raises(SimulationDivergenceError) as err:
            for _ in range(2000):
                w = step(w, cfg, None, cfg.dt)
        assert "body" in str(err.value)

    def test_momentum_conserved_without_control_and_drag(self, rng):
        cfg = SimConfig(n_boundary=8, n_interior=12, drag=0.0, dt=1e-4, seed=9)
        w = build_world(cfg)
        import dataclasses

        w = dataclasses.replace(
            w, vel=rng.uniform(-0.5, 0.5, w.vel.shape)
        )
        p0 = (w.mass[:, None] * w.vel).sum(axis=0)
        from shapefield.sim import _PairCache

        cache = _PairCache(w)
        for _ in range(10_000):
            w = step(w, cfg, None, cfg.dt, cache)
        p1 = (w.mass[:, None] * w.vel).sum(axis=0)
        assert np.max(np.abs(p1 - p0)) < 1e-9

    def test_spring_topology_never_changes(self):
        cfg = small_config()
        w = build_world(cfg)
        si, sj = w.spring_i.tobytes(), w.spring_j.tobytes()
        for _ in range(50):
            w = step(w, cfg, None)
        assert w.spring_i.tobytes() == si and w.spring_j.tobytes() == sj


class TestDisturbance:
    def test_zero_impulse_is_noop(self):
        w = build_world(small_config())
        w2 = apply_disturbance(w, (0.0, 0.0), (0.0, 1.0), (0, 1))
        assert np.array_equal(w2.vel, w.vel)

    def test_velocity_increment(self):
        # 0.1 N s on a 0.2 kg robot -> 0.5 m/s
        w = build_world(small_config())
        w2 = apply_disturbance(w, (0.1, 0.0), (0.0, 1.0), (0,))
        assert w2.vel[0, 0] == pytest.approx(0.5, abs=0.0)
        assert np.all(w2.vel[1:] == 0.0)

    def test_confined_to_window(self):
        import dataclasses

        w = dataclasses.replace(build_world(small_config()), time=20.0)
        w2 = apply_disturbance(w, (0.1, 0.0), (10.0, 15.0), (0,))
        assert np.array_equal(w2.vel, w.vel)

    def test_empty_targets_rejected(self):
        w = build_world(small_config())
        with pytest.raises(ValueError):
            apply_disturbance(w, (0.1, 0.0), (0.0, 1.0), ())

    def test_bad_window_rejected(self):
        w = build_world(small_config())
        with pytest.raises(ValueError):
            apply_disturbance(w, (0.1, 0.0), (5.0, 5.0), (0,))


class TestMetrics:
    def test_shape_error_zero_on_zero_set(self):
        w = build_world(SimConfig(n_boundary=12, n_interior=0))
        field = Circle((0.0, 0.0), ring_radius_of(w))
        assert shape_error(w, field) < 1e-12

    def test_shape_error_single_robot_at_center(self):
        w = free_world([[0.0, 0.0]])
        assert shape_error(w, Circle((0.0, 0.0), 0.75)) == 0.375

    def test_shape_error_nonnegative(self, rng):
        w = build_world(small_config())
        assert shape_error(w, Circle((0.3, 0.1), 0.4)) >= 0.0

    def test_com_distance_examples(self):
        w = free_world([[0.0, 0.0], [2.0, 0.0]], mass=1.0)
        assert com_distance(w, (1.0, 0.0)) == 0.0
        assert com_distance(w, (1.0, 3.0)) == 3.0


class TestRun:
    def test_zero_duration_single_sample(self):
        cfg = small_config(duration=0.0, target=(0.0, 0.0))
        traj = run(cfg, Circle((0.0, 0.0), 0.5))
        assert traj.times.shape == (1,)
        assert traj.times[0] == 0.0
        assert traj.positions.shape[0] == 1

    def test_times_strictly_increasing(self):
        cfg = small_config(duration=0.5)
        traj = run(cfg, Circle((0.0, 0.0), 0.5))
        assert np.all(np.diff(traj.times) > 0.0)

    def test_determinism_bitwise(self):
        cfg = small_config(duration=0.5, seed=21)
        field = Circle((0.05, 0.0), 0.45)
        a = run(cfg, field)
        b = run(cfg, field)
        assert a.positions.tobytes() == b.positions.tobytes()
        assert a.shape_error.tobytes() == b.shape_error.tobytes()

    def test_dt_above_bound_warns_but_runs(self):
        cfg = small_config(duration=0.02, dt=1e-3)  # above the documented bound
        with pytest.warns(RuntimeWarning, match="stability"):
            traj = run(cfg, Circle((0.0, 0.0), 0.5))
        assert np.all(np.isfinite(traj.shape_error))

    def test_squared_mode_descends_phi_squared(self):
        # a single overdamped free robot: phi(q)^2 must be non-increasing
        # between samples once the velocity transient has died out
        field = Circle((0.0, 0.0), 0.75)
        cfg = SimConfig(drag=2.0, alpha=1.0, control_mode="squared", dt=1e-3)
        w = free_world([[0.3, 0.1]])
        drv = as_field_driver(field)
        vals = []
        for i in range(4000):
            w = step(w, cfg, drv, cfg.dt)
            if i % 100 == 0:
                vals.append(field.eval(w.pos[0]) ** 2)
        vals = np.asarray(vals[5:])  # skip the initial transient
        assert np.all(np.diff(vals) <= 1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            run(small_config(), Plane((0, 0, 0), (0, 0, 1)))

    def test_run_with_morph_and_disturbances(self):
        cfg = small_config(duration=0.3)
        w = build_world(cfg)
        R = ring_radius_of(w)
        sched = MorphSchedule(Circle((0, 0), R), Circle((0.05, 0), R), p=1.0)
        dist = Disturbance.evenly((0.02, 0.0), 0.1, 0.2, 3, (0, 1))
        traj = run(cfg, sched, disturbances=(dist,))
        assert isinstance(traj, Trajectory)
        assert np.all(np.isfinite(traj.shape_error))


class TestConfigFile:
    def test_round_trip_keys(self):
        text = """
        # comment
        n_boundary = 12
        n_interior = 0
        duration = 2.5       # trailing comment
        seed = 9
        control_mode = paper
        target = 0.15, 0.0
        grain_radii = 0.03, 0.04
        dimension = 2
        drag = 0
        """
        cfg = parse_sim_config(text)
        assert cfg.n_boundary == 12
        assert cfg.duration == 2.5
        assert cfg.control_mode == "paper"
        assert cfg.target == (0.15, 0.0)
        assert cfg.grain_radii == (0.03, 0.04)
        assert cfg.drag == 0.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_sim_config("gravity = 9.81")

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError):
            parse_sim_config("just words")

    def test_defaults_match_reference_platform(self):
        cfg = SimConfig()
        assert cfg.n_boundary == 30
        assert cfg.n_interior == 180
        assert cfg.robot_radius == 0.03
        assert cfg.robot_mass == 0.2
        assert cfg.grain_radii[0] == 0.0325
        assert cfg.grain_radii[1] == pytest.approx(0.0325 * math.sqrt(2))
        assert cfg.grain_mass == 0.03
        assert cfg.friction == 0.2
        assert cfg.spring_stiffness == 50.0

    def test_stability_bound_formula(self):
        cfg = SimConfig()
        assert stability_dt_bound(cfg) == pytest.approx(
            0.2 * math.sqrt(0.03 / 5000.0)
        )
        ring_only = SimConfig(n_interior=0)
        assert stability_dt_bound(ring_only) == pytest.approx(
            0.2 * math.sqrt(0.2 / 5000.0)
        )
