"""Deterministic rigid-body simulator for a boundary-constrained granular robot.

The 2-D robot is a closed elastic ring of actively driven boundary disks
(linked by linear springs) around a bed of passive granular disks.  Boundary
robots feel a control force derived from a distance field's gradient; all
bodies interact through penalty contacts with Coulomb friction and a linear
viscous drag.  Integration is semi-implicit Euler with a fixed body order,
so a run is bit-reproducible from its configuration and seed alone.

The 3-D mode drives independent point agents (no membrane, no grains,
no contacts) with the same control law, which is how the cube-forming demo
operates.

Units are SI throughout: meters, kilograms, seconds, newtons.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import FieldExpr
from .lang import ShapeProgram
from .morph import DegenerateBlendError, MorphSchedule
from .tolerances import (
    CONTACT_COINCIDENT_EPS,
    CONTACT_SLIP_EPS,
    SPRING_COINCIDENT_EPS,
    STABILITY_SAFETY,
)

__all__ = [
    "SimConfig",
    "BodyState",
    "SpringLink",
    "WorldState",
    "Disturbance",
    "Trajectory",
    "PackingError",
    "SimulationDivergenceError",
    "FieldDriver",
    "as_field_driver",
    "build_world",
    "spring_forces",
    "contact_forces",
    "control_forces",
    "step",
    "apply_disturbance",
    "shape_error",
    "com_distance",
    "stability_dt_bound",
    "run",
    "parse_sim_config",
]

log = logging.getLogger(__name__)

_GRAIN_SPACING_MARGIN = 0.05   # hex pitch = 2 r_max (1 + margin)
_GRAIN_JITTER_FRACTION = 0.8   # of the per-grain clearance
_RING_CLEARANCE = 0.01         # gap between packing and ring robots (m)
_RING_PACK_FACTOR = 1.25       # min robot spacing, in robot diameters


class PackingError(RuntimeError):
    """Interior packing could not fit the requested grain count."""

    def __init__(self, requested: int, achieved: int, message: str):
        self.requested = requested
        self.achieved = achieved
        super().__init__(f"{message} (requested {requested}, achieved {achieved})")


class SimulationDivergenceError(RuntimeError):
    """A body reached a non-finite state; names the body and the force term."""


@dataclass(frozen=True)
class SimConfig:
    """Physical and numerical parameters of a run.

    Defaults follow the reference robot: 30 boundary disks (radius 3 cm,
    mass 200 g) around 180 grains in an equal mixture of radii r and
    sqrt(2) r with r = 3.25 cm and mass 30 g each, friction 0.2, ring
    springs of 50 N/m.  Contact stiffness/damping, drag, thrust, and dt
    are simulation choices, documented here and overridable.
    """

    n_boundary: int = 30
    n_interior: int = 180
    robot_radius: float = 0.03
    robot_mass: float = 0.2
    grain_radii: tuple[float, float] = (0.0325, 0.0325 * math.sqrt(2.0))
    grain_mass: float = 0.03
    friction: float = 0.2
    spring_stiffness: float = 50.0
    alpha: float = 1.0
    control_mode: str = "squared"  # "squared" (-a*phi*grad) or "paper" (-a*grad)
    contact_stiffness: float = 5000.0
    contact_damping: float = 5.0
    drag: float = 2.0
    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    dimension: int = 2
    sample_interval: float = 0.1
    target: tuple[float, ...] | None = None
    spawn_radius: float = 0.7   # 3-D agent shell radius (m)
    max_packing_radius: float | None = None

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.control_mode not in ("squared", "paper"):
            raise ValueError(f"unknown control mode {self.control_mode!r}")
        for name in (
            "robot_radius",
            "robot_mass",
            "grain_mass",
            "spring_stiffness",
            "contact_stiffness",
            "dt",
            "sample_interval",
            "spawn_radius",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("friction", "contact_damping", "drag", "alpha", "duration"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_boundary < 1 or self.n_interior < 0:
            raise ValueError("body counts out of range")
        if self.dimension == 2 and self.n_boundary < 3:
            raise ValueError("2-D ring needs at least 3 boundary robots")
        if self.dimension == 3 and self.n_interior != 0:
            raise ValueError("3-D mode drives point agents only; set n_interior=0")
        if any(r <= 0.0 for r in self.grain_radii):
            raise ValueError("grain radii must be positive")


@dataclass(frozen=True)
class BodyState:
    """Per-body view of the world arrays (positions in m, velocities in m/s)."""

    position: tuple[float, ...]
    velocity: tuple[float, ...]
    orientation: float
    angular_velocity: float
    radius: float
    mass: float
    kind: str  # "boundary-robot" | "interior-grain"


@dataclass(frozen=True)
class SpringLink:
    i: int
    j: int
    stiffness: float
    rest_length: float


@dataclass(frozen=True)
class WorldState:
    """Complete rigid-body state; arrays are treated as immutable.

    Body order is fixed: boundary robots first (``boundary_count`` of
    them), then interior grains.  In a built 2-D world the boundary robots
    form one closed spring ring (each has exactly two spring neighbors).
    ``last_control`` carries the previous step's control forces so a
    degenerate morph blend can fall back per robot.
    """

    pos: np.ndarray  # (n, d)
    vel: np.ndarray  # (n, d)
    theta: np.ndarray | None  # (n,), 2-D only
    omega: np.ndarray | None  # (n,), 2-D only
    radius: np.ndarray  # (n,)
    mass: np.ndarray  # (n,)
    boundary_count: int
    spring_i: np.ndarray  # (ns,) int
    spring_j: np.ndarray  # (ns,) int
    spring_k: np.ndarray  # (ns,)
    spring_rest: np.ndarray  # (ns,)
    time: float
    seed: int
    last_control: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def dimension(self) -> int:
        return self.pos.shape[1]

    def body(self, i: int) -> BodyState:
        return BodyState(
            position=tuple(self.pos[i]),
            velocity=tuple(self.vel[i]),
            orientation=float(self.theta[i]) if self.theta is not None else 0.0,
            angular_velocity=float(self.omega[i]) if self.omega is not None else 0.0,
            radius=float(self.radius[i]),
            mass=float(self.mass[i]),
            kind="boundary-robot" if i < self.boundary_count else "interior-grain",
        )

    @property
    def springs(self) -> tuple[SpringLink, ...]:
        return tuple(
            SpringLink(int(i), int(j), float(k), float(r))
            for i, j, k, r in zip(
                self.spring_i, self.spring_j, self.spring_k, self.spring_rest
            )
        )


@dataclass(frozen=True)
class Disturbance:
    """External impulse pulses confined to a time window.

    ``impulse`` (N s) is applied to each target body at each time in
    ``times``; times outside [t0, t1] are dropped by the window check.
    """

    impulse: tuple[float, ...]
    t0: float
    t1: float
    targets: tuple[int, ...]
    times: tuple[float, ...]

    @classmethod
    def evenly(cls, impulse, t0: float, t1: float, n_pulses: int, targets):
        """n_pulses equally spaced through [t0, t1]."""
        times = tuple(np.linspace(t0, t1, n_pulses)) if n_pulses > 1 else (t0,)
        return cls(tuple(impulse), float(t0), float(t1), tuple(targets), times)


@dataclass(frozen=True)
class Trajectory:
    """Sampled run: times are strictly increasing; one row per sample."""

    times: np.ndarray  # (k,)
    positions: np.ndarray  # (k, n, d)
    com: np.ndarray  # (k, d)
    shape_error: np.ndarray  # (k,)
    target_distance: np.ndarray  # (k,), NaN when no target configured
    boundary_count: int
    dimension: int


# ---------------------------------------------------------------------------
# Field drivers: one interface over static fields, morphs, and programs
# ---------------------------------------------------------------------------

class FieldDriver:
    """Uniform (possibly time-varying) field interface for the simulator."""

    def __init__(self, source: FieldExpr | MorphSchedule):
        self._morph = isinstance(source, MorphSchedule)
        self.source = source
        self.dimension = source.dimension

    def values(self, pts: np.ndarray, t: float) -> np.ndarray:
        if self._morph:
            return self.source.values(pts, t)
        v, _ = self.source._vg(np.asarray(pts, dtype=float), want_grad=False)
        return v

    def values_grads(self, pts: np.ndarray, t: float):
        if self._morph:
            return self.source.values_grads(pts, t)
        return self.source._vg(np.asarray(pts, dtype=float), want_grad=True)


def as_field_driver(program) -> FieldDriver:
    """Build a driver from a FieldExpr, MorphSchedule, or ShapeProgram."""
    if isinstance(program, FieldDriver):
        return program
    if isinstance(program, ShapeProgram):
        source = program.morph_schedule() if program.has_morph else program.field_expr()
        return FieldDriver(source)
    if isinstance(program, (FieldExpr, MorphSchedule)):
        return FieldDriver(program)
    raise TypeError(f"cannot drive the simulator with {type(program).__name__}")


# ---------------------------------------------------------------------------
# World construction
# ---------------------------------------------------------------------------

def _hex_packing(config: SimConfig, rng: np.random.Generator):
    """Jittered hex lattice of grains, radii alternating for an equal mixture."""
    n = config.n_interior
    r_small, r_large = sorted(config.grain_radii)
    pitch = 2.0 * r_large * (1.0 + _GRAIN_SPACING_MARGIN)
    # lattice sized generously from the target count
    est_radius = pitch * math.sqrt(n * math.sqrt(3.0) / (2.0 * math.pi)) + 3.0 * pitch
    rows = int(math.ceil(est_radius / (pitch * math.sqrt(3.0) / 2.0))) + 1
    cols = int(math.ceil(est_radius / pitch)) + 1
    jj, ii = np.meshgrid(
        np.arange(-rows, rows + 1), np.arange(-cols, cols + 1), indexing="ij"
    )
    xs = (ii + 0.5 * (jj % 2)) * pitch
    ys = jj * (pitch * math.sqrt(3.0) / 2.0)
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    r2 = np.einsum("ij,ij->i", pts, pts)
    order = np.lexsort((ii.ravel(), jj.ravel(), r2))
    pts = pts[order]
    if pts.shape[0] < n:
        raise PackingError(n, pts.shape[0], "hex lattice too small")
    pts = pts[:n]
    radii = np.where(np.arange(n) % 2 == 0, r_small, r_large)
    clearance = 0.5 * (pitch - 2.0 * r_large)
    jitter = rng.uniform(
        -_GRAIN_JITTER_FRACTION * clearance,
        _GRAIN_JITTER_FRACTION * clearance,
        size=(n, 2),
    )
    pts = pts + jitter
    if config.max_packing_radius is not None:
        extent = np.linalg.norm(pts, axis=1) + radii
        inside = int(np.sum(extent <= config.max_packing_radius))
        if inside < n:
            raise PackingError(n, inside, "packing exceeds max_packing_radius")
    return pts, radii


def _fibonacci_sphere(n: int, radius: float) -> np.ndarray:
    k = np.arange(n, dtype=float)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    z = 1.0 - 2.0 * (k + 0.5) / n
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return radius * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def build_world(config: SimConfig) -> WorldState:
    """Assemble the initial world; bit-identical for identical configs.

    2-D: grains packed on a seeded jittered hex lattice, boundary robots
    placed uniformly on a circle just enclosing the packing, ring springs
    at rest.  3-D: point agents on a Fibonacci sphere shell, no springs.
    """
    rng = np.random.default_rng(config.seed)
    nb = config.n_boundary
    if config.dimension == 3:
        pos = _fibonacci_sphere(nb, config.spawn_radius)
        return WorldState(
            pos=pos,
            vel=np.zeros_like(pos),
            theta=None,
            omega=None,
            radius=np.full(nb, config.robot_radius),
            mass=np.full(nb, config.robot_mass),
            boundary_count=nb,
            spring_i=np.zeros(0, dtype=np.intp),
            spring_j=np.zeros(0, dtype=np.intp),
            spring_k=np.zeros(0),
            spring_rest=np.zeros(0),
            time=0.0,
            seed=config.seed,
        )

    if config.n_interior > 0:
        grain_pos, grain_radii = _hex_packing(config, rng)
        packing_radius = float(
            np.max(np.linalg.norm(grain_pos, axis=1) + grain_radii)
        )
    else:
        grain_pos = np.zeros((0, 2))
        grain_radii = np.zeros(0)
        packing_radius = 0.0

    min_ring = nb * (2.0 * config.robot_radius) * _RING_PACK_FACTOR / (2.0 * math.pi)
    ring_radius = max(
        packing_radius + config.robot_radius + _RING_CLEARANCE, min_ring
    )
    angles = 2.0 * math.pi * np.arange(nb) / nb
    robot_pos = ring_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rest = 2.0 * ring_radius * math.sin(math.pi / nb)

    pos = np.concatenate([robot_pos, grain_pos], axis=0)
    radius = np.concatenate([np.full(nb, config.robot_radius), grain_radii])
    mass = np.concatenate(
        [np.full(nb, config.robot_mass), np.full(grain_pos.shape[0], config.grain_mass)]
    )
    n = pos.shape[0]
    return WorldState(
        pos=pos,
        vel=np.zeros_like(pos),
        theta=np.zeros(n),
        omega=np.zeros(n),
        radius=radius,
        mass=mass,
        boundary_count=nb,
        spring_i=np.arange(nb, dtype=np.intp),
        spring_j=(np.arange(nb, dtype=np.intp) + 1) % nb,
        spring_k=np.full(nb, config.spring_stiffness),
        spring_rest=np.full(nb, rest),
        time=0.0,
        seed=config.seed,
    )


def ring_radius_of(world: WorldState) -> float:
    """Radius of the boundary ring as built (robots sit on one circle)."""
    return float(np.linalg.norm(world.pos[0]))


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

def spring_forces(world: WorldState) -> np.ndarray:
    """Linear spring forces: k (|d| - rest) along the link, equal/opposite."""
    F = np.zeros_like(world.pos)
    if world.spring_i.size == 0:
        return F
    dvec = world.pos[world.spring_j] - world.pos[world.spring_i]
    with np.errstate(over="ignore"):
        # a diverging state may overflow here; step() reports it right after
        dist = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
    ok = dist > SPRING_COINCIDENT_EPS
    if not np.all(ok):
        log.warning(
            "spring endpoints coincide for links %s; zero force applied",
            np.nonzero(~ok)[0].tolist(),
        )
    fmag = np.where(ok, world.spring_k * (dist - world.spring_rest), 0.0)
    scale = np.zeros_like(dist)
    with np.errstate(invalid="ignore"):
        np.divide(fmag, dist, out=scale, where=ok)
    pair = dvec * scale[:, None]
    np.add.at(F, world.spring_i, pair)
    np.add.at(F, world.spring_j, -pair)
    return F


class _PairCache:
    """Precomputed pair geometry: candidate mask and summed radii."""

    def __init__(self, world: WorldState):
        n = world.n
        rsum = world.radius[:, None] + world.radius[None, :]
        self.rsum2_mat = rsum * rsum
        # only index pairs with i < j; the diagonal and lower triangle are off
        self.upper = np.triu(np.ones((n, n), dtype=bool), k=1)


def contact_forces(
    world: WorldState, config: SimConfig, cache: _PairCache | None = None
) -> np.ndarray:
    """Penalty contacts with Coulomb friction for every overlapping pair.

    Normal force ``max(k_c * penetration - c_c * separation_rate, 0)``;
    tangential force opposes slip with magnitude clamped to mu |F_n|
    (ramped linearly below CONTACT_SLIP_EPS to avoid chatter).
    """
    F = np.zeros_like(world.pos)
    if world.dimension == 3 or world.n < 2:
        return F  # 3-D point agents do not collide
    if cache is None:
        cache = _PairCache(world)
    pos = world.pos
    with np.errstate(over="ignore", invalid="ignore"):
        # a diverging state may overflow here; step() reports it right after
        sq = np.einsum("ij,ij->i", pos, pos)
        d2_mat = sq[:, None] + sq[None, :] - 2.0 * (pos @ pos.T)
        hit = (d2_mat < cache.rsum2_mat) & cache.upper
    if not np.any(hit):
        return F
    i, j = np.nonzero(hit)
    dph = pos[i] - pos[j]
    dist = np.sqrt(np.einsum("ij,ij->i", dph, dph))
    ok = dist > CONTACT_COINCIDENT_EPS
    dist = np.where(ok, dist, 1.0)
    nvec = dph / dist[:, None]  # from j toward i
    pen = (world.radius[i] + world.radius[j]) - dist
    dv = world.vel[i] - world.vel[j]
    vn = np.einsum("ij,ij->i", dv, nvec)  # separation rate along the normal
    fn = np.maximum(config.contact_stiffness * pen - config.contact_damping * vn, 0.0)
    fn = np.where(ok, fn, 0.0)
    vt = dv - vn[:, None] * nvec
    vt_mag = np.linalg.norm(vt, axis=1)
    ft_mag = config.friction * fn * np.minimum(1.0, vt_mag / CONTACT_SLIP_EPS)
    tdir = np.zeros_like(vt)
    np.divide(vt, vt_mag[:, None], out=tdir, where=vt_mag[:, None] > 0.0)
    pair = fn[:, None] * nvec - ft_mag[:, None] * tdir
    np.add.at(F, i, pair)
    np.add.at(F, j, -pair)
    return F


def control_forces(
    world: WorldState,
    driver: FieldDriver | None,
    alpha: float,
    mode: str,
    prev: np.ndarray | None = None,
):
    """Gradient control on boundary robots; grains get zero.

    ``paper`` mode is the literal law -alpha grad(phi); ``squared`` mode is
    -alpha phi grad(phi), the descent direction of phi^2/2, which attracts
    to the zero set from both sides.  Returns (full forces, control rows).
    If a morph blend is degenerate at some robot, that robot reuses its
    previous control (logged).
    """
    F = np.zeros_like(world.pos)
    nb = world.boundary_count
    if driver is None or alpha == 0.0 or nb == 0:
        return F, np.zeros((nb, world.dimension))
    q = world.pos[:nb]
    try:
        v, g = driver.values_grads(q, world.time)
    except DegenerateBlendError as err:
        u = np.zeros((nb, world.dimension))
        bad = err.mask
        good = ~bad
        if np.any(good):
            vg, gg = driver.values_grads(q[good], world.time)
            if mode == "squared":
                u[good] = -alpha * vg[:, None] * gg
            else:
                u[good] = -alpha * gg
        if prev is not None:
            u[bad] = prev[bad]
        log.warning(
            "degenerate morph blend at t=%.6f for robots %s; reusing previous control",
            world.time,
            np.nonzero(bad)[0].tolist(),
        )
        F[:nb] = u
        return F, u
    if mode == "squared":
        u = -alpha * v[:, None] * g
    elif mode == "paper":
        u = -alpha * g
    else:
        raise ValueError(f"unknown control mode {mode!r}")
    F[:nb] = u
    return F, u


def stability_dt_bound(config: SimConfig) -> float:
    """Documented step bound: dt <= 0.2 sqrt(m_min / k_c)."""
    m_min = config.robot_mass
    if config.n_interior > 0:
        m_min = min(m_min, config.grain_mass)
    return STABILITY_SAFETY * math.sqrt(m_min / config.contact_stiffness)


def step(
    world: WorldState,
    config: SimConfig,
    driver: FieldDriver | None = None,
    dt: float | None = None,
    cache: _PairCache | None = None,
) -> WorldState:
    """One semi-implicit Euler step (v then x), fixed body order.

    Total force = springs + contacts + control - drag * v.  Raises
    :class:`SimulationDivergenceError` naming the body and term if any
    state goes non-finite.
    """
    dt = config.dt if dt is None else dt
    Fs = spring_forces(world)
    Fc = contact_forces(world, config, cache)
    Fu, u = control_forces(
        world, driver, config.alpha, config.control_mode, world.last_control
    )
    F = Fs + Fc + Fu - config.drag * world.vel
    vel = world.vel + F * (dt / world.mass[:, None])
    pos = world.pos + vel * dt
    if not (np.all(np.isfinite(vel)) and np.all(np.isfinite(pos))):
        bad = int(np.nonzero(~np.isfinite(vel).all(axis=1) | ~np.isfinite(pos).all(axis=1))[0][0])
        term = "state"
        for name, arr in (("spring", Fs), ("contact", Fc), ("control", Fu)):
            if not np.all(np.isfinite(arr[bad])):
                term = name
                break
        raise SimulationDivergenceError(
            f"body {bad} has a non-finite {term} force/state at t={world.time:.6f}"
        )
    theta = world.theta
    if theta is not None:
        # no contact torques in this model; orientation just integrates omega
        theta = theta + world.omega * dt
    return replace(
        world,
        pos=pos,
        vel=vel,
        theta=theta,
        time=world.time + dt,
        last_control=u,
    )


def apply_disturbance(
    world: WorldState, impulse, window: tuple[float, float], targets
) -> WorldState:
    """Instantaneous velocity kicks impulse/m on ``targets``.

    A no-op when the world clock is outside [t0, t1]: disturbances stay
    confined to their window.
    """
    t0, t1 = window
    if not t0 < t1:
        raise ValueError(f"disturbance window must have t0 < t1, got {window}")
    targets = np.asarray(list(targets), dtype=np.intp)
    if targets.size == 0:
        raise ValueError("disturbance target set is empty")
    if not (t0 <= world.time <= t1):
        return world
    imp = np.asarray(impulse, dtype=float)
    if imp.shape != (world.dimension,):
        raise ValueError(f"impulse must have {world.dimension} components")
    vel = world.vel.copy()
    vel[targets] += imp / world.mass[targets, None]
    return replace(world, vel=vel)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def shape_error(world: WorldState, field, t: float | None = None) -> float:
    """Mean |phi| over the boundary robots (m); zero when all sit on the zero set."""
    driver = as_field_driver(field)
    t = world.time if t is None else t
    v = driver.values(world.pos[: world.boundary_count], t)
    return float(np.mean(np.abs(v)))


def com_distance(world: WorldState, target) -> float:
    """Distance from the mass-weighted center of all bodies to ``target``."""
    com = (world.mass[:, None] * world.pos).sum(axis=0) / world.mass.sum()
    return float(np.linalg.norm(com - np.asarray(target, dtype=float)))


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def run(
    config: SimConfig,
    program,
    disturbances: tuple[Disturbance, ...] = (),
    return_world: bool = False,
):
    """Build a world and step it for ``config.duration``, sampling metrics.

    ``program`` may be a FieldExpr, MorphSchedule, ShapeProgram, or
    FieldDriver.  Identical (config, program, disturbances) give
    bit-identical trajectories.  With ``return_world`` the final
    :class:`WorldState` is returned alongside the trajectory.
    """
    driver = as_field_driver(program)
    if driver.dimension != config.dimension:
        raise ValueError(
            f"field is {driver.dimension}-D but the simulation is {config.dimension}-D"
        )
    world = build_world(config)
    cache = _PairCache(world) if config.dimension == 2 else None
    if config.dt > stability_dt_bound(config) and (
        config.n_interior > 0 or config.dimension == 2
    ):
        warnings.warn(
            f"dt={config.dt} exceeds the documented stability bound "
            f"{stability_dt_bound(config):.2e}; contacts may ring",
            RuntimeWarning,
            stacklevel=2,
        )

    pulses = sorted(
        ((t, d) for d in disturbances for t in d.times), key=lambda p: p[0]
    )
    pulse_idx = 0

    n_steps = int(round(config.duration / config.dt))
    sample_every = max(1, int(round(config.sample_interval / config.dt)))

    times = []
    positions = []
    errors = []
    dists = []

    def record(w: WorldState):
        times.append(w.time)
        positions.append(w.pos.copy())
        errors.append(shape_error(w, driver))
        if config.target is not None:
            dists.append(com_distance(w, config.target))
        else:
            dists.append(math.nan)

    record(world)
    for k in range(n_steps):
        while pulse_idx < len(pulses) and pulses[pulse_idx][0] <= world.time + 1e-12:
            t_pulse, d = pulses[pulse_idx]
            world = apply_disturbance(world, d.impulse, (d.t0, d.t1), d.targets)
            pulse_idx += 1
        world = step(world, config, driver, config.dt, cache)
        if (k + 1) % sample_every == 0 or k == n_steps - 1:
            record(world)

    com = np.array(
        [
            (world.mass[:, None] * p).sum(axis=0) / world.mass.sum()
            for p in positions
        ]
    )
    traj = Trajectory(
        times=np.asarray(times),
        positions=np.asarray(positions),
        com=com,
        shape_error=np.asarray(errors),
        target_distance=np.asarray(dists),
        boundary_count=world.boundary_count,
        dimension=world.dimension,
    )
    if return_world:
        return traj, world
    return traj


# ---------------------------------------------------------------------------
# Flat key=value configuration files
# ---------------------------------------------------------------------------

_TUPLE_KEYS = {"grain_radii", "target"}
_INT_KEYS = {"n_boundary", "n_interior", "seed", "dimension"}
_STR_KEYS = {"control_mode"}


def parse_sim_config(text: str) -> SimConfig:
    """Parse a flat ``key = value`` config file into a :class:`SimConfig`.

    Unknown keys are rejected.  Tuples use commas: ``target = 0.15, 0.0``.
    """
    valid = set(SimConfig.__dataclass_fields__)
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in valid:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in _STR_KEYS:
            overrides[key] = value
        elif key in _TUPLE_KEYS:
            overrides[key] = tuple(float(v) for v in value.split(","))
        elif key in _INT_KEYS:
            overrides[key] = int(value)
        elif key == "max_packing_radius":
            overrides[key] = None if value.lower() == "none" else float(value)
        else:
            overrides[key] = float(value)
    return SimConfig(**overrides)
