"""Building pouring scenes and advancing them until the grains settle.

Grains are indexed in grid order: lowest layer first, then by row (`y`),
then by column (`x`). This index order is also the order in which the
solver generates contacts, so it is part of the determinism contract.
"""
import logging
import math
from typing import Optional

import numpy as np

from granulab.core.errors import ConfigError, SimulationDivergedError
from granulab.core.models.common import ContactOrder
from granulab.core.models.grain import (
    ContactEvent,
    FunnelSpec,
    GrainParams,
    RunResult,
    SceneState,
    SimConfig,
    StepDiagnostics,
)
from granulab.core.sim.solver import STATUS_DIVERGED, advance

logger = logging.getLogger(__name__)

# Speed in m/s above which a simulation is considered to have diverged.
DIVERGENCE_SPEED = 1.0e3

_NO_PROFILE = np.zeros((2, 2))


def build_scene(params: GrainParams, funnel: FunnelSpec,
                config: SimConfig) -> SceneState:
    """Place grains on the initial grid above the funnel.

    The grid is centred on the funnel axis and its lowest layer sits one
    grain radius below the funnel's top rim. All velocities are zero.

    Raises:
        ConfigError: If the spout does not admit a grain, or if adjacent
            grid grains would overlap.

    Examples:
        >>> config = SimConfig(grain_grid=(1, 1, 1))
        >>> build_scene(GrainParams(0.5, 1e-4, 0.5), FunnelSpec(), config).positions.round(6).tolist()
        [[0.0, 0.0, 0.238]]
    """
    funnel.check_admits(params)
    if config.grid_spacing < params.diameter:
        raise ConfigError(
            f'grid spacing {config.grid_spacing} is smaller than the grain '
            f'diameter {params.diameter}; adjacent grains would overlap')

    nx, ny, nz = config.grain_grid
    xs = (np.arange(nx) - (nx - 1) / 2.0) * config.grid_spacing
    ys = (np.arange(ny) - (ny - 1) / 2.0) * config.grid_spacing
    zs = funnel.rim_height - params.radius + np.arange(nz) * config.grid_spacing
    z, y, x = np.meshgrid(zs, ys, xs, indexing='ij')
    positions = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return SceneState.at_rest(positions)


def substep_seeds(config: SimConfig, steps: int) -> np.ndarray:
    """Return the contact-order seeds of the substeps of frame `steps`.

    Seeds depend only on the run seed and the frame index, so a frame can
    be replayed from any saved state.
    """
    if config.contact_order is ContactOrder.FIXED:
        return np.zeros(config.substeps, dtype=np.uint32)
    sequence = np.random.SeedSequence([config.seed, steps])
    return sequence.generate_state(config.substeps, dtype=np.uint32)


def step(state: SceneState, params: GrainParams, funnel: Optional[FunnelSpec],
         config: SimConfig, diagnostics: Optional[StepDiagnostics] = None,
         record_contacts: bool = False) -> SceneState:
    """Advance a scene by one frame of `config.dt` seconds.

    Args:
        state: The state to advance. It is not modified.
        params: The grain material.
        funnel: The funnel collider, or None for a scene with only the
            ground plane.
        config: The solver configuration.
        diagnostics: If given, the solver diagnostics of this frame are
            merged into it.
        record_contacts: Whether to record the solved contacts of the
            final substep into `diagnostics`.

    Returns:
        The advanced state.

    Raises:
        SimulationDivergedError: If any speed exceeds the divergence
            threshold or any coordinate becomes non-finite.
    """
    new = state.copy()
    h = config.substep_dt
    seeds = substep_seeds(config, state.steps)
    profile = funnel.profile() if funnel is not None else _NO_PROFILE
    (status, done, contact_count, max_pen, max_cone,
     body_i, body_j, normal, gap, lam_n, lam_t) = advance(
        new.positions, new.linear_velocities, new.angular_velocities, seeds, h,
        np.asarray(config.gravity, dtype=np.float64),
        params.radius, params.mass, params.inertia, params.mu_s, params.mu_r, params.e,
        config.relaxation, config.solver_iterations, config.position_iterations,
        config.restitution_threshold, config.contact_margin * params.radius,
        config.lock_rotation, config.angular_damping,
        config.contact_order is ContactOrder.SEEDED,
        funnel is not None, profile, DIVERGENCE_SPEED)

    if status == STATUS_DIVERGED:
        time = state.time + done * h
        max_speed = float(np.nan_to_num(
            np.sqrt((new.linear_velocities ** 2).sum(axis=1)), nan=np.inf).max())
        raise SimulationDivergedError(
            f'simulation diverged at t={time:.4f}s (max speed {max_speed:.3g} m/s)',
            time=time, max_speed=max_speed)

    new.time = state.time + config.dt
    new.steps = state.steps + 1
    if diagnostics is not None:
        frame = StepDiagnostics(contact_count=int(contact_count),
                                max_penetration=float(max_pen),
                                max_cone_excess=float(max_cone))
        if record_contacts:
            frame.contacts = [
                ContactEvent(pair=(int(body_i[c]), int(body_j[c])),
                             normal=tuple(float(v) for v in normal[c]),
                             penetration_depth=float(-gap[c]),
                             normal_impulse=float(lam_n[c]),
                             tangential_impulse=float(lam_t[c]))
                for c in range(len(body_i))
            ]
        diagnostics.merge(frame)
    return new


def run_to_rest(params: GrainParams, funnel: Optional[FunnelSpec],
                config: SimConfig, state: Optional[SceneState] = None,
                diagnostics: Optional[StepDiagnostics] = None) -> RunResult:
    """Step a scene until it comes to rest or `config.max_sim_time` passes.

    The scene is at rest once every grain's speed has stayed below
    `config.rest_speed_threshold` for `config.rest_hold_time` seconds.

    Args:
        params: The grain material.
        funnel: The funnel collider, or None.
        config: The solver configuration.
        state: The initial state. Defaults to :func:`build_scene`, which
            requires a funnel.
        diagnostics: Optional accumulator for solver diagnostics.
    """
    if state is None:
        if funnel is None:
            raise ConfigError('an initial state is required for a scene without a funnel')
        state = build_scene(params, funnel, config)

    max_steps = math.ceil(config.max_sim_time / config.dt - 1e-9)
    hold_steps = math.ceil(config.rest_hold_time / config.dt - 1e-9)
    held = 0
    rested = False
    for _ in range(max_steps):
        state = step(state, params, funnel, config, diagnostics)
        if state.max_speed() < config.rest_speed_threshold:
            held += 1
            if held >= hold_steps:
                rested = True
                break
        else:
            held = 0

    if rested:
        logger.debug('scene of %d grains rested after %.3fs',
                     state.grain_count, state.time)
    else:
        logger.info('scene of %d grains timed out at %.3fs (max speed %.3g m/s)',
                    state.grain_count, state.time, state.max_speed())
    return RunResult(state=state, rested=rested, diagnostics=diagnostics)


def simulate_formation(theta: GrainParams, funnel: FunnelSpec,
                       config: SimConfig) -> SceneState:
    """Simulate a pour and return the settled formation.

    This is the forward model mapping material parameters to a formation:
    the same inputs, seed included, always give bit-identical positions.
    """
    result = run_to_rest(theta, funnel, config)
    if result.timed_out:
        logger.warning('formation for %s did not come to rest within %.1fs',
                       theta, config.max_sim_time)
    return result.state
