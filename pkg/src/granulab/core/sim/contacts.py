"""Contact generation against other grains, the ground and the funnel wall.

Contacts are stored as flat arrays. For contact `c`, `body_j[c]` is either
a grain index or one of the static collider ids; the normal points from
body `j` to body `i` and `gap` is the surface separation (negative when
overlapping).
"""
import math

import numpy as np
from numba import njit

from granulab.core.models.grain import FUNNEL_ID, GROUND_ID
from granulab.core.sim.broadphase import find_pairs


@njit(cache=True)
def funnel_gap(x, y, z, radius, profile):
    """Distance from a grain surface to the funnel wall and its normal.

    The wall is the surface of revolution of the `(radius, height)`
    polyline `profile` about the vertical axis.

    Returns:
        `(gap, nx, ny, nz)` with the unit normal pointing from the wall
        towards the grain centre.
    """
    rho = math.sqrt(x * x + y * y)
    if rho > 1e-12:
        ex = x / rho
        ey = y / rho
    else:
        ex = 1.0
        ey = 0.0
    best = np.inf
    best_dr = 0.0
    best_dz = 1.0
    for s in range(profile.shape[0] - 1):
        ar = profile[s, 0]
        az = profile[s, 1]
        sr = profile[s + 1, 0] - ar
        sz = profile[s + 1, 1] - az
        length2 = sr * sr + sz * sz
        t = ((rho - ar) * sr + (z - az) * sz) / length2
        t = min(max(t, 0.0), 1.0)
        dr = rho - (ar + t * sr)
        dz = z - (az + t * sz)
        dist = math.sqrt(dr * dr + dz * dz)
        if dist < best:
            best = dist
            best_dr = dr
            best_dz = dz
    if best > 1e-12:
        nr = best_dr / best
        nz = best_dz / best
    else:
        nr = 0.0
        nz = 1.0
    return best - radius, nr * ex, nr * ey, nz


@njit(cache=True)
def _append(body_i, body_j, normal, gap, c, i, j, nx, ny, nz, g):
    body_i[c] = i
    body_j[c] = j
    normal[c, 0] = nx
    normal[c, 1] = ny
    normal[c, 2] = nz
    gap[c] = g


@njit(cache=True)
def build_contacts(positions, velocities, radius, margin, h, has_funnel, profile):
    """Generate the contacts of one substep.

    Contacts are emitted in ascending order of the first grain; for each
    grain the ground contact comes first, then the funnel contact, then
    its grain pairs.

    Args:
        positions: Grain centres, shape `(n, 3)`.
        velocities: Grain velocities, used to widen static contact margins.
        radius: The grain radius.
        margin: The speculative gap below which bodies become contacts.
        h: The substep duration.
        has_funnel: Whether the funnel wall is present.
        profile: The funnel wall profile, shape `(k, 2)`.

    Returns:
        `(body_i, body_j, normal, gap)` arrays.
    """
    n = positions.shape[0]
    pair_i, pair_j = find_pairs(positions, 2.0 * radius + margin)
    capacity = pair_i.shape[0] + 2 * n
    body_i = np.empty(capacity, dtype=np.int64)
    body_j = np.empty(capacity, dtype=np.int64)
    normal = np.empty((capacity, 3))
    gap = np.empty(capacity)
    c = 0
    p = 0
    for i in range(n):
        x = positions[i, 0]
        y = positions[i, 1]
        z = positions[i, 2]
        g = z - radius
        if g < margin + max(0.0, -velocities[i, 2]) * h:
            _append(body_i, body_j, normal, gap, c, i, GROUND_ID, 0.0, 0.0, 1.0, g)
            c += 1
        if has_funnel:
            g, nx, ny, nz = funnel_gap(x, y, z, radius, profile)
            vn = velocities[i, 0] * nx + velocities[i, 1] * ny + velocities[i, 2] * nz
            if g < margin + max(0.0, -vn) * h:
                _append(body_i, body_j, normal, gap, c, i, FUNNEL_ID, nx, ny, nz, g)
                c += 1
        while p < pair_i.shape[0] and pair_i[p] == i:
            j = pair_j[p]
            dx = x - positions[j, 0]
            dy = y - positions[j, 1]
            dz = z - positions[j, 2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist > 1e-12:
                nx = dx / dist
                ny = dy / dist
                nz = dz / dist
            else:
                nx = 0.0
                ny = 0.0
                nz = 1.0
            _append(body_i, body_j, normal, gap, c, i, j, nx, ny, nz, dist - 2.0 * radius)
            c += 1
            p += 1
    return body_i[:c], body_j[:c], normal[:c], gap[:c]


@njit(cache=True)
def current_gap(positions, i, j, radius, profile):
    """Recompute the gap of a contact from the current positions.

    Returns:
        `(gap, nx, ny, nz)`.
    """
    x = positions[i, 0]
    y = positions[i, 1]
    z = positions[i, 2]
    if j == GROUND_ID:
        return z - radius, 0.0, 0.0, 1.0
    if j == FUNNEL_ID:
        return funnel_gap(x, y, z, radius, profile)
    dx = x - positions[j, 0]
    dy = y - positions[j, 1]
    dz = z - positions[j, 2]
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist > 1e-12:
        return dist - 2.0 * radius, dx / dist, dy / dist, dz / dist
    return -2.0 * radius, 0.0, 0.0, 1.0
