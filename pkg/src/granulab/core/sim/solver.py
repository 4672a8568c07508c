"""Relaxed sequential-impulse solver for rigid spheres.

Each substep applies gravity and spin damping, generates contacts, solves
normal, tangential and rolling impulses for `iterations` sweeps,
integrates positions and finally runs de-penetration passes. Normal
impulses are accumulated and clamped non-negative; tangential impulses
are clamped to the Coulomb cone of the current normal impulse, so every
solved contact satisfies `|lambda_t| <= mu_s * lambda_n`. The rolling
impulse opposes the relative spin of the two bodies and is bounded by
`mu_r * lambda_n * radius`.

A contact that closes within the substep at more than the restitution
threshold bounces: its target separation speed is `e` times the approach
speed, and after integration the bodies are moved along the normal so the
rebound starts at the moment of impact. A grain dropped from rest then
reaches `e**2` times its drop height at any substep length.
"""
import math

import numpy as np
from numba import njit

from granulab.core.sim.contacts import build_contacts, current_gap

# Status codes returned by `advance`.
STATUS_OK = 0
STATUS_DIVERGED = 1

# Allowed residual overlap, as a fraction of the radius, below which
# de-penetration leaves a contact alone.
_SLOP = 0.005


@njit(cache=True)
def _contact_velocity(vel, omg, i, j, nx, ny, nz, radius, lock_rotation):
    """Relative velocity of body `i` with respect to body `j` at the contact."""
    vx = vel[i, 0]
    vy = vel[i, 1]
    vz = vel[i, 2]
    if not lock_rotation:
        # omega_i x (-r n)
        vx -= radius * (omg[i, 1] * nz - omg[i, 2] * ny)
        vy -= radius * (omg[i, 2] * nx - omg[i, 0] * nz)
        vz -= radius * (omg[i, 0] * ny - omg[i, 1] * nx)
    if j >= 0:
        vx -= vel[j, 0]
        vy -= vel[j, 1]
        vz -= vel[j, 2]
        if not lock_rotation:
            # omega_j x (r n)
            vx -= radius * (omg[j, 1] * nz - omg[j, 2] * ny)
            vy -= radius * (omg[j, 2] * nx - omg[j, 0] * nz)
            vz -= radius * (omg[j, 0] * ny - omg[j, 1] * nx)
    return vx, vy, vz


@njit(cache=True)
def _apply_impulse(vel, omg, i, j, nx, ny, nz, px, py, pz, radius, mass, inertia,
                   lock_rotation):
    """Apply impulse `p` to body `i` and `-p` to body `j` at the contact."""
    vel[i, 0] += px / mass
    vel[i, 1] += py / mass
    vel[i, 2] += pz / mass
    if j >= 0:
        vel[j, 0] -= px / mass
        vel[j, 1] -= py / mass
        vel[j, 2] -= pz / mass
    if not lock_rotation:
        # (-r n) x p for body i and (r n) x (-p) for body j are equal.
        k = -radius / inertia
        tx = k * (ny * pz - nz * py)
        ty = k * (nz * px - nx * pz)
        tz = k * (nx * py - ny * px)
        omg[i, 0] += tx
        omg[i, 1] += ty
        omg[i, 2] += tz
        if j >= 0:
            omg[j, 0] += tx
            omg[j, 1] += ty
            omg[j, 2] += tz


@njit(cache=True)
def _substep(pos, vel, omg, h, gravity, radius, mass, inertia, mu_s, mu_r, e,
             relax, iterations, pos_iterations, rest_threshold, margin,
             lock_rotation, angular_damping, shuffle, seed, has_funnel, profile):
    n = pos.shape[0]
    v_start = vel.copy()
    for i in range(n):
        for a in range(3):
            vel[i, a] += gravity[a] * h
    if not lock_rotation and angular_damping > 0.0:
        spin = 1.0 / (1.0 + angular_damping * h)
        for i in range(n):
            for a in range(3):
                omg[i, a] *= spin

    body_i, body_j, normal, gap = build_contacts(pos, vel, radius, margin, h,
                                                 has_funnel, profile)
    nc = body_i.shape[0]
    if shuffle:
        np.random.seed(seed)
        order = np.random.permutation(nc)
    else:
        order = np.arange(nc)

    r_over_i = 0.0 if lock_rotation else radius * radius / inertia
    target = np.empty(nc)
    shift = np.zeros(nc)
    mass_n = np.empty(nc)
    mass_t = np.empty(nc)
    mass_r = np.empty(nc)
    for c in range(nc):
        i = body_i[c]
        j = body_j[c]
        nx = normal[c, 0]
        ny = normal[c, 1]
        nz = normal[c, 2]
        vn_start = v_start[i, 0] * nx + v_start[i, 1] * ny + v_start[i, 2] * nz
        vn_now = vel[i, 0] * nx + vel[i, 1] * ny + vel[i, 2] * nz
        if j >= 0:
            vn_start -= v_start[j, 0] * nx + v_start[j, 1] * ny + v_start[j, 2] * nz
            vn_now -= vel[j, 0] * nx + vel[j, 1] * ny + vel[j, 2] * nz
            mass_n[c] = 0.5 * mass
            mass_t[c] = 1.0 / (2.0 / mass + 2.0 * r_over_i)
            mass_r[c] = 0.5 * inertia
        else:
            mass_n[c] = mass
            mass_t[c] = 1.0 / (1.0 / mass + r_over_i)
            mass_r[c] = inertia
        # Only approach carried in from the previous substep triggers a bounce.
        approach = -vn_now
        g_pos = max(gap[c], 0.0)
        if -vn_start > rest_threshold and gap[c] + vn_now * h < 0.0:
            target[c] = e * approach
            # Normal correction applied after integration; the rebound then
            # starts from the impact point.
            shift[c] = (1.0 + e) * ((1.0 - e) * g_pos + 0.5 * e * approach * h)
        else:
            target[c] = -g_pos / h

    lam_n = np.zeros(nc)
    lam_t = np.zeros((nc, 3))
    lam_r = np.zeros((nc, 3))
    for _ in range(iterations):
        for k in range(nc):
            c = order[k]
            i = body_i[c]
            j = body_j[c]
            nx = normal[c, 0]
            ny = normal[c, 1]
            nz = normal[c, 2]

            vx, vy, vz = _contact_velocity(vel, omg, i, j, nx, ny, nz, radius,
                                           lock_rotation)
            vn = vx * nx + vy * ny + vz * nz
            new_n = max(lam_n[c] + relax * mass_n[c] * (target[c] - vn), 0.0)
            dn = new_n - lam_n[c]
            lam_n[c] = new_n
            _apply_impulse(vel, omg, i, j, nx, ny, nz, dn * nx, dn * ny, dn * nz,
                           radius, mass, inertia, lock_rotation)

            vx, vy, vz = _contact_velocity(vel, omg, i, j, nx, ny, nz, radius,
                                           lock_rotation)
            vn = vx * nx + vy * ny + vz * nz
            tx = lam_t[c, 0] - relax * mass_t[c] * (vx - vn * nx)
            ty = lam_t[c, 1] - relax * mass_t[c] * (vy - vn * ny)
            tz = lam_t[c, 2] - relax * mass_t[c] * (vz - vn * nz)
            # Project back onto the tangent plane before clamping.
            tn = tx * nx + ty * ny + tz * nz
            tx -= tn * nx
            ty -= tn * ny
            tz -= tn * nz
            cap = mu_s * lam_n[c]
            mag = math.sqrt(tx * tx + ty * ty + tz * tz)
            if mag > cap:
                scale = cap / mag
                tx *= scale
                ty *= scale
                tz *= scale
            dx = tx - lam_t[c, 0]
            dy = ty - lam_t[c, 1]
            dz = tz - lam_t[c, 2]
            lam_t[c, 0] = tx
            lam_t[c, 1] = ty
            lam_t[c, 2] = tz
            _apply_impulse(vel, omg, i, j, nx, ny, nz, dx, dy, dz,
                           radius, mass, inertia, lock_rotation)

            if lock_rotation:
                continue
            # Rolling resistance: an angular impulse against the relative
            # spin, bounded by the torque mu_r * lambda_n * radius.
            wx = omg[i, 0]
            wy = omg[i, 1]
            wz = omg[i, 2]
            if j >= 0:
                wx -= omg[j, 0]
                wy -= omg[j, 1]
                wz -= omg[j, 2]
            rx = lam_r[c, 0] - relax * mass_r[c] * wx
            ry = lam_r[c, 1] - relax * mass_r[c] * wy
            rz = lam_r[c, 2] - relax * mass_r[c] * wz
            cap = mu_r * lam_n[c] * radius
            mag = math.sqrt(rx * rx + ry * ry + rz * rz)
            if mag > cap:
                scale = cap / mag
                rx *= scale
                ry *= scale
                rz *= scale
            dx = (rx - lam_r[c, 0]) / inertia
            dy = (ry - lam_r[c, 1]) / inertia
            dz = (rz - lam_r[c, 2]) / inertia
            lam_r[c, 0] = rx
            lam_r[c, 1] = ry
            lam_r[c, 2] = rz
            omg[i, 0] += dx
            omg[i, 1] += dy
            omg[i, 2] += dz
            if j >= 0:
                omg[j, 0] -= dx
                omg[j, 1] -= dy
                omg[j, 2] -= dz

    for i in range(n):
        for a in range(3):
            pos[i, a] += vel[i, a] * h

    for c in range(nc):
        if shift[c] <= 0.0 or lam_n[c] <= 0.0:
            continue
        i = body_i[c]
        j = body_j[c]
        s = shift[c]
        if j >= 0:
            s *= 0.5
            pos[j, 0] += s * normal[c, 0]
            pos[j, 1] += s * normal[c, 1]
            pos[j, 2] += s * normal[c, 2]
        pos[i, 0] -= s * normal[c, 0]
        pos[i, 1] -= s * normal[c, 1]
        pos[i, 2] -= s * normal[c, 2]

    slop = _SLOP * radius
    for _ in range(pos_iterations):
        for k in range(nc):
            c = order[k]
            i = body_i[c]
            j = body_j[c]
            g, nx, ny, nz = current_gap(pos, i, j, radius, profile)
            if g >= -slop:
                continue
            corr = relax * (-g - slop)
            if j >= 0:
                corr *= 0.5
                pos[j, 0] -= corr * nx
                pos[j, 1] -= corr * ny
                pos[j, 2] -= corr * nz
            pos[i, 0] += corr * nx
            pos[i, 1] += corr * ny
            pos[i, 2] += corr * nz

    max_pen = 0.0
    max_cone = -np.inf
    lam_t_mag = np.empty(nc)
    for c in range(nc):
        g, _, _, _ = current_gap(pos, body_i[c], body_j[c], radius, profile)
        max_pen = max(max_pen, -g)
        lam_t_mag[c] = math.sqrt(lam_t[c, 0] ** 2 + lam_t[c, 1] ** 2 + lam_t[c, 2] ** 2)
        max_cone = max(max_cone, lam_t_mag[c] - mu_s * lam_n[c])
    return body_i, body_j, normal, gap, lam_n, lam_t_mag, max_pen, max_cone


@njit(cache=True)
def _speed_exceeded(pos, vel, omg, speed_limit):
    for i in range(pos.shape[0]):
        s2 = 0.0
        for a in range(3):
            if not (math.isfinite(pos[i, a]) and math.isfinite(vel[i, a])
                    and math.isfinite(omg[i, a])):
                return True
            s2 += vel[i, a] * vel[i, a]
        if s2 > speed_limit * speed_limit:
            return True
    return False


@njit(cache=True)
def advance(pos, vel, omg, seeds, h, gravity, radius, mass, inertia, mu_s, mu_r, e,
            relax, iterations, pos_iterations, rest_threshold, margin,
            lock_rotation, angular_damping, shuffle, has_funnel, profile, speed_limit):
    """Advance the state in place by `len(seeds)` substeps of length `h`.

    Args:
        seeds: One contact-order seed per substep.

    Returns:
        `(status, substeps_done, contact_count, max_penetration,
        max_cone_excess, contacts)` where `contacts` are the solved contact
        arrays of the final substep.
    """
    contact_count = 0
    max_pen = 0.0
    max_cone = -np.inf
    body_i = np.empty(0, dtype=np.int64)
    body_j = np.empty(0, dtype=np.int64)
    normal = np.empty((0, 3))
    gap = np.empty(0)
    lam_n = np.empty(0)
    lam_t = np.empty(0)
    for s in range(seeds.shape[0]):
        body_i, body_j, normal, gap, lam_n, lam_t, pen, cone = _substep(
            pos, vel, omg, h, gravity, radius, mass, inertia, mu_s, mu_r, e,
            relax, iterations, pos_iterations, rest_threshold, margin,
            lock_rotation, angular_damping, shuffle, np.int64(seeds[s]), has_funnel,
            profile)
        contact_count += body_i.shape[0]
        max_pen = max(max_pen, pen)
        max_cone = max(max_cone, cone)
        if _speed_exceeded(pos, vel, omg, speed_limit):
            return (STATUS_DIVERGED, s + 1, contact_count, max_pen, max_cone,
                    body_i, body_j, normal, gap, lam_n, lam_t)
    return (STATUS_OK, seeds.shape[0], contact_count, max_pen, max_cone,
            body_i, body_j, normal, gap, lam_n, lam_t)
