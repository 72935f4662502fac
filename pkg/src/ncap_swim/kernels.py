"""Hot numeric kernels: policy forward pass and swimmer physics substeps.

Every kernel exists twice with an identical signature:

    *_loops   plain nested loops, compiled by numba when that backend is active
    *_numpy   vectorized numpy fallback

Module-level names ``ncap_step`` and ``swim_substeps`` point at the active
twin (see backend.py). The benchmark module times both twins directly.

Swimmer conventions
-------------------
The body is a chain of n_joints + 1 rigid links of equal length and mass.
Link 0 is the head; its forward tip is the "head position". Joint j
(1-based) couples link j-1 to link j and carries angle phi[j-1], positive
counterclockwise. Link k's world orientation is

    alpha_k = heading + phi_0 + ... + phi_{k-1}

Generalized state: center-of-mass position and velocity, body rotation
angle ``heading`` (orientation of link 0) and its rate ``omega``, joint
angles ``phi`` and rates ``phi_dot``.

Per physics substep (semi-implicit Euler, all at dt):
  1. joint rates integrate commanded angular acceleration minus linear
     damping; joints are kinematically driven, not torque-coupled,
  2. each link center's velocity = COM velocity + rotation about the COM
     + shape-change velocity (joint-rate induced, COM-momentum-free by
     construction, so only drag moves the COM),
  3. anisotropic viscous drag per link, F = -(c_n*v_n*n_hat + c_t*v_t*t_hat),
     summed into a net force on the COM and a net torque about the COM
     (divided by the instantaneous moment of inertia),
  4. positions advance with the updated velocities; joints are hard-clamped
     to +-joint_limit with velocity zeroing at the limit.

With c_n == c_t the summed drag reduces to -c * (n_links * v_com): shape
change then produces zero net thrust, which is the anisotropy property the
tests check.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import BACKEND, jit

# ---------------------------------------------------------------------------
# policy forward kernel
#
# Weight arrays arrive already sign-constrained (see policy.py). Entry 0 of
# the prop arrays is unused padding: module 0 is driven by the oscillator.
# ---------------------------------------------------------------------------


def _ncap_step_loops(
    w_prop_d,
    w_prop_v,
    w_ipsi_d,
    w_ipsi_v,
    w_contra_d,
    w_contra_v,
    w_osc_d,
    w_osc_v,
    w_turn,
    w_speed,
    obs,
    o_d,
    o_v,
    speed,
    turn_r,
    turn_l,
    action,
    b_d,
    b_v,
    m_d,
    m_v,
):
    n = obs.shape[0]
    gate = w_speed * (1.0 - speed)
    for i in range(n):
        if i == 0:
            zd = w_osc_d * o_d + w_turn * turn_r + gate
            zv = w_osc_v * o_v + w_turn * turn_l + gate
        else:
            q = obs[i - 1]
            qd = q if q > 0.0 else 0.0
            qv = -q if q < 0.0 else 0.0
            zd = w_prop_d[i] * qd + gate
            zv = w_prop_v[i] * qv + gate
        bd = zd if zd > 0.0 else 0.0
        bv = zv if zv > 0.0 else 0.0
        zmd = w_ipsi_d[i] * bd + w_contra_d[i] * bv
        zmv = w_ipsi_v[i] * bv + w_contra_v[i] * bd
        md = zmd if zmd > 0.0 else 0.0
        mv = zmv if zmv > 0.0 else 0.0
        b_d[i] = bd
        b_v[i] = bv
        m_d[i] = md
        m_v[i] = mv
        cd = md if md < 1.0 else 1.0
        cv = mv if mv < 1.0 else 1.0
        action[i] = cd - cv


def _ncap_step_numpy(
    w_prop_d,
    w_prop_v,
    w_ipsi_d,
    w_ipsi_v,
    w_contra_d,
    w_contra_v,
    w_osc_d,
    w_osc_v,
    w_turn,
    w_speed,
    obs,
    o_d,
    o_v,
    speed,
    turn_r,
    turn_l,
    action,
    b_d,
    b_v,
    m_d,
    m_v,
):
    gate = w_speed * (1.0 - speed)
    q = obs[:-1]
    zd = np.empty_like(action)
    zv = np.empty_like(action)
    zd[0] = w_osc_d * o_d + w_turn * turn_r + gate
    zv[0] = w_osc_v * o_v + w_turn * turn_l + gate
    zd[1:] = w_prop_d[1:] * np.maximum(q, 0.0) + gate
    zv[1:] = w_prop_v[1:] * np.maximum(-q, 0.0) + gate
    np.maximum(zd, 0.0, out=b_d)
    np.maximum(zv, 0.0, out=b_v)
    np.maximum(w_ipsi_d * b_d + w_contra_d * b_v, 0.0, out=m_d)
    np.maximum(w_ipsi_v * b_v + w_contra_v * b_d, 0.0, out=m_v)
    action[:] = np.minimum(m_d, 1.0) - np.minimum(m_v, 1.0)


# ---------------------------------------------------------------------------
# swimmer physics kernel
# ---------------------------------------------------------------------------


def _geometry_pass(phi, heading, link_len, ux, uy, px, py, cx, cy):
    # Local frame: head tip at the origin; fills direction, tip and center
    # arrays, returns the local center of mass (equal link masses).
    n_l = ux.shape[0]
    a = heading
    px[0] = 0.0
    py[0] = 0.0
    com_lx = 0.0
    com_ly = 0.0
    for k in range(n_l):
        if k > 0:
            a += phi[k - 1]
        c = math.cos(a)
        s = math.sin(a)
        ux[k] = c
        uy[k] = s
        cx[k] = px[k] - 0.5 * link_len * c
        cy[k] = py[k] - 0.5 * link_len * s
        px[k + 1] = px[k] - link_len * c
        py[k + 1] = py[k] - link_len * s
        com_lx += cx[k]
        com_ly += cy[k]
    return com_lx / n_l, com_ly / n_l


def _shape_velocity_pass(phi_dot, px, py, cx, cy, svx, svy):
    # Joint-rate induced velocity of each link center in the head-anchored
    # frame: joint j rotates links k >= j about the joint point p_j.
    # Returns the mean over links (the COM share, subtracted by callers).
    n_l = cx.shape[0]
    smx = 0.0
    smy = 0.0
    for k in range(n_l):
        sx = 0.0
        sy = 0.0
        for j in range(1, k + 1):
            w = phi_dot[j - 1]
            sx -= w * (cy[k] - py[j])
            sy += w * (cx[k] - px[j])
        svx[k] = sx
        svy[k] = sy
        smx += sx
        smy += sy
    return smx / n_l, smy / n_l


_geometry_pass = jit(_geometry_pass)
_shape_velocity_pass = jit(_shape_velocity_pass)


def _swim_substeps_loops(
    phi,
    phi_dot,
    com,
    v_com,
    accel,
    heading,
    omega,
    n_sub,
    dt,
    link_len,
    link_mass,
    joint_limit,
    joint_damping,
    c_n,
    c_t,
):
    n_j = phi.shape[0]
    n_l = n_j + 1
    ux = np.empty(n_l)
    uy = np.empty(n_l)
    px = np.empty(n_l + 1)
    py = np.empty(n_l + 1)
    cx = np.empty(n_l)
    cy = np.empty(n_l)
    svx = np.empty(n_l)
    svy = np.empty(n_l)
    mass_total = n_l * link_mass
    rot_unit = link_len * link_len / 12.0

    for _ in range(n_sub):
        for i in range(n_j):
            phi_dot[i] += dt * (accel[i] - joint_damping * phi_dot[i])
        com_lx, com_ly = _geometry_pass(phi, heading, link_len, ux, uy, px, py, cx, cy)
        smx, smy = _shape_velocity_pass(phi_dot, px, py, cx, cy, svx, svy)

        fx_net = 0.0
        fy_net = 0.0
        torque = 0.0
        inertia = 0.0
        for k in range(n_l):
            relx = cx[k] - com_lx
            rely = cy[k] - com_ly
            wx = v_com[0] - omega * rely + (svx[k] - smx)
            wy = v_com[1] + omega * relx + (svy[k] - smy)
            vt = wx * ux[k] + wy * uy[k]
            vn = -wx * uy[k] + wy * ux[k]
            fx = -(c_n * vn * (-uy[k]) + c_t * vt * ux[k])
            fy = -(c_n * vn * ux[k] + c_t * vt * uy[k])
            fx_net += fx
            fy_net += fy
            torque += relx * fy - rely * fx
            inertia += link_mass * (relx * relx + rely * rely + rot_unit)

        v_com[0] += dt * fx_net / mass_total
        v_com[1] += dt * fy_net / mass_total
        omega += dt * torque / inertia
        com[0] += dt * v_com[0]
        com[1] += dt * v_com[1]
        heading += dt * omega
        for i in range(n_j):
            phi[i] += dt * phi_dot[i]
            if phi[i] > joint_limit:
                phi[i] = joint_limit
                phi_dot[i] = 0.0
            elif phi[i] < -joint_limit:
                phi[i] = -joint_limit
                phi_dot[i] = 0.0

    # post-step head pose and velocity for reward and logging
    com_lx, com_ly = _geometry_pass(phi, heading, link_len, ux, uy, px, py, cx, cy)
    smx, smy = _shape_velocity_pass(phi_dot, px, py, cx, cy, svx, svy)
    head_x = com[0] - com_lx
    head_y = com[1] - com_ly
    head_vx = v_com[0] - omega * (-com_ly) - smx
    head_vy = v_com[1] + omega * (-com_lx) - smy

    ok = True
    for i in range(n_j):
        if not (math.isfinite(phi[i]) and math.isfinite(phi_dot[i])):
            ok = False
    if not (
        math.isfinite(com[0])
        and math.isfinite(com[1])
        and math.isfinite(v_com[0])
        and math.isfinite(v_com[1])
        and math.isfinite(heading)
        and math.isfinite(omega)
    ):
        ok = False
    return ok, heading, omega, head_x, head_y, head_vx, head_vy


def chain_kinematics(phi, phi_dot, heading, omega, v_com, link_len):
    """Vectorized chain state in world-relative terms.

    Returns (u, tips, centers, com_local, rel, sv_rel, sv_mean, link_vel,
    alpha_dot): link directions, local tip/center positions (head tip at the
    local origin), local COM, center offsets from the COM, shape-change
    velocities relative to the COM and their pre-subtraction mean, full link
    center velocities, and per-link angular rates.
    """
    n_j = phi.shape[0]
    alpha = heading + np.concatenate((np.zeros(1), np.cumsum(phi)))
    u = np.column_stack((np.cos(alpha), np.sin(alpha)))
    tips = np.vstack((np.zeros((1, 2)), np.cumsum(-link_len * u, axis=0)))
    centers = tips[:-1] - 0.5 * link_len * u
    com_local = centers.mean(axis=0)
    rel = centers - com_local

    # shape velocity s_k = sum_{j<=k} phi_dot_j * perp(c_k - p_j)
    #                    = perp(W_k * c_k - V_k)  with cumulative W, V
    w_cum = np.concatenate((np.zeros(1), np.cumsum(phi_dot)))
    joint_pos = tips[1:-1]
    v_cum = np.vstack(
        (np.zeros((1, 2)), np.cumsum(phi_dot[:, None] * joint_pos, axis=0))
    )
    raw = w_cum[:, None] * centers - v_cum
    sv = np.column_stack((-raw[:, 1], raw[:, 0]))
    sv_mean = sv.mean(axis=0)
    sv_rel = sv - sv_mean

    rel_perp = np.column_stack((-rel[:, 1], rel[:, 0]))
    link_vel = v_com + omega * rel_perp + sv_rel
    alpha_dot = omega + w_cum
    return u, tips, centers, com_local, rel, sv_rel, sv_mean, link_vel, alpha_dot


def _swim_substeps_numpy(
    phi,
    phi_dot,
    com,
    v_com,
    accel,
    heading,
    omega,
    n_sub,
    dt,
    link_len,
    link_mass,
    joint_limit,
    joint_damping,
    c_n,
    c_t,
):
    n_l = phi.shape[0] + 1
    mass_total = n_l * link_mass
    rot_unit = link_len * link_len / 12.0

    for _ in range(n_sub):
        phi_dot += dt * (accel - joint_damping * phi_dot)
        u, _, _, _, rel, _, _, link_vel, _ = chain_kinematics(
            phi, phi_dot, heading, omega, v_com, link_len
        )
        vt = (link_vel * u).sum(axis=1)
        n_hat = np.column_stack((-u[:, 1], u[:, 0]))
        vn = (link_vel * n_hat).sum(axis=1)
        force = -(c_n * vn[:, None] * n_hat + c_t * vt[:, None] * u)
        f_net = force.sum(axis=0)
        torque = float(np.sum(rel[:, 0] * force[:, 1] - rel[:, 1] * force[:, 0]))
        inertia = float(
            link_mass * np.sum(rel[:, 0] ** 2 + rel[:, 1] ** 2)
            + n_l * link_mass * rot_unit
        )
        v_com += dt * f_net / mass_total
        omega += dt * torque / inertia
        com += dt * v_com
        heading += dt * omega
        phi += dt * phi_dot
        over = phi > joint_limit
        under = phi < -joint_limit
        if over.any():
            phi[over] = joint_limit
            phi_dot[over] = 0.0
        if under.any():
            phi[under] = -joint_limit
            phi_dot[under] = 0.0

    _, _, _, com_local, _, _, sv_mean, _, _ = chain_kinematics(
        phi, phi_dot, heading, omega, v_com, link_len
    )
    head_x = float(com[0] - com_local[0])
    head_y = float(com[1] - com_local[1])
    head_vx = float(v_com[0] - omega * (-com_local[1]) - sv_mean[0])
    head_vy = float(v_com[1] + omega * (-com_local[0]) - sv_mean[1])
    ok = bool(
        np.isfinite(phi).all()
        and np.isfinite(phi_dot).all()
        and np.isfinite(com).all()
        and np.isfinite(v_com).all()
        and math.isfinite(heading)
        and math.isfinite(omega)
    )
    return ok, heading, omega, head_x, head_y, head_vx, head_vy


# active twins

if BACKEND == "numba":
    ncap_step = jit(_ncap_step_loops)
    swim_substeps = jit(_swim_substeps_loops)
else:
    ncap_step = _ncap_step_numpy
    swim_substeps = _swim_substeps_numpy
