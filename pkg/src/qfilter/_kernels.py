"""Numba kernels for the Euler-Maruyama trajectory loop.

Everything here is deliberately written as explicit per-trajectory scalar
loops:  each trajectory's floating-point sequence is then independent of
how trajectories are batched or scheduled, which is what makes ensemble
output bit-identical for any worker count and lets an offline replay of a
recorded bit stream reproduce the in-line filter exactly.

Conventions (hbar = 1):
  truth SME      drho = -i[H,rho] dt - sum_j k_j [y_j,[y_j,rho]] dt
                        + sum_j sqrt(2 k_j) (y_j rho + rho y_j - 2<y_j> rho) dW_j
  record         dy_j = sqrt(8 k_j) <y_j>_true dt + dW_j
  one-bit        dY_j = sqrt(dt) * sgn(dy_j),  sgn(0) = +1
  innovation     dV_j = (dY_j or dy_j) - sqrt(8 k_j) <y_j>_filter dt
  filter SME     same generator as the truth SME, driven by dV_j

States passed to these kernels must be exactly Hermitian (the kernels
re-hermitize after every update, so this holds by induction once the
initial state is hermitized).
"""

import math

import numpy as np
from numba import njit

# Instability thresholds for trace-1 states.  The plain Euler step lets
# healthy trajectories drift moderately outside the physical ball (the
# first-order Hamiltonian term inflates coherences by ~exp(omega^2 dt t/2),
# and near the measurement poles the restoring force vanishes), so the
# detector is a runaway catcher, not a positivity enforcer: diverging
# trajectories blow through any fixed bound within a few hundred steps,
# while the benign population stays below ~1.5 in purity at the reference
# step sizes.
PURITY_CEIL = 2.0
EIG_FLOOR = -0.5
TRACE_LO = 0.5
TRACE_HI = 1.5
BLOCH_EPS = 1e-9

# Feedback policy codes used inside the kernels.
POL_NONE = 0
POL_ROTATE_TO_AXIS = 1
POL_ORTHOGONAL_PLANE = 2
POL_LOCAL_ROTATE = 3


@njit(cache=True)
def expectation(y, rho):
    """Re Tr(y @ rho)."""
    d = rho.shape[0]
    acc = 0.0
    for i in range(d):
        for j in range(d):
            acc += (y[i, j] * rho[j, i]).real
    return acc


@njit(cache=True)
def hermitize(rho):
    """rho <- (rho + rho^dag)/2 in place."""
    d = rho.shape[0]
    for i in range(d):
        rho[i, i] = complex(rho[i, i].real, 0.0)
        for j in range(i + 1, d):
            v = 0.5 * (rho[i, j] + rho[j, i].conjugate())
            rho[i, j] = v
            rho[j, i] = v.conjugate()


@njit(cache=True)
def hermitize_normalize(rho):
    """Symmetrize then divide by the trace; returns the pre-division trace.

    A zero or non-finite trace (runaway state) skips the division; the
    caller's trace-window check flags the trajectory.
    """
    hermitize(rho)
    tr = 0.0
    d = rho.shape[0]
    for i in range(d):
        tr += rho[i, i].real
    if tr == 0.0 or not math.isfinite(tr):
        return tr
    inv = 1.0 / tr
    for i in range(d):
        for j in range(d):
            rho[i, j] = rho[i, j] * inv
    return tr


@njit(cache=True)
def purity_herm(rho):
    """Tr(rho^2) for an exactly Hermitian rho (= sum of |entries|^2)."""
    d = rho.shape[0]
    acc = 0.0
    for i in range(d):
        for j in range(d):
            v = rho[i, j]
            acc += v.real * v.real + v.imag * v.imag
    return acc


@njit(cache=True)
def min_eig_ok(rho, floor):
    """True when every eigenvalue of Hermitian rho is >= floor.

    dim 2 uses the closed-form spectrum; dim 4 applies Sylvester's
    criterion to rho - floor*I (positive definite iff all leading
    principal minors are positive).
    """
    d = rho.shape[0]
    if d == 2:
        tr = rho[0, 0].real + rho[1, 1].real
        det = (rho[0, 0] * rho[1, 1] - rho[0, 1] * rho[1, 0]).real
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            disc = 0.0
        lam_min = 0.5 * (tr - math.sqrt(disc))
        return lam_min >= floor
    # generic path (used for dim 4): shift and test positive definiteness
    b = rho.copy()
    for i in range(d):
        b[i, i] = b[i, i] - floor
    m1 = b[0, 0].real
    if m1 <= 0.0:
        return False
    m2 = (b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]).real
    if m2 <= 0.0:
        return False
    m3 = (
        b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] * b[2, 1])
        - b[0, 1] * (b[1, 0] * b[2, 2] - b[1, 2] * b[2, 0])
        + b[0, 2] * (b[1, 0] * b[2, 1] - b[1, 1] * b[2, 0])
    ).real
    if m3 <= 0.0:
        return False
    m4 = _det4(b)
    return m4 > 0.0


@njit(cache=True)
def _det3(a, r0, r1, r2, c0, c1, c2):
    return (
        a[r0, c0] * (a[r1, c1] * a[r2, c2] - a[r1, c2] * a[r2, c1])
        - a[r0, c1] * (a[r1, c0] * a[r2, c2] - a[r1, c2] * a[r2, c0])
        + a[r0, c2] * (a[r1, c0] * a[r2, c1] - a[r1, c1] * a[r2, c0])
    )


@njit(cache=True)
def _det4(a):
    det = (
        a[0, 0] * _det3(a, 1, 2, 3, 1, 2, 3)
        - a[0, 1] * _det3(a, 1, 2, 3, 0, 2, 3)
        + a[0, 2] * _det3(a, 1, 2, 3, 0, 1, 3)
        - a[0, 3] * _det3(a, 1, 2, 3, 0, 1, 2)
    )
    return det.real


@njit(cache=True)
def state_unstable(rho, purity_ceil, eig_floor):
    """Purity above the ceiling or an eigenvalue below the floor (NaN flags)."""
    if not (purity_herm(rho) <= purity_ceil):
        return True
    return not min_eig_ok(rho, eig_floor)


@njit(cache=True)
def euler_into(rho, h, ys, y2s, ks, s2k, ey, dw, dt, out, w1, w2):
    """One Euler step of the SME generator into ``out``, then renormalize.

    ``ey`` holds the operator expectations taken in the *input* state and
    ``dw`` the noise (or innovation) increments, one per channel.  The
    updated state (hermitized and trace-normalized) is written back into
    ``rho``.  Returns the pre-normalization trace.
    """
    d = rho.shape[0]
    nc = ys.shape[0]
    # Hamiltonian commutator: rho - i dt (H rho - (H rho)^dag)
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for l in range(d):
                acc += h[i, l] * rho[l, j]
            w1[i, j] = acc
    for i in range(d):
        for j in range(d):
            out[i, j] = rho[i, j] - 1j * dt * (w1[i, j] - w1[j, i].conjugate())
    for c in range(nc):
        for i in range(d):
            for j in range(d):
                a = 0.0 + 0.0j
                b = 0.0 + 0.0j
                for l in range(d):
                    a += ys[c, i, l] * rho[l, j]
                    b += y2s[c, i, l] * rho[l, j]
                w1[i, j] = a  # y rho
                w2[i, j] = b  # y^2 rho
        kdt = ks[c] * dt
        coef = s2k[c] * dw[c]
        e2 = 2.0 * ey[c]
        for i in range(d):
            for j in range(d):
                yry = 0.0 + 0.0j
                for l in range(d):
                    yry += w1[i, l] * ys[c, l, j]
                yr = w1[i, j]
                ry = w1[j, i].conjugate()
                y2r = w2[i, j]
                ry2 = w2[j, i].conjugate()
                out[i, j] += (-kdt) * (y2r + ry2 - 2.0 * yry) + coef * (
                    yr + ry - e2 * rho[i, j]
                )
    tr = hermitize_normalize(out)
    for i in range(d):
        for j in range(d):
            rho[i, j] = out[i, j]
    return tr


@njit(cache=True)
def rotation_onto(x, y, z, tx, ty, tz, u):
    """Minimal-angle rotation taking Bloch vector (x,y,z) onto unit (tx,ty,tz).

    Writes the 2x2 unitary into ``u`` and returns True; returns False when
    the identity should be used (zero vector, or already aligned).  The
    antiparallel degenerate case rotates about the +Y axis.
    """
    rn = math.sqrt(x * x + y * y + z * z)
    if rn < BLOCH_EPS:
        return False
    ux = x / rn
    uy = y / rn
    uz = z / rn
    c = ux * tx + uy * ty + uz * tz
    if c > 1.0:
        c = 1.0
    if c < -1.0:
        c = -1.0
    ax = uy * tz - uz * ty
    ay = uz * tx - ux * tz
    az = ux * ty - uy * tx
    s = math.sqrt(ax * ax + ay * ay + az * az)
    if s < 1e-12:
        if c >= 0.0:
            return False
        ax = 0.0
        ay = 1.0
        az = 0.0
        angle = math.pi
    else:
        ax /= s
        ay /= s
        az /= s
        angle = math.atan2(s, c)
    half = 0.5 * angle
    ca = math.cos(half)
    sa = math.sin(half)
    u[0, 0] = complex(ca, -sa * az)
    u[0, 1] = complex(-sa * ay, -sa * ax)
    u[1, 0] = complex(sa * ay, -sa * ax)
    u[1, 1] = complex(ca, sa * az)
    return True


@njit(cache=True)
def rotation_into_xy_plane(x, y, z, u):
    """Minimal rotation zeroing the Bloch z-component, preserving azimuth.

    A vector already in the plane maps to the identity; a vector on the
    measurement axis itself is sent to +X (rotation about +Y).
    """
    rn = math.sqrt(x * x + y * y + z * z)
    if rn < BLOCH_EPS:
        return False
    if abs(z) <= 1e-12 * rn:
        return False
    sxy = math.sqrt(x * x + y * y)
    if sxy < 1e-12 * rn:
        ax = 0.0
        ay = 1.0
        az = 0.0
        angle = 0.5 * math.pi if z > 0.0 else -0.5 * math.pi
    else:
        sgn = 1.0 if z > 0.0 else -1.0
        ax = -y / sxy * sgn
        ay = x / sxy * sgn
        az = 0.0
        angle = math.atan2(abs(z), sxy)
    half = 0.5 * angle
    ca = math.cos(half)
    sa = math.sin(half)
    u[0, 0] = complex(ca, -sa * az)
    u[0, 1] = complex(-sa * ay, -sa * ax)
    u[1, 0] = complex(sa * ay, -sa * ax)
    u[1, 1] = complex(ca, sa * az)
    return True


@njit(cache=True)
def bloch2(rho):
    x = 2.0 * rho[0, 1].real
    y = -2.0 * rho[0, 1].imag
    z = (rho[0, 0] - rho[1, 1]).real
    return x, y, z


@njit(cache=True)
def _fill_eye(u):
    d = u.shape[0]
    for i in range(d):
        for j in range(d):
            u[i, j] = 1.0 + 0.0j if i == j else 0.0 + 0.0j


@njit(cache=True)
def control_unitary_into(rho_f, pol_code, pol_nx, pol_nz, u, wa, wb):
    """Fill ``u`` (d x d) with the policy's corrective unitary.

    Returns False when the policy yields the identity (caller may skip the
    conjugation).  ``wa``/``wb`` are 2x2 scratch for the local policy.
    """
    d = rho_f.shape[0]
    if pol_code == POL_NONE:
        return False
    if pol_code == POL_ROTATE_TO_AXIS or pol_code == POL_ORTHOGONAL_PLANE:
        x, y, z = bloch2(rho_f)
        if pol_code == POL_ROTATE_TO_AXIS:
            return rotation_onto(x, y, z, pol_nx, 0.0, pol_nz, u)
        return rotation_into_xy_plane(x, y, z, u)
    # local rotate-to-axis on each reduced qubit (dim 4)
    a00 = rho_f[0, 0] + rho_f[1, 1]
    a01 = rho_f[0, 2] + rho_f[1, 3]
    a11 = rho_f[2, 2] + rho_f[3, 3]
    xa = 2.0 * a01.real
    ya = -2.0 * a01.imag
    za = (a00 - a11).real
    b00 = rho_f[0, 0] + rho_f[2, 2]
    b01 = rho_f[0, 1] + rho_f[2, 3]
    b11 = rho_f[1, 1] + rho_f[3, 3]
    xb = 2.0 * b01.real
    yb = -2.0 * b01.imag
    zb = (b00 - b11).real
    got_a = rotation_onto(xa, ya, za, 0.0, 0.0, 1.0, wa)
    got_b = rotation_onto(xb, yb, zb, 0.0, 0.0, 1.0, wb)
    if not got_a and not got_b:
        return False
    if not got_a:
        _fill_eye(wa)
    if not got_b:
        _fill_eye(wb)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    u[2 * i + k, 2 * j + l] = wa[i, j] * wb[k, l]
    return True


@njit(cache=True)
def apply_unitary(rho, u, w):
    """rho <- u rho u^dag in place, then re-hermitize."""
    d = rho.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for l in range(d):
                acc += u[i, l] * rho[l, j]
            w[i, j] = acc
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for l in range(d):
                acc += w[i, l] * u[j, l].conjugate()
            rho[i, j] = acc
    hermitize(rho)


@njit(cache=True)
def step_pair(
    rho_t,
    rho_f,
    z,
    h,
    ys,
    y2s,
    ks,
    s2k,
    s8k,
    dt,
    sqdt,
    one_bit,
    pol_code,
    pol_nx,
    pol_nz,
    purity_ceil,
    eig_floor,
    out,
    w1,
    w2,
    u,
    wa,
    wb,
    ey_t,
    ey_f,
    dwv,
    dvv,
    bits_row,
):
    """One coupled step of truth + record + innovation + filter + control.

    Returns 0, or 1 if either state tripped an instability condition
    (trace outside [0.5, 1.5] before renormalization, purity above the
    ceiling, or an eigenvalue below the floor).
    """
    nc = ys.shape[0]
    for c in range(nc):
        ey_t[c] = expectation(ys[c], rho_t)
        ey_f[c] = expectation(ys[c], rho_f)
        dwv[c] = z[c] * sqdt
    tr_t = euler_into(rho_t, h, ys, y2s, ks, s2k, ey_t, dwv, dt, out, w1, w2)
    for c in range(nc):
        analog = s8k[c] * ey_t[c] * dt + dwv[c]
        bit = 1 if analog >= 0.0 else -1
        bits_row[c] = bit
        eff = bit * sqdt if one_bit else analog
        dvv[c] = eff - s8k[c] * ey_f[c] * dt
    tr_f = euler_into(rho_f, h, ys, y2s, ks, s2k, ey_f, dvv, dt, out, w1, w2)
    if pol_code != POL_NONE:
        if control_unitary_into(rho_f, pol_code, pol_nx, pol_nz, u, wa, wb):
            apply_unitary(rho_t, u, w1)
            apply_unitary(rho_f, u, w1)
    flag = 0
    trace_ok = (TRACE_LO <= tr_t <= TRACE_HI) and (TRACE_LO <= tr_f <= TRACE_HI)
    if not trace_ok:
        flag = 1
    elif state_unstable(rho_t, purity_ceil, eig_floor) or state_unstable(rho_f, purity_ceil, eig_floor):
        flag = 1
    return flag


@njit(cache=True)
def replay_step(
    rho_f,
    bits_row,
    h,
    ys,
    y2s,
    ks,
    s2k,
    s8k,
    dt,
    sqdt,
    pol_code,
    pol_nx,
    pol_nz,
    purity_ceil,
    eig_floor,
    out,
    w1,
    w2,
    u,
    wa,
    wb,
    ey_f,
    dvv,
):
    """Filter-only step driven by a stored one-bit record row."""
    nc = ys.shape[0]
    for c in range(nc):
        ey_f[c] = expectation(ys[c], rho_f)
    for c in range(nc):
        eff = bits_row[c] * sqdt
        dvv[c] = eff - s8k[c] * ey_f[c] * dt
    tr_f = euler_into(rho_f, h, ys, y2s, ks, s2k, ey_f, dvv, dt, out, w1, w2)
    if pol_code != POL_NONE:
        if control_unitary_into(rho_f, pol_code, pol_nx, pol_nz, u, wa, wb):
            apply_unitary(rho_f, u, w1)
    flag = 0
    if not (TRACE_LO <= tr_f <= TRACE_HI):
        flag = 1
    elif state_unstable(rho_f, purity_ceil, eig_floor):
        flag = 1
    return flag


@njit(cache=True)
def advance_block(
    rt,
    rf,
    z,
    h,
    ys,
    y2s,
    ks,
    s2k,
    s8k,
    dt,
    one_bit,
    pol_code,
    pol_nx,
    pol_nz,
    purity_ceil,
    eig_floor,
    g0,
    slot_steps,
    st,
    sf,
    spt,
    spf,
    bits,
    alive,
    flag_step,
):
    """Advance a batch of trajectories through one block of steps.

    rt, rf      (B,d,d) truth / filter states, updated in place
    z           (B,S,C) standard normal draws for the block
    g0          global index of the first step in this block
    slot_steps  (NSB,) global step counts at which to sample (post-step)
    st, sf      (B,NSB,d,d) sampled states
    spt, spf    (B,NSB) sampled purities
    bits        (B,S,C) int8 sign record
    alive       (B,) lanes still evolving; flagged lanes freeze
    flag_step   (B,) global step at which a lane was flagged (-1 if never)
    """
    nb, ns, nc = z.shape
    d = rt.shape[1]
    sqdt = math.sqrt(dt)
    nsb = slot_steps.shape[0]
    out = np.empty((d, d), np.complex128)
    w1 = np.empty((d, d), np.complex128)
    w2 = np.empty((d, d), np.complex128)
    u = np.empty((d, d), np.complex128)
    wa = np.empty((2, 2), np.complex128)
    wb = np.empty((2, 2), np.complex128)
    ey_t = np.empty(nc, np.float64)
    ey_f = np.empty(nc, np.float64)
    dwv = np.empty(nc, np.float64)
    dvv = np.empty(nc, np.float64)
    bits_row = np.empty(nc, np.int8)
    for b in range(nb):
        if not alive[b]:
            continue
        rho_t = rt[b]
        rho_f = rf[b]
        slot = 0
        for s in range(ns):
            g1 = g0 + s + 1
            flag = step_pair(
                rho_t, rho_f, z[b, s], h, ys, y2s, ks, s2k, s8k, dt, sqdt,
                one_bit, pol_code, pol_nx, pol_nz, purity_ceil, eig_floor,
                out, w1, w2, u, wa, wb, ey_t, ey_f, dwv, dvv, bits_row,
            )
            for c in range(nc):
                bits[b, s, c] = bits_row[c]
            if flag != 0:
                alive[b] = False
                flag_step[b] = g1
                break
            if slot < nsb and g1 == slot_steps[slot]:
                for i in range(d):
                    for j in range(d):
                        st[b, slot, i, j] = rho_t[i, j]
                        sf[b, slot, i, j] = rho_f[i, j]
                spt[b, slot] = purity_herm(rho_t)
                spf[b, slot] = purity_herm(rho_f)
                slot += 1


@njit(cache=True)
def replay_block(
    rf,
    bits,
    h,
    ys,
    y2s,
    ks,
    s2k,
    s8k,
    dt,
    pol_code,
    pol_nx,
    pol_nz,
    purity_ceil,
    eig_floor,
    g0,
    slot_steps,
    sf,
    spf,
    alive,
    flag_step,
):
    """Filter-only analogue of :func:`advance_block` driven by stored bits."""
    nb, ns, nc = bits.shape
    d = rf.shape[1]
    sqdt = math.sqrt(dt)
    nsb = slot_steps.shape[0]
    out = np.empty((d, d), np.complex128)
    w1 = np.empty((d, d), np.complex128)
    w2 = np.empty((d, d), np.complex128)
    u = np.empty((d, d), np.complex128)
    wa = np.empty((2, 2), np.complex128)
    wb = np.empty((2, 2), np.complex128)
    ey_f = np.empty(nc, np.float64)
    dvv = np.empty(nc, np.float64)
    for b in range(nb):
        if not alive[b]:
            continue
        rho_f = rf[b]
        slot = 0
        for s in range(ns):
            g1 = g0 + s + 1
            flag = replay_step(
                rho_f, bits[b, s], h, ys, y2s, ks, s2k, s8k, dt, sqdt,
                pol_code, pol_nx, pol_nz, purity_ceil, eig_floor,
                out, w1, w2, u, wa, wb, ey_f, dvv,
            )
            if flag != 0:
                alive[b] = False
                flag_step[b] = g1
                break
            if slot < nsb and g1 == slot_steps[slot]:
                for i in range(d):
                    for j in range(d):
                        sf[b, slot, i, j] = rho_f[i, j]
                spf[b, slot] = purity_herm(rho_f)
                slot += 1
