"""Hot numeric kernels: forward kinematics, damped least-squares IK and
capsule/box/sphere clearance queries.

Every function below is compiled with numba's ``@njit`` when numba is
importable.  Setting ``BPO_PURE_NUMPY=1`` selects the plain-python fallback
with identical semantics (the same function bodies, undecorated).
``benchmarks/kernel_bench.py`` compares the two paths.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("BPO_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit
    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

#: undecorated python versions of every kernel, keyed by name
PY_FUNCS: dict = {}


def maybe_njit(fn):
    PY_FUNCS[fn.__name__] = fn
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


@maybe_njit
def axis_rotation(axis, angle):
    # Rodrigues for a unit axis
    x, y, z = axis[0], axis[1], axis[2]
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    out = np.empty((3, 3))
    out[0, 0] = t * x * x + c
    out[0, 1] = t * x * y - s * z
    out[0, 2] = t * x * z + s * y
    out[1, 0] = t * x * y + s * z
    out[1, 1] = t * y * y + c
    out[1, 2] = t * y * z - s * x
    out[2, 0] = t * x * z - s * y
    out[2, 1] = t * y * z + s * x
    out[2, 2] = t * z * z + c
    return out


@maybe_njit
def fk_frames(off_R, off_t, axes, tool_R, tool_t, base_R, base_t, q):
    """Cumulative frames after each joint, plus the tool frame (N+1 total)."""
    n = q.shape[0]
    fr_R = np.empty((n + 1, 3, 3))
    fr_t = np.empty((n + 1, 3))
    cur_R = base_R.copy()
    cur_t = base_t.copy()
    for i in range(n):
        cur_t = cur_R @ off_t[i] + cur_t
        cur_R = (cur_R @ off_R[i]) @ axis_rotation(axes[i], q[i])
        fr_R[i] = cur_R
        fr_t[i] = cur_t
    fr_R[n] = cur_R @ tool_R
    fr_t[n] = cur_R @ tool_t + cur_t
    return fr_R, fr_t


@maybe_njit
def jacobian_from_frames(fr_R, fr_t, axes):
    """Geometric Jacobian: column i = [z_i x (p_ee - p_i); z_i]."""
    n = axes.shape[0]
    jac = np.empty((6, n))
    p_ee = fr_t[n]
    for i in range(n):
        z = fr_R[i] @ axes[i]
        dx = p_ee[0] - fr_t[i, 0]
        dy = p_ee[1] - fr_t[i, 1]
        dz = p_ee[2] - fr_t[i, 2]
        jac[0, i] = z[1] * dz - z[2] * dy
        jac[1, i] = z[2] * dx - z[0] * dz
        jac[2, i] = z[0] * dy - z[1] * dx
        jac[3, i] = z[0]
        jac[4, i] = z[1]
        jac[5, i] = z[2]
    return jac


@maybe_njit
def rotation_error_vector(goal_R, cur_R):
    """Rotation vector of goal_R @ cur_R.T (magnitude = geodesic angle)."""
    e = goal_R @ cur_R.T
    tr = e[0, 0] + e[1, 1] + e[2, 2]
    c = (tr - 1.0) * 0.5
    if c > 1.0:
        c = 1.0
    if c < -1.0:
        c = -1.0
    ang = np.arccos(c)
    w = np.empty(3)
    sk0 = e[2, 1] - e[1, 2]
    sk1 = e[0, 2] - e[2, 0]
    sk2 = e[1, 0] - e[0, 1]
    s = np.sin(ang)
    if ang < 1e-9:
        w[0] = 0.5 * sk0
        w[1] = 0.5 * sk1
        w[2] = 0.5 * sk2
        return w
    if s > 1e-6:
        f = 0.5 * ang / s
        w[0] = f * sk0
        w[1] = f * sk1
        w[2] = f * sk2
        return w
    # near pi: e + I = 2 * outer(axis, axis); pick the largest column
    best = -1.0
    bj = 0
    for j in range(3):
        nrm = 0.0
        for i in range(3):
            v = e[i, j]
            if i == j:
                v += 1.0
            nrm += v * v
        if nrm > best:
            best = nrm
            bj = j
    nrm = np.sqrt(best)
    for i in range(3):
        v = e[i, bj]
        if i == bj:
            v += 1.0
        w[i] = v / nrm
    if w[0] * sk0 + w[1] * sk1 + w[2] * sk2 < 0.0:
        for i in range(3):
            w[i] = -w[i]
    for i in range(3):
        w[i] *= ang
    return w


@maybe_njit
def ik_dls(off_R, off_t, axes, qmin, qmax, tool_R, tool_t,
           base_R, base_t, goal_R, goal_t, q0,
           max_steps, damping, rot_weight, tol_pos, tol_rot, step_clip):
    """Damped least-squares IK from one seed configuration.

    rot_weight scales the orientation error rows; 0 ignores orientation.
    Returns (q_best, pos_err, rot_err, iterations, converged).
    """
    n = q0.shape[0]
    q = np.minimum(np.maximum(q0, qmin), qmax)
    best_q = q.copy()
    best_res = np.inf
    best_pe = np.inf
    best_re = np.inf
    iters = 0
    converged = False
    lam2 = damping * damping
    for step in range(max_steps):
        iters = step + 1
        fr_R, fr_t = fk_frames(off_R, off_t, axes, tool_R, tool_t, base_R, base_t, q)
        e6 = np.zeros(6)
        e6[0] = goal_t[0] - fr_t[n, 0]
        e6[1] = goal_t[1] - fr_t[n, 1]
        e6[2] = goal_t[2] - fr_t[n, 2]
        pe = np.sqrt(e6[0] * e6[0] + e6[1] * e6[1] + e6[2] * e6[2])
        re = 0.0
        if rot_weight > 0.0:
            w = rotation_error_vector(goal_R, fr_R[n])
            re = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
            e6[3] = rot_weight * w[0]
            e6[4] = rot_weight * w[1]
            e6[5] = rot_weight * w[2]
        res = pe + rot_weight * re
        if res < best_res:
            best_res = res
            best_q = q.copy()
            best_pe = pe
            best_re = re
        if pe <= tol_pos and re <= tol_rot:
            converged = True
            best_q = q.copy()
            best_pe = pe
            best_re = re
            break
        jac = jacobian_from_frames(fr_R, fr_t, axes)
        if rot_weight != 1.0:
            for j in range(n):
                jac[3, j] *= rot_weight
                jac[4, j] *= rot_weight
                jac[5, j] *= rot_weight
        a = jac @ jac.T
        for i in range(6):
            a[i, i] += lam2
        y = np.linalg.solve(a, e6)
        dq = jac.T @ y
        mx = 0.0
        for j in range(n):
            v = abs(dq[j])
            if v > mx:
                mx = v
        if mx > step_clip:
            dq *= step_clip / mx
        q = np.minimum(np.maximum(q + dq, qmin), qmax)
    return best_q, best_pe, best_re, iters, converged


@maybe_njit
def seg_seg_distance(p1, q1, p2, q2):
    """Closest distance between segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    eps = 1e-14
    if a <= eps and e <= eps:
        return np.sqrt(r @ r)
    if a <= eps:
        s = 0.0
        t = f / e
        t = min(max(t, 0.0), 1.0)
    else:
        c = d1 @ r
        if e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            if denom > eps:
                s = min(max((b * f - c * e) / denom, 0.0), 1.0)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    cp1 = p1 + d1 * s
    cp2 = p2 + d2 * t
    diff = cp1 - cp2
    return np.sqrt(diff @ diff)


@maybe_njit
def point_box_sdf(p, half):
    """Signed distance of a point to an axis-aligned box at the origin."""
    qx = abs(p[0]) - half[0]
    qy = abs(p[1]) - half[1]
    qz = abs(p[2]) - half[2]
    ox = max(qx, 0.0)
    oy = max(qy, 0.0)
    oz = max(qz, 0.0)
    outside = np.sqrt(ox * ox + oy * oy + oz * oz)
    inside = min(max(qx, max(qy, qz)), 0.0)
    return outside + inside


@maybe_njit
def seg_box_distance(a, b, box_R, box_t, half):
    """Signed distance from segment [a,b] to an oriented box.

    Negative values mean the segment enters the box.  Outside the box the
    point-to-box distance is convex along the segment, so a coarse scan
    plus golden-section refinement is exact to high precision.
    """
    la = box_R.T @ (a - box_t)
    lb = box_R.T @ (b - box_t)
    m = 32
    best = np.inf
    bi = 0
    for i in range(m + 1):
        t = i / m
        d = point_box_sdf(la + (lb - la) * t, half)
        if d < best:
            best = d
            bi = i
    if best <= 0.0:
        # penetrating: dense scan for the depth
        for i in range(257):
            t = i / 256.0
            d = point_box_sdf(la + (lb - la) * t, half)
            if d < best:
                best = d
        return best
    lo = max(bi - 1, 0) / m
    hi = min(bi + 1, m) / m
    phi = 0.6180339887498949
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1 = point_box_sdf(la + (lb - la) * x1, half)
    f2 = point_box_sdf(la + (lb - la) * x2, half)
    for _ in range(60):
        if f1 <= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - phi * (hi - lo)
            f1 = point_box_sdf(la + (lb - la) * x1, half)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + phi * (hi - lo)
            f2 = point_box_sdf(la + (lb - la) * x2, half)
    refined = min(f1, f2)
    if refined <= 0.0:
        for i in range(257):
            t = i / 256.0
            d = point_box_sdf(la + (lb - la) * t, half)
            if d < refined:
                refined = d
        return refined
    return min(best, refined)


@maybe_njit
def seg_sphere_distance(a, b, center, radius):
    """Distance from segment [a,b] to a sphere surface (negative inside)."""
    d = b - a
    dd = d @ d
    if dd <= 1e-14:
        t = 0.0
    else:
        t = min(max(((center - a) @ d) / dd, 0.0), 1.0)
    diff = a + d * t - center
    return np.sqrt(diff @ diff) - radius


@maybe_njit
def config_collision_free(q, off_R, off_t, axes, tool_R, tool_t, base_R, base_t,
                          cap_frame, cap_p0, cap_p1, cap_r,
                          box_R, box_t, box_half, sph_c, sph_r):
    """True iff every link capsule clears all obstacles and all non-adjacent
    capsule pairs clear each other.  Frame -1 attaches a capsule to the base."""
    fr_R, fr_t = fk_frames(off_R, off_t, axes, tool_R, tool_t, base_R, base_t, q)
    m = cap_frame.shape[0]
    wp0 = np.empty((m, 3))
    wp1 = np.empty((m, 3))
    for k in range(m):
        f = cap_frame[k]
        if f < 0:
            wp0[k] = base_R @ cap_p0[k] + base_t
            wp1[k] = base_R @ cap_p1[k] + base_t
        else:
            wp0[k] = fr_R[f] @ cap_p0[k] + fr_t[f]
            wp1[k] = fr_R[f] @ cap_p1[k] + fr_t[f]
    for k in range(m):
        for i in range(box_R.shape[0]):
            if seg_box_distance(wp0[k], wp1[k], box_R[i], box_t[i], box_half[i]) - cap_r[k] <= 0.0:
                return False
        for i in range(sph_c.shape[0]):
            if seg_sphere_distance(wp0[k], wp1[k], sph_c[i], sph_r[i]) - cap_r[k] <= 0.0:
                return False
    for i in range(m):
        for j in range(i + 1, m):
            if abs(cap_frame[i] - cap_frame[j]) <= 1:
                continue
            if seg_seg_distance(wp0[i], wp1[i], wp0[j], wp1[j]) - cap_r[i] - cap_r[j] <= 0.0:
                return False
    return True


@maybe_njit
def edge_collision_free(qa, qb, max_step,
                        off_R, off_t, axes, tool_R, tool_t, base_R, base_t,
                        cap_frame, cap_p0, cap_p1, cap_r,
                        box_R, box_t, box_half, sph_c, sph_r):
    """Check a straight joint-space segment at a fixed resolution."""
    span = 0.0
    for j in range(qa.shape[0]):
        v = abs(qb[j] - qa[j])
        if v > span:
            span = v
    steps = int(np.ceil(span / max_step))
    if steps < 1:
        steps = 1
    for i in range(steps + 1):
        t = i / steps
        q = qa + (qb - qa) * t
        if not config_collision_free(q, off_R, off_t, axes, tool_R, tool_t,
                                     base_R, base_t,
                                     cap_frame, cap_p0, cap_p1, cap_r,
                                     box_R, box_t, box_half, sph_c, sph_r):
            return False
    return True
