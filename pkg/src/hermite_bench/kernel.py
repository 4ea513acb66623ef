"""All-pairs force kernel: acceleration, jerk and snap.

For body i and every j != i, with r = x_j - x_i, v = v_j - v_i,
s = |r|^2 + eps^2, t = 1/sqrt(s) and alpha = (r.v)/s::

    acc_i  += m_j r t^3
    jerk_i += m_j (v - 3 alpha r) t^3

and in a second pass, with A = acc_j - acc_i and
beta = (|v|^2 + r.A)/s + alpha^2::

    snap_i += m_j A t^3 - 6 alpha jerk_ij - 3 beta acc_ij

The j-loop of each body runs sequentially in index order; parallelism only
splits the outer i-range into contiguous slices, so the output is identical
for any worker count.  Both passes exist for the binary64 (DP) backend and
the double-single (EX) backend, where every intermediate and accumulator is
a float32 pair.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ParticleSystem, Precision
from .exfloat import (
    ds_add,
    ds_div,
    ds_mul,
    ds_mul_f,
    ds_sqrt,
    ds_sub,
    join_array,
    split_array,
)

__all__ = [
    "DerivSet",
    "FlopModel",
    "DEFAULT_FLOP_MODEL",
    "SingularityError",
    "acc_jerk",
    "snap",
    "evaluate",
    "compute_acc_jerk",
    "compute_snap",
    "compute_derivs",
    "flop_count",
    "arithmetic_intensity",
    "default_workers",
]


class SingularityError(ZeroDivisionError):
    """Two bodies coincide and no softening is applied."""

    def __init__(self, i, j):
        super().__init__(f"bodies {i} and {j} coincide with zero softening")
        self.pair = (i, j)


@dataclass
class DerivSet:
    acc: np.ndarray
    jerk: np.ndarray
    snap: np.ndarray


@dataclass(frozen=True)
class FlopModel:
    """Static per-pair operation counts of the two kernel passes.

    Every add, sub, mul, div and sqrt counts as one FLOP.  Tally for the
    formulas in :func:`_acc_jerk_dp`:

    pass 1 (42): r 3, v 3, s 6, r.v 5, t=1/sqrt(s) 2, t^2 1, alpha 1,
    m t^3 2, 3 alpha 1, acc update 6, jerk update 12.

    pass 2 (73): r 3, v 3, s 6, r.v 5, t 2, t^2 1, alpha 1, m t^3 2,
    A 3, |v|^2 5, r.A 5, beta 4, 3 alpha 1, pair acc 3, pair jerk 9,
    6 alpha 1, 3 beta 1, snap update 18.

    Memory traffic per body per evaluation: one read of mass, position and
    velocity (7 doubles) and one write of acc, jerk and snap (9 doubles).
    """

    flops_pass1_per_pair: int = 42
    flops_pass2_per_pair: int = 73
    bytes_per_body: int = 128

    def __post_init__(self):
        if min(self.flops_pass1_per_pair, self.flops_pass2_per_pair, self.bytes_per_body) <= 0:
            raise ValueError("FlopModel fields must be strictly positive")


DEFAULT_FLOP_MODEL = FlopModel()


def flop_count(n: int, model: FlopModel = DEFAULT_FLOP_MODEL) -> int:
    """FLOPs of one full two-pass evaluation over ``n`` bodies."""
    if n < 2:
        raise ValueError("flop_count needs n >= 2")
    return n * (n - 1) * (model.flops_pass1_per_pair + model.flops_pass2_per_pair)


def arithmetic_intensity(n: int, model: FlopModel = DEFAULT_FLOP_MODEL) -> float:
    """FLOPs per byte of memory traffic for one evaluation."""
    if n < 2:
        raise ValueError("arithmetic_intensity needs n >= 2")
    return flop_count(n, model) / (n * model.bytes_per_body)


def default_workers() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# DP kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, error_model="numpy")
def _acc_jerk_dp(mass, pos, vel, eps2, start, stop, acc, jerk):
    n = mass.shape[0]
    for i in range(start, stop):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        ui, vi, wi = vel[i, 0], vel[i, 1], vel[i, 2]
        ax = ay = az = 0.0
        jx = jy = jz = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = pos[j, 0] - xi
            dy = pos[j, 1] - yi
            dz = pos[j, 2] - zi
            du = vel[j, 0] - ui
            dv = vel[j, 1] - vi
            dw = vel[j, 2] - wi
            s = dx * dx + dy * dy + dz * dz + eps2
            if s == 0.0:
                return i * n + j
            rv = dx * du + dy * dv + dz * dw
            t = 1.0 / np.sqrt(s)
            t2 = t * t
            alpha = rv * t2
            mt3 = mass[j] * t2 * t
            a3 = 3.0 * alpha
            ax += mt3 * dx
            ay += mt3 * dy
            az += mt3 * dz
            jx += mt3 * (du - a3 * dx)
            jy += mt3 * (dv - a3 * dy)
            jz += mt3 * (dw - a3 * dz)
        acc[i, 0], acc[i, 1], acc[i, 2] = ax, ay, az
        jerk[i, 0], jerk[i, 1], jerk[i, 2] = jx, jy, jz
    return -1


@njit(cache=True, nogil=True, error_model="numpy")
def _snap_dp(mass, pos, vel, acc, eps2, start, stop, snap):
    n = mass.shape[0]
    for i in range(start, stop):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        ui, vi, wi = vel[i, 0], vel[i, 1], vel[i, 2]
        pi, qi, ri = acc[i, 0], acc[i, 1], acc[i, 2]
        sx = sy = sz = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = pos[j, 0] - xi
            dy = pos[j, 1] - yi
            dz = pos[j, 2] - zi
            du = vel[j, 0] - ui
            dv = vel[j, 1] - vi
            dw = vel[j, 2] - wi
            s = dx * dx + dy * dy + dz * dz + eps2
            if s == 0.0:
                return i * n + j
            rv = dx * du + dy * dv + dz * dw
            t = 1.0 / np.sqrt(s)
            t2 = t * t
            alpha = rv * t2
            mt3 = mass[j] * t2 * t
            dp = acc[j, 0] - pi
            dq = acc[j, 1] - qi
            dr = acc[j, 2] - ri
            v2 = du * du + dv * dv + dw * dw
            ra = dx * dp + dy * dq + dz * dr
            beta = (v2 + ra) * t2 + alpha * alpha
            a3 = 3.0 * alpha
            pax = mt3 * dx
            pay = mt3 * dy
            paz = mt3 * dz
            pjx = mt3 * (du - a3 * dx)
            pjy = mt3 * (dv - a3 * dy)
            pjz = mt3 * (dw - a3 * dz)
            a6 = 6.0 * alpha
            b3 = 3.0 * beta
            sx += mt3 * dp - a6 * pjx - b3 * pax
            sy += mt3 * dq - a6 * pjy - b3 * pay
            sz += mt3 * dr - a6 * pjz - b3 * paz
        snap[i, 0], snap[i, 1], snap[i, 2] = sx, sy, sz
    return -1


# ---------------------------------------------------------------------------
# EX kernels: every quantity is a (hi, lo) float32 pair
# ---------------------------------------------------------------------------

_ONE32 = np.float32(1.0)
_THREE32 = np.float32(3.0)
_SIX32 = np.float32(6.0)


@njit(cache=True, error_model="numpy")
def _dot3(xh, xl, yh, yl, zh, zl, uh, ul, vh, vl, wh, wl):
    ah, al = ds_mul(xh, xl, uh, ul)
    bh, bl = ds_mul(yh, yl, vh, vl)
    ah, al = ds_add(ah, al, bh, bl)
    bh, bl = ds_mul(zh, zl, wh, wl)
    return ds_add(ah, al, bh, bl)


@njit(cache=True, error_model="numpy")
def _pair_common(ph, pl, vh, vl, i, j, e2h, e2l):
    """Separation, relative velocity, t^2, t^3 and alpha for pair (i, j)."""
    dxh, dxl = ds_sub(ph[j, 0], pl[j, 0], ph[i, 0], pl[i, 0])
    dyh, dyl = ds_sub(ph[j, 1], pl[j, 1], ph[i, 1], pl[i, 1])
    dzh, dzl = ds_sub(ph[j, 2], pl[j, 2], ph[i, 2], pl[i, 2])
    duh, dul = ds_sub(vh[j, 0], vl[j, 0], vh[i, 0], vl[i, 0])
    dvh, dvl = ds_sub(vh[j, 1], vl[j, 1], vh[i, 1], vl[i, 1])
    dwh, dwl = ds_sub(vh[j, 2], vl[j, 2], vh[i, 2], vl[i, 2])
    sh, sl = _dot3(dxh, dxl, dyh, dyl, dzh, dzl, dxh, dxl, dyh, dyl, dzh, dzl)
    sh, sl = ds_add(sh, sl, e2h, e2l)
    rvh, rvl = _dot3(dxh, dxl, dyh, dyl, dzh, dzl, duh, dul, dvh, dvl, dwh, dwl)
    qh, ql = ds_sqrt(sh, sl)
    th, tl = ds_div(_ONE32, _ONE32 - _ONE32, qh, ql)
    t2h, t2l = ds_mul(th, tl, th, tl)
    t3h, t3l = ds_mul(t2h, t2l, th, tl)
    alh, all_ = ds_mul(rvh, rvl, t2h, t2l)
    return (dxh, dxl, dyh, dyl, dzh, dzl, duh, dul, dvh, dvl, dwh, dwl,
            sh, t2h, t2l, t3h, t3l, alh, all_)


@njit(cache=True, error_model="numpy")
def _jerk_term(mt3h, mt3l, duh, dul, dxh, dxl, a3h, a3l):
    # m t^3 (v - 3 alpha r), one component
    ph, pl = ds_mul(a3h, a3l, dxh, dxl)
    ph, pl = ds_sub(duh, dul, ph, pl)
    return ds_mul(mt3h, mt3l, ph, pl)


@njit(cache=True, nogil=True, error_model="numpy")
def _acc_jerk_ex(mh, ml, ph, pl, vh, vl, e2h, e2l, start, stop, ah_, al_, jh_, jl_):
    n = mh.shape[0]
    for i in range(start, stop):
        acc = np.zeros(6, np.float32)
        jrk = np.zeros(6, np.float32)
        for j in range(n):
            if j == i:
                continue
            (dxh, dxl, dyh, dyl, dzh, dzl, duh, dul, dvh, dvl, dwh, dwl,
             sh, t2h, t2l, t3h, t3l, alh, all_) = _pair_common(ph, pl, vh, vl, i, j, e2h, e2l)
            if sh == 0:
                return i * n + j
            mt3h, mt3l = ds_mul(mh[j], ml[j], t3h, t3l)
            a3h, a3l = ds_mul_f(alh, all_, _THREE32)

            xh, xl = ds_mul(mt3h, mt3l, dxh, dxl)
            acc[0], acc[1] = ds_add(acc[0], acc[1], xh, xl)
            xh, xl = ds_mul(mt3h, mt3l, dyh, dyl)
            acc[2], acc[3] = ds_add(acc[2], acc[3], xh, xl)
            xh, xl = ds_mul(mt3h, mt3l, dzh, dzl)
            acc[4], acc[5] = ds_add(acc[4], acc[5], xh, xl)

            xh, xl = _jerk_term(mt3h, mt3l, duh, dul, dxh, dxl, a3h, a3l)
            jrk[0], jrk[1] = ds_add(jrk[0], jrk[1], xh, xl)
            xh, xl = _jerk_term(mt3h, mt3l, dvh, dvl, dyh, dyl, a3h, a3l)
            jrk[2], jrk[3] = ds_add(jrk[2], jrk[3], xh, xl)
            xh, xl = _jerk_term(mt3h, mt3l, dwh, dwl, dzh, dzl, a3h, a3l)
            jrk[4], jrk[5] = ds_add(jrk[4], jrk[5], xh, xl)
        for k in range(3):
            ah_[i, k] = acc[2 * k]
            al_[i, k] = acc[2 * k + 1]
            jh_[i, k] = jrk[2 * k]
            jl_[i, k] = jrk[2 * k + 1]
    return -1


@njit(cache=True, error_model="numpy")
def _snap_term(mt3h, mt3l, dah, dal, duh, dul, dxh, dxl, a3h, a3l, a6h, a6l, b3h, b3l):
    # m t^3 A - 6 alpha jerk_ij - 3 beta acc_ij, one component
    pah, pal = ds_mul(mt3h, mt3l, dxh, dxl)
    pjh, pjl = _jerk_term(mt3h, mt3l, duh, dul, dxh, dxl, a3h, a3l)
    th, tl = ds_mul(mt3h, mt3l, dah, dal)
    uh, ul = ds_mul(a6h, a6l, pjh, pjl)
    th, tl = ds_sub(th, tl, uh, ul)
    uh, ul = ds_mul(b3h, b3l, pah, pal)
    return ds_sub(th, tl, uh, ul)


@njit(cache=True, nogil=True, error_model="numpy")
def _snap_ex(mh, ml, ph, pl, vh, vl, ach, acl, e2h, e2l, start, stop, sh_, sl_):
    n = mh.shape[0]
    for i in range(start, stop):
        snp = np.zeros(6, np.float32)
        for j in range(n):
            if j == i:
                continue
            (dxh, dxl, dyh, dyl, dzh, dzl, duh, dul, dvh, dvl, dwh, dwl,
             sh, t2h, t2l, t3h, t3l, alh, all_) = _pair_common(ph, pl, vh, vl, i, j, e2h, e2l)
            if sh == 0:
                return i * n + j
            mt3h, mt3l = ds_mul(mh[j], ml[j], t3h, t3l)
            dph, dpl = ds_sub(ach[j, 0], acl[j, 0], ach[i, 0], acl[i, 0])
            dqh, dql = ds_sub(ach[j, 1], acl[j, 1], ach[i, 1], acl[i, 1])
            drh, drl = ds_sub(ach[j, 2], acl[j, 2], ach[i, 2], acl[i, 2])
            v2h, v2l = _dot3(duh, dul, dvh, dvl, dwh, dwl, duh, dul, dvh, dvl, dwh, dwl)
            rah, ral = _dot3(dxh, dxl, dyh, dyl, dzh, dzl, dph, dpl, dqh, dql, drh, drl)
            bh, bl = ds_add(v2h, v2l, rah, ral)
            bh, bl = ds_mul(bh, bl, t2h, t2l)
            xh, xl = ds_mul(alh, all_, alh, all_)
            bh, bl = ds_add(bh, bl, xh, xl)
            a3h, a3l = ds_mul_f(alh, all_, _THREE32)
            a6h, a6l = ds_mul_f(alh, all_, _SIX32)
            b3h, b3l = ds_mul_f(bh, bl, _THREE32)

            xh, xl = _snap_term(mt3h, mt3l, dph, dpl, duh, dul, dxh, dxl,
                                a3h, a3l, a6h, a6l, b3h, b3l)
            snp[0], snp[1] = ds_add(snp[0], snp[1], xh, xl)
            xh, xl = _snap_term(mt3h, mt3l, dqh, dql, dvh, dvl, dyh, dyl,
                                a3h, a3l, a6h, a6l, b3h, b3l)
            snp[2], snp[3] = ds_add(snp[2], snp[3], xh, xl)
            xh, xl = _snap_term(mt3h, mt3l, drh, drl, dwh, dwl, dzh, dzl,
                                a3h, a3l, a6h, a6l, b3h, b3l)
            snp[4], snp[5] = ds_add(snp[4], snp[5], xh, xl)
        for k in range(3):
            sh_[i, k] = snp[2 * k]
            sl_[i, k] = snp[2 * k + 1]
    return -1


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _slices(n, workers):
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run(fn, args, n, workers):
    """Run ``fn(*args, start, stop, *outs)`` over disjoint slices of the i-range."""
    head, outs = args
    slices = _slices(n, workers)
    if len(slices) == 1:
        codes = [fn(*head, 0, n, *outs)]
    else:
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            futs = [pool.submit(fn, *head, a, b, *outs) for a, b in slices]
            codes = [f.result() for f in futs]
    for code in codes:
        if code >= 0:
            raise SingularityError(code // n, code % n)


def _check_workers(workers):
    if workers is None:
        return default_workers()
    if int(workers) < 1:
        raise ValueError(f"invalid worker count {workers}")
    return int(workers)


class _ExState:
    """EX images of the inputs, converted once per evaluation."""

    def __init__(self, mass, pos, vel, eps):
        self.mh, self.ml = split_array(mass)
        self.ph, self.pl = split_array(pos)
        self.vh, self.vl = split_array(vel)
        e2h, e2l = split_array(np.array([float(eps) ** 2]))
        self.e2h, self.e2l = e2h[0], e2l[0]


def _ex_acc_jerk(st, workers):
    n = st.mh.shape[0]
    ah = np.zeros((n, 3), np.float32)
    al = np.zeros((n, 3), np.float32)
    jh = np.zeros((n, 3), np.float32)
    jl = np.zeros((n, 3), np.float32)
    _run(_acc_jerk_ex,
         ((st.mh, st.ml, st.ph, st.pl, st.vh, st.vl, st.e2h, st.e2l), (ah, al, jh, jl)),
         n, workers)
    return ah, al, jh, jl


def _ex_snap(st, ach, acl, workers):
    n = st.mh.shape[0]
    sh = np.zeros((n, 3), np.float32)
    sl = np.zeros((n, 3), np.float32)
    _run(_snap_ex,
         ((st.mh, st.ml, st.ph, st.pl, st.vh, st.vl, ach, acl, st.e2h, st.e2l), (sh, sl)),
         n, workers)
    return sh, sl


def acc_jerk(mass, pos, vel, softening=0.0, precision=Precision.DP, workers=None):
    """Pass 1 on raw arrays; returns ``(acc, jerk)`` as float64 ``(n, 3)``."""
    workers = _check_workers(workers)
    precision = Precision(precision)
    n = len(mass)
    if precision is Precision.EX:
        ah, al, jh, jl = _ex_acc_jerk(_ExState(mass, pos, vel, softening), workers)
        return join_array(ah, al), join_array(jh, jl)
    acc = np.zeros((n, 3))
    jerk = np.zeros((n, 3))
    _run(_acc_jerk_dp, ((mass, pos, vel, float(softening) ** 2), (acc, jerk)), n, workers)
    return acc, jerk


def snap(mass, pos, vel, acc, softening=0.0, precision=Precision.DP, workers=None):
    """Pass 2 on raw arrays given pass-1 accelerations."""
    workers = _check_workers(workers)
    precision = Precision(precision)
    n = len(mass)
    acc = np.ascontiguousarray(acc, dtype=np.float64)
    if precision is Precision.EX:
        st = _ExState(mass, pos, vel, softening)
        ach, acl = split_array(acc)
        return join_array(*_ex_snap(st, ach, acl, workers))
    out = np.zeros((n, 3))
    _run(_snap_dp, ((mass, pos, vel, acc, float(softening) ** 2), (out,)), n, workers)
    return out


def evaluate(mass, pos, vel, softening=0.0, precision=Precision.DP, workers=None) -> DerivSet:
    """Both passes.  The EX backend feeds pass-1 pairs straight into pass 2."""
    workers = _check_workers(workers)
    precision = Precision(precision)
    mass = np.ascontiguousarray(mass, dtype=np.float64)
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    vel = np.ascontiguousarray(vel, dtype=np.float64)
    if precision is Precision.EX:
        st = _ExState(mass, pos, vel, softening)
        ah, al, jh, jl = _ex_acc_jerk(st, workers)
        sh, sl = _ex_snap(st, ah, al, workers)
        return DerivSet(join_array(ah, al), join_array(jh, jl), join_array(sh, sl))
    acc, jerk = acc_jerk(mass, pos, vel, softening, precision, workers)
    return DerivSet(acc, jerk, snap(mass, pos, vel, acc, softening, precision, workers))


def compute_acc_jerk(sys: ParticleSystem, softening=0.0, precision=Precision.DP, workers=None):
    return acc_jerk(sys.mass, sys.pos, sys.vel, softening, precision, workers)


def compute_snap(sys: ParticleSystem, accs, softening=0.0, precision=Precision.DP, workers=None):
    return snap(sys.mass, sys.pos, sys.vel, accs, softening, precision, workers)


def compute_derivs(sys: ParticleSystem, softening=0.0, precision=Precision.DP, workers=None) -> DerivSet:
    return evaluate(sys.mass, sys.pos, sys.vel, softening, precision, workers)
