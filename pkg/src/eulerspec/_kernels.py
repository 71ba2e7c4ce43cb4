"""Compiled numerics: an adaptive Dormand-Prince 5(4) stepper specialized to
the characteristic system and its variational flow.

A generic ODE driver is not enough here because the state must be touched
between accepted steps: the frequency direction is renormalized with the log
stretch moved into a running ledger, amplitude vectors are re-projected onto
the plane orthogonal to the frequency, and frame growth is harvested by
Gram-Schmidt sweeps at scheduled times. Every one of those operations is
guarded so that it is a bitwise no-op whenever the step itself left the
relevant components bitwise unchanged; a flow with zero velocity gradient
then yields ledgers that are exactly 0.0, not merely small.

The 13-component state vector reads
    y[0:3]   position on the torus (never wrapped)
    y[3:6]   unit frequency direction
    y[6]     log of the frequency magnitude
    y[7:10]  first amplitude vector
    y[10:13] second amplitude vector
and the 12-component variational state is position plus the row-major
Jacobian of the position flow.

All kernels are plain Python functions compiled with numba when it is
available; without numba they still run (slowly) unmodified.
"""

from __future__ import annotations

import math

import numpy as np


def _compiled(fn):
    # keep the pure-Python fallback importable when numba is absent
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# integration outcome codes
OK = 0
MAX_STEPS = 1
H_UNDERFLOW = 2
REORTH = 3  # internal: frame condition limit hit, caller must re-orthonormalize
COLLAPSE = 4  # a Gram-Schmidt stretch factor fell below 1e-300

MODE_BAS = 0
MODE_VAR = 1

# leg statistics slots
S_T_REACHED = 0
S_H_NEXT = 1
S_NACC = 2
S_NREJ = 3
S_NRHS = 4
S_DIR_DEV = 5
S_BXI_HAT = 6
S_BXI_RAWLOG = 7
S_COND = 8
S_CHANGED = 9
S_LEN = 10

# full-run statistics slots
R_T_REACHED = 0
R_NACC = 1
R_NREJ = 2
R_NRHS = 3
R_DIR_DEV = 4
R_BXI_HAT = 5
R_BXI_RAWLOG = 6
R_H0 = 7
R_HDRIFT = 8
R_NQR = 9
R_NCOND = 10
R_CHANGED = 11
R_LEN = 12

NEG_LOG = -1.0e308

# Dormand-Prince 5(4) tableau
A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0


@_compiled
def _flow_eval(kmat, cre, cim, x, u, g):
    """Velocity u and Jacobian g[i, j] = du_i/dx_j by direct mode summation."""
    for i in range(3):
        u[i] = 0.0
        g[i, 0] = 0.0
        g[i, 1] = 0.0
        g[i, 2] = 0.0
    for m in range(kmat.shape[0]):
        th = kmat[m, 0] * x[0] + kmat[m, 1] * x[1] + kmat[m, 2] * x[2]
        co = math.cos(th)
        si = math.sin(th)
        for i in range(3):
            a = cre[m, i]
            b = cim[m, i]
            u[i] += a * co - b * si
            w = -(a * si + b * co)
            g[i, 0] += w * kmat[m, 0]
            g[i, 1] += w * kmat[m, 1]
            g[i, 2] += w * kmat[m, 2]


@_compiled
def _rhs(mode, kmat, cre, cim, y, dy, u, g):
    """Time derivative of the 13-component (mode 0) or 12-component (mode 1) state."""
    _flow_eval(kmat, cre, cim, y[0:3], u, g)
    dy[0] = u[0]
    dy[1] = u[1]
    dy[2] = u[2]
    if mode == MODE_VAR:
        # variational flow: row i of the Jacobian evolves as g @ row-space
        for i in range(3):
            for j in range(3):
                dy[3 + 3 * i + j] = (
                    g[i, 0] * y[3 + j] + g[i, 1] * y[6 + j] + g[i, 2] * y[9 + j]
                )
        return
    xh0 = y[3]
    xh1 = y[4]
    xh2 = y[5]
    # transpose action on the frequency, split into direction and log magnitude
    gt0 = g[0, 0] * xh0 + g[1, 0] * xh1 + g[2, 0] * xh2
    gt1 = g[0, 1] * xh0 + g[1, 1] * xh1 + g[2, 1] * xh2
    gt2 = g[0, 2] * xh0 + g[1, 2] * xh1 + g[2, 2] * xh2
    lam = xh0 * gt0 + xh1 * gt1 + xh2 * gt2
    dy[3] = -(gt0 - lam * xh0)
    dy[4] = -(gt1 - lam * xh1)
    dy[5] = -(gt2 - lam * xh2)
    dy[6] = -lam
    for off in (7, 10):
        b0 = y[off]
        b1 = y[off + 1]
        b2 = y[off + 2]
        gb0 = g[0, 0] * b0 + g[0, 1] * b1 + g[0, 2] * b2
        gb1 = g[1, 0] * b0 + g[1, 1] * b1 + g[1, 2] * b2
        gb2 = g[2, 0] * b0 + g[2, 1] * b1 + g[2, 2] * b2
        s = 2.0 * (gb0 * xh0 + gb1 * xh1 + gb2 * xh2)
        dy[off] = -gb0 + s * xh0
        dy[off + 1] = -gb1 + s * xh1
        dy[off + 2] = -gb2 + s * xh2


@_compiled
def _frame_cond(y):
    """Condition number of the 3x2 amplitude frame via its 2x2 Gram matrix."""
    g11 = y[7] * y[7] + y[8] * y[8] + y[9] * y[9]
    g22 = y[10] * y[10] + y[11] * y[11] + y[12] * y[12]
    g12 = y[7] * y[10] + y[8] * y[11] + y[9] * y[12]
    mean = 0.5 * (g11 + g22)
    half = 0.5 * (g11 - g22)
    disc = math.sqrt(half * half + g12 * g12)
    lo = mean - disc
    if lo <= 0.0:
        return 1.0e308
    return math.sqrt((mean + disc) / lo)


@_compiled
def _leg(mode, project_b, check_cond, cond_max, kmat, cre, cim, y, t0, t1,
         h_in, rtol, atol, max_steps, stats):
    """Integrate one leg from t0 to t1 in place; returns an outcome code.

    FSAL reuse is deliberately off: the post-step state surgery below would
    invalidate a cached final-stage derivative, so every step starts with a
    fresh evaluation.
    """
    n = y.shape[0]
    k = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    u = np.empty(3)
    g = np.empty((3, 3))

    for i in range(S_LEN):
        stats[i] = 0.0
    stats[S_BXI_RAWLOG] = NEG_LOG
    stats[S_T_REACHED] = t0
    stats[S_H_NEXT] = h_in

    if t1 == t0:
        return OK
    dirn = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    nrhs = 0

    _rhs(mode, kmat, cre, cim, y, k[0], u, g)
    nrhs += 1

    h = abs(h_in)
    if h == 0.0:
        # standard two-evaluation starting-step guess
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k[0][i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        if h0 > span:
            h0 = span
        for i in range(n):
            ytmp[i] = y[i] + dirn * h0 * k[0][i]
        _rhs(mode, kmat, cre, cim, ytmp, k[1], u, g)
        nrhs += 1
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d2 += ((k[1][i] - k[0][i]) / sc) ** 2
        d2 = math.sqrt(d2 / n) / h0
        dmax = max(d1, d2)
        if dmax <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / dmax) ** 0.2
        h = min(100.0 * h0, h1)
    if h > span:
        h = span

    t = t0
    nacc = 0
    nrej = 0
    status = OK
    while True:
        rem = abs(t1 - t)
        if rem <= 0.0:
            break
        if nacc + nrej >= max_steps:
            status = MAX_STEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = H_UNDERFLOW
            break
        last = False
        if h >= rem:
            h = rem
            last = True
        hs = dirn * h

        _rhs(mode, kmat, cre, cim, y, k[0], u, g)
        for i in range(n):
            ytmp[i] = y[i] + hs * A21 * k[0][i]
        _rhs(mode, kmat, cre, cim, ytmp, k[1], u, g)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A31 * k[0][i] + A32 * k[1][i])
        _rhs(mode, kmat, cre, cim, ytmp, k[2], u, g)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i])
        _rhs(mode, kmat, cre, cim, ytmp, k[3], u, g)
        for i in range(n):
            ytmp[i] = y[i] + hs * (
                A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]
            )
        _rhs(mode, kmat, cre, cim, ytmp, k[4], u, g)
        for i in range(n):
            ytmp[i] = y[i] + hs * (
                A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i]
                + A64 * k[3][i] + A65 * k[4][i]
            )
        _rhs(mode, kmat, cre, cim, ytmp, k[5], u, g)
        for i in range(n):
            ynew[i] = y[i] + hs * (
                B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i]
                + B5 * k[4][i] + B6 * k[5][i]
            )
        _rhs(mode, kmat, cre, cim, ynew, k[6], u, g)
        nrhs += 7

        err = 0.0
        for i in range(n):
            ei = hs * (
                E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i]
                + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]
            )
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (ei / sc) ** 2
        err = math.sqrt(err / n)

        if err <= 1.0:
            nacc += 1
            t = t1 if last else t + hs
            changed = False
            if mode == MODE_BAS:
                for i in range(3, 13):
                    if ynew[i] != y[i]:
                        changed = True
                        break
            for i in range(n):
                y[i] = ynew[i]
            if changed:
                stats[S_CHANGED] = 1.0
                # renormalize the direction, banking the stretch into the ledger
                nrm = math.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
                dev = abs(nrm - 1.0)
                if dev > stats[S_DIR_DEV]:
                    stats[S_DIR_DEV] = dev
                if nrm != 1.0:
                    y[6] += math.log(nrm)
                    inv = 1.0 / nrm
                    y[3] *= inv
                    y[4] *= inv
                    y[5] *= inv
                for off in (7, 10):
                    if off == 10 and project_b == 0:
                        break  # second slot is a passenger in single-amplitude runs
                    d = y[off] * y[3] + y[off + 1] * y[4] + y[off + 2] * y[5]
                    nb = math.sqrt(
                        y[off] ** 2 + y[off + 1] ** 2 + y[off + 2] ** 2
                    )
                    if nb > 0.0:
                        rel = abs(d) / nb
                        if rel > stats[S_BXI_HAT]:
                            stats[S_BXI_HAT] = rel
                    if d != 0.0:
                        lraw = y[6] + math.log(abs(d))
                        if lraw > stats[S_BXI_RAWLOG]:
                            stats[S_BXI_RAWLOG] = lraw
                        if project_b == 1:
                            y[off] -= d * y[3]
                            y[off + 1] -= d * y[4]
                            y[off + 2] -= d * y[5]
                if check_cond == 1:
                    cnd = _frame_cond(y)
                    stats[S_COND] = cnd
                    if cnd > cond_max:
                        status = REORTH
                        stats[S_T_REACHED] = t
                        break
            if err < 1e-30:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h *= fac
        else:
            nrej += 1
            if math.isfinite(err):
                fac = 0.9 * err ** -0.2
                if fac < 0.1:
                    fac = 0.1
            else:
                fac = 0.1
            h *= fac

    if status != REORTH:
        stats[S_T_REACHED] = t
    stats[S_H_NEXT] = h
    stats[S_NACC] = nacc
    stats[S_NREJ] = nrej
    stats[S_NRHS] = nrhs
    return status


@_compiled
def _qr_event(y, snap, led, drift):
    """Gram-Schmidt sweep of the amplitude frame, banking log norms into led.

    Skipped bitwise when nothing moved since the previous sweep: measuring an
    unchanged frame would only bleed round-off into the ledgers.
    """
    changed = 0
    for i in range(3, 13):
        if y[i] != snap[i - 3]:
            changed = 1
            break
    if changed == 0:
        return 0
    xh0 = y[3]
    xh1 = y[4]
    xh2 = y[5]
    d = y[7] * xh0 + y[8] * xh1 + y[9] * xh2
    nb = math.sqrt(y[7] * y[7] + y[8] * y[8] + y[9] * y[9])
    if nb > 0.0 and abs(d) / nb > drift[0]:
        drift[0] = abs(d) / nb
    y[7] -= d * xh0
    y[8] -= d * xh1
    y[9] -= d * xh2
    n1 = math.sqrt(y[7] * y[7] + y[8] * y[8] + y[9] * y[9])
    if n1 < 1e-300:
        drift[1] = 1.0
        return 1
    led[0] += math.log(n1)
    inv = 1.0 / n1
    y[7] *= inv
    y[8] *= inv
    y[9] *= inv
    d2 = y[10] * xh0 + y[11] * xh1 + y[12] * xh2
    nb2 = math.sqrt(y[10] * y[10] + y[11] * y[11] + y[12] * y[12])
    if nb2 > 0.0 and abs(d2) / nb2 > drift[0]:
        drift[0] = abs(d2) / nb2
    y[10] -= d2 * xh0
    y[11] -= d2 * xh1
    y[12] -= d2 * xh2
    r12 = y[7] * y[10] + y[8] * y[11] + y[9] * y[12]
    y[10] -= r12 * y[7]
    y[11] -= r12 * y[8]
    y[12] -= r12 * y[9]
    n2 = math.sqrt(y[10] * y[10] + y[11] * y[11] + y[12] * y[12])
    if n2 < 1e-300:
        drift[1] = 1.0
        return 1
    led[1] += math.log(n2)
    inv2 = 1.0 / n2
    y[10] *= inv2
    y[11] *= inv2
    y[12] *= inv2
    for i in range(3, 13):
        snap[i - 3] = y[i]
    return 1


@_compiled
def _scaled_hamiltonian(kmat, cre, cim, y, u, g):
    """Hamiltonian u(x).xi recovered from the split representation, overflow-safe.

    Returns (value, ok); the value is +-inf when exp would overflow.
    """
    _flow_eval(kmat, cre, cim, y[0:3], u, g)
    s = u[0] * y[3] + u[1] * y[4] + u[2] * y[5]
    if s == 0.0:
        return 0.0
    lh = y[6] + math.log(abs(s))
    if lh > 709.0:
        return math.inf if s > 0.0 else -math.inf
    v = math.exp(lh)
    return v if s > 0.0 else -v


@_compiled
def _run_exponents(kmat, cre, cim, y, t_events, is_cp, rtol, atol, cond_max,
                   max_steps, cp_led1, cp_led2, cp_ell, led, stats):
    """Drive the amplitude frame through all scheduled events in one call.

    t_events must be strictly monotone, starting after 0 and ending at the
    final horizon; is_cp marks the entries at which the running ledgers are
    checkpointed. led accumulates the two Gram-Schmidt log-stretch ledgers.
    """
    leg = np.empty(S_LEN)
    drift = np.zeros(2)
    u = np.empty(3)
    g = np.empty((3, 3))
    snap = y[3:13].copy()

    for i in range(R_LEN):
        stats[i] = 0.0
    stats[R_BXI_RAWLOG] = NEG_LOG
    h0 = _scaled_hamiltonian(kmat, cre, cim, y, u, g)
    stats[R_H0] = h0

    t = 0.0
    h = 0.0
    cp_i = 0
    budget = max_steps
    for e in range(t_events.shape[0]):
        t_target = t_events[e]
        while True:
            st = _leg(MODE_BAS, 1, 1, cond_max, kmat, cre, cim, y, t,
                      t_target, h, rtol, atol, budget, leg)
            t = leg[S_T_REACHED]
            h = leg[S_H_NEXT]
            stats[R_NACC] += leg[S_NACC]
            stats[R_NREJ] += leg[S_NREJ]
            stats[R_NRHS] += leg[S_NRHS]
            budget -= int(leg[S_NACC] + leg[S_NREJ])
            if leg[S_DIR_DEV] > stats[R_DIR_DEV]:
                stats[R_DIR_DEV] = leg[S_DIR_DEV]
            if leg[S_BXI_HAT] > stats[R_BXI_HAT]:
                stats[R_BXI_HAT] = leg[S_BXI_HAT]
            if leg[S_BXI_RAWLOG] > stats[R_BXI_RAWLOG]:
                stats[R_BXI_RAWLOG] = leg[S_BXI_RAWLOG]
            if leg[S_CHANGED] == 1.0:
                stats[R_CHANGED] = 1.0
            if st == REORTH:
                drift[0] = stats[R_BXI_HAT]
                _qr_event(y, snap, led, drift)
                stats[R_BXI_HAT] = drift[0]
                if drift[1] == 1.0:
                    stats[R_T_REACHED] = t
                    return COLLAPSE
                stats[R_NQR] += 1.0
                stats[R_NCOND] += 1.0
                continue
            if st != OK:
                stats[R_T_REACHED] = t
                return st
            break
        drift[0] = stats[R_BXI_HAT]
        if _qr_event(y, snap, led, drift) == 1:
            stats[R_NQR] += 1.0
        stats[R_BXI_HAT] = drift[0]
        if drift[1] == 1.0:
            stats[R_T_REACHED] = t
            return COLLAPSE
        hv = _scaled_hamiltonian(kmat, cre, cim, y, u, g)
        dh = abs(hv - h0)
        if dh > stats[R_HDRIFT]:
            stats[R_HDRIFT] = dh
        if is_cp[e] == 1:
            cp_led1[cp_i] = led[0]
            cp_led2[cp_i] = led[1]
            cp_ell[cp_i] = y[6]
            cp_i += 1
    stats[R_T_REACHED] = t
    return OK


def warm_up():
    """Force compilation of every kernel entry point on a tiny two-mode flow."""
    kmat = np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
    cre = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cim = np.array([[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
    stats = np.empty(S_LEN)
    y = np.array([0.1, 0.2, 0.3, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    _leg(MODE_BAS, 1, 1, 1e6, kmat, cre, cim, y, 0.0, 0.01, 0.0, 1e-8, 1e-10,
         10000, stats)
    _leg(MODE_BAS, 0, 0, 1e6, kmat, cre, cim, y, 0.01, 0.0, 0.0, 1e-8, 1e-10,
         10000, stats)
    yv = np.empty(12)
    yv[0:3] = [0.1, 0.2, 0.3]
    yv[3:12] = np.eye(3).ravel()
    _leg(MODE_VAR, 0, 0, 1e6, kmat, cre, cim, yv, 0.0, 0.01, 0.0, 1e-8, 1e-10,
         10000, stats)
    y2 = np.array([0.1, 0.2, 0.3, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    t_events = np.array([0.01, 0.02])
    is_cp = np.array([0, 1], dtype=np.int8)
    cp1 = np.empty(1)
    cp2 = np.empty(1)
    cpe = np.empty(1)
    led = np.zeros(2)
    rstats = np.empty(R_LEN)
    _run_exponents(kmat, cre, cim, y2, t_events, is_cp, 1e-8, 1e-10, 1e6,
                   100000, cp1, cp2, cpe, led, rstats)
