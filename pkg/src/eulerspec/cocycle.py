"""Growth of the amplitude transport over the projected flow.

The amplitude equation is linear in b and preserves the plane orthogonal to
the frequency, so over each trajectory of (x, xi/|xi|) it defines a cocycle
of linear maps on that plane. Its extreme Lyapunov exponents are extracted
with the discrete QR method: evolve an orthonormal amplitude pair, perform
Gram-Schmidt inside the current plane on a fixed schedule, and accumulate the
logs of the stretch factors into per-vector ledgers. Real arithmetic is
enough: the transport has real coefficients, so real and imaginary parts of a
complex amplitude evolve independently and see the same growth rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bas import (FiberFrame, IntegrationError, IntegratorControls,
                  _STATUS_MESSAGES, _orthonormal_complement, _safe_exp)
from .flows import FourierFlow

__all__ = [
    "FiberFrame", "ExponentSample", "CocycleResult", "init_fiber_frame",
    "evolve_exponents", "cocycle_matrix", "fiber_basis",
]


def init_fiber_frame(xi0, seed: int = 0) -> FiberFrame:
    """Seeded orthonormal amplitude pair spanning the plane orthogonal to xi0.

    The first vector is drawn isotropically in the plane, so independent
    seeds give frames in general position; exponent estimates must not depend
    on the seed beyond finite-horizon noise. Ledgers start at zero.
    """
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    nrm = np.linalg.norm(xi0)
    if nrm == 0.0:
        raise ValueError("frequency must be nonzero")
    xh = xi0 / nrm
    rng = np.random.default_rng(seed)
    while True:
        v = rng.standard_normal(3)
        v -= (v @ xh) * xh
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            break
    b1 = v / nv
    b2 = np.cross(xh, b1)
    b2 /= np.linalg.norm(b2)
    return FiberFrame(b1=b1, b2=b2)


@dataclass
class ExponentSample:
    """Lyapunov-exponent estimate from one trajectory of horizon T.

    lambda1 >= lambda2 are the QR ledger totals divided by |T|. The
    checkpoint arrays give the same quantities at intermediate horizons
    (lambda_i(t) = ledger_i(t)/t, pair-sorted per checkpoint) so convergence
    in T can be judged per sample. volume_ledger is ledger1+ledger2, recorded
    as a diagnostic next to the frequency log-stretch; any relation between
    the two is observed downstream, never assumed here.
    """

    x0: np.ndarray
    xi0: np.ndarray
    T: float
    lambda1: float
    lambda2: float
    ledger1: float
    ledger2: float
    checkpoint_t: np.ndarray
    checkpoint_lambda1: np.ndarray
    checkpoint_lambda2: np.ndarray
    checkpoint_log_xi: np.ndarray
    drift_H: float
    drift_bxi: float
    max_dir_dev: float
    final_log_xi: float
    n_accepted: int
    n_rejected: int
    n_qr: int
    seed: int

    @property
    def convergence_tail(self):
        """Checkpoint series as (t, lambda1(t), lambda2(t)) tuples."""
        return [
            (float(self.checkpoint_t[k]),
             float(self.checkpoint_lambda1[k]),
             float(self.checkpoint_lambda2[k]))
            for k in range(len(self.checkpoint_t))
        ]

    @property
    def volume_ledger(self) -> float:
        return self.ledger1 + self.ledger2

    @property
    def tail_movement(self) -> float:
        """Largest exponent change over the final checkpoint interval."""
        if len(self.checkpoint_t) < 2:
            return math.inf
        d1 = abs(self.checkpoint_lambda1[-1] - self.checkpoint_lambda1[-2])
        d2 = abs(self.checkpoint_lambda2[-1] - self.checkpoint_lambda2[-2])
        return max(d1, d2)


def _event_schedule(t_abs: float, reorth_interval: float, checkpoints):
    if checkpoints is None:
        cps = np.array([t_abs / 8.0, t_abs / 4.0, t_abs / 2.0, t_abs])
    else:
        cps = np.asarray(checkpoints, dtype=np.float64)
        if cps.size == 0 or cps[-1] != t_abs:
            cps = np.append(cps, t_abs)
    if np.any(cps <= 0) or (cps.size > 1 and np.any(np.diff(cps) <= 0)):
        raise ValueError("checkpoints must be positive and strictly increasing")
    n_grid = int(math.floor(t_abs / reorth_interval))
    grid = reorth_interval * np.arange(1, n_grid + 1)
    grid = grid[grid < t_abs]
    events = np.union1d(grid, cps)
    is_cp = np.isin(events, cps).astype(np.int8)
    return events, is_cp, cps


def evolve_exponents(flow: FourierFlow, x0, xi0, t_final: float,
                     reorth_interval: float | None = None,
                     controls: IntegratorControls | None = None,
                     seed: int = 0,
                     checkpoints=None,
                     frame: FiberFrame | None = None) -> ExponentSample:
    """Run the QR ledger over one trajectory and return the exponent sample.

    t_final may be negative; exponents are then growth rates per unit of
    backward time (computed by an actual backward run, not by negating the
    forward result). Checkpoints are positive magnitudes of elapsed time and
    default to the dyadic set {T/8, T/4, T/2, T}. reorth_interval defaults to
    the controls value; Gram-Schmidt also fires early whenever the frame
    condition number exceeds controls.cond_max.
    """
    ctl = controls or IntegratorControls()
    if reorth_interval is None:
        reorth_interval = ctl.reorth_interval
    if reorth_interval <= 0:
        raise ValueError("reorth_interval must be positive")
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    if t_final == 0.0:
        raise ValueError("horizon must be nonzero")
    t_abs = abs(t_final)
    dirn = 1.0 if t_final > 0 else -1.0
    if frame is None:
        frame = init_fiber_frame(xi0, seed)

    events, is_cp, cps = _event_schedule(t_abs, reorth_interval, checkpoints)
    nxi = float(np.linalg.norm(xi0))
    if nxi == 0.0:
        raise ValueError("frequency must be nonzero")
    y = np.empty(13)
    y[0:3] = x0
    y[3:6] = xi0 / nxi
    y[6] = math.log(nxi)
    y[7:10] = frame.b1
    y[10:13] = frame.b2

    ncp = int(is_cp.sum())
    cp_led1 = np.empty(ncp)
    cp_led2 = np.empty(ncp)
    cp_ell = np.empty(ncp)
    led = np.zeros(2)
    stats = np.empty(K.R_LEN)
    status = K._run_exponents(flow.k_float, flow.c_re, flow.c_im, y,
                              dirn * events, is_cp, ctl.rtol, ctl.atol,
                              ctl.cond_max, ctl.max_steps, cp_led1, cp_led2,
                              cp_ell, led, stats)
    if status != K.OK:
        raise IntegrationError(_STATUS_MESSAGES.get(status, f"status {status}"),
                               t_reached=stats[K.R_T_REACHED])

    pair = np.stack([cp_led1 / cps, cp_led2 / cps])
    lo = pair.min(axis=0)
    hi = pair.max(axis=0)
    lam_hi = led[0] / t_abs
    lam_lo = led[1] / t_abs
    if lam_lo > lam_hi:
        lam_hi, lam_lo = lam_lo, lam_hi
    return ExponentSample(
        x0=x0.copy(), xi0=xi0.copy(), T=float(t_final),
        lambda1=float(lam_hi), lambda2=float(lam_lo),
        ledger1=float(led[0]), ledger2=float(led[1]),
        checkpoint_t=dirn * cps, checkpoint_lambda1=hi, checkpoint_lambda2=lo,
        checkpoint_log_xi=cp_ell,
        drift_H=float(stats[K.R_HDRIFT]),
        drift_bxi=float(stats[K.R_BXI_HAT]),
        max_dir_dev=float(stats[K.R_DIR_DEV]),
        final_log_xi=float(y[6]),
        n_accepted=int(stats[K.R_NACC]), n_rejected=int(stats[K.R_NREJ]),
        n_qr=int(stats[K.R_NQR]), seed=seed,
    )


@dataclass
class CocycleResult:
    """Amplitude transport over [0, t] expressed in orthonormal plane bases."""

    matrix: np.ndarray
    x_t: np.ndarray
    xi_dir_t: np.ndarray
    log_xi_t: float
    basis0: np.ndarray
    basis_t: np.ndarray


def fiber_basis(xi_hat) -> np.ndarray:
    """Deterministic orthonormal basis (rows) of the plane orthogonal to xi_hat."""
    xh = np.asarray(xi_hat, dtype=np.float64).reshape(3)
    e1, e2 = _orthonormal_complement(xh)
    return np.stack([e1, e2])


def cocycle_matrix(flow: FourierFlow, x0, xi0, t: float,
                   basis0: np.ndarray | None = None,
                   controls: IntegratorControls | None = None) -> CocycleResult:
    """2x2 matrix of the amplitude transport from (x0, xi0) over time t.

    Input coordinates use basis0 (default: the deterministic plane basis at
    xi0); output coordinates use the deterministic plane basis at the
    endpoint, which is also returned. Both columns are rescaled by a common
    factor whenever they grow large, and the rescaling is undone in the
    reported matrix through log bookkeeping, so the entries are exact up to
    float range. At t=0 the result is the exact identity in basis0.
    """
    ctl = controls or IntegratorControls()
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    nxi = float(np.linalg.norm(xi0))
    if nxi == 0.0:
        raise ValueError("frequency must be nonzero")
    xh = xi0 / nxi
    if basis0 is None:
        basis0 = fiber_basis(xh)
    basis0 = np.asarray(basis0, dtype=np.float64).reshape(2, 3)
    if t == 0.0:
        return CocycleResult(matrix=np.eye(2), x_t=x0.copy(), xi_dir_t=xh.copy(),
                             log_xi_t=float(math.log(nxi)), basis0=basis0,
                             basis_t=basis0.copy())
    y = np.empty(13)
    y[0:3] = x0
    y[3:6] = xh
    y[6] = math.log(nxi)
    y[7:10] = basis0[0]
    y[10:13] = basis0[1]
    stats = np.empty(K.S_LEN)
    n_legs = max(1, int(math.ceil(abs(t) / ctl.reorth_interval)))
    edges = np.linspace(0.0, t, n_legs + 1)
    h = 0.0
    log_rescale = 0.0
    for i in range(1, n_legs + 1):
        status = K._leg(K.MODE_BAS, 1, 0, ctl.cond_max, flow.k_float, flow.c_re,
                        flow.c_im, y, edges[i - 1], edges[i], h, ctl.rtol,
                        ctl.atol, ctl.max_steps, stats)
        h = stats[K.S_H_NEXT]
        if status != K.OK:
            raise IntegrationError(_STATUS_MESSAGES.get(status, f"status {status}"),
                                   t_reached=stats[K.S_T_REACHED])
        big = max(np.linalg.norm(y[7:10]), np.linalg.norm(y[10:13]))
        if big > 1e100 or (0.0 < big < 1e-100):
            y[7:13] /= big
            log_rescale += math.log(big)
    basis_t = fiber_basis(y[3:6])
    w = np.stack([y[7:10], y[10:13]])  # transported basis0 vectors as rows
    matrix = basis_t @ w.T
    if log_rescale != 0.0:
        matrix = matrix * _safe_exp(log_rescale)
    return CocycleResult(matrix=matrix, x_t=y[0:3].copy(), xi_dir_t=y[3:6].copy(),
                         log_xi_t=float(y[6]), basis0=basis0, basis_t=basis_t)
