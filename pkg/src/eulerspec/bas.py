"""Characteristic-system integration: position, frequency, and amplitude
transport along trajectories of a steady torus flow.

The governing equations are
    dx/dt  = u(x)
    dxi/dt = -(grad u)^T xi
    db/dt  = -(grad u) b + 2 ((grad u) b . xi) xi / |xi|^2
with two conserved quantities, u(x).xi and b.xi. Internally the frequency is
split into a unit direction and a log magnitude so that arbitrarily strong
stretching never overflows; the amplitude equation is degree-0 homogeneous in
xi, so it only ever sees the direction. After every accepted step the
direction is renormalized (the stretch is banked into the log ledger exactly)
and the amplitude pair is re-projected onto the plane orthogonal to the
direction, with the removed component recorded as drift rather than silently
discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .flows import FourierFlow, eval_flow


class StateValidationError(ValueError):
    """Initial data violates a precondition (zero frequency, non-orthogonal amplitude)."""


class IntegrationError(RuntimeError):
    """The stepper gave up; t_reached tells how far it got."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t={t_reached:.6g})")
        self.t_reached = t_reached


_STATUS_MESSAGES = {
    K.MAX_STEPS: "step budget exhausted",
    K.H_UNDERFLOW: "step size underflow",
    K.COLLAPSE: "amplitude frame collapse: a stretch factor fell below 1e-300",
}


@dataclass
class IntegratorControls:
    """Error-control and bookkeeping knobs shared by every integration entry point."""

    rtol: float = 1e-10
    atol: float = 1e-12
    reorth_interval: float = 0.5
    cond_max: float = 1e6
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise StateValidationError("rtol and atol must be positive")
        if self.reorth_interval <= 0:
            raise StateValidationError("reorth_interval must be positive")
        if self.cond_max <= 1.0:
            raise StateValidationError("cond_max must exceed 1")
        if self.max_steps < 1:
            raise StateValidationError("max_steps must be at least 1")


@dataclass
class FiberFrame:
    """Amplitude pair spanning the plane orthogonal to the frequency direction.

    ledger1/ledger2 accumulate the logs of the Gram-Schmidt stretch factors
    harvested at re-orthonormalization events; they only ever receive logs of
    positive factors. reorth_count counts those events.
    """

    b1: np.ndarray
    b2: np.ndarray
    ledger1: float = 0.0
    ledger2: float = 0.0
    reorth_count: int = 0

    def __post_init__(self):
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(3).copy()
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(3).copy()


@dataclass
class BasState:
    """One point of the characteristic system in split representation.

    x is kept unreduced (the flow is periodic, so wrapping is cosmetic);
    xi_dir is a unit vector and exp(log_xi) the frequency magnitude.
    """

    t: float
    x: np.ndarray
    xi_dir: np.ndarray
    log_xi: float
    frame: FiberFrame

    @property
    def xi(self) -> np.ndarray:
        """Full frequency vector; overflows to inf for log_xi beyond ~709."""
        return _safe_exp(self.log_xi) * self.xi_dir


ORTHOGONALITY_TOL = 1e-8


def _orthonormal_complement(xh: np.ndarray):
    """Two unit vectors spanning the plane orthogonal to the unit vector xh."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(xh)))] = 1.0
    e1 = np.cross(axis, xh)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(xh, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


def _check_frame(xh: np.ndarray, frame: FiberFrame):
    for name, b in (("b1", frame.b1), ("b2", frame.b2)):
        nb = float(np.linalg.norm(b))
        if nb == 0.0:
            continue
        rel = abs(float(b @ xh)) / nb
        if rel > ORTHOGONALITY_TOL:
            raise StateValidationError(
                f"frame vector {name} is not orthogonal to the frequency "
                f"(|b.xi|/|b||xi| = {rel:.3e}); fix the initial data instead of "
                "relying on silent projection"
            )


def _pack(x0, xi0, frame: FiberFrame) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    nxi = float(np.linalg.norm(xi0))
    if nxi == 0.0 or not math.isfinite(nxi):
        raise StateValidationError("initial frequency must be nonzero and finite")
    xh = xi0 / nxi
    _check_frame(xh, frame)
    y = np.empty(13)
    y[0:3] = x0
    y[3:6] = xh
    y[6] = math.log(nxi)
    y[7:10] = frame.b1
    y[10:13] = frame.b2
    return y


def _safe_exp(v: float) -> float:
    if v > 709.0:
        return math.inf
    if v < -745.0:
        return 0.0
    return math.exp(v)


def scaled_hamiltonian(flow: FourierFlow, y: np.ndarray) -> float:
    """u(x).xi computed from the split state without overflowing for large log_xi."""
    ev = eval_flow(flow, y[0:3])
    s = float(ev.u @ y[3:6])
    if s == 0.0:
        return 0.0
    return math.copysign(_safe_exp(y[6] + math.log(abs(s))), s)


def hamiltonian(flow: FourierFlow, x, xi) -> float:
    """The conserved quantity u(x).xi in plain coordinates."""
    ev = eval_flow(flow, x)
    return float(ev.u @ np.asarray(xi, dtype=np.float64))


def bas_rhs(flow: FourierFlow, x, xi, b):
    """Reference right-hand side in unsplit coordinates; the kernels must match it."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ev = eval_flow(flow, x)
    g = ev.grad_u
    dx = ev.u
    dxi = -g.T @ xi
    gb = g @ b
    db = -gb + 2.0 * float(gb @ xi) / float(xi @ xi) * xi
    return dx, dxi, db


def bas_rhs_split(flow: FourierFlow, x, xi_dir, b):
    """Right-hand side in split coordinates: (dx, dxi_dir, dlog_xi, db).

    The raw frequency derivative -(grad u)^T xi decomposes into a tangential
    part that rotates the unit direction and a radial part that drives
    d log|xi|/dt; the amplitude equation uses the direction only.
    """
    x = np.asarray(x, dtype=np.float64)
    xh = np.asarray(xi_dir, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ev = eval_flow(flow, x)
    g = ev.grad_u
    gt = g.T @ xh
    lam = float(xh @ gt)
    dxh = -(gt - lam * xh)
    gb = g @ b
    db = -gb + 2.0 * float(gb @ xh) * xh
    return ev.u, dxh, -lam, db


@dataclass
class TrajectoryRecord:
    """Sampled history of one characteristic trajectory.

    xi_dir rows are unit directions; the frequency magnitude is exp(log_xi).
    drift_bxi is the running maximum, over both frame vectors, of the
    component removed by re-projection measured per unit amplitude
    (|b.xi_dir| / |b|). The underlying bilinear b.xi is conserved exactly, so
    with transverse initial data this is a pure error meter; normalizing by
    |b| keeps it scale-free when amplitude and frequency both grow
    exponentially, which is what makes the meter comparable across flows and
    horizons and lets it converge under step refinement instead of saturating
    at the round-off floor |b||xi| eps. H is the transported Hamiltonian
    u(x).xi at each sample.
    """

    t: np.ndarray
    x: np.ndarray
    xi_dir: np.ndarray
    log_xi: np.ndarray
    H: np.ndarray
    drift_bxi: np.ndarray
    final_state: BasState = field(repr=False)
    max_dir_dev: float
    max_bxi: float
    n_accepted: int
    n_rejected: int

    @property
    def max_H_drift(self) -> float:
        h0 = self.H[0]
        return float(np.max(np.abs(self.H - h0)))


def integrate_bas(flow: FourierFlow, x0, xi0, frame0: FiberFrame, t_final: float,
                  controls: IntegratorControls | None = None,
                  n_samples: int = 101,
                  t_samples=None) -> TrajectoryRecord:
    """Transport initial data (x0, xi0, frame0) to t_final, sampling on the way.

    t_final may be negative (the transport is a group in time). Samples
    default to a uniform grid including both endpoints; pass t_samples for
    explicit times (monotone, starting at 0 and ending at t_final). Frame
    vectors must be orthogonal to xi0 on entry; a violation is an error.
    """
    ctl = controls or IntegratorControls()
    t_final = float(t_final)
    if t_final == 0.0:
        raise StateValidationError("t_final must be nonzero")
    if t_samples is None:
        if n_samples < 2:
            raise StateValidationError("n_samples must be at least 2")
        ts = np.linspace(0.0, t_final, n_samples)
    else:
        ts = np.asarray(t_samples, dtype=np.float64)
        if ts[0] != 0.0 or ts[-1] != t_final:
            raise StateValidationError("t_samples must start at 0 and end at t_final")

    y = _pack(x0, xi0, frame0)
    n = ts.shape[0]
    xs = np.empty((n, 3))
    dirs = np.empty((n, 3))
    ells = np.empty(n)
    hs = np.empty(n)
    drifts = np.empty(n)

    xs[0] = y[0:3]
    dirs[0] = y[3:6]
    ells[0] = y[6]
    hs[0] = scaled_hamiltonian(flow, y)
    drifts[0] = 0.0

    leg_stats = np.empty(K.S_LEN)
    h = 0.0
    max_hat = 0.0
    max_dirdev = 0.0
    nacc = 0
    nrej = 0
    for i in range(1, n):
        status = K._leg(K.MODE_BAS, 1, 0, ctl.cond_max, flow.k_float,
                        flow.c_re, flow.c_im, y, ts[i - 1], ts[i], h,
                        ctl.rtol, ctl.atol, ctl.max_steps - nacc - nrej,
                        leg_stats)
        h = leg_stats[K.S_H_NEXT]
        nacc += int(leg_stats[K.S_NACC])
        nrej += int(leg_stats[K.S_NREJ])
        max_hat = max(max_hat, leg_stats[K.S_BXI_HAT])
        max_dirdev = max(max_dirdev, leg_stats[K.S_DIR_DEV])
        if status != K.OK:
            raise IntegrationError(_STATUS_MESSAGES.get(status, f"status {status}"),
                                   t_reached=leg_stats[K.S_T_REACHED])
        xs[i] = y[0:3]
        dirs[i] = y[3:6]
        ells[i] = y[6]
        hs[i] = scaled_hamiltonian(flow, y)
        drifts[i] = max_hat

    final = BasState(
        t=float(t_final), x=y[0:3].copy(), xi_dir=y[3:6].copy(),
        log_xi=float(y[6]),
        frame=FiberFrame(b1=y[7:10].copy(), b2=y[10:13].copy(),
                         ledger1=frame0.ledger1, ledger2=frame0.ledger2,
                         reorth_count=frame0.reorth_count),
    )
    return TrajectoryRecord(
        t=ts.copy(), x=xs, xi_dir=dirs, log_xi=ells, H=hs, drift_bxi=drifts,
        final_state=final,
        max_dir_dev=max_dirdev, max_bxi=float(drifts[-1]),
        n_accepted=nacc, n_rejected=nrej,
    )


def jacobian_flow(flow: FourierFlow, x0, t_final: float,
                  controls: IntegratorControls | None = None):
    """Position flow map derivative: returns (J, x_T) with J = d phi_T / d x0."""
    ctl = controls or IntegratorControls()
    y = np.empty(12)
    y[0:3] = np.asarray(x0, dtype=np.float64).reshape(3)
    y[3:12] = np.eye(3).ravel()
    stats = np.empty(K.S_LEN)
    status = K._leg(K.MODE_VAR, 0, 0, ctl.cond_max, flow.k_float, flow.c_re,
                    flow.c_im, y, 0.0, t_final, 0.0, ctl.rtol, ctl.atol,
                    ctl.max_steps, stats)
    if status != K.OK:
        raise IntegrationError(_STATUS_MESSAGES.get(status, f"status {status}"),
                               t_reached=stats[K.S_T_REACHED])
    return y[3:12].reshape(3, 3).copy(), y[0:3].copy()
