"""Built-in falsifiers: closed-form oracles and drift audits.

Everything here is shipped in the artifact (not test-only code) so any run
can be cross-examined: trajectory audits measure how well the exactly
conserved quantities survived integration, the oracles pin specific flows to
hand-derived solutions, and the step-halving study measures whether exponent
estimates move when the integrator is pushed harder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bas import FiberFrame, IntegratorControls, integrate_bas, jacobian_flow
from .cocycle import evolve_exponents
from .flows import FourierFlow


@dataclass
class DriftReport:
    """How far one trajectory strayed from its exactly conserved structure."""

    max_H_drift: float
    max_bxi_drift: float
    det_jacobian_err: float
    xi_consistency_angle: float
    group_roundtrip_err: float

    def as_dict(self) -> dict:
        return {
            "max_H_drift": self.max_H_drift,
            "max_bxi_drift": self.max_bxi_drift,
            "det_jacobian_err": self.det_jacobian_err,
            "xi_consistency_angle": self.xi_consistency_angle,
            "group_roundtrip_err": self.group_roundtrip_err,
        }

    def worst(self) -> float:
        return max(self.as_dict().values())


def audit_trajectory(flow: FourierFlow, x0, xi0, frame0: FiberFrame, t_final: float,
                     controls: IntegratorControls | None = None) -> DriftReport:
    """Run every cross-check available for a single trajectory.

    Hamiltonian and amplitude-orthogonality drift come from the transport
    itself; the velocity-Jacobian run supplies the volume error and an
    independent prediction of the frequency direction: the frequency is
    carried by the inverse-transpose Jacobian, so the integrated direction
    must align with solve(J^T, xi0). The group test transports the final
    state backward and compares against the initial data componentwise.
    """
    ctl = controls or IntegratorControls()
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)

    rec = integrate_bas(flow, x0, xi0, frame0, t_final, ctl)
    jac, _ = jacobian_flow(flow, x0, t_final, ctl)
    det_err = abs(float(np.linalg.det(jac)) - 1.0)

    predicted = np.linalg.solve(jac.T, xi0)
    pn = np.linalg.norm(predicted)
    dirn = rec.final_state.xi_dir
    cosang = float(np.clip((predicted / pn) @ dirn, -1.0, 1.0))
    angle = math.acos(cosang)

    back = integrate_bas(flow, rec.final_state.x,
                         rec.final_state.xi, rec.final_state.frame,
                         -t_final, ctl)
    nxi0 = np.linalg.norm(xi0)
    roundtrip = max(
        float(np.max(np.abs(back.final_state.x - x0))),
        float(np.max(np.abs(back.final_state.xi_dir - xi0 / nxi0))),
        abs(back.final_state.log_xi - math.log(nxi0)),
        float(np.max(np.abs(back.final_state.frame.b1 - frame0.b1))),
        float(np.max(np.abs(back.final_state.frame.b2 - frame0.b2))),
    )
    return DriftReport(
        max_H_drift=rec.max_H_drift,
        max_bxi_drift=rec.max_bxi,
        det_jacobian_err=det_err,
        xi_consistency_angle=angle,
        group_roundtrip_err=roundtrip,
    )


@dataclass
class OracleState:
    """Closed-form endpoint of a trajectory: position, frequency, amplitude."""

    x: np.ndarray
    xi: np.ndarray
    b: np.ndarray | None


def shear_oracle(U, x0, xi0, t_final: float, b0=None) -> OracleState:
    """Exact transport for a constant velocity field.

    The velocity gradient vanishes identically, so the position translates
    uniformly while frequency and amplitude stay frozen.
    """
    U = np.asarray(U, dtype=np.float64).reshape(3)
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    b = None if b0 is None else np.asarray(b0, dtype=np.float64).reshape(3).copy()
    return OracleState(x=x0 + t_final * U, xi=xi0.copy(), b=b)


def kolmogorov_oracle(amplitude: float, x0, xi0, b0, t_final: float) -> OracleState:
    """Exact transport for the sinusoidal shear u = (a sin x2, 0, 0).

    Along a trajectory x2 is frozen, so the only gradient entry is the
    constant G[0][1] = g = a cos(x2). Writing xi = (xi1, q, xi3) and
    m = xi1^2 + xi3^2:

        x(t)  = x0 + t (a sin x2, 0, 0)
        q(t)  = q0 - t g xi1                    (xi1, xi3 frozen)
        b2(t) = b2_0 (m + q0^2) / (m + q^2)     (b2 |xi|^2 is conserved)
        b3(t) = b3_0 - 2 xi3 b2_0 (m + q0^2) (F(q) - F(q0)),
                F(q) = q / (2m (m + q^2)) + atan(q / sqrt(m)) / (2 m^(3/2))
        b1(t) from the conserved inner product b.xi = b0.xi0.

    F integrates 1/(m + q^2)^2, which is d(b3)/dq after substituting
    q as the time variable. For xi1 = 0 the frequency is frozen and the
    amplitude equation collapses to b1' = -g b2 with b2, b3 constant.
    """
    a = float(amplitude)
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    b0 = np.asarray(b0, dtype=np.float64).reshape(3)
    g = a * math.cos(x0[1])
    x_t = x0 + t_final * np.array([a * math.sin(x0[1]), 0.0, 0.0])

    xi1, q0, xi3 = xi0
    if xi1 == 0.0:
        b_t = np.array([b0[0] - g * t_final * b0[1], b0[1], b0[2]])
        return OracleState(x=x_t, xi=xi0.copy(), b=b_t)

    m = xi1 * xi1 + xi3 * xi3
    q = q0 - t_final * g * xi1
    xi_t = np.array([xi1, q, xi3])

    def F(qq: float) -> float:
        sm = math.sqrt(m)
        return qq / (2.0 * m * (m + qq * qq)) + math.atan(qq / sm) / (2.0 * m * sm)

    b2 = b0[1] * (m + q0 * q0) / (m + q * q)
    b3 = b0[2] - 2.0 * xi3 * b0[1] * (m + q0 * q0) * (F(q) - F(q0))
    h0 = float(b0 @ xi0)
    b1 = (h0 - b2 * q - b3 * xi3) / xi1
    return OracleState(x=x_t, xi=xi_t, b=np.array([b1, b2, b3]))


def _shear_velocity(flow: FourierFlow):
    """The constant velocity if the flow is a pure k=0 mode, else None."""
    if flow.k.shape[0] == 1 and not flow.k.any():
        return flow.c[0].real.copy()
    return None


def _kolmogorov_amplitude(flow: FourierFlow):
    """The amplitude a if the flow is exactly (a sin x2, 0, 0), else None."""
    if flow.k.shape[0] != 2:
        return None
    idx = {tuple(flow.k[m]): flow.c[m] for m in range(2)}
    if set(idx) != {(0, 1, 0), (0, -1, 0)}:
        return None
    c = idx[(0, 1, 0)]
    if c[1] != 0 or c[2] != 0 or c[0].real != 0:
        return None
    return -2.0 * c[0].imag


def oracle_comparison(flow: FourierFlow, x0, xi0, b0, t_final: float,
                      controls: IntegratorControls | None = None):
    """Max deviation between the integrator and a closed-form oracle.

    Returns None when no oracle covers the flow. Positions are compared
    modulo the torus period; the amplitude b0 rides as the first frame
    vector.
    """
    U = _shear_velocity(flow)
    a = None if U is not None else _kolmogorov_amplitude(flow)
    if U is None and a is None:
        return None
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)
    xi0 = np.asarray(xi0, dtype=np.float64).reshape(3)
    b0 = np.asarray(b0, dtype=np.float64).reshape(3)
    if U is not None:
        exact = shear_oracle(U, x0, xi0, t_final, b0=b0)
    else:
        exact = kolmogorov_oracle(a, x0, xi0, b0, t_final)

    xh = xi0 / np.linalg.norm(xi0)
    b2 = np.cross(xh, b0)
    nb2 = np.linalg.norm(b2)
    if nb2 < 1e-12:
        raise ValueError("b0 must not be parallel to xi0")
    frame = FiberFrame(b1=b0, b2=b2 / nb2)
    rec = integrate_bas(flow, x0, xi0, frame, t_final, controls)
    fin = rec.final_state

    period = 2.0 * math.pi
    dx = np.abs(fin.x - exact.x)
    dx = np.minimum(np.mod(dx, period), period - np.mod(dx, period))
    xi_num = fin.xi
    db = np.abs(fin.frame.b1 - exact.b)
    return max(float(dx.max()), float(np.max(np.abs(xi_num - exact.xi))),
               float(db.max()))


@dataclass
class StepHalvingStudy:
    """Exponent movement under tightening integrator tolerances.

    tolerances are sorted loosest-first; diffs[i] is the largest exponent
    change between rows i and i+1. The study passes when successive
    differences do not grow, except that differences at or below the
    round-off floor count as converged — once the estimates agree to the
    floor, their ordering is noise, not signal.
    """

    tolerances: list
    lambda1: list
    lambda2: list
    diffs: list
    floor: float
    passed: bool

    def rows(self):
        for i, tol in enumerate(self.tolerances):
            yield (tol, self.lambda1[i], self.lambda2[i])


def step_halving_study(flow: FourierFlow, x0, xi0, t_final: float,
                       tolerances, seed: int = 0,
                       controls: IntegratorControls | None = None,
                       floor: float = 1e-10) -> StepHalvingStudy:
    """Re-run the exponent ledger at each tolerance and compare."""
    tols = sorted((float(t) for t in tolerances), reverse=True)
    if len(tols) < 2:
        raise ValueError("need at least two tolerance levels")
    base = controls or IntegratorControls()
    l1, l2 = [], []
    for tol in tols:
        ctl = IntegratorControls(rtol=tol, atol=tol * 1e-2,
                                 reorth_interval=base.reorth_interval,
                                 cond_max=base.cond_max, max_steps=base.max_steps)
        s = evolve_exponents(flow, x0, xi0, t_final, controls=ctl, seed=seed)
        l1.append(s.lambda1)
        l2.append(s.lambda2)
    diffs = [
        max(abs(l1[i + 1] - l1[i]), abs(l2[i + 1] - l2[i]))
        for i in range(len(tols) - 1)
    ]
    passed = all(diffs[i + 1] <= max(diffs[i], floor)
                 for i in range(len(diffs) - 1))
    return StepHalvingStudy(tolerances=tols, lambda1=l1, lambda2=l2,
                            diffs=diffs, floor=floor, passed=passed)
