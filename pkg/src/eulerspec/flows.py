"""Steady Euler velocity fields on the 3-torus as finite Fourier mode sets.

Every flow is a real, divergence-free trigonometric polynomial with period
2*pi in each coordinate, stored as explicit modes (k, c_k) including the
conjugate partners. Velocity and its Jacobian have closed forms, so they can
be evaluated exactly at arbitrary off-grid points, which is what the
characteristic-system integrator needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class FlowValidationError(ValueError):
    """A flow violates a structural invariant (symmetry, divergence, steadiness)."""


def _as_mode_arrays(kvecs, coefs):
    k = np.asarray(kvecs, dtype=np.int64).reshape(-1, 3)
    c = np.asarray(coefs, dtype=np.complex128).reshape(-1, 3)
    if k.shape[0] != c.shape[0]:
        raise FlowValidationError("wavenumber and coefficient counts differ")
    order = np.lexsort((k[:, 2], k[:, 1], k[:, 0]))
    return k[order], c[order]


@dataclass(eq=False)
class FourierFlow:
    """A steady velocity field u(x) = sum_k c_k exp(i k.x) on the torus.

    Modes are kept sorted by wavenumber and include both k and -k, with
    c_{-k} = conj(c_k), so the field is real. Instances are immutable after
    construction and safe to share between threads.
    """

    name: str
    k: np.ndarray
    c: np.ndarray
    k_float: np.ndarray = field(init=False, repr=False)
    c_re: np.ndarray = field(init=False, repr=False)
    c_im: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.k, self.c = _as_mode_arrays(self.k, self.c)
        kt = [tuple(row) for row in self.k]
        if len(set(kt)) != len(kt):
            raise FlowValidationError(f"flow {self.name!r} has duplicate wavenumbers")
        # contiguous float views consumed by the compiled kernels
        self.k_float = np.ascontiguousarray(self.k, dtype=np.float64)
        self.c_re = np.ascontiguousarray(self.c.real)
        self.c_im = np.ascontiguousarray(self.c.imag)
        for arr in (self.k, self.c, self.k_float, self.c_re, self.c_im):
            arr.setflags(write=False)

    @property
    def modes(self):
        """Mode list as (wavenumber, coefficient) pairs."""
        return [(self.k[m].copy(), self.c[m].copy()) for m in range(self.k.shape[0])]

    @property
    def max_wavenumber(self) -> int:
        if self.k.size == 0:
            return 0
        return int(np.abs(self.k).max())

    def validate(self, tol: float = 1e-12) -> list:
        """Return a list of invariant violations (empty when the flow is well formed)."""
        problems = []
        index = {tuple(self.k[m]): m for m in range(self.k.shape[0])}
        for m in range(self.k.shape[0]):
            kv = tuple(self.k[m])
            neg = tuple(-v for v in kv)
            if neg not in index:
                problems.append(f"mode k={kv} has no conjugate partner -k")
                continue
            mismatch = np.abs(self.c[index[neg]] - np.conj(self.c[m])).max()
            if mismatch > tol * max(1.0, np.abs(self.c[m]).max()):
                problems.append(f"mode k={neg} is not the conjugate of k={kv} (|diff|={mismatch:.3e})")
            div = abs(np.dot(self.k[m], self.c[m]))
            if div > tol:
                problems.append(f"mode k={kv} is not divergence-free (|k.c|={div:.3e})")
        return problems

    def require_valid(self, tol: float = 1e-12):
        problems = self.validate(tol)
        if problems:
            raise FlowValidationError(f"flow {self.name!r}: " + "; ".join(problems))
        return self


@dataclass
class FlowEval:
    """Velocity u and Jacobian grad_u[i, j] = du_i/dx_j at one point."""

    u: np.ndarray
    grad_u: np.ndarray


def make_abc_flow(A: float, B: float, C: float) -> FourierFlow:
    """Arnold-Beltrami-Childress field (A sin x3 + C cos x2, B sin x1 + A cos x3, C sin x2 + B cos x1).

    A Beltrami field (curl u parallel to u), hence an exact steady Euler
    solution; the classical example with exponentially stretching trajectories.
    """
    kvecs, coefs = [], []

    def add(kv, cv):
        kvecs.append(kv)
        coefs.append(cv)
        kvecs.append([-kv[0], -kv[1], -kv[2]])
        coefs.append(np.conj(cv))

    add([1, 0, 0], np.array([0.0, -0.5j * B, 0.5 * B]))
    add([0, 1, 0], np.array([0.5 * C, 0.0, -0.5j * C]))
    add([0, 0, 1], np.array([-0.5j * A, 0.5 * A, 0.0]))
    return FourierFlow(f"abc(A={A},B={B},C={C})", kvecs, coefs)


def make_shear_flow(U) -> FourierFlow:
    """Spatially constant field u = U; the parallel shear profile embedded in 3D."""
    U = np.asarray(U, dtype=np.float64).reshape(3)
    return FourierFlow(f"shear(U=({U[0]},{U[1]},{U[2]}))", [[0, 0, 0]], [U.astype(np.complex128)])


def make_kolmogorov_flow(amplitude: float) -> FourierFlow:
    """Sinusoidal shear u = (amplitude * sin x2, 0, 0), a steady Euler solution."""
    a = float(amplitude)
    return FourierFlow(
        f"kolmogorov(a={a})",
        [[0, 1, 0], [0, -1, 0]],
        [[-0.5j * a, 0.0, 0.0], [0.5j * a, 0.0, 0.0]],
    )


def eval_flow(flow: FourierFlow, x) -> FlowEval:
    """Evaluate u(x) and grad u(x) by closed-form mode summation.

    The imaginary parts cancel analytically for a well-formed flow; they are
    checked against a round-off threshold before being discarded, so a flow
    with a missing conjugate mode is reported instead of silently truncated.
    """
    x = np.asarray(x, dtype=np.float64).reshape(3)
    phase = np.exp(1j * (flow.k_float @ x))
    u_c = phase @ flow.c
    grad_c = np.einsum("m,mi,mj->ij", phase, flow.c, 1j * flow.k_float)
    scale = max(1.0, float(np.abs(flow.c).sum()))
    imag_max = max(np.abs(u_c.imag).max(), np.abs(grad_c.imag).max(initial=0.0))
    if imag_max > 1e-10 * scale:
        raise FlowValidationError(
            f"flow {flow.name!r}: imaginary residue {imag_max:.3e} at x={x}; "
            "a conjugate mode is missing or inconsistent"
        )
    return FlowEval(np.ascontiguousarray(u_c.real), np.ascontiguousarray(grad_c.real))


def _convolve_advection(flow: FourierFlow):
    """Modes of (u.grad)u, exact in coefficient space."""
    out = {}
    M = flow.k.shape[0]
    for p in range(M):
        for q in range(M):
            kk = tuple(flow.k[p] + flow.k[q])
            coef = 1j * np.dot(flow.c[q], flow.k_float[p]) * flow.c[p]
            if kk in out:
                out[kk] = out[kk] + coef
            else:
                out[kk] = coef
    return out


def _grid_max_norm(mode_dict, grid_per_axis):
    """Max euclidean norm of a mode sum sampled on the uniform grid; returns (max, argmax point)."""
    g = np.arange(grid_per_axis) * (TWO_PI / grid_per_axis)
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    if not mode_dict:
        return 0.0, X[0]
    kmat = np.array(list(mode_dict.keys()), dtype=np.float64)
    coefs = np.array(list(mode_dict.values()))
    phase = np.exp(1j * (X @ kmat.T))
    fields = phase @ coefs
    norms = np.abs(fields).sum(axis=1) if fields.ndim == 2 else np.abs(fields)
    worst = int(np.argmax(norms))
    return float(norms[worst]), X[worst]


@dataclass
class SteadyEulerReport:
    """Residuals of the stationary Euler test: curl((u.grad)u) and div u on a grid."""

    flow_name: str
    grid_per_axis: int
    tol: float
    max_curl_residual: float
    max_div_residual: float
    worst_point: np.ndarray
    passed: bool

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} steady-Euler check for {self.flow_name}: "
            f"max |curl((u.grad)u)| = {self.max_curl_residual:.3e}, "
            f"max |div u| = {self.max_div_residual:.3e} "
            f"(tol {self.tol:.1e}, worst point {np.array2string(self.worst_point, precision=4)})"
        )


def check_steady_euler(flow: FourierFlow, grid_per_axis: int | None = None, tol: float = 1e-10) -> SteadyEulerReport:
    """Test that the flow solves the stationary Euler equations.

    The pressure is eliminated: u solves (u.grad)u = -grad p for some p iff
    curl((u.grad)u) = 0, which is checked in exact coefficient space and
    sampled on a uniform grid, together with div u = 0.
    """
    kmax = flow.max_wavenumber
    if grid_per_axis is None:
        grid_per_axis = max(16, 2 * kmax + 1)
    if grid_per_axis < 2 * kmax + 1:
        raise ValueError(f"grid_per_axis={grid_per_axis} is below 2*max_wavenumber+1={2 * kmax + 1}")

    adv = _convolve_advection(flow)
    curl = {}
    for kk, w in adv.items():
        kv = np.array(kk, dtype=np.float64)
        coef = 1j * np.cross(kv, w)
        if np.abs(coef).max(initial=0.0) > 0.0:
            curl[kk] = coef
    max_curl, worst_curl = _grid_max_norm(curl, grid_per_axis)

    div = {}
    for m in range(flow.k.shape[0]):
        d = 1j * np.dot(flow.k_float[m], flow.c[m])
        if d != 0.0:
            div[tuple(flow.k[m])] = d
    max_div, worst_div = _grid_max_norm(div, grid_per_axis)

    worst = worst_curl if max_curl >= max_div else worst_div
    return SteadyEulerReport(
        flow_name=flow.name,
        grid_per_axis=grid_per_axis,
        tol=tol,
        max_curl_residual=max_curl,
        max_div_residual=max_div,
        worst_point=worst,
        passed=(max_curl <= tol and max_div <= tol),
    )


def load_flow_file(path) -> FourierFlow:
    """Load a flow from a JSON mode file, completing missing conjugate modes.

    Expected layout: {"name": str, "modes": [{"k": [k1,k2,k3],
    "re": [r1,r2,r3], "im": [i1,i2,i3]}, ...]}. A mode whose partner -k is
    absent gets the conjugate added automatically; a partner that is present
    but inconsistent is an error.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    name = data.get("name", "user-flow")
    table = {}
    for entry in data["modes"]:
        kv = tuple(int(v) for v in entry["k"])
        if len(kv) != 3:
            raise FlowValidationError(f"flow {name!r}: wavenumber {kv} is not a 3-vector")
        c = np.asarray(entry["re"], dtype=np.float64) + 1j * np.asarray(entry.get("im", [0, 0, 0]), dtype=np.float64)
        if kv in table:
            raise FlowValidationError(f"flow {name!r}: duplicate mode k={kv}")
        table[kv] = c.reshape(3)
    for kv in list(table.keys()):
        neg = tuple(-v for v in kv)
        if neg == kv:
            if np.abs(table[kv].imag).max() > 1e-12:
                raise FlowValidationError(f"flow {name!r}: the k=0 coefficient must be real")
            continue
        if neg in table:
            mismatch = np.abs(table[neg] - np.conj(table[kv])).max()
            if mismatch > 1e-12 * max(1.0, np.abs(table[kv]).max()):
                raise FlowValidationError(
                    f"flow {name!r}: mode k={neg} conflicts with the conjugate of k={kv} (|diff|={mismatch:.3e})"
                )
        else:
            table[neg] = np.conj(table[kv])
    flow = FourierFlow(name, list(table.keys()), list(table.values()))
    return flow.require_valid()


def reduce_point(x) -> np.ndarray:
    """Reduce torus coordinates to [0, 2*pi) for reporting; integration never needs this."""
    return np.mod(np.asarray(x, dtype=np.float64), TWO_PI)
