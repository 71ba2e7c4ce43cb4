"""Spectrum estimation: sample the projected phase space, run the exponent
ledger over every sample, and aggregate extreme growth rates.

The endpoints (mu, M) of the aggregated exponent range determine, for each
time t, an annulus of radii (exp(t*mu), exp(t*M)). Finite horizons and finite
sample sets approximate the true uniform exponents from inside, so the
estimate ships with a checkpoint convergence series and a connectedness
diagnostic instead of a claimed error bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bas import IntegrationError, IntegratorControls, _safe_exp
from .cocycle import ExponentSample, evolve_exponents
from .flows import FourierFlow, FlowValidationError, check_steady_euler, eval_flow

TWO_PI = 2.0 * math.pi
GOLDEN_ANGLE = math.pi * (1.0 + math.sqrt(5.0))

STRATEGIES = ("lattice", "low-discrepancy", "random")
CONSTRAINTS = ("none", "omega_perp")


class EstimateError(RuntimeError):
    """Spectrum estimation could not produce a trustworthy result."""


@dataclass
class SamplePlan:
    """How to draw initial data: how many points, from which stream, and where."""

    count: int = 100
    strategy: str = "random"
    seed: int = 0
    constraint: str = "none"
    horizon: float = 1000.0
    checkpoints: list | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        if self.horizon == 0.0:
            raise ValueError("horizon must be nonzero")


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly uniform unit vectors from the golden-angle spiral."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    th = GOLDEN_ANGLE * i
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def _phi(d: int) -> float:
    # positive root of x**(d+1) = x + 1 by fixed-point iteration
    x = 2.0
    for _ in range(64):
        x = (1.0 + x) ** (1.0 / (d + 1))
    return x


def kronecker_sequence(n: int, dim: int) -> np.ndarray:
    """Low-discrepancy points in [0,1)^dim from the additive recurrence."""
    g = _phi(dim)
    alpha = np.array([g ** -(j + 1) for j in range(dim)])
    i = np.arange(1, n + 1, dtype=np.float64)
    return np.mod(0.5 + np.outer(i, alpha), 1.0)


def _unit_from_square(u: float, v: float) -> np.ndarray:
    """Area-preserving map from the unit square to the sphere."""
    z = 1.0 - 2.0 * u
    r = math.sqrt(max(0.0, 1.0 - z * z))
    th = TWO_PI * v
    return np.array([r * math.cos(th), r * math.sin(th), z])


def _lattice_factors(count: int):
    g = max(1, int(math.floor(count ** 0.25)))
    s = int(math.ceil(count / g ** 3))
    return g, s


def sample_omega(plan: SamplePlan):
    """Initial (position, unit frequency) pairs for an unconstrained plan.

    lattice pairs a uniform corner-aligned grid on the torus with a spiral
    point set on the sphere; low-discrepancy maps a 5-dimensional additive
    recurrence onto torus x sphere; random draws sequentially per sample, so
    the first k points of an n-point plan equal the k-point plan with the
    same seed.
    """
    n = plan.count
    if plan.strategy == "random":
        rng = np.random.default_rng(plan.seed)
        xs = np.empty((n, 3))
        xis = np.empty((n, 3))
        for i in range(n):
            xs[i] = rng.uniform(0.0, TWO_PI, 3)
            v = rng.standard_normal(3)
            while np.linalg.norm(v) < 1e-8:
                v = rng.standard_normal(3)
            xis[i] = v / np.linalg.norm(v)
        return xs, xis
    if plan.strategy == "low-discrepancy":
        pts = kronecker_sequence(n, 5)
        xs = TWO_PI * pts[:, 0:3]
        xis = np.stack([_unit_from_square(pts[i, 3], pts[i, 4]) for i in range(n)])
        return xs, xis
    g, s = _lattice_factors(n)
    axis = TWO_PI * np.arange(g) / g
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    dirs = fibonacci_sphere(s)
    xs = np.repeat(grid, s, axis=0)[:n]
    xis = np.tile(dirs, (g ** 3, 1))[:n]
    return xs, xis


def find_stagnation_points(flow: FourierFlow, n_seeds: int = 64,
                           tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Zeros of the velocity field by damped Newton from a deterministic seed grid."""
    g = max(2, round(n_seeds ** (1.0 / 3.0)))
    axis = TWO_PI * (np.arange(g) + 0.5) / g
    seeds = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    found = []
    for x0 in seeds:
        x = x0.copy()
        ok = False
        for _ in range(max_iter):
            ev = eval_flow(flow, x)
            r = np.linalg.norm(ev.u)
            if r <= tol:
                ok = True
                break
            try:
                step = np.linalg.solve(ev.grad_u, -ev.u)
            except np.linalg.LinAlgError:
                break
            scale = 1.0
            for _ in range(30):
                xn = x + scale * step
                if np.linalg.norm(eval_flow(flow, xn).u) < r:
                    break
                scale *= 0.5
            else:
                break
            x = xn
        if not ok:
            continue
        x = np.mod(x, TWO_PI)
        if not any(
            np.linalg.norm((x - p + math.pi) % TWO_PI - math.pi) < 1e-6 for p in found
        ):
            found.append(x)
    if not found:
        return np.empty((0, 3))
    out = np.stack(found)
    return out[np.lexsort((out[:, 2], out[:, 1], out[:, 0]))]


STAGNATION_SPEED = 1e-12


def _great_circle_basis(uh: np.ndarray):
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(uh)))] = 1.0
    w1 = np.cross(axis, uh)
    w1 /= np.linalg.norm(w1)
    w2 = np.cross(uh, w1)
    w2 /= np.linalg.norm(w2)
    return w1, w2


def sample_omega_perp(flow: FourierFlow, plan: SamplePlan):
    """Initial pairs restricted to the invariant zero-Hamiltonian set u(x).xi = 0.

    At each sampled position the frequency is drawn from the great circle
    orthogonal to the velocity; where the velocity vanishes (within 1e-12)
    the whole sphere is admissible and a spiral direction is used instead.
    """
    n = plan.count
    if plan.strategy == "random":
        rng = np.random.default_rng(plan.seed)
        xs = np.empty((n, 3))
        angles = np.empty(n)
        spare = np.empty((n, 3))
        for i in range(n):
            xs[i] = rng.uniform(0.0, TWO_PI, 3)
            angles[i] = rng.uniform(0.0, TWO_PI)
            v = rng.standard_normal(3)
            while np.linalg.norm(v) < 1e-8:
                v = rng.standard_normal(3)
            spare[i] = v / np.linalg.norm(v)
    elif plan.strategy == "low-discrepancy":
        pts = kronecker_sequence(n, 4)
        xs = TWO_PI * pts[:, 0:3]
        angles = TWO_PI * pts[:, 3]
        spare = fibonacci_sphere(n)
    else:
        g, s = _lattice_factors(n)
        axis = TWO_PI * np.arange(g) / g
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        xs = np.repeat(grid, s, axis=0)[:n]
        angles = np.mod(GOLDEN_ANGLE * np.arange(n), TWO_PI)
        spare = fibonacci_sphere(n)

    xis = np.empty((n, 3))
    for i in range(n):
        u = eval_flow(flow, xs[i]).u
        speed = np.linalg.norm(u)
        if speed <= STAGNATION_SPEED:
            xis[i] = spare[i]
            continue
        w1, w2 = _great_circle_basis(u / speed)
        xis[i] = math.cos(angles[i]) * w1 + math.sin(angles[i]) * w2
    return xs, xis


def sample_stagnation_slices(flow: FourierFlow, n_directions: int = 32,
                             n_seeds: int = 64):
    """Full-sphere sampling over every located stagnation point.

    The zero-Hamiltonian set contains the whole frequency sphere above each
    zero of the velocity; this dedicated mode enumerates those slices, which
    a generic position sample would almost surely miss.
    """
    points = find_stagnation_points(flow, n_seeds=n_seeds)
    if points.shape[0] == 0:
        return np.empty((0, 3)), np.empty((0, 3))
    dirs = fibonacci_sphere(n_directions)
    xs = np.repeat(points, n_directions, axis=0)
    xis = np.tile(dirs, (points.shape[0], 1))
    return xs, xis


@dataclass
class GapReport:
    """Union structure of the inflated per-sample exponent intervals."""

    resolution: float
    n_intervals: int
    components: list
    gaps: list
    largest_gap: float
    connected: bool

    def summary(self) -> str:
        verdict = "PASS" if self.connected else "FAIL"
        comps = ", ".join(f"[{lo:.4f}, {hi:.4f}]" for lo, hi in self.components)
        msg = f"{verdict} connectedness at resolution {self.resolution:.4g}: {comps}"
        if self.gaps:
            gaps = ", ".join(f"({lo:.4f}, {hi:.4f})" for lo, hi in self.gaps)
            msg += f"; interior gaps: {gaps}"
        return msg


def _merge_intervals(intervals, resolution: float) -> GapReport:
    arr = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("no intervals to merge")
    if np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError("intervals must satisfy lo <= hi")
    inflated = np.stack([arr[:, 0] - resolution, arr[:, 1] + resolution], axis=1)
    order = np.argsort(inflated[:, 0], kind="stable")
    comps = []
    gaps = []
    lo, hi = inflated[order[0]]
    for idx in order[1:]:
        a, b = inflated[idx]
        if a <= hi:
            hi = max(hi, b)
        else:
            comps.append((float(lo), float(hi)))
            gaps.append((float(hi), float(a)))
            lo, hi = a, b
    comps.append((float(lo), float(hi)))
    largest = max((b - a for a, b in gaps), default=0.0)
    return GapReport(
        resolution=float(resolution),
        n_intervals=int(arr.shape[0]),
        components=comps,
        gaps=gaps,
        largest_gap=float(largest),
        connected=(len(comps) == 1),
    )


def default_gap_resolution(horizon: float) -> float:
    """Finite-horizon exponent uncertainty scale, 2/sqrt(|T|)."""
    return 2.0 / math.sqrt(abs(horizon))


@dataclass
class AnnulusReport:
    """Radii of the annulus {exp(t*mu) <= |z| <= exp(t*M)} at one time t."""

    t: float
    mu: float
    M: float
    r_inner: float
    r_outer: float


@dataclass
class SpectrumEstimate:
    """Aggregated exponent range with per-sample evidence attached.

    mu_hat/M_hat are the extreme per-sample exponents; interval_cover holds
    the raw per-sample [lambda2, lambda1] intervals sorted by lower endpoint;
    convergence carries (T, mu_hat(T), M_hat(T)) across the checkpoint
    horizons.
    """

    flow_name: str
    plan: SamplePlan
    mu_hat: float
    M_hat: float
    samples: list = field(repr=False)
    interval_cover: np.ndarray = field(repr=False)
    convergence: list
    gap_report: GapReport
    n_failed: int
    max_drift_H: float
    max_drift_bxi: float

    def annulus(self, t: float) -> AnnulusReport:
        return annulus(self, t)


def connectedness_diagnostic(source, resolution: float) -> GapReport:
    """Merge per-sample exponent intervals inflated by +-resolution.

    source is either a SpectrumEstimate (its interval cover is used) or a
    raw (n, 2) array of [lo, hi] intervals, which makes synthetic negative
    controls expressible directly. The estimate supports a single connected
    exponent range only if the inflated intervals merge into one component;
    the report carries every interior gap and the largest gap width (0 on
    PASS).
    """
    if isinstance(source, SpectrumEstimate):
        intervals = source.interval_cover
    else:
        intervals = source
    return _merge_intervals(intervals, resolution)


def annulus(estimate_or_mu, t_or_m, t: float | None = None) -> AnnulusReport:
    """Annulus radii at time t: {exp(t*mu) <= |z| <= exp(t*M)} for t >= 0.

    Call as annulus(estimate, t) or annulus(mu, M, t). Negative t exchanges
    which exponent bounds which radius, so the report always satisfies
    r_inner <= r_outer.
    """
    if isinstance(estimate_or_mu, SpectrumEstimate):
        mu, M, tt = estimate_or_mu.mu_hat, estimate_or_mu.M_hat, float(t_or_m)
    else:
        if t is None:
            raise TypeError("annulus(mu, M, t) requires three arguments")
        mu, M, tt = float(estimate_or_mu), float(t_or_m), float(t)
    lo, hi = _safe_exp(tt * mu), _safe_exp(tt * M)
    if lo > hi:
        lo, hi = hi, lo
    return AnnulusReport(t=tt, mu=mu, M=M, r_inner=lo, r_outer=hi)


def estimate_spectrum(flow: FourierFlow, plan: SamplePlan,
                      controls: IntegratorControls | None = None,
                      frame_seed: int = 0,
                      workers: int | None = None,
                      steady_tol: float = 1e-10) -> SpectrumEstimate:
    """Estimate the exponent range [mu, M] of the amplitude transport.

    mu_hat is the smallest and M_hat the largest per-sample exponent over the
    plan's initial data. The flow must pass the stationarity check first.
    Individual trajectory failures are excluded and counted; more than 10%
    failures abort the estimate. Aggregation follows the deterministic sample
    order regardless of completion order, so reports are reproducible.
    """
    report = check_steady_euler(flow, tol=steady_tol)
    if not report.passed:
        raise FlowValidationError(report.summary())
    ctl = controls or IntegratorControls()
    if plan.constraint == "omega_perp":
        xs, xis = sample_omega_perp(flow, plan)
    else:
        xs, xis = sample_omega(plan)

    def run(i: int):
        try:
            return evolve_exponents(flow, xs[i], xis[i], plan.horizon,
                                    controls=ctl, seed=frame_seed,
                                    checkpoints=plan.checkpoints)
        except IntegrationError as exc:
            return exc

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(plan.count)))
    else:
        results = [run(i) for i in range(plan.count)]

    samples = [r for r in results if isinstance(r, ExponentSample)]
    failures = [r for r in results if not isinstance(r, ExponentSample)]
    if len(failures) * 10 > plan.count:
        raise EstimateError(
            f"{len(failures)} of {plan.count} trajectories failed; first: {failures[0]}"
        )
    if not samples:
        raise EstimateError("no trajectory produced an exponent sample")

    lam1 = np.array([s.lambda1 for s in samples])
    lam2 = np.array([s.lambda2 for s in samples])
    cover = np.stack([lam2, lam1], axis=1)
    cover = cover[np.argsort(cover[:, 0], kind="stable")]
    mu_hat = float(lam2.min())
    m_hat = float(lam1.max())

    cps = samples[0].checkpoint_t
    convergence = []
    for k in range(len(cps)):
        his = [s.checkpoint_lambda1[k] for s in samples]
        los = [s.checkpoint_lambda2[k] for s in samples]
        convergence.append({
            "T": float(cps[k]),
            "mu_hat": float(min(los)),
            "M_hat": float(max(his)),
        })

    gap = _merge_intervals(cover, default_gap_resolution(plan.horizon))
    return SpectrumEstimate(
        flow_name=flow.name,
        plan=plan,
        mu_hat=mu_hat,
        M_hat=m_hat,
        samples=samples,
        interval_cover=cover,
        convergence=convergence,
        gap_report=gap,
        n_failed=len(failures),
        max_drift_H=float(max(s.drift_H for s in samples)),
        max_drift_bxi=float(max(s.drift_bxi for s in samples)),
    )
