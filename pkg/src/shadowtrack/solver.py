"""Trajectory smoothing by penalized piecewise-constant-acceleration fits.

Given timestamped observations with per-sample weights (inverse error
variances), the smoother finds positions p, velocities v and per-interval
accelerations a that trade weighted fidelity to the observations against
the summed squared acceleration, with trade-off weight eta. Eliminating
the dual variables of the stationarity conditions leaves one small linear
system in the positions alone:

    (a_bar @ diag(w) + eta * b_bar) p = a_bar @ diag(w) @ obs

with the blocks from the matrices module. The system has one more
unknown than equations; the missing degree of freedom is the initial
velocity, which long windows render unimportant. We compute the full
solution family from an SVD and return the member minimizing the
weighted squared residual to the observations, which keeps noiseless
affine data exact, reproduces the weighted line fit as eta grows, and
ignores values carried by zero-weight placeholder slots.

A dense solver for the complete stationarity system (positions,
velocities, accelerations and both dual sequences) is included as an
oracle for tests and diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BracketDoesNotStraddle,
    DataError,
    DegenerateWeights,
    IndefiniteInformation,
    MaxIterations,
    NonPositiveEta,
    NonSymmetricInformation,
    ShapeMismatch,
    SingularSystem,
    TimeOutOfRange,
    UsageError,
)
from .matrices import FilterMatrices, TimeGrid, _frozen, build_filter_matrices, expand_block

__all__ = [
    "ScalarObservationSeries",
    "VectorObservationSeries",
    "ShadowingTrajectory",
    "OracleSolution",
    "EtaSearchResult",
    "solve_scalar",
    "solve_scalar_multi",
    "solve_vector",
    "recover_accelerations",
    "rms_acceleration",
    "search_eta",
    "evaluate_spline",
    "evaluate_spline_velocity",
    "solve_kkt_oracle",
    "oracle_residuals",
]

# Singular values below this fraction of the largest are treated as zero,
# guarding against rank collapse from zero-weight placeholder rows.
SVD_CUTOFF = 1e-12

MIN_EFFECTIVE_SAMPLES = 3


def _require_positive_eta(eta: float) -> float:
    eta = float(eta)
    if not np.isfinite(eta) or eta <= 0.0:
        raise NonPositiveEta(f"eta must be a positive finite number, got {eta!r}")
    return eta


@dataclass(frozen=True)
class ScalarObservationSeries:
    """One-dimensional observations with per-sample weights.

    Weights are inverse error variances; a weight of zero marks a
    placeholder slot whose value is ignored by the fit but whose time
    stays in the grid.
    """

    grid: TimeGrid
    values: np.ndarray   # (n+1,)
    weights: np.ndarray  # (n+1,), >= 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        m = self.grid.times.shape[0]
        if values.shape != (m,):
            raise ShapeMismatch(f"values shape {values.shape} does not match grid of {m} samples")
        if weights.shape != (m,):
            raise ShapeMismatch(f"weights shape {weights.shape} does not match grid of {m} samples")
        if not np.all(np.isfinite(values)):
            raise DataError("observation values must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
            raise DegenerateWeights("weights must be finite and non-negative")
        if int(np.count_nonzero(weights > 0.0)) < MIN_EFFECTIVE_SAMPLES:
            raise DegenerateWeights(
                f"need at least {MIN_EFFECTIVE_SAMPLES} positive weights, "
                f"got {int(np.count_nonzero(weights > 0.0))}"
            )
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "weights", _frozen(weights))


@dataclass(frozen=True)
class VectorObservationSeries:
    """d-dimensional observations with per-sample information matrices.

    Information matrices are inverses of the observation error
    covariances; they must be symmetric and positive semidefinite. A zero
    matrix marks a placeholder slot.
    """

    grid: TimeGrid
    values: np.ndarray        # (n+1, d)
    informations: np.ndarray  # (n+1, d, d)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        infos = np.asarray(self.informations, dtype=float)
        m = self.grid.times.shape[0]
        if values.ndim != 2 or values.shape[0] != m or values.shape[1] < 1:
            raise ShapeMismatch(
                f"values must have shape ({m}, d), got {values.shape}"
            )
        d = values.shape[1]
        if infos.shape != (m, d, d):
            raise ShapeMismatch(
                f"informations must have shape ({m}, {d}, {d}), got {infos.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("observation values must be finite")
        if not np.all(np.isfinite(infos)):
            raise DataError("information matrices must be finite")
        scale = np.abs(infos).max(axis=(1, 2))
        skew = np.abs(infos - np.transpose(infos, (0, 2, 1))).max(axis=(1, 2))
        bad = np.nonzero(skew > 1e-12 * (1.0 + scale))[0]
        if bad.size:
            raise NonSymmetricInformation(
                f"information matrix at sample {int(bad[0])} is not symmetric "
                f"(max asymmetry {skew[bad[0]]:.3e})"
            )
        sym = 0.5 * (infos + np.transpose(infos, (0, 2, 1)))
        eigs = np.linalg.eigvalsh(sym)
        low = eigs.min(axis=1)
        bad = np.nonzero(low < -1e-12 * (1.0 + scale))[0]
        if bad.size:
            raise IndefiniteInformation(
                f"information matrix at sample {int(bad[0])} has eigenvalue "
                f"{low[bad[0]]:.3e}"
            )
        usable = int(np.count_nonzero(np.trace(sym, axis1=1, axis2=2) > 0.0))
        if usable < MIN_EFFECTIVE_SAMPLES:
            raise DegenerateWeights(
                f"need at least {MIN_EFFECTIVE_SAMPLES} samples with nonzero "
                f"information, got {usable}"
            )
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "informations", _frozen(sym))

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ShadowingTrajectory:
    """Solved trajectory: positions at the samples, one acceleration per gap.

    Velocities satisfy the interval dynamics exactly by construction:
    p_{i+1} = p_i + v_i tau_i + a_i tau_i^2 / 2. Scalar fits store
    one-dimensional arrays, planar fits store (n+1, d) and (n, d).
    """

    grid: TimeGrid
    eta: float
    positions: np.ndarray      # (n+1,) or (n+1, d)
    velocities: np.ndarray     # (n+1,) or (n+1, d)
    accelerations: np.ndarray  # (n,) or (n, d)
    time_reversed: bool
    residual_norm: float       # Frobenius norm of the linear-system residual
    rank: int                  # numerical rank of the system matrix

    @property
    def dim(self) -> int:
        return 1 if self.positions.ndim == 1 else self.positions.shape[1]


@dataclass(frozen=True)
class OracleSolution:
    """Exact stationary point of the penalized fit, duals included.

    Solved as one dense square system, so it carries no elimination
    approximation; used to validate the production solver.
    """

    grid: TimeGrid
    eta: float
    positions: np.ndarray      # (n+1,)
    velocities: np.ndarray     # (n+1,)
    accelerations: np.ndarray  # (n,)
    lambdas: np.ndarray        # (n,)  duals of the position updates
    mus: np.ndarray            # (n,)  duals of the velocity updates


@dataclass(frozen=True)
class EtaSearchResult:
    """Outcome of searching eta for a target RMS acceleration."""

    eta: float
    xi: float
    iterations: int
    bracket: tuple[float, float]
    trace: tuple[tuple[float, float], ...]  # (eta, xi) in evaluation order


def _min_weighted_residual_solve(C, rhs, targets, metric):
    """Solve C p = rhs, picking the family member closest to ``targets``.

    The SVD provides the particular solution on the row space plus a
    basis for the null space (including directions truncated as
    numerically null); the free coefficients are chosen to minimize the
    metric-weighted squared residual (targets - p)' W (targets - p).
    ``metric`` is either the diagonal of W as a vector or a full PSD
    matrix.
    """
    U, s, Vt = np.linalg.svd(C, full_matrices=True)
    if s[0] <= 0.0:
        raise SingularSystem("system matrix is identically zero")
    rank = int(np.sum(s > SVD_CUTOFF * s[0]))
    y = U.T @ rhs
    if rhs.ndim == 1:
        coeff = y[:rank] / s[:rank]
    else:
        coeff = y[:rank] / s[:rank, None]
    p = Vt[:rank].T @ coeff
    null_basis = Vt[rank:].T
    if null_basis.shape[1]:
        residual = targets - p
        if metric.ndim == 1:
            weighted_basis = metric[:, None] * null_basis
            weighted_residual = metric[:, None] * residual if residual.ndim == 2 \
                else metric * residual
        else:
            weighted_basis = metric @ null_basis
            weighted_residual = metric @ residual
        gram = null_basis.T @ weighted_basis
        beta = null_basis.T @ weighted_residual
        alpha = np.linalg.lstsq(gram, beta, rcond=None)[0]
        p = p + null_basis @ alpha
    resid = float(np.linalg.norm(C @ p - rhs))
    return p, rank, resid


def _velocities_from(positions, accelerations, taus):
    """Velocities making each interval's quadratic hit both endpoints."""
    tt = taus if positions.ndim == 1 else taus[:, None]
    head = np.diff(positions, axis=0) / tt - 0.5 * accelerations * tt
    last = head[-1] + accelerations[-1] * tt[-1]
    return np.concatenate([head, last[None, ...]], axis=0)


def solve_scalar(obs: ScalarObservationSeries, eta: float,
                 time_reversed: bool = True) -> ShadowingTrajectory:
    """Fit a scalar trajectory to weighted observations at one eta.

    The default time-reversed assembly concentrates the scheme's
    approximation error at the oldest samples, so the newest positions
    and velocities are the most trustworthy.
    """
    eta = _require_positive_eta(eta)
    fm = build_filter_matrices(obs.grid, time_reversed=time_reversed)
    w = obs.weights
    C = fm.a_bar * w[None, :] + eta * fm.b_bar
    rhs = fm.a_bar @ (w * obs.values)
    p, rank, resid = _min_weighted_residual_solve(C, rhs, obs.values, w)
    a = fm.accel_core @ (w * (obs.values - p)) / (2.0 * eta)
    v = _velocities_from(p, a, obs.grid.taus)
    return ShadowingTrajectory(
        grid=obs.grid, eta=eta, positions=_frozen(p), velocities=_frozen(v),
        accelerations=_frozen(a), time_reversed=time_reversed,
        residual_norm=resid, rank=rank,
    )


def solve_scalar_multi(grid: TimeGrid, weights, values, eta: float,
                       time_reversed: bool = True) -> tuple[ShadowingTrajectory, ...]:
    """Fit several scalar components sharing one grid and weight profile.

    The system matrix depends only on the grid, the weights and eta, so
    a single factorization serves every column of ``values``; the result
    matches independent per-component fits.
    """
    eta = _require_positive_eta(eta)
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    m = grid.times.shape[0]
    if values.ndim != 2 or values.shape[0] != m or values.shape[1] < 1:
        raise ShapeMismatch(f"values must have shape ({m}, d), got {values.shape}")
    # Reuse the scalar series validation for the shared weight profile.
    probe = ScalarObservationSeries(grid=grid, values=values[:, 0], weights=weights)
    if not np.all(np.isfinite(values)):
        raise DataError("observation values must be finite")
    w = probe.weights
    fm = build_filter_matrices(grid, time_reversed=time_reversed)
    C = fm.a_bar * w[None, :] + eta * fm.b_bar
    rhs = fm.a_bar @ (w[:, None] * values)
    p, rank, _ = _min_weighted_residual_solve(C, rhs, values, w)
    a = fm.accel_core @ (w[:, None] * (values - p)) / (2.0 * eta)
    per_column_resid = np.linalg.norm(C @ p - rhs, axis=0)
    out = []
    for k in range(values.shape[1]):
        v = _velocities_from(p[:, k], a[:, k], grid.taus)
        out.append(ShadowingTrajectory(
            grid=grid, eta=eta, positions=_frozen(p[:, k]),
            velocities=_frozen(v), accelerations=_frozen(a[:, k]),
            time_reversed=time_reversed,
            residual_norm=float(per_column_resid[k]), rank=rank,
        ))
    return tuple(out)


def _block_diag_informations(infos: np.ndarray) -> np.ndarray:
    m, d, _ = infos.shape
    W = np.zeros((m * d, m * d))
    for i in range(m):
        W[i * d:(i + 1) * d, i * d:(i + 1) * d] = infos[i]
    return W


def solve_vector(obs: VectorObservationSeries, eta: float,
                 time_reversed: bool = True) -> ShadowingTrajectory:
    """Fit a d-dimensional trajectory with general information matrices.

    Positions are stacked sample-major and every system block is
    expanded so each scalar coupling acts identically on all components;
    the appended constraint rows enforce a zero information-weighted
    residual sum per component. With diagonal informations the problem
    decouples and matches per-component scalar fits.
    """
    eta = _require_positive_eta(eta)
    d = obs.dim
    fm = build_filter_matrices(obs.grid, time_reversed=time_reversed)
    W = _block_diag_informations(obs.informations)
    a_hat = expand_block(fm.a_bar, d)
    b_hat = expand_block(fm.b_bar, d)
    stacked = obs.values.reshape(-1)
    C = a_hat @ W + eta * b_hat
    rhs = a_hat @ (W @ stacked)
    p_st, rank, resid = _min_weighted_residual_solve(C, rhs, stacked, W)
    core = expand_block(fm.accel_core, d)
    a_st = core @ (W @ (stacked - p_st)) / (2.0 * eta)
    p = p_st.reshape(-1, d)
    a = a_st.reshape(-1, d)
    v = _velocities_from(p, a, obs.grid.taus)
    return ShadowingTrajectory(
        grid=obs.grid, eta=eta, positions=_frozen(p), velocities=_frozen(v),
        accelerations=_frozen(a), time_reversed=time_reversed,
        residual_norm=resid, rank=rank,
    )


def recover_accelerations(positions, obs, eta: float, fm: FilterMatrices):
    """Per-interval accelerations implied by solved positions.

    Applies the acceleration-recovery core (with the same reversal
    bookkeeping as ``fm``) to the weighted residuals and divides out the
    doubled penalty weight.
    """
    eta = _require_positive_eta(eta)
    positions = np.asarray(positions, dtype=float)
    if isinstance(obs, ScalarObservationSeries):
        if positions.shape != obs.values.shape:
            raise ShapeMismatch(
                f"positions shape {positions.shape} does not match observations "
                f"{obs.values.shape}"
            )
        return fm.accel_core @ (obs.weights * (obs.values - positions)) / (2.0 * eta)
    if isinstance(obs, VectorObservationSeries):
        if positions.shape != obs.values.shape:
            raise ShapeMismatch(
                f"positions shape {positions.shape} does not match observations "
                f"{obs.values.shape}"
            )
        d = obs.dim
        W = _block_diag_informations(obs.informations)
        core = expand_block(fm.accel_core, d)
        resid = (obs.values - positions).reshape(-1)
        return (core @ (W @ resid) / (2.0 * eta)).reshape(-1, d)
    raise UsageError(f"unsupported observation container {type(obs).__name__}")


def rms_acceleration(traj: ShadowingTrajectory) -> float:
    """Gap-weighted RMS acceleration magnitude over the window."""
    a = traj.accelerations
    sq = a ** 2 if a.ndim == 1 else np.sum(a ** 2, axis=1)
    return float(np.sqrt(np.sum(traj.grid.taus * sq) / traj.grid.span))


def _solve_any(obs, eta: float, time_reversed: bool) -> ShadowingTrajectory:
    if isinstance(obs, ScalarObservationSeries):
        return solve_scalar(obs, eta, time_reversed)
    if isinstance(obs, VectorObservationSeries):
        return solve_vector(obs, eta, time_reversed)
    raise UsageError(f"unsupported observation container {type(obs).__name__}")


def search_eta(obs, xi_target: float, eta_lo: float, eta_hi: float, *,
               rel_tol: float = 2e-5, abs_tol: float = 0.0,
               max_iterations: int = 100,
               time_reversed: bool = True) -> EtaSearchResult:
    """Find eta whose fit has RMS acceleration matching ``xi_target``.

    RMS acceleration decreases as eta grows, so the bracket must satisfy
    xi(eta_lo) >= xi_target >= xi(eta_hi). The search runs in log(eta),
    combining bisection with safeguarded inverse-quadratic steps. When
    even eta_lo already meets the bound (xi(eta_lo) < target, e.g. affine
    data), the smoothest end eta_hi is returned by convention.
    """
    xi_target = float(xi_target)
    eta_lo = _require_positive_eta(eta_lo)
    eta_hi = _require_positive_eta(eta_hi)
    if eta_lo >= eta_hi:
        raise UsageError(f"bracket must satisfy eta_lo < eta_hi, got [{eta_lo}, {eta_hi}]")
    tol = max(rel_tol * abs(xi_target), abs_tol)
    trace: list[tuple[float, float]] = []

    def xi_at(eta: float) -> float:
        value = rms_acceleration(_solve_any(obs, eta, time_reversed))
        trace.append((eta, value))
        return value

    def result(eta: float, xi: float, iters: int, lo: float, hi: float) -> EtaSearchResult:
        return EtaSearchResult(eta=float(eta), xi=float(xi), iterations=iters,
                               bracket=(float(lo), float(hi)), trace=tuple(trace))

    xi_hi = xi_at(eta_hi)
    if abs(xi_hi - xi_target) <= tol:
        return result(eta_hi, xi_hi, 0, eta_lo, eta_hi)
    if xi_hi > xi_target:
        raise BracketDoesNotStraddle(
            f"xi({eta_hi:g}) = {xi_hi:g} still exceeds target {xi_target:g}; "
            f"raise eta_hi"
        )
    xi_lo = xi_at(eta_lo)
    if abs(xi_lo - xi_target) <= tol:
        return result(eta_lo, xi_lo, 0, eta_lo, eta_hi)
    if xi_lo < xi_target:
        # The whole bracket already satisfies the bound; prefer smoothest.
        return result(eta_hi, xi_hi, 0, eta_lo, eta_hi)

    # Work in log space: eta ranges over decades and xi(log eta) is gentler.
    # Odd iterations try inverse-quadratic (falling back to secant), even
    # iterations bisect, so the bracket provably halves every two steps and
    # plain false-position endpoint stagnation cannot occur.
    x_lo, f_lo = np.log(eta_lo), xi_lo - xi_target
    x_hi, f_hi = np.log(eta_hi), xi_hi - xi_target
    prev: tuple[float, float] | None = None
    for iteration in range(1, max_iterations + 1):
        span = x_hi - x_lo
        x_new = None
        if iteration % 2 == 1:
            if prev is not None:
                x2, f2 = prev
                if f_lo != f2 and f_hi != f2 and f_lo != f_hi:
                    x_new = (
                        x_lo * f_hi * f2 / ((f_lo - f_hi) * (f_lo - f2))
                        + x_hi * f_lo * f2 / ((f_hi - f_lo) * (f_hi - f2))
                        + x2 * f_lo * f_hi / ((f2 - f_lo) * (f2 - f_hi))
                    )
            if x_new is None and f_lo != f_hi:
                x_new = x_hi - f_hi * (x_hi - x_lo) / (f_hi - f_lo)
        if x_new is None or not np.isfinite(x_new) or not (
            x_lo + 0.02 * span < x_new < x_hi - 0.02 * span
        ):
            x_new = 0.5 * (x_lo + x_hi)
        eta_new = float(np.exp(x_new))
        xi_new = xi_at(eta_new)
        if abs(xi_new - xi_target) <= tol:
            return result(eta_new, xi_new, iteration, np.exp(x_lo), np.exp(x_hi))
        f_new = xi_new - xi_target
        prev = (x_new, f_new)
        if f_new > 0.0:
            x_lo, f_lo = x_new, f_new
        else:
            x_hi, f_hi = x_new, f_new
    raise MaxIterations(
        f"eta search did not reach |xi - {xi_target:g}| <= {tol:g} within "
        f"{max_iterations} iterations (bracket [{np.exp(x_lo):g}, {np.exp(x_hi):g}])"
    )


def _spline_eval(traj: ShadowingTrajectory, t, *, derivative: bool):
    times = traj.grid.times
    tq = np.asarray(t, dtype=float)
    scalar_input = tq.ndim == 0
    tq = np.atleast_1d(tq)
    if np.any(tq < times[0]):
        bad = float(tq[np.argmax(tq < times[0])])
        raise TimeOutOfRange(
            f"time {bad!r} precedes the fitted window starting at {float(times[0])!r}"
        )
    idx = np.searchsorted(times, tq, side="right") - 1
    beyond = idx >= times.shape[0] - 1
    idx = np.minimum(idx, times.shape[0] - 2)
    dt = tq - times[idx]
    p, v, a = traj.positions, traj.velocities, traj.accelerations
    if p.ndim == 2:
        dt = dt[:, None]
        beyond_b = beyond[:, None]
    else:
        beyond_b = beyond
    if derivative:
        inside = v[idx] + a[idx] * dt
        past_end = np.broadcast_to(v[-1], inside.shape)
    else:
        inside = p[idx] + v[idx] * dt + 0.5 * a[idx] * dt ** 2
        # Beyond the window: constant velocity from the last state.
        dt_end = (tq - times[-1])[:, None] if p.ndim == 2 else tq - times[-1]
        past_end = p[-1] + v[-1] * dt_end
    out = np.where(beyond_b, past_end, inside)
    if scalar_input:
        return out[0] if p.ndim == 2 else float(out[0])
    return out


def evaluate_spline(traj: ShadowingTrajectory, t):
    """Evaluate the fitted quadratic spline at times ``t``.

    Inside the window each interval uses its own constant acceleration;
    past the final sample the trajectory continues at constant velocity
    from the last state (no acceleration is defined there). Times before
    the window raise TimeOutOfRange.
    """
    return _spline_eval(traj, t, derivative=False)


def evaluate_spline_velocity(traj: ShadowingTrajectory, t):
    """Velocity of the fitted spline at times ``t`` (constant past the end)."""
    return _spline_eval(traj, t, derivative=True)


def solve_kkt_oracle(obs: ScalarObservationSeries, eta: float) -> OracleSolution:
    """Solve the full stationarity system directly, duals included.

    Unknowns are stacked as [p (n+1), v (n+1), a (n), lambda (n), mu (n)]
    and every stationarity and dynamics equation is a dense row, so the
    result is exact up to linear-solver rounding. Quadratic in memory and
    cubic in time, hence capped at small windows; this is a testing
    oracle, not the production path.
    """
    eta = _require_positive_eta(eta)
    grid = obs.grid
    n = grid.n
    if n > 200:
        raise UsageError(f"oracle supports n <= 200 gaps, got {n}")
    taus = grid.taus
    w = obs.weights
    values = obs.values
    size = 5 * n + 2
    Z = np.zeros((size, size))
    rhs = np.zeros(size)
    P0, V0, A0, L0, M0 = 0, n + 1, 2 * n + 2, 3 * n + 2, 4 * n + 2
    row = 0
    # Position stationarity: w_i p_i + (extended difference @ lambda)_i = w_i obs_i.
    for i in range(n + 1):
        Z[row, P0 + i] = w[i]
        if i < n:
            Z[row, L0 + i] -= 1.0
        if i >= 1:
            Z[row, L0 + i - 1] += 1.0
        rhs[row] = w[i] * values[i]
        row += 1
    # Velocity stationarity: (difference @ mu)_i = tau_i lambda_i, and mu_{n-1} = 0.
    for i in range(n):
        Z[row, M0 + i] -= 1.0
        if i >= 1:
            Z[row, M0 + i - 1] += 1.0
        Z[row, L0 + i] -= taus[i]
        row += 1
    Z[row, M0 + n - 1] = 1.0
    row += 1
    # Acceleration stationarity: 2 eta a_i = tau_i lambda_i / 2 + mu_i.
    for i in range(n):
        Z[row, A0 + i] = 2.0 * eta
        Z[row, L0 + i] = -0.5 * taus[i]
        Z[row, M0 + i] = -1.0
        row += 1
    # Interval dynamics as hard constraints.
    for i in range(n):
        Z[row, P0 + i + 1] = 1.0
        Z[row, P0 + i] = -1.0
        Z[row, V0 + i] = -taus[i]
        Z[row, A0 + i] = -0.5 * taus[i] ** 2
        row += 1
    for i in range(n):
        Z[row, V0 + i + 1] = 1.0
        Z[row, V0 + i] = -1.0
        Z[row, A0 + i] = -taus[i]
        row += 1
    try:
        sol = np.linalg.solve(Z, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"stationarity system is singular (1-norm condition estimate "
            f"{np.linalg.cond(Z, 1):.3e})"
        ) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("stationarity solve produced non-finite values")
    return OracleSolution(
        grid=grid, eta=eta,
        positions=_frozen(sol[P0:P0 + n + 1]),
        velocities=_frozen(sol[V0:V0 + n + 1]),
        accelerations=_frozen(sol[A0:A0 + n]),
        lambdas=_frozen(sol[L0:L0 + n]),
        mus=_frozen(sol[M0:M0 + n]),
    )


def oracle_residuals(sol: OracleSolution, obs: ScalarObservationSeries) -> dict[str, float]:
    """Max relative residual of each stationarity equation family.

    Each residual is normalized by one plus the largest magnitude among
    the terms entering that family, so values are comparable across
    scales; all should sit at rounding level for a healthy solve.
    """
    taus = sol.grid.taus
    w = obs.weights
    p, v, a = sol.positions, sol.velocities, sol.accelerations
    lam, mu = sol.lambdas, sol.mus

    position = w * (p - obs.values)
    position[:-1] -= lam
    position[1:] += lam
    pos_scale = max(np.abs(w * obs.values).max(), np.abs(lam).max(), 1.0)

    velocity = np.empty(sol.grid.n + 1)
    velocity[:-1] = (np.concatenate([[0.0], mu[:-1]]) - mu) - taus * lam
    velocity[-1] = mu[-1]
    vel_scale = max(np.abs(mu).max(), np.abs(taus * lam).max(), 1.0)

    accel = 2.0 * sol.eta * a - 0.5 * taus * lam - mu
    acc_scale = max(np.abs(2.0 * sol.eta * a).max(), np.abs(mu).max(), 1.0)

    dyn_p = p[1:] - p[:-1] - v[:-1] * taus - 0.5 * a * taus ** 2
    dyn_p_scale = max(np.abs(p).max(), 1.0)
    dyn_v = v[1:] - v[:-1] - a * taus
    dyn_v_scale = max(np.abs(v).max(), 1.0)

    return {
        "position": float(np.abs(position).max() / pos_scale),
        "velocity": float(np.abs(velocity).max() / vel_scale),
        "acceleration": float(np.abs(accel).max() / acc_scale),
        "dynamics_position": float(np.abs(dyn_p).max() / dyn_p_scale),
        "dynamics_velocity": float(np.abs(dyn_v).max() / dyn_v_scale),
    }
