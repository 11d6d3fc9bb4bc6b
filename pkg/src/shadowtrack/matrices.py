"""Time grids and the structured matrices of the smoothing linear system.

The smoother works on a window of samples at strictly increasing times
t_0 < t_1 < ... < t_n with gaps tau_i = t_{i+1} - t_i. Positions are
modelled with a constant acceleration on each gap, and eliminating the
dual variables of the underlying constrained least-squares problem leaves
a small family of banded matrices that this module assembles:

* first-difference operators (square and extended by one row),
* running-sum operators that invert them,
* a junction operator that couples three consecutive positions through
  the two gaps that meet there,
* gap-product couplings between accelerations on adjacent intervals,
* the acceleration-recovery core mapping weighted position residuals to
  interval accelerations,
* the assembled system blocks, augmented with a weighted-mean-residual
  constraint row.

Because the elimination is causal, its approximation error concentrates
at one end of the window. Building the system on the reversed gap
sequence and then reversing rows and columns moves that error to the
oldest samples, which is what a tracker wants; this is the default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonIncreasingTimes, ShapeMismatch, TooFewPoints, UsageError

__all__ = [
    "TimeGrid",
    "FilterMatrices",
    "IdentityReport",
    "build_time_grid",
    "build_filter_matrices",
    "expand_block",
    "verify_identities",
]


def _frozen(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times and their gaps.

    Arrays are read-only so a grid can be shared between solves and
    threads without defensive copies.
    """

    times: np.ndarray  # shape (n+1,)
    taus: np.ndarray   # shape (n,), all positive

    @property
    def n(self) -> int:
        """Number of gaps (one less than the number of samples)."""
        return self.taus.shape[0]

    @property
    def span(self) -> float:
        """Total window length t_n - t_0."""
        return float(self.times[-1] - self.times[0])


def build_time_grid(times) -> TimeGrid:
    """Validate sample times and derive the gap sequence.

    Raises TooFewPoints for fewer than three samples, NonIncreasingTimes
    when times are not strictly increasing or not finite.
    """
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1:
        raise ShapeMismatch(f"times must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 3:
        raise TooFewPoints(
            f"need at least 3 samples to constrain an acceleration, got {arr.shape[0]}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonIncreasingTimes("times contain non-finite values")
    taus = np.diff(arr)
    if np.any(taus <= 0.0):
        bad = int(np.argmax(taus <= 0.0))
        raise NonIncreasingTimes(
            f"times must be strictly increasing; violation between samples "
            f"{bad} and {bad + 1} ({arr[bad]!r} -> {arr[bad + 1]!r})"
        )
    return TimeGrid(times=_frozen(arr), taus=_frozen(taus))


def _difference(rows: int, cols: int) -> np.ndarray:
    """-1 on the main diagonal, +1 on the first subdiagonal."""
    return -np.eye(rows, cols) + np.eye(rows, cols, k=-1)


def _running_sum(rows: int, cols: int) -> np.ndarray:
    """Negated lower-triangular ones; inverts the difference operators."""
    return -np.tril(np.ones((rows, cols)))


def _coupling_reference(n: int) -> np.ndarray:
    """Product of the extended difference and running-sum operators.

    Identity on the first n rows; the last row carries -1 under each of
    the first n columns and a zero corner.
    """
    j = np.zeros((n + 1, n + 1))
    j[:n, :n] = np.eye(n)
    j[n, :n] = -1.0
    return j


def _gap_products(taus: np.ndarray) -> np.ndarray:
    """Couplings tau_i^2 tau_{i+1} and tau_i tau_{i+1}^2 on adjacent gaps."""
    n = taus.shape[0]
    g = np.zeros((n - 1, n))
    inner = taus[:-1] * taus[1:]
    idx = np.arange(n - 1)
    g[idx, idx] = inner * taus[:-1]
    g[idx, idx + 1] = inner * taus[1:]
    return g


def _junction(taus: np.ndarray) -> np.ndarray:
    """Three-point position stencil across each interior sample.

    Row i reads tau_{i+1} * p_i - (tau_i + tau_{i+1}) * p_{i+1} + tau_i * p_{i+2},
    which vanishes on any sequence affine in time.
    """
    n = taus.shape[0]
    b = np.zeros((n - 1, n + 1))
    idx = np.arange(n - 1)
    b[idx, idx] = taus[1:]
    b[idx, idx + 1] = -(taus[:-1] + taus[1:])
    b[idx, idx + 2] = taus[:-1]
    return b


def _accel_core(taus: np.ndarray) -> np.ndarray:
    """Map from weighted position residuals to twice-penalized accelerations.

    Equals (tau/2 + running_sum @ tau) @ extended_running_sum with tau as a
    diagonal scaling; lower-triangular with a zero last column.
    """
    n = taus.shape[0]
    tau = np.diag(taus)
    m = _running_sum(n, n + 1)
    el = _running_sum(n, n)
    return 0.5 * (tau @ m) + el @ (tau @ m)


def _flip2(matrix: np.ndarray) -> np.ndarray:
    return matrix[::-1, ::-1].copy()


@dataclass(frozen=True)
class FilterMatrices:
    """Assembled system blocks for one time grid.

    All arrays are read-only. ``a_bar`` and ``b_bar`` are the augmented
    blocks of the master system (a_bar @ diag(w) + eta * b_bar) p = a_bar
    @ diag(w) @ obs, whose final row enforces a zero weighted mean
    residual. ``accel_core`` recovers interval accelerations from the
    weighted residuals of a solved trajectory.

    With ``time_reversed`` set, ``A``, ``a_bar``, ``b_bar`` and
    ``accel_core`` were built on the reversed gap sequence and flipped
    back, which pushes the scheme's one-sided approximation error toward
    the start of the window. The flip leaves ``B`` and ``G`` unchanged,
    so those are always stored in forward orientation.
    """

    grid: TimeGrid
    time_reversed: bool
    D: np.ndarray           # (n, n)     first difference
    E: np.ndarray           # (n+1, n)   extended first difference
    L: np.ndarray           # (n, n)     running sum, inverse of D
    M: np.ndarray           # (n, n+1)   extended running sum
    G: np.ndarray           # (n-1, n)   adjacent-gap products
    B: np.ndarray           # (n-1, n+1) three-point junction stencil
    A: np.ndarray           # (n-1, n+1) quarter gap-product of the accel core
    a_bar: np.ndarray       # (n, n+1)   A plus a row of ones
    b_bar: np.ndarray       # (n, n+1)   B plus a row of zeros
    accel_core: np.ndarray  # (n, n+1)
    block_dim: int = 1

    @property
    def n(self) -> int:
        return self.grid.n

    def expand(self, dim: int) -> "FilterMatrices":
        """Block-expand every matrix for ``dim``-component positions.

        Each scalar entry becomes that multiple of the dim-by-dim
        identity, so stacked vectors keep their per-sample component
        blocks contiguous.
        """
        if self.block_dim != 1:
            raise UsageError("matrices are already block-expanded")
        if dim == 1:
            return self
        return FilterMatrices(
            grid=self.grid,
            time_reversed=self.time_reversed,
            D=_frozen(expand_block(self.D, dim)),
            E=_frozen(expand_block(self.E, dim)),
            L=_frozen(expand_block(self.L, dim)),
            M=_frozen(expand_block(self.M, dim)),
            G=_frozen(expand_block(self.G, dim)),
            B=_frozen(expand_block(self.B, dim)),
            A=_frozen(expand_block(self.A, dim)),
            a_bar=_frozen(expand_block(self.a_bar, dim)),
            b_bar=_frozen(expand_block(self.b_bar, dim)),
            accel_core=_frozen(expand_block(self.accel_core, dim)),
            block_dim=dim,
        )


def build_filter_matrices(grid: TimeGrid, time_reversed: bool = True) -> FilterMatrices:
    """Assemble all system blocks for a grid.

    The default builds on the reversed gap sequence and flips rows and
    columns back, so the elimination error sits at the oldest samples.
    """
    taus = grid.taus
    n = grid.n
    if time_reversed:
        rev = taus[::-1].copy()
        g = _flip2(_gap_products(rev))
        b = _flip2(_junction(rev))
        core = _flip2(_accel_core(rev))
        a = _flip2(0.25 * (_gap_products(rev) @ _accel_core(rev)))
    else:
        g = _gap_products(taus)
        b = _junction(taus)
        core = _accel_core(taus)
        a = 0.25 * (g @ core)
    a_bar = np.vstack([a, np.ones((1, n + 1))])
    b_bar = np.vstack([b, np.zeros((1, n + 1))])
    return FilterMatrices(
        grid=grid,
        time_reversed=time_reversed,
        D=_frozen(_difference(n, n)),
        E=_frozen(_difference(n + 1, n)),
        L=_frozen(_running_sum(n, n)),
        M=_frozen(_running_sum(n, n + 1)),
        G=_frozen(_gap_products(taus)),
        B=_frozen(_junction(taus)),
        A=_frozen(a),
        a_bar=_frozen(a_bar),
        b_bar=_frozen(b_bar),
        accel_core=_frozen(core),
    )


def expand_block(matrix, dim: int) -> np.ndarray:
    """Kronecker-expand a scalar coupling matrix to ``dim`` components.

    Entry (i, j) becomes matrix[i, j] times the dim-by-dim identity, so
    the expanded matrix acts on vectors stacked sample-major.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise UsageError(f"block dimension must be a positive integer, got {dim!r}")
    return np.kron(np.asarray(matrix, dtype=float), np.eye(int(dim)))


@dataclass(frozen=True)
class IdentityReport:
    """Deviations of the exact operator identities, zero when healthy."""

    difference_inverse: float   # max |L @ D - I| over the square operators
    extended_coupling: float    # max |E @ M - J| with J the coupling reference

    @property
    def ok(self) -> bool:
        return self.difference_inverse == 0.0 and self.extended_coupling == 0.0


def verify_identities(fm: FilterMatrices) -> IdentityReport:
    """Check the integer operator identities of an assembled system.

    The running sums invert the difference operators exactly, and the
    extended pair reproduces the coupling reference exactly; entries are
    all 0 or +-1 so any nonzero deviation indicates a construction bug.
    """
    if fm.block_dim != 1:
        raise UsageError("identity checks run on unexpanded matrices")
    n = fm.n
    dl = fm.D @ fm.L - np.eye(n)
    em = fm.E @ fm.M - _coupling_reference(n)
    return IdentityReport(
        difference_inverse=float(np.max(np.abs(dl))),
        extended_coupling=float(np.max(np.abs(em))),
    )
