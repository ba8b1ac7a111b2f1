"""Monotone explicit finite differences for sublinear Markovian semigroups.

The semigroup evolves an initial datum under du/dt = H(u) where H takes a
pointwise max over a finite control sample of drift-diffusion generators.
Drift is discretized upwind and diffusion with centered differences, so the
one-step update is monotone in every neighbor value whenever the enforced
step bound holds; order properties (constants, monotonicity, sublinearity)
then hold exactly on the grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import DEFAULT_TOL
from .grid import DIRICHLET, NEUMANN, SpatialGrid, ValueField


class CFLViolation(ValueError):
    def __init__(self, dt, dt_max):
        super().__init__(
            f"time step {dt:g} violates the stability bound; use dt <= {dt_max:g}")
        self.suggested_dt = dt_max


class NonFiniteField(RuntimeError):
    pass


@dataclass
class HamiltonianSpec:
    """Finite control sample with gridwise drift/covariance coefficients.

    ``drift(lam, *X)`` returns the drift per axis (an array per dimension,
    or a single array in 1D); ``covariance(lam, *X)`` returns the diffusion
    matrix sigma sigma^T (array in 1D; ((a11, a12), (a12, a22)) in 2D).
    ``reward(lam)`` is an optional running reward added inside the max.
    ``bound`` is the uniform coefficient bound used by step control and by
    the small-time continuity estimate.
    """

    grid: SpatialGrid
    controls: list
    drift: object
    covariance: object
    bound: float
    reward: object = None

    def __post_init__(self):
        if not self.controls:
            raise ValueError("empty control sample")
        X = self.grid.meshgrid()
        shape = self.grid.shape
        d = self.grid.dim
        self._mu = []      # per control: list of d arrays
        self._cov = []     # per control: [a11] or [a11, a22, a12]
        self._rew = []
        for lam in self.controls:
            mu = self.drift(lam, *X)
            mu = [np.broadcast_to(np.asarray(m, dtype=float), shape).copy()
                  for m in (mu if d == 2 else (mu,))]
            cov = self.covariance(lam, *X)
            if d == 1:
                cov = [np.broadcast_to(np.asarray(cov, dtype=float), shape).copy()]
            else:
                (a11, a12), (_, a22) = cov
                cov = [np.broadcast_to(np.asarray(a, dtype=float), shape).copy()
                       for a in (a11, a22, a12)]
                if np.any(cov[0] - np.abs(cov[2]) < -1e-13) or \
                   np.any(cov[1] - np.abs(cov[2]) < -1e-13):
                    raise ValueError(
                        "covariance is not diagonally dominant; the 7-point "
                        "stencil would lose monotonicity")
            if any(np.any(c < -1e-13) for c in cov[:d]):
                raise ValueError("negative diffusion coefficient")
            if max(np.max(np.abs(m)) for m in mu) > self.bound + 1e-9:
                raise ValueError("drift exceeds the declared bound")
            if max(np.max(np.abs(c)) for c in cov) > self.bound ** 2 + 1e-9:
                raise ValueError("covariance exceeds the declared bound")
            self._mu.append(mu)
            self._cov.append(cov)
            self._rew.append(0.0 if self.reward is None else float(self.reward(lam)))

    @property
    def state_independent(self):
        flat = [a for mu, cov in zip(self._mu, self._cov) for a in (*mu, *cov)]
        return all(np.ptp(a) < 1e-12 for a in flat)

    def max_stable_dt(self):
        """Largest step keeping the explicit update monotone.

        Uses the conservative bound dx^2 / (2 d max|cov| + dx max|mu|_1)
        with the smallest axis step.
        """
        d = self.grid.dim
        dx = min(self.grid.dx)
        cov_max = max(np.max(np.abs(c)) for cov in self._cov for c in cov)
        mu_max = max(sum(np.max(np.abs(m)) for m in mu) for mu in self._mu)
        denom = 2.0 * d * cov_max + dx * mu_max
        if denom == 0.0:
            return math.inf
        return dx * dx / denom


def _pad(u, grid):
    if grid.boundary in (NEUMANN, DIRICHLET):
        return np.pad(u, 1, mode="edge")
    raise ValueError(grid.boundary)


def _derivatives(u, grid):
    """Forward/backward/second differences per axis, plus cross stencils in 2D."""
    p = _pad(u, grid)
    d = grid.dim
    out = {}
    if d == 1:
        (dx,) = grid.dx
        out["fwd0"] = (p[2:] - p[1:-1]) / dx
        out["bwd0"] = (p[1:-1] - p[:-2]) / dx
        out["sec0"] = (p[2:] - 2 * p[1:-1] + p[:-2]) / dx ** 2
    else:
        dx, dy = grid.dx
        c = p[1:-1, 1:-1]
        out["fwd0"] = (p[2:, 1:-1] - c) / dx
        out["bwd0"] = (c - p[:-2, 1:-1]) / dx
        out["sec0"] = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / dx ** 2
        out["fwd1"] = (p[1:-1, 2:] - c) / dy
        out["bwd1"] = (c - p[1:-1, :-2]) / dy
        out["sec1"] = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / dy ** 2
        # monotone 7-point cross stencils (positive / negative a12 branch)
        out["cross_pos"] = (p[2:, 2:] + p[:-2, :-2] + 2 * c
                            - p[2:, 1:-1] - p[:-2, 1:-1]
                            - p[1:-1, 2:] - p[1:-1, :-2]) / (2 * dx * dy)
        out["cross_neg"] = (p[2:, 1:-1] + p[:-2, 1:-1]
                            + p[1:-1, 2:] + p[1:-1, :-2]
                            - p[2:, :-2] - p[:-2, 2:] - 2 * c) / (2 * dx * dy)
    return out


def _boundary_ring(shape):
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[ax] = 0
        mask[tuple(sl)] = True
        sl[ax] = -1
        mask[tuple(sl)] = True
    return mask


def hamiltonian_apply(spec, f):
    """Pointwise max over controls of the discretized generator applied to f."""
    u = f.values if isinstance(f, ValueField) else np.asarray(f, dtype=float)
    if u.shape != spec.grid.shape:
        raise ValueError("field does not live on the spec's grid")
    D = _derivatives(u, spec.grid)
    best = None
    for mu, cov, rew in zip(spec._mu, spec._cov, spec._rew):
        g = np.full(spec.grid.shape, rew)
        for ax, m in enumerate(mu):
            g = g + np.maximum(m, 0.0) * D[f"fwd{ax}"] \
                  + np.minimum(m, 0.0) * D[f"bwd{ax}"]
        for ax in range(spec.grid.dim):
            g = g + 0.5 * cov[ax] * D[f"sec{ax}"]
        if spec.grid.dim == 2:
            a12 = cov[2]
            g = g + np.maximum(a12, 0.0) * D["cross_pos"] \
                  + np.minimum(a12, 0.0) * (-D["cross_neg"])
        best = g if best is None else np.maximum(best, g)
    if spec.grid.boundary == DIRICHLET:
        best[_boundary_ring(spec.grid.shape)] = 0.0
    return ValueField(spec.grid, best, getattr(f, "time", 0.0))


def evolve(spec, g, t, dt=None):
    """Forward-Euler evolution of the datum ``g`` for duration ``t``.

    The step is chosen at (or validated against) the monotone stability
    bound; the step count is rounded up so the target time is hit exactly.
    """
    u = g.values.copy() if isinstance(g, ValueField) else \
        spec.grid.evaluate(g) if callable(g) else np.asarray(g, dtype=float).copy()
    if u.shape != spec.grid.shape:
        raise ValueError("datum does not live on the spec's grid")
    if t < 0:
        raise ValueError("duration must be nonnegative")
    if t == 0:
        return ValueField(spec.grid, u, 0.0)
    dt_max = spec.max_stable_dt()
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise CFLViolation(dt, dt_max)
    n_steps = max(1, math.ceil(t / dt - 1e-12))
    dt = t / n_steps
    if dt > dt_max * (1 + 1e-12):
        n_steps += 1
        dt = t / n_steps
    for _ in range(n_steps):
        u += dt * hamiltonian_apply(spec, u).values
        if not np.all(np.isfinite(u)):
            raise NonFiniteField("evolution produced non-finite values")
    return ValueField(spec.grid, u, t)


def semigroup_residual(spec, g, t, s, margin=0.0, dt=None):
    """Sup-norm gap between one evolution of t+s and two chained evolutions."""
    direct = evolve(spec, g, t + s, dt)
    chained = evolve(spec, evolve(spec, g, s, dt), t, dt)
    diff = np.abs(direct.values - chained.values)
    if margin > 0.0:
        diff = diff[spec.grid.interior_mask(margin)]
    return float(np.max(diff))


def pointwise_generator(spec, f, h, dt=None):
    """Finite-horizon difference quotient (T_h f - f) / h as a field."""
    u0 = f.values if isinstance(f, ValueField) else spec.grid.evaluate(f)
    if dt is None and h < spec.max_stable_dt():
        dt = h
    uh = evolve(spec, u0, h, dt)
    return ValueField(spec.grid, (uh.values - u0) / h, h)


@dataclass
class LevyReport:
    translation_residual: float
    small_time_residual: float
    small_time_bound: float

    @property
    def passed(self):
        return self.small_time_residual <= self.small_time_bound


def levy_invariants(spec, g_fn, t, y, margin, tol=None):
    """Spatial homogeneity and small-time continuity for state-independent data.

    ``g_fn`` must be callable so its translate can be sampled; ``y`` is a
    translation vector snapped to the grid.  Translation equivariance is
    measured on the interior at least ``margin`` from the boundary; the
    small-time check compares sup|T_t g - g| against L_g * C * (t + sqrt(t))
    with the Lipschitz constant of ``g`` measured on the grid.
    """
    if not spec.state_independent:
        raise ValueError("Levy invariants need state-independent coefficients")
    grid = spec.grid
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shift = [int(round(yi / dxi)) for yi, dxi in zip(y, grid.dx)]
    u_plain = evolve(spec, g_fn, t)
    g_shift = grid.evaluate(lambda *X: g_fn(*[x + yi for x, yi in zip(X, y)]))
    u_shift = evolve(spec, g_shift, t)
    # compare u_shift(x) with u_plain(x + y) on the common interior
    sl_src, sl_dst = [], []
    for m, n in zip(shift, grid.shape):
        if abs(m) >= n:
            raise ValueError("translation leaves the grid")
        sl_src.append(slice(m, None) if m >= 0 else slice(None, m))
        sl_dst.append(slice(None, n - m) if m >= 0 else slice(-m, None))
    diff = np.abs(u_shift.values[tuple(sl_dst)] - u_plain.values[tuple(sl_src)])
    mask = grid.interior_mask(margin)[tuple(sl_dst)]
    trans_res = float(np.max(diff[mask]))

    g0 = grid.evaluate(g_fn)
    lip = 0.0
    for ax, dxi in enumerate(grid.dx):
        lip = max(lip, float(np.max(np.abs(np.diff(g0, axis=ax)))) / dxi)
    small = evolve(spec, g0, min(t, 1e-3))
    small_res = float(np.max(np.abs(small.values - g0)[grid.interior_mask(margin)]))
    bound = lip * spec.bound * (small.time + math.sqrt(small.time))
    return LevyReport(trans_res, small_res, bound)


@dataclass
class ComparisonReport:
    domination_residual: float     # max positive part of T1 - T2
    nested_residual: float
    tol: float

    @property
    def passed(self):
        return self.domination_residual <= self.tol and \
            self.nested_residual <= self.tol


def nested_two_time_value(spec, f1, f2, s, t, dt=None):
    """Value of the two-date product payoff f1(X_s) * f2(X_t), s < t.

    Evaluated by nested evolution: the inner conditional value of f2 is
    propagated over (s, t], multiplied pointwise by f1 >= 0 (positive
    homogeneity of the sublinear semigroup), and propagated over (0, s].
    """
    if not s < t:
        raise ValueError("need s < t")
    a1 = spec.grid.evaluate(f1) if callable(f1) else np.asarray(f1, dtype=float)
    if np.any(a1 < 0):
        raise ValueError("nested evaluation requires f1 >= 0")
    inner = evolve(spec, f2, t - s, dt)
    return evolve(spec, a1 * inner.values, s, dt)


def comparison_check(spec1, spec2, g_fns, t_list, margin=0.0, tol=None, dt=None):
    """Semigroup domination T1 <= T2 and its two-date consequence.

    Checks the single-time ordering for every supplied datum and time, then
    the same ordering for nested product payoffs built from consecutive
    pairs of data.
    """
    tol = DEFAULT_TOL.exact if tol is None else tol
    if spec1.grid != spec2.grid:
        raise ValueError("comparison requires a shared grid")
    mask = spec1.grid.interior_mask(margin)
    worst = -math.inf
    for g in g_fns:
        for t in t_list:
            u1 = evolve(spec1, g, t, dt)
            u2 = evolve(spec2, g, t, dt)
            worst = max(worst, float(np.max((u1.values - u2.values)[mask])))
    nested = -math.inf
    if len(t_list) >= 2 and len(g_fns) >= 2:
        s, t = sorted(t_list)[:2]
        if s < t:
            f1 = lambda *X: np.abs(g_fns[0](*X))
            f2 = g_fns[1]
            v1 = nested_two_time_value(spec1, f1, f2, s, t, dt)
            v2 = nested_two_time_value(spec2, f1, f2, s, t, dt)
            nested = float(np.max((v1.values - v2.values)[mask]))
    return ComparisonReport(max(worst, 0.0), max(nested, 0.0), tol)
