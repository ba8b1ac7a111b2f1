"""Controlled lattice dynamic programming for relaxed control values.

A controlled Markov chain on a 1D grid is built to be locally consistent
with the drift/covariance of each control; value functions of payoffs with
a running cost then come from backward induction, with monitored path
coordinates handled by state augmentation.  Feedback controls on the
lattice realize the relaxed sup, so no measure-valued control object is
materialized.
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL
from .pde.grid import SpatialGrid, ValueField
from .pde.hjb import HamiltonianSpec, evolve


@dataclass
class ControlProblemSpec:
    """Coefficients, running cost and horizon of the lattice control problem."""

    grid: SpatialGrid
    controls: list
    drift: object         # drift(lam, x) -> array over the grid
    covariance: object    # covariance(lam, x) -> array (sigma sigma^T)
    running_cost: object  # running_cost(lam) -> float >= 0, min over controls 0
    horizon: float

    def __post_init__(self):
        if self.grid.dim != 1:
            raise ValueError("the lattice chain is one-dimensional")
        if not self.controls:
            raise ValueError("empty control sample")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        costs = [float(self.running_cost(lam)) for lam in self.controls]
        if min(costs) < -DEFAULT_TOL.exact:
            raise ValueError("running cost must be nonnegative")
        if min(costs) > 1e-9:
            raise ValueError("running cost must vanish for some control")
        self._costs = costs

    def hamiltonian_spec(self, bound=None):
        """The same coefficients as an HJB spec (running cost as reward)."""
        x = self.grid.axes()[0]
        if bound is None:
            bound = 0.0
            for lam in self.controls:
                bound = max(bound,
                            float(np.max(np.abs(self.drift(lam, x)))),
                            math.sqrt(float(np.max(np.abs(self.covariance(lam, x))))))
            bound = max(bound, 1e-12)
        return HamiltonianSpec(
            grid=self.grid, controls=list(self.controls),
            drift=lambda lam, X: self.drift(lam, X) + 0.0 * X,
            covariance=lambda lam, X: self.covariance(lam, X) + 0.0 * X,
            bound=bound,
            reward=lambda lam: -float(self.running_cost(lam)))


class ChainBuildError(ValueError):
    def __init__(self, msg, suggested_dt=None):
        super().__init__(msg)
        self.suggested_dt = suggested_dt


@dataclass
class LatticeChain:
    """Per-control nearest-neighbor transition probabilities at step ``dt``."""

    grid: SpatialGrid
    dt: float
    p_up: list     # per control: array over nodes
    p_down: list
    p_stay: list

    def moment_errors(self, spec):
        """Worst first/second local moment mismatch against the coefficients."""
        x = self.grid.axes()[0]
        dx = self.grid.dx[0]
        worst1 = worst2 = 0.0
        for lam, pu, pd in zip(spec.controls, self.p_up, self.p_down):
            mu = np.broadcast_to(spec.drift(lam, x), x.shape)
            cov = np.broadcast_to(spec.covariance(lam, x), x.shape)
            mean = (pu - pd) * dx
            var = (pu + pd) * dx * dx - mean ** 2
            worst1 = max(worst1, float(np.max(np.abs(mean - mu * self.dt))))
            worst2 = max(worst2, float(np.max(np.abs(var - cov * self.dt))))
        return worst1, worst2


def build_chain(spec, dt=None):
    """Locally consistent controlled chain; refuses steps breaking positivity."""
    x = spec.grid.axes()[0]
    dx = spec.grid.dx[0]
    denom = 0.0
    for lam in spec.controls:
        mu = np.broadcast_to(np.asarray(spec.drift(lam, x), dtype=float), x.shape)
        cov = np.broadcast_to(np.asarray(spec.covariance(lam, x), dtype=float),
                              x.shape)
        if np.any(cov < -1e-13):
            raise ChainBuildError("negative covariance")
        denom = max(denom, float(np.max(cov + dx * np.abs(mu))))
    dt_max = math.inf if denom == 0.0 else dx * dx / denom
    if dt is not None and dt > dt_max * (1 + 1e-12):
        raise ChainBuildError(
            f"dt {dt:g} yields negative probabilities; use dt <= {dt_max:g}",
            suggested_dt=dt_max)
    target = dt if dt is not None else dt_max
    if not math.isfinite(target):
        target = spec.horizon
    n = max(1, math.ceil(spec.horizon / target - 1e-12))
    step = spec.horizon / n
    p_up, p_down, p_stay = [], [], []
    for lam in spec.controls:
        mu = np.broadcast_to(np.asarray(spec.drift(lam, x), dtype=float), x.shape)
        cov = np.broadcast_to(np.asarray(spec.covariance(lam, x), dtype=float),
                              x.shape)
        pu = cov * step / (2 * dx * dx) + np.maximum(mu, 0.0) * step / dx
        pd = cov * step / (2 * dx * dx) + np.maximum(-mu, 0.0) * step / dx
        ps = 1.0 - pu - pd
        if np.any(ps < -1e-12):
            raise ChainBuildError(
                "negative stay probability", suggested_dt=dt_max)
        p_up.append(pu)
        p_down.append(pd)
        p_stay.append(np.clip(ps, 0.0, None))
    chain = LatticeChain(spec.grid, step, p_up, p_down, p_stay)
    e1, e2 = chain.moment_errors(spec)
    # var defect is exactly (mu dt)^2 <= dt dx mu_max <= step * denom
    if e1 > 1e-12 or e2 > step * denom + 1e-12:
        raise ChainBuildError(
            f"moment consistency failure: mean {e1:.2e}, var {e2:.2e}")
    return chain


def _shift_up(V):
    out = np.empty_like(V)
    out[..., :-1] = V[..., 1:]
    out[..., -1] = V[..., -1]
    return out


def _shift_down(V):
    out = np.empty_like(V)
    out[..., 1:] = V[..., :-1]
    out[..., 0] = V[..., 0]
    return out


def _date_steps(dates, dt, n_steps):
    idx = []
    for s in dates:
        k = round(s / dt)
        if abs(s - k * dt) > 1e-9 * max(1.0, abs(s)) or not 0 < k < n_steps:
            raise ValueError(f"monitoring date {s} is not on the time grid")
        idx.append(k)
    if sorted(idx) != idx or len(set(idx)) != len(idx):
        raise ValueError("monitoring dates must be strictly increasing")
    return idx


def value_function(chain, spec, terminal, monitor_dates=(), t_start=0.0,
                   return_policy=False):
    """Backward induction value of a terminal or cylinder payoff.

    ``terminal`` is either a function of the terminal state or, with
    ``monitor_dates`` inside ``(t_start, horizon)``, a function of the
    states at the monitoring dates followed by the terminal state (at most
    3 monitored coordinates).  Returns the value at ``t_start`` as a
    ValueField (augmented axes already collapsed to the start state).
    """
    if len(monitor_dates) > 3:
        raise ValueError("at most 3 monitoring dates are supported")
    x = chain.grid.axes()[0]
    dt = chain.dt
    n_steps = max(1, round((spec.horizon - t_start) / dt))
    if abs((spec.horizon - t_start) - n_steps * dt) > 1e-9:
        raise ValueError("start time is not on the time grid")
    date_steps = _date_steps([s - t_start for s in monitor_dates], dt, n_steps)
    grids = np.meshgrid(*([x] * (len(monitor_dates) + 1)), indexing="ij")
    V = np.asarray(terminal(*grids), dtype=float)
    pending = list(zip(date_steps, range(len(monitor_dates))))
    policy = [] if return_policy else None
    costs = spec._costs
    for k in range(n_steps, 0, -1):
        best = None
        arg = None
        for i, (pu, pd, ps) in enumerate(zip(chain.p_up, chain.p_down,
                                             chain.p_stay)):
            cand = -costs[i] * dt + pu * _shift_up(V) + pd * _shift_down(V) \
                + ps * V
            if best is None:
                best, arg = cand, np.zeros(cand.shape, dtype=int)
            else:
                better = cand > best
                best = np.where(better, cand, best)
                if return_policy:
                    arg = np.where(better, i, arg)
        V = best
        if return_policy:
            policy.append(arg)
        # collapse a monitored coordinate when stepping past its date
        while pending and pending[-1][0] == k - 1:
            _, axis_pos = pending.pop()
            V = np.diagonal(V, axis1=V.ndim - 2, axis2=V.ndim - 1).copy()
    field = ValueField(chain.grid, V, t_start)
    if return_policy:
        return field, policy[::-1]
    return field


def dpp_residual(chain, spec, terminal, split_time, monitor_dates=()):
    """Gap between a direct sweep and a two-stage sweep split at ``split_time``.

    The intermediate value at the split is re-used as the terminal datum of
    the earlier stage, so the residual probes associativity of the backward
    induction.  All monitoring dates must lie strictly after the split so
    they collapse during the late stage.
    """
    if any(s <= split_time + 1e-12 for s in monitor_dates):
        raise ValueError("split time must precede every monitoring date")
    direct = value_function(chain, spec, terminal, monitor_dates)
    mid = value_function(chain, spec, terminal, monitor_dates,
                         t_start=split_time)
    early_spec = ControlProblemSpec(
        grid=spec.grid, controls=spec.controls, drift=spec.drift,
        covariance=spec.covariance, running_cost=spec.running_cost,
        horizon=split_time)
    early_chain = build_chain(early_spec, chain.dt)
    mid_vals = mid.values

    def as_terminal(*grids):
        return np.interp(grids[-1], chain.grid.axes()[0], mid_vals)

    two_stage = value_function(early_chain, early_spec, as_terminal)
    return float(np.max(np.abs(direct.values - two_stage.values)))


def cross_validate(spec, g_fn, t, margin=0.0, chain_dt=None, pde_dt=None):
    """Sup gap between the lattice value (h = 0) and the PDE semigroup."""
    if any(c > 1e-12 for c in spec._costs):
        raise ValueError("cross validation requires zero running cost")
    run_spec = ControlProblemSpec(
        grid=spec.grid, controls=spec.controls, drift=spec.drift,
        covariance=spec.covariance, running_cost=spec.running_cost, horizon=t)
    chain = build_chain(run_spec, chain_dt)
    lattice = value_function(chain, run_spec, lambda x: g_fn(x))
    pde = evolve(run_spec.hamiltonian_spec(), g_fn, t, pde_dt)
    diff = np.abs(lattice.values - pde.values)
    if margin > 0.0:
        diff = diff[spec.grid.interior_mask(margin)]
    return float(np.max(diff))
