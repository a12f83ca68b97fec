"""Projective integration: micro-solver, drift estimator, macro-solver.

The micro-solver runs the rescaled fast equation with the slow variable
frozen::

    Y_{m+1} = Y_m + f2(x, Y_m) dt_micro + sigma2 * dL_m

(no epsilon anywhere: the time change t -> eps*t removes it, which is the
whole point: the cost is O(1) in the scale separation).  The drift estimate
is the empirical average A(x) = mean of f1(x, Y_m) over the averaged index
set, and the macro-solver is a plain Euler-Maruyama step driven by it.

Noise layout per path (master seed S, path index k):

* slow increments come from stream (S, pack(ROLE_SLOW, k)), 2 words each,
  generated for the whole run in block layout;
* micro increments come from stream (S, pack(ROLE_MICRO, k)), consumed as one
  block of 2M words per macro step (M angle words, then M exponential words).

Systems that declare a linear fast drift (f2 = -r y) run through an exact
vectorized scan of the micro recursion; everything else runs the literal
sequential recursion.  A system always uses the same lane, so results are
reproducible and independent of how paths are grouped into batches.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .direct import path_noise, steps_on_grid
from .errors import ParameterError, PathOverflowError
from .rng import (ROLE_MICRO, ROLE_SLOW, RngStream, pack_stream_id,
                  words_to_uniforms, words_to_uniforms_into)
from .stable import CmsWorkspace, _cms_core, standard_from_uniforms
from .systems import REJECT_THRESHOLD, SlowFastSystem, Trajectory

RESTART_WARM = "warm"
RESTART_COLD = "cold"


@dataclass(frozen=True)
class PimSchedule:
    """Macro/micro step sizes, micro chain length and restart policy."""

    macro_dt: float
    micro_dt: float
    micro_count: int
    horizon: float
    burn_in: int = 0
    restart: str = RESTART_WARM

    def __post_init__(self):
        if self.macro_dt <= 0.0 or self.micro_dt <= 0.0:
            raise ParameterError("step sizes must be positive")
        if self.micro_dt > self.macro_dt:
            raise ParameterError(
                f"micro_dt={self.micro_dt} must not exceed macro_dt={self.macro_dt}")
        if self.micro_count < 1:
            raise ParameterError(f"micro_count must be >= 1, got {self.micro_count}")
        if self.horizon < self.macro_dt:
            raise ParameterError("horizon must cover at least one macro step")
        if not 0 <= self.burn_in < self.micro_count:
            raise ParameterError(
                f"burn_in must be in [0, micro_count), got {self.burn_in}")
        if self.restart not in (RESTART_WARM, RESTART_COLD):
            raise ParameterError(f"restart must be 'warm' or 'cold', got {self.restart}")

    @property
    def n_macro(self) -> int:
        return steps_on_grid(self.horizon, self.macro_dt)

    def scaled(self, micro_dt_factor: float, micro_count_factor: float) -> "PimSchedule":
        return replace(
            self,
            micro_dt=self.micro_dt * micro_dt_factor,
            micro_count=int(np.ceil(self.micro_count * micro_count_factor)),
        )


@dataclass
class MicroBatch:
    """Micro states Y_0..Y_M of one macro step plus the drift estimate."""

    states: np.ndarray          # (M+1, dim_fast)
    drift_estimate: np.ndarray  # (dim_slow,)


def centered_mean(values: np.ndarray, axis=0):
    """Arithmetic mean computed as v0 + mean(v - v0).

    Exact (to the bit) when all values are equal, which is what makes the
    estimator collapse to f1(x) exactly when f1 does not depend on y.
    """
    v0 = np.take(values, 0, axis=axis)
    return v0 + np.mean(values - np.expand_dims(v0, axis), axis=axis)


def _scan_capable(system: SlowFastSystem, sched: PimSchedule) -> bool:
    if system.fast_linear_rate is None or not system.separable:
        return False
    if not (system.scalar and system.vectorized):
        return False
    g = 1.0 - system.fast_linear_rate * sched.micro_dt
    return 0.0 < g < 1.0


class _OuScan:
    """Exact vectorized evaluation of Y_{m+1} = g Y_m + c xi_m.

    Y_m = g^m (y0 + c * cumsum_j<m xi_j g^-(j+1)); evaluated in column chunks
    so the growth factor g^-L stays far from overflow.
    """

    def __init__(self, g: float, m_total: int):
        if not 0.0 < g < 1.0:
            raise ParameterError(f"scan requires contraction factor in (0,1), got {g}")
        self.g = g
        self.chunk = min(m_total, max(1, int(600.0 / -np.log(g))))
        ms = np.arange(1, self.chunk + 1, dtype=np.float64)
        self.pow = g ** ms
        self.inv_pow = g ** (-ms)

    def run(self, y0: np.ndarray, c_noise: float, xi: np.ndarray,
            out=None) -> np.ndarray:
        """y0: (K,), xi: (K, M) -> micro states (K, M) for m = 1..M."""
        K, M = xi.shape
        if out is None:
            out = np.empty_like(xi)
        y = y0
        for lo in range(0, M, self.chunk):
            hi = min(lo + self.chunk, M)
            L = hi - lo
            s = np.multiply(xi[:, lo:hi], self.inv_pow[:L], out=out[:, lo:hi])
            np.cumsum(s, axis=1, out=s)
            s *= c_noise
            s += y[:, None]
            s *= self.pow[:L]
            y = out[:, hi - 1]
        return out


def _micro_states_generic(system, x_frozen, y_init, sched, xi):
    """Literal sequential micro recursion; returns (M+1, dim_fast) states."""
    M = sched.micro_count
    d2 = system.dim_fast
    states = np.empty((M + 1, d2))
    y = np.asarray(y_init, dtype=np.float64).reshape(d2).copy()
    states[0] = y
    dt = sched.micro_dt
    sig = system.sigma2
    for m in range(M):
        f2v = np.asarray(system.f2(x_frozen, y), dtype=np.float64).reshape(d2)
        y = y + f2v * dt + sig * xi[m]
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > REJECT_THRESHOLD:
            raise PathOverflowError("micro-solver state overflowed", micro_step=m + 1)
        states[m + 1] = y
    return states


def micro_noise(system: SlowFastSystem, sched: PimSchedule, rng: RngStream):
    """One macro step's micro increments: (M, dim_fast) array of
    sigma-free stable increments over micro_dt (block word layout)."""
    M, d2 = sched.micro_count, system.dim_fast
    u = words_to_uniforms(rng.raw(2 * M * d2))
    std = standard_from_uniforms(system.noise2.alpha, u[:M * d2], u[M * d2:])
    return sched.micro_dt ** (1.0 / system.noise2.alpha) * std.reshape(M, d2)


def micro_solve(system: SlowFastSystem, x_frozen, y_init, sched: PimSchedule,
                rng: RngStream) -> MicroBatch:
    """Run one frozen-slow micro chain and estimate the averaged drift.

    Consumes ``2 * micro_count * dim_fast`` words from ``rng``.  The estimate
    averages f1(x, Y_m) over m = burn_in+1 .. M (the default burn_in = 0 sums
    over every post-initial state).
    """
    x_frozen = np.asarray(x_frozen, dtype=np.float64).reshape(system.dim_slow)
    if not np.all(np.isfinite(x_frozen)):
        raise ParameterError("frozen slow state must be finite")
    xi = micro_noise(system, sched, rng)

    if _scan_capable(system, sched):
        g = 1.0 - system.fast_linear_rate * sched.micro_dt
        scan = _OuScan(g, sched.micro_count)
        y0 = np.asarray([float(np.asarray(y_init).reshape(()))])
        # xi already carries the dt^(1/alpha) increment scale, so the scan's
        # noise coefficient is just sigma2
        ys = scan.run(y0, system.sigma2, xi[:, 0][None, :])  # (1, M)
        states = np.concatenate([[y0], ys[0][:, None]])
        est = system.micro_mean(x_frozen, ys[:, sched.burn_in:])
        return MicroBatch(states=states, drift_estimate=np.atleast_1d(est))

    states = _micro_states_generic(system, x_frozen, y_init, sched, xi)
    averaged = states[sched.burn_in + 1:]
    f1_vals = np.stack([
        np.asarray(system.f1(x_frozen, y), dtype=np.float64).reshape(system.dim_slow)
        for y in averaged])
    return MicroBatch(states=states, drift_estimate=centered_mean(f1_vals, axis=0))


def macro_step(x, batch: MicroBatch, sched: PimSchedule, noise_increment,
               sigma1: float):
    """Euler-Maruyama macro update x + A(x) macro_dt + sigma1 * increment."""
    x = np.asarray(x, dtype=np.float64)
    est = np.asarray(batch.drift_estimate, dtype=np.float64).reshape(x.shape)
    incr = np.asarray(noise_increment, dtype=np.float64).reshape(x.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        out = x + est * sched.macro_dt + sigma1 * incr
    if not np.all(np.isfinite(out)):
        raise PathOverflowError("macro step produced a non-finite state")
    return out


@dataclass
class PimBatchResult:
    """Slow paths of a batch of PIM runs sharing one schedule."""

    times: np.ndarray        # (N+1,)
    xs: np.ndarray           # (K, N+1) slow paths
    slow_raw: np.ndarray     # (K, N) unscaled slow increments dt^(1/a1) * xi
    rejected_at: np.ndarray  # (K,) macro step of overflow, -1 if accepted
    paths: np.ndarray        # (K,) path indices

    @property
    def accepted(self) -> np.ndarray:
        return self.rejected_at < 0


# Fixed tile of (paths x micro-columns) elements processed at a time.  Sized
# to keep the ~10 live float64 buffers inside the last-level cache; it must
# stay constant because the streaming drift-estimator reduction follows tile
# boundaries and changing it would change result bits.
_TILE = 131072


class _SlicedWorkspace:
    __slots__ = ("v", "w", "t1", "t2")

    def __init__(self, ws, L):
        self.v = ws.v[:, :L]
        self.w = ws.w[:, :L]
        self.t1 = ws.t1[:, :L]
        self.t2 = ws.t2[:, :L]


class _TileBuffers:
    """Scratch for one (B, C) tile of the micro pipeline."""

    def __init__(self, B, C):
        self.shape = (B, C)
        self.scratch_u64 = np.empty((B, C), dtype=np.uint64)
        self.u_ang = np.empty((B, C))
        self.u_exp = np.empty((B, C))
        self.xi = np.empty((B, C))
        self.ys = np.empty((B, C))
        self.ws = CmsWorkspace((B, C))


def _micro_tile(alpha2, scan, c_noise, w_ang, w_exp, y, bufs):
    """Angle/exponential word tiles (B, L) -> micro states (B, L) from y."""
    L = w_ang.shape[1]
    ua = words_to_uniforms_into(w_ang, bufs.scratch_u64[:, :L], bufs.u_ang[:, :L])
    ue = words_to_uniforms_into(w_exp, bufs.scratch_u64[:, :L], bufs.u_exp[:, :L])
    xi = _cms_core(alpha2, ua, ue, bufs.xi[:, :L],
                   _SlicedWorkspace(bufs.ws, L))
    return scan.run(y, c_noise, xi, out=bufs.ys[:, :L])


def run_pim_batch(system: SlowFastSystem, x0: float, y0: float,
                  sched: PimSchedule, master_seed: int,
                  path_indices) -> PimBatchResult:
    """Scan-lane PIM runner for a batch of scalar paths.

    Work proceeds in fixed-size tiles (several paths at once for short micro
    chains, column chunks of one path for long ones) purely for cache
    locality; the tiling is a function of the schedule alone, so identical
    inputs give identical bits no matter how paths are distributed.
    """
    if not _scan_capable(system, sched):
        raise ParameterError(
            "batched PIM requires a scalar system with declared linear fast drift")
    paths = np.asarray(list(path_indices), dtype=np.int64)
    K = len(paths)
    N = sched.n_macro
    M = sched.micro_count
    a1, a2 = system.noise1.alpha, system.noise2.alpha
    dt = sched.macro_dt
    burn = sched.burn_in
    denom = float(M - burn)

    g = 1.0 - system.fast_linear_rate * sched.micro_dt
    scan = _OuScan(g, min(M, _TILE))
    c_noise = system.sigma2 * sched.micro_dt ** (1.0 / a2)
    g0, g1, h = system.slow_g0, system.slow_g1, system.fast_h

    xs = np.empty((K, N + 1))
    slow_raw = np.empty((K, N))
    rejected_at = np.full(K, -1, dtype=np.int64)
    times = np.arange(N + 1) * dt
    slow_scale = dt ** (1.0 / a1)

    def record(xrow, yrow, rej, n, sl):
        bad = ~(np.isfinite(xrow) & np.isfinite(yrow))
        bad |= (np.abs(xrow) > REJECT_THRESHOLD) | (np.abs(yrow) > REJECT_THRESHOLD)
        fresh = bad & (rej < 0)
        if np.any(fresh):
            rej[fresh] = n + 1
        if np.any(bad):
            xrow[bad] = 0.0
            yrow[bad] = 0.0
        xs[sl, n + 1] = xrow

    if M <= _TILE:
        # several paths per tile, full micro chain in one sweep
        block = max(1, _TILE // M)
        for b0 in range(0, K, block):
            b1 = min(b0 + block, K)
            B = b1 - b0
            for i in range(B):
                slow_raw[b0 + i] = path_noise(
                    master_seed, ROLE_SLOW, int(paths[b0 + i]), a1, N)
            slow_raw[b0:b1] *= slow_scale
            streams = [
                RngStream(master_seed, pack_stream_id(ROLE_MICRO, int(paths[b0 + i])))
                for i in range(B)]
            bufs = _TileBuffers(B, M)
            words = np.empty((B, 2 * M), dtype=np.uint64)
            x = np.full(B, float(x0))
            y = np.full(B, float(y0))
            xs[b0:b1, 0] = x
            rej = rejected_at[b0:b1]
            for n in range(N):
                for i in range(B):
                    words[i] = streams[i].raw(2 * M)
                ys = _micro_tile(a2, scan, c_noise, words[:, :M], words[:, M:],
                                 y, bufs)
                if g1 is None:
                    a_est = np.asarray(g0(x), dtype=np.float64)
                else:
                    hsum = h(ys[:, burn:]).sum(axis=-1)
                    a_est = g0(x) + g1(x) * (hsum / denom)
                x = x + a_est * dt + system.sigma1 * slow_raw[b0:b1, n]
                y = ys[:, -1].copy() if sched.restart == RESTART_WARM \
                    else np.full(B, float(y0))
                record(x, y, rej, n, slice(b0, b1))
    else:
        # one path per tile, micro chain streamed in column chunks
        C = _TILE
        bufs = _TileBuffers(1, C)
        for idx in range(K):
            k = int(paths[idx])
            slow_raw[idx] = path_noise(master_seed, ROLE_SLOW, k, a1, N)
            slow_raw[idx] *= slow_scale
            stream = RngStream(master_seed, pack_stream_id(ROLE_MICRO, k))
            x = np.full(1, float(x0))
            y = np.full(1, float(y0))
            xs[idx, 0] = x
            rej = rejected_at[idx:idx + 1]
            for n in range(N):
                words = stream.raw(2 * M)
                hsum = 0.0
                for c0 in range(0, M, C):
                    c1 = min(c0 + C, M)
                    ys = _micro_tile(a2, scan, c_noise,
                                     words[None, c0:c1], words[None, M + c0:M + c1],
                                     y, bufs)
                    if g1 is not None and c1 > burn:
                        lo = max(0, burn - c0)
                        hsum += float(h(ys[0, lo:]).sum())
                    y = ys[:, -1].copy()
                if g1 is None:
                    a_est = np.asarray(g0(x), dtype=np.float64)
                else:
                    a_est = g0(x) + g1(x) * (hsum / denom)
                x = x + a_est * dt + system.sigma1 * slow_raw[idx, n]
                if sched.restart == RESTART_COLD:
                    y = np.full(1, float(y0))
                record(x, y, rej, n, slice(idx, idx + 1))
    return PimBatchResult(times=times, xs=xs, slow_raw=slow_raw,
                          rejected_at=rejected_at, paths=paths)


def _run_pim_generic(system, x0, y0, sched, master_seed, path_index):
    N = sched.n_macro
    d1 = system.dim_slow
    dt = sched.macro_dt
    a1 = system.noise1.alpha
    slow_raw = path_noise(master_seed, ROLE_SLOW, path_index, a1,
                          N * d1).reshape(N, d1) * dt ** (1.0 / a1)
    micro_rng = RngStream(master_seed, pack_stream_id(ROLE_MICRO, path_index))

    xs = np.empty((N + 1, d1))
    x = np.full(d1, float(x0)) if np.isscalar(x0) else np.asarray(x0, dtype=np.float64)
    y = y0
    xs[0] = x
    for n in range(N):
        try:
            batch = micro_solve(system, x, y, sched, micro_rng)
        except PathOverflowError as exc:
            raise PathOverflowError(
                "micro-solver overflowed", step=n, micro_step=exc.micro_step) from exc
        try:
            x = macro_step(x, batch, sched, slow_raw[n], system.sigma1)
        except PathOverflowError as exc:
            raise PathOverflowError(str(exc), step=n + 1) from exc
        if np.max(np.abs(x)) > REJECT_THRESHOLD:
            raise PathOverflowError("macro state exceeded rejection threshold",
                                    step=n + 1)
        y = batch.states[-1] if sched.restart == RESTART_WARM else y0
        xs[n + 1] = x
    return xs, slow_raw


def run_pim(system: SlowFastSystem, x0, y0, sched: PimSchedule,
            rng: RngStream):
    """Full projective-integration run of the slow variable.

    ``rng.stream_id`` identifies the path realization (ensembles use path
    index k; a lone run can pass any id).  Returns the slow trajectory and the
    unscaled slow-noise increments consumed, so an averaged run can be coupled
    to identical noise.  Warm restart seeds each micro chain with the previous
    chain's last state; cold restart resets it to ``y0``.
    """
    meta = {
        "scheme": "pim", "master_seed": rng.master_seed, "path": rng.stream_id,
        "macro_dt": sched.macro_dt, "micro_dt": sched.micro_dt,
        "micro_count": sched.micro_count, "restart": sched.restart,
        "burn_in": sched.burn_in, "system": system.name,
    }
    if _scan_capable(system, sched):
        res = run_pim_batch(system, x0, y0, sched, rng.master_seed, [rng.stream_id])
        if res.rejected_at[0] >= 0:
            raise PathOverflowError("macro state exceeded rejection threshold",
                                    step=int(res.rejected_at[0]))
        traj = Trajectory(res.times, res.xs[0], meta)
        return traj, res.slow_raw[0]
    xs, slow_raw = _run_pim_generic(system, x0, y0, sched, rng.master_seed,
                                    rng.stream_id)
    times = np.arange(sched.n_macro + 1) * sched.macro_dt
    return Trajectory(times, xs, meta), slow_raw
