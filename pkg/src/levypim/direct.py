"""Direct (stiff) Euler-Maruyama integration of the full coupled pair.

This is the baseline solver: it resolves the fast scale explicitly, so its
step must satisfy ``dt << epsilon``.  The slow and fast noises come from
disjoint per-path streams, and the raw slow increments are recorded so an
averaged path can be driven by identical noise for strong-error comparisons.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ParameterError, PathOverflowError
from .rng import ROLE_FAST, ROLE_SLOW, RngStream, pack_stream_id, words_to_uniforms
from .stable import standard_from_uniforms
from .systems import REJECT_THRESHOLD, SlowFastSystem, Trajectory


def steps_on_grid(T: float, dt: float) -> int:
    """Number of steps of the grid {0, dt, ..., floor(T/dt)*dt}."""
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if T < dt:
        raise ParameterError(f"horizon T={T} shorter than one step dt={dt}")
    return int(np.floor(T / dt + 1e-9))


def em_step(state, drift_value, dt: float, noise_increment, sigma: float):
    """One Euler-Maruyama update: state + drift*dt + sigma*noise."""
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    state = np.asarray(state, dtype=np.float64)
    drift_value = np.asarray(drift_value, dtype=np.float64)
    noise_increment = np.asarray(noise_increment, dtype=np.float64)
    if state.shape != drift_value.shape or state.shape != noise_increment.shape:
        raise ParameterError(
            f"dimension mismatch: state {state.shape}, drift {drift_value.shape}, "
            f"noise {noise_increment.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = state + drift_value * dt + sigma * noise_increment
    if not np.all(np.isfinite(out)):
        raise PathOverflowError("Euler-Maruyama step produced a non-finite state")
    return float(out) if out.ndim == 0 else out


def path_noise(master_seed: int, role: int, path_index: int, alpha: float,
               n: int) -> np.ndarray:
    """``n`` standard stable variates from the (role, path) stream.

    Consumes ``2n`` words in block layout (n angle words, then n exponential
    words), the canonical layout used by every solver in this package.
    """
    stream = RngStream(master_seed, pack_stream_id(role, path_index))
    u = words_to_uniforms(stream.raw(2 * n))
    return standard_from_uniforms(alpha, u[:n], u[n:])


def _check_rows(x, y, rejected_at, step):
    # mark newly overflowed paths and freeze them at 0 so the batch stays finite
    bad = ~(np.isfinite(x) & np.isfinite(y))
    bad |= (np.abs(x) > REJECT_THRESHOLD) | (np.abs(y) > REJECT_THRESHOLD)
    fresh = bad & (rejected_at < 0)
    if np.any(fresh):
        rejected_at[fresh] = step
    if np.any(bad):
        x[bad] = 0.0
        y[bad] = 0.0


def simulate_full_batch(system: SlowFastSystem, x0: float, y0: float, dt: float,
                        n_steps: int, master_seed: int, path_indices):
    """Direct solver for a batch of scalar paths sharing one parameter set.

    Returns ``(xs, ys, slow_raw, rejected_at)`` where ``xs``/``ys`` have shape
    (paths, n_steps+1), ``slow_raw`` holds the unscaled slow increments
    dt^(1/alpha1) * xi consumed by each path, and ``rejected_at[k]`` is the
    step at which path k overflowed (-1 if it never did).
    """
    if not (system.scalar and system.vectorized):
        raise ParameterError("batch direct solver requires a scalar vectorized system")
    paths = np.asarray(list(path_indices), dtype=np.int64)
    K = len(paths)
    a1, a2 = system.noise1.alpha, system.noise2.alpha
    eps = system.epsilon

    slow_raw = np.empty((K, n_steps))
    fast_std = np.empty((K, n_steps))
    for i, k in enumerate(paths):
        slow_raw[i] = path_noise(master_seed, ROLE_SLOW, int(k), a1, n_steps)
        fast_std[i] = path_noise(master_seed, ROLE_FAST, int(k), a2, n_steps)
    slow_raw *= dt ** (1.0 / a1)
    fast_factor = system.sigma2 * (dt / eps) ** (1.0 / a2)

    xs = np.empty((K, n_steps + 1))
    ys = np.empty((K, n_steps + 1))
    x = np.full(K, float(x0))
    y = np.full(K, float(y0))
    xs[:, 0] = x
    ys[:, 0] = y
    rejected_at = np.full(K, -1, dtype=np.int64)
    inv_eps_dt = dt / eps
    for n in range(n_steps):
        xn = x + system.f1(x, y) * dt + system.sigma1 * slow_raw[:, n]
        y = y + system.f2(x, y) * inv_eps_dt + fast_factor * fast_std[:, n]
        x = xn
        _check_rows(x, y, rejected_at, n + 1)
        xs[:, n + 1] = x
        ys[:, n + 1] = y
    return xs, ys, slow_raw, rejected_at


def _simulate_full_generic(system, x0, y0, dt, n_steps, master_seed, path_index):
    # arbitrary dimensions / non-vectorized drifts, one path at a time
    d1, d2 = system.dim_slow, system.dim_fast
    a1, a2 = system.noise1.alpha, system.noise2.alpha
    slow_raw = path_noise(master_seed, ROLE_SLOW, path_index, a1,
                          n_steps * d1).reshape(n_steps, d1) * dt ** (1.0 / a1)
    fast_std = path_noise(master_seed, ROLE_FAST, path_index, a2,
                          n_steps * d2).reshape(n_steps, d2)
    fast_factor = system.sigma2 * (dt / system.epsilon) ** (1.0 / a2)

    xs = np.empty((n_steps + 1, d1))
    ys = np.empty((n_steps + 1, d2))
    x = np.full(d1, float(x0)) if np.isscalar(x0) else np.asarray(x0, dtype=np.float64)
    y = np.full(d2, float(y0)) if np.isscalar(y0) else np.asarray(y0, dtype=np.float64)
    xs[0], ys[0] = x, y
    inv_eps_dt = dt / system.epsilon
    for n in range(n_steps):
        f1v = np.asarray(system.f1(x, y), dtype=np.float64).reshape(d1)
        f2v = np.asarray(system.f2(x, y), dtype=np.float64).reshape(d2)
        x = x + f1v * dt + system.sigma1 * slow_raw[n]
        y = y + f2v * inv_eps_dt + fast_factor * fast_std[n]
        ok = np.all(np.isfinite(x)) and np.all(np.isfinite(y)) \
            and np.max(np.abs(x)) <= REJECT_THRESHOLD \
            and np.max(np.abs(y)) <= REJECT_THRESHOLD
        if not ok:
            raise PathOverflowError("direct solver state overflowed", step=n + 1)
        xs[n + 1], ys[n + 1] = x, y
    return xs, ys, slow_raw


def simulate_full(system: SlowFastSystem, x0, y0, dt: float, T: float,
                  rng: RngStream):
    """Euler-Maruyama on the full stiff pair; returns (slow, fast) trajectories.

    The realization is identified by ``rng``: its ``stream_id`` is taken as the
    path index, and disjoint slow/fast substreams are derived from it, so the
    independence of the two driving processes holds by construction.  Raises
    :class:`PathOverflowError` (with the step index) if the state leaves the
    admissible range.
    """
    n_steps = steps_on_grid(T, dt)
    if dt > system.epsilon / 10.0:
        warnings.warn(
            f"dt={dt} does not resolve the fast scale (epsilon={system.epsilon}); "
            "recommend dt <= epsilon/10", stacklevel=2)
    times = np.arange(n_steps + 1) * dt
    meta = {
        "scheme": "direct-em", "master_seed": rng.master_seed,
        "path": rng.stream_id, "dt": dt, "T": T,
        "epsilon": system.epsilon, "system": system.name,
    }
    if system.scalar and system.vectorized:
        xs, ys, _, rejected_at = simulate_full_batch(
            system, x0, y0, dt, n_steps, rng.master_seed, [rng.stream_id])
        if rejected_at[0] >= 0:
            raise PathOverflowError("direct solver state overflowed",
                                    step=int(rejected_at[0]))
        slow = Trajectory(times, xs[0], dict(meta, component="slow"))
        fast = Trajectory(times, ys[0], dict(meta, component="fast"))
        return slow, fast
    xs, ys, _ = _simulate_full_generic(
        system, x0, y0, dt, n_steps, rng.master_seed, rng.stream_id)
    return (Trajectory(times, xs, dict(meta, component="slow")),
            Trajectory(times, ys, dict(meta, component="fast")))


def probe_contraction(system: SlowFastSystem, trials: int, rng: RngStream,
                      box: float = 10.0):
    """Randomized check of the one-sided contraction of f2 in y.

    Samples (x, y1, y2) uniformly in [-box, box] and tests
    ``<f2(x,y1)-f2(x,y2), y1-y2> <= -beta |y1-y2|^2 + 1e-10`` on every trial.
    Returns ``(all_passed, worst_ratio)`` with the worst observed value of
    ``<df, dy>/|dy|^2``; never raises on failure.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    d1, d2 = system.dim_slow, system.dim_fast
    u = rng.uniforms(trials * (d1 + 2 * d2)).reshape(trials, d1 + 2 * d2)
    pts = (u - 0.5) * (2.0 * box)
    worst = -np.inf
    ok = True
    for i in range(trials):
        x = pts[i, :d1]
        y1 = pts[i, d1:d1 + d2]
        y2 = pts[i, d1 + d2:]
        dy = y1 - y2
        norm2 = float(dy @ dy)
        if norm2 == 0.0:
            continue
        df = np.asarray(system.f2(x, y1), dtype=np.float64).reshape(d2) \
            - np.asarray(system.f2(x, y2), dtype=np.float64).reshape(d2)
        inner = float(df @ dy)
        worst = max(worst, inner / norm2)
        if inner > -system.beta * norm2 + 1e-10:
            ok = False
    return ok, worst
