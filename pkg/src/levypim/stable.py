"""Symmetric alpha-stable variates, increments and densities.

The sampler realizes the law with characteristic function ``exp(-|u|^alpha)``
using the Chambers-Mallows-Stuck transform of one uniform angle and one unit
exponential.  ``alpha = 2`` is the Gaussian endpoint (variance 2); ``alpha = 1``
is Cauchy, handled by its closed form ``tan`` branch because the general
formula has a removable singularity there.

Densities are evaluated by deterministic Fourier inversion with a refinement
check, never by sampling, so they can serve as an independent oracle for the
sampler and for effective-drift quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fastmath as fm
from .errors import NumericalError, ParameterError
from .rng import RngStream, words_to_uniforms

_ALPHA_ONE_EPS = 1e-10


@dataclass(frozen=True)
class StableSpec:
    """Stability index and scale of one symmetric stable noise source."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ParameterError(f"alpha must be in (0, 2], got {self.alpha}")
        if not self.scale >= 0.0:
            raise ParameterError(f"scale must be nonnegative, got {self.scale}")


class CmsWorkspace:
    """Reusable scratch buffers for the CMS transform (hot-loop allocation
    control; one workspace per (shape,) reused across calls)."""

    def __init__(self, shape):
        self.shape = shape
        self.v = np.empty(shape)
        self.w = np.empty(shape)
        self.t1 = np.empty(shape)
        self.t2 = np.empty(shape)


def _cms_core(alpha: float, u_angle, u_exp, out, ws: CmsWorkspace):
    """Single source of truth for the CMS arithmetic.

    The exact operation sequence is fixed here so that every consumer of a
    stream (public samplers, micro-solver, ensemble runner) maps identical
    uniforms to bit-identical variates.
    """
    v = np.subtract(u_angle, 0.5, out=ws.v)
    v *= np.pi
    if abs(alpha - 1.0) < _ALPHA_ONE_EPS:
        return np.tan(v, out=out)

    w = fm.log(u_exp, out=ws.w)
    np.negative(w, out=w)
    if alpha == 2.0:
        # sin(2V)/cos(V)^(1/2) * (cos(-V)/W)^(-1/2) = 2 sin(V) sqrt(W)
        x = fm.sin(v, out=out)
        x *= 2.0
        x *= np.sqrt(w, out=w)
        return x

    # X = sin(aV) * cos(V)^(-1/a) * (cos((1-a)V)/W)^((1-a)/a), written with
    # exp/log so the two powers cost two vector passes instead of libm pow.
    av = np.multiply(v, alpha, out=ws.t1)
    s = fm.sin(av, out=out)
    lw = fm.log(w, out=w)
    lc = fm.cos(v, out=ws.t1)
    fm.log(lc, out=lc)
    a1v = np.multiply(v, 1.0 - alpha, out=ws.t2)
    lc2 = fm.cos(a1v, out=a1v)
    fm.log(lc2, out=lc2)
    lc2 -= lw
    lc2 *= (1.0 - alpha) / alpha
    lc *= -1.0 / alpha
    lc += lc2
    s *= fm.exp(lc, out=lc)
    return s


def standard_from_uniforms(alpha: float, u_angle, u_exp, out=None):
    """CMS transform: uniforms in (0,1) -> standard symmetric stable variates.

    ``u_angle`` supplies the uniform angle V = pi*(u - 1/2); ``u_exp`` the unit
    exponential W = -log(u).  Vectorized; both inputs must have equal shape.
    """
    u_angle = np.asarray(u_angle, dtype=np.float64)
    u_exp = np.asarray(u_exp, dtype=np.float64)
    if u_angle.shape != u_exp.shape:
        raise ParameterError("angle and exponential uniform arrays must match in shape")
    if out is None:
        out = np.empty(u_angle.shape)
    return _cms_core(alpha, u_angle, u_exp, out, CmsWorkspace(u_angle.shape))


def standard_from_words(alpha: float, words: np.ndarray) -> np.ndarray:
    """Raw stream words -> stable variates; first half angles, second half exps."""
    if words.size % 2:
        raise ParameterError("word count must be even (angle + exponential per variate)")
    n = words.size // 2
    u = words_to_uniforms(words)
    return standard_from_uniforms(alpha, u[:n], u[n:])


def sample_standard_stable(spec: StableSpec, rng: RngStream, size=None):
    """Draw variates with characteristic function exp(-|u|^alpha).

    With ``size=None`` returns a scalar; otherwise a 1-d array of ``size``
    samples consuming ``2*size`` stream words (angles first, then
    exponentials).  The spec's ``scale`` is deliberately not applied here;
    this is the standard law.
    """
    n = 1 if size is None else int(size)
    if n < 0:
        raise ParameterError(f"size must be nonnegative, got {size}")
    x = standard_from_words(spec.alpha, rng.raw(2 * n))
    if size is None:
        return float(x[0])
    return x


def stable_increment(spec: StableSpec, dt: float, rng: RngStream, size=None):
    """Increment of the scaled stable process over time ``dt``.

    Self-similarity: an increment over dt is distributed as ``dt**(1/alpha)``
    times a standard variate, multiplied by the spec's scale.
    """
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    factor = spec.scale * dt ** (1.0 / spec.alpha)
    x = sample_standard_stable(spec, rng, size=size)
    return factor * x


def empirical_cf(samples: np.ndarray, u_grid) -> np.ndarray:
    """Empirical characteristic function (1/N) sum exp(i*u*X) on a grid of u."""
    samples = np.asarray(samples, dtype=np.float64)
    u_grid = np.atleast_1d(np.asarray(u_grid, dtype=np.float64))
    out = np.empty(u_grid.shape, dtype=np.complex128)
    for j, u in enumerate(u_grid):
        ux = u * samples
        out[j] = complex(np.mean(np.cos(ux)), np.mean(np.sin(ux)))
    return out


def _half_line_nodes(cutoff: float, n: int):
    # Composite Simpson on [0, 1] + [1, cutoff]: the integrand's |xi|^alpha
    # kink at 0 limits accuracy, so the first unit interval gets its own panel
    # with the same node count.
    if cutoff <= 1.0:
        return (np.linspace(0.0, cutoff, 2 * n + 1),)
    return (np.linspace(0.0, 1.0, 2 * n + 1), np.linspace(1.0, cutoff, 2 * n + 1))


def _simpson(values: np.ndarray, h: float) -> np.ndarray:
    # values: (..., 2n+1) panel evaluations
    acc = values[..., 0] + values[..., -1]
    acc = acc + 4.0 * values[..., 1::2].sum(axis=-1)
    acc = acc + 2.0 * values[..., 2:-1:2].sum(axis=-1)
    return acc * (h / 3.0)


def _inversion_integral(alpha: float, w: float, x: np.ndarray, n: int) -> np.ndarray:
    cutoff = (40.0 * w) ** (1.0 / alpha)
    total = np.zeros(x.shape)
    chunk = max(8, 2_000_000 // (2 * n + 1))  # bound the outer-product workspace
    for nodes in _half_line_nodes(cutoff, n):
        decay = np.exp(-np.abs(nodes) ** alpha / w)
        h = nodes[1] - nodes[0]
        for lo in range(0, x.size, chunk):
            xs = x[lo:lo + chunk]
            phase = np.cos(np.outer(xs, nodes))
            phase *= decay
            total[lo:lo + chunk] += _simpson(phase, h)
    return total / np.pi


def stable_density(spec: StableSpec, x, weight_exponent: float, nodes: int = 4096,
                   rel_tol: float = 1e-8):
    """Density by Fourier inversion of ``exp(-|xi|**alpha / w)``.

    Evaluates ``rho(x) = (1/2pi) * Int exp(i x xi) exp(-|xi|^alpha / w) dxi``
    by composite Simpson quadrature truncated where the transform falls below
    1e-17, then repeats at doubled resolution; the two estimates must agree to
    ``rel_tol`` or a :class:`NumericalError` carrying both is raised.  With
    ``weight_exponent = alpha`` this is the invariant density of the fast
    process ``dY = -Y dt + dL^alpha``.

    Tiny negative values from quadrature (>= -1e-10) clamp to zero.
    """
    if weight_exponent <= 0.0:
        raise ParameterError(f"weight_exponent must be positive, got {weight_exponent}")
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(xs)):
        raise ParameterError("density evaluation points must be finite")

    coarse = _inversion_integral(spec.alpha, weight_exponent, xs, nodes // 2)
    fine = _inversion_integral(spec.alpha, weight_exponent, xs, nodes)
    gap = np.max(np.abs(fine - coarse))
    tol = rel_tol * max(1.0, float(np.max(np.abs(fine))))
    if gap > tol:
        raise NumericalError(
            "density quadrature refinement did not converge",
            estimates=(coarse.tolist(), fine.tolist()),
        )
    if np.any(fine < -1e-10):
        raise NumericalError(
            "density quadrature produced a significantly negative value",
            estimates=fine.tolist(),
        )
    np.clip(fine, 0.0, None, out=fine)
    return float(fine[0]) if scalar else fine
