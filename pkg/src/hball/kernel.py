"""Coefficients and certified evaluation of the extended harmonic kernels.

The kernels R_alpha(x, y) = sum_k gamma_k(alpha) Z_k(x, y) on the unit ball
are defined for every real alpha by a two-branch coefficient formula; the
coefficients grow like k^(alpha+1).  This module computes the coefficients
(log domain, both branches), the coefficient ratios implementing the radial
differential operators, and truncated kernel sums with a rigorous tail bound
derived from |Z_k(x, y)| <= h_k (|x||y|)^k together with a certified bound on
the growth ratio of gamma_k h_k.

Series are summed adaptively and a `NonConvergent` error is raised when the
evaluation cap is reached before the tail bound certifies the requested
accuracy (in particular for |x||y| = 1, where the series need not converge).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NonConvergent
from .special import check_dimension, log_dim_spherical_harmonics

__all__ = [
    "CoeffProduct",
    "KernelCoefficient",
    "KernelEval",
    "KMAX_DEFAULT",
    "gamma_coeff",
    "gamma_ratio",
    "kernel_eval",
    "kernel_growth_exponent_probe",
    "log_gamma_coeffs",
]

# Hard cap on the truncation degree; beyond it evaluation is refused rather
# than returning an uncertified value.
KMAX_DEFAULT = 200_000

_BLOCK_MAX = 4096


def _is_upper_branch(n: int, alpha: float) -> bool:
    # the branch boundary alpha = -(1 + n/2) itself belongs to the lower branch
    return alpha > -(1.0 + 0.5 * n)


def log_gamma_coeffs(n: int, alpha: float, ks) -> np.ndarray:
    """log gamma_k(alpha), vectorized over degrees k >= 0.

    Upper branch (alpha > -(1+n/2)):  (1+n/2+alpha)_k / (n/2)_k.
    Lower branch (alpha <= -(1+n/2)): ((1)_k)^2 / ((1-(n/2+alpha))_k (n/2)_k).
    All Pochhammer arguments are positive on their branch, so everything is a
    difference of log-gamma values.
    """
    n = check_dimension(n)
    ks = np.asarray(ks, dtype=float)
    b = 0.5 * n
    if _is_upper_branch(n, alpha):
        a = 1.0 + 0.5 * n + alpha
        return (gammaln(a + ks) - gammaln(a)) - (gammaln(b + ks) - gammaln(b))
    c = 1.0 - (0.5 * n + alpha)
    one = gammaln(1.0 + ks)  # log (1)_k = log k!
    return 2.0 * one - (gammaln(c + ks) - gammaln(c)) - (gammaln(b + ks) - gammaln(b))


def _gamma_step_fractions(n: int, alpha: float) -> tuple[tuple[float, float], ...]:
    """gamma_{k+1}(alpha)/gamma_k(alpha) as a product of factors (k+a)/(k+b)."""
    if _is_upper_branch(n, alpha):
        return ((1.0 + 0.5 * n + alpha, 0.5 * n),)
    return ((1.0, 1.0 - (0.5 * n + alpha)), (1.0, 0.5 * n))


def _h_step_fractions(n: int) -> tuple[tuple[float, float], ...]:
    """h_{k+1}/h_k as a product of factors (k+a)/(k+b); valid for k >= 1."""
    return ((0.5 * n, 0.5 * n - 1.0), (float(n - 2), 1.0))


def _step_ratio_bound(fracs, k0: int) -> float:
    """Upper bound, valid for every k >= k0 >= 1, on prod (k+a)/(k+b).

    Each factor is monotone in k with limit 1, so it is bounded by
    max(1, value at k0).
    """
    out = 1.0
    for a, b in fracs:
        v = (k0 + a) / (k0 + b)
        if v > 1.0:
            out *= v
    return out


@dataclass(frozen=True)
class CoeffProduct:
    """A coefficient sequence c_k = prod_i gamma_k(alpha_i)^{e_i}, e_i integer.

    Kernel atoms are the single-factor case; images under the radial
    differential operators append a (s+t, +1), (s, -1) pair.  The
    representation is closed under those operators and cancels exactly,
    which is what makes the kernel-shift identity exact.
    """

    factors: tuple[tuple[float, int], ...] = ()

    @staticmethod
    def kernel(s: float) -> "CoeffProduct":
        return CoeffProduct(((float(s), 1),))

    def shifted(self, s: float, t: float) -> "CoeffProduct":
        """Coefficients after multiplying by gamma_k(s+t)/gamma_k(s)."""
        return CoeffProduct(self.factors + ((float(s + t), 1), (float(s), -1))).simplified()

    def simplified(self) -> "CoeffProduct":
        merged: dict[float, int] = {}
        for a, e in self.factors:
            merged[a] = merged.get(a, 0) + e
        kept = tuple(sorted((a, e) for a, e in merged.items() if e != 0))
        return CoeffProduct(kept)

    def single_kernel_parameter(self):
        """The alpha with c_k = gamma_k(alpha), if this is a plain kernel."""
        if len(self.factors) == 1 and self.factors[0][1] == 1:
            return self.factors[0][0]
        return None

    def growth_exponent(self) -> float:
        """g with c_k ~ const * k^g."""
        return sum(e * (a + 1.0) for a, e in self.factors)

    def log_values(self, n: int, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=float)
        out = np.zeros_like(ks)
        for a, e in self.factors:
            out = out + e * log_gamma_coeffs(n, a, ks)
        return out

    def step_fractions(self, n: int) -> tuple[tuple[float, float], ...]:
        fracs: list[tuple[float, float]] = []
        for a, e in self.factors:
            base = _gamma_step_fractions(n, a)
            for _ in range(abs(e)):
                if e > 0:
                    fracs.extend(base)
                else:
                    fracs.extend((q, p) for p, q in base)
        return tuple(fracs)


@dataclass(frozen=True)
class KernelCoefficient:
    """A single kernel coefficient gamma_k(alpha) (> 0 for all real alpha, k)."""

    alpha: float
    k: int
    value: float


def gamma_coeff(n: int, alpha: float, k: int) -> KernelCoefficient:
    """gamma_k(alpha), the degree-k coefficient of the extended kernel."""
    if k < 0 or k != int(k):
        raise ValueError("degree must be a nonnegative integer")
    value = float(np.exp(log_gamma_coeffs(n, alpha, np.array([float(k)]))[0]))
    return KernelCoefficient(float(alpha), int(k), value)


def gamma_ratio(n: int, s: float, t: float, k: int) -> float:
    """gamma_k(s+t)/gamma_k(s), the degree-k multiplier of the operator of
    order t based at s.  Computed in the log domain; behaves like k^t."""
    if k < 0 or k != int(k):
        raise ValueError("degree must be a nonnegative integer")
    if k == 0 or t == 0.0:
        return 1.0
    ks = np.array([float(k)])
    log_r = log_gamma_coeffs(n, s + t, ks) - log_gamma_coeffs(n, s, ks)
    return float(np.exp(log_r[0]))


class _ZonalAngular:
    """Streams the angular factors Q_k(u) with Z_k(x, y) = (|x||y|)^k Q_k(u).

    n = 2 uses the Chebyshev recurrence (the Gegenbauer lambda -> 0 limit is
    singular); n >= 3 uses the Gegenbauer recurrence with lambda = (n-2)/2.
    """

    def __init__(self, n: int, u: np.ndarray):
        self.n = n
        self.u = np.asarray(u, dtype=float)
        self.k = 0
        self._p1 = None  # degree k-1 base polynomial
        self._p2 = None  # degree k-2

    def block(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Next `size` rows (ks, Q) with Q of shape (size, len(u))."""
        n, u = self.n, self.u
        m = u.shape[0]
        out = np.empty((size, m))
        ks = np.arange(self.k, self.k + size)
        lam = 0.5 * (n - 2)
        for i, k in enumerate(ks):
            k = int(k)
            if k == 0:
                base = np.ones(m)
            elif k == 1:
                base = u.copy() if n == 2 else 2.0 * lam * u
            else:
                if n == 2:
                    base = 2.0 * u * self._p1 - self._p2
                else:
                    base = (2.0 * u * (k + lam - 1.0) * self._p1 - (k + 2.0 * lam - 2.0) * self._p2) / k
            self._p2, self._p1 = self._p1, base
            if k == 0:
                out[i] = 1.0
            elif n == 2:
                out[i] = 2.0 * base
            else:
                out[i] = ((2.0 * k + n - 2.0) / (n - 2.0)) * base
        self.k += size
        return ks, out


def _series_sum(
    n: int,
    coeff: CoeffProduct,
    u: np.ndarray,
    rho_sets: list[np.ndarray],
    *,
    tol_abs: float = 0.0,
    tol_rel: float = 0.0,
    kmax: int = KMAX_DEFAULT,
    min_terms: int = 0,
    matmul: bool = True,
):
    """Sum sum_k c_k rho^k Q_k(u) with a certified truncation-error bound.

    With matmul=True each rho set is a radius vector and the result is the
    full (len(rho), len(u)) product grid; with matmul=False the rho entries
    pair off with u elementwise.  Returns (values, tails, masses, K) where
    `masses` are the majorant sums sum c_k h_k rho^k used for relative
    tolerances and K is the last degree included.
    """
    if tol_abs <= 0.0 and tol_rel <= 0.0:
        raise ValueError("a positive tol_abs or tol_rel is required")
    u = np.asarray(u, dtype=float)
    rho_sets = [np.asarray(r, dtype=float) for r in rho_sets]
    rho_max = max((float(r.max()) if r.size else 0.0) for r in rho_sets)
    if rho_max >= 1.0:
        raise NonConvergent(f"series evaluated at |x||y| = {rho_max} >= 1")

    with np.errstate(divide="ignore"):
        log_rhos = [np.log(np.maximum(r, 0.0)) for r in rho_sets]

    fracs = coeff.step_fractions(n) + _h_step_fractions(n)
    angular = _ZonalAngular(n, u)

    if matmul:
        values = [np.zeros((r.shape[0], u.shape[0])) for r in rho_sets]
    else:
        values = [np.zeros(r.shape[0]) for r in rho_sets]
    masses = [np.zeros(r.shape[0]) for r in rho_sets]
    tails = [np.full(r.shape[0], np.inf) for r in rho_sets]

    block = 64
    k_next = 0
    while k_next <= kmax:
        size = min(block, kmax - k_next + 1)
        ks, q = angular.block(size)
        kf = ks.astype(float)
        log_c = coeff.log_values(n, kf)
        log_h = log_dim_spherical_harmonics(n, kf)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            for i, (rho, log_rho) in enumerate(zip(rho_sets, log_rhos)):
                # k log rho with the k = 0 convention 0 * log(0) = 0
                log_pow = np.where(kf[None, :] == 0.0, 0.0, kf[None, :] * log_rho[:, None])
                p = np.exp(log_c[None, :] + log_pow)  # c_k rho^k, (m, B)
                if matmul:
                    values[i] += p @ q
                else:
                    values[i] += np.einsum("mk,km->m", p, q)
                masses[i] += p @ np.exp(log_h)
        k_next += size
        block = min(2 * block, _BLOCK_MAX)

        k_used = k_next - 1
        if k_used < max(min_terms, 1):
            continue
        k0 = k_used + 1
        ratio = _step_ratio_bound(fracs, k0)
        log_first = float(coeff.log_values(n, np.array([float(k0)]))[0]) + float(
            log_dim_spherical_harmonics(n, np.array([k0]))[0]
        )
        done = True
        for i, (rho, log_rho) in enumerate(zip(rho_sets, log_rhos)):
            geo = rho * ratio
            with np.errstate(over="ignore", under="ignore"):
                head = np.exp(log_first + k0 * log_rho)
                tails[i] = np.where(geo < 1.0, head / np.maximum(1.0 - geo, 1e-300), np.inf)
            allow = tol_abs + tol_rel * masses[i]
            if not np.all(tails[i] <= allow):
                done = False
        if done:
            return values, tails, masses, k_used

    raise NonConvergent(
        f"series not certified within {kmax} terms (worst |x||y| = {rho_max})"
    )


def _unit_and_norm(p: np.ndarray) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        return np.zeros_like(p), 0.0
    return p / norm, norm


def eval_coeff_series_grid(
    n: int,
    coeff: CoeffProduct,
    units: np.ndarray,
    pole,
    radii_sets,
    *,
    tol_abs: float = 0.0,
    tol_rel: float = 0.0,
    kmax: int = KMAX_DEFAULT,
):
    """Evaluate sum_k c_k Z_k(x, pole) on product grids radii x units.

    `units` is an (M, n) array of unit vectors; each entry of `radii_sets`
    is a radius vector; the corresponding result has shape (m, M).  Sharing
    the angular tables across the radius sets is what makes near-boundary
    sweeps affordable.
    """
    pole = np.asarray(pole, dtype=float)
    units = np.asarray(units, dtype=float)
    pole_unit, pole_norm = _unit_and_norm(pole)
    radii_sets = [np.asarray(r, dtype=float) for r in radii_sets]
    if pole_norm == 0.0:
        # only the k = 0 term survives: the sum is identically c_0 = 1
        return [np.ones((r.shape[0], units.shape[0])) for r in radii_sets]
    u = np.clip(units @ pole_unit, -1.0, 1.0)
    rho_sets = [r * pole_norm for r in radii_sets]
    values, _, _, _ = _series_sum(
        n, coeff, u, rho_sets, tol_abs=tol_abs, tol_rel=tol_rel, kmax=kmax
    )
    return values


def eval_coeff_series_points(
    n: int,
    coeff: CoeffProduct,
    pole,
    points: np.ndarray,
    *,
    tol_abs: float = 0.0,
    tol_rel: float = 0.0,
    kmax: int = KMAX_DEFAULT,
    min_terms: int = 0,
):
    """Evaluate sum_k c_k Z_k(x, pole) at a flat (N, n) array of points.

    Returns (values, tails, degree_used).
    """
    pole = np.asarray(pole, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    pole_unit, pole_norm = _unit_and_norm(pole)
    norms = np.linalg.norm(points, axis=1)
    if pole_norm == 0.0:
        return np.ones(points.shape[0]), np.zeros(points.shape[0]), 0
    with np.errstate(invalid="ignore"):
        u = points @ pole_unit / np.where(norms > 0.0, norms, 1.0)
    u = np.clip(np.where(norms > 0.0, u, 1.0), -1.0, 1.0)
    rho = norms * pole_norm
    values, tails, _, k_used = _series_sum(
        n,
        coeff,
        u,
        [rho],
        tol_abs=tol_abs,
        tol_rel=tol_rel,
        kmax=kmax,
        min_terms=min_terms,
        matmul=False,
    )
    return values[0], tails[0], k_used


@dataclass(frozen=True)
class KernelEval:
    """A truncated kernel value with its certified truncation-error bound."""

    value: float
    degree_used: int
    tail_bound: float


def kernel_eval(
    n: int,
    alpha: float,
    x,
    y,
    tol: float,
    *,
    kmax: int = KMAX_DEFAULT,
    min_terms: int = 0,
) -> KernelEval:
    """R_alpha(x, y) summed until the tail bound drops below `tol`.

    Requires |x||y| < 1 (one argument may lie on the sphere when the other is
    interior); raises NonConvergent at |x||y| = 1 or when the cap `kmax` is
    reached first.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = check_dimension(n)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values, tails, k_used = eval_coeff_series_points(
        n,
        CoeffProduct.kernel(alpha),
        y,
        x[None, :],
        tol_abs=tol,
        kmax=kmax,
        min_terms=min_terms,
    )
    return KernelEval(float(values[0]), int(k_used), float(tails[0]))


def kernel_growth_exponent_probe(n, alpha, zeta, radii, *, tol_rel=1e-10):
    """|R_alpha(r zeta, zeta)| along the radial ray toward the kernel pole.

    `radii` must be strictly increasing inside [0, 1).  Returns a list of
    (r, |R_alpha(r zeta, zeta)|) pairs.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a nonempty 1-d sequence")
    if np.any(np.diff(radii) <= 0.0):
        raise ValueError("radii must be strictly increasing")
    if radii[0] < 0.0 or radii[-1] >= 1.0:
        raise ValueError("radii must lie in [0, 1)")
    zeta = np.asarray(zeta, dtype=float)
    unit, norm = _unit_and_norm(zeta)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("zeta must be a unit vector")
    values, _, _, _ = _series_sum(
        n,
        CoeffProduct.kernel(alpha),
        np.array([1.0]),
        [radii],
        tol_rel=tol_rel,
        tol_abs=1e-300,
        matmul=True,
    )
    mags = np.abs(values[0][:, 0])
    return [(float(r), float(v)) for r, v in zip(radii, mags)]
