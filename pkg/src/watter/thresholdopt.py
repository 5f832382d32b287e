"""Gaussian mixture fitting of historical extra times and per-order thresholds.

The dispatch gain of holding an order with threshold ``theta`` is
``(p - theta) * F(theta)``: the slack left after dispatch times the chance that
a group at most ``theta`` turns up, ``F`` being the CDF of historical extra
times. :class:`ThresholdOptimizer` maximises it for each penalty ``p``.
"""
from __future__ import annotations

import json
import math

import numpy as np
from scipy.special import logsumexp, ndtr
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_1d_samples

VAR_FLOOR = 1e-4
INV_PHI = (math.sqrt(5) - 1) / 2


class GaussianMixtureEM(BaseEstimator):
    """One-dimensional Gaussian mixture fitted by expectation-maximisation.

    Parameters
    ----------
    n_components : int
    tol : float
        Stop when the per-iteration log-likelihood gain drops below ``tol``.
    max_iter : int
    var_floor : float
        Lower bound on component variances (s^2).
    n_init : int
        Number of k-means++ style restarts; the best final likelihood wins.
    random_state : int
        Seed for the initialisations.

    Attributes
    ----------
    weights_, means_, variances_ : ndarray of shape (n_components,)
    log_likelihood_ : list of float
        Total log-likelihood after each E-step of the winning restart.
    """

    def __init__(self, n_components=3, tol=1e-6, max_iter=500, var_floor=VAR_FLOOR, n_init=4,
                 random_state=0):
        self.n_components = n_components
        self.n_init = n_init
        self.tol = tol
        self.max_iter = max_iter
        self.var_floor = var_floor
        self.random_state = random_state

    def _init_means(self, x, rng):
        k = self.n_components
        centers = [x[rng.integers(len(x))]]
        for _ in range(1, k):
            d2 = np.min((x[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
            total = d2.sum()
            if total <= 0:
                centers.append(x[rng.integers(len(x))])
            else:
                centers.append(x[rng.choice(len(x), p=d2 / total)])
        return np.sort(np.asarray(centers, dtype=float))

    def _log_joint(self, x):
        var = self.variances_
        return (np.log(self.weights_)[None, :]
                - 0.5 * np.log(2 * np.pi * var)[None, :]
                - 0.5 * (x[:, None] - self.means_[None, :]) ** 2 / var[None, :])

    def fit(self, X, y=None):
        x = as_1d_samples(X)
        k = int(self.n_components)
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if len(x) < k:
            raise ValueError(f"need at least {k} samples, got {len(x)}")
        if np.any(x < 0):
            raise ValueError("extra-time samples must be non-negative")
        if np.ptp(x) == 0:
            # degenerate data: a single component at the common value
            self.weights_ = np.ones(1)
            self.means_ = np.array([x[0]])
            self.variances_ = np.array([self.var_floor])
            self.log_likelihood_ = [float(self._log_joint(x).sum())]
            self.n_iter_ = 0
            self.converged_ = True
            return self

        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(max(1, int(self.n_init))):
            run = self._run_em(x, self._init_means(x, rng))
            if best is None or run[-1][-1] > best[-1][-1]:
                best = run
        self.weights_, self.means_, self.variances_, self.converged_, self.log_likelihood_ = best
        self.n_iter_ = len(self.log_likelihood_)
        return self

    def _run_em(self, x, means):
        k = len(means)
        self.means_ = means
        self.variances_ = np.full(k, max(x.var(), self.var_floor))
        self.weights_ = np.full(k, 1.0 / k)
        lls, converged = [], False
        for it in range(int(self.max_iter)):
            lj = self._log_joint(x)
            norm = logsumexp(lj, axis=1)
            ll = float(norm.sum())
            if lls and ll - lls[-1] < self.tol:
                lls.append(ll)
                converged = True
                break
            lls.append(ll)
            resp = np.exp(lj - norm[:, None])
            nk = resp.sum(axis=0)
            live = nk > 1e-12
            # an emptied component keeps its mean and variance (zero weight)
            means = self.means_.copy()
            means[live] = (resp[:, live] * x[:, None]).sum(axis=0) / nk[live]
            var = self.variances_.copy()
            var[live] = (resp[:, live] * (x[:, None] - means[None, live]) ** 2).sum(axis=0) / nk[live]
            self.means_ = means
            self.variances_ = np.maximum(var, self.var_floor)
            w = np.where(live, nk, 0.0)
            self.weights_ = w / w.sum()
        return self.weights_, self.means_, self.variances_, converged, lls

    def score_samples(self, X):
        check_is_fitted(self, "means_")
        x = as_1d_samples(X, allow_empty=True)
        with np.errstate(divide="ignore"):
            return logsumexp(self._log_joint(x), axis=1)

    def pdf(self, x):
        return np.exp(self.score_samples(np.atleast_1d(x)))

    def cdf(self, x):
        """Mixture CDF, clipped to ``[0, 1]``."""
        if not hasattr(self, "means_"):
            check_is_fitted(self, "means_")
        if isinstance(x, (float, int)):
            # scalar path for the line search; numpy call overhead dominates otherwise
            v = sum(w * 0.5 * math.erfc((m - x) / s) for w, m, s in self._scalar_terms())
            return min(max(v, 0.0), 1.0)
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.means_) / np.sqrt(self.variances_)
        return np.clip((ndtr(z) * self.weights_).sum(axis=-1), 0.0, 1.0)

    def _scalar_terms(self):
        key = (self.means_, self.variances_, self.weights_)
        cached = getattr(self, "_terms_key", None)
        if cached is None or any(a is not b for a, b in zip(cached, key)):
            scale = np.sqrt(2.0 * self.variances_)
            self._terms = list(zip(self.weights_.tolist(), self.means_.tolist(), scale.tolist()))
            self._terms_key = key
        return self._terms

    def bic(self, X):
        x = as_1d_samples(X)
        n_params = 3 * len(self.means_) - 1
        return -2 * float(self.score_samples(x).sum()) + n_params * math.log(len(x))

    def to_dict(self) -> dict:
        check_is_fitted(self, "means_")
        return {"K": int(len(self.means_)), "weights": self.weights_.tolist(),
                "means": self.means_.tolist(), "variances": self.variances_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixtureEM":
        w = np.asarray(d["weights"], dtype=float)
        if len(w) != d["K"] or abs(w.sum() - 1) > 1e-9:
            raise ValueError("mixture weights must be K values summing to 1")
        var = np.asarray(d["variances"], dtype=float)
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        m = cls(n_components=int(d["K"]))
        m.weights_, m.means_, m.variances_ = w, np.asarray(d["means"], dtype=float), var
        m.log_likelihood_ = []
        return m

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "GaussianMixtureEM":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_em(samples, k=3, tol=1e-6, max_iter=500, seed=0, n_init=4) -> GaussianMixtureEM:
    return GaussianMixtureEM(n_components=k, tol=tol, max_iter=max_iter, n_init=n_init,
                             random_state=seed).fit(samples)


def select_k_bic(samples, ks=range(1, 6), seed=0) -> GaussianMixtureEM:
    """Mixture with the lowest BIC among ``ks`` components."""
    x = as_1d_samples(samples)
    fits = [fit_em(x, k=k, seed=seed) for k in ks if k <= len(x)]
    return min(fits, key=lambda m: m.bic(x))


def golden_max(f, a: float, b: float, tol: float) -> float:
    """Golden-section search for a maximiser of ``f`` on ``[a, b]``."""
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def optimal_theta(cdf, p: float, grid_points: int = 1024, n_refine: int = 5) -> float:
    """Maximiser of ``(p - theta) * cdf(theta)`` on ``[0, p]``.

    A grid scan locates candidate peaks; the best few local maxima are refined
    by golden-section search because the mixture objective can be multimodal.
    """
    if p <= 0:
        raise ValueError("penalty must be positive")
    grid = np.linspace(0.0, p, grid_points)
    vals = (p - grid) * cdf(grid)
    interior = np.r_[False, (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:]), False]
    peaks = list(np.flatnonzero(interior))
    top = int(np.argmax(vals))
    if top in (0, grid_points - 1):
        peaks.append(top)  # an endpoint is only worth refining when it leads the scan
    peaks = sorted(set(peaks), key=lambda i: -vals[i])[:n_refine]

    def f(t):
        return float((p - t) * cdf(t))

    best_t, best_v = float(grid[peaks[0]]), float(vals[peaks[0]])
    step = p / (grid_points - 1)
    for i in peaks:
        lo, hi = max(0.0, grid[i] - step), min(p, grid[i] + step)
        t = golden_max(f, lo, hi, tol=1e-9 * p)
        v = f(t)
        if v > best_v:
            best_t, best_v = t, v
    return best_t


class ThresholdOptimizer(BaseEstimator):
    """Fits the extra-time mixture, then predicts the optimal threshold per penalty.

    ``fit`` takes historical extra times (s); ``predict`` takes penalties (s)
    and returns thresholds (s).
    """

    def __init__(self, n_components=3, tol=1e-6, max_iter=500, random_state=0, grid_points=1024):
        self.n_components = n_components
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state
        self.grid_points = grid_points

    def fit(self, X, y=None):
        self.mixture_ = GaussianMixtureEM(self.n_components, self.tol, self.max_iter,
                                          random_state=self.random_state).fit(X)
        return self

    @classmethod
    def from_mixture(cls, mixture: GaussianMixtureEM, **kw) -> "ThresholdOptimizer":
        opt = cls(n_components=len(mixture.means_), **kw)
        opt.mixture_ = mixture
        return opt

    def predict(self, penalties):
        check_is_fitted(self, "mixture_")
        p = as_1d_samples(penalties, allow_empty=True)
        out = np.empty_like(p)
        for i, pi in enumerate(p):
            out[i] = optimal_theta(self.mixture_.cdf, pi, self.grid_points) if pi > 0 else 0.0
        return out

    def objective(self, theta, p):
        return (p - theta) * self.mixture_.cdf(theta)
