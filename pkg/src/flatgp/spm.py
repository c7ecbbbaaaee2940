"""Semi-parametric models: a kernel plus unpenalized basis functions.

Inference never forms the inverse of the possibly indefinite kernel matrix.
Every solve is block elimination on the bordered (saddle-point) system: the
basis matrix is orthonormalized, the kernel is restricted to the orthogonal
complement of its span, and a symmetric eigendecomposition of that restriction
is reused for means, variances, smoothers, and the Laurent coefficient B0.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateDesign,
    IncomparableModels,
    NegativeVariance,
    NotUnisolvent,
)
from .kernels import (
    Family,
    Kernel,
    dataclass_replace,
    kernel_cross,
    kernel_diag,
    kernel_matrix,
)
from .polybasis import (
    as_design,
    count_poly_dim,
    enumerate_monomials,
    monomial_matrix,
)
from .smoothers import SmootherMatrix

_RANK_TOL = 1e-10
_PINV_TOL = 1e-12
_VARIANCE_ERROR_TOL = 1e-8


@dataclass(frozen=True)
class SemiParametricModel:
    """Kernel (possibly zero or only conditionally positive-definite) plus basis.

    The parametric part is either all monomials of degree <= ``basis_degree``
    (-1 for an empty basis) or an explicit tuple of callables mapping an
    (n, d) array to n basis values.
    """

    kernel: Kernel
    d: int
    basis_degree: int = -1
    basis_functions: tuple = None

    def basis_size(self) -> int:
        if self.basis_functions is not None:
            return len(self.basis_functions)
        return count_poly_dim(self.basis_degree, self.d)

    def basis_matrix(self, X) -> np.ndarray:
        design = as_design(X)
        if design.d != self.d:
            raise ValueError(f"design dimension {design.d} != model dimension {self.d}")
        if self.basis_functions is not None:
            cols = [np.asarray(f(design.points), dtype=float) for f in self.basis_functions]
            return np.stack(cols, axis=1) if cols else np.zeros((design.n, 0))
        if self.basis_degree < 0:
            return np.zeros((design.n, 0))
        return monomial_matrix(design, enumerate_monomials(self.basis_degree, self.d))

    def scaled(self, factor: float) -> "SemiParametricModel":
        k = self.kernel
        newk = k if k.family is Family.ZERO else dataclass_replace(k, gamma=k.gamma * factor)
        return SemiParametricModel(newk, self.d, self.basis_degree, self.basis_functions)


def polyharmonic_spm(r: int, d: int) -> SemiParametricModel:
    """Polyharmonic splines of order r: kernel (-1)^r ||x-y||^(2r-1), basis deg < r."""
    if r < 1:
        raise ValueError("order must be >= 1")
    return SemiParametricModel(Kernel.polyharmonic(r), d=d, basis_degree=r - 1)


# ---------------------------------------------------------------------------
# saddle-point factorization


def _orthonormal_basis(V, n):
    """QR of the basis matrix; raises NotUnisolvent on rank deficiency."""
    m = V.shape[1]
    if m == 0:
        return np.zeros((n, 0)), np.zeros((0, 0))
    s = np.linalg.svd(V, compute_uv=False)
    if s[-1] <= _RANK_TOL * s[0]:
        raise NotUnisolvent(
            f"basis matrix has numerical rank below {m} on this design"
        )
    Q, R = np.linalg.qr(V)
    return Q, R


def _complement_basis(Q, n):
    m = Q.shape[1]
    if m == 0:
        return np.eye(n)
    P = np.eye(n) - Q @ Q.T
    U, _, _ = np.linalg.svd(P)
    return U[:, : n - m]


@dataclass(frozen=True)
class SaddleFactorization:
    """Shared pieces of the bordered solve: Q/R of V and the eigensystem of
    the kernel restricted to the complement of span(V)."""

    Q: np.ndarray
    R: np.ndarray
    C: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray

    @property
    def m(self) -> int:
        return self.Q.shape[1]

    @cached_property
    def modes(self) -> np.ndarray:
        """Complement eigenvectors lifted back to R^n (n x (n-m))."""
        return self.C @ self.evecs

    def solve(self, L, sigma2, g, h):
        """Solve [[L + sigma2 I, V], [V^T, 0]] (a; b) = (g; h) by elimination."""
        n = L.shape[0]
        if self.m:
            c = np.linalg.solve(self.R.T, h)
            a_basis = self.Q @ c
        else:
            a_basis = np.zeros(n)
        rhs = self.modes.T @ (g - L @ a_basis)
        if sigma2 > 0:
            w = rhs / (self.evals + sigma2)
        else:
            cut = _PINV_TOL * max(1.0, float(np.abs(self.evals).max(initial=0.0)))
            keep = np.abs(self.evals) > cut
            safe = np.where(keep, self.evals, 1.0)
            w = np.where(keep, rhs / safe, 0.0)
        a = a_basis + self.modes @ w
        if self.m:
            b = np.linalg.solve(self.R, self.Q.T @ (g - L @ a - sigma2 * a))
        else:
            b = np.zeros(0)
        return a, b


def factorize(L: np.ndarray, V: np.ndarray) -> SaddleFactorization:
    n = L.shape[0]
    Q, R = _orthonormal_basis(V, n)
    C = _complement_basis(Q, n)
    A = C.T @ L @ C
    A = 0.5 * (A + A.T)
    evals, evecs = np.linalg.eigh(A)
    return SaddleFactorization(Q=Q, R=R, C=C, evals=evals, evecs=evecs)


def project_out_basis(L: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """(I - QQ^T) L (I - QQ^T), symmetrized."""
    n = L.shape[0]
    P = np.eye(n) - Q @ Q.T
    out = P @ L @ P
    return 0.5 * (out + out.T)


def cpd_check(model: SemiParametricModel, X, tol: float = 1e-10) -> bool:
    """Is the kernel positive semi-definite on the complement of the basis span?"""
    design = as_design(X)
    V = model.basis_matrix(design)
    fac = factorize(kernel_matrix(model.kernel, design), V)
    w = fac.evals
    if w.size == 0:
        return True
    scale = float(np.abs(w).max())
    return bool(w.min() >= -tol * max(scale, 1.0))


# ---------------------------------------------------------------------------
# fitting and prediction


@dataclass(frozen=True)
class SpmFit:
    """An SPM fitted to data; prediction reuses the stored factorization."""

    model: SemiParametricModel
    design: object
    y: np.ndarray
    sigma2: float
    alpha: np.ndarray
    beta: np.ndarray
    factorization: SaddleFactorization

    def predict(self, query_points) -> np.ndarray:
        Xq = as_design(query_points)
        Lq = kernel_cross(self.model.kernel, Xq, self.design)
        out = Lq @ self.alpha
        if self.factorization.m:
            out = out + self.model.basis_matrix(Xq) @ self.beta
        return out

    def predict_var(self, query_points) -> np.ndarray:
        Xq = as_design(query_points)
        L = kernel_matrix(self.model.kernel, self.design)
        Lq = kernel_cross(self.model.kernel, Xq, self.design)
        Vq = self.model.basis_matrix(Xq)
        prior = kernel_diag(self.model.kernel, Xq)
        out = np.empty(Xq.n)
        for i in range(Xq.n):
            h = Vq[i] if self.factorization.m else np.zeros(0)
            a, b = self.factorization.solve(L, self.sigma2, Lq[i], h)
            quad = Lq[i] @ a + (Vq[i] @ b if self.factorization.m else 0.0)
            out[i] = prior[i] - quad
        scale = max(1.0, float(np.abs(prior).max(initial=0.0)))
        if np.any(out < -_VARIANCE_ERROR_TOL * scale):
            raise NegativeVariance(
                f"predictive variance {out.min():.3e} below round-off; "
                "check conditional positive-definiteness"
            )
        return np.maximum(out, 0.0)


def fit_spm(model: SemiParametricModel, X, y, sigma2: float) -> SpmFit:
    """Solve the bordered system [[L + sigma2 I, V], [V^T, 0]] (alpha; beta) = (y; 0)."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    design = as_design(X)
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ValueError("y must have one entry per design point")
    L = kernel_matrix(model.kernel, design)
    V = model.basis_matrix(design)
    fac = factorize(L, V)
    alpha, beta = fac.solve(L, sigma2, y, np.zeros(fac.m))
    return SpmFit(
        model=model,
        design=design,
        y=y,
        sigma2=float(sigma2),
        alpha=alpha,
        beta=beta,
        factorization=fac,
    )


def spm_posterior_mean(model, X, y, sigma2, query_points) -> np.ndarray:
    return fit_spm(model, X, y, sigma2).predict(query_points)


def spm_posterior_var(model, X, sigma2, query_points) -> np.ndarray:
    design = as_design(X)
    fit = fit_spm(model, design, np.zeros(design.n), sigma2)
    return fit.predict_var(query_points)


def spm_smoother(model: SemiParametricModel, X, sigma2: float) -> SmootherMatrix:
    """M = QQ^T + Ltilde (Ltilde + sigma2 I)^{-1} on the complement of span(V)."""
    design = as_design(X)
    L = kernel_matrix(model.kernel, design)
    V = model.basis_matrix(design)
    fac = factorize(L, V)
    lam = fac.evals
    if sigma2 > 0:
        filt = lam / (lam + sigma2)
    else:
        cut = _PINV_TOL * max(1.0, float(np.abs(lam).max(initial=0.0)))
        filt = np.where(np.abs(lam) > cut, 1.0, 0.0)
    modes = fac.modes
    M = modes @ (filt[:, None] * modes.T)
    if fac.m:
        M = M + fac.Q @ fac.Q.T
    return SmootherMatrix(0.5 * (M + M.T))


def laurent_b0(L: np.ndarray, V: np.ndarray, sigma2: float) -> np.ndarray:
    """Leading Laurent coefficient of (VV^T + eps (L + sigma2 I))^{-1}.

    The pseudo-inverse of L + sigma2 I restricted to the complement of
    span(V); satisfies V^T B0 = 0 by construction.
    """
    L = np.asarray(L, dtype=float)
    fac = factorize(L, np.asarray(V, dtype=float))
    denom = fac.evals + sigma2
    cut = _PINV_TOL * max(1.0, float(np.abs(denom).max(initial=0.0)))
    keep = np.abs(denom) > cut
    inv = np.where(keep, 1.0 / np.where(keep, denom, 1.0), 0.0)
    modes = fac.modes
    B0 = modes @ (inv[:, None] * modes.T)
    return 0.5 * (B0 + B0.T)


def smoothing_spline_fit(X, y, p: int, eta: float) -> SpmFit:
    """Univariate smoothing spline of order p with penalty eta.

    Solves [[(-1)^p D^(2p-1) + eta I, V_{<p}], [V_{<p}^T, 0]] (alpha; beta) =
    (y; 0); eta = 0 is the polyharmonic interpolation system.
    """
    design = as_design(X)
    if design.d != 1:
        raise ValueError("smoothing splines are univariate; use polyharmonic_spm for d > 1")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if design.n <= p:
        raise DegenerateDesign(f"need more than p={p} points")
    dists = np.abs(design.points[:, 0][:, None] - design.points[:, 0][None, :])
    if np.any(dists[~np.eye(design.n, dtype=bool)] == 0.0):
        raise DegenerateDesign("design points must be distinct")
    model = polyharmonic_spm(p, 1)
    return fit_spm(model, design, y, eta)


# ---------------------------------------------------------------------------
# structural checks used by equivalence machinery


def require_comparable(a: SemiParametricModel, b: SemiParametricModel):
    if a.basis_size() != b.basis_size():
        raise IncomparableModels(
            f"parametric dimensions differ: {a.basis_size()} vs {b.basis_size()}"
        )


def spm_filter_eigenvalues(model: SemiParametricModel, X):
    """Basis size and unit-gain eigenvalues driving the smoother's filter.

    The trace of the smoother of ``model`` rescaled to absolute gain g at
    noise sigma2 is ``m + sum g lam / (g lam + sigma2)``; evaluating that
    curve is stable at any gain, unlike re-projecting a rescaled kernel.
    """
    design = as_design(X)
    unit = model.scaled(1.0 / model.kernel.gamma)
    L = kernel_matrix(unit.kernel, design)
    V = model.basis_matrix(design)
    fac = factorize(L, V)
    lam = np.maximum(fac.evals, 0.0)
    return fac.m, lam


def spline_dof(X, r: int, eta: float, d: int = 1) -> float:
    """Degrees of freedom p + sum lam_i / (lam_i + eta) of a spline smoother."""
    design = as_design(X)
    model = polyharmonic_spm(r, design.d)
    L = kernel_matrix(model.kernel, design)
    V = model.basis_matrix(design)
    fac = factorize(L, V)
    lam = np.maximum(fac.evals, 0.0)
    if eta == 0:
        return float(fac.m + np.sum(lam > 0))
    return float(fac.m + np.sum(lam / (lam + eta)))
