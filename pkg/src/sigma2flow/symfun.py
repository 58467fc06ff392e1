"""Elementary symmetric functions of symmetric matrices and the Garding cones.

Everything here works on small dense symmetric matrices (the radial solvers
use closed diagonal forms instead and never route through this module).
Eigenvalues come from a hand-rolled cyclic Jacobi iteration so that results
are bit-reproducible across platforms; no LAPACK call sits on that path.  The
sweep loop is the one hot spot — cross-check harnesses push thousands of
matrices through it — so it compiles under the accelerator flag like the flow
kernels, with the same code running as plain Python when ``SIGMA2_NUMBA=0``.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from ._accel import jit

__all__ = [
    "jacobi_eigenvalues",
    "elementary_symmetric",
    "sigma_k",
    "sigma_k_minors",
    "sigma2_stable",
    "in_gamma_k_plus",
    "newton_transform",
    "dsigma2",
    "garding_pairing",
    "maclaurin_lower_bound",
]

#: relative off-diagonal mass at which the Jacobi sweep stops
JACOBI_TOL = 1e-13

#: relative threshold below which the cancellation-prone trace formula for
#: sigma_2 is replaced by the eigenvalue route
SIGMA2_CANCEL_TOL = 1e-8


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    return a


@jit
def _jacobi_sweeps(a: np.ndarray, tol: float, max_sweeps: int) -> None:
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = np.sqrt(scale)
    if scale == 0.0:
        return
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # abs(theta) past ~1e154 overflows theta**2; the rotation
                # angle is 1/(2 theta) to machine precision there anyway.
                if abs(theta) >= 1e150:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                apq_old = apq
                a[p, p] = a[p, p] - t * apq_old
                a[q, q] = a[q, q] + t * apq_old
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[p, k] = a[k, p]
                    a[k, q] = s * akp + c * akq
                    a[q, k] = a[k, q]


def jacobi_eigenvalues(a, tol: float = JACOBI_TOL, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run in a fixed row-major order over the strict upper triangle, so
    the result is deterministic.  Iteration stops once the off-diagonal
    Frobenius mass drops below ``tol`` relative to the matrix scale.
    Returns the eigenvalues sorted ascending.
    """
    a = _check_symmetric(a).copy()
    if a.shape[0] == 1:
        return a[0, :1].copy()
    _jacobi_sweeps(a, float(tol), int(max_sweeps))
    return np.sort(np.diag(a))


def elementary_symmetric(w) -> np.ndarray:
    """All elementary symmetric polynomials e_0..e_n of the entries of ``w``.

    Built by multiplying out prod_i (x + w_i) one root at a time; the update
    order is fixed, so this is deterministic.
    """
    w = np.asarray(w, dtype=float)
    e = np.zeros(w.size + 1)
    e[0] = 1.0
    for i, wi in enumerate(w):
        for j in range(i + 1, 0, -1):
            e[j] += wi * e[j - 1]
    return e


def sigma_k(a, k: int) -> float:
    """sigma_k of a symmetric matrix, or of a vector of eigenvalues.

    Matrix input goes through the Jacobi eigenvalue route.
    """
    a = np.asarray(a, dtype=float)
    w = a if a.ndim == 1 else jacobi_eigenvalues(a)
    if not 0 <= k <= w.size:
        raise ValueError(f"k={k} out of range for size {w.size}")
    return float(elementary_symmetric(w)[k])


def sigma_k_minors(a, k: int) -> float:
    """sigma_k as the sum of all k-by-k principal minors.

    Independent of the eigenvalue route; the two must agree to 1e-10 on
    well-scaled input, which the test-suite checks on random matrices.
    """
    a = _check_symmetric(a)
    n = a.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for size {n}")
    if k == 0:
        return 1.0
    if k == 1:
        return float(np.trace(a))
    total = 0.0
    for idx in combinations(range(n), k):
        sub = a[np.ix_(idx, idx)]
        total += float(np.linalg.det(sub))
    return total


def sigma2_stable(a) -> float:
    """sigma_2 via (sigma_1^2 - |A|_F^2)/2, with an eigenvalue fallback.

    The trace formula loses all significance when sigma_2 is tiny relative
    to sigma_1^2 (near the cone boundary); below ``SIGMA2_CANCEL_TOL``
    relative size the value is recomputed from eigenvalues.
    """
    a = _check_symmetric(a)
    s1 = float(np.trace(a))
    s2 = 0.5 * (s1 * s1 - float(np.sum(a * a)))
    if abs(s2) < SIGMA2_CANCEL_TOL * s1 * s1:
        s2 = sigma_k(a, 2)
    return s2


def in_gamma_k_plus(a, k: int) -> bool:
    """Strict Garding cone test: sigma_1, ..., sigma_k all positive.

    Zero is outside the cone — no tolerance is applied.
    """
    a = np.asarray(a, dtype=float)
    w = a if a.ndim == 1 else jacobi_eigenvalues(a)
    e = elementary_symmetric(w)
    return all(e[j] > 0.0 for j in range(1, k + 1))


def newton_transform(a) -> np.ndarray:
    """First Newton transform T_1(A) = sigma_1(A) I - A."""
    a = _check_symmetric(a)
    return float(np.trace(a)) * np.eye(a.shape[0]) - a


def dsigma2(a) -> np.ndarray:
    """Gradient of sigma_2 with respect to the matrix entries.

    d sigma_2 / dA_ij equals the Newton transform T_1(A)_ij; the test-suite
    verifies this against central finite differences.
    """
    return newton_transform(a)


def garding_pairing(a, b) -> tuple[float, float]:
    """The bilinear pairing sum_ij T_1(A)_ij B_ij and its lower bound.

    For A, B in the Gamma_2^+ cone the pairing dominates
    2 sigma_2(A)^{1/2} sigma_2(B)^{1/2}, with equality exactly when B is a
    positive multiple of A.  Returns ``(pairing, bound)``.

    Raises ValueError if either argument is outside Gamma_2^+.
    """
    a = _check_symmetric(a)
    b = _check_symmetric(b)
    if a.shape != b.shape:
        raise ValueError("matrices must have the same shape")
    if not in_gamma_k_plus(a, 2):
        raise ValueError("first argument is outside Gamma_2^+")
    if not in_gamma_k_plus(b, 2):
        raise ValueError("second argument is outside Gamma_2^+")
    pairing = float(np.sum(newton_transform(a) * b))
    bound = 2.0 * np.sqrt(sigma_k(a, 2)) * np.sqrt(sigma_k(b, 2))
    return pairing, float(bound)


def maclaurin_lower_bound(n: int) -> float:
    """Dimensional constant c_n = sqrt(n(n-1)/2) * (n-1)/n.

    For A in Gamma_2^+ the trace of the gradient of sigma_2^{1/2} is bounded
    below by c_n.  (The chain through the Newton-MacLaurin inequality in fact
    gives the sharper bound sqrt(n(n-1)/2); c_n is the weaker constant that
    downstream estimates consume, and it is what the tests assert.)
    """
    if n < 2:
        raise ValueError("need n >= 2")
    return float(np.sqrt(n * (n - 1) / 2.0) * (n - 1) / n)
