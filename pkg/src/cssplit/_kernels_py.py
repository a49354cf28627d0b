"""Pure numpy implementation of the batched stability classifier.

Mirrors ``_kernels.pyx`` exactly in algorithm: companion-matrix eigenvalues
(LAPACK ``geev`` balances the matrix), one Newton polish per root, then
classification by root moduli.
"""

import numpy as np

STABLE, UNSTABLE, BOUNDARY = 0, 1, 2
DEGREE_DROP_TOL = 1e-14
# a unit root whose derivative is this small relative to the coefficients is
# treated as multiple: floating point splits an exact double root by ~sqrt(eps)
MULTIPLE_ROOT_TOL = 1e-6


def classify_points(a, b, z, tol=1e-9):
    """Classify every ``z`` for the recurrence ``sum_q (a[q] - b[q-1] z) mu^q = 0``.

    ``a`` has k+1 entries and ``b`` has k (both oldest level first). Returns an
    int8 array of STABLE / UNSTABLE / BOUNDARY codes with the shape of ``z``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    k = a.size - 1
    if b.size != k:
        raise ValueError("b must have one entry fewer than a")
    bshift = np.concatenate(([0.0], b))
    coeffs = a[None, :] - bshift[None, :] * z[:, None]  # (n, k+1), ascending powers
    lead = coeffs[:, k]
    scale = np.max(np.abs(coeffs), axis=1)
    drop = np.abs(lead) <= DEGREE_DROP_TOL * scale
    out = np.full(z.size, UNSTABLE, dtype=np.int8)
    ok = ~drop
    if not np.any(ok):
        return out.reshape(shape)
    c = coeffs[ok] / lead[ok, None]
    n = c.shape[0]
    comp = np.zeros((n, k, k), dtype=complex)
    comp[:, 0, :] = -c[:, k - 1 :: -1][:, :k]
    if k > 1:
        idx = np.arange(k - 1)
        comp[:, idx + 1, idx] = 1.0
    roots = np.linalg.eigvals(comp)  # (n, k)

    # one Newton step on the monic polynomial
    p = np.ones_like(roots)
    dp = np.zeros_like(roots)
    for q in range(k - 1, -1, -1):
        dp = dp * roots + p
        p = p * roots + c[:, q, None]
    safe = dp != 0
    roots = np.where(safe, roots - np.where(safe, p / np.where(safe, dp, 1.0), 0.0), roots)

    dp = np.zeros_like(roots)
    p = np.ones_like(roots)
    for q in range(k - 1, -1, -1):
        dp = dp * roots + p
        p = p * roots + c[:, q, None]

    mod = np.abs(roots)
    res = np.full(n, BOUNDARY, dtype=np.int8)
    unstable = np.any(mod > 1.0 + tol, axis=1)
    inside = np.all(mod < 1.0 - tol, axis=1)
    res[unstable] = UNSTABLE
    res[inside & ~unstable] = STABLE
    pending = np.flatnonzero(~unstable & ~inside)
    for i in pending:
        sel = mod[i] >= 1.0 - tol
        on = roots[i][sel]
        cscale = np.abs(c[i]).max()
        simple = bool(np.all(np.abs(dp[i][sel]) > MULTIPLE_ROOT_TOL * cscale))
        for s in range(on.size):
            for t in range(s + 1, on.size):
                if abs(on[s] - on[t]) <= 10.0 * tol:
                    simple = False
        res[i] = STABLE if simple else BOUNDARY
    out[ok] = res
    return out.reshape(shape)
