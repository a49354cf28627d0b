# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched stability classifier.

Same classification as ``_kernels_py``; the eigenvalues come from a scaled
Hessenberg QR iteration (``zgebal`` + ``zhseqr``) on the companion matrix,
which skips the general-matrix reduction ``geev`` performs.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport zgebal, zhseqr

cnp.import_array()

DEF MAXK = 16

cdef enum:
    STABLE = 0
    UNSTABLE = 1
    BOUNDARY = 2

cdef double DEGREE_DROP_TOL = 1e-14
cdef double MULTIPLE_ROOT_TOL = 1e-6



cdef inline double cabs_(double complex x) nogil:
    cdef double re = fabs(x.real), im = fabs(x.imag), t
    if re < im:
        re, im = im, re
    if re == 0.0:
        return 0.0
    t = im / re
    return re * (1.0 + t * t) ** 0.5


cdef signed char _classify_one(int k, const double *a, const double *b, double complex z,
                               double tol, double complex *comp, double complex *w,
                               double complex *work, int lwork, double *rwork) noexcept nogil:
    cdef double complex coeff[MAXK + 1]
    cdef double complex lead, p, dp, r
    cdef double scale = 0.0, m
    cdef int q, i, j, info = 0, n = k, one = 1, ilo = 1, ihi = k
    cdef bint inside = True, simple = True
    cdef char jobs = b'S', jobe = b'E', compn = b'N'

    for q in range(k + 1):
        coeff[q] = a[q] - (b[q - 1] * z if q > 0 else 0.0)
        m = cabs_(coeff[q])
        if m > scale:
            scale = m
    lead = coeff[k]
    if cabs_(lead) <= DEGREE_DROP_TOL * scale:
        return UNSTABLE
    for q in range(k + 1):
        coeff[q] = coeff[q] / lead

    # column-major companion matrix of the monic polynomial
    for i in range(k * k):
        comp[i] = 0.0
    for j in range(k):
        comp[j * k] = -coeff[k - 1 - j]
    for i in range(k - 1):
        comp[(i + 1) + i * k] = 1.0
    # the companion matrix is already upper Hessenberg: scale it (diagonal
    # similarity keeps the structure) and go straight to the QR iteration
    zgebal(&jobs, &n, comp, &n, &ilo, &ihi, rwork, &info)
    if info != 0:
        return BOUNDARY
    zhseqr(&jobe, &compn, &n, &ilo, &ihi, comp, &n, w, NULL, &one, work, &lwork, &info)
    if info != 0:
        return BOUNDARY

    for i in range(k):
        r = w[i]
        p = 1.0
        dp = 0.0
        for q in range(k - 1, -1, -1):
            dp = dp * r + p
            p = p * r + coeff[q]
        if dp != 0:
            r = r - p / dp
        w[i] = r
        m = cabs_(r)
        if m > 1.0 + tol:
            return UNSTABLE
        if m >= 1.0 - tol:
            inside = False
    if inside:
        return STABLE
    scale = 0.0
    for q in range(k + 1):
        m = cabs_(coeff[q])
        if m > scale:
            scale = m
    for i in range(k):
        if cabs_(w[i]) < 1.0 - tol:
            continue
        r = w[i]
        p = 1.0
        dp = 0.0
        for q in range(k - 1, -1, -1):
            dp = dp * r + p
            p = p * r + coeff[q]
        if cabs_(dp) <= MULTIPLE_ROOT_TOL * scale:
            simple = False
        for j in range(i + 1, k):
            if cabs_(w[j]) >= 1.0 - tol and cabs_(w[i] - w[j]) <= 10.0 * tol:
                simple = False
    return STABLE if simple else BOUNDARY


def classify_points(a, b, z, double tol=1e-9):
    """Classify every ``z`` for ``sum_q (a[q] - b[q-1] z) mu^q = 0``; see ``_kernels_py``."""
    cdef cnp.ndarray[double, ndim=1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] bv = np.ascontiguousarray(b, dtype=np.float64)
    zarr = np.asarray(z, dtype=np.complex128)
    shape = zarr.shape
    cdef cnp.ndarray[double complex, ndim=1] zv = np.ascontiguousarray(zarr.ravel())
    cdef int k = av.shape[0] - 1
    if bv.shape[0] != k:
        raise ValueError("b must have one entry fewer than a")
    if k < 1 or k > MAXK:
        raise ValueError("order outside the supported range")
    cdef Py_ssize_t npts = zv.shape[0], i
    out = np.empty(npts, dtype=np.int8)
    cdef signed char[::1] ov = out
    cdef int lwork = 66 * k
    cdef double complex *comp = <double complex *> malloc(k * k * sizeof(double complex))
    cdef double complex *w = <double complex *> malloc(k * sizeof(double complex))
    cdef double complex *work = <double complex *> malloc(lwork * sizeof(double complex))
    cdef double *rwork = <double *> malloc(2 * k * sizeof(double))
    cdef const double *ap = &av[0]
    cdef const double *bp = &bv[0]
    if comp == NULL or w == NULL or work == NULL or rwork == NULL:
        free(comp); free(w); free(work); free(rwork)
        raise MemoryError()
    try:
        with nogil:
            for i in range(npts):
                ov[i] = _classify_one(k, ap, bp, zv[i], tol, comp, w, work, lwork, rwork)
    finally:
        free(comp); free(w); free(work); free(rwork)
    return out.reshape(shape)
