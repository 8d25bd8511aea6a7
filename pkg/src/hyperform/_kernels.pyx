# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Point-wise register interpreter for lowered expression programs."""

from libc.math cimport exp, log, fabs, sqrt, pow, cos, sin
from libc.stdlib cimport malloc, free

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex ccos(double complex)
    double complex csin(double complex)
    double complex clog(double complex)
    double complex cpow(double complex, double complex)
    double complex csqrt(double complex)
    double complex conj(double complex)
    double creal(double complex)
    double cimag(double complex)


cdef enum:
    OP_CONST = 0
    OP_X = 1
    OP_Y = 2
    OP_Z = 3
    OP_ZB = 4
    OP_ADD = 5
    OP_MUL = 6
    OP_POWI = 7
    OP_POWF = 8
    OP_EXP = 9
    OP_COS = 10
    OP_SIN = 11
    OP_LOG = 12
    OP_BUMP = 13
    OP_ACHI = 14
    OP_MAX = 15
    OP_MIN = 16
    OP_EXTERN = 17


cdef inline double complex cinv(double complex a) nogil:
    # plain formula; avoids the slow Annex G division helper
    cdef double re = creal(a), im = cimag(a)
    cdef double d = re * re + im * im
    return (re / d) - 1j * (im / d)


cdef inline double complex ipow(double complex a, int p) nogil:
    cdef double complex r = 1.0
    cdef double complex b = a
    cdef int q = p if p >= 0 else -p
    while q:
        if q & 1:
            r = r * b
        b = b * b
        q >>= 1
    if p < 0:
        return cinv(r)
    return r


cdef inline double bump_eval(double t, double delta, const double[:] poly, int start, int count) nogil:
    cdef double s = t - delta
    cdef double u, lu, acc = 0.0
    cdef int j
    if s <= 0:
        return 0.0
    u = 1.0 / s
    lu = log(u)
    for j in range(count):
        if poly[start + j] != 0.0:
            acc += poly[start + j] * exp(-u + j * lu)
    return acc


cdef enum:
    BLOCK = 128


def run_points(const int[:] ops, const int[:] argstart, const int[:] argcount, const int[:] args,
               const double[:] cre, const double[:] cim, const double[:] fpar, const int[:] ipar,
               const int[:] polystart, const double[:] poly, const int[:] outputs,
               const double complex[:, :] Zs, const double complex[:, :] ext, double complex[:, :] out):
    """Run the program on blocks of points, one instruction at a time per block."""
    cdef Py_ssize_t N = Zs.shape[0]
    cdef Py_ssize_t P = ops.shape[0]
    cdef Py_ssize_t M = outputs.shape[0]
    cdef Py_ssize_t lo, m, i, k, j
    cdef int op, s, c, q
    cdef double complex v
    cdef double re, p
    cdef double complex* R
    cdef double complex* A
    cdef double complex* reg = <double complex*> malloc(max(P, 1) * BLOCK * sizeof(double complex))
    if reg == NULL:
        raise MemoryError()
    try:
        with nogil:
            lo = 0
            while lo < N:
                m = min(BLOCK, N - lo)
                for k in range(P):
                    op = ops[k]
                    s = argstart[k]
                    c = argcount[k]
                    R = reg + k * BLOCK
                    if op == OP_CONST:
                        v = cre[k] + 1j * cim[k]
                        for i in range(m):
                            R[i] = v
                    elif op == OP_X:
                        for i in range(m):
                            R[i] = creal(Zs[lo + i, ipar[k]])
                    elif op == OP_Y:
                        for i in range(m):
                            R[i] = cimag(Zs[lo + i, ipar[k]])
                    elif op == OP_Z:
                        for i in range(m):
                            R[i] = Zs[lo + i, ipar[k]]
                    elif op == OP_ZB:
                        for i in range(m):
                            R[i] = conj(Zs[lo + i, ipar[k]])
                    elif op == OP_ADD:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = A[i]
                        for j in range(1, c):
                            A = reg + args[s + j] * BLOCK
                            for i in range(m):
                                R[i] = R[i] + A[i]
                    elif op == OP_MUL:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = A[i]
                        for j in range(1, c):
                            A = reg + args[s + j] * BLOCK
                            for i in range(m):
                                R[i] = R[i] * A[i]
                    elif op == OP_POWI:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            v = A[i]
                            if cimag(v) == 0.0:
                                R[i] = pow(creal(v), <double> ipar[k])
                            else:
                                R[i] = ipow(v, ipar[k])
                    elif op == OP_POWF:
                        p = fpar[k]
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            v = A[i]
                            if cimag(v) == 0.0 and creal(v) > 0.0:
                                R[i] = pow(creal(v), p)
                            elif 2.0 * p == <double> (<int> (2.0 * p)):
                                q = <int> (2.0 * p)
                                R[i] = ipow(csqrt(v), q)
                            else:
                                R[i] = cpow(v, p + 0j)
                    elif op == OP_EXP:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            v = A[i]
                            if cimag(v) == 0.0:
                                R[i] = exp(creal(v))
                            else:
                                R[i] = cexp(v)
                    elif op == OP_COS:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = ccos(A[i])
                    elif op == OP_SIN:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = csin(A[i])
                    elif op == OP_LOG:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = clog(A[i])
                    elif op == OP_BUMP:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = bump_eval(creal(A[i]), fpar[k], poly, polystart[k], ipar[k])
                    elif op == OP_ACHI:
                        A = reg + args[s] * BLOCK
                        for i in range(m):
                            R[i] = 1.0 if creal(A[i]) <= 0 else 0.0
                    elif op == OP_MAX or op == OP_MIN:
                        for i in range(m):
                            re = creal(reg[args[s] * BLOCK + i])
                            for j in range(1, c):
                                v = reg[args[s + j] * BLOCK + i]
                                if (op == OP_MAX and creal(v) > re) or (op == OP_MIN and creal(v) < re):
                                    re = creal(v)
                            R[i] = re
                    elif op == OP_EXTERN:
                        for i in range(m):
                            R[i] = ext[lo + i, ipar[k]]
                    else:
                        for i in range(m):
                            R[i] = 0
                for j in range(M):
                    A = reg + outputs[j] * BLOCK
                    for i in range(m):
                        out[lo + i, j] = A[i]
                lo += m
    finally:
        free(reg)


def weighted_sum(const double complex[:] values, const double[:] weights):
    """Neumaier-compensated sum of values * weights in index order."""
    cdef Py_ssize_t i, N = values.shape[0]
    cdef double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0, t, x
    with nogil:
        for i in range(N):
            x = creal(values[i]) * weights[i]
            t = sr + x
            if fabs(sr) >= fabs(x):
                cr += (sr - t) + x
            else:
                cr += (x - t) + sr
            sr = t
            x = cimag(values[i]) * weights[i]
            t = si + x
            if fabs(si) >= fabs(x):
                ci += (si - t) + x
            else:
                ci += (x - t) + si
            si = t
    return complex(sr + cr, si + ci)
