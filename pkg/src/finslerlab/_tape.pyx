# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluator for flattened expression tapes.

Opcodes must match ``finslerlab.tape.OPCODES``.
"""
from libc.math cimport sqrt, cbrt, sin, cos, exp, log, pow, isfinite
from libc.stdlib cimport malloc, free

cdef enum:
    OP_CONST = 0
    OP_X = 1
    OP_Y = 2
    OP_PARAM = 3
    OP_NEG = 4
    OP_SQRT = 5
    OP_SIN = 6
    OP_COS = 7
    OP_EXP = 8
    OP_LOG = 9
    OP_ADD = 10
    OP_SUB = 11
    OP_MUL = 12
    OP_DIV = 13
    OP_POWI = 14
    OP_POWF = 15
    OP_POW_HALF = 16
    OP_POW_THIRD = 17

BACKEND = "cython"


cdef inline double _cbrt(double u) noexcept nogil:
    # one Newton step: glibc's cbrt(216.0) is 6.000000000000001
    cdef double r = cbrt(u)
    return r - (r * r * r - u) / (3.0 * r * r)


cdef int _run_point(const int[::1] op, const int[::1] a, const int[::1] b,
                    const double[::1] c, const double[:] x, const double[:] y,
                    const double[:] p, double* reg, int* bad) noexcept nogil:
    cdef Py_ssize_t k, n = op.shape[0]
    cdef double u, v
    cdef int o
    for k in range(n):
        o = op[k]
        if o == OP_CONST:
            reg[k] = c[k]
        elif o == OP_X:
            reg[k] = x[a[k]]
        elif o == OP_Y:
            reg[k] = y[a[k]]
        elif o == OP_PARAM:
            reg[k] = p[a[k]]
        elif o == OP_NEG:
            reg[k] = -reg[a[k]]
        elif o == OP_ADD:
            reg[k] = reg[a[k]] + reg[b[k]]
        elif o == OP_SUB:
            reg[k] = reg[a[k]] - reg[b[k]]
        elif o == OP_MUL:
            reg[k] = reg[a[k]] * reg[b[k]]
        elif o == OP_DIV:
            v = reg[b[k]]
            if v == 0.0:
                bad[0] = <int>k
                return 1
            reg[k] = reg[a[k]] / v
        elif o == OP_POWI:
            u = reg[a[k]]
            if u == 0.0 and c[k] < 0:
                bad[0] = <int>k
                return 1
            reg[k] = pow(u, c[k])
        elif o == OP_POWF:
            u = reg[a[k]]
            if not (u > 0.0):
                bad[0] = <int>k
                return 1
            reg[k] = pow(u, c[k])
        elif o == OP_POW_HALF:
            u = reg[a[k]]
            if not (u > 0.0):
                bad[0] = <int>k
                return 1
            reg[k] = pow(sqrt(u), c[k])
        elif o == OP_POW_THIRD:
            u = reg[a[k]]
            if not (u > 0.0):
                bad[0] = <int>k
                return 1
            reg[k] = pow(_cbrt(u), c[k])
        elif o == OP_SQRT:
            u = reg[a[k]]
            if u < 0.0:
                bad[0] = <int>k
                return 1
            reg[k] = sqrt(u)
        elif o == OP_LOG:
            u = reg[a[k]]
            if not (u > 0.0):
                bad[0] = <int>k
                return 1
            reg[k] = log(u)
        elif o == OP_SIN:
            reg[k] = sin(reg[a[k]])
        elif o == OP_COS:
            reg[k] = cos(reg[a[k]])
        elif o == OP_EXP:
            reg[k] = exp(reg[a[k]])
        else:
            bad[0] = <int>k
            return 3
    return 0


cdef class Runner:
    cdef int[::1] op
    cdef int[::1] a
    cdef int[::1] b
    cdef double[::1] c
    cdef int[::1] roots

    def __init__(self, op, a, b, c, roots):
        self.op = op
        self.a = a
        self.b = b
        self.c = c
        self.roots = roots

    def __call__(self, const double[:, :] X, const double[:, :] Y,
                 const double[:] P, double[:, :] out, int[:] status, int[:] bad):
        cdef Py_ssize_t m = X.shape[0], i, j, nroots = self.roots.shape[0]
        cdef Py_ssize_t nreg = self.op.shape[0]
        cdef double* reg
        cdef int st, where
        cdef double v
        reg = <double*>malloc((nreg + 1) * sizeof(double))
        if reg == NULL:
            raise MemoryError()
        try:
            with nogil:
                for i in range(m):
                    where = -1
                    st = _run_point(self.op, self.a, self.b, self.c,
                                    X[i], Y[i], P, reg, &where)
                    if st == 0:
                        for j in range(nroots):
                            v = reg[self.roots[j]]
                            out[i, j] = v
                            if st == 0 and not isfinite(v):
                                st = 2
                                where = self.roots[j]
                    status[i] = st
                    bad[i] = where
        finally:
            free(reg)
