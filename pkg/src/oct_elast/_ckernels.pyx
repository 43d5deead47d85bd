# cython: language_level=3
"""Compiled Born-sum kernels. Mirrors oct_elast._pykernels exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, exp, M_PI

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex csin(double complex)
    double complex ccos(double complex)
    double complex csqrt(double complex)
    double cabs(double complex)

cnp.import_array()

cdef double[13] _MAC
cdef int _k
cdef double _fact
for _k in range(1, 14):
    _fact = 1.0
    for _j in range(2, 2 * _k + 2):
        _fact *= _j
    _MAC[_k - 1] = (-1.0) ** (_k + 1) * 2.0 * _k / _fact


cdef inline double complex _h(double complex x) nogil:
    cdef double ax = cabs(x)
    cdef double complex x2, acc
    cdef int k
    if ax < 1e-2:
        x2 = x * x
        return 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
    if ax < 1.0:
        x2 = x * x
        acc = 0.0
        for k in range(12, -1, -1):
            acc = acc * x2 + _MAC[k]
        return acc
    return (csin(x) - x * ccos(x)) / (x * x * x)


def born_sum_formfactor(double[:, ::1] pos, double x3, double complex kappa, double R):
    """Sum of e^{-i k s3} G(k, X) 4 pi R^3 h(R k sqrt(2(1 + X3/|X|))) over particles s."""
    cdef Py_ssize_t n = pos.shape[0], l
    cdef double X1, X2, X3, d, cosb
    cdef double complex acc = 0.0
    cdef double complex I = 1j
    cdef double vol = 4.0 * M_PI * R * R * R
    with nogil:
        for l in range(n):
            X1 = -pos[l, 0]
            X2 = -pos[l, 1]
            X3 = x3 - pos[l, 2]
            d = sqrt(X1 * X1 + X2 * X2 + X3 * X3)
            cosb = X3 / d
            acc = acc + cexp(-I * kappa * pos[l, 2]) * cexp(I * kappa * d) / (4.0 * M_PI * d) \
                * vol * _h(R * kappa * sqrt(2.0 * (1.0 + cosb)))
    return acc


def born_sum_quadrature(double[:, ::1] pos, double x3, double complex kappa,
                        double[::1] r, double[::1] wr,
                        double[::1] ct, double[::1] wt,
                        double[::1] cphi, double[::1] wphi):
    """Sum over particles of e^{-i k s3} times the ball integral of G(k, X - u) e^{-i k u3}.

    ``cphi``/``wphi`` hold one node of each mirror pair phi, 2 pi - phi with
    the pair weight.
    """
    cdef Py_ssize_t n = pos.shape[0], l, a, b, g
    cdef Py_ssize_t nr = r.shape[0], nt = ct.shape[0], nphi = cphi.shape[0]
    cdef double X1, X2, X3, rho, XX, st, u3, rr, w_rt, base, cross, dist, kr, ki, inre, inim, damp, sn, cs
    cdef double complex acc = 0.0, ball, inner, ph
    cdef double complex I = 1j
    kr = kappa.real
    ki = kappa.imag
    with nogil:
        for l in range(n):
            X1 = -pos[l, 0]
            X2 = -pos[l, 1]
            X3 = x3 - pos[l, 2]
            rho = sqrt(X1 * X1 + X2 * X2)
            XX = X1 * X1 + X2 * X2 + X3 * X3
            ball = 0.0
            for a in range(nr):
                rr = r[a]
                for b in range(nt):
                    st = sqrt(1.0 - ct[b] * ct[b])
                    u3 = rr * ct[b]
                    w_rt = wr[a] * wt[b] * rr * rr
                    base = XX + rr * rr - 2.0 * X3 * u3
                    cross = 2.0 * rho * rr * st
                    inre = 0.0
                    inim = 0.0
                    if ki == 0.0:
                        for g in range(nphi):
                            dist = sqrt(base - cross * cphi[g])
                            inre = inre + wphi[g] * cos(kr * dist) / dist
                            inim = inim + wphi[g] * sin(kr * dist) / dist
                    else:
                        for g in range(nphi):
                            dist = sqrt(base - cross * cphi[g])
                            damp = wphi[g] * exp(-ki * dist) / dist
                            inre = inre + damp * cos(kr * dist)
                            inim = inim + damp * sin(kr * dist)
                    inner = inre + I * inim
                    ph = cexp(-I * kappa * u3)
                    ball = ball + w_rt * ph * inner
            acc = acc + cexp(-I * kappa * pos[l, 2]) * ball / (4.0 * M_PI)
    return acc
