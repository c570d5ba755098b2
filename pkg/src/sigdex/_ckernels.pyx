# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-path kernels.

Must stay semantically identical to sigdex._pykernels: same clamps, same
pairwise reduction topology. The pure-python module is the reference.
"""

from libc.math cimport exp

DEF EXP_CLAMP = 700.0


cpdef double spline_eval(double[::1] starts, double[::1] bases,
                         double[::1] slopes, double[::1] clamps,
                         double cap, double k) nogil:
    cdef Py_ssize_t n = starts.shape[0]
    cdef Py_ssize_t seg = 0, lo = 0, hi = n - 1, mid
    cdef double y, top
    while lo <= hi:
        mid = (lo + hi) >> 1
        if starts[mid] <= k:
            seg = mid
            lo = mid + 1
        else:
            hi = mid - 1
    y = bases[seg] + slopes[seg] * (k - starts[seg])
    if y < bases[seg]:
        y = bases[seg]
    if y > clamps[seg]:
        y = clamps[seg]
    top = cap - 1.0
    if y < 0.0:
        y = 0.0
    if y > top:
        y = top
    return y


cpdef void sigmoid_fill(double k, double[::1] amps, double[::1] omegas,
                        double[::1] phis, double[::1] out,
                        Py_ssize_t lo, Py_ssize_t hi) nogil:
    cdef Py_ssize_t i
    cdef double a, z
    for i in range(lo, hi):
        a = amps[i]
        if a <= 0.0:
            out[i] = 0.0
            continue
        z = omegas[i] * (k - phis[i])
        if z >= EXP_CLAMP:
            out[i] = a
        elif z <= -EXP_CLAMP:
            out[i] = 0.0
        else:
            out[i] = a / (1.0 + exp(-z))


cdef double _pairwise(double[::1] v, Py_ssize_t lo, Py_ssize_t hi) nogil:
    cdef Py_ssize_t n = hi - lo, mid
    if n <= 0:
        return 0.0
    if n == 1:
        return v[lo]
    if n == 2:
        return v[lo] + v[lo + 1]
    mid = lo + (n >> 1)
    return _pairwise(v, lo, mid) + _pairwise(v, mid, hi)


cpdef double pairwise_sum(double[::1] values, Py_ssize_t lo=0, Py_ssize_t hi=-1):
    if hi < 0:
        hi = values.shape[0]
    return _pairwise(values, lo, hi)


cpdef tuple locate_window(unsigned long long[::1] keys, unsigned char[::1] occ,
                          Py_ssize_t lo, Py_ssize_t hi, unsigned long long k):
    cdef Py_ssize_t pred = -1, succ = -1
    cdef Py_ssize_t left = lo, right = hi, mid, probe
    cdef unsigned long long km
    while left <= right:
        mid = (left + right) >> 1
        probe = mid
        while probe >= left and occ[probe] == 0:
            probe -= 1
        if probe < left:
            left = mid + 1
            continue
        km = keys[probe]
        if km == k:
            return (pred, probe, succ)
        if km < k:
            pred = probe
            left = mid + 1
        else:
            succ = probe
            right = probe - 1
    return (pred, -1, succ)


cpdef Py_ssize_t next_free_right(unsigned char[::1] occ, Py_ssize_t start,
                                 Py_ssize_t cap, Py_ssize_t limit) nogil:
    cdef Py_ssize_t end = start + limit
    cdef Py_ssize_t i
    if end > cap:
        end = cap
    for i in range(start, end):
        if occ[i] == 0:
            return i
    return -1


cpdef Py_ssize_t next_occupied(unsigned char[::1] occ, Py_ssize_t start,
                               Py_ssize_t cap) nogil:
    cdef Py_ssize_t i
    for i in range(start, cap):
        if occ[i] != 0:
            return i
    return -1


cpdef Py_ssize_t prev_occupied(unsigned char[::1] occ, Py_ssize_t start,
                               Py_ssize_t lo) nogil:
    cdef Py_ssize_t i = start
    while i >= lo:
        if occ[i] != 0:
            return i
        i -= 1
    return -1
