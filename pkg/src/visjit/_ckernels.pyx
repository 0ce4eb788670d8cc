# cython: boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled split search; see :mod:`visjit._pykernels` for the contract."""
import numpy as np

from libc.math cimport log2, INFINITY
from libcpp.algorithm cimport stable_sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector

BACKEND = "cython"


cdef inline double _h(double pos, double total) nogil:
    cdef double p
    if total <= 0:
        return 0.0
    p = pos / total
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * log2(p) + (1.0 - p) * log2(1.0 - p))


cdef inline double _threshold(double lo, double hi) nogil:
    cdef double t = (lo + hi) / 2.0
    if t >= hi:
        return lo
    return t


def best_split_entropy(const double[:, :] X, const double[:] y, idx, features, Py_ssize_t min_leaf=1):
    cdef Py_ssize_t[:] ix = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t[:] fs = np.ascontiguousarray(features, dtype=np.intp)
    cdef Py_ssize_t n = ix.shape[0]
    cdef Py_ssize_t i, k, f
    cdef double total_pos = 0.0, left_pos, parent, child, gain, ln, rn
    cdef int best_f = -1
    cdef double best_t = 0.0, best_gain = -INFINITY
    cdef vector[pair[double, Py_ssize_t]] buf
    if n < 2:
        return (-1, 0.0, -np.inf)
    with nogil:
        for i in range(n):
            total_pos += y[ix[i]]
        parent = _h(total_pos, <double>n)
        buf.resize(n)
        for k in range(fs.shape[0]):
            f = fs[k]
            for i in range(n):
                buf[i].first = X[ix[i], f]
                buf[i].second = i
            stable_sort(buf.begin(), buf.end())
            left_pos = 0.0
            for i in range(n - 1):
                left_pos += y[ix[buf[i].second]]
                if buf[i].first == buf[i + 1].first:
                    continue
                ln = <double>(i + 1)
                rn = <double>(n - i - 1)
                if ln < min_leaf or rn < min_leaf:
                    continue
                child = (ln * _h(left_pos, ln) + rn * _h(total_pos - left_pos, rn)) / n
                gain = parent - child
                if gain > best_gain:
                    best_gain = gain
                    best_f = <int>f
                    best_t = _threshold(buf[i].first, buf[i + 1].first)
    return (best_f, best_t, best_gain)


def best_split_gradient(const double[:, :] X, const double[:] g, const double[:] h, idx, features,
                        double reg_lambda=0.0, Py_ssize_t min_leaf=1, double min_child_weight=0.0):
    cdef Py_ssize_t[:] ix = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t[:] fs = np.ascontiguousarray(features, dtype=np.intp)
    cdef Py_ssize_t n = ix.shape[0]
    cdef Py_ssize_t i, k, f, j
    cdef double G = 0.0, H = 0.0, GL, HL, GR, HR, parent, gain
    cdef int best_f = -1
    cdef double best_t = 0.0, best_gain = -INFINITY
    cdef vector[pair[double, Py_ssize_t]] buf
    if n < 2:
        return (-1, 0.0, -np.inf)
    with nogil:
        for i in range(n):
            G += g[ix[i]]
            H += h[ix[i]]
        parent = G * G / (H + reg_lambda)
        buf.resize(n)
        for k in range(fs.shape[0]):
            f = fs[k]
            for i in range(n):
                buf[i].first = X[ix[i], f]
                buf[i].second = i
            stable_sort(buf.begin(), buf.end())
            GL = 0.0
            HL = 0.0
            for i in range(n - 1):
                j = ix[buf[i].second]
                GL += g[j]
                HL += h[j]
                if buf[i].first == buf[i + 1].first:
                    continue
                if i + 1 < min_leaf or n - i - 1 < min_leaf:
                    continue
                GR = G - GL
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = <int>f
                    best_t = _threshold(buf[i].first, buf[i + 1].first)
    return (best_f, best_t, best_gain)
