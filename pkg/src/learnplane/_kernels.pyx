# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled value-network kernels (same flat layout as ``_kernels_py``)."""

from libc.math cimport sqrt, pow
from libc.stdlib cimport malloc, free
from libc.stdint cimport int64_t

from scipy.linalg.cython_blas cimport dgemm

import numpy as np

cdef enum:
    IN = 13
    H1 = 64
    H2 = 32
    OUT = 3
    OW1 = 0
    OB1 = OW1 + H1 * IN
    OW2 = OB1 + H1
    OB2 = OW2 + H2 * H1
    OW3 = OB2 + H2
    OB3 = OW3 + OUT * H2
    NPARAMS = OB3 + OUT

N_PARAMS = NPARAMS
LAYER_SIZES = (IN, H1, H2, OUT)


cdef inline void _mm_abt(const double* a, const double* b, double* c, int n, int k, int m,
                         double beta) noexcept nogil:
    """Row-major C (n, m) = A (n, k) @ B(m, k).T + beta * C."""
    cdef char ta = b'T', tb = b'N'
    cdef double one = 1.0
    dgemm(&ta, &tb, &m, &n, &k, &one, <double*>b, &k, <double*>a, &k, &beta, c, &m)


cdef inline void _mm_atb(const double* a, const double* b, double* c, int n, int p, int q) noexcept nogil:
    """Row-major C (p, q) = A (n, p).T @ B (n, q)."""
    cdef char ta = b'N', tb = b'T'
    cdef double one = 1.0, zero = 0.0
    dgemm(&ta, &tb, &q, &p, &n, &one, <double*>b, &q, <double*>a, &p, &zero, c, &q)


cdef inline void _mm_ab(const double* a, const double* b, double* c, int n, int k, int m) noexcept nogil:
    """Row-major C (n, m) = A (n, k) @ B (k, m)."""
    cdef char ta = b'N', tb = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, <double*>b, &m, <double*>a, &k, &zero, c, &m)



cdef inline void _dense(const double* w, const double* b, const double* x,
                        double* out, int n_in, int n_out, bint relu) noexcept nogil:
    cdef int j, k
    cdef double s
    cdef const double* row
    for j in range(n_out):
        row = w + j * n_in
        s = b[j]
        for k in range(n_in):
            s += row[k] * x[k]
        if relu and s < 0.0:
            s = 0.0
        out[j] = s


cdef inline void _forward_one(const double* p, const double* x, double* h1,
                              double* h2, double* out) noexcept nogil:
    _dense(p + OW1, p + OB1, x, h1, IN, H1, True)
    _dense(p + OW2, p + OB2, h1, h2, H1, H2, True)
    _dense(p + OW3, p + OB3, h2, out, H2, OUT, False)


def forward(double[::1] params, double[::1] x):
    cdef double h1[H1]
    cdef double h2[H2]
    out = np.empty(OUT)
    cdef double[::1] o = out
    _forward_one(&params[0], &x[0], h1, h2, &o[0])
    return out


cdef void _forward_rows(const double* p, const double* x, int n,
                        double* h1, double* h2, double* out) noexcept nogil:
    """Batch forward pass over the n rows of ``x`` (row-major, n x IN)."""
    cdef int b, j
    for b in range(n):
        for j in range(H1):
            h1[b * H1 + j] = p[OB1 + j]
        for j in range(H2):
            h2[b * H2 + j] = p[OB2 + j]
        for j in range(OUT):
            out[b * OUT + j] = p[OB3 + j]
    _mm_abt(x, p + OW1, h1, n, IN, H1, 1.0)
    for j in range(n * H1):
        if h1[j] < 0.0:
            h1[j] = 0.0
    _mm_abt(h1, p + OW2, h2, n, H1, H2, 1.0)
    for j in range(n * H2):
        if h2[j] < 0.0:
            h2[j] = 0.0
    _mm_abt(h2, p + OW3, out, n, H2, OUT, 1.0)


cdef double _loss_grad(const double* p, const double* x, const int64_t* actions,
                       const double* targets, int n, double* g) noexcept nogil:
    """Mean of (Q(x_i, a_i) - y_i)^2 over the n rows of ``x``; writes its gradient to ``g``."""
    cdef double* work = <double*>malloc(n * (2 * H1 + 2 * H2 + 2 * OUT) * sizeof(double))
    cdef double* h1 = work
    cdef double* h2 = h1 + n * H1
    cdef double* out = h2 + n * H2
    cdef double* d_out = out + n * OUT
    cdef double* d1 = d_out + n * OUT
    cdef double* d2 = d1 + n * H1
    cdef int b, j, a
    cdef double diff, loss = 0.0, scale = 2.0 / n

    _forward_rows(p, x, n, h1, h2, out)
    for j in range(n * OUT):
        d_out[j] = 0.0
    for b in range(n):
        a = <int>actions[b]
        diff = out[b * OUT + a] - targets[b]
        loss += diff * diff
        d_out[b * OUT + a] = scale * diff

    _mm_atb(d_out, h2, g + OW3, n, OUT, H2)
    _mm_ab(d_out, p + OW3, d2, n, OUT, H2)
    for j in range(n * H2):
        if h2[j] <= 0.0:
            d2[j] = 0.0
    _mm_atb(d2, h1, g + OW2, n, H2, H1)
    _mm_ab(d2, p + OW2, d1, n, H2, H1)
    for j in range(n * H1):
        if h1[j] <= 0.0:
            d1[j] = 0.0
    _mm_atb(d1, x, g + OW1, n, H1, IN)

    for j in range(OUT):
        g[OB3 + j] = 0.0
    for j in range(H2):
        g[OB2 + j] = 0.0
    for j in range(H1):
        g[OB1 + j] = 0.0
    for b in range(n):
        for j in range(OUT):
            g[OB3 + j] += d_out[b * OUT + j]
        for j in range(H2):
            g[OB2 + j] += d2[b * H2 + j]
        for j in range(H1):
            g[OB1 + j] += d1[b * H1 + j]
    free(work)
    return loss / n


cdef void _adam(double* p, const double* g, double* m, double* v, long step,
                double lr, double b1, double b2, double eps) noexcept nogil:
    cdef int k
    cdef double step_size = lr / (1.0 - pow(b1, <double>step))
    cdef double inv_c2 = 1.0 / (1.0 - pow(b2, <double>step))
    cdef double gk
    for k in range(NPARAMS):
        gk = g[k]
        m[k] = b1 * m[k] + (1.0 - b1) * gk
        v[k] = b2 * v[k] + (1.0 - b2) * gk * gk
        p[k] -= step_size * m[k] / (sqrt(v[k] * inv_c2) + eps)


def forward_batch(double[::1] params, const double[:, ::1] x):
    cdef int n = x.shape[0]
    out = np.empty((n, OUT))
    cdef double[:, ::1] o = out
    cdef double* h1 = <double*>malloc(n * H1 * sizeof(double))
    cdef double* h2 = <double*>malloc(n * H2 * sizeof(double))
    with nogil:
        _forward_rows(&params[0], &x[0, 0], n, h1, h2, &o[0, 0])
    free(h1)
    free(h2)
    return out


def loss_grad(double[::1] params, const double[:, ::1] x, const int64_t[::1] actions,
              const double[::1] targets, double[::1] grad):
    return _loss_grad(&params[0], &x[0, 0], &actions[0], &targets[0], x.shape[0], &grad[0])


def adam_update(double[::1] params, const double[::1] grad, double[::1] m, double[::1] v,
                long step, double lr, double beta1, double beta2, double eps):
    _adam(&params[0], &grad[0], &m[0], &v[0], step, lr, beta1, beta2, eps)


def train_step(double[::1] params, double[::1] target, double[::1] m, double[::1] v,
               long step, const double[:, ::1] obs, const int64_t[::1] actions,
               const double[::1] rewards, const double[:, ::1] next_obs,
               const int64_t[::1] idx, double gamma, double lr, double beta1,
               double beta2, double eps, double[::1] grad):
    cdef int n = idx.shape[0], i, j, k
    cdef int64_t r
    cdef double best, loss
    cdef double* xs = <double*>malloc(n * IN * sizeof(double))
    cdef double* xn = <double*>malloc(n * IN * sizeof(double))
    cdef double* h1 = <double*>malloc(n * H1 * sizeof(double))
    cdef double* h2 = <double*>malloc(n * H2 * sizeof(double))
    cdef double* out = <double*>malloc(n * OUT * sizeof(double))
    cdef int64_t* acts = <int64_t*>malloc(n * sizeof(int64_t))
    cdef double* y = <double*>malloc(n * sizeof(double))
    with nogil:
        for i in range(n):
            r = idx[i]
            for k in range(IN):
                xs[i * IN + k] = obs[r, k]
                xn[i * IN + k] = next_obs[r, k]
            acts[i] = actions[r]
        _forward_rows(&target[0], xn, n, h1, h2, out)
        for i in range(n):
            best = out[i * OUT]
            for j in range(1, OUT):
                if out[i * OUT + j] > best:
                    best = out[i * OUT + j]
            y[i] = rewards[idx[i]] + gamma * best
        loss = _loss_grad(&params[0], xs, acts, y, n, &grad[0])
        _adam(&params[0], &grad[0], &m[0], &v[0], step, lr, beta1, beta2, eps)
    free(xs)
    free(xn)
    free(h1)
    free(h2)
    free(out)
    free(acts)
    free(y)
    return loss
