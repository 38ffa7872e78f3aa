# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrent kernels (same API as ``_kernels_py``).

Each sequence is handled on its own.  The input projection and the weight
gradients are single GEMM calls per sequence; only the recurrent product
stays inside the time loop.  Row-major arrays are passed to the Fortran
BLAS as their transposes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm, dgemv

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


# row-major C (m x n) = op(A) @ op(B) + beta * C
cdef inline void _mm(bint ta, bint tb, int m, int n, int k, double *A, double *B,
                     double beta, double *C) noexcept nogil:
    # row-major C = A' B'  <=>  col-major C^T = B'^T A'^T
    cdef char ca = b'T' if ta else b'N'
    cdef char cb = b'T' if tb else b'N'
    cdef int lda = m if ta else k
    cdef int ldb = k if tb else n
    cdef double one = 1.0
    dgemm(&cb, &ca, &n, &m, &k, &one, B, &ldb, A, &lda, &beta, C, &n)


# y = op(A) @ x + beta * y, A row-major (rows x cols)
cdef inline void _mv(bint ta, int rows, int cols, double *A, double *x,
                     double beta, double *y) noexcept nogil:
    cdef char c = b'N' if ta else b'T'
    cdef int inc = 1
    cdef double one = 1.0
    dgemv(&c, &cols, &rows, &one, A, &cols, x, &inc, &beta, y, &inc)


cdef void _seq_forward(bint lstm, int T, int d_x, int d_h, int d_y,
                       double *W_x, double *W_h, double *b_h, double *W_y, double *b_y,
                       double *X, double *Z, double *H, double *C, double *Y) noexcept nogil:
    # Z receives gate activations (T x R), H and C the hidden and cell states
    cdef int R = 4 * d_h if lstm else d_h
    cdef int t, j
    cdef double *z
    cdef double c_prev
    _mm(False, True, T, R, d_x, X, W_x, 0.0, Z)
    for t in range(T):
        z = Z + t * R
        for j in range(R):
            z[j] += b_h[j]
        if t > 0:
            _mv(False, R, d_h, W_h, H + (t - 1) * d_h, 1.0, z)
        if lstm:
            for j in range(3 * d_h):
                z[j] = _sigmoid(z[j])
            for j in range(3 * d_h, R):
                z[j] = tanh(z[j])
            for j in range(d_h):
                c_prev = C[(t - 1) * d_h + j] if t > 0 else 0.0
                C[t * d_h + j] = z[d_h + j] * c_prev + z[j] * z[3 * d_h + j]
                H[t * d_h + j] = z[2 * d_h + j] * tanh(C[t * d_h + j])
        else:
            for j in range(d_h):
                z[j] = tanh(z[j])
                H[t * d_h + j] = z[j]
    _mm(False, True, T, d_y, d_h, H, W_y, 0.0, Y)
    for t in range(T):
        for j in range(d_y):
            Y[t * d_y + j] += b_y[j]


def _dims(W_y, X, mode):
    lstm = mode == "lstm"
    d_h = W_y.shape[1]
    return lstm, X.shape[0], X.shape[1], X.shape[2], d_h, W_y.shape[0], (4 * d_h if lstm else d_h)


def forward(mode, double[:, ::1] W_x, double[:, ::1] W_h, double[::1] b_h,
            double[:, ::1] W_y, double[::1] b_y, double[:, :, ::1] X):
    cdef bint lstm
    cdef int N, T, d_x, d_h, d_y, R, n
    lstm, N, T, d_x, d_h, d_y, R = _dims(W_y, X, mode)
    Y_arr = np.zeros((N, T, d_y))
    if N == 0 or T == 0:
        return Y_arr
    cdef double[:, :, ::1] Y = Y_arr
    cdef double[:, ::1] Z = np.zeros((T, R))
    cdef double[:, ::1] H = np.zeros((T, d_h))
    cdef double[:, ::1] C = np.zeros((T, d_h))
    with nogil:
        for n in range(N):
            _seq_forward(lstm, T, d_x, d_h, d_y, &W_x[0, 0], &W_h[0, 0], &b_h[0], &W_y[0, 0], &b_y[0],
                         &X[n, 0, 0], &Z[0, 0], &H[0, 0], &C[0, 0], &Y[n, 0, 0])
    return Y_arr


def loss_grad(mode, double[:, ::1] W_x, double[:, ::1] W_h, double[::1] b_h,
              double[:, ::1] W_y, double[::1] b_y, double[:, :, ::1] X, double[:, :, ::1] Tg):
    cdef bint lstm
    cdef int N, T, d_x, d_h, d_y, R, n, t, j
    lstm, N, T, d_x, d_h, d_y, R = _dims(W_y, X, mode)
    dW_x_a = np.zeros((R, d_x)); dW_h_a = np.zeros((R, d_h)); db_h_a = np.zeros(R)
    dW_y_a = np.zeros((d_y, d_h)); db_y_a = np.zeros(d_y)
    grads = (dW_x_a, dW_h_a, db_h_a, dW_y_a, db_y_a)
    if N == 0 or T == 0:
        return 0.0, grads
    cdef double[:, ::1] dW_x = dW_x_a
    cdef double[:, ::1] dW_h = dW_h_a
    cdef double[::1] db_h = db_h_a
    cdef double[:, ::1] dW_y = dW_y_a
    cdef double[::1] db_y = db_y_a
    cdef double[:, ::1] Z = np.zeros((T, R))
    cdef double[:, ::1] H = np.zeros((T, d_h))
    cdef double[:, ::1] C = np.zeros((T, d_h))
    cdef double[:, ::1] Y = np.zeros((T, d_y))
    cdef double[:, ::1] dH = np.zeros((T, d_h))
    cdef double[:, ::1] dZ = np.zeros((T, R))
    cdef double[::1] dh_next = np.zeros(d_h)
    cdef double[::1] dc_next = np.zeros(d_h)
    cdef double loss = 0.0, e, scale = 2.0 / N
    cdef double i_g, f_g, o_g, g_g, tc, c_prev, dh, dc, hv
    cdef double *z
    cdef double *dz
    with nogil:
        for n in range(N):
            _seq_forward(lstm, T, d_x, d_h, d_y, &W_x[0, 0], &W_h[0, 0], &b_h[0], &W_y[0, 0], &b_y[0],
                         &X[n, 0, 0], &Z[0, 0], &H[0, 0], &C[0, 0], &Y[0, 0])
            # Y is overwritten with dL/dY
            for t in range(T):
                for j in range(d_y):
                    e = Y[t, j] - Tg[n, t, j]
                    loss += e * e
                    Y[t, j] = scale * e
                    db_y[j] += Y[t, j]
            _mm(True, False, d_y, d_h, T, &Y[0, 0], &H[0, 0], 1.0, &dW_y[0, 0])
            _mm(False, False, T, d_h, d_y, &Y[0, 0], &W_y[0, 0], 0.0, &dH[0, 0])
            for j in range(d_h):
                dh_next[j] = 0.0
                dc_next[j] = 0.0
            for t in range(T - 1, -1, -1):
                z = &Z[t, 0]
                dz = &dZ[t, 0]
                for j in range(d_h):
                    dh = dH[t, j] + dh_next[j]
                    if lstm:
                        i_g = z[j]
                        f_g = z[d_h + j]
                        o_g = z[2 * d_h + j]
                        g_g = z[3 * d_h + j]
                        tc = tanh(C[t, j])
                        c_prev = C[t - 1, j] if t > 0 else 0.0
                        dc = dh * o_g * (1.0 - tc * tc) + dc_next[j]
                        dz[j] = dc * g_g * i_g * (1.0 - i_g)
                        dz[d_h + j] = dc * c_prev * f_g * (1.0 - f_g)
                        dz[2 * d_h + j] = dh * tc * o_g * (1.0 - o_g)
                        dz[3 * d_h + j] = dc * i_g * (1.0 - g_g * g_g)
                        dc_next[j] = dc * f_g
                    else:
                        hv = H[t, j]
                        dz[j] = dh * (1.0 - hv * hv)
                for j in range(R):
                    db_h[j] += dz[j]
                _mv(True, R, d_h, &W_h[0, 0], dz, 0.0, &dh_next[0])
            _mm(True, False, R, d_x, T, &dZ[0, 0], &X[n, 0, 0], 1.0, &dW_x[0, 0])
            if T > 1:
                _mm(True, False, R, d_h, T - 1, &dZ[1, 0], &H[0, 0], 1.0, &dW_h[0, 0])
    return loss / N, grads
