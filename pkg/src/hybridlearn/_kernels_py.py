"""Pure numpy recurrent kernels; the fallback when the compiled core is absent.

Arrays are float64.  ``X`` is ``(N, T, d_x)``, targets ``(N, T, d_y)``.
LSTM gate rows are stacked as input, forget, output, candidate.
Loss is the sum of squared errors divided by the number of sequences.
"""

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def rnn_forward(W_x, W_h, b_h, W_y, b_y, X):
    N, T, _ = X.shape
    d_h = W_h.shape[0]
    H = np.zeros((N, T, d_h))
    h = np.zeros((N, d_h))
    for t in range(T):
        h = np.tanh(X[:, t] @ W_x.T + h @ W_h.T + b_h)
        H[:, t] = h
    return H @ W_y.T + b_y, H


def rnn_loss_grad(W_x, W_h, b_h, W_y, b_y, X, Tg):
    N, T, _ = X.shape
    d_h = W_h.shape[0]
    Y, H = rnn_forward(W_x, W_h, b_h, W_y, b_y, X)
    err = Y - Tg
    loss = float(np.sum(err * err)) / N
    dY = (2.0 / N) * err
    dW_x = np.zeros_like(W_x)
    dW_h = np.zeros_like(W_h)
    db_h = np.zeros_like(b_h)
    dW_y = np.einsum("ntj,ntk->jk", dY, H)
    db_y = dY.sum(axis=(0, 1))
    dh_next = np.zeros((N, d_h))
    for t in range(T - 1, -1, -1):
        h = H[:, t]
        h_prev = H[:, t - 1] if t > 0 else np.zeros((N, d_h))
        dh = dY[:, t] @ W_y + dh_next
        dz = dh * (1.0 - h * h)
        dW_x += dz.T @ X[:, t]
        dW_h += dz.T @ h_prev
        db_h += dz.sum(axis=0)
        dh_next = dz @ W_h
    return loss, (dW_x, dW_h, db_h, dW_y, db_y)


def lstm_forward(W_x, W_h, b_h, W_y, b_y, X, keep=False):
    N, T, _ = X.shape
    d_h = W_h.shape[1]
    H = np.zeros((N, T, d_h))
    C = np.zeros((N, T, d_h))
    G = np.zeros((N, T, 4 * d_h)) if keep else None
    h = np.zeros((N, d_h))
    c = np.zeros((N, d_h))
    for t in range(T):
        z = X[:, t] @ W_x.T + h @ W_h.T + b_h
        gates = np.empty_like(z)
        gates[:, : 3 * d_h] = _sigmoid(z[:, : 3 * d_h])
        gates[:, 3 * d_h:] = np.tanh(z[:, 3 * d_h:])
        i, f, o, g = (gates[:, k * d_h:(k + 1) * d_h] for k in range(4))
        c = f * c + i * g
        h = o * np.tanh(c)
        H[:, t] = h
        C[:, t] = c
        if keep:
            G[:, t] = gates
    Y = H @ W_y.T + b_y
    return Y, H, C, G


def lstm_loss_grad(W_x, W_h, b_h, W_y, b_y, X, Tg):
    N, T, _ = X.shape
    d_h = W_h.shape[1]
    Y, H, C, G = lstm_forward(W_x, W_h, b_h, W_y, b_y, X, keep=True)
    err = Y - Tg
    loss = float(np.sum(err * err)) / N
    dY = (2.0 / N) * err
    dW_x = np.zeros_like(W_x)
    dW_h = np.zeros_like(W_h)
    db_h = np.zeros_like(b_h)
    dW_y = np.einsum("ntj,ntk->jk", dY, H)
    db_y = dY.sum(axis=(0, 1))
    dh_next = np.zeros((N, d_h))
    dc_next = np.zeros((N, d_h))
    zeros = np.zeros((N, d_h))
    dz = np.empty((N, 4 * d_h))
    for t in range(T - 1, -1, -1):
        gates = G[:, t]
        i, f, o, g = (gates[:, k * d_h:(k + 1) * d_h] for k in range(4))
        c = C[:, t]
        c_prev = C[:, t - 1] if t > 0 else zeros
        h_prev = H[:, t - 1] if t > 0 else zeros
        tc = np.tanh(c)
        dh = dY[:, t] @ W_y + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[:, :d_h] = dc * g * i * (1.0 - i)
        dz[:, d_h:2 * d_h] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * d_h:3 * d_h] = dh * tc * o * (1.0 - o)
        dz[:, 3 * d_h:] = dc * i * (1.0 - g * g)
        dW_x += dz.T @ X[:, t]
        dW_h += dz.T @ h_prev
        db_h += dz.sum(axis=0)
        dh_next = dz @ W_h
        dc_next = dc * f
    return loss, (dW_x, dW_h, db_h, dW_y, db_y)


def forward(mode, W_x, W_h, b_h, W_y, b_y, X):
    if mode == "lstm":
        return lstm_forward(W_x, W_h, b_h, W_y, b_y, X)[0]
    return rnn_forward(W_x, W_h, b_h, W_y, b_y, X)[0]


def loss_grad(mode, W_x, W_h, b_h, W_y, b_y, X, Tg):
    if mode == "lstm":
        return lstm_loss_grad(W_x, W_h, b_h, W_y, b_y, X, Tg)
    return rnn_loss_grad(W_x, W_h, b_h, W_y, b_y, X, Tg)
