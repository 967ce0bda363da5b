"""Numeric hot loops with twin implementations.

Three kernel families dominate the runtime: point-to-polyline distance
(observation rasters and on-track tests), strided 2D convolution
(policy network forward/backward), and the reverse-scan advantage
recursion. Each has a numba-compiled loop and a vectorized numpy
equivalent; the public functions at the bottom dispatch per call via
accel.active_backend() so the two stay interchangeable.

Convolutions run in whatever float dtype the caller passes (training
uses float32, the gradient check float64). The advantage recursion is
always computed in float64.
"""

import numpy as np

from . import accel
from .accel import njit

# === point-to-segment distance ===


def _min_dist_np(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    len2 = dx * dx + dy * dy
    wx = px[:, None] - ax[None, :]
    wy = py[:, None] - ay[None, :]
    t = (wx * dx[None, :] + wy * dy[None, :]) / len2[None, :]
    t = np.clip(t, 0.0, 1.0)
    ex = wx - t * dx[None, :]
    ey = wy - t * dy[None, :]
    d2 = ex * ex + ey * ey
    return np.sqrt(d2.min(axis=1))


@njit(cache=True)
def _min_dist_nb(px, py, ax, ay, bx, by):
    n = px.shape[0]
    m = ax.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        for j in range(m):
            dx = bx[j] - ax[j]
            dy = by[j] - ay[j]
            wx = px[i] - ax[j]
            wy = py[i] - ay[j]
            t = (wx * dx + wy * dy) / (dx * dx + dy * dy)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ex = wx - t * dx
            ey = wy - t * dy
            d2 = ex * ex + ey * ey
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)
    return out


# === strided 2D convolution ===


def _out_size(size, k, stride):
    return (size - k) // stride + 1


def _im2col(x, kh, kw, stride):
    n, c, h, w = x.shape
    oh = _out_size(h, kh, stride)
    ow = _out_size(w, kw, stride)
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def _col2im(cols, x_shape, kh, kw, stride):
    n, c, h, w = x_shape
    oh = _out_size(h, kh, stride)
    ow = _out_size(w, kw, stride)
    gx = np.zeros(x_shape, dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols6[:, :, i, j]
    return gx


def _conv2d_forward_np(x, w, b, stride):
    n = x.shape[0]
    f, _, kh, kw = w.shape
    oh = _out_size(x.shape[2], kh, stride)
    ow = _out_size(x.shape[3], kw, stride)
    cols = _im2col(x, kh, kw, stride)
    wf = w.reshape(f, -1)
    y = wf @ cols  # (n, f, oh*ow) via broadcasting over the batch axis
    y = y + b.reshape(1, f, 1)
    return y.reshape(n, f, oh, ow)


def _conv2d_backward_np(x, w, stride, gy):
    n = x.shape[0]
    f, _, kh, kw = w.shape
    cols = _im2col(x, kh, kw, stride)
    gyf = gy.reshape(n, f, -1)
    gw = np.einsum("nfo,nko->fk", gyf, cols).reshape(w.shape)
    gb = gy.sum(axis=(0, 2, 3))
    wf = w.reshape(f, -1)
    gcols = np.einsum("fk,nfo->nko", wf, gyf)
    gx = _col2im(gcols, x.shape, kh, kw, stride)
    return gx, gw, gb


@njit(cache=True)
def _conv2d_forward_nb(x, w, b, stride):
    n, c, h, wd = x.shape
    f = w.shape[0]
    kh = w.shape[2]
    kw = w.shape[3]
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    y = np.empty((n, f, oh, ow), dtype=x.dtype)
    for bi in range(n):
        for fi in range(f):
            for i in range(oh):
                for j in range(ow):
                    acc = b[fi]
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += (
                                    x[bi, ci, i * stride + ki, j * stride + kj]
                                    * w[fi, ci, ki, kj]
                                )
                    y[bi, fi, i, j] = acc
    return y


@njit(cache=True)
def _conv2d_backward_nb(x, w, stride, gy):
    n, c, h, wd = x.shape
    f = w.shape[0]
    kh = w.shape[2]
    kw = w.shape[3]
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    gx = np.zeros(x.shape, dtype=x.dtype)
    gw = np.zeros(w.shape, dtype=x.dtype)
    gb = np.zeros(f, dtype=x.dtype)
    for bi in range(n):
        for fi in range(f):
            for i in range(oh):
                for j in range(ow):
                    g = gy[bi, fi, i, j]
                    gb[fi] += g
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                gx[bi, ci, i * stride + ki, j * stride + kj] += (
                                    g * w[fi, ci, ki, kj]
                                )
                                gw[fi, ci, ki, kj] += (
                                    g * x[bi, ci, i * stride + ki, j * stride + kj]
                                )
    return gx, gw, gb


# === advantage recursion ===


def _gae_np(rewards, values, dones, bootstrap, gamma, lam):
    t_len = rewards.shape[0]
    adv = np.empty(t_len, dtype=np.float64)
    acc = 0.0
    next_value = bootstrap
    for t in range(t_len - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        acc = delta + gamma * lam * nonterminal * acc
        adv[t] = acc
        next_value = values[t]
    return adv, adv + values


@njit(cache=True)
def _gae_nb(rewards, values, dones, bootstrap, gamma, lam):
    t_len = rewards.shape[0]
    adv = np.empty(t_len, dtype=np.float64)
    acc = 0.0
    next_value = bootstrap
    for t in range(t_len - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        acc = delta + gamma * lam * nonterminal * acc
        adv[t] = acc
        next_value = values[t]
    return adv, adv + values


# === dispatch ===


def min_dist_to_segments(px, py, ax, ay, bx, by):
    """Distance from each (px, py) point to the nearest of the segments."""
    if accel.active_backend() == "numba":
        return _min_dist_nb(px, py, ax, ay, bx, by)
    return _min_dist_np(px, py, ax, ay, bx, by)


def conv2d_forward(x, w, b, stride):
    """Valid-padding strided convolution; x is (N, C, H, W)."""
    if accel.active_backend() == "numba":
        return _conv2d_forward_nb(x, w, b, stride)
    return _conv2d_forward_np(x, w, b, stride)


def conv2d_backward(x, w, stride, gy):
    """Gradients (gx, gw, gb) for conv2d_forward."""
    if accel.active_backend() == "numba":
        return _conv2d_backward_nb(x, w, stride, gy)
    return _conv2d_backward_np(x, w, stride, gy)


def gae_scan(rewards, values, dones, bootstrap, gamma, lam):
    """Reverse advantage recursion; returns (advantages, returns) in float64."""
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    dones = np.ascontiguousarray(dones, dtype=np.float64)
    if accel.active_backend() == "numba":
        return _gae_nb(rewards, values, dones, float(bootstrap), float(gamma), float(lam))
    return _gae_np(rewards, values, dones, float(bootstrap), float(gamma), float(lam))
