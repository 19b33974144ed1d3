"""Numpy layers with hand-written backward passes.

Parameters live in a flat ``dict[str, ndarray]``; every layer is addressed by a
name prefix. ``*_forward`` functions return ``(output, cache)`` and the matching
``*_backward`` functions accumulate parameter gradients into a dict with the
same keys and return the gradient w.r.t. their input.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
NEG_INF = -1e30


def init_linear(params, name, fan_in, fan_out, rng, scale=1.0):
    params[f"{name}.W"] = rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))
    params[f"{name}.b"] = np.zeros(fan_out)


def init_layer_norm(params, name, dim):
    params[f"{name}.g"] = np.ones(dim)
    params[f"{name}.b"] = np.zeros(dim)


def init_block(params, name, dim, rng, ff_mult=4):
    """Pre-norm transformer block: x + MHA(LN(x)), then + FFN(LN(.))."""
    init_layer_norm(params, f"{name}.ln1", dim)
    for proj in ("q", "k", "v", "o"):
        init_linear(params, f"{name}.attn.{proj}", dim, dim, rng)
    init_layer_norm(params, f"{name}.ln2", dim)
    init_linear(params, f"{name}.ff1", dim, ff_mult * dim, rng, scale=np.sqrt(2.0))
    init_linear(params, f"{name}.ff2", ff_mult * dim, dim, rng)


def _acc(grads, key, value):
    if key in grads:
        grads[key] += value
    else:
        grads[key] = value.copy()


def linear_forward(x, params, name):
    return x @ params[f"{name}.W"] + params[f"{name}.b"], x


def linear_backward(dy, x, params, grads, name):
    _acc(grads, f"{name}.W", x.T @ dy)
    _acc(grads, f"{name}.b", dy.sum(axis=0))
    return dy @ params[f"{name}.W"].T


def layer_norm_forward(x, params, name):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return params[f"{name}.g"] * xhat + params[f"{name}.b"], (xhat, inv)


def layer_norm_backward(dy, cache, params, grads, name):
    xhat, inv = cache
    _acc(grads, f"{name}.g", (dy * xhat).sum(axis=0))
    _acc(grads, f"{name}.b", dy.sum(axis=0))
    dxhat = dy * params[f"{name}.g"]
    d = xhat.shape[-1]
    return inv / d * (
        d * dxhat - dxhat.sum(axis=-1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )


def softmax(s, axis=-1):
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def _split_heads(x, n_heads):
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def attention_forward(xq, xkv, params, name, n_heads, key_mask=None):
    """Multi-head scaled dot-product attention of ``xq`` rows over ``xkv`` rows.

    ``key_mask`` is a boolean vector over keys; False keys get zero weight.
    """
    q, _ = linear_forward(xq, params, f"{name}.q")
    k, _ = linear_forward(xkv, params, f"{name}.k")
    v, _ = linear_forward(xkv, params, f"{name}.v")
    qh, kh, vh = _split_heads(q, n_heads), _split_heads(k, n_heads), _split_heads(v, n_heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    s = qh @ kh.transpose(0, 2, 1) * scale
    if key_mask is not None:
        s = np.where(key_mask[None, None, :], s, NEG_INF)
    a = softmax(s)
    o = _merge_heads(a @ vh)
    out, _ = linear_forward(o, params, f"{name}.o")
    return out, (xq, xkv, qh, kh, vh, a, o, scale)


def attention_backward(dout, cache, params, grads, name):
    xq, xkv, qh, kh, vh, a, o, scale = cache
    n_heads = qh.shape[0]
    do = linear_backward(dout, o, params, grads, f"{name}.o")
    doh = _split_heads(do, n_heads)
    da = doh @ vh.transpose(0, 2, 1)
    dvh = a.transpose(0, 2, 1) @ doh
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True)) * scale
    dqh = ds @ kh
    dkh = ds.transpose(0, 2, 1) @ qh
    dxq = linear_backward(_merge_heads(dqh), xq, params, grads, f"{name}.q")
    dxkv = linear_backward(_merge_heads(dkh), xkv, params, grads, f"{name}.k")
    dxkv += linear_backward(_merge_heads(dvh), xkv, params, grads, f"{name}.v")
    return dxq, dxkv


def block_forward(x, params, name, n_heads, key_mask=None, query_idx=None):
    """One pre-norm block. With ``query_idx`` only those rows are updated and returned."""
    xn, c_ln1 = layer_norm_forward(x, params, f"{name}.ln1")
    if query_idx is None:
        res, q_in = x, xn
    else:
        res, q_in = x[query_idx], xn[query_idx]
    att, c_att = attention_forward(q_in, xn, params, f"{name}.attn", n_heads, key_mask)
    h1 = res + att
    hn, c_ln2 = layer_norm_forward(h1, params, f"{name}.ln2")
    f1, _ = linear_forward(hn, params, f"{name}.ff1")
    r1 = np.maximum(f1, 0.0)
    f2, _ = linear_forward(r1, params, f"{name}.ff2")
    out = h1 + f2
    cache = (x.shape, query_idx, c_ln1, c_att, c_ln2, hn, f1, r1)
    return out, cache


def block_backward(dout, cache, params, grads, name):
    x_shape, query_idx, c_ln1, c_att, c_ln2, hn, f1, r1 = cache
    dr1 = linear_backward(dout, r1, params, grads, f"{name}.ff2")
    df1 = dr1 * (f1 > 0)
    dhn = linear_backward(df1, hn, params, grads, f"{name}.ff1")
    dh1 = dout + layer_norm_backward(dhn, c_ln2, params, grads, f"{name}.ln2")
    dq_in, dxn = attention_backward(dh1, c_att, params, grads, f"{name}.attn")
    if query_idx is None:
        dxn = dxn + dq_in
        dx = dh1.copy()
    else:
        np.add.at(dxn, query_idx, dq_in)
        dx = np.zeros(x_shape)
        np.add.at(dx, query_idx, dh1)
    dx += layer_norm_backward(dxn, c_ln1, params, grads, f"{name}.ln1")
    return dx


def block_attention(cache):
    """Attention probabilities (heads x queries x keys) recorded by ``block_forward``."""
    return cache[3][5]


class AdamW:
    """Adam with decoupled weight decay; decay applies to matrices only."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        if self.lr == 0:
            return
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, p in params.items():
            g = grads.get(k)
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            if self.weight_decay and p.ndim >= 2:
                p *= 1.0 - self.lr * self.weight_decay
            denom = np.sqrt(v / c2)
            denom += self.eps
            np.divide(m, denom, out=denom)
            denom *= self.lr / c1
            p -= denom

    def state_dict(self):
        return {"t": self.t, "m": self.m, "v": self.v}
