"""Minimal reverse-mode automatic differentiation on NumPy arrays.

Just enough machinery to express the bundled classifiers (convolutions,
attention, layer norm, GELU) and differentiate their loss with respect to
parameters and inputs. Everything runs in float64; every operation is a
deterministic function of its inputs, so repeated backward passes are
bitwise identical.

Gradients are accumulated on every node that requires them, which keeps
intermediate activations (attention probabilities, feature maps) inspectable
after a backward pass; the visualization tools rely on this.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce grad back to `shape` by summing over broadcast axes."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction helpers

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _node(data, parents, backward) -> "Tensor":
        req = any(p.requires_grad for p in parents)
        return Tensor(data, requires_grad=req, parents=parents if req else (),
                      backward=backward if req else None)

    # -- arithmetic

    def __add__(self, other):
        other = self._lift(other)
        out = self._node(self.data + other.data, (self, other), None)
        if out.requires_grad:
            def bwd(g):
                return _unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)
            out._backward = bwd
        return out

    __radd__ = __add__

    def __neg__(self):
        out = self._node(-self.data, (self,), None)
        if out.requires_grad:
            out._backward = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out = self._node(self.data * other.data, (self, other), None)
        if out.requires_grad:
            def bwd(g):
                return (_unbroadcast(g * other.data, self.data.shape),
                        _unbroadcast(g * self.data, other.data.shape))
            out._backward = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        out = self._node(self.data / other.data, (self, other), None)
        if out.requires_grad:
            def bwd(g):
                ga = _unbroadcast(g / other.data, self.data.shape)
                gb = _unbroadcast(-g * self.data / (other.data * other.data),
                                  other.data.shape)
                return ga, gb
            out._backward = bwd
        return out

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.data, other.data
        # the (..., n, k) @ (k, m) case collapses to one 2-D GEMM, which is
        # much faster than NumPy's strided batch loop
        flat2d = a.ndim > 2 and b.ndim == 2
        if flat2d:
            val = (a.reshape(-1, a.shape[-1]) @ b).reshape(a.shape[:-1] + (b.shape[-1],))
        else:
            val = a @ b
        out = self._node(val, (self, other), None)
        if out.requires_grad:
            def bwd(g):
                if flat2d:
                    g2 = g.reshape(-1, g.shape[-1])
                    ga = (g2 @ b.T).reshape(a.shape)
                    gb = a.reshape(-1, a.shape[-1]).T @ g2
                elif b.ndim == 1:
                    ga = np.outer(g, b) if a.ndim > 1 else g * b
                    gb = _unbroadcast(a.swapaxes(-1, -2) @ g if a.ndim > 1 else a * g,
                                      b.shape)
                elif a.ndim == 1:
                    ga = g @ b.swapaxes(-1, -2)
                    gb = np.outer(a, g)
                else:
                    ga = _unbroadcast(g @ b.swapaxes(-1, -2), a.shape)
                    gb = _unbroadcast(a.swapaxes(-1, -2) @ g, b.shape)
                return ga, gb
            out._backward = bwd
        return out

    # -- shape ops

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = self._node(self.data.reshape(shape), (self,), None)
        if out.requires_grad:
            src = self.data.shape
            out._backward = lambda g: (g.reshape(src),)
        return out

    def transpose(self, axes):
        out = self._node(self.data.transpose(axes), (self,), None)
        if out.requires_grad:
            inv = np.argsort(axes)
            out._backward = lambda g: (g.transpose(inv),)
        return out

    def __getitem__(self, idx):
        out = self._node(self.data[idx], (self,), None)
        if out.requires_grad:
            src = self.data.shape
            def bwd(g):
                full = np.zeros(src, dtype=np.float64)
                full[idx] = g
                return (full,)
            out._backward = bwd
        return out

    # -- reductions

    def sum(self, axis=None, keepdims=False):
        out = self._node(self.data.sum(axis=axis, keepdims=keepdims), (self,), None)
        if out.requires_grad:
            src = self.data.shape
            def bwd(g):
                if axis is None:
                    return (np.broadcast_to(g, src).copy(),)
                g2 = g if keepdims else np.expand_dims(g, axis)
                return (np.broadcast_to(g2, src).copy(),)
            out._backward = bwd
        return out

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- pointwise nonlinearities

    def exp(self):
        val = np.exp(self.data)
        out = self._node(val, (self,), None)
        if out.requires_grad:
            out._backward = lambda g: (g * val,)
        return out

    def log(self):
        out = self._node(np.log(self.data), (self,), None)
        if out.requires_grad:
            out._backward = lambda g: (g / self.data,)
        return out

    def power(self, exponent: float):
        val = np.power(self.data, exponent)
        out = self._node(val, (self,), None)
        if out.requires_grad:
            out._backward = lambda g: (g * exponent * np.power(self.data, exponent - 1.0),)
        return out

    def gelu(self):
        """Exact Gaussian-CDF GELU: x * Phi(x).

        d/dx [x * Phi(x)] = Phi(x) + x * phi(x), with phi the standard normal
        density. Smooth everywhere, which keeps finite-difference gradient
        checks clean.
        """
        x = self.data
        cdf = erf(x * _INV_SQRT2)
        cdf += 1.0
        cdf *= 0.5
        out = self._node(x * cdf, (self,), None)
        if out.requires_grad:
            def bwd(g):
                pdf = np.exp(-0.5 * x * x)
                pdf *= _INV_SQRT2PI * x
                pdf += cdf
                return (g * pdf,)
            out._backward = bwd
        return out

    def softmax_lastaxis(self) -> "Tensor":
        """Numerically stable softmax along the last axis (fused primitive)."""
        shifted = self.data - np.max(self.data, axis=-1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=-1, keepdims=True)
        out = self._node(p, (self,), None)
        if out.requires_grad:
            def bwd(g):
                return (p * (g - np.sum(g * p, axis=-1, keepdims=True)),)
            out._backward = bwd
        return out

    # -- backward driver

    def backward(self, seed=None):
        """Accumulate gradients of self (seeded with `seed`, default ones)."""
        topo: list[Tensor] = []
        visited = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        self.grad = (np.ones_like(self.data) if seed is None
                     else np.asarray(seed, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, pg in zip(node._parents, node._backward(node.grad)):
                if not parent.requires_grad:
                    continue
                parent.grad = pg if parent.grad is None else parent.grad + pg


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def layer_norm_lastaxis(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Layer norm over the last axis (fused primitive).

    Backward uses the closed form
    dx = inv * (dxh - mean(dxh) - xh * mean(dxh * xh)) with dxh = g * gain,
    which follows from differentiating through the mean and variance.
    """
    d = x.data
    mu = d.mean(axis=-1, keepdims=True)
    centered = d - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = centered * inv
    out = Tensor._node(xh * gain.data + bias.data, (x, gain, bias), None)
    if out.requires_grad:
        gshape, bshape = gain.data.shape, bias.data.shape
        def bwd(g):
            dxh = g * gain.data
            dx = inv * (dxh - dxh.mean(axis=-1, keepdims=True)
                        - xh * np.mean(dxh * xh, axis=-1, keepdims=True))
            dgain = _unbroadcast(g * xh, gshape)
            dbias = _unbroadcast(g, bshape)
            return dx, dgain, dbias
        out._backward = bwd
    return out


def concat(tensors, axis=0) -> Tensor:
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    req = any(t.requires_grad for t in tensors)
    out = Tensor(out_data, requires_grad=req,
                 parents=tuple(tensors) if req else ())
    if req:
        sizes = [d.shape[axis] for d in datas]
        splits = np.cumsum(sizes)[:-1]
        out._backward = lambda g: tuple(np.split(g, splits, axis=axis))
    return out


# -- convolution (NHWC layout, symmetric zero padding)

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    n, h, w, c = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((n, oh, ow, kh, kw, c), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xp[:, i : i + stride * oh : stride,
                                        j : j + stride * ow : stride, :]
    return cols.reshape(n, oh, ow, kh * kw * c), (oh, ow)


def _col2im(dcols: np.ndarray, xshape, kh, kw, stride, pad, oh, ow):
    n, h, w, c = xshape
    dcols = dcols.reshape(n, oh, ow, kh, kw, c)
    dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + stride * oh : stride,
                j : j + stride * ow : stride, :] += dcols[:, :, :, i, j, :]
    return dxp[:, pad : pad + h, pad : pad + w, :]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D convolution. x: (N,H,W,Cin), weight: (KH,KW,Cin,Cout), bias: (Cout,)."""
    kh, kw, cin, cout = weight.data.shape
    cols, (oh, ow) = _im2col(x.data, kh, kw, stride, pad)
    wmat = weight.data.reshape(kh * kw * cin, cout)
    val = cols @ wmat + bias.data
    out = Tensor._node(val, (x, weight, bias), None)
    if out.requires_grad:
        xshape = x.data.shape
        def bwd(g):
            gmat = g.reshape(-1, cout)
            dw = (cols.reshape(-1, kh * kw * cin).T @ gmat).reshape(weight.data.shape)
            db = gmat.sum(axis=0)
            dcols = g @ wmat.T
            dx = _col2im(dcols, xshape, kh, kw, stride, pad, oh, ow)
            return dx, dw, db
        out._backward = bwd
    return out
