"""Layer kinds of the autoencoder engine.

A model state is a list of *branches*. Each branch is an array of shape
``(batch, channels, length)`` carrying a tag that says which node ordering
its length axis follows: ``"grid"`` for the original numbering, ``"sfc<m>"``
for curve ``m`` and ``"flat"`` for fully connected data. Layers with
parameters keep one parameter dictionary per branch, so two curves get
independent weights.

Every layer kind implements shape inference at construction time and a
forward/backward pair. ``backward`` receives the gradient with respect to the
layer output and returns gradients for the input and for every parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch

ACTIVATIONS = ("identity", "relu", "tanh")


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def activate_grad(name: str, z: np.ndarray, y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    if name == "identity":
        return dy
    if name == "relu":
        return dy * (z > 0)
    if name == "tanh":
        return dy * (1.0 - y * y)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


Shape = tuple[int, int]


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


class Layer:
    has_params = False

    def __init__(self, spec: LayerSpec, shapes: list[Shape], tags: list[str], orderings):
        self.spec = spec
        self.in_shapes = list(shapes)
        self.in_tags = list(tags)
        self.orderings = orderings
        self.out_shapes, self.out_tags = self.infer()

    def infer(self) -> tuple[list[Shape], list[str]]:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> list[dict[str, np.ndarray]]:
        return [{} for _ in self.in_shapes]

    def forward(self, xs, params):
        raise NotImplementedError

    def backward(self, dys, cache, params):
        raise NotImplementedError

    def fail(self, message: str):
        raise ShapeMismatch(f"{self.spec.describe()}: {message}")


def _ordering_index(tag: str) -> int:
    return int(tag[3:])


class Permute(Layer):
    """Grid order to curve order, one output branch per listed curve."""

    def infer(self):
        if len(self.in_shapes) != 1 or self.in_tags[0] != "grid":
            self.fail("expects a single branch in grid order")
        which = list(self.spec.get("orderings", [0]))
        c, n = self.in_shapes[0]
        for m in which:
            if m >= len(self.orderings):
                self.fail(f"ordering {m} was not supplied")
            if self.orderings[m].n != n:
                self.fail(f"ordering {m} has {self.orderings[m].n} nodes, data has {n}")
        self.which = which
        return [(c, n)] * len(which), [f"sfc{m}" for m in which]

    def forward(self, xs, params):
        x = xs[0]
        return [x[:, :, self.orderings[m].to_vertex] for m in self.which], None

    def backward(self, dys, cache, params):
        dx = np.zeros_like(dys[0])
        for m, dy in zip(self.which, dys):
            dx += dy[:, :, self.orderings[m].to_position]
        return [dx], [{}]


class InversePermute(Layer):
    """Curve order back to grid order, branch by branch."""

    def infer(self):
        for tag, (c, n) in zip(self.in_tags, self.in_shapes):
            if not tag.startswith("sfc"):
                self.fail(f"branch tagged {tag!r} is not in curve order")
            if self.orderings[_ordering_index(tag)].n != n:
                self.fail("ordering length does not match the branch length")
        return list(self.in_shapes), ["grid"] * len(self.in_shapes)

    def forward(self, xs, params):
        out = []
        for tag, x in zip(self.in_tags, xs):
            out.append(x[:, :, self.orderings[_ordering_index(tag)].to_position])
        return out, None

    def backward(self, dys, cache, params):
        out = []
        for tag, dy in zip(self.in_tags, dys):
            out.append(dy[:, :, self.orderings[_ordering_index(tag)].to_vertex])
        return out, [{} for _ in dys]


def _shift_up(x):
    # x+[i] = x[i + 1], zero past the last node
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:]
    return out


def _shift_down(x):
    # x-[i] = x[i - 1], zero before the first node
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


class Sparse(Layer):
    """Per-node weights, optionally coupling each node to its two curve neighbours.

    Channels are processed in ``groups`` independent groups. Within a group a
    single input channel is repeated to fill the output channels, and a single
    output channel is the sum over the weighted input channels.
    """

    has_params = True

    def __init__(self, spec, shapes, tags, orderings, neighbours: bool):
        self.neighbours = neighbours
        super().__init__(spec, shapes, tags, orderings)

    def infer(self):
        g = int(self.spec.get("groups", 1))
        cout = int(self.spec.get("channels_out", 0)) or None
        outs = []
        for c, n in self.in_shapes:
            co = cout or c
            if c % g or co % g:
                self.fail(f"channels {c}->{co} do not divide into {g} groups")
            ci_g, co_g = c // g, co // g
            if not (ci_g == co_g or ci_g == 1 or co_g == 1):
                self.fail(f"per-group channels {ci_g}->{co_g} need equal counts or a count of 1")
            outs.append((co, n))
        self.groups = g
        return outs, list(self.in_tags)

    def init_params(self, rng):
        plist = []
        for (c, n), (co, _) in zip(self.in_shapes, self.out_shapes):
            width = max(c, co) // self.groups * self.groups
            p = {"w": np.ones((width, n))}
            if self.neighbours:
                p["wp"] = np.zeros((width, n))
                p["wm"] = np.zeros((width, n))
            if self.spec.get("bias", True):
                p["b"] = np.zeros((co, n))
            plist.append(p)
        return plist

    def _expand(self, x, c, co):
        g = self.groups
        ci_g, co_g = c // g, co // g
        if ci_g == 1 and co_g > 1:
            b, _, n = x.shape
            return np.repeat(x.reshape(b, g, 1, n), co_g, axis=2).reshape(b, co, n)
        return x

    def _reduce(self, z, c, co):
        g = self.groups
        ci_g, co_g = c // g, co // g
        if co_g == 1 and ci_g > 1:
            b, _, n = z.shape
            return z.reshape(b, g, ci_g, n).sum(axis=2)
        return z

    def forward(self, xs, params):
        act = self.spec.get("activation", "identity")
        ys, caches = [], []
        for x, (c, _), (co, _), p in zip(xs, self.in_shapes, self.out_shapes, params):
            xe = self._expand(x, c, co)
            z = p["w"] * xe
            if self.neighbours:
                xu, xd = _shift_up(xe), _shift_down(xe)
                z = z + p["wp"] * xu + p["wm"] * xd
            else:
                xu = xd = None
            z = self._reduce(z, c, co)
            if "b" in p:
                z = z + p["b"]
            y = activate(act, z)
            ys.append(y)
            caches.append((xe, xu, xd, z, y))
        return ys, caches

    def backward(self, dys, caches, params):
        act = self.spec.get("activation", "identity")
        dxs, grads = [], []
        for dy, cache, (c, _), (co, _), p in zip(dys, caches, self.in_shapes, self.out_shapes, params):
            xe, xu, xd, z, y = cache
            dz = activate_grad(act, z, y, dy)
            gr = {}
            if "b" in p:
                gr["b"] = dz.sum(axis=0)
            g = self.groups
            ci_g, co_g = c // g, co // g
            if co_g == 1 and ci_g > 1:
                b, _, n = dz.shape
                dz = np.repeat(dz.reshape(b, g, 1, n), ci_g, axis=2).reshape(b, c, n)
            gr["w"] = (dz * xe).sum(axis=0)
            dxe = p["w"] * dz
            if self.neighbours:
                gr["wp"] = (dz * xu).sum(axis=0)
                gr["wm"] = (dz * xd).sum(axis=0)
                dxe = dxe + _shift_down(p["wp"] * dz) + _shift_up(p["wm"] * dz)
            if ci_g == 1 and co_g > 1:
                b, _, n = dxe.shape
                dxe = dxe.reshape(b, g, co_g, n).sum(axis=2)
            dxs.append(dxe)
            grads.append(gr)
        return dxs, grads


def conv_out_length(n: int, kernel: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - kernel) // stride + 1


def deconv_out_length(n: int, kernel: int, stride: int, pad: int, out_pad: int = 0) -> int:
    return (n - 1) * stride - 2 * pad + kernel + out_pad


class Conv1d(Layer):
    """Strided 1D cross-correlation, or its transpose when ``transpose`` is set.

    Weights are ``(c_out, c_in, k)`` for the forward convolution and
    ``(c_in, c_out, k)`` for the transpose.
    """

    has_params = True

    def infer(self):
        s = self.spec
        self.k, self.s = int(s.get("kernel")), int(s.get("stride", 1))
        self.p, self.op = int(s.get("padding", 0)), int(s.get("output_padding", 0))
        self.cout = int(s.get("channels_out"))
        self.transpose = bool(s.get("transpose", False))
        if self.transpose and self.op >= self.s:
            self.fail("output padding must be smaller than the stride")
        outs = []
        for c, n in self.in_shapes:
            if self.transpose:
                m = deconv_out_length(n, self.k, self.s, self.p, self.op)
            else:
                m = conv_out_length(n, self.k, self.s, self.p)
            if m < 1:
                self.fail(f"input length {n} gives no output")
            outs.append((self.cout, m))
        return outs, list(self.in_tags)

    def init_params(self, rng):
        plist = []
        for c, _ in self.in_shapes:
            shape = (c, self.cout, self.k) if self.transpose else (self.cout, c, self.k)
            plist.append({"W": glorot(rng, shape, c * self.k, self.cout * self.k),
                          "b": np.zeros(self.cout)})
        return plist

    def forward(self, xs, params):
        act = self.spec.get("activation", "identity")
        ys, caches = [], []
        for x, (_, m), p in zip(xs, self.out_shapes, params):
            if self.transpose:
                z = self._deconv(x, p["W"], m)
            else:
                z = self._conv(x, p["W"], m)
            z = z + p["b"][None, :, None]
            y = activate(act, z)
            ys.append(y)
            caches.append((x, z, y))
        return ys, caches

    def _windows(self, xp, count):
        # (B, C, count, K) view of the strided receptive fields
        return sliding_window_view(xp, self.k, axis=2)[:, :, ::self.s][:, :, :count]

    def _conv(self, x, w, m):
        xp = np.pad(x, ((0, 0), (0, 0), (self.p, self.p)))
        z = np.tensordot(self._windows(xp, m), w, axes=([1, 3], [1, 2]))
        return z.transpose(0, 2, 1)

    def _scatter(self, buf, cols, count):
        # adds cols[:, :, l, k] into buf[:, :, l * s + k]
        span = self.s * (count - 1) + 1
        for k in range(self.k):
            buf[:, :, k:k + span:self.s] += cols[..., k]

    def _deconv(self, x, w, m):
        n = x.shape[2]
        full = max(self.s * (n - 1) + self.k, self.p + m)
        buf = np.zeros((x.shape[0], self.cout, full))
        cols = np.tensordot(x, w, axes=([1], [0])).transpose(0, 2, 1, 3)
        self._scatter(buf, cols, n)
        return buf[:, :, self.p:self.p + m]

    def backward(self, dys, caches, params):
        act = self.spec.get("activation", "identity")
        dxs, grads = [], []
        for dy, (x, z, y), p in zip(dys, caches, params):
            dz = activate_grad(act, z, y, dy)
            w = p["W"]
            n = x.shape[2]
            if self.transpose:
                full = max(self.s * (n - 1) + self.k, self.p + dz.shape[2])
                dbuf = np.zeros((x.shape[0], self.cout, full))
                dbuf[:, :, self.p:self.p + dz.shape[2]] = dz
                win = self._windows(dbuf, n)
                dx = np.tensordot(win, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
                dw = np.tensordot(x, win, axes=([0, 2], [0, 2]))
            else:
                m = dz.shape[2]
                xp = np.pad(x, ((0, 0), (0, 0), (self.p, self.p)))
                dw = np.tensordot(dz, self._windows(xp, m), axes=([0, 2], [0, 2]))
                cols = np.tensordot(dz, w, axes=([1], [0])).transpose(0, 2, 1, 3)
                dxp = np.zeros_like(xp)
                self._scatter(dxp, cols, m)
                dx = dxp[:, :, self.p:self.p + n]
            dxs.append(np.ascontiguousarray(dx))
            grads.append({"W": dw, "b": dz.sum(axis=(0, 2))})
        return dxs, grads


class Conv2d(Layer):
    """Square-image convolution on branches whose length is ``side * side``."""

    has_params = True

    def infer(self):
        s = self.spec
        self.k, self.s = int(s.get("kernel")), int(s.get("stride", 1))
        self.p, self.op = int(s.get("padding", 0)), int(s.get("output_padding", 0))
        self.cout = int(s.get("channels_out"))
        self.transpose = bool(s.get("transpose", False))
        outs, sides = [], []
        for c, n in self.in_shapes:
            side = int(round(math.sqrt(n)))
            if side * side != n:
                self.fail(f"length {n} is not a square image")
            if self.transpose:
                m = deconv_out_length(side, self.k, self.s, self.p, self.op)
            else:
                m = conv_out_length(side, self.k, self.s, self.p)
            if m < 1:
                self.fail(f"image side {side} gives no output")
            outs.append((self.cout, m * m))
            sides.append((side, m))
        self.sides = sides
        return outs, list(self.in_tags)

    def init_params(self, rng):
        plist = []
        kk = self.k * self.k
        for c, _ in self.in_shapes:
            shape = (c, self.cout, self.k, self.k) if self.transpose else (self.cout, c, self.k, self.k)
            plist.append({"W": glorot(rng, shape, c * kk, self.cout * kk), "b": np.zeros(self.cout)})
        return plist

    def forward(self, xs, params):
        act = self.spec.get("activation", "identity")
        ys, caches = [], []
        for x, (side, m), p in zip(xs, self.sides, params):
            img = x.reshape(x.shape[0], x.shape[1], side, side)
            if self.transpose:
                z = self._deconv(img, p["W"], m)
            else:
                z = self._conv(img, p["W"], m)
            z = z + p["b"][None, :, None, None]
            z = z.reshape(x.shape[0], self.cout, m * m)
            y = activate(act, z)
            ys.append(y)
            caches.append((img, z, y))
        return ys, caches

    def _conv(self, img, w, m):
        p, s = self.p, self.s
        xp = np.pad(img, ((0, 0), (0, 0), (p, p), (p, p)))
        span = s * (m - 1) + 1
        z = np.zeros((img.shape[0], self.cout, m, m))
        for i in range(self.k):
            for j in range(self.k):
                sl = xp[:, :, i:i + span:s, j:j + span:s]
                z += np.einsum("bchw,dc->bdhw", sl, w[:, :, i, j], optimize=True)
        return z

    def _deconv(self, img, w, m):
        n = img.shape[2]
        s, p = self.s, self.p
        span = s * (n - 1) + 1
        full = max(span - 1 + self.k, p + m)
        buf = np.zeros((img.shape[0], self.cout, full, full))
        for i in range(self.k):
            for j in range(self.k):
                buf[:, :, i:i + span:s, j:j + span:s] += np.einsum(
                    "bchw,cd->bdhw", img, w[:, :, i, j], optimize=True)
        return buf[:, :, p:p + m, p:p + m]

    def backward(self, dys, caches, params):
        act = self.spec.get("activation", "identity")
        dxs, grads = [], []
        for dy, (img, z, y), (side, m), p in zip(dys, caches, self.sides, params):
            dz = activate_grad(act, z, y, dy).reshape(img.shape[0], self.cout, m, m)
            w = p["W"]
            dw = np.zeros_like(w)
            s, pad = self.s, self.p
            if self.transpose:
                span = s * (side - 1) + 1
                full = max(span - 1 + self.k, pad + m)
                dbuf = np.zeros((img.shape[0], self.cout, full, full))
                dbuf[:, :, pad:pad + m, pad:pad + m] = dz
                dimg = np.zeros_like(img)
                for i in range(self.k):
                    for j in range(self.k):
                        sl = dbuf[:, :, i:i + span:s, j:j + span:s]
                        dimg += np.einsum("bdhw,cd->bchw", sl, w[:, :, i, j], optimize=True)
                        dw[:, :, i, j] = np.einsum("bchw,bdhw->cd", img, sl, optimize=True)
            else:
                xp = np.pad(img, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
                dxp = np.zeros_like(xp)
                span = s * (m - 1) + 1
                for i in range(self.k):
                    for j in range(self.k):
                        sl = xp[:, :, i:i + span:s, j:j + span:s]
                        dw[:, :, i, j] = np.einsum("bdhw,bchw->dc", dz, sl, optimize=True)
                        dxp[:, :, i:i + span:s, j:j + span:s] += np.einsum(
                            "bdhw,dc->bchw", dz, w[:, :, i, j], optimize=True)
                dimg = dxp[:, :, pad:pad + side, pad:pad + side]
            dxs.append(dimg.reshape(img.shape[0], img.shape[1], side * side))
            grads.append({"W": dw, "b": dz.sum(axis=(0, 2, 3))})
        return dxs, grads


class FullyConnected(Layer):
    has_params = True

    def infer(self):
        self.units = int(self.spec.get("units"))
        for c, n in self.in_shapes:
            if c != 1:
                self.fail(f"expects flattened input, got {c} channels (reshape first)")
        return [(1, self.units)] * len(self.in_shapes), ["flat"] * len(self.in_shapes)

    def init_params(self, rng):
        return [{"W": glorot(rng, (self.units, n), n, self.units), "b": np.zeros(self.units)}
                for _, n in self.in_shapes]

    def forward(self, xs, params):
        act = self.spec.get("activation", "identity")
        ys, caches = [], []
        for x, p in zip(xs, params):
            z = (x[:, 0, :] @ p["W"].T + p["b"])[:, None, :]
            y = activate(act, z)
            ys.append(y)
            caches.append((x, z, y))
        return ys, caches

    def backward(self, dys, caches, params):
        act = self.spec.get("activation", "identity")
        dxs, grads = [], []
        for dy, (x, z, y), p in zip(dys, caches, params):
            dz = activate_grad(act, z, y, dy)[:, 0, :]
            grads.append({"W": dz.T @ x[:, 0, :], "b": dz.sum(axis=0)})
            dxs.append((dz @ p["W"])[:, None, :])
        return dxs, grads


class Activation(Layer):
    """Elementwise activation, optionally after a per-node bias."""

    has_params = True

    def infer(self):
        return list(self.in_shapes), list(self.in_tags)

    def init_params(self, rng):
        if self.spec.get("bias", False):
            return [{"b": np.zeros(shape)} for shape in self.in_shapes]
        return [{} for _ in self.in_shapes]

    def forward(self, xs, params):
        act = self.spec.get("activation", "identity")
        ys, caches = [], []
        for x, p in zip(xs, params):
            z = x + p["b"] if "b" in p else x
            y = activate(act, z)
            ys.append(y)
            caches.append((z, y))
        return ys, caches

    def backward(self, dys, caches, params):
        act = self.spec.get("activation", "identity")
        dxs, grads = [], []
        for dy, (z, y), p in zip(dys, caches, params):
            dz = activate_grad(act, z, y, dy)
            dxs.append(dz)
            grads.append({"b": dz.sum(axis=0)} if "b" in p else {})
        return dxs, grads


class Reshape(Layer):
    def infer(self):
        c, n = (int(v) for v in self.spec.get("shape"))
        for ci, ni in self.in_shapes:
            if ci * ni != c * n:
                self.fail(f"cannot reshape ({ci}, {ni}) to ({c}, {n})")
        tag = self.spec.get("tag")
        tags = [tag] * len(self.in_tags) if tag else list(self.in_tags)
        return [(c, n)] * len(self.in_shapes), tags

    def forward(self, xs, params):
        c, n = self.out_shapes[0]
        return [x.reshape(x.shape[0], c, n) for x in xs], None

    def backward(self, dys, cache, params):
        return [dy.reshape(dy.shape[0], *shape) for dy, shape in zip(dys, self.in_shapes)], \
            [{} for _ in dys]


class ConcatChannels(Layer):
    """Join all branches into one along the channel or the length axis."""

    def infer(self):
        self.axis = 1 if self.spec.get("axis", "channels") == "channels" else 2
        cs = [s[0] for s in self.in_shapes]
        ns = [s[1] for s in self.in_shapes]
        if self.axis == 1 and len(set(ns)) != 1:
            self.fail(f"channel concat needs equal lengths, got {ns}")
        if self.axis == 2 and len(set(cs)) != 1:
            self.fail(f"length concat needs equal channel counts, got {cs}")
        out = (sum(cs), ns[0]) if self.axis == 1 else (cs[0], sum(ns))
        tags = set(self.in_tags)
        return [out], [tags.pop() if len(tags) == 1 else "flat"]

    def forward(self, xs, params):
        return [np.concatenate(xs, axis=self.axis)], None

    def backward(self, dys, cache, params):
        sizes = [s[self.axis - 1] for s in self.in_shapes]
        cuts = np.cumsum(sizes)[:-1]
        return np.split(dys[0], cuts, axis=self.axis), [{}]


class SplitChannels(Layer):
    """Cut one branch into ``parts`` equal branches along an axis."""

    def infer(self):
        if len(self.in_shapes) != 1:
            self.fail("expects a single branch")
        self.parts = int(self.spec.get("parts", 2))
        self.axis = 1 if self.spec.get("axis", "channels") == "channels" else 2
        c, n = self.in_shapes[0]
        size = c if self.axis == 1 else n
        if size % self.parts:
            self.fail(f"size {size} does not split into {self.parts} parts")
        out = (c // self.parts, n) if self.axis == 1 else (c, n // self.parts)
        tags = list(self.spec.get("tags") or [self.in_tags[0]] * self.parts)
        if len(tags) != self.parts:
            self.fail("need one tag per part")
        return [out] * self.parts, tags

    def forward(self, xs, params):
        return np.split(xs[0], self.parts, axis=self.axis), None

    def backward(self, dys, cache, params):
        return [np.concatenate(dys, axis=self.axis)], [{}]


class SumChannels(Layer):
    """``out[c] = in[c] + in[c + C/2]``, halving the channel count."""

    def infer(self):
        outs = []
        for c, n in self.in_shapes:
            if c % 2:
                self.fail(f"odd channel count {c}")
            outs.append((c // 2, n))
        return outs, list(self.in_tags)

    def forward(self, xs, params):
        out = []
        for x in xs:
            h = x.shape[1] // 2
            out.append(x[:, :h] + x[:, h:])
        return out, None

    def backward(self, dys, cache, params):
        return [np.concatenate([dy, dy], axis=1) for dy in dys], [{} for _ in dys]


KINDS = {
    "permute": Permute,
    "inverse_permute": InversePermute,
    "sparse1": lambda s, sh, t, o: Sparse(s, sh, t, o, neighbours=False),
    "sparse3": lambda s, sh, t, o: Sparse(s, sh, t, o, neighbours=True),
    "conv1d": Conv1d,
    "conv2d": Conv2d,
    "fully_connected": FullyConnected,
    "activation": Activation,
    "split_channels": SplitChannels,
    "concat_channels": ConcatChannels,
    "sum_channels": SumChannels,
    "reshape": Reshape,
}

KIND_TAGS = {name: i for i, name in enumerate(KINDS)}


def make_layer(spec: LayerSpec, shapes, tags, orderings) -> Layer:
    try:
        factory = KINDS[spec.kind]
    except KeyError:
        raise ShapeMismatch(f"unknown layer kind {spec.kind!r}") from None
    act = spec.get("activation")
    if act is not None and act not in ACTIVATIONS:
        raise ShapeMismatch(f"{spec.describe()}: unknown activation {act!r}")
    return factory(spec, shapes, tags, orderings)
