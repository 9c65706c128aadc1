"""Ready-made architectures.

All 1D presets share one conv stack: kernel 32, stride 4, padding 16. The
number of stages depends on the node count ``N``: four above 4096, three
above 256 and two otherwise. Channel counts are the tail of ``(2, 4, 8, 16)``.
At ``N = 16384`` this reproduces the single- and two-curve tables exactly
(encoder output ``(16, 65)``, flattened concat ``2080``). At ``N = 1024`` one
stage is dropped, which gives the desk-scale network.

The decoder starts from ``N / 4**stages`` nodes with padding 14 whenever that
division is exact, so every stage multiplies the length by exactly 4.
Otherwise it retraces the encoder lengths in reverse, and padding and output
padding are derived per stage.

Places where the prose equations and the tables disagree follow the prose:

* the single-curve output sparse layer uses ReLU with a bias;
* two-curve output sparse layers are linear without bias, and the branches
  are summed in grid order before the final bias and activation.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgument
from .layers import LayerSpec, conv_out_length, deconv_out_length
from .model import Model, build_model

PRESETS = ("classical2d", "sfc1", "sfc2", "sfc1-nn", "sfc2-nn", "sfc1-nn-uv", "sfc2-nn-uv")

KERNEL, STRIDE, PAD, DECODER_PAD = 32, 4, 16, 14
CHANNELS = (2, 4, 8, 16)


def conv_stages(n: int) -> int:
    if n > 4096:
        return 4
    if n > 256:
        return 3
    return 2


def encoder_lengths(n: int, stages: int, kernel=KERNEL, stride=STRIDE, pad=PAD) -> list[int]:
    lengths = [n]
    for _ in range(stages):
        lengths.append(conv_out_length(lengths[-1], kernel, stride, pad))
        if lengths[-1] < 1:
            raise InvalidArgument(f"{n} nodes are too few for {stages} conv stages")
    return lengths


def decoder_plan(n: int, enc: list[int], kernel=KERNEL, stride=STRIDE) -> tuple[int, list[tuple[int, int]]]:
    """Start length and ``(padding, output_padding)`` per transposed stage."""
    stages = len(enc) - 1
    if n % stride ** stages == 0:
        return n // stride ** stages, [(DECODER_PAD, 0)] * stages
    targets = enc[::-1]
    plan = []
    for a, b in zip(targets, targets[1:]):
        need = (a - 1) * stride + kernel - b
        p = (need + 1) // 2
        op = 2 * p - need
        if p < 0 or op >= stride:
            raise InvalidArgument(f"cannot upsample {a} to {b} with stride {stride}")
        plan.append((p, op))
    return targets[0], plan


def _conv(cout, act, transpose=False, pad=PAD, out_pad=0, kernel=KERNEL, stride=STRIDE, kind="conv1d"):
    p = {"kernel": kernel, "stride": stride, "padding": pad, "channels_out": cout, "activation": act}
    if transpose:
        p["transpose"] = True
        if out_pad:
            p["output_padding"] = out_pad
    return LayerSpec(kind, p)


def _fc(units, act, bottleneck=False):
    p = {"units": units, "activation": act}
    if bottleneck:
        p["bottleneck"] = True
    return LayerSpec("fully_connected", p)


def _sfc_specs(n: int, c: int, latent: int, branches: int, nn: bool) -> list[LayerSpec]:
    sparse = "sparse3" if nn else "sparse1"
    stages = conv_stages(n)
    chans = CHANNELS[-stages:]
    enc = encoder_lengths(n, stages)
    start, plan = decoder_plan(n, enc)
    top = chans[-1]
    specs = [LayerSpec("permute", {"orderings": list(range(branches))}),
             LayerSpec(sparse, {"activation": "relu", "bias": True})]
    specs += [_conv(ch, "relu") for ch in chans]
    flat = top * enc[-1]
    specs.append(LayerSpec("reshape", {"shape": [1, flat], "tag": "flat"}))
    if branches > 1:
        specs.append(LayerSpec("concat_channels", {"axis": "length"}))
    h1, h2 = 256 * branches, 64 * branches
    out = top * start
    specs += [_fc(h1, "relu"), _fc(h2, "relu"), _fc(latent, "relu", bottleneck=True),
              _fc(h2, "relu"), _fc(h1, "relu"), _fc(out * branches, "relu")]
    tags = [f"sfc{m}" for m in range(branches)]
    if branches > 1:
        specs.append(LayerSpec("split_channels", {"parts": branches, "axis": "length", "tags": tags}))
    specs.append(LayerSpec("reshape", {"shape": [top, start], "tag": None if branches > 1 else "sfc0"}))
    dec_chans = list(chans[:-1][::-1]) + [c]
    specs += [_conv(ch, "relu", transpose=True, pad=p, out_pad=op)
              for ch, (p, op) in zip(dec_chans, plan)]
    if branches == 1:
        specs.append(LayerSpec(sparse, {"activation": "relu", "bias": True}))
        specs.append(LayerSpec("inverse_permute"))
    else:
        specs.append(LayerSpec(sparse, {"activation": "identity", "bias": False}))
        specs.append(LayerSpec("inverse_permute"))
        specs += _sum_branches(branches, c, "relu")
    return specs


def _sum_branches(branches: int, c: int, act: str) -> list[LayerSpec]:
    specs = [LayerSpec("concat_channels", {"axis": "channels"})]
    while branches > 1:
        if branches % 2:
            raise InvalidArgument("branch count must be a power of two")
        specs.append(LayerSpec("sum_channels"))
        branches //= 2
    specs.append(LayerSpec("activation", {"activation": act, "bias": True}))
    return specs


def _uv_specs(n: int, c: int, latent: int, branches: int) -> list[LayerSpec]:
    """Vector-field network: each velocity component gets its own smoothing."""
    stages = conv_stages(n)
    width = 16 // branches
    enc = encoder_lengths(n, stages)
    start, plan = decoder_plan(n, enc)
    specs = [LayerSpec("permute", {"orderings": list(range(branches))}),
             LayerSpec("sparse3", {"activation": "tanh", "bias": True, "groups": c, "channels_out": 2 * c})]
    specs += [_conv(width, "tanh") for _ in range(stages)]
    flat = width * enc[-1]
    specs.append(LayerSpec("reshape", {"shape": [1, flat], "tag": "flat"}))
    if branches > 1:
        specs.append(LayerSpec("concat_channels", {"axis": "length"}))
    specs += [_fc(latent, "tanh", bottleneck=True), _fc(width * start * branches, "tanh")]
    tags = [f"sfc{m}" for m in range(branches)]
    if branches > 1:
        specs.append(LayerSpec("split_channels", {"parts": branches, "axis": "length", "tags": tags}))
    specs.append(LayerSpec("reshape", {"shape": [width, start], "tag": None if branches > 1 else "sfc0"}))
    dec_chans = [width] * (stages - 1) + [2 * c]
    specs += [_conv(ch, "tanh", transpose=True, pad=p, out_pad=op)
              for ch, (p, op) in zip(dec_chans, plan)]
    specs.append(LayerSpec("sparse3", {"activation": "identity", "bias": False, "groups": c, "channels_out": c}))
    specs.append(LayerSpec("inverse_permute"))
    if branches == 1:
        specs.append(LayerSpec("activation", {"activation": "tanh", "bias": True}))
    else:
        specs += _sum_branches(branches, c, "tanh")
    return specs


def _classical_specs(n: int, c: int, latent: int) -> list[LayerSpec]:
    side = math.isqrt(n)
    if side * side != n:
        raise InvalidArgument(f"classical2d needs a square grid, got {n} nodes")
    sides = [side]
    while len(sides) < 5 and (sides[-1] > 8 or len(sides) == 1):
        sides.append(conv_out_length(sides[-1], 5, 2, 2))
    stages = len(sides) - 1
    chans = CHANNELS[-stages:]
    specs = [_conv(ch, "relu", kernel=5, stride=2, pad=2, kind="conv2d") for ch in chans]
    flat = chans[-1] * sides[-1] ** 2
    specs.append(LayerSpec("reshape", {"shape": [1, flat], "tag": "flat"}))
    specs += [_fc(256, "relu"), _fc(64, "relu"), _fc(latent, "relu", bottleneck=True),
              _fc(64, "relu"), _fc(256, "relu"), _fc(flat, "relu")]
    specs.append(LayerSpec("reshape", {"shape": [chans[-1], sides[-1] ** 2], "tag": "grid"}))
    dec_chans = list(chans[:-1][::-1]) + [c]
    rev = sides[::-1]
    for ch, a, b in zip(dec_chans, rev, rev[1:]):
        op = b - deconv_out_length(a, 5, 2, 2)
        specs.append(_conv(ch, "relu", transpose=True, pad=2, out_pad=op, kernel=5, stride=2, kind="conv2d"))
    return specs


def preset_specs(name: str, n_nodes: int, latent: int = 16, channels: int = 1) -> list[LayerSpec]:
    if latent < 1:
        raise InvalidArgument("latent size must be positive")
    if name == "classical2d":
        return _classical_specs(n_nodes, channels, latent)
    if name in ("sfc1", "sfc2", "sfc1-nn", "sfc2-nn"):
        return _sfc_specs(n_nodes, channels, latent, branches=int(name[3]), nn=name.endswith("-nn"))
    if name in ("sfc1-nn-uv", "sfc2-nn-uv"):
        return _uv_specs(n_nodes, channels, latent, branches=int(name[3]))
    raise InvalidArgument(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")


def orderings_needed(name: str) -> int:
    if name == "classical2d":
        return 0
    return int(name[3])


def build_preset(name: str, n_nodes: int, orderings=(), latent: int = 16, channels: int = 1,
                 rng: np.random.Generator | None = None) -> Model:
    specs = preset_specs(name, n_nodes, latent, channels)
    need = orderings_needed(name)
    orderings = list(orderings)
    if len(orderings) < need:
        raise InvalidArgument(f"preset {name} needs {need} orderings, got {len(orderings)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    meta = {"preset": name, "latent": latent}
    return build_model(specs, orderings[:need], rng, (channels, n_nodes), meta=meta)
