"""Sequential models built from :class:`LayerSpec` lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, ShapeMismatch
from .layers import Layer, LayerSpec, make_layer


@dataclass
class Model:
    specs: list[LayerSpec]
    orderings: list
    input_shape: tuple[int, int]
    layers: list[Layer]
    params: list[list[dict[str, np.ndarray]]]
    bottleneck: int
    meta: dict = field(default_factory=dict)

    @property
    def output_shape(self) -> tuple[int, int]:
        return self.layers[-1].out_shapes[0]

    @property
    def latent_size(self) -> int:
        c, n = self.layers[self.bottleneck].out_shapes[0]
        return c * n

    def arrays(self) -> list[np.ndarray]:
        """Every parameter array in declaration order (layer, branch, name)."""
        return [a for layer_params in self.params for p in layer_params for a in p.values()]

    def n_parameters(self) -> int:
        return sum(a.size for a in self.arrays())

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != tuple(self.input_shape):
            raise ShapeMismatch(f"input shape {x.shape[1:]} does not match model input {self.input_shape}")
        return x

    def _run(self, xs, start, stop, keep):
        caches = []
        for i in range(start, stop):
            xs, cache = self.layers[i].forward(xs, self.params[i])
            if keep:
                caches.append(cache)
        return xs, caches

    def forward(self, x: np.ndarray, keep_cache: bool = True):
        """Return ``(output, cache)`` for a batch ``(B, C, N)``."""
        xs, caches = self._run([self._check_input(x)], 0, len(self.layers), keep_cache)
        return xs[0], caches

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, keep_cache=False)[0]

    def backward(self, caches, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients for :meth:`arrays`, given the gradient of the loss at the output."""
        dys = [np.asarray(dout, dtype=np.float64)]
        grads: list[list[dict]] = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dys, grads[i] = self.layers[i].backward(dys, caches[i], self.params[i])
        flat = []
        for layer_params, layer_grads in zip(self.params, grads):
            for p, g in zip(layer_params, layer_grads):
                flat.extend(g[name] for name in p)
        return flat

    def encode(self, x: np.ndarray) -> np.ndarray:
        xs, _ = self._run([self._check_input(x)], 0, self.bottleneck + 1, False)
        return xs[0][:, 0, :]

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[None]
        if z.ndim != 2 or z.shape[1] != self.latent_size:
            raise InvalidArgument(f"latent vectors must have length {self.latent_size}, got shape {z.shape}")
        xs, _ = self._run([z[:, None, :]], self.bottleneck + 1, len(self.layers), False)
        return xs[0]


def _pick_bottleneck(specs: list[LayerSpec], layers: list[Layer]) -> int:
    marked = [i for i, s in enumerate(specs) if s.get("bottleneck")]
    if len(marked) > 1:
        raise InvalidArgument("more than one layer is marked as the bottleneck")
    if marked:
        i = marked[0]
    else:
        fc = [i for i, s in enumerate(specs) if s.kind == "fully_connected"]
        if not fc:
            raise InvalidArgument("no fully connected layer to serve as the bottleneck")
        i = min(fc, key=lambda j: (layers[j].out_shapes[0][1], j))
    if len(layers[i].out_shapes) != 1 or layers[i].out_shapes[0][0] != 1:
        raise InvalidArgument(f"bottleneck layer {i} must produce a single flat branch")
    return i


def build_model(specs, orderings, rng: np.random.Generator | None, input_shape,
                meta: dict | None = None) -> Model:
    """Validate a layer chain and initialise its parameters.

    ``input_shape`` is ``(channels, nodes)`` of the grid-ordered input.
    ``rng`` may be ``None`` when parameters will be overwritten (checkpoint load).
    """
    specs = list(specs)
    if not specs:
        raise InvalidArgument("a model needs at least one layer")
    orderings = list(orderings or [])
    shapes, tags = [tuple(int(v) for v in input_shape)], ["grid"]
    layers: list[Layer] = []
    prev = "input"
    for i, spec in enumerate(specs):
        try:
            layer = make_layer(spec, shapes, tags, orderings)
        except ShapeMismatch as exc:
            raise ShapeMismatch(
                f"layer {i} {spec.describe()} cannot follow {prev} "
                f"(shapes {shapes}, tags {tags}): {exc}") from None
        layers.append(layer)
        shapes, tags = layer.out_shapes, layer.out_tags
        prev = f"layer {i} {spec.describe()}"
    if len(shapes) != 1:
        raise ShapeMismatch(f"model ends with {len(shapes)} branches; {prev} must leave one")
    if tags[0] != "grid" or shapes[0] != tuple(input_shape):
        raise ShapeMismatch(f"model output {shapes[0]} ({tags[0]}) from {prev} does not match "
                            f"input {tuple(input_shape)} (grid)")
    bottleneck = _pick_bottleneck(specs, layers)
    rng = rng if rng is not None else np.random.default_rng(0)
    params = [layer.init_params(rng) for layer in layers]
    return Model(specs, orderings, tuple(input_shape), layers, params, bottleneck, dict(meta or {}))
