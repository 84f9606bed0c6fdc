"""Field-aware asymmetric autoencoder.

The input layer is not a plain dense map: each categorical field gets its
own linear embedding, and the continuous block passes through either the
identity or a learned linear map (for wide blocks). The concatenation of
all transformed fields feeds a tanh encoder pyramid; a dense decoder with
a sigmoid output layer reconstructs the concatenated representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Record, RecordSchema, as_matrix
from .errors import SchemaError
from .nn import Array, DenseStack, glorot_uniform, mse_loss, mse_loss_backward

CONT_TRANSFORM_THRESHOLD = 32


def default_embed_dim(arity: int, cap: int = 32) -> int:
    """Sublinear embedding width so high-arity fields stay tractable."""
    return min(int(math.ceil(math.sqrt(arity))) + 1, cap)


@dataclass
class FieldTransformSpec:
    """Widths of the per-field input transforms.

    ``embed_dims`` has one entry per categorical field. The continuous block
    is passed through unchanged unless it is wider than the threshold, in
    which case a learned linear map to ``g_dim`` is used.
    """

    embed_dims: tuple[int, ...]
    cont_dim: int
    cont_mode: str = "identity"      # "identity" | "linear"
    g_dim: int = 32

    def __post_init__(self):
        self.embed_dims = tuple(int(e) for e in self.embed_dims)
        if any(e < 1 for e in self.embed_dims):
            raise ValueError("embedding dims must be >= 1")
        if self.cont_mode not in ("identity", "linear"):
            raise ValueError(f"unknown continuous mode {self.cont_mode!r}")

    @classmethod
    def for_schema(cls, schema: RecordSchema, embed_cap: int = 32,
                   cont_threshold: int = CONT_TRANSFORM_THRESHOLD,
                   g_dim: int = 32) -> "FieldTransformSpec":
        mode = "linear" if schema.r > cont_threshold else "identity"
        return cls(
            embed_dims=tuple(default_embed_dim(a, embed_cap) for a in schema.arities),
            cont_dim=schema.r,
            cont_mode=mode,
            g_dim=g_dim,
        )

    @property
    def output_dim(self) -> int:
        cont = self.g_dim if self.cont_mode == "linear" else self.cont_dim
        return sum(self.embed_dims) + cont

    def to_json(self) -> dict:
        return {
            "embed_dims": list(self.embed_dims),
            "cont_dim": self.cont_dim,
            "cont_mode": self.cont_mode,
            "g_dim": self.g_dim,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FieldTransformSpec":
        return cls(tuple(obj["embed_dims"]), obj["cont_dim"], obj["cont_mode"], obj["g_dim"])


class FieldTransform:
    """Concatenation of per-field embeddings and the continuous block."""

    def __init__(self, schema: RecordSchema, spec: FieldTransformSpec,
                 rng: np.random.Generator | None = None):
        if len(spec.embed_dims) != schema.k:
            raise SchemaError("spec embedding count does not match schema")
        if spec.cont_dim != schema.r:
            raise SchemaError("spec continuous width does not match schema")
        if rng is None:
            rng = np.random.default_rng(0)
        self.schema = schema
        self.spec = spec
        self.embeddings = [
            glorot_uniform(rng, a, e, (a, e))
            for a, e in zip(schema.arities, spec.embed_dims)
        ]
        if spec.cont_mode == "linear":
            self.g_weight = glorot_uniform(rng, schema.r, spec.g_dim, (spec.g_dim, schema.r))
        else:
            self.g_weight = None

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def forward(self, cat: Array, cont: Array):
        if self.schema.k > 0:
            cat = as_matrix(cat, self.schema.k, dtype=np.int64)
            cont = as_matrix(cont, self.schema.r, rows=cat.shape[0])
        else:
            cont = as_matrix(cont, self.schema.r)
            cat = as_matrix(cat, 0, rows=cont.shape[0], dtype=np.int64)
        for w, a in enumerate(self.schema.arities):
            if self.schema.k and ((cat[:, w] < 0).any() or (cat[:, w] >= a).any()):
                raise SchemaError(
                    f"category index out of range for field "
                    f"{self.schema.cat_fields[w]!r} (arity {a})")
        blocks = [self.embeddings[w][cat[:, w]] for w in range(self.schema.k)]
        if self.g_weight is not None:
            blocks.append(cont @ self.g_weight.T)
        else:
            blocks.append(cont)
        x_t = np.concatenate(blocks, axis=1) if blocks else cont
        return x_t, (cat, cont)

    def backward(self, cache, grad_xt: Array) -> dict[str, Array]:
        cat, cont = cache
        grads: dict[str, Array] = {}
        offset = 0
        for w, e in enumerate(self.spec.embed_dims):
            block = grad_xt[:, offset:offset + e]
            g = np.zeros_like(self.embeddings[w])
            np.add.at(g, cat[:, w], block)
            grads[f"emb.{w}"] = g
            offset += e
        if self.g_weight is not None:
            block = grad_xt[:, offset:offset + self.spec.g_dim]
            grads["g.W"] = block.T @ cont
        return grads

    def params(self) -> dict[str, Array]:
        out = {f"emb.{w}": E for w, E in enumerate(self.embeddings)}
        if self.g_weight is not None:
            out["g.W"] = self.g_weight
        return out


def field_transform(record: Record, transform: FieldTransform) -> Array:
    """Transformed representation of a single record."""
    x_t, _ = transform.forward(record.cat[None, :], record.cont[None, :])
    return x_t[0]


class Autoencoder:
    """Field transform + tanh encoder pyramid + dense decoder.

    The decoder mirrors the encoder's hidden widths and ends in a sigmoid,
    so reconstructions live in the open unit interval. Dropout applies to
    hidden activations during training only.
    """

    def __init__(self, schema: RecordSchema, spec: FieldTransformSpec,
                 encoder_sizes=(64, 32, 16), dropout: float = 0.2,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.schema = schema
        self.transform = FieldTransform(schema, spec, rng)
        d_t = self.transform.output_dim
        enc_sizes = [d_t, *encoder_sizes]
        self.encoder = DenseStack(enc_sizes, ["tanh"] * (len(enc_sizes) - 1), dropout, rng)
        dec_hidden = list(reversed(encoder_sizes[:-1]))
        dec_sizes = [encoder_sizes[-1], *dec_hidden, d_t]
        activations = ["tanh"] * len(dec_hidden) + ["sigmoid"]
        self.decoder = DenseStack(dec_sizes, activations, dropout, rng)
        self.encoder_sizes = tuple(encoder_sizes)
        self.dropout = dropout

    @property
    def latent_dim(self) -> int:
        return self.encoder_sizes[-1]

    @property
    def transformed_dim(self) -> int:
        return self.transform.output_dim

    def encode(self, cat: Array, cont: Array, train: bool = False,
               rng: np.random.Generator | None = None):
        x_t, ft_cache = self.transform.forward(cat, cont)
        x_e, enc_caches = self.encoder.forward(x_t, train, rng)
        return x_e, (ft_cache, enc_caches, x_t)

    def decode(self, x_e: Array, train: bool = False,
               rng: np.random.Generator | None = None):
        return self.decoder.forward(x_e, train, rng)

    def reconstruction_loss(self, cat: Array, cont: Array, train: bool = False,
                            rng: np.random.Generator | None = None):
        """Mean squared error between the transformed input and its
        reconstruction, with gradients for every autoencoder parameter.

        The transformed input is itself a function of the embeddings, so the
        target side contributes gradient too.
        """
        x_e, (ft_cache, enc_caches, x_t) = self.encode(cat, cont, train, rng)
        x_hat, dec_caches = self.decode(x_e, train, rng)
        loss = mse_loss(x_t, x_hat)
        g_xt_target, g_xhat = mse_loss_backward(x_t, x_hat)
        g_xe, dec_grads = self.decoder.backward(dec_caches, g_xhat)
        g_xt_enc, enc_grads = self.encoder.backward(enc_caches, g_xe)
        ft_grads = self.transform.backward(ft_cache, g_xt_enc + g_xt_target)
        grads = {f"enc.{k}": v for k, v in enc_grads.items()}
        grads.update({f"dec.{k}": v for k, v in dec_grads.items()})
        grads.update(ft_grads)
        return loss, grads

    def params(self) -> dict[str, Array]:
        out = dict(self.transform.params())
        out.update({f"enc.{k}": v for k, v in self.encoder.params().items()})
        out.update({f"dec.{k}": v for k, v in self.decoder.params().items()})
        return out

    def encoder_param_keys(self) -> tuple[str, ...]:
        """Keys of the parameters that feed the latent representation."""
        keys = [k for k in self.params() if not k.startswith("dec.")]
        return tuple(keys)
