"""The full detector: field-aware autoencoder plus density estimator.

This module owns the parameter namespace ("ae.*" / "est.*") used by the
optimizers, the persistence layer, and the freeze contracts, and provides
the three loss entry points the training schedule gates between.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autoencoder import Autoencoder, FieldTransformSpec
from .data import Dataset, RecordSchema, as_matrix
from .errors import SchemaError
from .estimator import Estimator
from .nn import Array, merge_grads


@dataclass
class ModelConfig:
    encoder_sizes: tuple[int, ...] = (64, 32, 16)
    embed_cap: int = 32
    cont_threshold: int = 32
    g_dim: int = 32
    dropout_ae: float = 0.2
    dropout_est: float = 0.1

    def __post_init__(self):
        self.encoder_sizes = tuple(int(s) for s in self.encoder_sizes)
        if len(self.encoder_sizes) < 1:
            raise ValueError("need at least one encoder layer")

    @property
    def latent_dim(self) -> int:
        return self.encoder_sizes[-1]

    def to_json(self) -> dict:
        return {
            "encoder_sizes": list(self.encoder_sizes),
            "embed_cap": self.embed_cap,
            "cont_threshold": self.cont_threshold,
            "g_dim": self.g_dim,
            "dropout_ae": self.dropout_ae,
            "dropout_est": self.dropout_est,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(tuple(obj["encoder_sizes"]), obj["embed_cap"], obj["cont_threshold"],
                   obj["g_dim"], obj["dropout_ae"], obj["dropout_est"])


class ChadModel:
    """Autoencoder + estimator with a shared flat parameter view."""

    def __init__(self, schema: RecordSchema, config: ModelConfig | None = None,
                 rng: np.random.Generator | None = None,
                 transform_spec: FieldTransformSpec | None = None):
        if config is None:
            config = ModelConfig()
        if rng is None:
            rng = np.random.default_rng(0)
        if transform_spec is None:
            transform_spec = FieldTransformSpec.for_schema(
                schema, config.embed_cap, config.cont_threshold, config.g_dim)
        self.schema = schema
        self.config = config
        self.autoencoder = Autoencoder(schema, transform_spec, config.encoder_sizes,
                                       config.dropout_ae, rng)
        self.estimator = Estimator(config.latent_dim, config.dropout_est, rng)

    @property
    def latent_dim(self) -> int:
        return self.autoencoder.latent_dim

    # ---- parameter views -------------------------------------------------

    def params(self) -> dict[str, Array]:
        out = {f"ae.{k}": v for k, v in self.autoencoder.params().items()}
        out.update({f"est.{k}": v for k, v in self.estimator.params().items()})
        return out

    def autoencoder_params(self) -> dict[str, Array]:
        return {k: v for k, v in self.params().items() if k.startswith("ae.")}

    def estimator_params(self) -> dict[str, Array]:
        return {k: v for k, v in self.params().items() if k.startswith("est.")}

    def snapshot(self, keys=None) -> dict[str, Array]:
        """Copies of parameters (for bitwise freeze checks)."""
        params = self.params()
        if keys is None:
            keys = params.keys()
        return {k: params[k].copy() for k in keys}

    # ---- forward passes --------------------------------------------------

    def encode(self, cat: Array, cont: Array, train: bool = False,
               rng: np.random.Generator | None = None) -> Array:
        x_e, _ = self.autoencoder.encode(cat, cont, train, rng)
        return x_e

    def encode_dataset(self, dataset: Dataset) -> Array:
        self.check_schema(dataset)
        return self.encode(dataset.cat, dataset.cont)

    def score_records(self, cat: Array, cont: Array) -> Array:
        """Likelihood score per record, dropout off."""
        return self.estimator.score(self.encode(cat, cont))

    def check_schema(self, dataset: Dataset):
        if dataset.schema.hash() != self.schema.hash():
            raise SchemaError("dataset schema does not match the model schema")

    # ---- losses ----------------------------------------------------------

    def loss_recon(self, cat: Array, cont: Array, train: bool = False,
                   rng: np.random.Generator | None = None):
        loss, ae_grads = self.autoencoder.reconstruction_loss(cat, cont, train, rng)
        return loss, {f"ae.{k}": v for k, v in ae_grads.items()}

    def loss_estimator(self, cat: Array, cont: Array, neg_cat: Array, neg_cont: Array,
                       noise: Array | None, gamma: float, train_encoder: bool,
                       train: bool = False, rng: np.random.Generator | None = None):
        """Contrastive loss over a batch and its negatives.

        ``neg_cat``/``neg_cont`` hold K negatives per record, flattened
        row-major; ``noise`` is an optional precomputed (B*K, p) latent
        offset. When ``train_encoder`` is set the gradient continues through
        the encoder and field transforms on both the positive and negative
        paths; otherwise only estimator parameters receive gradient.
        """
        if self.schema.k > 0:
            b = as_matrix(cat, self.schema.k, dtype=np.int64).shape[0]
            s = as_matrix(neg_cat, self.schema.k, dtype=np.int64).shape[0]
        else:
            b = as_matrix(cont, self.schema.r).shape[0]
            s = as_matrix(neg_cont, self.schema.r).shape[0]
        if b == 0 or s % max(b, 1) != 0:
            raise ValueError("negative count must be a positive multiple of the batch size")
        k = s // b
        p = self.latent_dim

        ae = self.autoencoder
        x_e, pos_ctx = ae.encode(cat, cont, train, rng)
        z_e, neg_ctx = ae.encode(neg_cat, neg_cont, train, rng)
        if noise is not None:
            z_in = z_e + noise
        else:
            z_in = z_e

        loss, est_grads, g_pos_lat, g_neg_lat = self.estimator.loss(
            x_e, z_in.reshape(b, k, p), gamma, train, rng)
        grads = {f"est.{key}": v for key, v in est_grads.items()}

        if train_encoder:
            ae_grads: dict[str, Array] = {}
            for ctx, g_lat in ((pos_ctx, g_pos_lat), (neg_ctx, g_neg_lat.reshape(s, p))):
                ft_cache, enc_caches, _ = ctx
                g_xt, enc_g = ae.encoder.backward(enc_caches, g_lat)
                merge_grads(ae_grads, {f"enc.{key}": v for key, v in enc_g.items()})
                merge_grads(ae_grads, ae.transform.backward(ft_cache, g_xt))
            grads.update({f"ae.{key}": v for key, v in ae_grads.items()})
        return loss, grads

    def loss_joint(self, cat, cont, neg_cat, neg_cont, noise, gates, lam: float,
                   gamma: float, train: bool = False,
                   rng: np.random.Generator | None = None,
                   train_encoder: bool = True):
        """Gated sum of the two losses; a term with a zero gate is skipped.

        Returns (total, grads, recon_part, est_part); the skipped parts are
        reported as None.
        """
        gate_recon, gate_est = gates
        total = 0.0
        grads: dict[str, Array] = {}
        recon_part = est_part = None
        if gate_recon:
            recon_part, g = self.loss_recon(cat, cont, train, rng)
            total += lam * recon_part
            merge_grads(grads, g, scale=lam)
        if gate_est:
            est_part, g = self.loss_estimator(
                cat, cont, neg_cat, neg_cont, noise, gamma,
                train_encoder=train_encoder, train=train, rng=rng)
            total += est_part
            merge_grads(grads, g)
        return total, grads, recon_part, est_part
