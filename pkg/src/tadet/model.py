"""The detection network: deformable-attention Transformer encoder/decoder
with iterative segment refinement and an actionness regression head.

All sequences in a batch share one row-stacked feature buffer of shape
(B*T, C); attention sampling is kept from bleeding across video boundaries
by per-sample valid row ranges.  Normalized coordinate x in [0, 1] maps to
the continuous frame coordinate u = x * (T - 1); sampling offsets live in
frame units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ATTENTION_KINDS = ("deformable", "dense")
ENCODER_KINDS = ("transformer", "cnn1d")


@dataclass
class ModelConfig:
    num_classes: int
    feature_dim: int = 16
    width: int = 256
    ffn_dim: int = 2048
    encoder_layers: int = 2
    decoder_layers: int = 4
    num_heads: int = 8
    num_points: int = 4
    num_queries: int = 30
    sequence_length: int = 100
    roi_expansion: float = 1.5
    roi_bins: int = 16
    enable_refinement: bool = True
    enable_actionness: bool = True
    attention_kind: str = "deformable"
    encoder_kind: str = "transformer"
    background_coef: float = 0.1
    dropout: float = 0.0

    def __post_init__(self):
        if self.width % self.num_heads != 0:
            raise ValueError(f"width {self.width} not divisible by num_heads {self.num_heads}")
        if self.width % 2 != 0:
            raise ValueError("width must be even for sinusoidal positions")
        for name in (
            "num_classes",
            "feature_dim",
            "width",
            "ffn_dim",
            "encoder_layers",
            "decoder_layers",
            "num_heads",
            "num_points",
            "num_queries",
            "sequence_length",
            "roi_bins",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.roi_expansion < 1.0:
            raise ValueError("roi_expansion must be >= 1")
        if self.attention_kind not in ATTENTION_KINDS:
            raise ValueError(f"unknown attention_kind {self.attention_kind!r}")
        if self.encoder_kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder_kind {self.encoder_kind!r}")

    @property
    def head_dim(self) -> int:
        return self.width // self.num_heads


def positional_encoding(length: int, width: int) -> np.ndarray:
    """Sinusoidal positions: sin at even channels, cos at odd channels."""
    if width % 2 != 0:
        raise ValueError("positional encoding needs an even width")
    tau = np.arange(length, dtype=np.float64)[:, None]
    gamma = np.arange(width, dtype=np.float64)[None, :]
    even_exp = gamma / width
    odd_exp = (gamma - 1.0) / width
    pe = np.where(
        gamma % 2 == 0,
        np.sin(tau / np.power(10000.0, even_exp)),
        np.cos(tau / np.power(10000.0, odd_exp)),
    )
    return pe


# -- parameterized building blocks -------------------------------------------


class Linear:
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, zero_init: bool = False):
        if zero_init:
            w = np.zeros((d_in, d_out))
            b = np.zeros(d_out)
        else:
            bound = 1.0 / np.sqrt(d_in)
            w = rng.uniform(-bound, bound, size=(d_in, d_out))
            b = rng.uniform(-bound, bound, size=d_out)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(b, requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.matmul(x, self.weight)
        b = ad.broadcast_to(ad.reshape(self.bias, (1, self.bias.shape[0])), y.shape)
        return ad.add(y, b)

    def named_parameters(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


class LayerNorm:
    """Layer normalization over the channel axis with learnable affine."""

    def __init__(self, width: int):
        self.gain = Tensor(np.ones(width), requires_grad=True)
        self.bias = Tensor(np.zeros(width), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.layer_norm(x)
        g = ad.broadcast_to(ad.reshape(self.gain, (1, self.gain.shape[0])), y.shape)
        b = ad.broadcast_to(ad.reshape(self.bias, (1, self.bias.shape[0])), y.shape)
        return ad.add(ad.mul(y, g), b)

    def named_parameters(self, prefix: str):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


class FeedForward:
    def __init__(self, rng, width: int, hidden: int):
        self.fc1 = Linear(rng, width, hidden)
        self.fc2 = Linear(rng, hidden, width)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ad.relu(self.fc1(x)))

    def named_parameters(self, prefix: str):
        yield from self.fc1.named_parameters(f"{prefix}.fc1")
        yield from self.fc2.named_parameters(f"{prefix}.fc2")


class MLP:
    """Stack of linears with ReLU between (not after) them."""

    def __init__(self, rng, dims: list[int]):
        self.layers = [Linear(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ad.relu(x)
        return x

    def named_parameters(self, prefix: str):
        for i, layer in enumerate(self.layers):
            yield from layer.named_parameters(f"{prefix}.layers.{i}")


def _offset_init_pattern(num_heads: int, num_points: int) -> np.ndarray:
    """Per-head sampling offsets at init, cycling (+k, 0, -k, 0) over heads."""
    bias = np.zeros((num_heads, num_points))
    for m in range(num_heads):
        phase = m % 4
        for k in range(num_points):
            if phase == 0:
                bias[m, k] = k + 1
            elif phase == 2:
                bias[m, k] = -(k + 1)
    return bias.reshape(-1)


class DeformableAttention:
    """Attention over a sparse set of fractionally sampled key frames.

    Per head m the output is sum_k a[m,k] * Wv_m @ sample(X, u + offset[m,k]);
    heads are combined with an output projection.  Offset and attention-weight
    projections start at zero so attention is uniform over the initial
    sampling pattern.
    """

    def __init__(self, rng, width: int, num_heads: int, num_points: int):
        self.width = width
        self.num_heads = num_heads
        self.num_points = num_points
        self.head_dim = width // num_heads
        self.value_proj = Linear(rng, width, width)
        self.output_proj = Linear(rng, width, width)
        self.offset_proj = Linear(rng, width, num_heads * num_points, zero_init=True)
        self.offset_proj.bias.data[:] = _offset_init_pattern(num_heads, num_points)
        self.attn_weight_proj = Linear(rng, width, num_heads * num_points, zero_init=True)

    def __call__(
        self,
        query: Tensor,
        refs: Tensor,
        x: Tensor,
        seq_len: int,
        row_offset: np.ndarray,
    ) -> Tensor:
        """query: (N, C); refs: (N,) normalized; x: (R, C) row-stacked.

        row_offset[i] is the first row of the sequence query i attends to.
        """
        n = query.shape[0]
        m, k, ch = self.num_heads, self.num_points, self.head_dim
        offsets = self.offset_proj(query)  # (N, M*K), frame units
        logits = ad.reshape(self.attn_weight_proj(query), (n * m, k))
        weights = ad.reshape(ad.softmax(logits, axis=1), (n, m * k))

        base = ad.scale(refs, float(seq_len - 1))
        base = ad.broadcast_to(ad.reshape(base, (n, 1)), (n, m * k))
        u = ad.add(base, offsets)

        values = self.value_proj(x)
        point_offset = np.repeat(row_offset, k)
        head_outputs = []
        for h in range(m):
            v_h = ad.narrow(values, 1, h * ch, ch)
            u_h = ad.reshape(ad.narrow(u, 1, h * k, k), (n * k,))
            u_h = ad.add(u_h, Tensor(point_offset.astype(np.float64)))
            sampled = ad.interp_rows(
                v_h, u_h, lo=point_offset, hi=point_offset + seq_len - 1
            )  # (N*K, Ch)
            a_h = ad.reshape(ad.narrow(weights, 1, h * k, k), (n * k, 1))
            weighted = ad.mul(sampled, ad.broadcast_to(a_h, (n * k, ch)))
            head_outputs.append(ad.sum_(ad.reshape(weighted, (n, k, ch)), axis=1))
        combined = ad.concat(head_outputs, axis=1)
        out = self.output_proj(combined)
        if not np.all(np.isfinite(out.data)):
            raise FloatingPointError("non-finite activations in deformable attention")
        return out

    def named_parameters(self, prefix: str):
        yield from self.value_proj.named_parameters(f"{prefix}.value_proj")
        yield from self.output_proj.named_parameters(f"{prefix}.output_proj")
        yield from self.offset_proj.named_parameters(f"{prefix}.offset_proj")
        yield from self.attn_weight_proj.named_parameters(f"{prefix}.attn_weight_proj")


class DenseAttention:
    """Standard multi-head scaled-dot-product attention over all keys."""

    def __init__(self, rng, width: int, num_heads: int):
        self.width = width
        self.num_heads = num_heads
        self.head_dim = width // num_heads
        self.q_proj = Linear(rng, width, width)
        self.k_proj = Linear(rng, width, width)
        self.v_proj = Linear(rng, width, width)
        self.output_proj = Linear(rng, width, width)

    def _split(self, t: Tensor, batch: int, length: int) -> Tensor:
        m, ch = self.num_heads, self.head_dim
        t = ad.reshape(t, (batch, length, m, ch))
        t = ad.transpose(t, (0, 2, 1, 3))
        return ad.reshape(t, (batch * m, length, ch))

    def __call__(self, query: Tensor, keys: Tensor, values: Tensor, batch: int) -> Tensor:
        """query: (B*Lq, C); keys/values: (B*Lk, C)."""
        lq = query.shape[0] // batch
        lk = keys.shape[0] // batch
        m, ch = self.num_heads, self.head_dim
        q = self._split(self.q_proj(query), batch, lq)
        k = self._split(self.k_proj(keys), batch, lk)
        v = self._split(self.v_proj(values), batch, lk)
        scores = ad.scale(ad.bmm(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(ch))
        attn = ad.softmax(scores, axis=-1)
        ctx = ad.bmm(attn, v)  # (B*M, Lq, Ch)
        ctx = ad.reshape(ctx, (batch, m, lq, ch))
        ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (batch * lq, m * ch))
        return self.output_proj(ctx)

    def named_parameters(self, prefix: str):
        yield from self.q_proj.named_parameters(f"{prefix}.q_proj")
        yield from self.k_proj.named_parameters(f"{prefix}.k_proj")
        yield from self.v_proj.named_parameters(f"{prefix}.v_proj")
        yield from self.output_proj.named_parameters(f"{prefix}.output_proj")


# -- RoI alignment -----------------------------------------------------------


def temporal_roi_align(
    x: Tensor,
    segments: Tensor,
    seq_len: int,
    bins: int,
    expansion: float,
    row_offset: np.ndarray | None = None,
) -> Tensor:
    """Sample ``bins`` equal sub-intervals of each (expanded) segment.

    x: (R, C) row-stacked features; segments: (N, 2) normalized (center,
    length) pairs.  Each bin averages two regularly spaced in-bin samples.
    Returns (N, bins, C), differentiable through both the features and the
    segment coordinates.
    """
    n = segments.shape[0]
    c = x.shape[1]
    if row_offset is None:
        row_offset = np.zeros(n, dtype=np.int64)
    samples = bins * 2
    # in-bin fractions of the expanded interval, offset from the center
    frac = (np.arange(samples, dtype=np.float64) + 0.5) / samples - 0.5
    center = ad.broadcast_to(ad.narrow(segments, 1, 0, 1), (n, samples))
    length = ad.broadcast_to(ad.narrow(segments, 1, 1, 1), (n, samples))
    frac_t = ad.broadcast_to(Tensor(frac[None, :]), (n, samples))
    coords = ad.add(center, ad.mul(ad.scale(length, expansion), frac_t))
    u = ad.reshape(ad.scale(coords, float(seq_len - 1)), (n * samples,))
    point_offset = np.repeat(row_offset, samples)
    u = ad.add(u, Tensor(point_offset.astype(np.float64)))
    rows = ad.interp_rows(x, u, lo=point_offset, hi=point_offset + seq_len - 1)
    pairs = ad.reshape(rows, (n * bins, 2, c))
    return ad.reshape(ad.scale(ad.sum_(pairs, axis=1), 0.5), (n, bins, c))


# -- encoder / decoder -------------------------------------------------------


class EncoderLayer:
    def __init__(self, rng, cfg: ModelConfig):
        if cfg.attention_kind == "deformable":
            self.attn = DeformableAttention(rng, cfg.width, cfg.num_heads, cfg.num_points)
        else:
            self.attn = DenseAttention(rng, cfg.width, cfg.num_heads)
        self.norm1 = LayerNorm(cfg.width)
        self.ffn = FeedForward(rng, cfg.width, cfg.ffn_dim)
        self.norm2 = LayerNorm(cfg.width)

    def named_parameters(self, prefix: str):
        yield from self.attn.named_parameters(f"{prefix}.attn")
        yield from self.norm1.named_parameters(f"{prefix}.norm1")
        yield from self.ffn.named_parameters(f"{prefix}.ffn")
        yield from self.norm2.named_parameters(f"{prefix}.norm2")


class DecoderLayer:
    def __init__(self, rng, cfg: ModelConfig):
        self.self_attn = DenseAttention(rng, cfg.width, cfg.num_heads)
        if cfg.attention_kind == "deformable":
            self.cross_attn = DeformableAttention(rng, cfg.width, cfg.num_heads, cfg.num_points)
        else:
            self.cross_attn = DenseAttention(rng, cfg.width, cfg.num_heads)
        self.norm1 = LayerNorm(cfg.width)
        self.norm2 = LayerNorm(cfg.width)
        self.ffn = FeedForward(rng, cfg.width, cfg.ffn_dim)
        self.norm3 = LayerNorm(cfg.width)

    def named_parameters(self, prefix: str):
        yield from self.self_attn.named_parameters(f"{prefix}.self_attn")
        yield from self.cross_attn.named_parameters(f"{prefix}.cross_attn")
        yield from self.norm1.named_parameters(f"{prefix}.norm1")
        yield from self.norm2.named_parameters(f"{prefix}.norm2")
        yield from self.ffn.named_parameters(f"{prefix}.ffn")
        yield from self.norm3.named_parameters(f"{prefix}.norm3")


@dataclass
class LayerOutputs:
    """Per-decoder-layer predictions for one forward pass (batched)."""

    logits: list[Tensor] = field(default_factory=list)  # each (B*Nq, num_classes+1)
    segments: list[Tensor] = field(default_factory=list)  # each (B*Nq, 2)
    references: list[np.ndarray] = field(default_factory=list)  # each (B*Nq,)


@dataclass
class DetectionSet:
    """Per-video predictions for every query slot."""

    class_probs: np.ndarray  # (Nq, num_classes+1)
    segments: np.ndarray  # (Nq, 2) normalized (center, length)
    actionness: np.ndarray  # (Nq,)
    scores: np.ndarray  # (Nq,)
    labels: np.ndarray  # (Nq,) argmax over real classes


@dataclass
class ForwardResult:
    layers: LayerOutputs
    actionness: Tensor | None  # (B*Nq, 1) or None
    class_probs: Tensor  # (B*Nq, num_classes+1), softmax of last layer
    batch: int
    config: ModelConfig

    def detections(self) -> list[DetectionSet]:
        cfg = self.config
        nq, nc = cfg.num_queries, cfg.num_classes
        probs = self.class_probs.data.reshape(self.batch, nq, nc + 1)
        segs = self.layers.segments[-1].data.reshape(self.batch, nq, 2)
        if self.actionness is not None:
            act = self.actionness.data.reshape(self.batch, nq)
        else:
            act = np.ones((self.batch, nq))
        out = []
        for b in range(self.batch):
            real = probs[b, :, :nc]
            labels = real.argmax(axis=1)
            cls_score = real[np.arange(nq), labels]
            scores = cls_score * act[b] if cfg.enable_actionness else cls_score
            out.append(
                DetectionSet(
                    class_probs=probs[b].copy(),
                    segments=segs[b].copy(),
                    actionness=act[b].copy(),
                    scores=scores,
                    labels=labels,
                )
            )
        return out


class TemporalDetectionTransformer:
    """Feature sequence in, a fixed-size set of scored action segments out."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        cfg = config
        self.input_proj = Linear(rng, cfg.feature_dim, cfg.width)
        if cfg.encoder_kind == "transformer":
            self.encoder_layers = [EncoderLayer(rng, cfg) for _ in range(cfg.encoder_layers)]
            self.conv_layers = []
        else:
            self.encoder_layers = []
            self.conv_layers = [Linear(rng, 3 * cfg.width, cfg.width) for _ in range(2)]
        self.query_embed = Tensor(
            rng.normal(0.0, 1.0, size=(cfg.num_queries, cfg.width)), requires_grad=True
        )
        self.ref_proj = Linear(rng, cfg.width, 1)
        self.decoder_layers_ = [DecoderLayer(rng, cfg) for _ in range(cfg.decoder_layers)]
        self.class_head = Linear(rng, cfg.width, cfg.num_classes + 1)
        self.segment_head = MLP(rng, [cfg.width, cfg.width, cfg.width, cfg.width, 2])
        if cfg.enable_actionness:
            self.actionness_head = MLP(rng, [cfg.roi_bins * cfg.width, cfg.width, cfg.width, 1])
        else:
            self.actionness_head = None
        self._drop_rng = np.random.default_rng(seed + 1)
        self.training = False

    # -- parameter access ----------------------------------------------------

    def named_parameters(self):
        yield from self.input_proj.named_parameters("input_proj")
        for i, layer in enumerate(self.encoder_layers):
            yield from layer.named_parameters(f"encoder.layers.{i}")
        for i, conv in enumerate(self.conv_layers):
            yield from conv.named_parameters(f"encoder.conv.{i}")
        yield "query_embed", self.query_embed
        yield from self.ref_proj.named_parameters("ref_proj")
        for i, layer in enumerate(self.decoder_layers_):
            yield from layer.named_parameters(f"decoder.layers.{i}")
        yield from self.class_head.named_parameters("class_head")
        yield from self.segment_head.named_parameters("segment_head")
        if self.actionness_head is not None:
            yield from self.actionness_head.named_parameters("actionness_head")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def lr_multipliers(self, factor: float = 0.1) -> dict[str, float]:
        """Reduced learning rate for offset / attention-weight projections."""
        return {
            name: factor
            for name in self.parameters()
            if ".offset_proj." in name or ".attn_weight_proj." in name
        }

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        for name, p in params.items():
            if name not in state:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: checkpoint {value.shape}, model {p.shape}"
                )
            p.data = value.copy()
        extra = [k for k in state if k not in params]
        if extra:
            raise KeyError(f"checkpoint has unknown parameter {extra[0]!r}")

    # -- forward pieces ------------------------------------------------------

    def _dropout(self, t: Tensor) -> Tensor:
        p = self.config.dropout
        if not self.training or p <= 0.0:
            return t
        mask = (self._drop_rng.random(t.shape) >= p) / (1.0 - p)
        return ad.mul(t, Tensor(mask))

    def encode(self, features: np.ndarray) -> tuple[Tensor, int, int]:
        """features: (B, T, C_V) -> row-stacked encoder output (B*T, C)."""
        if features.ndim == 2:
            features = features[None]
        batch, t, cv = features.shape
        if cv != self.config.feature_dim:
            raise ValueError(
                f"feature dim {cv} does not match configured feature_dim "
                f"{self.config.feature_dim}"
            )
        cfg = self.config
        x = self.input_proj(Tensor(features.reshape(batch * t, cv)))
        if cfg.encoder_kind == "cnn1d":
            for conv in self.conv_layers:
                x3 = ad.reshape(x, (batch, t, cfg.width))
                zeros = Tensor(np.zeros((batch, 1, cfg.width)))
                left = ad.concat([zeros, ad.narrow(x3, 1, 0, t - 1)], axis=1)
                right = ad.concat([ad.narrow(x3, 1, 1, t - 1), zeros], axis=1)
                stacked = ad.reshape(ad.concat([left, x3, right], axis=2), (batch * t, 3 * cfg.width))
                x = ad.relu(conv(stacked))
            return x, batch, t
        pos = Tensor(np.tile(positional_encoding(t, cfg.width), (batch, 1)))
        refs = Tensor(np.tile(np.linspace(0.0, 1.0, t), batch)) if t > 1 else Tensor(
            np.zeros(batch * t)
        )
        row_offset = np.repeat(np.arange(batch, dtype=np.int64) * t, t)
        for layer in self.encoder_layers:
            q = ad.add(x, pos)
            if cfg.attention_kind == "deformable":
                attn_out = layer.attn(q, refs, x, t, row_offset)
            else:
                attn_out = layer.attn(q, ad.add(x, pos), x, batch)
            x = layer.norm1(ad.add(x, self._dropout(attn_out)))
            x = layer.norm2(ad.add(x, self._dropout(layer.ffn(x))))
        return x, batch, t

    def decode(self, x_e: Tensor, batch: int, t: int) -> LayerOutputs:
        cfg = self.config
        nq = cfg.num_queries
        n = batch * nq
        embed = ad.reshape(
            ad.broadcast_to(
                ad.reshape(self.query_embed, (1, nq, cfg.width)), (batch, nq, cfg.width)
            ),
            (n, cfg.width),
        )
        ref = ad.sigmoid(self.ref_proj(embed))  # (N, 1)
        prev_seg = ad.concat([ref, Tensor(np.full((n, 1), 0.5))], axis=1)
        base_seg = prev_seg
        row_offset = np.repeat(np.arange(batch, dtype=np.int64) * t, nq)
        z = embed
        out = LayerOutputs()
        for layer in self.decoder_layers_:
            qk = ad.add(z, embed)
            z = layer.norm1(ad.add(z, self._dropout(layer.self_attn(qk, qk, z, batch))))
            refs_vec = ad.reshape(ad.narrow(prev_seg, 1, 0, 1), (n,))
            if cfg.attention_kind == "deformable":
                cross = layer.cross_attn(ad.add(z, embed), refs_vec, x_e, t, row_offset)
            else:
                cross = layer.cross_attn(ad.add(z, embed), x_e, x_e, batch)
            z = layer.norm2(ad.add(z, self._dropout(cross)))
            z = layer.norm3(ad.add(z, self._dropout(layer.ffn(z))))
            logits = self.class_head(z)
            delta = self.segment_head(z)
            anchor = prev_seg if cfg.enable_refinement else base_seg
            seg = ad.sigmoid(ad.add(delta, ad.inverse_sigmoid(anchor)))
            out.logits.append(logits)
            out.segments.append(seg)
            out.references.append(refs_vec.data.copy())
            if cfg.enable_refinement:
                prev_seg = seg
        return out

    def forward(self, features: np.ndarray) -> ForwardResult:
        cfg = self.config
        x_e, batch, t = self.encode(features)
        layers = self.decode(x_e, batch, t)
        actionness = None
        if cfg.enable_actionness:
            segs = layers.segments[-1]
            row_offset = np.repeat(np.arange(batch, dtype=np.int64) * t, cfg.num_queries)
            aligned = temporal_roi_align(
                x_e, segs, t, cfg.roi_bins, cfg.roi_expansion, row_offset
            )
            flat = ad.reshape(aligned, (batch * cfg.num_queries, cfg.roi_bins * cfg.width))
            actionness = ad.sigmoid(self.actionness_head(flat))
        class_probs = ad.softmax(layers.logits[-1], axis=1)
        return ForwardResult(
            layers=layers,
            actionness=actionness,
            class_probs=class_probs,
            batch=batch,
            config=cfg,
        )

    def predict(self, features: np.ndarray) -> list[DetectionSet]:
        self.training = False
        return self.forward(features).detections()
