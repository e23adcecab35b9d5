"""Analytic multiply-add counts for one forward pass.

The convention, stated in every report header: multiply-adds of linear
projections, attention interactions/sampling, and feed-forward layers only;
activations and normalizations are not counted.  Absolute numbers therefore
depend on the convention, but ratios between variants are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ModelConfig

CONVENTION = (
    "multiply-adds of linear maps, attention interactions/sampling, and FFNs; "
    "activations and normalizations excluded"
)


@dataclass
class FlopsEstimate:
    total: float
    components: dict[str, float]

    def render(self) -> str:
        lines = [f"# convention: {CONVENTION}"]
        for name, value in self.components.items():
            lines.append(f"{name}={value:.0f}")
        lines.append(f"total_madds={self.total:.0f}")
        return "\n".join(lines)


def _deformable_attention(cfg: ModelConfig, n_queries: int, n_keys: int) -> float:
    c, m, k = cfg.width, cfg.num_heads, cfg.num_points
    value = n_keys * c * c
    output = n_queries * c * c
    offsets_and_weights = 2 * n_queries * c * m * k
    sampling = n_queries * m * k * (2 * (c // m))  # two-row lerp per channel
    combine = n_queries * k * c
    return value + output + offsets_and_weights + sampling + combine


def _dense_attention(cfg: ModelConfig, n_queries: int, n_keys: int) -> float:
    c = cfg.width
    projections = (2 * n_keys + 2 * n_queries) * c * c
    interactions = 2 * n_queries * n_keys * c  # scores plus weighted values
    return projections + interactions


def _ffn(cfg: ModelConfig, n: int) -> float:
    return 2 * n * cfg.width * cfg.ffn_dim


def estimate_flops(cfg: ModelConfig, length: int) -> FlopsEstimate:
    """Exact multiply-add count of one forward pass at sequence length T."""
    c, nq = cfg.width, cfg.num_queries
    comp: dict[str, float] = {}
    comp["input_proj"] = length * cfg.feature_dim * c

    if cfg.encoder_kind == "cnn1d":
        comp["encoder"] = 2 * length * 3 * c * c
    else:
        if cfg.attention_kind == "deformable":
            attn = _deformable_attention(cfg, length, length)
        else:
            attn = _dense_attention(cfg, length, length)
        comp["encoder"] = cfg.encoder_layers * (attn + _ffn(cfg, length))

    self_attn = _dense_attention(cfg, nq, nq)
    if cfg.attention_kind == "deformable":
        cross = _deformable_attention(cfg, nq, length)
    else:
        cross = _dense_attention(cfg, nq, length)
    heads = nq * c * (cfg.num_classes + 1) + nq * (3 * c * c + 2 * c) + nq * c
    comp["decoder"] = cfg.decoder_layers * (self_attn + cross + _ffn(cfg, nq) + heads)

    if cfg.enable_actionness:
        sampling = nq * cfg.roi_bins * 2 * 2 * c
        head = nq * (cfg.roi_bins * c * c + c * c + c)
        comp["actionness"] = sampling + head
    else:
        comp["actionness"] = 0.0

    total = float(sum(comp.values()))
    return FlopsEstimate(total=total, components=comp)
