"""Shared transformer encoder and the optimizer steps that train it.

A small post-norm stack: summed token/segment/position embeddings, then
L blocks of multi-head self-attention and a GELU feed-forward, each with a
residual connection and layer norm after it. Padding is masked out of
attention so padded positions never influence real ones. Initialization
draws from named, seed-derived numpy streams so two models built with the
same seed are bitwise identical regardless of torch's global RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from lingmtl.streams import substream
from lingmtl.tokenizer import PAD_ID

LAYER_NORM_EPS = 1e-12
INIT_STD = 0.02


def truncated_normal(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    """Normal draws redrawn until within two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


class SelfAttention(nn.Module):
    def __init__(self, width: int, heads: int, dtype=torch.float32):
        super().__init__()
        if width % heads:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = width // heads
        self.query = nn.Linear(width, width, dtype=dtype)
        self.key = nn.Linear(width, width, dtype=dtype)
        self.value = nn.Linear(width, width, dtype=dtype)
        self.output = nn.Linear(width, width, dtype=dtype)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape

        def split(proj):
            return proj.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        mixed = torch.softmax(scores, dim=-1) @ v
        merged = mixed.transpose(1, 2).reshape(b, t, -1)
        return self.output(merged)


class EncoderLayer(nn.Module):
    def __init__(self, width: int, heads: int, ffn_width: int, dropout: float, dtype=torch.float32):
        super().__init__()
        self.attention = SelfAttention(width, heads, dtype=dtype)
        self.attn_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS, dtype=dtype)
        self.inner = nn.Linear(width, ffn_width, dtype=dtype)
        self.outer = nn.Linear(ffn_width, width, dtype=dtype)
        self.ffn_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS, dtype=dtype)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        x = self.attn_norm(x + self.dropout(self.attention(x, key_mask)))
        ffn = self.outer(self.dropout(torch.nn.functional.gelu(self.inner(x))))
        return self.ffn_norm(x + self.dropout(ffn))


class TransformerEncoder(nn.Module):
    """Embeddings plus a stack of post-norm blocks.

    ``layers=0`` degenerates to the raw embedding sum, which is what the
    contract demands of the identity stack.
    """

    def __init__(
        self,
        vocab_size: int,
        max_len: int = 128,
        layers: int = 2,
        width: int = 64,
        heads: int = 4,
        ffn_width: int = 256,
        dropout: float = 0.0,
        seed: int = 0,
        dtype=torch.float32,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.width = width
        self.token_embedding = nn.Embedding(vocab_size, width, dtype=dtype)
        self.segment_embedding = nn.Embedding(2, width, dtype=dtype)
        self.position_embedding = nn.Embedding(max_len, width, dtype=dtype)
        self.blocks = nn.ModuleList(
            EncoderLayer(width, heads, ffn_width, dropout, dtype=dtype)
            for _ in range(layers)
        )
        initialize_parameters(self, seed)

    def embed(self, input_ids: torch.Tensor, segment_ids: torch.Tensor) -> torch.Tensor:
        if input_ids.shape[-1] > self.max_len:
            raise ValueError(
                f"sequence length {input_ids.shape[-1]} exceeds position table {self.max_len}"
            )
        if int(input_ids.max()) >= self.vocab_size:
            raise ValueError("piece id outside the embedding table")
        positions = torch.arange(input_ids.shape[-1], device=input_ids.device)
        return (
            self.token_embedding(input_ids)
            + self.segment_embedding(segment_ids)
            + self.position_embedding(positions)[None, :, :]
        )

    def forward(self, input_ids: torch.Tensor, segment_ids: torch.Tensor) -> torch.Tensor:
        key_mask = input_ids != PAD_ID
        x = self.embed(input_ids, segment_ids)
        for block in self.blocks:
            x = block(x, key_mask)
        return x


def initialize_parameters(module: nn.Module, seed: int) -> None:
    """Deterministic truncated-normal init keyed by parameter name."""
    with torch.no_grad():
        for name, param in sorted(module.named_parameters()):
            if name.endswith("norm.weight"):
                param.fill_(1.0)
            elif name.endswith(".bias"):
                param.zero_()
            else:
                rng = substream(seed, "init", name)
                values = truncated_normal(rng, tuple(param.shape))
                param.copy_(torch.from_numpy(values).to(param.dtype))


def named_gradients(loss: torch.Tensor, module: nn.Module) -> dict[str, torch.Tensor]:
    """Gradients of a scalar loss for every parameter, by name.

    Parameters that do not reach the loss get zero gradients rather than
    being dropped, so optimizer steps always see a full gradient set.
    """
    names, params = zip(*module.named_parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {
        name: (g if g is not None else torch.zeros_like(p))
        for name, p, g in zip(names, params, grads)
    }


@dataclass
class AdamState:
    step: int = 0
    exp_avg: dict = field(default_factory=dict)
    exp_avg_sq: dict = field(default_factory=dict)


def adam_step(
    module: nn.Module,
    grads: dict[str, torch.Tensor],
    state: AdamState,
    lr: float = 3e-5,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    with torch.no_grad():
        for name, param in sorted(module.named_parameters()):
            grad = grads[name]
            if not torch.isfinite(grad).all():
                raise ValueError(f"non-finite gradient for parameter {name}")
            m = state.exp_avg.setdefault(name, torch.zeros_like(param))
            v = state.exp_avg_sq.setdefault(name, torch.zeros_like(param))
            m.mul_(beta1).add_(grad, alpha=1 - beta1)
            v.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            param.sub_(lr * m_hat / (v_hat.sqrt() + eps))


def sgd_step(module: nn.Module, grads: dict[str, torch.Tensor], lr: float) -> None:
    with torch.no_grad():
        for name, param in sorted(module.named_parameters()):
            grad = grads[name]
            if not torch.isfinite(grad).all():
                raise ValueError(f"non-finite gradient for parameter {name}")
            param.sub_(lr * grad)


def pad_batch(sequences: list[list[int]], pad_id: int = PAD_ID) -> torch.Tensor:
    """Stack ragged id lists into one right-padded LongTensor."""
    width = max(len(s) for s in sequences)
    out = torch.full((len(sequences), width), pad_id, dtype=torch.long)
    for row, seq in enumerate(sequences):
        out[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    return out
