import copy
import math
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F


def clone(layer: nn.Module, n: int) -> nn.ModuleList:
    return nn.ModuleList([copy.deepcopy(layer) for _ in range(n)])


def sinusoidal_positions(max_positions: int, d_model: int) -> torch.Tensor:
    """Fixed sine/cosine position table [max_positions × d_model]."""
    position = torch.arange(max_positions, dtype=torch.float64).unsqueeze(1)
    div_term = torch.exp(
        torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model)
    )
    table = torch.zeros(max_positions, d_model, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term)[:, : d_model // 2]
    return table


def causal_mask(size: int, device=None) -> torch.Tensor:
    """True where a query may attend, lower triangular."""
    return torch.tril(torch.ones(size, size, dtype=torch.bool, device=device))


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int, dropout: float = 0.0):
        super().__init__()
        assert d_model % heads == 0
        self.d_k = d_model // heads
        self.heads = heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(
        self,
        query: torch.Tensor,
        key: torch.Tensor,
        value: torch.Tensor,
        key_pad_mask: Optional[torch.Tensor] = None,
        attn_mask: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        query [B, Tq, d], key/value [B, Tk, d]; key_pad_mask [B, Tk] is True on
        padding; attn_mask [Tq, Tk] is True where attention is allowed.
        """
        batch = query.size(0)
        q, k, v = [
            proj(x).view(batch, -1, self.heads, self.d_k).transpose(1, 2)
            for proj, x in ((self.q_proj, query), (self.k_proj, key), (self.v_proj, value))
        ]
        scores = torch.matmul(q, k.transpose(-2, -1)) / math.sqrt(self.d_k)
        if key_pad_mask is not None:
            scores = scores.masked_fill(key_pad_mask[:, None, None, :], float("-inf"))
        if attn_mask is not None:
            scores = scores.masked_fill(~attn_mask[None, None, :, :], float("-inf"))
        p_attn = self.dropout(scores.softmax(dim=-1))
        x = torch.matmul(p_attn, v).transpose(1, 2).contiguous().view(batch, -1, self.heads * self.d_k)
        return self.out_proj(x)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ffn_dim: int, dropout: float = 0.0):
        super().__init__()
        self.w_1 = nn.Linear(d_model, ffn_dim)
        self.w_2 = nn.Linear(ffn_dim, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # the objective has to stay differentiable everywhere
        return self.w_2(self.dropout(F.gelu(self.w_1(x))))


class EncoderLayer(nn.Module):
    """Pre-norm block: S = X + SelfAttn(LN(X)); F = S + FFN(LN(S))."""

    def __init__(self, d_model: int, heads: int, ffn_dim: int, dropout: float = 0.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, heads, dropout)
        self.ffn = FeedForward(d_model, ffn_dim, dropout)
        self.attn_norm = nn.LayerNorm(d_model)
        self.ffn_norm = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pad_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        h = self.attn_norm(x)
        s = x + self.dropout(self.self_attn(h, h, h, key_pad_mask=pad_mask))
        return s + self.dropout(self.ffn(self.ffn_norm(s)))


class CrossAttentionBlock(nn.Module):
    """CrossAttn(F_src, F_cxt): pre-normed queries from the source stream."""

    def __init__(self, d_model: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads, dropout)
        self.norm = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, memory, memory_pad_mask=None) -> torch.Tensor:
        return self.dropout(self.attn(self.norm(x), memory, memory, key_pad_mask=memory_pad_mask))


class DecoderLayer(nn.Module):
    def __init__(self, d_model: int, heads: int, ffn_dim: int, dropout: float = 0.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, heads, dropout)
        self.cross_attn = MultiHeadAttention(d_model, heads, dropout)
        self.ffn = FeedForward(d_model, ffn_dim, dropout)
        self.self_norm = nn.LayerNorm(d_model)
        self.cross_norm = nn.LayerNorm(d_model)
        self.ffn_norm = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, y, memory, memory_pad_mask, tgt_pad_mask, tgt_attn_mask) -> torch.Tensor:
        h = self.self_norm(y)
        y = y + self.dropout(
            self.self_attn(h, h, h, key_pad_mask=tgt_pad_mask, attn_mask=tgt_attn_mask)
        )
        h = self.cross_norm(y)
        y = y + self.dropout(self.cross_attn(h, memory, memory, key_pad_mask=memory_pad_mask))
        return y + self.dropout(self.ffn(self.ffn_norm(y)))
