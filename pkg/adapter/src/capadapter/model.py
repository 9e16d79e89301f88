"""Feature-conditioned GRU captioner and its checkpoint format.

A deliberately small architecture: pooled visual features initialize the GRU
hidden state, a token embedding feeds each step, and a linear head emits
next-token logits. The top vocabulary id (vocab_size - 1) is the stop symbol
and one extra embedding row serves as the begin-of-sequence input. Checkpoints
carry the architecture config plus a tokenizer id so an export job can refuse
to mix members with incompatible tokenizations.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class CaptionerConfig:
    vocab_size: int
    feature_dim: int
    embed_dim: int = 32
    hidden_dim: int = 64
    tokenizer_id: str = "unit-bpe-v1"

    @property
    def stop_id(self) -> int:
        return self.vocab_size - 1

    @property
    def bos_id(self) -> int:
        return self.vocab_size  # extra embedding row, never emitted


class Captioner(nn.Module):
    def __init__(self, config: CaptionerConfig):
        super().__init__()
        self.config = config
        self.embed = nn.Embedding(config.vocab_size + 1, config.embed_dim)
        self.feat_proj = nn.Linear(config.feature_dim, config.hidden_dim)
        self.gru = nn.GRU(config.embed_dim, config.hidden_dim, batch_first=True)
        self.head = nn.Linear(config.hidden_dim, config.vocab_size)

    def initial_hidden(self, features: torch.Tensor) -> torch.Tensor:
        h0 = torch.tanh(self.feat_proj(features))
        return h0.unsqueeze(0).unsqueeze(0)  # (layers, batch=1, hidden)

    @torch.no_grad()
    def prefix_distributions(self, features: torch.Tensor, tokens) -> torch.Tensor:
        """Softmax over the next token at every position of a fixed sequence.

        Row w is P(token | tokens[:w], features): the force-decoding view used
        to cross-evaluate one member's samples under another member.
        """
        inputs = torch.tensor([self.config.bos_id, *tokens[:-1]], dtype=torch.long)
        emb = self.embed(inputs).unsqueeze(0)
        out, _ = self.gru(emb, self.initial_hidden(features))
        logits = self.head(out.squeeze(0))
        return torch.softmax(logits.double(), dim=-1)

    @torch.no_grad()
    def sample(self, features: torch.Tensor, max_len: int, temperature: float,
               generator: torch.Generator, greedy: bool = False) -> list:
        """One decoded sequence; ends with the stop id unless max_len cuts it."""
        hidden = self.initial_hidden(features)
        token = self.config.bos_id
        tokens: list = []
        for _ in range(max_len):
            emb = self.embed(torch.tensor([[token]], dtype=torch.long))
            out, hidden = self.gru(emb, hidden)
            logits = self.head(out[0, 0])
            if greedy:
                token = int(torch.argmax(logits))
            else:
                probs = torch.softmax(logits.double() / temperature, dim=-1)
                token = int(torch.multinomial(probs, 1, generator=generator))
            tokens.append(token)
            if token == self.config.stop_id:
                break
        return tokens


def save_checkpoint(model: Captioner, path) -> None:
    torch.save({"config": asdict(model.config),
                "state_dict": model.state_dict()}, path)


def load_checkpoint(path) -> Captioner:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = CaptionerConfig(**payload["config"])
    model = Captioner(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def init_checkpoint(path, vocab_size: int, feature_dim: int, seed: int,
                    embed_dim: int = 32, hidden_dim: int = 64,
                    tokenizer_id: str = "unit-bpe-v1") -> Captioner:
    """Randomly initialized checkpoint, for demos and round-trip tests."""
    torch.manual_seed(seed)
    model = Captioner(CaptionerConfig(vocab_size, feature_dim, embed_dim,
                                      hidden_dim, tokenizer_id))
    save_checkpoint(model, path)
    return model
