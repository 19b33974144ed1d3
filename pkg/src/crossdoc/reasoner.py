"""Cross-path relation matrix and self-attention over its flattened cells.

Cell (u, v) of the matrix is ``ReLU(E_r ReLU(E_u e_u + E_v e_v))``. The |E|^2
cells are attended jointly by a stack of transformer blocks; each text path
reads its relation vector from the (source, target) cell of the last block,
with that cell's attention restricted to cells whose entities occur in the path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReasonerConfig:
    num_layers: int = 2
    num_heads: int = 4
    masked_readout: bool = True
    max_entities: int = 32

    def __post_init__(self):
        if self.num_layers < 0 or self.num_heads < 1:
            raise ConfigError("reasoner num_layers >= 0 and num_heads >= 1 required")
        if self.max_entities < 2:
            raise ConfigError("max_entities must be >= 2")


@dataclass
class RelationMatrix:
    entities: list[str]
    cells: np.ndarray  # |E| x |E| x d

    @property
    def flat(self) -> np.ndarray:
        n, _, d = self.cells.shape
        return self.cells.reshape(n * n, d)

    @property
    def pair_index(self) -> dict[tuple[str, str], int]:
        n = len(self.entities)
        return {(u, v): i * n + j for i, u in enumerate(self.entities) for j, v in enumerate(self.entities)}


@dataclass
class PathRelationRep:
    path_id: str
    vector: np.ndarray


def init_reasoner_params(d: int, cfg: ReasonerConfig, rng, prefix="rsn") -> dict[str, np.ndarray]:
    p: dict[str, np.ndarray] = {}
    for name in ("Eu", "Ev", "Er"):
        nn.init_linear(p, f"{prefix}.{name}", d, d, rng, scale=np.sqrt(2.0) if name == "Er" else 1.0)
    for i in range(cfg.num_layers):
        nn.init_block(p, f"{prefix}.{i}", d, rng)
    return p


def relation_rep(e_u, e_v, params, prefix="rsn"):
    """r_{u,v} for a single ordered pair."""
    inner = np.maximum(e_u @ params[f"{prefix}.Eu.W"] + params[f"{prefix}.Eu.b"]
                       + e_v @ params[f"{prefix}.Ev.W"] + params[f"{prefix}.Ev.b"], 0.0)
    return np.maximum(inner @ params[f"{prefix}.Er.W"] + params[f"{prefix}.Er.b"], 0.0)


def cells_forward(x, params, prefix="rsn"):
    """All |E|^2 cells from the entity matrix ``x`` (|E| x d); returns flat cells, row u*|E|+v."""
    n, d = x.shape
    u, _ = nn.linear_forward(x, params, f"{prefix}.Eu")
    v, _ = nn.linear_forward(x, params, f"{prefix}.Ev")
    pre = (u[:, None, :] + v[None, :, :]).reshape(n * n, d)
    inner = np.maximum(pre, 0.0)
    out_pre, _ = nn.linear_forward(inner, params, f"{prefix}.Er")
    out = np.maximum(out_pre, 0.0)
    return out, (x, pre, inner, out_pre)


def cells_backward(dflat, cache, params, grads, prefix="rsn"):
    x, pre, inner, out_pre = cache
    n, d = x.shape
    dout_pre = dflat * (out_pre > 0)
    dinner = nn.linear_backward(dout_pre, inner, params, grads, f"{prefix}.Er")
    dpre = (dinner * (pre > 0)).reshape(n, n, d)
    du = dpre.sum(axis=1)
    dv = dpre.sum(axis=0)
    dx = nn.linear_backward(du, x, params, grads, f"{prefix}.Eu")
    dx += nn.linear_backward(dv, x, params, grads, f"{prefix}.Ev")
    return dx


def build_matrix(entities, entity_vectors, params, prefix="rsn") -> RelationMatrix:
    n = len(entities)
    flat, _ = cells_forward(np.asarray(entity_vectors), params, prefix)
    return RelationMatrix(list(entities), flat.reshape(n, n, -1))


def path_cell_masks(entities, path_entity_sets) -> np.ndarray:
    """Boolean (paths x |E|^2): cell (u, v) is visible to path i iff u and v both occur in it."""
    n = len(entities)
    masks = np.zeros((len(path_entity_sets), n * n), dtype=bool)
    for i, ents in enumerate(path_entity_sets):
        inside = np.array([e in ents for e in entities])
        masks[i] = (inside[:, None] & inside[None, :]).reshape(-1)
    return masks


def reason_forward(flat, masks, params, cfg: ReasonerConfig, readout_row=1, prefix="rsn"):
    """Run the block stack over the cells; return (per-path readouts, final cells, cache).

    ``readout_row`` is the flat index of the (source, target) cell, which is 1
    because the source is entity 0 and the target entity 1.
    """
    x = flat
    caches = []
    n_paths = len(masks)
    for i in range(cfg.num_layers - 1):
        x, c = nn.block_forward(x, params, f"{prefix}.{i}", cfg.num_heads)
        caches.append(c)
    if cfg.num_layers == 0:
        return np.repeat(x[readout_row][None, :], n_paths, axis=0), x, (caches, [], x)
    last = f"{prefix}.{cfg.num_layers - 1}"
    final, _ = nn.block_forward(x, params, last, cfg.num_heads)
    readouts, rcaches = [], []
    for m in masks:
        key_mask = m if cfg.masked_readout else None
        r, c = nn.block_forward(x, params, last, cfg.num_heads, key_mask=key_mask, query_idx=[readout_row])
        readouts.append(r[0])
        rcaches.append(c)
    return np.stack(readouts), final, (caches, rcaches, x)


def reason_backward(dreadouts, cache, params, grads, cfg: ReasonerConfig, readout_row=1, prefix="rsn"):
    caches, rcaches, x_last_in = cache
    if cfg.num_layers == 0:
        dx = np.zeros_like(x_last_in)
        dx[readout_row] += dreadouts.sum(axis=0)
        return dx
    last = f"{prefix}.{cfg.num_layers - 1}"
    dx = np.zeros_like(x_last_in)
    for dr, c in zip(dreadouts, rcaches):
        dx += nn.block_backward(dr[None, :], c, params, grads, last)
    for i in reversed(range(cfg.num_layers - 1)):
        dx = nn.block_backward(dx, caches[i], params, grads, f"{prefix}.{i}")
    return dx


def reason(matrix: RelationMatrix, masks, params, cfg: ReasonerConfig, path_ids=None):
    readouts, final, _ = reason_forward(matrix.flat, masks, params, cfg)
    ids = path_ids if path_ids is not None else [str(i) for i in range(len(masks))]
    n = len(matrix.entities)
    reps = [PathRelationRep(pid, r) for pid, r in zip(ids, readouts)]
    return reps, RelationMatrix(matrix.entities, final.reshape(n, n, -1))
