"""Model configuration, parameter containers, initialization, and the
checkpoint container.

The sequence model is a stack of projected LSTM layers per direction
over pair-token embeddings, with softmax heads shared by both
directions. Checkpoints use a bespoke container (JSON header + raw
little-endian array bytes, layout documented in the README) chosen so
that identical parameters always serialize to identical bytes.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeds

CHECKPOINT_MAGIC = "kglm-checkpoint 1"


@dataclass
class ModelConfig:
    num_layers: int = 4
    hidden_units: int = 512
    proj_dim: int = 32
    entity_dim: int = 32
    relation_dim: int = 32
    clip_lo: float = -3.0
    clip_hi: float = 3.0
    dropout: float = 0.1
    residual: bool = True
    batch_size: int = 1024
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = seeds.DEFAULT_SEED
    precision: str = "f32"

    def __post_init__(self):
        for name in ("num_layers", "hidden_units", "proj_dim", "entity_dim", "relation_dim", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.clip_lo < self.clip_hi:
            raise ValueError("clip_lo must be below clip_hi")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    @property
    def input_dim(self):
        return self.entity_dim + self.relation_dim


@dataclass
class LSTMLayerParams:
    """One projected LSTM layer: input, recurrent, bias, and projection
    weights. Gate blocks along the 4H axis are ordered [i|f|g|o]."""

    Wx: np.ndarray
    Wh: np.ndarray
    b: np.ndarray
    Wp: np.ndarray


@dataclass
class ModelParams:
    """All trainable state. The embedding tables and softmax heads are
    single objects referenced by both directions."""

    ent_emb: np.ndarray
    rel_emb: np.ndarray
    fwd: list = field(default_factory=list)
    bwd: list = field(default_factory=list)
    sm_ent_W: np.ndarray = None
    sm_ent_b: np.ndarray = None
    sm_rel_W: np.ndarray = None
    sm_rel_b: np.ndarray = None

    def flat(self):
        """Name -> array view of every parameter block, in a fixed order."""
        out = {"ent_emb": self.ent_emb, "rel_emb": self.rel_emb}
        for tag, layers in (("fwd", self.fwd), ("bwd", self.bwd)):
            for i, layer in enumerate(layers):
                out[f"{tag}{i}.Wx"] = layer.Wx
                out[f"{tag}{i}.Wh"] = layer.Wh
                out[f"{tag}{i}.b"] = layer.b
                out[f"{tag}{i}.Wp"] = layer.Wp
        out["sm_ent_W"] = self.sm_ent_W
        out["sm_ent_b"] = self.sm_ent_b
        out["sm_rel_W"] = self.sm_rel_W
        out["sm_rel_b"] = self.sm_rel_b
        return out

    @property
    def n_entities(self):
        return self.ent_emb.shape[0]

    @property
    def n_relations(self):
        return self.rel_emb.shape[0]


def _uniform(rng, lo, hi, shape, dtype):
    return rng.uniform(lo, hi, size=shape).astype(dtype)


def _init_layer(rng, in_dim, hidden, proj, dtype):
    sx = 1.0 / np.sqrt(in_dim)
    sh = 1.0 / np.sqrt(proj)
    sp = 1.0 / np.sqrt(hidden)
    Wx = _uniform(rng, -sx, sx, (in_dim, 4 * hidden), dtype)
    Wh = _uniform(rng, -sh, sh, (proj, 4 * hidden), dtype)
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0  # forget gate bias
    Wp = _uniform(rng, -sp, sp, (hidden, proj), dtype)
    return LSTMLayerParams(Wx=Wx, Wh=Wh, b=b, Wp=Wp)


def init_params(config, n_entities, n_relations, rng=None):
    """Seeded initialization; embeddings U(-0.1, 0.1), LSTM and softmax
    weights scaled-uniform by fan-in, forget-gate bias +1."""
    if rng is None:
        rng = seeds.derived_rng(config.seed, seeds.MODEL_INIT)
    dt = config.dtype
    ent_emb = _uniform(rng, -0.1, 0.1, (n_entities, config.entity_dim), dt)
    rel_emb = _uniform(rng, -0.1, 0.1, (n_relations, config.relation_dim), dt)
    fwd, bwd = [], []
    for layers in (fwd, bwd):
        for i in range(config.num_layers):
            in_dim = config.input_dim if i == 0 else config.proj_dim
            layers.append(_init_layer(rng, in_dim, config.hidden_units, config.proj_dim, dt))
    ss = 1.0 / np.sqrt(config.proj_dim)
    sm_ent_W = _uniform(rng, -ss, ss, (config.proj_dim, n_entities), dt)
    sm_rel_W = _uniform(rng, -ss, ss, (config.proj_dim, n_relations), dt)
    return ModelParams(
        ent_emb=ent_emb,
        rel_emb=rel_emb,
        fwd=fwd,
        bwd=bwd,
        sm_ent_W=sm_ent_W,
        sm_ent_b=np.zeros(n_entities, dtype=dt),
        sm_rel_W=sm_rel_W,
        sm_rel_b=np.zeros(n_relations, dtype=dt),
    )


def save_checkpoint(path, params, config, entities, relations):
    """Write params + config + vocabularies. Identical inputs produce
    byte-identical files."""
    arrays = params.flat()
    manifest = [
        {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
        for name, arr in arrays.items()
    ]
    header = {
        "config": asdict(config),
        "entities": list(entities),
        "relations": list(relations),
        "arrays": manifest,
    }
    blob = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(f"{CHECKPOINT_MAGIC}\n{len(blob)}\n".encode("ascii"))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path):
    """Read a checkpoint back; returns (params, config, entities, relations)."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii").rstrip("\n")
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (magic {magic!r})")
        n = int(fh.readline().decode("ascii"))
        header = json.loads(fh.read(n).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            dt = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dt.itemsize)
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dt).reshape(shape).copy()
    config = ModelConfig(**header["config"])
    L = config.num_layers
    fwd = [
        LSTMLayerParams(
            Wx=arrays[f"fwd{i}.Wx"], Wh=arrays[f"fwd{i}.Wh"], b=arrays[f"fwd{i}.b"], Wp=arrays[f"fwd{i}.Wp"]
        )
        for i in range(L)
    ]
    bwd = [
        LSTMLayerParams(
            Wx=arrays[f"bwd{i}.Wx"], Wh=arrays[f"bwd{i}.Wh"], b=arrays[f"bwd{i}.b"], Wp=arrays[f"bwd{i}.Wp"]
        )
        for i in range(L)
    ]
    params = ModelParams(
        ent_emb=arrays["ent_emb"],
        rel_emb=arrays["rel_emb"],
        fwd=fwd,
        bwd=bwd,
        sm_ent_W=arrays["sm_ent_W"],
        sm_ent_b=arrays["sm_ent_b"],
        sm_rel_W=arrays["sm_rel_W"],
        sm_rel_b=arrays["sm_rel_b"],
    )
    return params, config, header["entities"], header["relations"]
