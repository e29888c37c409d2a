"""Run configuration: a merged view of config-file keys and CLI flags.

Config files are line-oriented ``key = value`` with ``#`` comments; keys
are the snake_case field names below. Flags (kebab-case) win over file
values, which win over defaults. Unknown keys are errors so typos never
pass silently.
"""

import argparse
from dataclasses import dataclass, fields

from . import seeds
from .model import ModelConfig
from .scoring import ScorerTrainConfig
from .walker import WalkConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # paths
    train: str = None
    valid: str = None
    test: str = None
    out: str = None
    # walk stage
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 20
    walk_length: int = 21
    # sequence model
    layers: int = 4
    hidden: int = 512
    proj: int = 32
    entity_dim: int = 32
    relation_dim: int = 32
    clip: float = 3.0
    dropout: float = 0.1
    residual: bool = True
    batch: int = 1024
    epochs: int = 200
    lr: float = 1e-3
    precision: str = "f32"
    checkpoint_interval: int = 0
    # scorer training / evaluation
    init: str = "dolores"
    scorer_kind: str = "bilinear"
    scorer_dim: int = 0
    scorer_epochs: int = 100
    scorer_lr: float = 0.01
    margin: float = 1.0
    negatives: int = 1
    # global
    seed: int = seeds.DEFAULT_SEED
    threads: int = 1

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"missing required field: {name}")

    def model_config(self):
        return ModelConfig(
            num_layers=self.layers,
            hidden_units=self.hidden,
            proj_dim=self.proj,
            entity_dim=self.entity_dim,
            relation_dim=self.relation_dim,
            clip_lo=-self.clip,
            clip_hi=self.clip,
            dropout=self.dropout,
            residual=self.residual,
            batch_size=self.batch,
            learning_rate=self.lr,
            epochs=self.epochs,
            seed=self.seed,
            precision=self.precision,
        )

    def walk_config(self):
        return WalkConfig(
            p=self.p,
            q=self.q,
            walks_per_node=self.walks_per_node,
            walk_length=self.walk_length,
            seed=self.seed,
        )

    def scorer_config(self):
        return ScorerTrainConfig(
            epochs=self.scorer_epochs,
            lr=self.scorer_lr,
            margin=self.margin,
            negatives=self.negatives,
            seed=self.seed,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key, raw):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if ftype is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config_file(path):
    """Parse ``key = value`` lines into a dict, rejecting unknown keys."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, val)
    return values


def add_flags(parser):
    """Register every RunConfig field as a flag with a None default, so
    only flags the user actually passed override file values."""
    g = parser.add_argument_group("configuration")
    g.add_argument("--config", default=None, metavar="FILE", help="key = value config file")
    g.add_argument("--train", default=None, metavar="PATH")
    g.add_argument("--valid", default=None, metavar="PATH")
    g.add_argument("--test", default=None, metavar="PATH")
    g.add_argument("--out", default=None, metavar="DIR")
    g.add_argument("--p", type=float, default=None, help="walk return parameter")
    g.add_argument("--q", type=float, default=None, help="walk in-out parameter")
    g.add_argument("--walks-per-node", type=int, default=None)
    g.add_argument("--walk-length", type=int, default=None)
    g.add_argument("--layers", type=int, default=None)
    g.add_argument("--hidden", type=int, default=None)
    g.add_argument("--proj", type=int, default=None)
    g.add_argument("--entity-dim", type=int, default=None)
    g.add_argument("--relation-dim", type=int, default=None)
    g.add_argument("--clip", type=float, default=None, help="projection clip half-range")
    g.add_argument("--dropout", type=float, default=None)
    g.add_argument("--residual", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--batch", type=int, default=None)
    g.add_argument("--epochs", type=int, default=None)
    g.add_argument("--lr", type=float, default=None)
    g.add_argument("--precision", choices=("f32", "f64"), default=None)
    g.add_argument("--checkpoint-interval", type=int, default=None)
    g.add_argument("--init", choices=("dolores", "random"), default=None,
                   help="scorer embedding init: learned contextual table or random")
    g.add_argument("--scorer-kind", choices=("translational", "bilinear"), default=None)
    g.add_argument("--scorer-dim", type=int, default=None)
    g.add_argument("--scorer-epochs", type=int, default=None)
    g.add_argument("--scorer-lr", type=float, default=None)
    g.add_argument("--margin", type=float, default=None)
    g.add_argument("--negatives", type=int, default=None, help="corruptions per positive")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--threads", type=int, default=None)
    return parser


def merge(namespace):
    """defaults < config file < explicit flags."""
    values = {}
    if namespace.config:
        values.update(read_config_file(namespace.config))
    for f in fields(RunConfig):
        flag_val = getattr(namespace, f.name, None)
        if flag_val is not None:
            values[f.name] = flag_val
    return RunConfig(**values)


def parse_config(config_path, flag_list):
    """Build a RunConfig from an optional config file plus a flag list
    (flags win)."""
    parser = argparse.ArgumentParser(prog="kglm", add_help=False)
    add_flags(parser)
    ns, extra = parser.parse_known_args(flag_list)
    if extra:
        raise ConfigError(f"unknown flags: {' '.join(extra)}")
    if config_path is not None:
        ns.config = config_path
    return merge(ns)
