"""Model and training configuration.

Configs are plain dataclasses that round-trip through a single nested JSON
document, so a serialized config can be re-read and re-serialized without
byte changes.
"""

import dataclasses
import json
from dataclasses import dataclass, field

ABLATION_FLAGS = ("CR", "CA", "SA", "ASPP", "FR", "FA", "SC")

MAX_REFINE_STEPS = 6


@dataclass
class ModelConfig:
    """Architecture knobs for the two-stream saliency network.

    refine_steps is the number of top-down fusion steps (counted from the
    deepest encoder level downward). coarse_weight balances the side
    supervision terms against the fine term in the training loss.
    """

    refine_steps: int = 6
    coarse_weight: float = 0.99
    aspp_rates: tuple = (1, 6, 12, 18)
    fa_rates: tuple = (3, 5)
    width_scale: float = 1.0
    ablations: tuple = ()
    input_size: int = 224
    seed: int = 0
    channels: tuple = (64, 64, 128, 256, 512, 512, 512)
    blocks: tuple = (3, 4, 6)
    fine_size: int = 56
    literal_spatial_pool: bool = False
    replicate_depth: bool = False

    def __post_init__(self):
        self.aspp_rates = tuple(self.aspp_rates)
        self.fa_rates = tuple(self.fa_rates)
        self.ablations = tuple(self.ablations)
        self.channels = tuple(self.channels)
        self.blocks = tuple(self.blocks)
        self.validate()

    def validate(self):
        if not 1 <= self.refine_steps <= MAX_REFINE_STEPS:
            raise ValueError(
                "refine_steps must be in [1, %d], got %r"
                % (MAX_REFINE_STEPS, self.refine_steps)
            )
        if self.coarse_weight < 0:
            raise ValueError("coarse_weight must be nonnegative")
        if self.width_scale <= 0:
            raise ValueError("width_scale must be positive")
        if len(self.channels) != 7:
            raise ValueError("channels must list 7 encoder levels")
        if len(self.blocks) != 3:
            raise ValueError("blocks must list counts for levels 2..4")
        if not self.aspp_rates or any(r < 1 for r in self.aspp_rates):
            raise ValueError("aspp_rates must be a nonempty list of rates >= 1")
        if len(self.fa_rates) != 2 or any(r < 1 for r in self.fa_rates):
            raise ValueError("fa_rates must be two dilation rates >= 1")
        unknown = [f for f in self.ablations if f not in ABLATION_FLAGS]
        if unknown:
            raise ValueError(
                "unknown ablation flags %r, valid flags are %r"
                % (unknown, list(ABLATION_FLAGS))
            )
        if "CR" in self.ablations and "FR" in self.ablations:
            raise ValueError(
                "ablating CR and FR together leaves no supervised output"
            )

    def ablated(self, flag):
        return flag in self.ablations

    def scaled_channels(self):
        # width_scale floors but never below one plane
        return tuple(max(1, int(c * self.width_scale)) for c in self.channels)


@dataclass
class TrainConfig:
    """Optimization schedule. Learning rate decays by lr_decay every
    lr_decay_every epochs; zero disables the decay."""

    lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.1
    lr_decay_every: int = 60
    epochs: int = 300
    batch_size: int = 8
    checkpoint_every: int = 10
    workers: int = 0
    invert_depth: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lr_decay_every < 0:
            raise ValueError("lr_decay_every must be nonnegative")

    def lr_at(self, epoch):
        if self.lr_decay_every <= 0:
            return self.lr
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)


def _from_dict(cls, data, path):
    if not isinstance(data, dict):
        raise ValueError("config section %r must be an object" % path)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ValueError("unknown config key %r" % ("%s.%s" % (path, key)))
    return cls(**data)


def config_from_dict(data):
    """Build (ModelConfig, TrainConfig) from a nested dict with optional
    "model" and "train" sections. Unknown keys fail with their path."""
    if not isinstance(data, dict):
        raise ValueError("config document must be a JSON object")
    for key in data:
        if key not in ("model", "train"):
            raise ValueError("unknown config key %r" % key)
    model = _from_dict(ModelConfig, data.get("model", {}), "model")
    train = _from_dict(TrainConfig, data.get("train", {}), "train")
    return model, train


def config_to_dict(model_config, train_config=None):
    doc = {"model": dataclasses.asdict(model_config)}
    if train_config is not None:
        doc["train"] = dataclasses.asdict(train_config)
    return doc


def canonical_json(doc):
    """Stable serialization; parse -> dump round trips are byte identical."""
    return json.dumps(_listify(doc), indent=2, sort_keys=True) + "\n"


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    if isinstance(value, list):
        return [_listify(v) for v in value]
    if isinstance(value, dict):
        return {k: _listify(v) for k, v in value.items()}
    return value


def load_config_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("config file %s is not valid JSON: %s" % (path, exc))
    return config_from_dict(data)


def save_config_file(path, model_config, train_config=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(config_to_dict(model_config, train_config)))
