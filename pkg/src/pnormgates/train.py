"""Plain minibatch SGD, evaluation metrics and run logs."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, gru, highway
from .data import CharCorpus, ConfigError, VectorDataset, minibatches
from .gates import GateNumericError
from .numeric import RNG_ALGORITHM, Rng

DEFAULT_LR = {"highway": 0.05, "gru": 0.1}
DEFAULT_GATE_BIAS = {"highway": -1.0, "gru": 0.0}
RUNLOG_HEADER = ("epoch", "train_loss_nats", "valid_metric", "seconds")


@dataclass(frozen=True)
class TrainConfig:
    model: str = "highway"
    p: float = 1.0
    layers: int = 10
    hidden: int = 50
    lr: float | None = None
    epochs: int = 100
    batch: int = 20
    seed: int = 42
    activation: str = "tanh"
    standardize: bool = True
    clip_norm: float | None = None
    gate_bias: float | None = None
    dataset: str = ""

    def __post_init__(self):
        if self.model not in DEFAULT_LR:
            raise ConfigError(f"unknown model kind {self.model!r}")
        if not (self.p > 0 and math.isfinite(self.p)):
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.epochs < 1 or self.batch < 1 or self.hidden < 1:
            raise ConfigError("epochs, batch and hidden must be positive")
        if self.model == "highway" and self.layers < 2:
            raise ConfigError("a highway network needs at least 2 layers")
        if self.lr is not None and self.lr < 0:
            raise ConfigError("learning rate must be non-negative")

    @property
    def learning_rate(self) -> float:
        return DEFAULT_LR[self.model] if self.lr is None else self.lr

    @property
    def initial_gate_bias(self) -> float:
        return DEFAULT_GATE_BIAS[self.model] if self.gate_bias is None else self.gate_bias

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_metric: float
    seconds: float


@dataclass
class RunLog:
    config: TrainConfig
    records: list = field(default_factory=list)
    params: object = None
    diverged_epoch: int | None = None
    clip_events: int = 0

    @property
    def train_losses(self) -> list[float]:
        return [r.train_loss for r in self.records]

    @property
    def valid_metrics(self) -> list[float]:
        return [r.valid_metric for r in self.records]

    def metadata(self) -> dict:
        meta = {f"config.{k}": v for k, v in self.config.to_dict().items()}
        meta.update({
            "learning_rate": self.config.learning_rate,
            "gate_bias": self.config.initial_gate_bias,
            "rng_algorithm": RNG_ALGORITHM,
            "build_version": __version__,
            "numpy_version": np.__version__,
            "diverged_epoch": self.diverged_epoch,
            "clip_events": self.clip_events,
        })
        return meta

    def write(self, csv_path, meta_path=None) -> None:
        csv_path = Path(csv_path)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(RUNLOG_HEADER)
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.valid_metric), f"{r.seconds:.4f}"])
        meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.txt")
        with open(meta_path, "w", encoding="utf-8") as fh:
            for key, value in self.metadata().items():
                fh.write(f"{key}={json.dumps(value)}\n")


def read_runlog_csv(path) -> list[EpochRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochRecord(int(r["epoch"]), float(r["train_loss_nats"]),
                        float(r["valid_metric"]), float(r["seconds"])) for r in rows]


def read_metadata(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        out[key] = json.loads(value)
    return out


def config_from_metadata(meta: dict) -> TrainConfig:
    return TrainConfig.from_dict({k[len("config."):]: v for k, v in meta.items()
                                  if k.startswith("config.")})


# ---------------------------------------------------------------- metrics

def f1_binary(preds, targets, positive: int = 1) -> float:
    preds = np.asarray(preds)
    targets = np.asarray(targets)
    if preds.shape != targets.shape:
        raise ValueError("preds and targets differ in length")
    tp = int(np.sum((preds == positive) & (targets == positive)))
    fp = int(np.sum((preds == positive) & (targets != positive)))
    fn = int(np.sum((preds != positive) & (targets == positive)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def macro_f1(preds, targets, n_classes: int) -> float:
    """Unweighted mean of per-class F1.

    A class that appears in neither ``preds`` nor ``targets`` is left out
    of the mean rather than counted as 0.
    """
    preds = np.asarray(preds)
    targets = np.asarray(targets)
    scores = [f1_binary(preds, targets, positive=c) for c in range(n_classes)
              if np.any(preds == c) or np.any(targets == c)]
    return float(np.mean(scores)) if scores else 0.0


def epochs_to_threshold(log, threshold: float, direction: str = "above",
                        metric: str = "valid_metric") -> int | None:
    """First (1-based) epoch whose metric reaches ``threshold``, else None.

    ``log`` is a RunLog or a plain sequence of per-epoch values.
    ``direction="above"`` means ``value >= threshold``; ``"below"`` means
    ``value <= threshold`` (losses).
    """
    if isinstance(log, RunLog):
        values = [getattr(r, metric) for r in log.records]
        epochs = [r.epoch for r in log.records]
    else:
        values = list(log)
        epochs = list(range(1, len(values) + 1))
    if direction not in ("above", "below"):
        raise ValueError(f"direction must be 'above' or 'below', got {direction!r}")
    for epoch, v in zip(epochs, values):
        if direction == "above" and v >= threshold:
            return epoch
        if direction == "below" and v <= threshold:
            return epoch
    return None


def format_epochs(epoch: int | None) -> str:
    return "N/A" if epoch is None else str(epoch)


def classification_metric(params: highway.HighwayParams, ds: VectorDataset,
                          chunk: int = 4096) -> float:
    """F1 of class 1 for binary tasks, macro-F1 otherwise."""
    preds = np.concatenate([highway.predict(params, ds.features[i:i + chunk].T)
                            for i in range(0, ds.n, chunk)])
    if ds.n_classes == 2:
        return f1_binary(preds, ds.labels)
    return macro_f1(preds, ds.labels, ds.n_classes)


def dataset_nll(params: highway.HighwayParams, ds: VectorDataset, chunk: int = 4096) -> float:
    total = 0.0
    for i in range(0, ds.n, chunk):
        tr = highway.forward(params, ds.features[i:i + chunk].T)
        total += highway.nll(tr, ds.labels[i:i + chunk]) * min(chunk, ds.n - i)
    return total / ds.n


# ---------------------------------------------------------------- training

def sgd_update(params, grads: dict, lr: float) -> None:
    """In-place ``theta -= lr * grad`` for every parameter array."""
    for name, arr in params.arrays().items():
        arr -= lr * grads[name]


def clip_gradients(grads: dict, max_norm: float) -> bool:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm:
        return False
    scale = max_norm / norm
    for g in grads.values():
        g *= scale
    return True


def init_params(config: TrainConfig, rng: Rng, input_dim: int, n_out: int):
    if config.model == "highway":
        return highway.init_highway(input_dim, config.hidden, n_out, config.layers, config.p,
                                    rng, config.activation, config.initial_gate_bias)
    return gru.init_gru(input_dim, config.hidden, config.p, rng, config.initial_gate_bias)


def _highway_batches(config, train: VectorDataset, rng):
    for x, y in minibatches(train, config.batch, rng):
        yield len(y), (x, y)


def _gru_batches(config, train: CharCorpus, rng):
    order = rng.permutation(len(train.sequences))
    for start in range(0, len(order), config.batch):
        seqs = [train.sequences[i] for i in order[start:start + config.batch]]
        # weight by predicted positions so the epoch loss is per character
        yield sum(len(s) - 1 for s in seqs), seqs


def sgd_train(config: TrainConfig, train, valid=None, *, params=None,
              observer: Callable | None = None) -> RunLog:
    """Train from scratch (or from ``params``) with plain minibatch SGD.

    ``train`` / ``valid`` are VectorDatasets for highway runs and
    CharCorpora for GRU runs. The epoch loss is the per-sample (per
    character for GRUs) mean training NLL in nats; the validation metric
    is F1 / macro-F1 (highway) or bits per character (GRU). ``observer``
    receives every forward trace, e.g. for invariant checks.
    """
    rng = Rng(config.seed)
    if config.model == "highway":
        if not isinstance(train, VectorDataset):
            raise ConfigError("highway runs need a VectorDataset")
        if params is None:
            params = init_params(config, rng, train.d, train.n_classes)
        batches = _highway_batches
        step = lambda p, b: highway.loss_and_grads(p, *b)  # noqa: E731
    else:
        if not isinstance(train, CharCorpus):
            raise ConfigError("gru runs need a CharCorpus")
        if params is None:
            params = init_params(config, rng, train.vocab_size, train.vocab_size)
        batches = _gru_batches
        step = gru.loss_and_grads
    if params.pn.p != config.p:
        raise ConfigError("initial params were built for a different p")
    lr = config.learning_rate
    log = RunLog(config=config, params=params)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        total, weight = 0.0, 0
        for n_items, batch in batches(config, train, rng):
            try:
                # divergence is detected below; numpy's overflow chatter adds nothing
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, grads, trace = step(params, batch)
            except GateNumericError:
                total = float("nan")
                break
            if observer is not None:
                observer(trace)
            if not math.isfinite(loss):
                total = float("nan")
                break
            if config.clip_norm is not None and clip_gradients(grads, config.clip_norm):
                log.clip_events += 1
            sgd_update(params, grads, lr)
            total += loss * n_items
            weight += n_items
        train_loss = total / weight if weight else float("nan")
        if not math.isfinite(train_loss) or not _all_finite(params):
            log.diverged_epoch = epoch
            log.records.append(EpochRecord(epoch, float("nan"), float("nan"),
                                           time.perf_counter() - t0))
            break
        metric = evaluate(params, valid) if valid is not None else float("nan")
        log.records.append(EpochRecord(epoch, train_loss, metric, time.perf_counter() - t0))
    return log


def _all_finite(params) -> bool:
    return all(np.isfinite(a).all() for a in params.arrays().values())


def evaluate(params, valid) -> float:
    if isinstance(params, highway.HighwayParams):
        return classification_metric(params, valid)
    if len(valid.sequences) == 0:
        return float("nan")
    return gru.bits_per_character(params, valid)
