"""Losses, the Adam optimizer, plateau LR scheduling, and training loops.

The training objective is L = phi * L_s + (1 - phi) * L_u, where L_s is
cross-entropy on the classifier head and L_u is mean squared error on the
reconstruction. Both terms and the blend are tape ops, so at phi = 0 or
phi = 1 the switched-off branch receives exact-zero gradients.

Training is deterministic for a fixed seed: the epoch shuffle has its own
random stream, and each batch accumulates per-sample losses in ascending
sample-index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .data import Dataset, stratified_folds
from .errors import ConfigError, NumericError
from .network import ArchConfig, JointNetwork, build, forward_backbone, forward_joint
from .rng import SHUFFLE, make_rng
from .tensor import Tape, Tensor, add, backward, record, scale

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
LOG_CLAMP = 1e-12
MODES = ("joint", "backbone")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyper-parameters.

    ``phi_schedule`` optionally re-weights the loss mid-run: a tuple of
    (epoch, phi) pairs, each taking effect at the start of that epoch.
    """

    phi: float = 0.5
    lr: float = 1e-4
    kappa: float = 0.1
    patience: int = 4
    epochs: int = 30
    batch_size: int = 4
    seed: int = 0
    folds: int = 5
    lr_floor: float = 1e-7
    phi_schedule: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ConfigError(f"phi must be within [0, 1], got {self.phi}")
        if not self.lr > 0.0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not 0.0 < self.kappa < 1.0:
            raise ConfigError(f"kappa must be within (0, 1), got {self.kappa}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not 0.0 < self.lr_floor <= self.lr:
            raise ConfigError(
                f"lr_floor must be within (0, lr], got {self.lr_floor}")
        for epoch, phi in self.phi_schedule:
            if epoch < 1 or not 0.0 <= phi <= 1.0:
                raise ConfigError(
                    f"phi_schedule entries need epoch >= 1 and phi in [0, 1], "
                    f"got ({epoch}, {phi})")


# ---------------------------------------------------------------------------
# losses


def cross_entropy(true_onehot: Tensor, predicted: Tensor) -> Tensor:
    """-sum(y * log(max(p, 1e-12))) for a one-hot label and a probability
    vector. The clamp bounds the loss; where it engages, the gradient is
    exactly zero."""
    y, p = true_onehot.data, predicted.data
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(
            f"cross_entropy expects matching 1-D tensors, got {y.shape} and {p.shape}")
    if not (np.all((y == 0.0) | (y == 1.0)) and y.sum() == 1.0):
        raise ValueError("true_onehot must be a one-hot vector")
    if p.min() < 0.0 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("predicted must be a probability vector")
    clamped = np.maximum(p, LOG_CLAMP)
    out = Tensor(-(y * np.log(clamped)).sum())

    def backward_fn(g):
        dp = np.where(p > LOG_CLAMP, -y / clamped, 0.0) * g
        return None, dp

    record("cross_entropy", (true_onehot, predicted), out, backward_fn)
    return out


def mse(input_pixels: Tensor, reconstructed: Tensor) -> Tensor:
    """Mean squared error over all pixels of two same-shape tensors."""
    if input_pixels.shape != reconstructed.shape:
        raise ValueError(
            f"mse shape mismatch: {input_pixels.shape} vs {reconstructed.shape}")
    diff = reconstructed.data - input_pixels.data
    n = diff.size
    out = Tensor(np.mean(diff * diff))

    def backward_fn(g):
        base = (2.0 / n) * diff * g
        return -base, base

    record("mse", (input_pixels, reconstructed), out, backward_fn)
    return out


def combined_loss(supervised: Tensor, unsupervised: Tensor, phi: float) -> Tensor:
    """phi * L_s + (1 - phi) * L_u, built from tape ops so the endpoints
    route exact-zero gradients into the switched-off branch."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must be within [0, 1], got {phi}")
    return add(scale(supervised, phi), scale(unsupervised, 1.0 - phi))


# ---------------------------------------------------------------------------
# optimizer and schedule


class Adam:
    """Adam with bias correction over a named parameter set.

    One shared step counter covers all parameters. ``step`` is functional:
    it returns fresh tensors and never mutates its inputs, so checkpointed
    snapshots stay valid by reference.
    """

    def __init__(self, shapes: dict[str, tuple[int, ...]]):
        self.m = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.v = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.step_count = 0

    def restore(self, m: dict[str, np.ndarray], v: dict[str, np.ndarray],
                step_count: int) -> None:
        for name in self.m:
            self.m[name] = m[name].copy()
            self.v[name] = v[name].copy()
        self.step_count = step_count

    def step(self, params: dict[str, Tensor], grads: dict[str, np.ndarray],
             lr: float) -> dict[str, Tensor]:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - BETA1 ** t
        c2 = 1.0 - BETA2 ** t
        updated: dict[str, Tensor] = {}
        for name, param in params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter '{name}'")
            m = BETA1 * self.m[name] + (1.0 - BETA1) * g
            v = BETA2 * self.v[name] + (1.0 - BETA2) * (g * g)
            self.m[name] = m
            self.v[name] = v
            step_arr = lr * (m / c1) / (np.sqrt(v / c2) + EPSILON)
            updated[name] = Tensor(param.data - step_arr)
        return updated


class PlateauScheduler:
    """Multiply lr by kappa after ``patience`` consecutive epochs without a
    strict improvement of the best seen validation loss; never below the
    floor. The non-improvement counter resets on every reduction."""

    def __init__(self, lr: float, patience: int, kappa: float,
                 floor: float = 1e-7):
        self.lr = lr
        self.patience = patience
        self.kappa = kappa
        self.floor = floor
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        """Feed one epoch's validation loss; returns the lr for the next epoch."""
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.kappa, self.floor)
                self.bad_epochs = 0
        return self.lr


def plateau_update(history: list[float], lr: float, patience: int,
                   kappa: float, floor: float = 1e-7) -> float:
    """Replay a full validation-loss history through a fresh scheduler that
    starts at ``lr``; returns the resulting learning rate."""
    sched = PlateauScheduler(lr, patience, kappa, floor)
    for val_loss in history:
        sched.step(val_loss)
    return sched.lr


# ---------------------------------------------------------------------------
# training loops


@dataclass
class EpochLog:
    """Per-epoch record; ``lr`` is the rate used during the epoch and
    ``phi`` the blend weight in effect."""

    epoch: int
    train_loss: float
    train_ls: float
    train_lu: float
    val_loss: float
    val_accuracy: float
    lr: float
    phi: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[EpochLog]


def _sample_losses(net: JointNetwork, sample, onehots: np.ndarray, mode: str,
                   phi: float) -> tuple[Tensor, float, float]:
    """One sample's blended loss tensor plus float L_s and L_u readings."""
    label_vec = Tensor(onehots[sample.label])
    if mode == "joint":
        out = forward_joint(net, sample.image)
        ls = cross_entropy(label_vec, out.class_probs)
        lu = mse(sample.image, out.reconstruction)
        return combined_loss(ls, lu, phi), float(ls.data), float(lu.data)
    probs = forward_backbone(net, sample.image)
    ls = cross_entropy(label_vec, probs)
    return ls, float(ls.data), 0.0


def _validate_sets(net: JointNetwork, train_set: Dataset, val_set: Dataset) -> None:
    for role, ds in (("training", train_set), ("validation", val_set)):
        if len(ds) == 0:
            raise ValueError(f"{role} set is empty")
        for s in ds.samples:
            if not 0 <= s.label < net.config.n_classes:
                raise ValueError(
                    f"{role} sample '{s.source_id}' has label {s.label}, "
                    f"outside 0..{net.config.n_classes - 1}")


def train(net: JointNetwork, train_set: Dataset, val_set: Dataset,
          config: TrainConfig, mode: str = "joint",
          resume_from: Checkpoint | None = None) -> TrainResult:
    """Optimize ``net`` in place; returns the best-epoch checkpoint (lowest
    validation loss, earlier epoch on ties) and the full epoch log."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    _validate_sets(net, train_set, val_set)

    onehots = np.eye(net.config.n_classes)
    shuffle_rng = make_rng(config.seed, SHUFFLE)
    optimizer = Adam({name: p.shape for name, p in net.params.items()})
    if resume_from is not None:
        net.params = {name: Tensor(arr.copy())
                      for name, arr in resume_from.params.items()}
        optimizer.restore(resume_from.adam_m, resume_from.adam_v, resume_from.step)
    scheduler = PlateauScheduler(config.lr, config.patience, config.kappa,
                                 config.lr_floor)
    phi_overrides = dict(config.phi_schedule)
    phi = config.phi

    best: Checkpoint | None = None
    log: list[EpochLog] = []
    n_train = len(train_set)

    for epoch in range(1, config.epochs + 1):
        phi = phi_overrides.get(epoch, phi)
        lr_used = scheduler.lr
        order = shuffle_rng.permutation(n_train)
        sum_l = sum_ls = sum_lu = 0.0
        for start in range(0, n_train, config.batch_size):
            batch = sorted(order[start:start + config.batch_size].tolist())
            tape = Tape()
            with tape:
                for p in net.params.values():
                    tape.watch(p)
                total: Tensor | None = None
                for idx in batch:
                    loss, ls_val, lu_val = _sample_losses(
                        net, train_set.samples[idx], onehots, mode, phi)
                    sum_ls += ls_val
                    sum_lu += lu_val
                    total = loss if total is None else add(total, loss)
                batch_loss = scale(total, 1.0 / len(batch))
            if not np.isfinite(batch_loss.data):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            sum_l += float(batch_loss.data) * len(batch)
            grads = backward(tape, batch_loss)
            grad_arrays = {name: grads[p].data for name, p in net.params.items()}
            net.params = optimizer.step(net.params, grad_arrays, lr_used)

        val_correct = 0
        val_sum = 0.0
        for sample in val_set.samples:
            loss, _, _ = _sample_losses(net, sample, onehots, mode, phi)
            val_sum += float(loss.data)
            if mode == "joint":
                probs = forward_joint(net, sample.image).class_probs
            else:
                probs = forward_backbone(net, sample.image)
            if int(np.argmax(probs.data)) == sample.label:
                val_correct += 1
        val_loss = val_sum / len(val_set)
        val_accuracy = val_correct / len(val_set)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")

        if best is None or val_loss < best.best_val_loss:
            best = Checkpoint(
                arch=net.config,
                params={name: p.data for name, p in net.params.items()},
                adam_m=dict(optimizer.m),
                adam_v=dict(optimizer.v),
                step=optimizer.step_count,
                epoch=epoch,
                best_val_loss=val_loss,
            )
        log.append(EpochLog(epoch, sum_l / n_train, sum_ls / n_train,
                            sum_lu / n_train, val_loss, val_accuracy,
                            lr_used, phi))
        scheduler.step(val_loss)

    return TrainResult(best, log)


@dataclass
class FoldSummary:
    fold: int
    checkpoint: Checkpoint
    log: list[EpochLog]
    val_accuracy: float
    val_loss: float


@dataclass
class KFoldResult:
    best_fold: int
    best_checkpoint: Checkpoint
    folds: list[FoldSummary]


def kfold_train(dataset: Dataset, arch: ArchConfig, config: TrainConfig,
                mode: str = "joint") -> KFoldResult:
    """Stratified k-fold training: fold f trains a fresh network seeded
    ``config.seed + f``. The overall winner has the highest best-epoch
    validation accuracy; ties prefer lower validation loss, then the
    earlier fold."""
    splits = stratified_folds(dataset, config.folds, config.seed)
    summaries: list[FoldSummary] = []
    for f, (train_idx, val_idx) in enumerate(splits):
        net = build(arch, seed=config.seed + f)
        fold_config = TrainConfig(
            phi=config.phi, lr=config.lr, kappa=config.kappa,
            patience=config.patience, epochs=config.epochs,
            batch_size=config.batch_size, seed=config.seed + f,
            folds=config.folds, lr_floor=config.lr_floor,
            phi_schedule=config.phi_schedule)
        result = train(net, dataset.subset(train_idx), dataset.subset(val_idx),
                       fold_config, mode=mode)
        ckpt = result.checkpoint
        accuracy = result.log[ckpt.epoch - 1].val_accuracy
        summaries.append(FoldSummary(f, ckpt, result.log, accuracy,
                                     ckpt.best_val_loss))
    best = summaries[0]
    for cand in summaries[1:]:
        if (cand.val_accuracy, -cand.val_loss) > (best.val_accuracy, -best.val_loss):
            best = cand
    return KFoldResult(best.fold, best.checkpoint, summaries)
