"""Action encoder/decoder pair lifting actions into a latent space."""

from __future__ import annotations

import logging
from copy import deepcopy
from dataclasses import dataclass, field

import numpy as np

from .nn import AdamState, MlpParams, adam_step, exponential_decay, soft_update, init_mlp, mlp_backward, mlp_forward

log = logging.getLogger(__name__)

ENCODER_HIDDEN = (64, 64)
DECODER_HIDDEN = (96, 96)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class AutoencoderParams:
    encoder: MlpParams
    decoder: MlpParams
    action_low: np.ndarray
    action_high: np.ndarray
    frozen: bool = False
    heldout_mse: float | None = None

    def __post_init__(self):
        if self.encoder.n_out != self.decoder.n_in:
            raise ValueError("encoder output and decoder input dimensions differ")
        if self.encoder.n_in != self.decoder.n_out:
            raise ValueError("encoder input and decoder output dimensions differ")
        self.action_low = np.asarray(self.action_low, dtype=float)
        self.action_high = np.asarray(self.action_high, dtype=float)

    @property
    def h_d(self) -> int:
        return self.encoder.n_out

    @property
    def action_dim(self) -> int:
        return self.encoder.n_in

    def digest(self) -> str:
        return self.encoder.digest() + self.decoder.digest()


@dataclass
class ActionDataset:
    actions: np.ndarray  # (n, action_dim)
    source: str = "uniform"
    low: np.ndarray = field(default=None, repr=False)
    high: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        if self.source not in ("uniform", "pretrained-agent"):
            raise ValueError(f"unknown dataset source {self.source!r}")
        if self.low is not None and (np.any(self.actions < self.low) or np.any(self.actions > self.high)):
            raise ValueError("dataset contains actions outside the action bounds")


def uniform_dataset(low, high, n: int = 20_000, seed: int = 0) -> ActionDataset:
    low, high = np.atleast_1d(low).astype(float), np.atleast_1d(high).astype(float)
    rng = np.random.default_rng(seed)
    return ActionDataset(rng.uniform(low, high, size=(n, low.size)), "uniform", low, high)


def init_autoencoder(action_dim: int, h_d: int, low, high, rng: np.random.Generator) -> AutoencoderParams:
    enc = init_mlp([action_dim, *ENCODER_HIDDEN, h_d], rng)
    dec = init_mlp([h_d, *DECODER_HIDDEN, action_dim], rng)
    return AutoencoderParams(enc, dec, np.atleast_1d(low), np.atleast_1d(high))


def encode(params: AutoencoderParams, action) -> np.ndarray:
    return mlp_forward(params.encoder, action)[0]


def decode(params: AutoencoderParams, z) -> np.ndarray:
    """Raw decoder output; no clipping to the action box."""
    return mlp_forward(params.decoder, z)[0]


def reconstruction_mse(params: AutoencoderParams, actions) -> float:
    actions = np.atleast_2d(actions)
    return float(np.mean((decode(params, encode(params, actions)) - actions) ** 2))


def _ae_loss_and_grads(params: AutoencoderParams, batch: np.ndarray):
    z, enc_trace = mlp_forward(params.encoder, batch)
    recon, dec_trace = mlp_forward(params.decoder, z)
    diff = recon - batch
    loss = float(np.mean(diff**2))
    g_out = 2.0 * diff / diff.size
    dec_grads, g_z = mlp_backward(params.decoder, dec_trace, g_out)
    enc_grads, _ = mlp_backward(params.encoder, enc_trace, g_z)
    return loss, enc_grads, dec_grads


def train_autoencoder(dataset: ActionDataset, h_d: int, epochs: int = 500, batch_size: int = 256,
                      lr: float = 3e-3, final_lr_fraction: float = 1e-2, holdout: float = 0.1,
                      seed: int = 0, low=None, high=None, history: list | None = None,
                      ema_decay: float = 0.999, backtrack_tolerance: float = 0.05,
                      backtrack_factor: float = 0.5) -> AutoencoderParams:
    """Fit encoder/decoder by minimising reconstruction MSE, then freeze.

    Adam with a learning rate decaying geometrically from ``lr`` to
    ``lr * final_lr_fraction``. The returned weights are an exponential moving
    average (``ema_decay`` per step, warmed up as ``(1+k)/(10+k)``) of the optimiser iterates. After every
    epoch the averaged weights are scored on the full training split; an epoch
    that raises that loss by more than ``backtrack_tolerance`` (relative) is
    rolled back, the raw iterate restarted from the averaged weights, and the
    learning rate scaled by ``backtrack_factor``.

    A fixed-seed ``holdout`` fraction is kept aside and its MSE stored in
    ``heldout_mse``. End-of-epoch training MSEs are appended to ``history``.
    """
    actions = dataset.actions
    if len(actions) == 0:
        raise ValueError("empty action dataset")
    low = dataset.low if low is None else np.atleast_1d(low)
    high = dataset.high if high is None else np.atleast_1d(high)
    if low is None:
        low, high = actions.min(axis=0), actions.max(axis=0)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(actions))
    n_hold = int(round(holdout * len(actions))) if len(actions) > 1 else 0
    held, train = actions[perm[:n_hold]], actions[perm[n_hold:]]
    params = init_autoencoder(actions.shape[1], h_d, low, high, rng)
    avg = deepcopy(params)
    steps_per_epoch = max(1, int(np.ceil(len(train) / batch_size)))
    schedule = exponential_decay(lr, final_lr_fraction, epochs * steps_per_epoch)
    enc_opt, dec_opt = AdamState(lr=lr), AdamState(lr=lr)
    lr_scale = 1.0
    prev_loss = reconstruction_mse(avg, train)
    step = 0
    for epoch in range(epochs):
        snapshot = deepcopy((params, avg, enc_opt, dec_opt))
        order = rng.permutation(len(train))
        for i in range(steps_per_epoch):
            batch = train[order[i * batch_size:(i + 1) * batch_size]]
            loss, enc_grads, dec_grads = _ae_loss_and_grads(params, batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"reconstruction loss became {loss} at epoch {epoch}, step {i}")
            enc_opt.lr = dec_opt.lr = lr_scale * schedule(step)
            adam_step(params.encoder, enc_grads, enc_opt)
            adam_step(params.decoder, dec_grads, dec_opt)
            decay = min(ema_decay, (1.0 + step) / (10.0 + step))
            soft_update(avg.encoder, params.encoder, 1.0 - decay)
            soft_update(avg.decoder, params.decoder, 1.0 - decay)
            step += 1
        epoch_loss = reconstruction_mse(avg, train)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(f"reconstruction loss became {epoch_loss} after epoch {epoch}")
        if epoch_loss > (1.0 + backtrack_tolerance) * prev_loss:
            params, avg, enc_opt, dec_opt = snapshot
            # restart the raw iterate from the average it failed to improve
            params = deepcopy(avg)
            lr_scale *= backtrack_factor
            log.info("ae epoch %d rolled back (%.3e > %.3e)", epoch, epoch_loss, prev_loss)
            epoch_loss = prev_loss
        prev_loss = epoch_loss
        if history is not None:
            history.append(epoch_loss)
        if epoch % 50 == 0 or epoch == epochs - 1:
            log.info("ae epoch %d loss %.3e lr %.2e", epoch, epoch_loss, enc_opt.lr)
    eval_set = held if len(held) else train
    avg.heldout_mse = reconstruction_mse(avg, eval_set)
    avg.frozen = True
    return avg
