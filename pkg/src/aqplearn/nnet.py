"""LSTM sequence regressor over encoded query matrices.

Architecture: an LSTM scans the L rows of the query matrix, its final
hidden state feeds a ReLU dense layer, and a linear unit emits the scalar
estimate. Training is plain backpropagation through time with Adam on a
mean-squared-error loss, implemented directly on numpy arrays.

Labels are z-score normalized with statistics of the training split; the
statistics travel with the checkpoint so predictions always come back in
label units. Early stopping watches validation MSE with a patience
counter and the best parameters seen are restored at the end.

Gate parameters are kept separate (W_x*, W_h*, b_* for the input, forget,
cell and output gates) and only stacked transiently so each timestep is a
single matrix product. Forget-gate biases start at 1 so early training
does not flush the cell state; all other biases start at 0 and weights use
Xavier uniform initialization.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    DivergedLoss,
    EmptyList,
    LengthMismatch,
    VersionMismatch,
    VocabularyMismatch,
)

CHECKPOINT_VERSION = 1
GATES = ("i", "f", "g", "o")
PREDICT_CHUNK = 1024

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    lstm_units: int = 128
    dense_units: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 500
    patience: int = 20
    label_norm: str = "zscore"
    seed: int = 0

    def __post_init__(self):
        if self.label_norm not in ("zscore", "none"):
            raise ValueError(f"label_norm must be 'zscore' or 'none', got {self.label_norm!r}")
        for name in ("lstm_units", "dense_units", "batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_val_mse: float
    train_history: tuple
    val_history: tuple
    label_mean: float
    label_std: float
    wall_seconds: float

    def to_record(self) -> dict:
        return asdict(self)


def mse_loss(predictions, labels) -> float:
    """Mean squared error between two equal-length vectors."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.size != y.size:
        raise LengthMismatch(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise EmptyList("cannot compute MSE of zero pairs")
    return float(np.mean((p - y) ** 2))


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class LstmModel:
    """From-scratch LSTM regressor mapping (L, D) binary matrices to scalars."""

    PARAM_KEYS = tuple(
        [k for g in GATES for k in (f"W_x{g}", f"W_h{g}", f"b_{g}")]
        + ["W_d", "b_d", "W_y", "b_y"]
    )

    def __init__(self, config: ModelConfig, sequence_length: int, row_width: int,
                 vocab_hash: str | None = None):
        self.config = config
        self.sequence_length = int(sequence_length)
        self.row_width = int(row_width)
        self.vocab_hash = vocab_hash
        self.label_mean = 0.0
        self.label_std = 1.0
        self._rng = np.random.default_rng(config.seed)
        H, Dd, D = config.lstm_units, config.dense_units, self.row_width
        self.params: dict[str, np.ndarray] = {}
        for g in GATES:
            self.params[f"W_x{g}"] = _xavier(self._rng, D, H, (D, H))
            self.params[f"W_h{g}"] = _xavier(self._rng, H, H, (H, H))
            self.params[f"b_{g}"] = np.ones(H) if g == "f" else np.zeros(H)
        self.params["W_d"] = _xavier(self._rng, H, Dd, (H, Dd))
        self.params["b_d"] = np.zeros(Dd)
        self.params["W_y"] = _xavier(self._rng, Dd, 1, (Dd, 1))
        self.params["b_y"] = np.zeros(1)
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_t = 0

    # -- forward -----------------------------------------------------------

    def _stacked(self):
        Wx = np.concatenate([self.params[f"W_x{g}"] for g in GATES], axis=1)
        Wh = np.concatenate([self.params[f"W_h{g}"] for g in GATES], axis=1)
        b = np.concatenate([self.params[f"b_{g}"] for g in GATES])
        return Wx, Wh, b

    def _forward(self, X: np.ndarray, want_cache: bool):
        """Run the network on a (N, L, D) batch; returns normalized outputs."""
        N, L, D = X.shape
        H = self.config.lstm_units
        Wx, Wh, b = self._stacked()
        pre_x = X.reshape(N * L, D) @ Wx + b
        pre_x = pre_x.reshape(N, L, 4 * H)
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        steps = []
        for t in range(L):
            a = pre_x[:, t, :] + h @ Wh
            i = _sigmoid(a[:, :H])
            f = _sigmoid(a[:, H : 2 * H])
            g = np.tanh(a[:, 2 * H : 3 * H])
            o = _sigmoid(a[:, 3 * H :])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h_prev = h
            h = o * tc
            if want_cache:
                steps.append((i, f, g, o, c_prev, tc, h_prev))
        pre_d = h @ self.params["W_d"] + self.params["b_d"]
        dense = np.maximum(pre_d, 0.0)
        yhat = (dense @ self.params["W_y"])[:, 0] + self.params["b_y"][0]
        cache = (X, steps, h, pre_d, dense) if want_cache else None
        return yhat, cache

    def _forward_chunks(self, X: np.ndarray) -> np.ndarray:
        """Fixed-size chunked forward pass so results do not depend on how
        the caller batches the input."""
        outs = [
            self._forward(X[s : s + PREDICT_CHUNK], want_cache=False)[0]
            for s in range(0, len(X), PREDICT_CHUNK)
        ]
        return np.concatenate(outs) if outs else np.zeros(0)

    def predict(self, X) -> np.ndarray:
        """Estimate labels for encoded queries, in original label units."""
        X = self._check_input(X)
        return self._forward_chunks(X) * self.label_std + self.label_mean

    def predict_batch(self, X, n_workers: int = 1) -> np.ndarray:
        """predict() with the fixed-size chunks fanned out over a thread
        pool. Chunk boundaries are independent of n_workers, so results are
        bit-identical for every worker count."""
        X = self._check_input(X)
        if n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        chunks = [X[s : s + PREDICT_CHUNK] for s in range(0, len(X), PREDICT_CHUNK)]
        if not chunks:
            return np.zeros(0)
        if n_workers == 1:
            outs = [self._forward(ch, want_cache=False)[0] for ch in chunks]
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                outs = list(pool.map(lambda ch: self._forward(ch, want_cache=False)[0], chunks))
        return np.concatenate(outs) * self.label_std + self.label_mean

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1:] != (self.sequence_length, self.row_width):
            raise LengthMismatch(
                f"expected input of shape (n, {self.sequence_length}, {self.row_width}), "
                f"got {X.shape}"
            )
        return X

    # -- backward ----------------------------------------------------------

    def _loss_and_grads(self, X: np.ndarray, z: np.ndarray):
        """MSE on normalized labels plus gradients for every parameter."""
        N = len(X)
        H = self.config.lstm_units
        yhat, cache = self._forward(X, want_cache=True)
        _, steps, hL, pre_d, dense = cache
        loss = float(np.mean((yhat - z) ** 2))

        dy = (2.0 / N) * (yhat - z)
        dy2 = dy[:, None]
        grads = {
            "W_y": dense.T @ dy2,
            "b_y": dy2.sum(axis=0),
        }
        dpre_d = (dy2 @ self.params["W_y"].T) * (pre_d > 0)
        grads["W_d"] = hL.T @ dpre_d
        grads["b_d"] = dpre_d.sum(axis=0)

        Wh = np.concatenate([self.params[f"W_h{g}"] for g in GATES], axis=1)
        dWh = np.zeros_like(Wh)
        db = np.zeros(4 * H)
        da_all = np.zeros((N, len(steps), 4 * H))
        dh = dpre_d @ self.params["W_d"].T
        dc = np.zeros_like(dh)
        for t in range(len(steps) - 1, -1, -1):
            i, f, g, o, c_prev, tc, h_prev = steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc = dc * f
            da = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)],
                axis=1,
            )
            da_all[:, t, :] = da
            dWh += h_prev.T @ da
            db += da.sum(axis=0)
            dh = da @ Wh.T
        D = self.row_width
        dWx = X.reshape(-1, D).T @ da_all.reshape(-1, 4 * H)
        for j, g in enumerate(GATES):
            sl = slice(j * H, (j + 1) * H)
            grads[f"W_x{g}"] = dWx[:, sl]
            grads[f"W_h{g}"] = dWh[:, sl]
            grads[f"b_{g}"] = db[sl]
        return loss, grads

    def _adam_step(self, grads: dict) -> None:
        self.adam_t += 1
        lr = self.config.learning_rate
        bias1 = 1.0 - ADAM_BETA1**self.adam_t
        bias2 = 1.0 - ADAM_BETA2**self.adam_t
        for k in self.PARAM_KEYS:
            g = grads[k]
            m = self.adam_m[k]
            v = self.adam_v[k]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            self.params[k] -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)

    # -- training ----------------------------------------------------------

    def _normalize(self, y: np.ndarray) -> np.ndarray:
        return (y - self.label_mean) / self.label_std

    def fit(self, X, y, X_val=None, y_val=None) -> TrainReport:
        """Train with Adam and early stopping on validation MSE.

        A fresh model fits from scratch; calling fit again continues from
        the current parameters and optimizer moments (best-model tracking
        restarts). Without a validation set the patience rule is off and
        the final parameters are kept.
        """
        start = time.perf_counter()
        X = self._check_input(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) != len(y):
            raise LengthMismatch(f"{len(X)} inputs vs {len(y)} labels")
        if len(X) == 0:
            raise EmptyList("cannot train on an empty workload")
        has_val = X_val is not None and y_val is not None
        if has_val:
            X_val = self._check_input(X_val)
            y_val = np.asarray(y_val, dtype=np.float64).ravel()
            if len(X_val) != len(y_val):
                raise LengthMismatch(f"{len(X_val)} validation inputs vs {len(y_val)} labels")

        if self.adam_t == 0 and self.config.label_norm == "zscore":
            self.label_mean = float(np.mean(y))
            std = float(np.std(y))
            self.label_std = std if std > 1e-12 else 1.0
        z = self._normalize(y)
        z_val = self._normalize(y_val) if has_val else None

        n = len(X)
        bs = self.config.batch_size
        best_val = math.inf
        best_epoch = 0
        best_params = None
        since_best = 0
        train_history: list[float] = []
        val_history: list[float] = []
        epochs_run = 0
        for epoch in range(1, self.config.max_epochs + 1):
            perm = self._rng.permutation(n)
            sq_err = 0.0
            for s in range(0, n, bs):
                idx = perm[s : s + bs]
                loss, grads = self._loss_and_grads(X[idx], z[idx])
                if not np.isfinite(loss):
                    raise DivergedLoss(f"training loss became {loss} in epoch {epoch}")
                self._adam_step(grads)
                sq_err += loss * len(idx)
            train_mse = sq_err / n
            train_history.append(train_mse)
            epochs_run = epoch
            if not has_val:
                continue
            val_pred = self._forward_chunks(X_val)
            val_mse = float(np.mean((val_pred - z_val) ** 2))
            if not np.isfinite(val_mse):
                raise DivergedLoss(f"validation loss became {val_mse} in epoch {epoch}")
            val_history.append(val_mse)
            if val_mse < best_val:
                best_val = val_mse
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in self.params.items()}
                since_best = 0
            else:
                since_best += 1
                if since_best > self.config.patience:
                    break
        if has_val and best_params is not None:
            self.params = best_params
        else:
            best_epoch = epochs_run
            best_val = train_history[-1] if train_history else math.inf
        return TrainReport(
            epochs_run=epochs_run,
            best_epoch=best_epoch,
            best_val_mse=float(best_val),
            train_history=tuple(train_history),
            val_history=tuple(val_history),
            label_mean=self.label_mean,
            label_std=self.label_std,
            wall_seconds=time.perf_counter() - start,
        )

    # -- verification ------------------------------------------------------

    def gradient_check(self, X, y, samples_per_param: int | None = 4,
                       step: float = 1e-5, seed: int = 0) -> dict:
        """Compare analytic gradients against central differences.

        Returns the worst relative error per parameter tensor, where the
        error of one coordinate is |ga - gn| / max(|ga| + |gn|, 1e-12).
        samples_per_param=None checks every coordinate.
        """
        X = self._check_input(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        z = self._normalize(y)
        _, grads = self._loss_and_grads(X, z)
        rng = np.random.default_rng(seed)
        errors = {}
        for k in self.PARAM_KEYS:
            flat = self.params[k].reshape(-1)
            if samples_per_param is None or samples_per_param >= flat.size:
                idx = np.arange(flat.size)
            else:
                idx = rng.choice(flat.size, size=samples_per_param, replace=False)
            worst = 0.0
            for j in idx:
                orig = flat[j]
                flat[j] = orig + step
                up, _ = self._forward(X, want_cache=False)
                loss_up = float(np.mean((up - z) ** 2))
                flat[j] = orig - step
                dn, _ = self._forward(X, want_cache=False)
                loss_dn = float(np.mean((dn - z) ** 2))
                flat[j] = orig
                gn = (loss_up - loss_dn) / (2.0 * step)
                ga = grads[k].reshape(-1)[j]
                err = abs(ga - gn) / max(abs(ga) + abs(gn), 1e-12)
                worst = max(worst, err)
            errors[k] = worst
        return errors

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Write a self-contained checkpoint (parameters, optimizer moments,
        label statistics, config, vocabulary hash)."""
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "sequence_length": self.sequence_length,
            "row_width": self.row_width,
            "label_mean": self.label_mean,
            "label_std": self.label_std,
            "adam_t": self.adam_t,
            "vocab_hash": self.vocab_hash,
        }
        arrays = {f"param_{k}": v for k, v in self.params.items()}
        arrays.update({f"m_{k}": v for k, v in self.adam_m.items()})
        arrays.update({f"v_{k}": v for k, v in self.adam_v.items()})
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path, expected_vocab_hash: str | None = None) -> "LstmModel":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise VersionMismatch(
                    f"checkpoint version {meta.get('version')} != {CHECKPOINT_VERSION}"
                )
            if expected_vocab_hash is not None and meta["vocab_hash"] != expected_vocab_hash:
                raise VocabularyMismatch(
                    "checkpoint was trained under a different vocabulary "
                    f"({meta['vocab_hash']} != {expected_vocab_hash})"
                )
            model = cls(
                ModelConfig(**meta["config"]),
                meta["sequence_length"],
                meta["row_width"],
                vocab_hash=meta["vocab_hash"],
            )
            model.label_mean = float(meta["label_mean"])
            model.label_std = float(meta["label_std"])
            model.adam_t = int(meta["adam_t"])
            for k in cls.PARAM_KEYS:
                model.params[k] = data[f"param_{k}"].copy()
                model.adam_m[k] = data[f"m_{k}"].copy()
                model.adam_v[k] = data[f"v_{k}"].copy()
        return model
