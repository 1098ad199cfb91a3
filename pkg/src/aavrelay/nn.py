"""Network building blocks: dense stacks, layer-normalized GRU, channel
attention over the time axis, and the squashed-Gaussian policy head, plus the
actor/critic compositions the trainer uses.

Parameters live in flat name -> Tensor dicts; every network can be rebuilt
from such a dict alone (layer sizes are inferred from array shapes), which is
what checkpointing and structured pruning rely on.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LN2PI = math.log(2.0 * math.pi)
_LN2 = math.log(2.0)


def fan_in_uniform(rng: np.random.Generator, shape: Tuple[int, ...], dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(shape[0])
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _bias_uniform(rng: np.random.Generator, fan_in: int, size: int, dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=size).astype(dtype)


def orthogonal(rng: np.random.Generator, shape: Tuple[int, int], dtype) -> np.ndarray:
    a = rng.normal(size=(max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if q.shape != shape:
        q = q.T
    return q.astype(dtype)


def _param(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


class Dense:
    """Affine layer with an optional activation."""

    def __init__(self, w: Tensor, b: Tensor, activation: Optional[str] = None):
        self.w = w
        self.b = b
        self.activation = activation

    @classmethod
    def create(cls, rng, in_dim, out_dim, dtype, activation=None) -> "Dense":
        return cls(
            _param(fan_in_uniform(rng, (in_dim, out_dim), dtype)),
            _param(_bias_uniform(rng, in_dim, out_dim, dtype)),
            activation,
        )

    def __call__(self, x: Tensor) -> Tensor:
        out = ad.linear(x, self.w, self.b)
        if self.activation == "relu":
            return ad.relu(out)
        if self.activation == "tanh":
            return ad.tanh(out)
        return out


class LnGruCell:
    """GRU cell with layer normalization on each gate pre-activation.

    r = sigmoid(LN(x W_r) + LN(h U_r))
    z = sigmoid(LN(x W_z) + LN(h U_z))
    c = tanh(LN(x W_h) + r * LN(h U_h))
    h' = (1 - z) * h + z * c

    Gates are packed [r | z | c] along the output axis of W and U; the
    printed formulation carries no biases and no learned LN affine.
    """

    has_ln = True

    def __init__(self, w: Tensor, u: Tensor, ln_eps: float = 1e-5):
        self.w = w
        self.u = u
        self.ln_eps = ln_eps
        self.hidden_dim = u.data.shape[0]

    @classmethod
    def create(cls, rng, in_dim, hidden_dim, dtype, ln_eps=1e-5) -> "LnGruCell":
        w = fan_in_uniform(rng, (in_dim, 3 * hidden_dim), dtype)
        u = np.concatenate(
            [orthogonal(rng, (hidden_dim, hidden_dim), dtype) for _ in range(3)], axis=1
        )
        return cls(_param(w), _param(u), ln_eps)

    def params(self, prefix: str) -> "OrderedDict[str, Tensor]":
        return OrderedDict([(f"{prefix}.w", self.w), (f"{prefix}.u", self.u)])

    def precompute_inputs(self, x_all: Tensor) -> Tensor:
        """Normalized input-side pre-activations for any number of rows; the
        x path has no recurrence, so whole windows go through one matmul."""
        return ad.packed_layer_norm(ad.matmul(x_all, self.w), 3, self.ln_eps)

    def step(self, xw_ln: Tensor, h: Tensor) -> Tensor:
        return ad.lngru_step(xw_ln, h, self.u, self.ln_eps)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return self.step(self.precompute_inputs(x), h)


class GruCell:
    """Plain GRU cell (same gate convention as LnGruCell, biases included,
    no normalization); the -LNGRU ablation variant."""

    has_ln = False

    def __init__(self, w: Tensor, u: Tensor, b_ih: Tensor, b_hh: Tensor):
        self.w = w
        self.u = u
        self.b_ih = b_ih
        self.b_hh = b_hh
        self.hidden_dim = u.data.shape[0]

    @classmethod
    def create(cls, rng, in_dim, hidden_dim, dtype, ln_eps=None) -> "GruCell":
        del ln_eps
        w = fan_in_uniform(rng, (in_dim, 3 * hidden_dim), dtype)
        u = np.concatenate(
            [orthogonal(rng, (hidden_dim, hidden_dim), dtype) for _ in range(3)], axis=1
        )
        zeros = np.zeros(3 * hidden_dim, dtype=dtype)
        return cls(_param(w), _param(u), _param(zeros.copy()), _param(zeros.copy()))

    def params(self, prefix: str) -> "OrderedDict[str, Tensor]":
        return OrderedDict(
            [
                (f"{prefix}.w", self.w),
                (f"{prefix}.u", self.u),
                (f"{prefix}.b_ih", self.b_ih),
                (f"{prefix}.b_hh", self.b_hh),
            ]
        )

    def precompute_inputs(self, x_all: Tensor) -> Tensor:
        return ad.linear(x_all, self.w, self.b_ih)

    def step(self, xw: Tensor, h: Tensor) -> Tensor:
        return ad.gru_step(xw, h, self.u, self.b_hh)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return self.step(self.precompute_inputs(x), h)


class SeBlock:
    """Squeeze-and-excitation over a hidden-state sequence: squeeze averages
    each channel across time, the excitation bottleneck emits per-channel
    weights in (0, 1), and every timestep is rescaled channel-wise."""

    def __init__(self, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor):
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2

    @classmethod
    def create(cls, rng, channels, reduction, dtype) -> "SeBlock":
        mid = max(1, channels // reduction)
        return cls(
            _param(fan_in_uniform(rng, (channels, mid), dtype)),
            _param(_bias_uniform(rng, channels, mid, dtype)),
            _param(fan_in_uniform(rng, (mid, channels), dtype)),
            _param(_bias_uniform(rng, mid, channels, dtype)),
        )

    def params(self, prefix: str) -> "OrderedDict[str, Tensor]":
        return OrderedDict(
            [
                (f"{prefix}.w1", self.w1),
                (f"{prefix}.b1", self.b1),
                (f"{prefix}.w2", self.w2),
                (f"{prefix}.b2", self.b2),
            ]
        )

    def weights(self, features: Sequence[Tensor]) -> Tensor:
        squeeze = features[0]
        for f in features[1:]:
            squeeze = squeeze + f
        squeeze = squeeze * (1.0 / len(features))
        hidden = ad.relu(ad.linear(squeeze, self.w1, self.b1))
        return ad.sigmoid(ad.linear(hidden, self.w2, self.b2))

    def __call__(self, features: Sequence[Tensor]) -> List[Tensor]:
        scale = self.weights(features)
        return [f * scale for f in features]


class SquashedGaussianHead:
    """Tanh-squashed diagonal Gaussian with the change-of-variables
    log-density correction; log-std is clamped to [-20, 2]."""

    def __init__(self, w_mu: Tensor, b_mu: Tensor, w_ls: Tensor, b_ls: Tensor):
        self.w_mu = w_mu
        self.b_mu = b_mu
        self.w_ls = w_ls
        self.b_ls = b_ls

    @classmethod
    def create(cls, rng, in_dim, action_dim, dtype) -> "SquashedGaussianHead":
        return cls(
            _param(fan_in_uniform(rng, (in_dim, action_dim), dtype)),
            _param(_bias_uniform(rng, in_dim, action_dim, dtype)),
            _param(fan_in_uniform(rng, (in_dim, action_dim), dtype)),
            _param(_bias_uniform(rng, in_dim, action_dim, dtype)),
        )

    def params(self, prefix: str) -> "OrderedDict[str, Tensor]":
        return OrderedDict(
            [
                (f"{prefix}.mu_w", self.w_mu),
                (f"{prefix}.mu_b", self.b_mu),
                (f"{prefix}.ls_w", self.w_ls),
                (f"{prefix}.ls_b", self.b_ls),
            ]
        )

    def distribution(self, feat: Tensor) -> Tuple[Tensor, Tensor]:
        mu = ad.linear(feat, self.w_mu, self.b_mu)
        log_std = ad.clip(ad.linear(feat, self.w_ls, self.b_ls), LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def sample(self, feat: Tensor, noise: np.ndarray) -> Tuple[Tensor, Tensor]:
        """Reparameterized sample and its log-probability (summed over action
        dims, shape (B, 1))."""
        mu, log_std = self.distribution(feat)
        std = ad.exp(log_std)
        u = mu + std * Tensor(noise.astype(mu.dtype, copy=False))
        action = ad.tanh(u)
        z = (u - mu) / std
        gauss = -0.5 * ad.square(z) - log_std - 0.5 * _LN2PI
        # log(1 - tanh(u)^2) in a form stable for large |u|
        correction = 2.0 * (_LN2 - u - ad.softplus(-2.0 * u))
        log_prob = ad.tensor_sum(gauss - correction, axis=1, keepdims=True)
        return action, log_prob

    def deterministic(self, feat: Tensor) -> Tensor:
        mu, _ = self.distribution(feat)
        return ad.tanh(mu)


class SequenceEncoder:
    """Recurrent encoder over an observation window, with optional SE
    recalibration of the hidden-state sequence; emits the final timestep."""

    def __init__(self, cell, se: Optional[SeBlock]):
        self.cell = cell
        self.se = se

    @classmethod
    def create(cls, rng, obs_dim, hidden_dim, *, use_lngru, use_se, se_reduction, ln_eps, dtype):
        cell_cls = LnGruCell if use_lngru else GruCell
        cell = cell_cls.create(rng, obs_dim, hidden_dim, dtype, ln_eps=ln_eps)
        se = SeBlock.create(rng, hidden_dim, se_reduction, dtype) if use_se else None
        return cls(cell, se)

    @property
    def hidden_dim(self) -> int:
        return self.cell.hidden_dim

    def params(self, prefix: str) -> "OrderedDict[str, Tensor]":
        out = self.cell.params(f"{prefix}.gru")
        if self.se is not None:
            out.update(self.se.params(f"{prefix}.se"))
        return out

    def forward_window(self, tail: np.ndarray, dtype) -> Tensor:
        """Encode a (B, window, obs) batch; the input-side pre-activations of
        all timesteps go through one matmul before the recurrent loop."""
        b, n, f = tail.shape
        flat = Tensor(np.ascontiguousarray(tail.transpose(1, 0, 2), dtype=dtype).reshape(n * b, f))
        xw_all = self.cell.precompute_inputs(flat)
        h = Tensor(np.zeros((b, self.hidden_dim), dtype=dtype))
        outputs = []
        for t in range(n):
            h = self.cell.step(ad.narrow(xw_all, 0, t * b, b), h)
            outputs.append(h)
        if self.se is not None:
            outputs = self.se(outputs)
        return outputs[-1]

    def __call__(self, steps: Sequence[Tensor]) -> Tensor:
        batch = steps[0].data.shape[0]
        h = Tensor(np.zeros((batch, self.hidden_dim), dtype=steps[0].dtype))
        outputs = []
        for x in steps:
            h = self.cell(x, h)
            outputs.append(h)
        if self.se is not None:
            outputs = self.se(outputs)
        return outputs[-1]


def _window_tail(seq_batch: np.ndarray, window: int) -> np.ndarray:
    seq_batch = np.asarray(seq_batch)
    if seq_batch.ndim == 2:
        seq_batch = seq_batch[None, :, :]
    return seq_batch[:, seq_batch.shape[1] - window :, :]


class ActorNetwork:
    """Policy network: optional sequence encoder, dense trunk, squashed head.

    With every ablation flag off this reduces to a feed-forward network on
    the single most recent observation.
    """

    def __init__(self, encoder, trunk: List[Dense], head, meta: Dict):
        self.encoder = encoder
        self.trunk = trunk
        self.head = head
        self.meta = dict(meta)
        self.dtype = np.dtype(meta["dtype"])

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        obs_dim: int,
        action_dim: int,
        *,
        seq_len: int,
        hidden_dim: int,
        trunk_dims: Sequence[int],
        se_reduction: int = 4,
        ln_eps: float = 1e-5,
        use_seq: bool = True,
        use_lngru: bool = True,
        use_se: bool = True,
        dtype: str = "float64",
    ) -> "ActorNetwork":
        np_dtype = np.dtype(dtype)
        recurrent = use_seq or use_lngru or use_se
        meta = {
            "obs_dim": obs_dim,
            "action_dim": action_dim,
            "window": seq_len if use_seq else 1,
            "use_seq": use_seq,
            "use_lngru": use_lngru,
            "use_se": use_se,
            "recurrent": recurrent,
            "ln_eps": ln_eps,
            "dtype": dtype,
        }
        encoder = None
        feat_dim = obs_dim
        if recurrent:
            encoder = SequenceEncoder.create(
                rng,
                obs_dim,
                hidden_dim,
                use_lngru=use_lngru,
                use_se=use_se,
                se_reduction=se_reduction,
                ln_eps=ln_eps,
                dtype=np_dtype,
            )
            feat_dim = hidden_dim
        trunk = []
        in_dim = feat_dim
        for out_dim in trunk_dims:
            trunk.append(Dense.create(rng, in_dim, out_dim, np_dtype, activation="relu"))
            in_dim = out_dim
        head = SquashedGaussianHead.create(rng, in_dim, action_dim, np_dtype)
        return cls(encoder, trunk, head, meta)

    @classmethod
    def from_params(cls, values: Dict[str, np.ndarray], meta: Dict) -> "ActorNetwork":
        """Rebuild an actor from named arrays; layer sizes come from shapes."""
        encoder, trunk = _rebuild_common(values, meta)
        head = SquashedGaussianHead(
            _param(np.array(values["head.mu_w"], order="C")),
            _param(np.array(values["head.mu_b"], order="C")),
            _param(np.array(values["head.ls_w"], order="C")),
            _param(np.array(values["head.ls_b"], order="C")),
        )
        return cls(encoder, trunk, head, meta)

    def params(self) -> "OrderedDict[str, Tensor]":
        out: "OrderedDict[str, Tensor]" = OrderedDict()
        if self.encoder is not None:
            out.update(self.encoder.params("encoder"))
        for i, layer in enumerate(self.trunk):
            out[f"trunk.{i}.w"] = layer.w
            out[f"trunk.{i}.b"] = layer.b
        out.update(self.head.params("head"))
        return out

    def features(self, seq_batch: np.ndarray) -> Tensor:
        tail = _window_tail(seq_batch, self.meta["window"])
        if self.encoder is not None:
            feat = self.encoder.forward_window(tail, self.dtype)
        else:
            feat = Tensor(np.ascontiguousarray(tail[:, -1, :], dtype=self.dtype))
        for layer in self.trunk:
            feat = layer(feat)
        return feat

    def sample(self, seq_batch: np.ndarray, noise: np.ndarray) -> Tuple[Tensor, Tensor]:
        return self.head.sample(self.features(seq_batch), noise)

    def act(self, seq: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Single-observation policy query; deterministic when rng is None."""
        with ad.no_grad():
            feat = self.features(seq[None, :, :] if seq.ndim == 2 else seq)
            if rng is None:
                return np.asarray(self.head.deterministic(feat).data[0])
            noise = rng.standard_normal((feat.data.shape[0], self.meta["action_dim"]))
            action, _ = self.head.sample(feat, noise)
            return np.asarray(action.data[0])

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params().values())


class CriticNetwork:
    """Action-value network sharing the actor's encoder architecture
    (separate weights); the action joins at the trunk input."""

    def __init__(self, encoder, trunk: List[Dense], out_layer: Dense, meta: Dict):
        self.encoder = encoder
        self.trunk = trunk
        self.out_layer = out_layer
        self.meta = dict(meta)
        self.dtype = np.dtype(meta["dtype"])

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        obs_dim: int,
        action_dim: int,
        *,
        seq_len: int,
        hidden_dim: int,
        trunk_dims: Sequence[int],
        se_reduction: int = 4,
        ln_eps: float = 1e-5,
        use_seq: bool = True,
        use_lngru: bool = True,
        use_se: bool = True,
        dtype: str = "float64",
    ) -> "CriticNetwork":
        np_dtype = np.dtype(dtype)
        recurrent = use_seq or use_lngru or use_se
        meta = {
            "obs_dim": obs_dim,
            "action_dim": action_dim,
            "window": seq_len if use_seq else 1,
            "use_seq": use_seq,
            "use_lngru": use_lngru,
            "use_se": use_se,
            "recurrent": recurrent,
            "ln_eps": ln_eps,
            "dtype": dtype,
        }
        encoder = None
        feat_dim = obs_dim
        if recurrent:
            encoder = SequenceEncoder.create(
                rng,
                obs_dim,
                hidden_dim,
                use_lngru=use_lngru,
                use_se=use_se,
                se_reduction=se_reduction,
                ln_eps=ln_eps,
                dtype=np_dtype,
            )
            feat_dim = hidden_dim
        trunk = []
        in_dim = feat_dim + action_dim
        for out_dim in trunk_dims:
            trunk.append(Dense.create(rng, in_dim, out_dim, np_dtype, activation="relu"))
            in_dim = out_dim
        out_layer = Dense.create(rng, in_dim, 1, np_dtype)
        return cls(encoder, trunk, out_layer, meta)

    @classmethod
    def from_params(cls, values: Dict[str, np.ndarray], meta: Dict) -> "CriticNetwork":
        encoder, trunk = _rebuild_common(values, meta)
        out_layer = Dense(
            _param(np.array(values["out.w"], order="C")), _param(np.array(values["out.b"], order="C"))
        )
        return cls(encoder, trunk, out_layer, meta)

    def params(self) -> "OrderedDict[str, Tensor]":
        out: "OrderedDict[str, Tensor]" = OrderedDict()
        if self.encoder is not None:
            out.update(self.encoder.params("encoder"))
        for i, layer in enumerate(self.trunk):
            out[f"trunk.{i}.w"] = layer.w
            out[f"trunk.{i}.b"] = layer.b
        out["out.w"] = self.out_layer.w
        out["out.b"] = self.out_layer.b
        return out

    def state_features(self, seq_batch: np.ndarray) -> Tensor:
        """Encoder output for the state side only (action-independent)."""
        tail = _window_tail(seq_batch, self.meta["window"])
        if self.encoder is not None:
            return self.encoder.forward_window(tail, self.dtype)
        return Tensor(np.ascontiguousarray(tail[:, -1, :], dtype=self.dtype))

    def q_from_features(self, feat: Tensor, action) -> Tensor:
        action_t = action if isinstance(action, Tensor) else Tensor(
            np.asarray(action, dtype=self.dtype)
        )
        x = ad.concat([feat, action_t], axis=1)
        for layer in self.trunk:
            x = layer(x)
        return self.out_layer(x)

    def q_value(self, seq_batch: np.ndarray, action) -> Tensor:
        return self.q_from_features(self.state_features(seq_batch), action)

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params().values())


def _rebuild_common(values: Dict[str, np.ndarray], meta: Dict):
    """Shared encoder/trunk reconstruction for both network kinds."""
    encoder = None
    if meta.get("recurrent"):
        w = _param(np.array(values["encoder.gru.w"], order="C"))
        u = _param(np.array(values["encoder.gru.u"], order="C"))
        if meta.get("use_lngru"):
            cell = LnGruCell(w, u, meta.get("ln_eps", 1e-5))
        else:
            cell = GruCell(
                w,
                u,
                _param(np.array(values["encoder.gru.b_ih"], order="C")),
                _param(np.array(values["encoder.gru.b_hh"], order="C")),
            )
        se = None
        if "encoder.se.w1" in values:
            se = SeBlock(
                _param(np.array(values["encoder.se.w1"], order="C")),
                _param(np.array(values["encoder.se.b1"], order="C")),
                _param(np.array(values["encoder.se.w2"], order="C")),
                _param(np.array(values["encoder.se.b2"], order="C")),
            )
        encoder = SequenceEncoder(cell, se)
    trunk = []
    i = 0
    while f"trunk.{i}.w" in values:
        trunk.append(
            Dense(
                _param(np.array(values[f"trunk.{i}.w"], order="C")),
                _param(np.array(values[f"trunk.{i}.b"], order="C")),
                activation="relu",
            )
        )
        i += 1
    return encoder, trunk


def clone_params(params: "OrderedDict[str, Tensor]") -> "OrderedDict[str, Tensor]":
    return OrderedDict((k, Tensor(v.data.copy(), requires_grad=False)) for k, v in params.items())


def load_param_values(network_params: "OrderedDict[str, Tensor]", values: Dict[str, np.ndarray]):
    """Overwrite a network's parameter arrays in place (shapes must match)."""
    for name, tensor in network_params.items():
        if name not in values:
            raise KeyError(f"missing parameter {name}")
        arr = np.asarray(values[name], dtype=tensor.data.dtype)
        if arr.shape != tensor.data.shape:
            raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {tensor.data.shape}")
        tensor.data = arr.copy()
