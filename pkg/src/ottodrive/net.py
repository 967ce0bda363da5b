"""Convolutional actor-critic on raw numpy, with hand-written backprop.

The default configuration takes the (3, 24, 24) binary observation
stack through two strided convs, one dense layer, and two linear heads
(5 action logits, 1 value). Sizes are parameterized so the gradient
tests can run a shrunken float64 copy of the same code path.

Weights live in a plain {name: ndarray} dict in a fixed order; the
optimizer, the serializer, and the finite-difference harness all walk
that dict.
"""

import io
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, NonFiniteLoss, ShapeMismatch, VersionMismatch
from .kernels import conv2d_backward, conv2d_forward

PARAM_ORDER = (
    "conv1_w", "conv1_b", "conv2_w", "conv2_b",
    "dense_w", "dense_b", "policy_w", "policy_b",
    "value_w", "value_b",
)

MAGIC = b"ARTN"
FORMAT_VERSION = 1


def _conv_out(size, k, stride):
    out = (size - k) // stride + 1
    if out <= 0 or (size - k) < 0:
        raise ValueError(f"conv reduces {size} below 1 with kernel {k} stride {stride}")
    return out


@dataclass
class NetConfig:
    in_frames: int = 3
    in_size: int = 24
    conv1_filters: int = 8
    conv1_kernel: int = 5
    conv1_stride: int = 2
    conv2_filters: int = 16
    conv2_kernel: int = 3
    conv2_stride: int = 2
    dense_units: int = 128
    n_actions: int = 5
    dtype: object = np.float32

    @property
    def conv1_out(self):
        return _conv_out(self.in_size, self.conv1_kernel, self.conv1_stride)

    @property
    def conv2_out(self):
        return _conv_out(self.conv1_out, self.conv2_kernel, self.conv2_stride)

    @property
    def flat_dim(self):
        return self.conv2_filters * self.conv2_out * self.conv2_out


GRADCHECK_CONFIG = NetConfig(
    in_frames=3, in_size=4,
    conv1_filters=8, conv1_kernel=3, conv1_stride=1,
    conv2_filters=16, conv2_kernel=2, conv2_stride=1,
    dense_units=32, dtype=np.float64,
)


def _orthogonal(rng, shape, gain):
    """SVD-orthogonalized gaussian, reshaped to `shape`."""
    rows = shape[0]
    cols = int(np.prod(shape[1:]))
    a = rng.standard_normal((rows, cols))
    u, _s, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == (rows, cols) else vt
    return (gain * q).reshape(shape)


# Initial logit bonus on Accelerate. A stationary vehicle renders the
# same frames forever, so a deterministic argmax policy that prefers any
# non-accelerate action in such a state parks there for the whole
# episode. States like that are barely visited during on-policy sampling
# and keep near-init logits, so the init prior has to be the one that
# escapes. Small enough that the initial policy stays near uniform.
ACCEL_INIT_BIAS = 0.1


def init_params(config, seed):
    """Orthogonal weights (policy head scaled to 0.01 for a near-uniform
    initial softmax), zero biases except a slight accelerate prior."""
    rng = np.random.default_rng(int(seed))
    c = config
    root2 = np.sqrt(2.0)
    policy_b = np.zeros(c.n_actions)
    policy_b[0] = ACCEL_INIT_BIAS
    p = {
        "conv1_w": _orthogonal(rng, (c.conv1_filters, c.in_frames, c.conv1_kernel, c.conv1_kernel), root2),
        "conv1_b": np.zeros(c.conv1_filters),
        "conv2_w": _orthogonal(rng, (c.conv2_filters, c.conv1_filters, c.conv2_kernel, c.conv2_kernel), root2),
        "conv2_b": np.zeros(c.conv2_filters),
        "dense_w": _orthogonal(rng, (c.flat_dim, c.dense_units), root2),
        "dense_b": np.zeros(c.dense_units),
        "policy_w": _orthogonal(rng, (c.dense_units, c.n_actions), 0.01),
        "policy_b": policy_b,
        "value_w": _orthogonal(rng, (c.dense_units, 1), 1.0),
        "value_b": np.zeros(1),
    }
    return {k: np.ascontiguousarray(v, dtype=c.dtype) for k, v in p.items()}


def num_params(params):
    return int(sum(v.size for v in params.values()))


def softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def sample_action(logits, rng):
    """Inverse-CDF sample from softmax(logits) using one uniform draw.

    Returns (action, log-probability of that action).
    """
    p = softmax(np.asarray(logits, dtype=np.float64))
    cdf = np.cumsum(p)
    u = rng.random()
    action = int(np.searchsorted(cdf, u, side="right"))
    if action >= p.size:  # u landed on the last float edge
        action = p.size - 1
    logp = log_softmax(np.asarray(logits, dtype=np.float64))[action]
    return action, float(logp)


class PolicyNet:
    def __init__(self, config=None, seed=0, params=None):
        self.config = config if config is not None else NetConfig()
        if params is not None:
            self.params = params
        else:
            self.params = init_params(self.config, seed)

    def forward(self, obs):
        """Single observation (F, H, W) -> (logits (A,), value scalar)."""
        logits, values, _ = self.forward_batch(np.asarray(obs)[None])
        return logits[0], float(values[0])

    def forward_batch(self, x, want_cache=False):
        """Batch (N, F, H, W) -> (logits (N, A), values (N,), cache)."""
        p = self.params
        c = self.config
        x = np.ascontiguousarray(x, dtype=c.dtype)
        z1 = conv2d_forward(x, p["conv1_w"], p["conv1_b"], c.conv1_stride)
        a1 = np.maximum(z1, 0)
        z2 = conv2d_forward(a1, p["conv2_w"], p["conv2_b"], c.conv2_stride)
        a2 = np.maximum(z2, 0)
        flat = a2.reshape(x.shape[0], -1)
        z3 = flat @ p["dense_w"] + p["dense_b"]
        a3 = np.maximum(z3, 0)
        logits = a3 @ p["policy_w"] + p["policy_b"]
        values = (a3 @ p["value_w"])[:, 0] + p["value_b"][0]
        cache = (x, z1, a1, z2, a2, flat, z3, a3) if want_cache else None
        return logits, values, cache

    def backward_batch(self, cache, dlogits, dvalues):
        """Gradients of a scalar loss given d loss / d logits and d loss / d values."""
        p = self.params
        c = self.config
        x, z1, a1, z2, a2, flat, z3, a3 = cache
        dlogits = np.ascontiguousarray(dlogits, dtype=c.dtype)
        dvalues = np.ascontiguousarray(dvalues, dtype=c.dtype)

        g = {}
        g["policy_w"] = a3.T @ dlogits
        g["policy_b"] = dlogits.sum(axis=0)
        g["value_w"] = (a3.T @ dvalues)[:, None]
        g["value_b"] = np.array([dvalues.sum()], dtype=c.dtype)
        da3 = dlogits @ p["policy_w"].T + dvalues[:, None] * p["value_w"][:, 0][None, :]
        dz3 = da3 * (z3 > 0)
        g["dense_w"] = flat.T @ dz3
        g["dense_b"] = dz3.sum(axis=0)
        dflat = dz3 @ p["dense_w"].T
        da2 = dflat.reshape(a2.shape)
        dz2 = np.ascontiguousarray(da2 * (z2 > 0))
        da1, g["conv2_w"], g["conv2_b"] = conv2d_backward(a1, p["conv2_w"], c.conv2_stride, dz2)
        dz1 = np.ascontiguousarray(da1 * (z1 > 0))
        _dx, g["conv1_w"], g["conv1_b"] = conv2d_backward(x, p["conv1_w"], c.conv1_stride, dz1)
        return {k: np.ascontiguousarray(g[k], dtype=c.dtype) for k in PARAM_ORDER}

    def clone(self):
        other = PolicyNet(config=self.config, params={k: v.copy() for k, v in self.params.items()})
        return other


@dataclass
class LossStats:
    total: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


def ppo_loss_and_grads(net, obs, actions, old_logp, advantages, returns,
                       clip_eps=0.2, vf_coef=0.5, ent_coef=0.01):
    """Clipped-surrogate loss over one minibatch, plus parameter gradients.

    total = policy_clip + vf_coef * value_mse - ent_coef * entropy.
    Raises NonFiniteLoss if the total or any gradient goes NaN/Inf.
    """
    actions = np.asarray(actions, dtype=np.int64)
    old_logp = np.asarray(old_logp, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    returns = np.asarray(returns, dtype=np.float64)
    m = actions.shape[0]

    logits, values, cache = net.forward_batch(obs, want_cache=True)
    logits64 = np.asarray(logits, dtype=np.float64)
    values64 = np.asarray(values, dtype=np.float64)
    logp_all = log_softmax(logits64)
    p_all = np.exp(logp_all)
    logp = logp_all[np.arange(m), actions]

    ratio = np.exp(logp - old_logp)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    policy_loss = -float(np.mean(np.minimum(surr1, surr2)))
    value_loss = float(np.mean((values64 - returns) ** 2))
    ent_per = -np.sum(p_all * logp_all, axis=1)
    entropy = float(np.mean(ent_per))
    total = policy_loss + vf_coef * value_loss - ent_coef * entropy
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > clip_eps))

    # d policy_loss / d logp: the min() follows the unclipped branch when
    # surr1 <= surr2; the clipped branch is locally constant in logp.
    use_unclipped = surr1 <= surr2
    g_logp = np.where(use_unclipped, -ratio * advantages / m, 0.0)
    onehot = np.zeros_like(p_all)
    onehot[np.arange(m), actions] = 1.0
    dlogits = g_logp[:, None] * (onehot - p_all)
    # entropy term: dH/dz = -p * (logp + H); loss carries -ent_coef * mean(H)
    dlogits += (ent_coef / m) * p_all * (logp_all + ent_per[:, None])
    dvalues = vf_coef * 2.0 * (values64 - returns) / m

    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss diverged: total={total}")
    grads = net.backward_batch(cache, dlogits, dvalues)
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteLoss(f"non-finite gradient in {name}")
    stats = LossStats(
        total=total,
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=entropy,
        clip_fraction=clip_fraction,
    )
    return stats, grads


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                max_grad_norm=0.5):
    """One Adam step, in place, after global gradient-norm clipping.

    All-zero gradients leave the weights bitwise unchanged but still
    advance the step counter.
    """
    sq = 0.0
    for k in params:
        g = np.asarray(grads[k], dtype=np.float64)
        sq += float(np.sum(g * g))
    norm = float(np.sqrt(sq))
    scale = max_grad_norm / norm if norm > max_grad_norm else 1.0

    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for k in params:
        p = params[k]
        g = np.asarray(grads[k], dtype=p.dtype) * p.dtype.type(scale)
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        mhat = state.m[k] / bc1
        vhat = state.v[k] / bc2
        p -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.dtype)
    return norm


# === weight serialization ===


def _read_exact(f, n, what):
    b = f.read(n)
    if len(b) != n:
        raise BadMagic(f"truncated weight file while reading {what}")
    return b


def save_weights(params, path):
    """Binary tensor bundle: ARTN magic, version, then named f32 tensors."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<I", len(params)))
    for name in params:
        data = np.ascontiguousarray(params[name], dtype="<f4")
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", data.ndim))
        for d in data.shape:
            buf.write(struct.pack("<I", d))
        buf.write(data.tobytes(order="C"))
    blob = buf.getvalue()
    if hasattr(path, "write"):
        path.write(blob)
    else:
        with open(path, "wb") as f:
            f.write(blob)


def load_weights(path, expected_shapes=None):
    """Read a weight bundle back into {name: float32 ndarray}.

    expected_shapes, when given, is checked tensor by tensor; the error
    names the offending tensor.
    """
    if hasattr(path, "read"):
        f = path
        return _load_from(f, expected_shapes)
    with open(path, "rb") as f:
        return _load_from(f, expected_shapes)


def _load_from(f, expected_shapes):
    magic = f.read(4)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    version = struct.unpack("<I", _read_exact(f, 4, "version"))[0]
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported weight format version {version}")
    count = struct.unpack("<I", _read_exact(f, 4, "tensor count"))[0]
    params = {}
    for _ in range(count):
        nlen = struct.unpack("<H", _read_exact(f, 2, "name length"))[0]
        name = _read_exact(f, nlen, "tensor name").decode("utf-8")
        rank = struct.unpack("<B", _read_exact(f, 1, "rank"))[0]
        dims = []
        for _d in range(rank):
            dims.append(struct.unpack("<I", _read_exact(f, 4, f"dims of {name}"))[0])
        size = int(np.prod(dims)) if dims else 1
        raw = _read_exact(f, size * 4, f"data of {name}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        params[name] = arr
    if expected_shapes is not None:
        for name, shape in expected_shapes.items():
            if name not in params:
                raise ShapeMismatch(f"missing tensor {name}")
            if tuple(params[name].shape) != tuple(shape):
                raise ShapeMismatch(
                    f"tensor {name}: expected shape {tuple(shape)}, found {tuple(params[name].shape)}"
                )
        extra = set(params) - set(expected_shapes)
        if extra:
            raise ShapeMismatch(f"unexpected tensor {sorted(extra)[0]}")
    return params


def expected_shapes(config):
    c = config
    return {
        "conv1_w": (c.conv1_filters, c.in_frames, c.conv1_kernel, c.conv1_kernel),
        "conv1_b": (c.conv1_filters,),
        "conv2_w": (c.conv2_filters, c.conv1_filters, c.conv2_kernel, c.conv2_kernel),
        "conv2_b": (c.conv2_filters,),
        "dense_w": (c.flat_dim, c.dense_units),
        "dense_b": (c.dense_units,),
        "policy_w": (c.dense_units, c.n_actions),
        "policy_b": (c.n_actions,),
        "value_w": (c.dense_units, 1),
        "value_b": (1,),
    }


def load_net(path, config=None):
    config = config if config is not None else NetConfig()
    params = load_weights(path, expected_shapes(config))
    params = {k: np.ascontiguousarray(v, dtype=config.dtype) for k, v in params.items()}
    return PolicyNet(config=config, params=params)


def seed_for_model(model_id, name):
    """Deterministic init seed derived from identity, stable across runs."""
    return zlib.crc32(f"{model_id}:{name}".encode("utf-8"))


@dataclass
class PolicyModel:
    net: PolicyNet
    model_id: str
    name: str
    trained_episodes: int = 0
    created_at: str = ""

    def meta(self):
        return {
            "modelId": self.model_id,
            "name": self.name,
            "trainedEpisodes": self.trained_episodes,
            "createdAt": self.created_at,
        }
