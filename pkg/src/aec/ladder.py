"""Semi-supervised ladder network classifier.

Three coupled paths share one set of weights: a noisy encoder (Gaussian
noise injected at every layer) that drives training, a clean encoder that
provides denoising targets and the inference path, and a top-down decoder
with per-unit lateral combinators. The objective adds the labeled rows'
cross-entropy to per-layer weighted reconstruction costs, so unlabeled
rows shape the representation without touching the supervised term.

Labeled and unlabeled rows are batch-normalized as separate groups; adding
unlabeled rows therefore changes only the denoising costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ConvergenceError, DecodeError

BN_EPSILON = 1e-6
BN_MOMENTUM = 0.99
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
N_COMBINATOR_PARAMS = 10

LADDER_MAGIC = "AEC-LADDER v1"

DEFAULT_HIDDEN_DIMS = (2048, 1024, 256)


def default_layer_dims(input_dim: int, n_classes: int) -> tuple[int, ...]:
    """Input, the three standard hidden widths, then the class count."""
    return (input_dim, *DEFAULT_HIDDEN_DIMS, n_classes)


def default_denoise_costs(n_layers: int) -> tuple[float, ...]:
    """Largest weight at the input, tapering to 0.1 at upper layers."""
    pattern = [1000.0, 10.0] + [0.1] * max(0, n_layers - 2)
    return tuple(pattern[:n_layers])


@dataclass
class LadderConfig:
    """Architecture and training settings.

    layer_dims runs input -> hidden... -> classes; denoise_costs has one
    weight per entry of layer_dims (input layer first).
    """

    layer_dims: tuple[int, ...]
    noise_sigma: float = 0.2
    denoise_costs: tuple[float, ...] | None = None
    batch_size: int = 100
    epochs: int = 101
    learning_rate: float = 0.002
    seed: int = 0

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2 or any(d <= 0 for d in self.layer_dims):
            raise ValueError("layer_dims must be >= 2 positive integers")
        if self.denoise_costs is None:
            self.denoise_costs = default_denoise_costs(len(self.layer_dims))
        self.denoise_costs = tuple(float(c) for c in self.denoise_costs)
        if len(self.denoise_costs) != len(self.layer_dims):
            raise ValueError("need one denoising cost per layer (input first)")
        if any(c < 0 for c in self.denoise_costs):
            raise ValueError("denoising costs must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size, epochs must be >= 1 and learning_rate > 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class LadderBatch:
    """Feature rows for one update: labeled rows with classes, plus
    optional unlabeled rows."""

    labeled_x: np.ndarray
    labels: np.ndarray
    unlabeled_x: np.ndarray | None = None

    def __post_init__(self):
        lab = np.asarray(self.labeled_x, dtype=np.float64)
        unl = None if self.unlabeled_x is None else np.asarray(self.unlabeled_x, dtype=np.float64)
        dim = None
        for a in (lab, unl):
            if a is not None and a.size > 0:
                dim = a.shape[-1]
                break
        if dim is None:
            raise ValueError("batch needs at least one labeled or unlabeled row")
        self.labeled_x = lab.reshape(-1, dim) if lab.size else np.zeros((0, dim))
        self.unlabeled_x = (
            unl.reshape(-1, dim) if unl is not None and unl.size else np.zeros((0, dim))
        )
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.labels.size != self.labeled_x.shape[0]:
            raise ValueError("one label required per labeled row")

    @property
    def n_labeled(self) -> int:
        return self.labeled_x.shape[0]

    @property
    def n_unlabeled(self) -> int:
        return self.unlabeled_x.shape[0]


@dataclass
class LadderModel:
    """All learnable tensors plus the running statistics used at inference.

    Index convention: layer 0 is the input; weights[l], bn scale/shift and
    running stats exist for l in 1..L; decoder_weights[l] maps layer l+1
    down to l for l in 0..L-1; combinator[l] is a (10, dim_l) array for
    l in 0..L.
    """

    layer_dims: tuple[int, ...]
    noise_sigma: float
    denoise_costs: tuple[float, ...]
    weights: list  # weights[l]: (dim_l, dim_{l-1}); index 0 unused
    bn_scale: list  # gamma
    bn_shift: list  # beta
    decoder_weights: list  # decoder_weights[l]: (dim_l, dim_{l+1})
    combinator: list  # combinator[l]: (10, dim_l)
    running_mean: list
    running_var: list
    trained_steps: int = 0
    # raw EMA accumulators; running_mean/var hold the debiased estimates
    ema_mean: list | None = None
    ema_var: list | None = None
    ema_updates: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def parameters(self):
        """Yield (name, array) for every trainable tensor, in a fixed order."""
        L = self.n_layers
        for l in range(1, L + 1):
            yield f"W{l}", self.weights[l]
            yield f"gamma{l}", self.bn_scale[l]
            yield f"beta{l}", self.bn_shift[l]
        for l in range(L):
            yield f"V{l}", self.decoder_weights[l]
        for l in range(L + 1):
            yield f"comb{l}", self.combinator[l]

    def get_parameter(self, name: str) -> np.ndarray:
        for key, value in self.parameters():
            if key == name:
                return value
        raise KeyError(name)

    def update_running_stats(self, clean_stats: list) -> None:
        """Fold one clean pass's batch statistics into the inference
        statistics: momentum-0.99 average, zero-debiased so that early
        steps are not dragged toward the (0, 1) initialization."""
        if self.ema_mean is None:
            self.ema_mean = [None] + [np.zeros(d) for d in self.layer_dims[1:]]
            self.ema_var = [None] + [np.zeros(d) for d in self.layer_dims[1:]]
        self.ema_updates += 1
        debias = 1.0 - BN_MOMENTUM**self.ema_updates
        for l in range(1, self.n_layers + 1):
            mu, var = clean_stats[l]
            self.ema_mean[l] = BN_MOMENTUM * self.ema_mean[l] + (1 - BN_MOMENTUM) * mu
            self.ema_var[l] = BN_MOMENTUM * self.ema_var[l] + (1 - BN_MOMENTUM) * var
            self.running_mean[l] = self.ema_mean[l] / debias
            self.running_var[l] = self.ema_var[l] / debias


@dataclass
class LadderLoss:
    """Loss breakdown: total = supervised + sum(denoise_per_layer)."""

    total: float
    supervised: float
    denoise_per_layer: np.ndarray


def init_ladder(config: LadderConfig) -> LadderModel:
    """Fresh model: Gaussian fan-in-scaled weights, identity batch norm,
    combinators passing the top-down signal through (a4 = 1)."""
    rng = np.random.default_rng(config.seed)
    dims = config.layer_dims
    L = len(dims) - 1
    weights = [None] + [
        rng.normal(0.0, 1.0 / np.sqrt(dims[l - 1]), size=(dims[l], dims[l - 1]))
        for l in range(1, L + 1)
    ]
    decoder_weights = [
        rng.normal(0.0, 1.0 / np.sqrt(dims[l + 1]), size=(dims[l], dims[l + 1]))
        for l in range(L)
    ]
    combinator = []
    for l in range(L + 1):
        a = np.zeros((N_COMBINATOR_PARAMS, dims[l]))
        a[3] = 1.0  # mu(u) = u at init, v(u) = 0
        combinator.append(a)
    return LadderModel(
        layer_dims=dims,
        noise_sigma=config.noise_sigma,
        denoise_costs=config.denoise_costs,
        weights=weights,
        bn_scale=[None] + [np.ones(dims[l]) for l in range(1, L + 1)],
        bn_shift=[None] + [np.zeros(dims[l]) for l in range(1, L + 1)],
        decoder_weights=decoder_weights,
        combinator=combinator,
        running_mean=[None] + [np.zeros(dims[l]) for l in range(1, L + 1)],
        running_var=[None] + [np.ones(dims[l]) for l in range(1, L + 1)],
    )


def draw_noise(model: LadderModel, batch: LadderBatch, sigma: float, rng) -> dict:
    """One noise realization per group and layer (labeled drawn first)."""
    dims = model.layer_dims
    noise = {}
    for group, n in (("labeled", batch.n_labeled), ("unlabeled", batch.n_unlabeled)):
        noise[group] = [sigma * rng.standard_normal((n, d)) for d in dims]
    return noise


# ---------------------------------------------------------------------------
# Tape-based training graph
# ---------------------------------------------------------------------------


def _param_tensors(model: LadderModel) -> dict:
    """Wrap every trainable array as a tape tensor (combinator rows split)."""
    pt = {}
    for name, value in model.parameters():
        if name.startswith("comb"):
            pt[name] = [tape.Tensor(row) for row in value]
        else:
            pt[name] = tape.Tensor(value)
    return pt


def _collect_grads(model: LadderModel, pt: dict) -> dict:
    grads = {}
    for name, _ in model.parameters():
        entry = pt[name]
        if isinstance(entry, list):
            grads[name] = np.stack(
                [r.grad if r.grad is not None else np.zeros_like(r.data) for r in entry]
            )
        else:
            grads[name] = entry.grad if entry.grad is not None else np.zeros_like(entry.data)
    return grads


def _encode_group(pt, dims, x: np.ndarray, noise_per_layer):
    """Encoder pass on the tape; noise_per_layer=None gives the clean path.

    Returns (z list, stats list, logits): z[l] is the input for l=0 and
    the batch-normalized (plus noise, if any) pre-activation above; stats
    holds each layer's batch mean/variance tensors.
    """
    L = len(dims) - 1
    x_t = tape.Tensor(x)
    z0 = x_t if noise_per_layer is None else tape.add(x_t, noise_per_layer[0])
    z_list = [z0]
    stats = [None]
    h = z0
    logits = None
    for l in range(1, L + 1):
        z_pre = tape.linear(h, pt[f"W{l}"])
        z_norm, mu, var = tape.batch_normalize(z_pre, BN_EPSILON)
        if noise_per_layer is not None:
            z_norm = tape.add(z_norm, noise_per_layer[l])
        z_list.append(z_norm)
        stats.append((mu, var))
        act = tape.mul(pt[f"gamma{l}"], tape.add(z_norm, pt[f"beta{l}"]))
        h = tape.relu(act) if l < L else act
        if l == L:
            logits = act
    return z_list, stats, logits


def _combinator_apply(a_rows, z_tilde, u):
    """Per-unit vanilla combinator: zhat = (z~ - mu(u)) * v(u) + mu(u)."""
    a1, a2, a3, a4, a5, a6, a7, a8, a9, a10 = a_rows
    mu = tape.add(
        tape.add(tape.mul(a1, tape.sigmoid(tape.add(tape.mul(a2, u), a3))), tape.mul(a4, u)),
        a5,
    )
    v = tape.add(
        tape.add(tape.mul(a6, tape.sigmoid(tape.add(tape.mul(a7, u), a8))), tape.mul(a9, u)),
        a10,
    )
    return tape.add(tape.mul(tape.sub(z_tilde, mu), v), mu)


def _decode_group(pt, dims, noisy_z, noisy_logits, clean_z, clean_stats):
    """Top-down decoder; returns one mean squared reconstruction cost per
    layer (already divided by the row count, not yet weighted)."""
    L = len(dims) - 1
    n_rows = noisy_z[0].shape[0]
    costs = [None] * (L + 1)
    z_hat = None
    for l in range(L, -1, -1):
        if l == L:
            posterior = tape.exp(tape.log_softmax(noisy_logits))
            u = tape.batch_normalize(posterior, BN_EPSILON)[0]
        else:
            u = tape.batch_normalize(tape.linear(z_hat, pt[f"V{l}"]), BN_EPSILON)[0]
        z_hat = _combinator_apply(pt[f"comb{l}"], noisy_z[l], u)
        if l == 0:
            z_hat_bn = z_hat  # the input layer is not batch-normalized
        else:
            mu_c, var_c = clean_stats[l]
            z_hat_bn = tape.div(
                tape.sub(z_hat, mu_c), tape.sqrt(tape.add(var_c, BN_EPSILON))
            )
        diff = tape.sub(z_hat_bn, clean_z[l])
        costs[l] = tape.mul(tape.tsum(tape.mul(diff, diff)), 1.0 / n_rows)
    return costs


def _build_loss(model, batch, noise):
    """Assemble the full training objective on a fresh tape.

    Returns (total, supervised, per-layer weighted denoise tensors, param
    tensors, labeled clean stats as arrays for the running averages).
    """
    dims = model.layer_dims
    L = len(dims) - 1
    if batch.labeled_x.shape[1] != dims[0]:
        raise ValueError(
            f"batch rows are {batch.labeled_x.shape[1]}-dim, model expects {dims[0]}"
        )
    if batch.n_labeled and (batch.labels.min() < 0 or batch.labels.max() >= dims[-1]):
        raise ValueError(f"labels must lie in [0, {dims[-1]})")
    pt = _param_tensors(model)
    active_denoise = any(c > 0 for c in model.denoise_costs)

    supervised = None
    group_costs = []  # (row_count, per-layer cost tensors)
    labeled_stats = None
    for group, x in (("labeled", batch.labeled_x), ("unlabeled", batch.unlabeled_x)):
        if x.shape[0] == 0:
            continue
        clean_z, clean_stats, _ = _encode_group(pt, dims, x, None)
        noisy_z, _, noisy_logits = _encode_group(pt, dims, x, noise[group])
        if group == "labeled":
            supervised = tape.cross_entropy(noisy_logits, batch.labels)
            labeled_stats = [None] + [
                (clean_stats[l][0].data.copy(), clean_stats[l][1].data.copy())
                for l in range(1, L + 1)
            ]
        if active_denoise:
            costs = _decode_group(pt, dims, noisy_z, noisy_logits, clean_z, clean_stats)
            group_costs.append((x.shape[0], costs))

    n_total = batch.n_labeled + batch.n_unlabeled
    denoise_terms = []
    for l in range(L + 1):
        weight = model.denoise_costs[l] / dims[l]
        if weight == 0.0 or not group_costs:
            denoise_terms.append(tape.Tensor(0.0))
            continue
        pooled = None
        for n_rows, costs in group_costs:
            term = tape.mul(costs[l], n_rows / n_total)
            pooled = term if pooled is None else tape.add(pooled, term)
        denoise_terms.append(tape.mul(pooled, weight))

    total = supervised if supervised is not None else tape.Tensor(0.0)
    for term in denoise_terms:
        total = tape.add(total, term)
    return total, supervised, denoise_terms, pt, labeled_stats


def _breakdown(total, supervised, denoise_terms) -> LadderLoss:
    return LadderLoss(
        total=float(total.data),
        supervised=0.0 if supervised is None else float(supervised.data),
        denoise_per_layer=np.array([float(t.data) for t in denoise_terms]),
    )


def ladder_loss(
    model: LadderModel,
    batch: LadderBatch,
    sigma: float | None = None,
    rng=None,
    noise: dict | None = None,
) -> LadderLoss:
    """Evaluate the objective; noise is drawn from rng unless supplied."""
    sigma = model.noise_sigma if sigma is None else sigma
    if noise is None:
        noise = draw_noise(model, batch, sigma, rng or np.random.default_rng())
    total, supervised, denoise_terms, _, _ = _build_loss(model, batch, noise)
    return _breakdown(total, supervised, denoise_terms)


def ladder_loss_and_grad(
    model: LadderModel,
    batch: LadderBatch,
    sigma: float | None = None,
    rng=None,
    noise: dict | None = None,
):
    """Objective plus its gradient for every trainable parameter.

    Returns (LadderLoss, grads by parameter name, labeled-group clean batch
    statistics for the running averages, or None without labeled rows).
    """
    sigma = model.noise_sigma if sigma is None else sigma
    if noise is None:
        noise = draw_noise(model, batch, sigma, rng or np.random.default_rng())
    total, supervised, denoise_terms, pt, labeled_stats = _build_loss(model, batch, noise)
    total.backward()
    return _breakdown(total, supervised, denoise_terms), _collect_grads(model, pt), labeled_stats


# ---------------------------------------------------------------------------
# Forward passes outside the tape
# ---------------------------------------------------------------------------


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def ladder_forward(
    model: LadderModel,
    batch_x: np.ndarray,
    sigma: float = 0.0,
    rng=None,
    noise: list | None = None,
) -> tuple[list[dict], np.ndarray]:
    """One encoder pass with batch statistics, recording every layer.

    Returns (records, posteriors): records[l] holds z_pre, z (normalized),
    z_tilde (after noise) and h (activated) for layer l. sigma=0 makes
    z_tilde identical to z.
    """
    x = np.atleast_2d(np.asarray(batch_x, dtype=np.float64))
    dims = model.layer_dims
    if x.shape[1] != dims[0]:
        raise ValueError(f"input rows are {x.shape[1]}-dim, model expects {dims[0]}")
    L = model.n_layers
    if noise is None:
        gen = rng or np.random.default_rng()
        noise = [sigma * gen.standard_normal((x.shape[0], d)) for d in dims]
    z_tilde = x + noise[0]
    records = [{"z_pre": x, "z": x, "z_tilde": z_tilde, "h": z_tilde}]
    h = z_tilde
    for l in range(1, L + 1):
        z_pre = h @ model.weights[l].T
        z = (z_pre - z_pre.mean(axis=0)) / np.sqrt(z_pre.var(axis=0) + BN_EPSILON)
        z_tilde = z + noise[l]
        act = model.bn_scale[l] * (z_tilde + model.bn_shift[l])
        h = np.maximum(act, 0.0) if l < L else _softmax_rows(act)
        if not np.isfinite(h).all():
            raise ConvergenceError(f"non-finite activations at layer {l}")
        records.append({"z_pre": z_pre, "z": z, "z_tilde": z_tilde, "h": h})
    return records, records[-1]["h"]


def predict_ladder(model: LadderModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clean-path inference with the stored running statistics.

    Returns (class indices, posteriors); argmax ties go to the lower index.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    dims = model.layer_dims
    if x.shape[1] != dims[0]:
        raise ValueError(f"input rows are {x.shape[1]}-dim, model expects {dims[0]}")
    h = x
    L = model.n_layers
    for l in range(1, L + 1):
        z_pre = h @ model.weights[l].T
        z = (z_pre - model.running_mean[l]) / np.sqrt(model.running_var[l] + BN_EPSILON)
        act = model.bn_scale[l] * (z + model.bn_shift[l])
        h = np.maximum(act, 0.0) if l < L else act
    posteriors = _softmax_rows(h)
    return posteriors.argmax(axis=1), posteriors


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class _Cycler:
    """Endless shuffled index stream over n items."""

    def __init__(self, n: int, rng):
        self.n = n
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            grab = min(count - filled, self.n - self.pos)
            out[filled : filled + grab] = self.order[self.pos : self.pos + grab]
            self.pos += grab
            filled += grab
        return out


def _learning_rate(config: LadderConfig, epoch: int) -> float:
    """Constant, then linear decay to zero over the final half of training."""
    decay_epochs = config.epochs // 2
    if decay_epochs == 0:
        return config.learning_rate
    decay_start = config.epochs - decay_epochs
    if epoch < decay_start:
        return config.learning_rate
    return config.learning_rate * (config.epochs - epoch) / decay_epochs


def train_ladder(
    config: LadderConfig,
    data: LadderBatch,
    valid: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[LadderModel, list[dict]]:
    """Mini-batch Adam on the ladder objective.

    Labeled rows drive the epoch length; each step co-batches an equal
    count of unlabeled rows when any are present. Running batch-norm
    statistics follow the labeled group's clean pass with momentum 0.99.
    Raises ConvergenceError when the loss goes non-finite.
    """
    if data.n_labeled < 1:
        raise ValueError("training needs at least one labeled example")
    model = init_ladder(config)
    rng = np.random.default_rng([config.seed, 1])
    adam_m = {name: np.zeros_like(value) for name, value in model.parameters()}
    adam_v = {name: np.zeros_like(value) for name, value in model.parameters()}
    params = dict(model.parameters())
    step = 0

    labeled_pool = _Cycler(data.n_labeled, rng)
    unlabeled_pool = _Cycler(data.n_unlabeled, rng) if data.n_unlabeled else None
    steps_per_epoch = max(1, data.n_labeled // config.batch_size)

    history = []
    for epoch in range(config.epochs):
        lr = _learning_rate(config, epoch)
        epoch_losses = []
        for _ in range(steps_per_epoch):
            if data.n_labeled >= config.batch_size:
                lab_idx = labeled_pool.take(config.batch_size)
            else:
                lab_idx = rng.choice(data.n_labeled, size=config.batch_size, replace=True)
            unl_idx = (
                unlabeled_pool.take(config.batch_size)
                if unlabeled_pool is not None
                else None
            )
            batch = LadderBatch(
                labeled_x=data.labeled_x[lab_idx],
                labels=data.labels[lab_idx],
                unlabeled_x=None if unl_idx is None else data.unlabeled_x[unl_idx],
            )
            noise = draw_noise(model, batch, config.noise_sigma, rng)
            loss, grads, clean_stats = ladder_loss_and_grad(
                model, batch, config.noise_sigma, noise=noise
            )
            if not np.isfinite(loss.total):
                raise ConvergenceError(
                    f"training diverged at epoch {epoch}", epoch=epoch
                )
            step += 1
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for name, value in params.items():
                g = grads[name]
                adam_m[name] = ADAM_BETA1 * adam_m[name] + (1 - ADAM_BETA1) * g
                adam_v[name] = ADAM_BETA2 * adam_v[name] + (1 - ADAM_BETA2) * g * g
                value -= lr * (adam_m[name] / bc1) / (
                    np.sqrt(adam_v[name] / bc2) + ADAM_EPSILON
                )
            if clean_stats is not None:
                model.update_running_stats(clean_stats)
            epoch_losses.append(loss)
        entry = {
            "epoch": epoch,
            "total": float(np.mean([e.total for e in epoch_losses])),
            "supervised": float(np.mean([e.supervised for e in epoch_losses])),
            "denoise": float(
                np.mean([e.denoise_per_layer.sum() for e in epoch_losses])
            ),
        }
        if valid is not None:
            pred, _ = predict_ladder(model, valid[0])
            entry["valid_accuracy"] = float((pred == np.asarray(valid[1])).mean())
        history.append(entry)
    model.trained_steps = step
    return model, history


# ---------------------------------------------------------------------------
# Serialization (AEC-LADDER v1)
# ---------------------------------------------------------------------------


def _tensor_order(model: LadderModel):
    L = model.n_layers
    for name, value in model.parameters():
        yield name, value
    for l in range(1, L + 1):
        yield f"running_mean{l}", model.running_mean[l]
        yield f"running_var{l}", model.running_var[l]


def save_ladder(path, model: LadderModel) -> None:
    with open(path, "wb") as fh:
        fh.write(f"{LADDER_MAGIC}\n".encode())
        fh.write(("dims: " + " ".join(map(str, model.layer_dims)) + "\n").encode())
        fh.write(f"sigma: {model.noise_sigma!r}\n".encode())
        fh.write(
            ("lambdas: " + " ".join(repr(c) for c in model.denoise_costs) + "\n").encode()
        )
        fh.write(f"steps: {model.trained_steps}\n".encode())
        for _, value in _tensor_order(model):
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_ladder(path) -> LadderModel:
    with open(path, "rb") as fh:
        if fh.readline().strip().decode() != LADDER_MAGIC:
            raise DecodeError(f"{path} is not an {LADDER_MAGIC} file")
        try:
            dims = tuple(int(v) for v in fh.readline().decode().split(":", 1)[1].split())
            sigma = float(fh.readline().decode().split(":", 1)[1])
            lambdas = tuple(
                float(v) for v in fh.readline().decode().split(":", 1)[1].split()
            )
            steps = int(fh.readline().decode().split(":", 1)[1])
        except (IndexError, ValueError) as exc:
            raise DecodeError(f"bad AEC-LADDER header in {path}") from exc
        config = LadderConfig(layer_dims=dims, noise_sigma=sigma, denoise_costs=lambdas)
        model = init_ladder(config)
        model.trained_steps = steps
        for name, value in _tensor_order(model):
            blob = fh.read(value.size * 8)
            if len(blob) != value.size * 8:
                raise DecodeError(f"truncated tensor {name} in {path}")
            loaded = np.frombuffer(blob, dtype="<f8").reshape(value.shape).copy()
            value[...] = loaded
        if fh.read(1):
            raise DecodeError(f"trailing bytes after tensors in {path}")
    return model
