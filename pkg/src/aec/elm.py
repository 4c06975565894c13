"""Extreme learning machines: kernel variant and random-hidden-layer
variant, both with ridge-regularized closed-form output weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConvergenceError, DecodeError

ELM_MAGIC = "AEC-ELM v1"

KERNEL_KINDS = ("linear", "polynomial", "rbf")


@dataclass
class KernelSpec:
    """Kernel family and its parameters; gamma=None means 1/d at fit time."""

    kind: str = "linear"
    gamma: float | None = None
    degree: int = 2
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    def resolved(self, d: int) -> "KernelSpec":
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec(self.kind, 1.0 / d, self.degree, self.coef0)
        return self


def eval_kernel(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Kernel value between two vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("kernel arguments must be vectors of equal dimension")
    return float(kernel_matrix(x[None, :], y[None, :], spec)[0, 0])


def kernel_matrix(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gram matrix k(x_i, y_j) for row matrices x (n x d) and y (m x d)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"dimension mismatch: {x.shape[1]}-dim rows against {y.shape[1]}-dim"
        )
    spec = spec.resolved(x.shape[1])
    inner = x @ y.T
    if spec.kind == "linear":
        return inner
    if spec.kind == "polynomial":
        return (inner + spec.coef0) ** spec.degree
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * inner
    )
    return np.exp(-spec.gamma * np.clip(sq, 0.0, None))


def one_hot_targets(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size == 0:
        raise ValueError("need at least one training example")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    t = np.zeros((labels.size, n_classes))
    t[np.arange(labels.size), labels] = 1.0
    return t


@dataclass
class ElmModel:
    """Either variant behind one predict surface.

    kernel variant: stored training inputs and dual weights alpha;
    random variant: input map (A, b) with sigmoid units and output
    weights beta.
    """

    variant: str  # "kernel" | "random"
    n_classes: int
    C: float
    spec: KernelSpec | None = None
    train_x: np.ndarray | None = None
    alpha: np.ndarray | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    beta: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.train_x.shape[1] if self.variant == "kernel" else self.A.shape[1]


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        return cho_solve(cho_factor(matrix, lower=True), rhs)
    except (LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"{what} factorization failed: {exc}") from exc


def train_kernel_elm(
    X: np.ndarray,
    labels: np.ndarray,
    spec: KernelSpec,
    C: float = 100.0,
    n_classes: int | None = None,
) -> ElmModel:
    """Solve (K + I/C) alpha = T for one-hot targets T."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    spec = spec.resolved(X.shape[1])
    if C <= 0:
        raise ValueError("regularization C must be positive")
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1
    targets = one_hot_targets(labels, n_classes)
    if targets.shape[0] != X.shape[0]:
        raise ValueError("one label required per training row")
    gram = kernel_matrix(X, X, spec)
    if not np.isfinite(gram).all():
        raise ConvergenceError("kernel matrix contains non-finite values")
    alpha = _solve_spd(gram + np.eye(X.shape[0]) / C, targets, "kernel ELM")
    return ElmModel(
        variant="kernel", n_classes=n_classes, C=C, spec=spec, train_x=X, alpha=alpha
    )


def train_random_elm(
    X: np.ndarray,
    labels: np.ndarray,
    hidden_multiplier: int = 10,
    C: float = 100.0,
    seed: int = 0,
    n_classes: int | None = None,
) -> ElmModel:
    """Random sigmoid hidden layer of 10x the input dimension by default,
    ridge solve for the output weights."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if hidden_multiplier < 1:
        raise ValueError("hidden multiplier must be >= 1")
    if C <= 0:
        raise ValueError("regularization C must be positive")
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1
    targets = one_hot_targets(labels, n_classes)
    if targets.shape[0] != X.shape[0]:
        raise ValueError("one label required per training row")
    n, d = X.shape
    L = hidden_multiplier * d
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(L, d))
    b = rng.uniform(-1.0, 1.0, size=L)
    H = _sigmoid(X @ A.T + b)
    # ridge duality: solve whichever Gram system is smaller
    if L <= n:
        beta = _solve_spd(H.T @ H + np.eye(L) / C, H.T @ targets, "random ELM")
    else:
        beta = H.T @ _solve_spd(H @ H.T + np.eye(n) / C, targets, "random ELM")
    return ElmModel(variant="random", n_classes=n_classes, C=C, A=A, b=b, beta=beta)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def predict_elm(model: ElmModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices (argmax, ties to the lower index) and raw scores."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"dimension mismatch: rows are {x.shape[1]}-dim, model expects {model.input_dim}"
        )
    if model.variant == "kernel":
        scores = kernel_matrix(x, model.train_x, model.spec) @ model.alpha
    else:
        scores = _sigmoid(x @ model.A.T + model.b) @ model.beta
    return scores.argmax(axis=1), scores


# ---------------------------------------------------------------------------
# Serialization (AEC-ELM v1)
# ---------------------------------------------------------------------------


def save_elm(path, model: ElmModel) -> None:
    with open(path, "wb") as fh:
        fh.write(f"{ELM_MAGIC}\n".encode())
        fh.write(f"variant: {model.variant}\n".encode())
        fh.write(f"classes: {model.n_classes}\n".encode())
        fh.write(f"C: {model.C!r}\n".encode())
        if model.variant == "kernel":
            s = model.spec
            fh.write(
                f"kernel: {s.kind} gamma={s.gamma!r} degree={s.degree} coef0={s.coef0!r}\n".encode()
            )
            fh.write(f"shape: {model.train_x.shape[0]} {model.train_x.shape[1]}\n".encode())
            tensors = (model.train_x, model.alpha)
        else:
            fh.write(f"shape: {model.A.shape[0]} {model.A.shape[1]}\n".encode())
            tensors = (model.A, model.b, model.beta)
        for value in tensors:
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def _read_tensor(fh, shape, name, path) -> np.ndarray:
    count = int(np.prod(shape))
    blob = fh.read(count * 8)
    if len(blob) != count * 8:
        raise DecodeError(f"truncated tensor {name} in {path}")
    return np.frombuffer(blob, dtype="<f8").reshape(shape).copy()


def load_elm(path) -> ElmModel:
    with open(path, "rb") as fh:
        if fh.readline().strip().decode() != ELM_MAGIC:
            raise DecodeError(f"{path} is not an {ELM_MAGIC} file")
        try:
            variant = fh.readline().decode().split(":", 1)[1].strip()
            n_classes = int(fh.readline().decode().split(":", 1)[1])
            C = float(fh.readline().decode().split(":", 1)[1])
            if variant == "kernel":
                parts = fh.readline().decode().split(":", 1)[1].split()
                kv = dict(p.split("=", 1) for p in parts[1:])
                spec = KernelSpec(
                    kind=parts[0],
                    gamma=None if kv["gamma"] == "None" else float(kv["gamma"]),
                    degree=int(kv["degree"]),
                    coef0=float(kv["coef0"]),
                )
                n, d = (int(v) for v in fh.readline().decode().split(":", 1)[1].split())
                train_x = _read_tensor(fh, (n, d), "train_x", path)
                alpha = _read_tensor(fh, (n, n_classes), "alpha", path)
                return ElmModel(
                    variant="kernel", n_classes=n_classes, C=C, spec=spec,
                    train_x=train_x, alpha=alpha,
                )
            if variant == "random":
                L, d = (int(v) for v in fh.readline().decode().split(":", 1)[1].split())
                A = _read_tensor(fh, (L, d), "A", path)
                b = _read_tensor(fh, (L,), "b", path)
                beta = _read_tensor(fh, (L, n_classes), "beta", path)
                return ElmModel(
                    variant="random", n_classes=n_classes, C=C, A=A, b=b, beta=beta
                )
        except (IndexError, ValueError, KeyError) as exc:
            raise DecodeError(f"bad AEC-ELM header in {path}") from exc
    raise DecodeError(f"unknown ELM variant in {path}")
