"""One-vs-all kernel SVM trained by sequential minimal optimization.

The binary solver works on the soft-margin dual
    min 1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a <= C,   Q_ij = y_i y_j k(x_i, x_j)
using pairwise updates with second-order working-set selection, stopping
when the maximal KKT violation falls below tol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elm import KernelSpec, kernel_matrix
from .errors import ConvergenceError, DecodeError

SVM_MAGIC = "AEC-SVM v1"

_TAU = 1e-12


@dataclass
class BinarySvm:
    """One trained binary machine: support-vector expansion plus bias."""

    support_vectors: np.ndarray  # (n_sv, d)
    coef: np.ndarray  # alpha_i * y_i per support vector
    bias: float
    kernel: KernelSpec
    C: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return kernel_matrix(x, self.support_vectors, self.kernel) @ self.coef + self.bias


@dataclass
class SvmModel:
    """One binary machine per class, shared kernel family."""

    machines: list[BinarySvm]
    n_classes: int

    @property
    def input_dim(self) -> int:
        return self.machines[0].support_vectors.shape[1]


def train_binary_svm(
    X: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec | None = None,
    C: float = 10.0,
    tol: float = 1e-3,
    max_updates: int = 1_000_000,
    callback=None,
) -> BinarySvm:
    """SMO solve of the binary soft-margin dual.

    y holds +/-1 labels and both classes must be present. callback, when
    given, receives the dual objective after every accepted pair update.
    Raises ConvergenceError with the remaining KKT violation if the update
    cap runs out.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != X.shape[0]:
        raise ValueError("one label required per training row")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("labels must be +1 or -1")
    if (y > 0).all() or (y < 0).all():
        raise ValueError("both classes must be present")
    if C <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    kernel = (kernel or KernelSpec("linear")).resolved(X.shape[1])

    K = kernel_matrix(X, X, kernel)
    Q = (y[:, None] * y[None, :]) * K
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0

    updates = 0
    while True:
        yg = -y * grad
        up_mask = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low_mask = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        m_val = yg[up_mask].max()
        M_val = yg[low_mask].min()
        if m_val - M_val <= tol:
            break
        if updates >= max_updates:
            raise ConvergenceError(
                f"SMO hit the {max_updates}-update cap "
                f"(KKT violation {m_val - M_val:.3e} > tol {tol:.1e})",
                residual=m_val - M_val,
            )
        i = int(np.flatnonzero(up_mask)[np.argmax(yg[up_mask])])

        # second-order selection of the partner index
        cand = low_mask & (yg < yg[i])
        b_vals = yg[i] - yg[cand]
        a_vals = np.maximum(K[i, i] + np.diag(K)[cand] - 2.0 * K[i, cand], _TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b_vals * b_vals) / a_vals)])

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q[i, i] + Q[j, j] + 2.0 * Q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2.0 * Q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C and ai > C:
                ai, aj = C, total - C
            elif total <= C and aj < 0:
                aj, ai = 0.0, total
            if total > C and aj > C:
                aj, ai = C, total - C
            elif total <= C and ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)
        updates += 1
        if callback is not None:
            callback(alpha.sum() - 0.5 * float(alpha @ Q @ alpha))

    bias = 0.5 * (m_val + M_val)
    sv = alpha > 1e-12
    return BinarySvm(
        support_vectors=X[sv],
        coef=alpha[sv] * y[sv],
        bias=float(bias),
        kernel=kernel,
        C=C,
    )


def dual_objective(machine_alpha: np.ndarray, Q: np.ndarray) -> float:
    """Value of the maximization form of the dual at the given alpha."""
    return float(machine_alpha.sum() - 0.5 * machine_alpha @ Q @ machine_alpha)


def train_ova_svm(
    X: np.ndarray,
    labels: np.ndarray,
    kernel: KernelSpec | None = None,
    C: float = 10.0,
    tol: float = 1e-3,
    n_classes: int | None = None,
) -> SvmModel:
    """One binary machine per class (that class +1, the rest -1)."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    machines = []
    for c in range(n_classes):
        y = np.where(labels == c, 1.0, -1.0)
        if not (y > 0).any():
            raise ValueError(f"class {c} absent from the training data")
        try:
            machines.append(train_binary_svm(X, y, kernel, C, tol))
        except (ValueError, ConvergenceError) as exc:
            raise type(exc)(f"class {c}: {exc}") from exc
    return SvmModel(machines=machines, n_classes=n_classes)


def predict_svm(model: SvmModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices (argmax of the per-class decision values, ties to the
    lower index) and the decision-value matrix."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"dimension mismatch: rows are {x.shape[1]}-dim, model expects {model.input_dim}"
        )
    decisions = np.column_stack([m.decision(x) for m in model.machines])
    return decisions.argmax(axis=1), decisions


# ---------------------------------------------------------------------------
# Serialization (AEC-SVM v1)
# ---------------------------------------------------------------------------


def save_svm(path, model: SvmModel) -> None:
    k = model.machines[0].kernel
    with open(path, "wb") as fh:
        fh.write(f"{SVM_MAGIC}\n".encode())
        fh.write(f"classes: {model.n_classes}\n".encode())
        fh.write(
            f"kernel: {k.kind} gamma={k.gamma!r} degree={k.degree} coef0={k.coef0!r}\n".encode()
        )
        for m in model.machines:
            fh.write(
                f"machine: n_sv={m.coef.size} dim={m.support_vectors.shape[1]} "
                f"bias={m.bias!r} C={m.C!r}\n".encode()
            )
            fh.write(np.ascontiguousarray(m.support_vectors, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(m.coef, dtype="<f8").tobytes())


def load_svm(path) -> SvmModel:
    with open(path, "rb") as fh:
        if fh.readline().strip().decode() != SVM_MAGIC:
            raise DecodeError(f"{path} is not an {SVM_MAGIC} file")
        try:
            n_classes = int(fh.readline().decode().split(":", 1)[1])
            parts = fh.readline().decode().split(":", 1)[1].split()
            kv = dict(p.split("=", 1) for p in parts[1:])
            kernel = KernelSpec(
                kind=parts[0],
                gamma=None if kv["gamma"] == "None" else float(kv["gamma"]),
                degree=int(kv["degree"]),
                coef0=float(kv["coef0"]),
            )
            machines = []
            for _ in range(n_classes):
                head = dict(
                    p.split("=", 1)
                    for p in fh.readline().decode().split(":", 1)[1].split()
                )
                n_sv, dim = int(head["n_sv"]), int(head["dim"])
                blob = fh.read(n_sv * dim * 8)
                sv = np.frombuffer(blob, dtype="<f8").reshape(n_sv, dim).copy()
                blob = fh.read(n_sv * 8)
                coef = np.frombuffer(blob, dtype="<f8").copy()
                if coef.size != n_sv:
                    raise DecodeError(f"truncated machine in {path}")
                machines.append(
                    BinarySvm(
                        support_vectors=sv,
                        coef=coef,
                        bias=float(head["bias"]),
                        kernel=kernel,
                        C=float(head["C"]),
                    )
                )
        except (IndexError, ValueError, KeyError) as exc:
            raise DecodeError(f"bad AEC-SVM file {path}") from exc
    return SvmModel(machines=machines, n_classes=n_classes)
