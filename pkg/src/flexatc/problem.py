"""Loss oracles, proximal terms, smoothness constants, and LIBSVM-format
dataset handling with uniform partitioning across agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_POWER_ITER_CAP = 100_000
_POWER_ITER_TOL = 1e-8


class ParseError(Exception):
    """Malformed LIBSVM input; message carries the offending line number."""


class ProblemError(Exception):
    pass


@dataclass(eq=False)
class Dataset:
    """Sparse binary-classification samples in CSR-style storage.

    Labels are strictly +1/-1; feature indices are 0-based and < d.
    """

    d: int
    labels: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.labels.size

    def sample(self, i: int) -> tuple[np.ndarray, np.ndarray, float]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi], float(self.labels[i])

    def dense(self) -> np.ndarray:
        x = np.zeros((len(self), self.d))
        for i in range(len(self)):
            idx, vals, _ = self.sample(i)
            x[i, idx] = vals
        return x

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        counts = self.indptr[rows + 1] - self.indptr[rows]
        indptr = np.zeros(rows.size + 1, dtype=int)
        np.cumsum(counts, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=int)
        values = np.empty(indptr[-1])
        for out_i, i in enumerate(rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            indices[indptr[out_i]:indptr[out_i + 1]] = self.indices[lo:hi]
            values[indptr[out_i]:indptr[out_i + 1]] = self.values[lo:hi]
        return Dataset(self.d, self.labels[rows].copy(), indptr, indices, values)

    def head(self, m: int) -> "Dataset":
        return self.subset(np.arange(min(m, len(self))))


def parse_libsvm(text: str | bytes, map_01_labels: bool = False) -> Dataset:
    """Parse "label idx:val idx:val ..." lines; 1-based indices become 0-based.

    Labels must be +1/-1; with map_01_labels, 0/1 files are accepted and 0 is
    mapped to -1. The dimension is the largest index seen.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii")
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    max_index = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad label {tokens[0]!r}") from exc
        if map_01_labels and label in (0.0, 1.0):
            label = -1.0 if label == 0.0 else 1.0
        if label not in (-1.0, 1.0):
            raise ParseError(f"line {lineno}: label {tokens[0]!r} is not +1/-1")
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"line {lineno}: malformed feature token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: malformed feature token {tok!r}") from exc
            if idx < 1:
                raise ParseError(f"line {lineno}: index {idx} is not 1-based")
            indices.append(idx - 1)
            values.append(val)
            max_index = max(max_index, idx - 1)
        labels.append(label)
        indptr.append(len(indices))
    return Dataset(
        d=max_index + 1,
        labels=np.asarray(labels),
        indptr=np.asarray(indptr, dtype=int),
        indices=np.asarray(indices, dtype=int),
        values=np.asarray(values),
    )


def serialize_libsvm(ds: Dataset) -> str:
    """Inverse of parse_libsvm; round-trips every value exactly."""
    lines = []
    for i in range(len(ds)):
        idx, vals, label = ds.sample(i)
        parts = ["+1" if label > 0 else "-1"]
        parts.extend(f"{j + 1}:{float(v)!r}" for j, v in zip(idx, vals))
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def normalize_features(ds: Dataset) -> Dataset:
    """Per-feature max-abs scaling (off by default everywhere)."""
    scale = np.ones(ds.d)
    for j, v in zip(ds.indices, ds.values):
        scale[j] = max(scale[j], abs(v))
    return Dataset(ds.d, ds.labels.copy(), ds.indptr.copy(), ds.indices.copy(),
                   ds.values / scale[ds.indices])


def partition(ds: Dataset, n: int, seed: int) -> list[Dataset]:
    """Seeded uniform shuffle split into n slices with sizes differing by <= 1."""
    m = len(ds)
    if n < 1:
        raise ProblemError("need at least one agent")
    if n > m:
        raise ProblemError(f"cannot split {m} samples across {n} agents")
    perm = np.random.default_rng(seed).permutation(m)
    return [ds.subset(chunk) for chunk in np.array_split(perm, n)]


@dataclass(eq=False)
class QuadraticLoss:
    """f(x) = 1/2 sum_j h_j (x_j - b_j)^2 with per-coordinate curvature h."""

    target: np.ndarray
    curvature: np.ndarray | None = None

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        if self.curvature is None:
            self.curvature = np.ones_like(self.target)
        else:
            self.curvature = np.asarray(self.curvature, dtype=float)
            if self.curvature.shape != self.target.shape:
                raise ProblemError("curvature and target shapes differ")
            if np.any(self.curvature <= 0.0):
                raise ProblemError("curvature entries must be positive")

    @property
    def d(self) -> int:
        return self.target.size

    def value(self, x: np.ndarray) -> float:
        diff = x - self.target
        return 0.5 * float(np.sum(self.curvature * diff * diff))

    def grad(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.target.shape:
            raise ProblemError(f"gradient point has shape {x.shape}, expected {self.target.shape}")
        return self.curvature * (x - self.target)

    def constants(self) -> tuple[float, float]:
        return float(np.max(self.curvature)), float(np.min(self.curvature))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(eq=False)
class LogisticLoss:
    """Mean logistic loss over a data slice plus an optional ridge term.

    f(x) = (1/m) sum_j ln(1 + exp(-y_j <X_j, x>)) + (ridge/2) ||x||^2
    """

    features: np.ndarray
    labels: np.ndarray
    ridge: float = 0.0
    _lmax_cache: float | None = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise ProblemError("features must be (m, d) matching m labels")
        if self.features.shape[0] == 0:
            raise ProblemError("logistic loss needs at least one sample")
        if self.ridge < 0.0:
            raise ProblemError("ridge must be nonnegative")

    @classmethod
    def from_dataset(cls, ds: Dataset, ridge: float = 0.0) -> "LogisticLoss":
        return cls(ds.dense(), ds.labels, ridge)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def m(self) -> int:
        return self.features.shape[0]

    def value(self, x: np.ndarray) -> float:
        margins = self.labels * (self.features @ x)
        loss = float(np.mean(np.logaddexp(0.0, -margins)))
        return loss + 0.5 * self.ridge * float(x @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.d,):
            raise ProblemError(f"gradient point has shape {x.shape}, expected ({self.d},)")
        margins = self.labels * (self.features @ x)
        # d/dx ln(1+e^{-t}) with t = y<X,x> gives -yX * sigmoid(-t)
        weights = self.labels * _sigmoid(-margins)
        return -(self.features.T @ weights) / self.m + self.ridge * x

    def constants(self) -> tuple[float, float]:
        if self._lmax_cache is None:
            gram = (self.features.T @ self.features) / (4.0 * self.m)
            self._lmax_cache = _power_iteration_lmax(gram)
        return self._lmax_cache + self.ridge, self.ridge


def _power_iteration_lmax(gram: np.ndarray, tol: float = _POWER_ITER_TOL) -> float:
    """Largest eigenvalue of a PSD matrix by plain power iteration."""
    d = gram.shape[0]
    v = np.random.default_rng(0).standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_POWER_ITER_CAP):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - lam) <= tol * max(norm, 1e-300):
            return norm
        lam = norm
    raise ProblemError("power iteration did not converge")


@dataclass(eq=False)
class ProxSpec:
    """Shared nonsmooth term: "none" or "l1" with a positive weight."""

    kind: str = "none"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "l1"):
            raise ProblemError(f"unknown prox kind {self.kind!r}")
        if self.kind == "l1" and not (np.isfinite(self.weight) and self.weight > 0.0):
            raise ProblemError(f"l1 weight must be positive and finite, got {self.weight}")

    def value(self, x: np.ndarray) -> float:
        if self.kind == "none":
            return 0.0
        return self.weight * float(np.sum(np.abs(x)))

    def apply(self, v: np.ndarray, alpha: float) -> np.ndarray:
        """prox_{alpha r}: identity for "none", soft threshold for "l1"."""
        if alpha <= 0.0:
            raise ProblemError(f"prox stepsize must be positive, got {alpha}")
        if self.kind == "none":
            return np.array(v, dtype=float)
        thresh = alpha * self.weight
        return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


@dataclass(eq=False)
class ProblemInstance:
    """n agent losses, a shared prox term, and the common (L, mu) constants."""

    losses: list
    prox: ProxSpec
    d: int
    L: float
    mu: float
    # stacked (n, d) targets/curvatures when every agent is quadratic; lets
    # long runs skip the per-agent Python loop
    _quad_targets: np.ndarray | None = field(default=None, repr=False)
    _quad_curvatures: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.losses and all(isinstance(l, QuadraticLoss) for l in self.losses):
            self._quad_targets = np.stack([l.target for l in self.losses])
            self._quad_curvatures = np.stack([l.curvature for l in self.losses])

    @property
    def n(self) -> int:
        return len(self.losses)

    def grad_stack(self, x: np.ndarray) -> np.ndarray:
        """Per-agent gradients of the stacked iterate, row i for agent i."""
        if self._quad_targets is not None:
            return self._quad_curvatures * (x - self._quad_targets)
        return np.stack([loss.grad(x[i]) for i, loss in enumerate(self.losses)])

    def mean_grad(self, point: np.ndarray) -> np.ndarray:
        if self._quad_targets is not None:
            return np.mean(self._quad_curvatures * (point[None, :] - self._quad_targets), axis=0)
        return sum(loss.grad(point) for loss in self.losses) / self.n

    def objective(self, point: np.ndarray) -> float:
        """Consensus objective (1/n) sum_i f_i(point) + r(point)."""
        if self._quad_targets is not None:
            diff = point[None, :] - self._quad_targets
            smooth = 0.5 * float(np.sum(self._quad_curvatures * diff * diff)) / self.n
            return smooth + self.prox.value(point)
        return sum(loss.value(point) for loss in self.losses) / self.n + self.prox.value(point)


def constants(losses) -> tuple[float, float]:
    """Common smoothness/strong-convexity pair: max of L_i, min of mu_i."""
    pairs = [loss.constants() for loss in losses]
    big_l = max(p[0] for p in pairs)
    small_mu = min(p[1] for p in pairs)
    if big_l <= 0.0:
        raise ProblemError("smoothness constant must be positive")
    return big_l, small_mu


def build_instance(losses, prox: ProxSpec) -> ProblemInstance:
    if not losses:
        raise ProblemError("need at least one agent loss")
    dims = {loss.d for loss in losses}
    if len(dims) != 1:
        raise ProblemError(f"agents disagree on dimension: {sorted(dims)}")
    big_l, small_mu = constants(losses)
    return ProblemInstance(list(losses), prox, dims.pop(), big_l, small_mu)


def quadratic_instance(
    n: int,
    d: int,
    seed: int,
    curvature_min: float = 1.0,
    curvature_max: float = 1.0,
    prox: ProxSpec | None = None,
    target_scale: float = 1.0,
    target_offset_scale: float = 0.0,
) -> ProblemInstance:
    """Synthetic quadratic agents with seeded random targets (client drift).

    All agents share a log-spaced curvature profile spanning
    [curvature_min, curvature_max], so kappa = curvature_max / curvature_min.
    A common random offset (target_offset_scale) shifts every target without
    changing the heterogeneity.
    """
    if not (0.0 < curvature_min <= curvature_max):
        raise ProblemError("need 0 < curvature_min <= curvature_max")
    rng = np.random.default_rng(seed)
    h = np.geomspace(curvature_min, curvature_max, d) if d > 1 else np.array([curvature_max])
    offset = target_offset_scale * rng.standard_normal(d)
    losses = [
        QuadraticLoss(offset + target_scale * rng.standard_normal(d), h.copy())
        for _ in range(n)
    ]
    return build_instance(losses, prox or ProxSpec())


def logistic_instance(
    ds: Dataset,
    n: int,
    partition_seed: int,
    ridge: float,
    prox: ProxSpec | None = None,
) -> ProblemInstance:
    slices = partition(ds, n, partition_seed)
    losses = [LogisticLoss.from_dataset(s, ridge) for s in slices]
    return build_instance(losses, prox or ProxSpec())
