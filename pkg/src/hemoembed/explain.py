"""Explainable window features and cluster-label classifiers under per-subject CV."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .training import Adam

STAT_NAMES = ("mean", "median", "std", "p2.5", "p97.5", "range95")
NUM_POWER_BINS = 10
FEATURES_PER_CHANNEL = len(STAT_NAMES) + NUM_POWER_BINS


class SingleClassWarning(UserWarning):
    pass


def feature_names(channels: Sequence[str]) -> list[str]:
    names = []
    for ch in channels:
        names.extend(f"{ch}.{s}" for s in STAT_NAMES)
        names.extend(f"{ch}.power{b}" for b in range(NUM_POWER_BINS))
    return names


def binned_max_power(x: np.ndarray, bins: int = NUM_POWER_BINS) -> np.ndarray:
    """Max DFT power of the mean-removed signal in equal-width bins over [0, Nyquist]."""
    x = np.asarray(x, dtype=np.float64)
    power = np.abs(np.fft.rfft(x - x.mean())) ** 2
    # bin of frequency k/n over [0, 0.5] is floor(2 * bins * k / n); integer math keeps edges exact
    k = np.arange(len(power))
    which = np.minimum(2 * bins * k // len(x), bins - 1)
    out = np.zeros(bins)
    np.maximum.at(out, which, power)
    return out


def extract_features(window) -> np.ndarray:
    """16 features per channel: six summary statistics then ten spectral bins.

    Accepts a :class:`~hemoembed.signals.Window` or a ``[channels, T]`` array.
    """
    values = np.asarray(getattr(window, "values", window), dtype=np.float64)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[1] < 2:
        raise ValueError("feature extraction needs windows of length >= 2")
    out = []
    for x in values:
        lo, hi = np.percentile(x, [2.5, 97.5])  # linear interpolation
        out.extend([x.mean(), np.median(x), x.std(), lo, hi, hi - lo])
        out.extend(binned_max_power(x))
    return np.array(out)


def feature_matrix(windows) -> np.ndarray:
    return np.vstack([extract_features(w) for w in windows])


# --- random forest -------------------------------------------------------------------


@dataclass
class ForestConfig:
    num_trees: int = 100
    max_depth: int | None = 12
    min_leaf: int = 2
    seed: int = 0
    threads: int = 1


class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict(self, X) -> np.ndarray:
        return np.full(len(X), self.label)


class ForestModel:
    """Bootstrap Gini trees on sqrt(F) features per split; hard majority vote."""

    def __init__(self, forest: RandomForestClassifier):
        self.forest = forest

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        classes = self.forest.classes_
        votes = np.zeros((len(X), len(classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.forest.estimators_:
            votes[rows, tree.predict(X).astype(np.int64)] += 1
        return classes[np.argmax(votes, axis=1)]  # ties: lowest label


def train_random_forest(features, labels, cfg: ForestConfig | None = None):
    cfg = cfg or ForestConfig()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    classes = np.unique(y)
    if len(classes) < 2:
        warnings.warn("only one class present; using a constant model", SingleClassWarning, stacklevel=2)
        return ConstantModel(classes[0])
    forest = RandomForestClassifier(
        n_estimators=cfg.num_trees,
        criterion="gini",
        max_depth=cfg.max_depth,
        min_samples_leaf=cfg.min_leaf,
        max_features="sqrt",
        bootstrap=True,
        random_state=cfg.seed,
        n_jobs=cfg.threads,
    )
    forest.fit(X, y)
    return ForestModel(forest)


# --- two-layer network -----------------------------------------------------------------


@dataclass
class MLPConfig:
    hidden_units: int = 64
    lr: float = 1e-2
    epochs: int = 300
    seed: int = 0
    zero_output_init: bool = True


@dataclass
class MLPParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_forward(p: MLPParams, X: np.ndarray) -> np.ndarray:
    """Class probabilities: input -> ReLU hidden -> softmax."""
    return _softmax(np.maximum(X @ p.W1 + p.b1, 0.0) @ p.W2 + p.b2)


def mlp_loss_and_grads(p: MLPParams, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradients; ``y`` holds class indices."""
    n = len(X)
    pre = X @ p.W1 + p.b1
    h = np.maximum(pre, 0.0)
    logits = h @ p.W2 + p.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logz - shifted[np.arange(n), y]))
    dlogits = _softmax(logits)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dh = dlogits @ p.W2.T
    dpre = dh * (pre > 0)
    grads = {"W1": X.T @ dpre, "b1": dpre.sum(axis=0), "W2": h.T @ dlogits, "b2": dlogits.sum(axis=0)}
    return loss, grads


class MLPModel:
    def __init__(self, params: MLPParams, classes: np.ndarray, mean: np.ndarray, scale: np.ndarray, losses):
        self.params = params
        self.classes = classes
        self.mean = mean
        self.scale = scale
        self.losses = losses

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def predict_proba(self, X) -> np.ndarray:
        return mlp_forward(self.params, self.standardize(X))

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]


def init_mlp(num_features: int, num_classes: int, cfg: MLPConfig) -> MLPParams:
    rng = np.random.default_rng(cfg.seed)
    bound = np.sqrt(6.0 / num_features)
    W1 = rng.uniform(-bound, bound, size=(num_features, cfg.hidden_units))
    if cfg.zero_output_init:
        W2 = np.zeros((cfg.hidden_units, num_classes))
    else:
        b2 = np.sqrt(1.0 / cfg.hidden_units)
        W2 = rng.uniform(-b2, b2, size=(cfg.hidden_units, num_classes))
    return MLPParams(W1, np.zeros(cfg.hidden_units), W2, np.zeros(num_classes))


def train_mlp(features, labels, cfg: MLPConfig | None = None):
    """Full-batch Adam on mean cross-entropy; features standardized with training statistics."""
    cfg = cfg or MLPConfig()
    X = np.asarray(features, dtype=np.float64)
    y_raw = np.asarray(labels)
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    classes, y = np.unique(y_raw, return_inverse=True)
    if len(classes) < 2:
        warnings.warn("only one class present; using a constant model", SingleClassWarning, stacklevel=2)
        return ConstantModel(classes[0])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    p = init_mlp(X.shape[1], len(classes), cfg)
    opt = Adam(cfg.lr)
    arrays = p.arrays()
    losses = []
    for epoch in range(cfg.epochs):
        loss, grads = mlp_loss_and_grads(p, Xs, y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite MLP loss at epoch {epoch}")
        losses.append(loss)
        opt.step(arrays, grads)
    return MLPModel(p, classes, mean, scale, losses)


# --- per-subject cross validation ------------------------------------------------------------


@dataclass
class CVReport:
    subjects: list[str]
    subject_accuracy: dict[str, float]
    fold_accuracy: list[float]
    folds: list[list[str]]  # test subjects per fold
    confusion: np.ndarray  # rows true label, columns predicted
    labels: list[int] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean([self.subject_accuracy[s] for s in self.subjects]))

    @property
    def std(self) -> float:
        """Population std of per-subject accuracies."""
        return float(np.std([self.subject_accuracy[s] for s in self.subjects]))


def subject_folds(subjects: Sequence[str], num_folds: int) -> list[list[str]]:
    """Split subjects (in order of first appearance) into ``num_folds`` test groups.

    Fold 1 holds out the last group, so with 16 subjects and 4 folds fold 1
    trains on subjects 1-12.
    """
    uniq = list(dict.fromkeys(subjects))
    if not 1 <= num_folds <= len(uniq):
        raise ValueError(f"cannot make {num_folds} folds from {len(uniq)} subjects")
    groups = [list(g) for g in np.array_split(np.array(uniq, dtype=object), num_folds)]
    return groups[::-1]


FitPredict = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _fit_predict(model: str, forest_cfg: ForestConfig | None, mlp_cfg: MLPConfig | None) -> FitPredict:
    if model == "rf":
        return lambda Xtr, ytr, Xte: train_random_forest(Xtr, ytr, forest_cfg).predict(Xte)
    if model == "mlp":
        return lambda Xtr, ytr, Xte: train_mlp(Xtr, ytr, mlp_cfg).predict(Xte)
    raise ValueError(f"unknown model {model!r}")


def per_subject_cv(
    features,
    labels,
    subjects: Sequence[str],
    num_folds: int,
    model: str | FitPredict = "rf",
    forest_cfg: ForestConfig | None = None,
    mlp_cfg: MLPConfig | None = None,
    num_classes: int | None = None,
) -> CVReport:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    subj = np.asarray(list(subjects), dtype=object)
    if not (len(X) == len(y) == len(subj)):
        raise ValueError("features, labels and subjects must have equal length")
    fit_predict = model if callable(model) else _fit_predict(model, forest_cfg, mlp_cfg)
    k = num_classes if num_classes is not None else int(y.max()) + 1
    folds = subject_folds(subj.tolist(), num_folds)
    tested: set = set()
    confusion = np.zeros((k, k), dtype=np.int64)
    subject_acc: dict[str, float] = {}
    fold_acc = []
    for test_subjects in folds:
        overlap = tested.intersection(test_subjects)
        if overlap:
            raise RuntimeError(f"subjects {sorted(overlap)} appear in more than one test fold")
        tested.update(test_subjects)
        test = np.isin(subj, test_subjects)
        train = ~test
        if set(subj[train]) & set(subj[test]):
            raise RuntimeError("train/test subject leakage")
        pred = np.asarray(fit_predict(X[train], y[train], X[test]), dtype=np.int64)
        np.add.at(confusion, (y[test], pred), 1)
        fold_acc.append(float(np.mean(pred == y[test])))
        test_ids = subj[test]
        for s in test_subjects:
            m = test_ids == s
            subject_acc[s] = float(np.mean(pred[m] == y[test][m]))
    order = list(dict.fromkeys(subj.tolist()))
    return CVReport(order, subject_acc, fold_acc, folds, confusion, list(range(k)))
