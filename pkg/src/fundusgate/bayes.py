"""Two-class Naive Bayes over mixed Gaussian / Bernoulli features."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .features import FeatureKind, FeatureMode, FeatureSpec

VARIANCE_FLOOR = 1e-9
MODEL_MAGIC = "FUNDUSGATE-NB"
MODEL_VERSION = "v1"

_LOG_2PI = float(np.log(2 * np.pi))


class ClassLabel(str, enum.Enum):
    ABNORMAL = "abnormal"
    PROCESS_FURTHER = "process_further"


# column order used by every per-class array below
CLASSES = (ClassLabel.ABNORMAL, ClassLabel.PROCESS_FURTHER)


class TrainingError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class TrainingSet:
    X: np.ndarray
    labels: list[ClassLabel]
    kinds: list[FeatureKind]

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.labels = [ClassLabel(lbl) for lbl in self.labels]
        self.kinds = [FeatureKind(k) for k in self.kinds]
        if self.X.shape[0] != len(self.labels):
            raise ValueError(f"{self.X.shape[0]} vectors but {len(self.labels)} labels")
        if self.X.shape[1] != len(self.kinds):
            raise ValueError(f"vectors have {self.X.shape[1]} entries but {len(self.kinds)} kinds")

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[np.ndarray, ClassLabel]], kinds):
        if not rows:
            raise ValueError("empty training set")
        return cls(np.vstack([np.asarray(v, dtype=np.float64) for v, _ in rows]), [lbl for _, lbl in rows], kinds)

    @property
    def y(self) -> np.ndarray:
        """Class indices into ``CLASSES``."""
        return np.array([CLASSES.index(lbl) for lbl in self.labels], dtype=np.int64)

    def subset_columns(self, cols) -> "TrainingSet":
        cols = np.asarray(cols, dtype=np.int64)
        return TrainingSet(self.X[:, cols], list(self.labels), [self.kinds[c] for c in cols])


@dataclass(frozen=True)
class NaiveBayesModel:
    priors: np.ndarray  # (2,)
    means: np.ndarray  # (2, n_continuous)
    variances: np.ndarray  # (2, n_continuous)
    bernoulli: np.ndarray  # (2, n_binary), P(bit = 1 | class)
    kinds: tuple[FeatureKind, ...]
    spec: FeatureSpec = field(default_factory=FeatureSpec)
    subset: tuple[int, ...] | None = None
    n_tiles: int | None = None

    @property
    def continuous_idx(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k is FeatureKind.CONTINUOUS], dtype=np.int64)

    @property
    def binary_idx(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k is FeatureKind.BINARY], dtype=np.int64)

    def project(self, X: np.ndarray) -> np.ndarray:
        """Reduce full-grid feature vectors to the model's inputs.

        Vectors already of model length pass through; full-grid vectors are
        cut down to the selected tiles when the model carries a subset.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d = X.shape[1]
        if d == len(self.kinds):
            return X
        if self.subset is not None and self.n_tiles is not None and d == self.n_tiles * self.spec.per_tile:
            return X[:, self.spec.columns(self.subset)]
        raise ValueError(f"feature vector has {d} entries, model expects {len(self.kinds)}")


class Prediction(NamedTuple):
    label: ClassLabel
    posterior: float  # probability of ``label``


def train(
    data: TrainingSet,
    spec: FeatureSpec | None = None,
    subset: Sequence[int] | None = None,
    n_tiles: int | None = None,
) -> NaiveBayesModel:
    """Fit priors, per-class Gaussians and Laplace-smoothed Bernoullis."""
    y = data.y
    counts = np.bincount(y, minlength=2)
    if (counts == 0).any():
        missing = [c.value for c, n in zip(CLASSES, counts) if n == 0]
        raise TrainingError(f"training data has no rows of class {', '.join(missing)}")
    kinds = tuple(data.kinds)
    cont = np.array([i for i, k in enumerate(kinds) if k is FeatureKind.CONTINUOUS], dtype=np.int64)
    binr = np.array([i for i, k in enumerate(kinds) if k is FeatureKind.BINARY], dtype=np.int64)

    means = np.empty((2, len(cont)))
    variances = np.empty((2, len(cont)))
    bern = np.empty((2, len(binr)))
    for c in range(2):
        rows = data.X[y == c]
        xc = rows[:, cont]
        means[c] = xc.mean(axis=0)
        variances[c] = np.maximum(((xc - means[c]) ** 2).mean(axis=0), VARIANCE_FLOOR)
        ones = (rows[:, binr] >= 0.5).sum(axis=0)
        bern[c] = (ones + 1.0) / (counts[c] + 2.0)
    return NaiveBayesModel(
        priors=counts / counts.sum(),
        means=means,
        variances=variances,
        bernoulli=bern,
        kinds=kinds,
        spec=spec if spec is not None else FeatureSpec(),
        subset=tuple(int(i) for i in subset) if subset is not None else None,
        n_tiles=n_tiles,
    )


def joint_log_scores(model: NaiveBayesModel, X: np.ndarray) -> np.ndarray:
    """Unnormalized log P(class) + sum of log-likelihoods, shape (n, 2)."""
    X = model.project(X)
    cont, binr = model.continuous_idx, model.binary_idx
    scores = np.tile(np.log(model.priors), (X.shape[0], 1))
    xc = X[:, cont]
    xb = X[:, binr] >= 0.5
    for c in range(2):
        var = model.variances[c]
        ll = -0.5 * (_LOG_2PI + np.log(var)) - (xc - model.means[c]) ** 2 / (2 * var)
        p = model.bernoulli[c]
        lb = np.where(xb, np.log(p), np.log1p(-p))
        scores[:, c] += ll.sum(axis=1) + lb.sum(axis=1)
    return scores


def posteriors(model: NaiveBayesModel, X: np.ndarray) -> np.ndarray:
    s = joint_log_scores(model, X)
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def predict_many(model: NaiveBayesModel, X: np.ndarray) -> list[Prediction]:
    scores = joint_log_scores(model, X)
    post = posteriors(model, X)
    out = []
    for s, p in zip(scores, post):
        # ties go to ABNORMAL: a false referral is the safe error
        c = 0 if s[0] >= s[1] else 1
        out.append(Prediction(CLASSES[c], float(p[c])))
    return out


def predict(model: NaiveBayesModel, v: np.ndarray) -> Prediction:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    return predict_many(model, v[None, :])[0]


# -- serialization -----------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def save_model(model: NaiveBayesModel) -> bytes:
    spec = model.spec
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"spec mode={spec.mode.value} subimage_size={spec.subimage_size} threshold={_fmt(spec.threshold)}",
        f"tiles {'none' if model.n_tiles is None else model.n_tiles}",
        "subset none" if model.subset is None else "subset " + " ".join(str(i) for i in model.subset),
        "classes " + " ".join(c.value for c in CLASSES),
        "priors " + " ".join(_fmt(p) for p in model.priors),
        f"features {len(model.kinds)}",
    ]
    ci = bi = 0
    for i, kind in enumerate(model.kinds):
        if kind is FeatureKind.CONTINUOUS:
            params = [model.means[0, ci], model.variances[0, ci], model.means[1, ci], model.variances[1, ci]]
            ci += 1
        else:
            params = [model.bernoulli[0, bi], model.bernoulli[1, bi]]
            bi += 1
        lines.append(f"f {i} {kind.value} " + " ".join(_fmt(p) for p in params))
    lines.append("end")
    return ("\n".join(lines) + "\n").encode("ascii")


def _expect(line: str, key: str) -> list[str]:
    parts = line.split()
    if not parts or parts[0] != key:
        raise ModelFormatError(f"expected '{key}' line, got {line!r}")
    return parts[1:]


def _float(tok: str, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ModelFormatError(f"malformed {what}: {tok!r}") from None


def _int(tok: str, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ModelFormatError(f"malformed {what}: {tok!r}") from None


def load_model(data: bytes) -> NaiveBayesModel:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise ModelFormatError("model file is not ASCII text") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ModelFormatError("empty model file")
    head = lines[0].split()
    if not head or head[0] != MODEL_MAGIC:
        raise ModelFormatError(f"not a {MODEL_MAGIC} model file")
    if len(head) != 2 or head[1] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {' '.join(head[1:])!r}, expected {MODEL_VERSION}")
    if len(lines) < 8:
        raise ModelFormatError("model file is truncated")

    spec_fields = dict(tok.split("=", 1) for tok in _expect(lines[1], "spec") if "=" in tok)
    try:
        spec = FeatureSpec(
            FeatureMode(spec_fields["mode"]),
            _int(spec_fields["subimage_size"], "subimage_size"),
            _float(spec_fields["threshold"], "threshold"),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"malformed spec line: {exc}") from None

    tiles_tok = _expect(lines[2], "tiles")
    n_tiles = None if tiles_tok == ["none"] else _int(tiles_tok[0] if tiles_tok else "", "tiles")
    subset_tok = _expect(lines[3], "subset")
    subset = None if subset_tok == ["none"] else tuple(_int(t, "subset index") for t in subset_tok)
    if _expect(lines[4], "classes") != [c.value for c in CLASSES]:
        raise ModelFormatError(f"unexpected class list in {lines[4]!r}")
    priors = np.array([_float(t, "prior") for t in _expect(lines[5], "priors")])
    if priors.shape != (2,):
        raise ModelFormatError("priors line must hold two values")
    n_feat = _int((_expect(lines[6], "features") or [""])[0], "feature count")

    body = lines[7:]
    if len(body) != n_feat + 1 or body[-1].strip() != "end":
        raise ModelFormatError(f"expected {n_feat} feature lines followed by 'end'")
    kinds, means, variances, bern = [], [], [], []
    for i, ln in enumerate(body[:-1]):
        parts = _expect(ln, "f")
        if len(parts) < 2 or _int(parts[0], "feature index") != i:
            raise ModelFormatError(f"feature line {i} out of order: {ln!r}")
        try:
            kind = FeatureKind(parts[1])
        except ValueError:
            raise ModelFormatError(f"unknown feature kind {parts[1]!r}") from None
        vals = [_float(t, "parameter") for t in parts[2:]]
        if kind is FeatureKind.CONTINUOUS:
            if len(vals) != 4:
                raise ModelFormatError(f"continuous feature {i} needs 4 parameters")
            means.append(vals[0::2])
            variances.append(vals[1::2])
        else:
            if len(vals) != 2:
                raise ModelFormatError(f"binary feature {i} needs 2 parameters")
            bern.append(vals)
        kinds.append(kind)
    return NaiveBayesModel(
        priors=priors,
        means=np.array(means, dtype=np.float64).reshape(-1, 2).T.copy(),
        variances=np.array(variances, dtype=np.float64).reshape(-1, 2).T.copy(),
        bernoulli=np.array(bern, dtype=np.float64).reshape(-1, 2).T.copy(),
        kinds=tuple(kinds),
        spec=spec,
        subset=subset,
        n_tiles=n_tiles,
    )
