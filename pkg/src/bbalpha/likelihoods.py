"""Likelihood factors, datasets and data generators.

All log-likelihood code is written against the autodiff primitives, so the
same function evaluates on plain numpy arrays or differentiably on tape
variables.  MLP parameter vectors are packed layer-major, weights before
biases: (W1, b1, W2, b2, ...) with each weight matrix flattened row-major.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (ClassOutOfRange, MissingColumn, NonPositiveNoise,
                     ParseError, ShapeMismatch)

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# datasets

@dataclass
class Dataset:
    """Feature matrix plus targets and the statistics needed to undo
    standardization of predictions."""

    features: np.ndarray
    targets: np.ndarray
    name: str = "unnamed"
    task: str = "regression"  # regression | probit | classification
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.asarray(self.targets)
        if self.features.shape[0] != self.targets.shape[0]:
            raise ShapeMismatch("features %s vs targets %s"
                                % (self.features.shape, self.targets.shape))
        if np.any(~np.isfinite(self.features)):
            raise ParseError("NaN/Inf in features of dataset '%s'" % self.name)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.targets[idx], self.name,
                       self.task, self.x_mean, self.x_std, self.y_mean, self.y_std)


def standardize_train_test(train: Dataset, test: Dataset, targets=None):
    """Standardize features (and regression targets) using train statistics.

    Returns new (train, test) datasets carrying the statistics so predictions
    can be mapped back to the original scale.
    """
    if targets is None:
        targets = train.task == "regression"
    x_mean = train.features.mean(axis=0)
    x_std = train.features.std(axis=0)
    x_std = np.where(x_std < 1e-12, 1.0, x_std)
    y_mean, y_std = 0.0, 1.0
    tr_y, te_y = train.targets, test.targets
    if targets:
        y_mean = float(np.mean(train.targets))
        y_std = float(np.std(train.targets))
        if y_std < 1e-12:
            y_std = 1.0
        tr_y = (train.targets - y_mean) / y_std
        te_y = (test.targets - y_mean) / y_std
    mk = lambda ds, y: Dataset((ds.features - x_mean) / x_std, y, ds.name,
                               ds.task, x_mean, x_std, y_mean, y_std)
    return mk(train, tr_y), mk(test, te_y)


# ---------------------------------------------------------------------------
# likelihood models

class ProbitRegression:
    """p(y|theta, x) = Phi(y * theta^T x), labels in {-1, +1}."""

    kind = "probit"

    def __init__(self, n_features):
        self.theta_dim = n_features
        self.hyper_dim = 0

    def log_lik(self, theta, x, y, hyper=None):
        return ad.log_norm_cdf(float(y) * ad.dot(theta, np.asarray(x, float)))

    def batch_log_lik(self, Theta, X, y, hyper=None):
        # (K, P) x (B, P) -> (K, B)
        z = ad.dot(Theta, np.asarray(X, float).T)
        return ad.log_norm_cdf(z * np.asarray(y, float)[None, :])


class LinearRegression:
    """Gaussian likelihood y = theta^T x + noise with fixed variance sigma2."""

    kind = "linreg"

    def __init__(self, n_features, sigma2):
        if sigma2 <= 0:
            raise NonPositiveNoise("sigma2 = %g" % sigma2)
        self.theta_dim = n_features
        self.sigma2 = float(sigma2)
        self.hyper_dim = 0

    def forward(self, theta, X):
        return ad.dot(np.atleast_2d(np.asarray(X, float)), theta)

    def log_lik(self, theta, x, y, hyper=None):
        resid = float(y) - ad.dot(theta, np.asarray(x, float))
        return -0.5 * np.log(2 * np.pi * self.sigma2) - resid * resid / (2 * self.sigma2)

    def batch_log_lik(self, Theta, X, y, hyper=None):
        resid = np.asarray(y, float)[None, :] - ad.dot(Theta, np.asarray(X, float).T)
        return -0.5 * np.log(2 * np.pi * self.sigma2) - resid * resid / (2 * self.sigma2)


class MLPRegression:
    """Single-hidden-layer rectifier network with Gaussian output noise.

    The noise is parameterized by log sigma2, passed as the hyper slot so it
    can be trained by energy descent or frozen.
    """

    kind = "mlp_regression"

    def __init__(self, n_features, n_hidden, log_sigma2=0.0, learn_noise=False):
        self.d_in = n_features
        self.n_hidden = n_hidden
        self.theta_dim = n_hidden * n_features + n_hidden + n_hidden + 1
        self.log_sigma2 = float(log_sigma2)
        self.learn_noise = learn_noise
        self.hyper_dim = 1 if learn_noise else 0

    def unpack(self, theta):
        h, d = self.n_hidden, self.d_in
        W1 = ad.reshape(theta[0:h * d], (h, d))
        b1 = theta[h * d:h * d + h]
        w2 = theta[h * d + h:h * d + 2 * h]
        b2 = theta[h * d + 2 * h:h * d + 2 * h + 1]
        return W1, b1, w2, b2

    def forward(self, theta, X):
        """Network outputs for all rows of X; returns (B,)."""
        W1, b1, w2, b2 = self.unpack(theta)
        X = np.atleast_2d(np.asarray(X, float))
        H = ad.relu(ad.dot(W1, X.T) + ad.reshape(b1, (self.n_hidden, 1)))
        return ad.dot(w2, H) + b2[0]

    def _log_sigma2(self, hyper):
        if hyper is None:
            return self.log_sigma2
        return hyper if np.ndim(ad._val(hyper)) == 0 else hyper[0]

    def log_lik(self, theta, x, y, hyper=None):
        out = self.forward(theta, np.atleast_2d(np.asarray(x, float)))[0]
        ls2 = self._log_sigma2(hyper)
        resid = float(y) - out
        return -0.5 * _LOG_2PI - 0.5 * ls2 - resid * resid / (2.0 * ad.exp(ls2))

    def batch_log_lik(self, Theta, X, y, hyper=None):
        # vectorized over the K sample rows of Theta
        ls2 = self._log_sigma2(hyper)
        y = np.asarray(y, float)
        X = np.atleast_2d(np.asarray(X, float))
        K = ad._val(Theta).shape[0]
        B = X.shape[0]
        h, d = self.n_hidden, self.d_in
        W1 = ad.reshape(Theta[:, 0:h * d], (K, h, d))
        b1 = ad.reshape(Theta[:, h * d:h * d + h], (K, h, 1))
        w2 = ad.reshape(Theta[:, h * d + h:h * d + 2 * h], (K, 1, h))
        b2 = ad.reshape(Theta[:, h * d + 2 * h], (K, 1, 1))
        H = ad.relu(ad.bmm(W1, X.T) + b1)            # (K, h, B)
        out = ad.bmm(w2, H) + b2                     # (K, 1, B)
        resid = ad.reshape(out, (K, B)) - y[None, :]
        return -0.5 * _LOG_2PI - 0.5 * ls2 - resid * resid / (2.0 * ad.exp(ls2))


class MLPClassification:
    """Two-hidden-layer rectifier network with softmax readout."""

    kind = "mlp_classification"

    def __init__(self, n_features, n_hidden1, n_hidden2, n_classes):
        self.d_in = n_features
        self.h1 = n_hidden1
        self.h2 = n_hidden2
        self.n_classes = n_classes
        self.theta_dim = (n_hidden1 * n_features + n_hidden1
                          + n_hidden2 * n_hidden1 + n_hidden2
                          + n_classes * n_hidden2 + n_classes)
        self.hyper_dim = 0
        self.layer_dims = [(n_hidden1, n_features), (n_hidden2, n_hidden1),
                           (n_classes, n_hidden2)]

    def unpack(self, theta):
        params = []
        off = 0
        for (nout, nin) in self.layer_dims:
            W = ad.reshape(theta[off:off + nout * nin], (nout, nin))
            off += nout * nin
            b = theta[off:off + nout]
            off += nout
            params.append((W, b))
        return params

    def logits(self, theta, X):
        """Class logits for all rows of X; returns (C, B)."""
        X = np.atleast_2d(np.asarray(X, float))
        layers = self.unpack(theta)
        A = X.T
        for i, (W, b) in enumerate(layers):
            A = ad.dot(W, A) + ad.reshape(b, (ad._val(b).size, 1))
            if i < len(layers) - 1:
                A = ad.relu(A)
        return A

    def log_lik(self, theta, x, y, hyper=None):
        y = int(y)
        if not 0 <= y < self.n_classes:
            raise ClassOutOfRange("class %d not in [0, %d)" % (y, self.n_classes))
        logits = self.logits(theta, np.atleast_2d(np.asarray(x, float)))
        col = logits[:, 0]
        return col[y] - ad.logsumexp(col)

    def batch_log_lik(self, Theta, X, y, hyper=None):
        y = np.asarray(y, dtype=int)
        if np.any((y < 0) | (y >= self.n_classes)):
            raise ClassOutOfRange("labels outside [0, %d)" % self.n_classes)
        X = np.atleast_2d(np.asarray(X, float))
        K = ad._val(Theta).shape[0]
        B = X.shape[0]
        A = X.T
        off = 0
        for i, (nout, nin) in enumerate(self.layer_dims):
            W = ad.reshape(Theta[:, off:off + nout * nin], (K, nout, nin))
            off += nout * nin
            b = ad.reshape(Theta[:, off:off + nout], (K, nout, 1))
            off += nout
            A = ad.bmm(W, A) + b
            if i < len(self.layer_dims) - 1:
                A = ad.relu(A)
        picked = A[:, y, np.arange(B)]               # (K, B)
        return picked - ad.logsumexp(A, axis=1)


def make_model(kind, n_features, **kw):
    if kind == "probit":
        return ProbitRegression(n_features)
    if kind == "linreg":
        return LinearRegression(n_features, kw.get("sigma2", 1.0))
    if kind == "mlp_regression":
        return MLPRegression(n_features, kw.get("n_hidden", 100),
                             kw.get("log_sigma2", 0.0), kw.get("learn_noise", False))
    if kind == "mlp_classification":
        return MLPClassification(n_features, kw.get("n_hidden1", 50),
                                 kw.get("n_hidden2", 50), kw["n_classes"])
    raise ValueError("unknown model kind %r" % kind)


# ---------------------------------------------------------------------------
# generators

def gen_toy_cubic(seed, n=20):
    """n inputs uniform on [-4, 4]; y = x^3 + noise with variance 9."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-4.0, 4.0, size=n)
    y = x ** 3 + rng.normal(0.0, 3.0, size=n)
    return Dataset(x[:, None], y, name="toy_cubic", task="regression")


def gen_synthetic_probit(seed, n=200, d=4, w_scale=1.5):
    """Probit-noise labels from a random linear rule; labels in {-1, +1}."""
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, w_scale, size=d)
    X = rng.normal(size=(n, d))
    p = _ndtr(X @ w)
    y = np.where(rng.uniform(size=n) < p, 1.0, -1.0)
    return Dataset(X, y, name="synthetic_probit", task="probit")


def gen_three_class(seed, n=120, d=2, spread=2.5):
    """Three Gaussian blobs around the corners of a triangle."""
    rng = np.random.default_rng(seed)
    centers = spread * np.array([[1.0, 0.0], [-0.5, 0.9], [-0.5, -0.9]])
    per = n // 3
    X, y = [], []
    for c in range(3):
        X.append(centers[c, :d] + rng.normal(size=(per, d)))
        y.append(np.full(per, c))
    return Dataset(np.vstack(X), np.concatenate(y),
                   name="three_class", task="classification")


def gen_separable_probit(seed, n=100, d=2, margin=1.0):
    """Linearly separable two-class data (for zero-error fixtures)."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X = rng.normal(size=(n, d))
    z = X @ w
    X += np.outer(np.sign(z) * margin, w)
    y = np.sign(X @ w)
    return Dataset(X, y, name="separable_probit", task="probit")


def _ndtr(z):
    from scipy import special
    return special.ndtr(z)


# ---------------------------------------------------------------------------
# CSV ingestion

@dataclass
class CsvSchema:
    """Names the target column and task kind for a CSV file."""

    target: str
    task: str = "regression"
    feature_columns: list = None  # default: every non-target column


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Parse a headered, comma-separated UTF-8 file into a raw Dataset.

    Standardization happens later, on the training split only.  Probit labels
    are normalized to {-1, +1} whatever the source encoding (0/1, -1/+1).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("%s: empty file" % path)
        header = [h.strip() for h in header]
        if schema.target not in header:
            raise MissingColumn("column %r not in header of %s" % (schema.target, path))
        feat_names = schema.feature_columns or [h for h in header if h != schema.target]
        for name in feat_names:
            if name not in header:
                raise MissingColumn("column %r not in header of %s" % (name, path))
        t_idx = header.index(schema.target)
        f_idx = [header.index(n) for n in feat_names]
        rows, targets = [], []
        for rno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for name, ci in zip(feat_names, f_idx):
                try:
                    vals.append(float(row[ci]))
                except (ValueError, IndexError):
                    raise ParseError("%s: bad numeric cell at row %d, column %r"
                                     % (path, rno, name))
            try:
                targets.append(float(row[t_idx]))
            except (ValueError, IndexError):
                raise ParseError("%s: bad numeric cell at row %d, column %r"
                                 % (path, rno, schema.target))
            rows.append(vals)
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    if schema.task == "probit":
        uniq = set(np.unique(y))
        if uniq <= {0.0, 1.0}:
            y = 2.0 * y - 1.0
        y = np.sign(y)
    elif schema.task == "classification":
        y = y.astype(int)
    return Dataset(X, y, name=str(path), task=schema.task)
