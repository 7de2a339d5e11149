"""Posterior-predictive evaluation: Monte-Carlo mixtures over q samples."""

import numpy as np
from scipy import special

from .expfam import sample_reparam


def _theta_samples(q, k_samples, seed):
    if k_samples == 1 and seed is None:
        return q.mu[None, :]
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((k_samples, q.dim))
    return sample_reparam(q, eps)


def predict_loglik_regression(q, model, x, y, k_samples, seed, log_sigma2=None,
                              y_mean=0.0, y_std=1.0):
    """log of the K-component predictive mixture density at raw-scale y.

    The model operates on standardized targets; the Jacobian correction
    -log(y_std) maps the density back to the original scale.  seed=None with
    k_samples=1 collapses to the posterior-mean parameters.
    """
    theta = _theta_samples(q, k_samples, seed)
    if log_sigma2 is None:
        log_sigma2 = getattr(model, "log_sigma2", None)
        if log_sigma2 is None:
            log_sigma2 = np.log(model.sigma2)
    y_s = (float(y) - y_mean) / y_std
    outs = np.array([float(model.forward(theta[k], np.atleast_2d(x))[0])
                     if hasattr(model, "forward")
                     else float(theta[k] @ np.asarray(x, float))
                     for k in range(theta.shape[0])])
    comp = (-0.5 * np.log(2 * np.pi) - 0.5 * log_sigma2
            - (y_s - outs) ** 2 / (2 * np.exp(log_sigma2)))
    return float(special.logsumexp(comp) - np.log(theta.shape[0]) - np.log(y_std))


def predict_probit(q, model, x, k_samples, seed):
    """Monte-Carlo class probabilities [P(y=-1), P(y=+1)]."""
    theta = _theta_samples(q, k_samples, seed)
    p_pos = float(np.mean(special.ndtr(theta @ np.asarray(x, float))))
    return np.array([1.0 - p_pos, p_pos])


def predict_class(q, model, x, k_samples, seed):
    """Monte-Carlo averaged softmax class probabilities."""
    theta = _theta_samples(q, k_samples, seed)
    probs = np.zeros(model.n_classes)
    for k in range(theta.shape[0]):
        logits = np.asarray(model.logits(theta[k], np.atleast_2d(x)))[:, 0]
        probs += np.exp(logits - special.logsumexp(logits))
    return probs / theta.shape[0]


def predictive_regression_stats(q, model, X, k_samples, seed, log_sigma2=None):
    """Predictive mean and standard deviation on each row of X.

    Variance is the spread of network outputs across posterior samples plus
    the observation noise.
    """
    theta = _theta_samples(q, k_samples, seed)
    if log_sigma2 is None:
        log_sigma2 = getattr(model, "log_sigma2", 0.0)
    X = np.atleast_2d(np.asarray(X, float))
    outs = np.stack([np.asarray(model.forward(theta[k], X))
                     for k in range(theta.shape[0])])
    mean = outs.mean(axis=0)
    std = np.sqrt(outs.var(axis=0) + np.exp(log_sigma2))
    return mean, std
