"""
Scale-mixture prior and the KL term of the flipout layers
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit, logsumexp

from uqnet.errors import ConfigurationError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _normal_logpdf(x: np.ndarray, sigma: float) -> np.ndarray:
    return -0.5 * (x / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI


@dataclass(frozen=True)
class MixturePrior:
    """
    (1 - pi) N(0, sigma1^2) + pi N(0, sigma2^2)
    """

    pi: float = 0.1
    sigma1: float = 1.0
    sigma2: float = 2.5

    def __post_init__(self):
        if not 0 <= self.pi <= 1:
            raise ConfigurationError("mixture weight pi must be in [0, 1]")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ConfigurationError("mixture scales must be > 0")

    def _component_logs(self, theta: np.ndarray) -> np.ndarray:
        return np.stack([_normal_logpdf(theta, self.sigma1), _normal_logpdf(theta, self.sigma2)])

    def _weights(self, ndim: int) -> np.ndarray:
        return np.array([1.0 - self.pi, self.pi]).reshape((2,) + (1,) * ndim)

    def log_prob(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return logsumexp(self._component_logs(theta), b=self._weights(theta.ndim), axis=0)

    def grad_log_prob(self, theta: np.ndarray) -> np.ndarray:
        """d/dtheta log p(theta), a responsibility-weighted sum of the component scores"""
        theta = np.asarray(theta, dtype=np.float64)
        logs = self._component_logs(theta)
        total = logsumexp(logs, b=self._weights(theta.ndim), axis=0)
        weights = self._weights(theta.ndim)
        with np.errstate(divide="ignore"):
            responsibility = np.exp(np.log(weights) + logs - total)
        return -theta * (responsibility[0] / self.sigma1**2 + responsibility[1] / self.sigma2**2)


DEFAULT_PRIOR = MixturePrior()


def posterior_sigma(rho: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, rho)


def kl_sample_and_grad(
    mu: np.ndarray, rho: np.ndarray, eps: np.ndarray, prior: MixturePrior = DEFAULT_PRIOR
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    One-sample KL estimate log q(theta) - log p(theta) at theta = mu + sigma * eps,
    summed over weights, with its reparameterized gradients.

    :return: (kl, dkl/dmu, dkl/drho)
    """
    mu64 = np.asarray(mu, dtype=np.float64)
    rho64 = np.asarray(rho, dtype=np.float64)
    eps64 = np.asarray(eps, dtype=np.float64)
    sigma = posterior_sigma(rho64)
    theta = mu64 + sigma * eps64
    log_q = -np.log(sigma) - 0.5 * eps64**2 - _LOG_SQRT_2PI
    kl = float(np.sum(log_q - prior.log_prob(theta)))
    score = prior.grad_log_prob(theta)
    dmu = -score
    dsigma = -1.0 / sigma - score * eps64
    drho = dsigma * expit(rho64)
    return kl, dmu.astype(mu.dtype), drho.astype(rho.dtype)


def kl_mixture_samples(
    mu: np.ndarray,
    rho: np.ndarray,
    prior: MixturePrior,
    rng: np.random.Generator,
    samples: int,
) -> np.ndarray:
    """
    Per-sample values log q(theta_s) - log p(theta_s), summed over weights

    :return: (samples,) array, its mean is the Monte Carlo KL estimate
    """
    if samples < 1:
        raise ConfigurationError("KL estimate needs at least one sample")
    mu = np.asarray(mu, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    sigma = posterior_sigma(rho)
    eps = rng.standard_normal((samples,) + mu.shape)
    theta = mu + sigma * eps
    log_q = -np.log(sigma) - 0.5 * eps**2 - _LOG_SQRT_2PI
    values = log_q - prior.log_prob(theta)
    return values.reshape(samples, -1).sum(axis=1)


def kl_mixture_mc(
    mu: np.ndarray,
    rho: np.ndarray,
    prior: MixturePrior = DEFAULT_PRIOR,
    rng: np.random.Generator | None = None,
    samples: int = 1,
) -> float:
    """
    Monte Carlo KL(q || p) for q = N(mu, softplus(rho)^2) against the mixture prior
    """
    if rng is None:
        raise ConfigurationError("KL estimate needs a random generator")
    return float(kl_mixture_samples(mu, rho, prior, rng, samples).mean())
