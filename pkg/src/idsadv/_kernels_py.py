"""Pure numpy implementation of the elementwise kernels.

Mirrors the compiled ``_kernels`` extension function for function; used when
the extension is not built or ``IDSADV_PURE_PYTHON=1`` is set.
"""
import numpy as np

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

RELU = 0
SELU = 1


def act_forward(z, kind):
    if kind == RELU:
        return np.where(z > 0.0, z, 0.0)
    neg = SELU_LAMBDA * SELU_ALPHA * np.expm1(np.minimum(z, 0.0))
    return np.where(z > 0.0, SELU_LAMBDA * z, neg)


def act_backward(z, upstream, kind):
    # derivative at exactly 0 takes the z <= 0 branch
    if kind == RELU:
        return np.where(z > 0.0, upstream, 0.0)
    slope = SELU_LAMBDA * SELU_ALPHA * np.exp(np.minimum(z, 0.0))
    return upstream * np.where(z > 0.0, SELU_LAMBDA, slope)


def alpha_dropout(h, keep, a, b, alpha_p):
    return a * np.where(keep, h, alpha_p) + b


def signed_step(x, grad, step):
    return x + step * np.sign(grad)


def project_linf(cand, origin, eps, lo, hi):
    lower = np.maximum(origin - eps, lo)
    upper = np.minimum(origin + eps, hi)
    return np.minimum(np.maximum(cand, lower), upper)
