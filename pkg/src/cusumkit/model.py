"""Observation model: distribution of one log-likelihood-ratio increment.

Both monitoring procedures in this package observe the running sum of
log-likelihood-ratio increments ``log L_n``.  All their operating
characteristics depend on the observations only through the density and
distribution function of a single increment under each hypothesis.  This
module owns those two functions plus exact sampling.

The density under the post-change hypothesis is an exponential tilt of the
pre-change density::

    pdf_1(z) = exp(z) * pdf_0(z)

This identity holds for any dominated likelihood-ratio model, and the rest
of the package leans on it: solvers only ever evaluate ``pdf_0`` and apply
the tilt, so the post-change kernel matrix is never assembled.

The built-in testbed is a Gaussian mean shift: observations are N(0, 1)
before the change and N(theta, 1) after.  The increment is then
``z = theta * x - theta**2 / 2``, which is Gaussian with variance theta**2
and mean -theta**2/2 (pre-change) or +theta**2/2 (post-change).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


class Hypothesis(enum.IntEnum):
    """Which data-generating law is in force."""

    H0 = 0  # pre-change: no shift
    H1 = 1  # post-change: shifted mean


class ModelKind(str, enum.Enum):
    """Supported observation models."""

    GAUSSIAN_SHIFT = "gaussian_shift"


@dataclass(frozen=True)
class ObservationModel:
    """A likelihood-ratio observation model.

    Attributes:
        kind: which family the model belongs to.
        theta: shift magnitude.  Must be finite and nonzero; a zero shift
            makes both hypotheses identical and every increment zero.
    """

    kind: ModelKind
    theta: float

    def __post_init__(self) -> None:
        if self.kind is not ModelKind.GAUSSIAN_SHIFT:
            raise ValueError(f"unsupported model kind: {self.kind!r}")
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError("theta must be finite")
        if theta == 0.0:
            raise ValueError("theta must be nonzero")
        object.__setattr__(self, "theta", theta)


def gaussian_shift(theta: float) -> ObservationModel:
    """Build a Gaussian mean-shift model with shift ``theta``."""
    return ObservationModel(kind=ModelKind.GAUSSIAN_SHIFT, theta=theta)


def _as_array(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=np.float64)
    return arr, arr.ndim == 0


def log_lr_pdf(model: ObservationModel, hypothesis: Hypothesis, z):
    """Density of one log-likelihood-ratio increment at ``z``.

    Accepts scalars or arrays and returns a matching shape.  The
    pre-change density is evaluated in closed form.  The post-change
    density is always computed as ``exp(z) * pdf_0(z)``, never from its
    own closed form; where ``pdf_0`` underflows to zero the result is
    clamped to zero so the tilt cannot manufacture spurious overflow in
    the far tail.
    """
    arr, scalar = _as_array(z)
    v = model.theta * model.theta
    sd = abs(model.theta)
    t = (arr + 0.5 * v) / sd
    k0 = np.exp(-0.5 * t * t) / (sd * math.sqrt(2.0 * math.pi))
    if hypothesis == Hypothesis.H0:
        out = k0
    else:
        out = np.zeros_like(k0)
        mask = k0 > 0.0
        out[mask] = np.exp(arr[mask]) * k0[mask]
    return out.item() if scalar else out


def log_lr_cdf(model: ObservationModel, hypothesis: Hypothesis, z):
    """Distribution function of one increment at ``z``.

    Both hypotheses use the closed-form Gaussian distribution function;
    the increment is Gaussian with variance theta**2 and mean
    -theta**2/2 under H0, +theta**2/2 under H1.
    """
    arr, scalar = _as_array(z)
    v = model.theta * model.theta
    sd = abs(model.theta)
    shift = -0.5 * v if hypothesis == Hypothesis.H0 else 0.5 * v
    out = ndtr((arr - shift) / sd)
    return out.item() if scalar else out


def sample_log_lr(
    model: ObservationModel,
    hypothesis: Hypothesis,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draw log-likelihood-ratio increments by sampling the observation.

    Draws x ~ N(0, 1) (H0) or N(theta, 1) (H1) and returns
    ``theta * x - theta**2 / 2``, the exact increment an observer would
    compute from that observation.  ``size=None`` consumes one draw and
    returns a scalar; an integer returns that many increments.
    """
    x = rng.standard_normal() if size is None else rng.standard_normal(size)
    if hypothesis == Hypothesis.H1:
        x = x + model.theta
    return model.theta * x - 0.5 * model.theta * model.theta
