"""Hyperprior configuration and the default data-driven prior recipe."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .model import Hyperparams


@dataclass(frozen=True)
class DataProxy:
    """Rough center ``d`` and range ``r`` of a series."""

    d: float
    r: float

    def __post_init__(self):
        if not np.isfinite(self.d) or not (np.isfinite(self.r) and self.r > 0):
            raise ValueError("proxy needs a finite center and a positive finite range")

    @classmethod
    def from_series(cls, z) -> "DataProxy":
        z = np.asarray(z, dtype=float)
        lo, hi = float(np.min(z)), float(np.max(z))
        return cls(d=0.5 * (lo + hi), r=hi - lo)


_SHAPES = ("a_v_x", "a_v_y", "nu_x", "nu_y", "a_c")


@dataclass(frozen=True)
class HyperpriorConfig:
    """Fixed constants of the hyperpriors on G0, the DP precision, and the truncation.

    m_x ~ N(a_m_x, b_m_x), v_x ~ IG(a_v_x, b_v_x), s_x ~ Ga(a_s_x, b_s_x)
    (rate), likewise for y; theta ~ N(a_theta, b_theta), c ~ IG(a_c, b_c);
    alpha ~ Ga(a_alpha, b_alpha) (rate).
    """

    a_m_x: float
    b_m_x: float
    a_m_y: float
    b_m_y: float
    a_v_x: float
    b_v_x: float
    a_v_y: float
    b_v_y: float
    a_s_x: float
    b_s_x: float
    a_s_y: float
    b_s_y: float
    a_theta: float
    b_theta: float
    a_c: float
    b_c: float
    nu_x: float = 2.0
    nu_y: float = 2.0
    a_alpha: float = 0.5
    b_alpha: float = 0.5
    L: int = 30

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not np.isfinite(val):
                raise ValueError(f"{f.name} must be finite")
            if f.name.startswith("a_m") or f.name == "a_theta":
                continue
            if val <= 0:
                raise ValueError(f"{f.name} must be positive")
        if self.a_c <= 1:
            raise ValueError("a_c must exceed 1 so that the IG prior on c has a finite mean")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("L must be a positive integer")
        object.__setattr__(self, "L", int(self.L))

    def with_overrides(self, **kw) -> "HyperpriorConfig":
        return replace(self, **kw)

    def prior_mean_hyperparams(self) -> Hyperparams:
        """Prior means of psi, used to initialize the sampler."""
        return Hyperparams(
            m_x=self.a_m_x,
            v_x=self.b_v_x / (self.a_v_x - 1.0) if self.a_v_x > 1 else self.b_v_x,
            m_y=self.a_m_y,
            v_y=self.b_v_y / (self.a_v_y - 1.0) if self.a_v_y > 1 else self.b_v_y,
            s_x=self.a_s_x / self.b_s_x,
            s_y=self.a_s_y / self.b_s_y,
            theta=self.a_theta,
            c=self.b_c / (self.a_c - 1.0),
            nu_x=self.nu_x,
            nu_y=self.nu_y,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperpriorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown prior keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HyperpriorConfig":
        return cls.from_dict(json.loads(text))


def default_priors(proxy: DataProxy, shape: float = 2.0, *, L: int = 30,
                   a_alpha: float = 0.5, b_alpha: float = 0.5,
                   beta_prior_split: float = 0.5, location_split: float = 0.5) -> HyperpriorConfig:
    """Weakly informative hyperpriors from a center/range proxy.

    Every inverse-gamma shape (a_v's, nu's, a_c) and the gamma shapes a_s are
    set to ``shape``.  Scales are solved so that

    * Var(beta_l) = b_theta + b_c / (a_c - 1) = 1 with E(beta_l) = 0,
    * E(mu_l) = d and Var(mu_l) = b_m + b_v / (a_v - 1) = (r/4)^2,
    * E(delta_l) = a_s / (b_s (nu - 1)) = (r/4)^2,

    for both the x and y sides.  ``beta_prior_split`` and ``location_split``
    give the share of each variance identity carried by b_theta and b_m.
    """
    if not shape > 1:
        raise ValueError("shape must exceed 1 for the inverse-gamma priors to have finite means")
    if not (0 < beta_prior_split < 1 and 0 < location_split < 1):
        raise ValueError("splits must lie in (0, 1)")
    scale2 = (proxy.r / 4.0) ** 2
    b_m = location_split * scale2
    b_v = (1.0 - location_split) * scale2 * (shape - 1.0)
    b_s = shape / ((shape - 1.0) * scale2)
    return HyperpriorConfig(
        a_m_x=proxy.d, b_m_x=b_m, a_m_y=proxy.d, b_m_y=b_m,
        a_v_x=shape, b_v_x=b_v, a_v_y=shape, b_v_y=b_v,
        a_s_x=shape, b_s_x=b_s, a_s_y=shape, b_s_y=b_s,
        a_theta=0.0, b_theta=beta_prior_split,
        a_c=shape, b_c=(1.0 - beta_prior_split) * (shape - 1.0),
        nu_x=shape, nu_y=shape,
        a_alpha=a_alpha, b_alpha=b_alpha, L=L,
    )


def prior_moments(config: HyperpriorConfig) -> dict:
    """Marginal prior mean/variance of the component parameters implied by ``config``."""
    c = config
    return {
        "E_mu_x": c.a_m_x,
        "Var_mu_x": c.b_m_x + c.b_v_x / (c.a_v_x - 1.0),
        "E_mu_y": c.a_m_y,
        "Var_mu_y": c.b_m_y + c.b_v_y / (c.a_v_y - 1.0),
        "E_beta": c.a_theta,
        "Var_beta": c.b_theta + c.b_c / (c.a_c - 1.0),
        "E_delta_x": c.a_s_x / (c.b_s_x * (c.nu_x - 1.0)),
        "E_delta_y": c.a_s_y / (c.b_s_y * (c.nu_y - 1.0)),
    }


def sample_prior_hyperparams(config: HyperpriorConfig, rng: np.random.Generator) -> Hyperparams:
    """One draw of psi from its hyperprior."""
    c = config
    return Hyperparams(
        m_x=rng.normal(c.a_m_x, np.sqrt(c.b_m_x)),
        v_x=1.0 / rng.gamma(c.a_v_x, 1.0 / c.b_v_x),
        m_y=rng.normal(c.a_m_y, np.sqrt(c.b_m_y)),
        v_y=1.0 / rng.gamma(c.a_v_y, 1.0 / c.b_v_y),
        s_x=rng.gamma(c.a_s_x, 1.0 / c.b_s_x),
        s_y=rng.gamma(c.a_s_y, 1.0 / c.b_s_y),
        theta=rng.normal(c.a_theta, np.sqrt(c.b_theta)),
        c=1.0 / rng.gamma(c.a_c, 1.0 / c.b_c),
        nu_x=c.nu_x,
        nu_y=c.nu_y,
    )
