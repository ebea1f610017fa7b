"""Containers for retained posterior draws and their plain-text export."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import Hyperparams, MixtureState, log_stick_break, norm_logpdf

FORMAT_VERSION = 1

# draws are evaluated in chunks so (draws x points x components) stays small
_CHUNK_ELEMS = 4_000_000


def _chunks(S, per_draw):
    step = max(1, _CHUNK_ELEMS // max(per_draw, 1))
    for start in range(0, S, step):
        yield slice(start, min(S, start + step))


@dataclass(eq=False)
class PosteriorDraws:
    """Thinned mixture-model draws, stored column-wise.

    Component arrays have shape ``(S, L)``; ``zeta`` is ``(S, L-1)``.
    ``meta`` records the model tag, series summary and sampler settings.
    """

    mu_x: np.ndarray
    mu_y: np.ndarray
    beta: np.ndarray
    delta_x: np.ndarray
    delta_y: np.ndarray
    zeta: np.ndarray
    alpha: np.ndarray
    psi: np.ndarray
    iterations: np.ndarray
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    model = "general"

    def __post_init__(self):
        for name in ("mu_x", "mu_y", "beta", "delta_x", "delta_y", "zeta", "psi"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.iterations = np.asarray(self.iterations, dtype=np.int64).reshape(-1)
        S, L = self.mu_x.shape
        if S == 0:
            raise ValueError("posterior draws are empty")
        if self.zeta.shape != (S, L - 1):
            if L == 1 and self.zeta.size == 0:
                self.zeta = np.empty((S, 0))
            else:
                raise ValueError("zeta has the wrong shape")
        self.meta.setdefault("model", self.model)
        self._log_w = None

    def __len__(self) -> int:
        return self.mu_x.shape[0]

    @property
    def L(self) -> int:
        return self.mu_x.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        if self._log_w is None:
            self._log_w = np.array([log_stick_break(z) for z in self.zeta]).reshape(len(self), self.L)
        return self._log_w

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __getitem__(self, i) -> MixtureState:
        row = self.psi[i]
        psi = Hyperparams.from_array(row) if row.size == 10 and np.all(np.isfinite(row)) else None
        return MixtureState(self.mu_x[i], self.mu_y[i], self.beta[i], self.delta_x[i],
                            self.delta_y[i], zeta=self.zeta[i], alpha=float(self.alpha[i]), psi=psi)

    def states(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, idx) -> "PosteriorDraws":
        idx = np.atleast_1d(np.arange(len(self))[idx])
        return type(self)(self.mu_x[idx], self.mu_y[idx], self.beta[idx], self.delta_x[idx],
                          self.delta_y[idx], self.zeta[idx], self.alpha[idx], self.psi[idx],
                          self.iterations[idx], dict(self.meta))

    @classmethod
    def concatenate(cls, parts) -> "PosteriorDraws":
        parts = list(parts)
        cat = {name: np.concatenate([getattr(p, name) for p in parts])
               for name in ("mu_x", "mu_y", "beta", "delta_x", "delta_y", "zeta", "alpha",
                            "psi", "iterations")}
        return cls(**cat, meta=dict(parts[0].meta))

    @classmethod
    def from_states(cls, states, meta=None) -> "PosteriorDraws":
        states = list(states)
        return cls(
            np.array([s.mu_x for s in states]), np.array([s.mu_y for s in states]),
            np.array([s.beta for s in states]), np.array([s.delta_x for s in states]),
            np.array([s.delta_y for s in states]),
            np.array([s.zeta for s in states]).reshape(len(states), -1),
            np.array([s.alpha for s in states]),
            np.array([s.psi.as_array() if s.psi is not None else np.full(10, np.nan)
                      for s in states]),
            np.arange(len(states)), meta or {},
        )

    # -- vectorized evaluation over draws --

    def log_density_matrix(self, z, z_prev) -> np.ndarray:
        """``log f_s(z | z_prev)`` for every draw s; shape ``(S,) + broadcast shape``."""
        z, z_prev = np.broadcast_arrays(np.asarray(z, float), np.asarray(z_prev, float))
        shape = z.shape
        z, z_prev = z.reshape(-1), z_prev.reshape(-1)
        out = np.empty((len(self), z.size))
        lw = self.log_weights
        for sl in _chunks(len(self), z.size * self.L):
            mx, my, b = self.mu_x[sl, None, :], self.mu_y[sl, None, :], self.beta[sl, None, :]
            dx, dy = self.delta_x[sl, None, :], self.delta_y[sl, None, :]
            xp = z_prev[None, :, None]
            lk = lw[sl, None, :] + norm_logpdf(xp, mx, dx)
            lq = lk - logsumexp(lk, axis=-1, keepdims=True)
            lc = norm_logpdf(z[None, :, None], my - b * (xp - mx), dy)
            out[sl] = logsumexp(lq + lc, axis=-1)
        return out.reshape((len(self),) + shape)

    def log_density_rows(self, z, z_prev) -> np.ndarray:
        """``log f_s(z_g | z_prev[s, p])`` with a per-draw ``z_prev`` of shape ``(S, P)``.

        Returns shape ``(S, P, G)`` for a 1-d grid ``z`` of length G.
        """
        z = np.asarray(z, float).reshape(-1)
        z_prev = np.asarray(z_prev, float)
        S, P = z_prev.shape
        out = np.empty((S, P, z.size))
        lw = self.log_weights
        for sl in _chunks(S, P * z.size * self.L):
            mx, my, b = self.mu_x[sl, None, :], self.mu_y[sl, None, :], self.beta[sl, None, :]
            xp = z_prev[sl, :, None]
            lk = lw[sl, None, :] + norm_logpdf(xp, mx, self.delta_x[sl, None, :])
            lq = lk - logsumexp(lk, axis=-1, keepdims=True)
            mean = (my - b * (xp - mx))[:, :, None, :]
            lc = norm_logpdf(z[None, None, :, None], mean, self.delta_y[sl, None, None, :])
            out[sl] = logsumexp(lq[:, :, None, :] + lc, axis=-1)
        return out

    def expectation_matrix(self, z_prev) -> np.ndarray:
        """Conditional expectation under every draw; shape ``(S,) + z_prev.shape``."""
        z_prev = np.asarray(z_prev, float)
        shape = z_prev.shape
        xp_flat = z_prev.reshape(-1)
        out = np.empty((len(self), xp_flat.size))
        lw = self.log_weights
        for sl in _chunks(len(self), xp_flat.size * self.L):
            mx, my, b = self.mu_x[sl, None, :], self.mu_y[sl, None, :], self.beta[sl, None, :]
            xp = xp_flat[None, :, None]
            lk = lw[sl, None, :] + norm_logpdf(xp, mx, self.delta_x[sl, None, :])
            q = np.exp(lk - logsumexp(lk, axis=-1, keepdims=True))
            out[sl] = np.sum(q * (my - b * (xp - mx)), axis=-1)
        return out.reshape((len(self),) + shape)

    def sample_next(self, z_prev, rng: np.random.Generator) -> np.ndarray:
        """One transition per draw: ``z_prev`` has shape ``(S, P)``."""
        z_prev = np.asarray(z_prev, float)
        S, P = z_prev.shape
        xp = z_prev[:, :, None]
        mx, my, b = self.mu_x[:, None, :], self.mu_y[:, None, :], self.beta[:, None, :]
        lk = self.log_weights[:, None, :] + norm_logpdf(xp, mx, self.delta_x[:, None, :])
        q = np.exp(lk - logsumexp(lk, axis=-1, keepdims=True))
        cum = np.cumsum(q, axis=-1)
        u = rng.random((S, P, 1))
        comp = np.minimum((cum < u * cum[..., -1:]).sum(-1), self.L - 1)
        mean = np.take_along_axis(my - b * (xp - mx), comp[..., None], -1)[..., 0]
        var = np.take_along_axis(np.broadcast_to(self.delta_y[:, None, :], q.shape),
                                 comp[..., None], -1)[..., 0]
        return mean + np.sqrt(var) * rng.standard_normal((S, P))

    def occupied_counts(self) -> np.ndarray | None:
        return self.meta.get("occupied")

    # -- text export --

    def column_names(self) -> list[str]:
        names = ["iteration", "alpha"] + ["psi_" + n for n in Hyperparams.names()]
        for prefix in ("mu_x", "mu_y", "beta", "delta_x", "delta_y"):
            names += [f"{prefix}_{l + 1}" for l in range(self.L)]
        names += [f"zeta_{l + 1}" for l in range(self.L - 1)]
        return names

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([self.iterations, self.alpha, self.psi, self.mu_x, self.mu_y,
                                self.beta, self.delta_x, self.delta_y, self.zeta])

    def to_text(self) -> str:
        return write_columns(self.column_names(), self.to_matrix(), self._header_meta())

    def _header_meta(self) -> dict:
        meta = {k: v for k, v in self.meta.items() if k != "occupied"}
        meta.update(format_version=FORMAT_VERSION, model=self.model, L=self.L)
        return meta

    @classmethod
    def _from_matrix(cls, mat, meta):
        L = int(meta["L"])
        cols = np.split(mat, np.cumsum([1, 1, 10, L, L, L, L, L]), axis=1)
        it, alpha, psi, mx, my, b, dx, dy, zeta = cols
        return cls(mx, my, b, dx, dy, zeta, alpha[:, 0], psi, it[:, 0].astype(np.int64), meta)


def write_columns(names, matrix, meta: dict | None = None) -> str:
    """Columnar numeric text: ``#``-prefixed JSON metadata, a header row, full-precision rows."""
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(meta, sort_keys=True, default=_json_default) + "\n")
    buf.write(" ".join(names) + "\n")
    np.savetxt(buf, np.atleast_2d(matrix), fmt="%.17g")
    return buf.getvalue()


def read_columns(text: str):
    """Inverse of :func:`write_columns`; returns ``(names, matrix, meta)``."""
    lines = text.splitlines()
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body.startswith("{"):
            meta.update(json.loads(body))
        i += 1
    names = lines[i].split()
    mat = np.loadtxt(io.StringIO("\n".join(lines[i + 1:])), ndmin=2)
    if mat.size == 0:
        mat = np.empty((0, len(names)))
    return names, mat, meta


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o)}")


def load_draws(text: str):
    """Parse any exported draw file, dispatching on its model tag."""
    names, mat, meta = read_columns(text)
    model = meta.get("model")
    if model == "general":
        return PosteriorDraws._from_matrix(mat, meta)
    if model == "stationary":
        from .variants.stationary import StationaryDraws
        return StationaryDraws._from_matrix(mat, meta)
    if model == "tar":
        from .variants.tar import TarDraws
        return TarDraws._from_matrix(mat, meta)
    raise ValueError(f"unknown model tag {model!r}")
