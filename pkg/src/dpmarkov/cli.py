"""Command-line interface: ``dpmarkov simulate | fit | predict | ppo | compare``.

Outputs go to ``--out-dir``, else ``$DPMARKOV_OUTPUT_DIR``, else the current
directory.  Exit codes: 0 success, 1 invalid input or configuration,
2 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import inference
from .draws import PosteriorDraws, load_draws
from .io import dumps_json, format_series, read_series, write_json, write_text
from .priors import DataProxy, HyperpriorConfig, default_priors
from .sampler import (InitializationError, SamplerSettings, SliceSamplerError, advance,
                      assemble, initial_state, load_checkpoint, save_checkpoint, series_summary, sweep,
                      validate_series)
from .simulate import simulate_brownian, simulate_from_model, simulate_skew_normal_series
from .variants.stationary import StationaryDraws, initial_state_stationary, sweep_stationary
from .variants.tar import TarDraws, TarPriors, initial_state_tar, sweep_tar

logger = logging.getLogger("dpmarkov")

OUTPUT_ENV = "DPMARKOV_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
MODELS = ("general", "stationary", "tar")

# settings of the reported experiments: thin 20 after burn-in, 5,000 retained draws, L = 30
PAPER_DEFAULTS = {
    "brownian": {"L": 30, "n_iterations": 120_000, "burn_in": 20_000, "thin": 20},
    "skewnormal": {"L": 30, "n_iterations": 120_000, "burn_in": 20_000, "thin": 20},
    "faithful": {"L": 30, "n_iterations": 120_000, "burn_in": 20_000, "thin": 20,
                 "column": "waiting"},
}


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Everything ``fit`` needs; serializes to a JSON config file."""

    model: str = "general"
    data: str | None = None
    column: str | None = None
    L: int = 30
    prior_shape: float = 2.0
    a_alpha: float = 0.5
    b_alpha: float = 0.5
    center: float | None = None
    data_range: float | None = None
    prior_overrides: dict = field(default_factory=dict)
    tar_priors: dict = field(default_factory=dict)
    n_iterations: int = 120_000
    burn_in: int = 20_000
    thin: int = 20
    rw_scale_mu_x: float | None = None
    rw_scale_log_delta_x: float | None = None
    adapt: bool = True
    seed: int = 0
    chains: int = 1
    checkpoint_every: int = 0

    def validate(self):
        problems = []
        if self.model not in MODELS:
            problems.append(f"model must be one of {MODELS}")
        if self.data is not None and not os.path.exists(self.data):
            problems.append(f"data file {self.data!r} does not exist")
        if self.L < 1:
            problems.append("L must be positive")
        if self.chains < 1:
            problems.append("chains must be at least 1")
        if self.checkpoint_every < 0:
            problems.append("checkpoint_every must be non-negative")
        try:
            self.settings()
        except ValueError as exc:
            problems.append(str(exc))
        if self.model == "tar" and self.prior_overrides:
            problems.append("prior_overrides apply to the mixture models only")
        if self.model != "tar" and self.tar_priors:
            problems.append("tar_priors apply to the tar model only")
        if problems:
            raise ValidationError("invalid configuration: " + "; ".join(problems))
        return self

    def settings(self, seed=None) -> SamplerSettings:
        return SamplerSettings(self.n_iterations, self.burn_in, self.thin, self.rw_scale_mu_x,
                               self.rw_scale_log_delta_x, self.adapt,
                               self.seed if seed is None else seed)

    def hyperpriors(self, z) -> HyperpriorConfig:
        proxy = DataProxy.from_series(z)
        proxy = DataProxy(proxy.d if self.center is None else self.center,
                          proxy.r if self.data_range is None else self.data_range)
        cfg = default_priors(proxy, self.prior_shape, L=self.L, a_alpha=self.a_alpha,
                             b_alpha=self.b_alpha)
        return cfg.with_overrides(**self.prior_overrides) if self.prior_overrides else cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown configuration keys: {unknown}")
        return cls(**d)


# -- helpers --


def _out_dir(args) -> str:
    d = args.out_dir or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _read_draws(path):
    try:
        with open(path) as fh:
            return load_draws(fh.read())
    except (KeyError, IndexError) as exc:
        raise ValidationError(f"{path}: not a draws file ({exc})") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _fmt(v: float) -> str:
    return format(v, ".17g")


# -- simulate --


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise ValidationError("n must be positive")
    params = {"kind": args.kind, "n": args.n, "seed": args.seed}
    if args.kind == "brownian":
        if args.n < 2:
            raise ValidationError("brownian needs n >= 2")
        z = simulate_brownian(args.n, seed=args.seed)
    elif args.kind == "skewnormal":
        if args.n < 2:
            raise ValidationError("skewnormal needs n >= 2")
        z = simulate_skew_normal_series(args.n, args.z1, seed=args.seed)
        params["z1"] = args.z1
    else:
        if not args.draws:
            raise ValidationError("simulate model needs --draws")
        draws = _read_draws(args.draws)
        if not 0 <= args.draw_index < len(draws):
            raise ValidationError(f"draw index must lie in [0, {len(draws)})")
        params.update(z1=args.z1, draws=os.path.basename(args.draws), draw_index=args.draw_index)
        if isinstance(draws, TarDraws):
            one = TarDraws(draws.params[[args.draw_index]], draws.iterations[[args.draw_index]])
            rng = np.random.default_rng(args.seed)
            z = np.empty(args.n)
            z[0] = args.z1
            for t in range(1, args.n):
                z[t] = one.sample_next(z[t - 1:t][None], rng)[0, 0]
        else:
            general = draws.general if isinstance(draws, StationaryDraws) else draws
            z = simulate_from_model(general[args.draw_index], args.z1, args.n, seed=args.seed)
    out = args.out or os.path.join(_out_dir(args), f"{args.kind}.txt")
    write_text(out, format_series(z, header="z" if args.header else None))
    write_json(out + ".meta.json", params)
    print(f"wrote {args.n} values to {out}")
    return EXIT_OK


# -- fit --


def _build_config(args) -> RunConfig:
    base = {}
    if args.config:
        import json
        with open(args.config) as fh:
            base = json.load(fh)
    if args.paper_defaults:
        base = {**PAPER_DEFAULTS[args.paper_defaults], **base}
    if args.resume:
        base = {**base, **_checkpoint_config(args.resume)}
    cli = {
        "model": args.model, "data": args.data, "column": args.column, "L": args.L,
        "prior_shape": args.prior_shape, "a_alpha": args.a_alpha, "b_alpha": args.b_alpha,
        "center": args.center, "data_range": args.range, "n_iterations": args.iterations,
        "burn_in": args.burn_in, "thin": args.thin, "seed": args.seed, "chains": args.chains,
        "checkpoint_every": args.checkpoint_every,
    }
    if args.no_adapt:
        cli["adapt"] = False
    merged = {**base, **{k: v for k, v in cli.items() if v is not None}}
    return RunConfig.from_dict(merged).validate()


def _checkpoint_config(path) -> dict:
    """Model tag and sampler settings recorded in a checkpoint."""
    import json
    with open(path) as fh:
        doc = json.load(fh)
    out = {"model": doc.get("model", "general")}
    st = doc.get("settings") or {}
    out.update({k: st[k] for k in ("n_iterations", "burn_in", "thin", "seed", "adapt") if k in st})
    return out


_FITTERS = {
    "general": (initial_state, sweep, PosteriorDraws),
    "stationary": (initial_state_stationary, sweep_stationary, StationaryDraws),
    "tar": (initial_state_tar, sweep_tar, TarDraws),
}


def _fit_chain(cfg: RunConfig, z, seed: int, out_dir: str, suffix: str, resume_path=None,
               iterations=None):
    """Run one chain, writing draws, checkpoint, trace and a summary record.

    A resumed chain keeps the checkpoint's settings; only the total number of
    iterations may be raised with ``iterations``.
    """
    settings = cfg.settings(seed)
    init, sweep_fn, draws_cls = _FITTERS[cfg.model]
    if resume_path:
        ckpt = load_checkpoint(resume_path)
        if ckpt.state.model != cfg.model:
            raise ValidationError(f"checkpoint holds a {ckpt.state.model} chain, not {cfg.model}")
        if ckpt.series is not None and ckpt.series != series_summary(z)["sha256"]:
            raise ValidationError("checkpoint was written for a different series")
        state, previous = ckpt.state, ckpt.draws
        if ckpt.settings is not None:
            settings = SamplerSettings.from_dict(
                {**ckpt.settings.to_dict(),
                 "n_iterations": iterations or ckpt.settings.n_iterations})
    else:
        if cfg.model == "tar":
            priors = TarPriors.from_series(z)
            if cfg.tar_priors:
                priors = TarPriors.from_dict({**priors.to_dict(), **cfg.tar_priors})
            state = init(z, priors, settings)
        else:
            state = init(z, cfg.hyperpriors(z), settings)
        previous = None
    ckpt_path = os.path.join(out_dir, f"checkpoint{suffix}.json")
    fingerprint = series_summary(z)["sha256"]
    occupied = ckpt.occupied if resume_path else np.empty(0, dtype=np.int32)
    every = cfg.checkpoint_every
    stops = list(range(state.iteration + every, settings.n_iterations, every)) if every else []
    draws = previous
    for stop in stops + [settings.n_iterations]:
        keep, occ = advance(z, state, settings, sweep_fn, stop)
        draws = assemble(z, state, settings, draws_cls, keep, occ, draws, occupied) or draws
        occupied = np.concatenate([occupied, occ])
        save_checkpoint(ckpt_path, state, draws, settings, fingerprint, occupied)
    if draws is None:
        raise ValidationError("no draws retained; check burn_in, thin and iterations")
    draws.meta["settings"] = settings.to_dict()
    write_text(os.path.join(out_dir, f"draws{suffix}.txt"), draws.to_text())
    start = settings.n_iterations - occupied.size
    trace = "iteration occupied\n" + "".join(
        f"{start + i + 1} {int(k)}\n" for i, k in enumerate(occupied))
    write_text(os.path.join(out_dir, f"trace{suffix}.txt"), trace)
    acc = draws.extras.get("acceptance", {})
    summary = {
        "model": cfg.model, "seed": seed, "n_draws": len(draws), "series": series_summary(z),
        "settings": settings.to_dict(),
        "acceptance": {k: _finite_or_none(v) for k, v in acc.items()},
        "proposals": {k: np.asarray(v).tolist()
                      for k, v in draws.extras.get("proposals", {}).items()},
        "max_occupied": int(occupied.max()) if occupied.size else None,
        "slice_violations": int(draws.extras.get("slice_violations", 0)),
        "slice_checks": int(draws.extras.get("slice_checks", 0)),
    }
    if cfg.model != "tar":
        summary["L"] = int(state.L)
        summary["occupied_reached_L"] = bool(occupied.size and occupied.max() >= state.L)
    write_json(os.path.join(out_dir, f"fit{suffix}.json"), summary)
    return summary


def _finite_or_none(values):
    """Per-component rates as a JSON list; components never proposed give null."""
    arr = np.atleast_1d(np.asarray(values, float))
    return [float(v) if np.isfinite(v) else None for v in arr]


def _run_chain_job(job):
    return _fit_chain(*job)


def cmd_fit(args) -> int:
    cfg = _build_config(args)
    if cfg.data is None:
        raise ValidationError("fit needs a data file")
    z = validate_series(read_series(cfg.data, cfg.column), min_length=3)
    if cfg.model == "tar" and z.size < 5:
        raise ValidationError("tar needs at least 5 observations")
    out_dir = _out_dir(args)
    write_text(os.path.join(out_dir, "config.json"), dumps_json(cfg.to_dict()))
    if args.write_config_only:
        print(f"wrote {os.path.join(out_dir, 'config.json')}")
        return EXIT_OK
    if args.resume and cfg.chains > 1:
        raise ValidationError("--resume continues a single chain")
    jobs = [(cfg, z, cfg.seed + k, out_dir, f"_chain{k + 1}" if cfg.chains > 1 else "",
             args.resume, args.iterations) for k in range(cfg.chains)]
    if cfg.chains > 1 and args.jobs != 1:
        with ProcessPoolExecutor(max_workers=args.jobs or None) as pool:
            summaries = list(pool.map(_run_chain_job, jobs))
    else:
        summaries = [_run_chain_job(j) for j in jobs]
    for s, job in zip(summaries, jobs):
        msg = f"chain seed {s['seed']}: {s['n_draws']} draws"
        if "L" in s:
            msg += f", max occupied components {s['max_occupied']} of L={s['L']}"
            if s["occupied_reached_L"]:
                logger.warning("occupied components reached L; consider a larger truncation level")
        print(msg)
    return EXIT_OK


# -- predict --


def _grid(args, draws):
    if args.grid_min is not None or args.grid_max is not None:
        if args.grid_min is None or args.grid_max is None or not args.grid_min < args.grid_max:
            raise ValidationError("give both --grid-min and --grid-max with min < max")
        return np.linspace(args.grid_min, args.grid_max, args.grid_n)
    if args.grid_n < 2:
        raise ValidationError("grid needs at least 2 points")
    return inference.default_grid(draws, n=args.grid_n)


def cmd_predict(args) -> int:
    draws = _read_draws(args.draws)
    requested = bool(args.transition_at or args.forecast or args.expectation or args.horizon)
    if not requested:
        print("nothing requested: use --transition-at, --forecast, --expectation or --horizon")
        return EXIT_OK
    out_dir = _out_dir(args)
    grid = _grid(args, draws)
    series = draws.meta.get("series", {})
    written = []
    if args.transition_at:
        for zp in _floats(args.transition_at):
            if series:
                span = series["max"] - series["min"]
                if not series["min"] - 2 * span <= zp <= series["max"] + 2 * span:
                    logger.warning("z_prev=%s lies far outside the data range [%s, %s]", zp,
                                   series["min"], series["max"])
            res = inference.transition_grid(draws, zp, grid, args.level)
            path = os.path.join(out_dir, f"transition_{_fmt(zp)}.txt")
            write_text(path, res.to_text())
            written.append(path)
    z_n = args.z_n if args.z_n is not None else series.get("last")
    if (args.forecast or args.horizon) and z_n is None:
        raise ValidationError("draws carry no series summary; pass --z-n")
    if args.forecast:
        res = inference.forecast_density(draws, z_n, grid, args.level)
        path = os.path.join(out_dir, "forecast.txt")
        write_text(path, res.to_text())
        written.append(path)
    if args.expectation:
        res = inference.expectation_curve(draws, grid, args.level)
        path = os.path.join(out_dir, "expectation.txt")
        write_text(path, res.to_text())
        written.append(path)
    if args.horizon:
        res = inference.multi_step_forecast(draws, z_n, args.horizon, args.paths, grid,
                                            args.level, seed=args.seed)
        for k, dens in enumerate(res.densities, start=1):
            path = os.path.join(out_dir, f"multistep_h{k}.txt")
            write_text(path, dens.to_text())
            written.append(path)
        path = os.path.join(out_dir, "multistep_paths.txt")
        write_text(path, res.samples_to_text())
        written.append(path)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


# -- ppo and compare --


def _t_start(args, n):
    if args.t_start is not None and args.last is not None:
        raise ValidationError("give only one of --t-start and --last")
    t_start = args.t_start if args.t_start is not None else (
        n - args.last + 1 if args.last is not None else n - 89)
    if not 3 <= t_start <= n:
        raise ValidationError(f"t_start must lie in [3, {n}] for this series, got {t_start}")
    return t_start


def _check_series_match(draws, z, path):
    s = draws.meta.get("series")
    if s is not None and s.get("sha256") != series_summary(z)["sha256"]:
        raise ValidationError(f"{path} was fitted to a different series than the data given")


def _score(path, z, t_start):
    draws = _read_draws(path)
    _check_series_match(draws, z, path)
    res = inference.ppo(draws, z, t_start)
    if res.flagged.size:
        logger.warning("%s: non-finite log ordinates at t = %s", path, res.flagged.tolist())
    return draws, res


def cmd_ppo(args) -> int:
    z = validate_series(read_series(args.data, args.column))
    t_start = _t_start(args, z.size)
    draws, res = _score(args.draws, z, t_start)
    out = args.out or os.path.join(_out_dir(args), "ppo.txt")
    write_text(out, res.to_text())
    print(f"{draws.model}: sum of log ordinates over t = {t_start}..{z.size}: "
          f"{res.log_sum:.6f} (min ESS {np.nanmin(res.ess):.1f})")
    return EXIT_OK


def cmd_compare(args) -> int:
    z = validate_series(read_series(args.data, args.column))
    t_start = _t_start(args, z.size)
    out_dir = _out_dir(args)
    rows = []
    for k, path in enumerate(args.draws):
        draws, res = _score(path, z, t_start)
        label = f"{draws.model}_{k + 1}"
        write_text(os.path.join(out_dir, f"ppo_{label}.txt"), res.to_text())
        rows.append({"label": label, "model": draws.model, "file": os.path.basename(path),
                     "log_sum": res.log_sum, "min_ess": float(np.nanmin(res.ess)),
                     "n_flagged": int(res.flagged.size)})
    report = {"t_start": t_start, "n": int(z.size), "models": rows}
    lines = [f"# sum of log posterior predictive ordinates, t = {t_start}..{z.size}",
             "rank label model log_sum min_ess"]
    if len(rows) > 1:
        order = sorted(range(len(rows)), key=lambda i: -rows[i]["log_sum"])
        report["ranking"] = [rows[i]["label"] for i in order]
        for rank, i in enumerate(order, start=1):
            r = rows[i]
            lines.append(f"{rank} {r['label']} {r['model']} {_fmt(r['log_sum'])} {_fmt(r['min_ess'])}")
    else:
        r = rows[0]
        lines.append(f"- {r['label']} {r['model']} {_fmt(r['log_sum'])} {_fmt(r['min_ess'])}")
        lines.append("# single model: no ranking")
    write_text(os.path.join(out_dir, "compare.txt"), "\n".join(lines) + "\n")
    write_json(os.path.join(out_dir, "compare.json"), report)
    print("\n".join(lines))
    return EXIT_OK


# -- parser --


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpmarkov", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_out(sp):
        sp.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or .)")

    s = sub.add_parser("simulate", help="generate a reference series")
    s.add_argument("kind", choices=("brownian", "skewnormal", "model"))
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--z1", type=float, default=0.0, help="initial value (skewnormal, model)")
    s.add_argument("--draws", help="draws file for kind=model")
    s.add_argument("--draw-index", type=int, default=0)
    s.add_argument("--out", help="output path (default <out-dir>/<kind>.txt)")
    s.add_argument("--header", action="store_true", help="write a 'z' header line")
    common_out(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the sampler")
    f.add_argument("data", nargs="?", help="series file (single column or CSV with header)")
    f.add_argument("--column", help="column name or 0-based index")
    f.add_argument("--model", choices=MODELS)
    f.add_argument("--config", help="JSON run configuration; command-line flags override it")
    f.add_argument("--paper-defaults", choices=sorted(PAPER_DEFAULTS),
                   help="settings of the published experiment (L, run length, thinning)")
    f.add_argument("--write-config-only", action="store_true",
                   help="write the merged config.json and stop")
    f.add_argument("--L", type=int)
    f.add_argument("--prior-shape", type=float)
    f.add_argument("--a-alpha", type=float)
    f.add_argument("--b-alpha", type=float)
    f.add_argument("--center", type=float, help="data center proxy (default midrange)")
    f.add_argument("--range", type=float, help="data range proxy (default max - min)")
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--no-adapt", action="store_true")
    f.add_argument("--chains", type=int, help="independent chains with seeds seed, seed+1, ...")
    f.add_argument("--jobs", type=int, default=0, help="worker processes for --chains (0: all CPUs)")
    f.add_argument("--checkpoint-every", type=int, help="also checkpoint every N iterations")
    f.add_argument("--resume", help="checkpoint file to continue from")
    common_out(f)
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("predict", help="density, forecast and expectation summaries")
    r.add_argument("draws")
    r.add_argument("--transition-at", help="comma-separated z_prev values")
    r.add_argument("--forecast", action="store_true")
    r.add_argument("--z-n", type=float, help="conditioning value for forecasts (default last observation)")
    r.add_argument("--expectation", action="store_true")
    r.add_argument("--horizon", type=int, default=0, help="multi-step forecast horizon")
    r.add_argument("--paths", type=int, default=10, help="simulated paths per draw")
    r.add_argument("--grid-min", type=float)
    r.add_argument("--grid-max", type=float)
    r.add_argument("--grid-n", type=int, default=512)
    r.add_argument("--level", type=float, default=0.95)
    r.add_argument("--seed", type=int, default=0)
    common_out(r)
    r.set_defaults(func=cmd_predict)

    for name, fn, helptext in (("ppo", cmd_ppo, "posterior predictive ordinates of one fit"),
                               ("compare", cmd_compare, "rank fits by summed log ordinates")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("draws", nargs="+" if name == "compare" else None)
        c.add_argument("--data", required=True)
        c.add_argument("--column")
        c.add_argument("--t-start", type=int, help="first scored time index (1-based)")
        c.add_argument("--last", type=int, help="score the last N observations (default 90)")
        if name == "ppo":
            c.add_argument("--out")
        common_out(c)
        c.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InitializationError, SliceSamplerError, FloatingPointError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
