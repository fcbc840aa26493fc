"""Experiment driver: parse a config file, run one experiment, persist artifacts.

Every run writes three files into the output directory:

- results.csv      machine-readable table (columns depend on the mode)
- summary.txt      human-readable digest
- provenance.json  full resolved config, seeds, package versions, wall time

CSV files are deterministic for a fixed (config, seed): numeric cells use
repr() round-trip precision, rows are emitted in a fixed order, and the
first line embeds a hash of the resolved configuration.  Wall time lives
only in the provenance record, which is allowed to differ between runs.

Config files are flat key = value text with [section] headers; see the
mode functions below for the recognized sections and keys.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bellman import SolverGrid, ValueField, solve_bellman
from .errors import AgnoctlError, ConfigError, DivergenceError, FieldIOError
from .extension import ExtensionParams, extend_strategy, robust_interval_strategy
from .filtering import DiscretePrior
from .lqr import ProblemSpec, known_a_expected_cost
from .regret import (MinimaxConfig, RegretKind, dyadic_net,
                     minimax_prior_search, worst_case_regret)
from .simulate import (CertaintyEquivalentStrategy, FieldStrategy,
                       KnownAStrategy, Partition, estimate_cost, run_batch)

MODES = ("known-a", "bayes", "regret-profile", "minimax", "extend")


# ---------------------------------------------------------------------------
# config plumbing

class Config:
    """Typed access to a flat section/key config with error context."""

    def __init__(self, parser: configparser.ConfigParser):
        self._p = parser

    def _raw(self, section: str, key: str, default=None, required=False):
        if self._p.has_option(section, key):
            return self._p.get(section, key)
        if required:
            raise ConfigError(f"missing config key [{section}] {key}")
        return default

    def get_float(self, section, key, default=None, required=False) -> float | None:
        raw = self._raw(section, key, default=None, required=required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None

    def get_int(self, section, key, default=None, required=False) -> int | None:
        raw = self._raw(section, key, default=None, required=required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None

    def get_str(self, section, key, default=None, required=False) -> str | None:
        raw = self._raw(section, key, default=None, required=required)
        return default if raw is None else raw.strip()

    def get_floats(self, section, key, default=None, required=False):
        raw = self._raw(section, key, default=None, required=required)
        if raw is None:
            return default
        try:
            return [float(tok) for tok in raw.split()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a list of numbers") from None

    def resolved_items(self):
        for section in sorted(self._p.sections()):
            for key in sorted(self._p.options(section)):
                yield section, key, self._p.get(section, key)

    def override(self, section, key, value):
        if not self._p.has_section(section):
            self._p.add_section(section)
        self._p.set(section, key, str(value))


def load_config(path: Path) -> Config:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return Config(parser)


def config_hash(cfg: Config, mode: str) -> str:
    lines = [f"mode={mode}"]
    lines += [f"{s}.{k}={v}" for s, k, v in cfg.resolved_items()]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# shared pieces

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return repr(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, hash_: str, header: list[str], rows) -> None:
    lines = [f"# config_hash={hash_}", ",".join(header)]
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _problem(cfg: Config):
    T = cfg.get_float("problem", "T", 1.0)
    q0 = cfg.get_float("problem", "q0", 1.0)
    if T <= 0:
        raise ConfigError("[problem] T must be positive")
    return T, q0


def _mc(cfg: Config, T: float):
    n_paths = cfg.get_int("mc", "n_paths", 10000)
    dt = cfg.get_float("mc", "dt", 1e-3)
    seed = cfg.get_int("mc", "seed", 0)
    if n_paths < 2 or dt <= 0:
        raise ConfigError("[mc] n_paths must be >= 2 and dt positive")
    return n_paths, Partition.from_dt(T, dt), seed


def _net(cfg: Config, required=True):
    points = cfg.get_floats("net", "points")
    if points is not None:
        if not points:
            raise ConfigError("[net] points is empty")
        return np.unique(np.asarray(points, dtype=float))
    n = cfg.get_int("net", "n")
    if n is not None:
        a_max = cfg.get_float("problem", "a_max", 1.0)
        return dyadic_net(a_max, n)
    if required:
        raise ConfigError("config needs [net] points or [net] n")
    return None


def _prior(cfg: Config) -> DiscretePrior:
    atoms = cfg.get_floats("prior", "atoms", required=True)
    weights = cfg.get_floats("prior", "weights")
    if weights is None:
        weights = [1.0 / len(atoms)] * len(atoms)
    if len(weights) != len(atoms):
        raise ConfigError("[prior] atoms and weights disagree in length")
    return DiscretePrior.from_pairs(zip(atoms, weights))


def _grid(cfg: Config, T: float) -> SolverGrid:
    return SolverGrid.create(
        Q=cfg.get_float("grid", "Q", 5.0),
        Z1=cfg.get_float("grid", "Z1", 8.0),
        Z2=cfg.get_float("grid", "Z2", 8.0),
        T=T,
        n_q=cfg.get_int("grid", "n_q", 121),
        n_z1=cfg.get_int("grid", "n_z1", 31),
        n_z2=cfg.get_int("grid", "n_z2", 3),
        n_t=cfg.get_int("grid", "n_t", 51),
    )


def _regret_kind(cfg: Config) -> RegretKind:
    tag = cfg.get_str("regret", "kind", "hybrid")
    if tag == "hybrid":
        return RegretKind.hybrid(cfg.get_float("regret", "gamma", 1.0))
    return RegretKind(tag)


# ---------------------------------------------------------------------------
# modes

def run_known_a(cfg: Config, args, out: Path, hash_: str):
    T, q0 = _problem(cfg)
    net = _net(cfg, required=False)
    if net is None:
        a = cfg.get_float("problem", "a", required=True)
        net = np.array([a])
    n_paths, part, seed = _mc(cfg, T)
    rows, lines = [], []
    for a in net:
        a = float(a)
        closed = known_a_expected_cost(ProblemSpec(a, T, q0))
        est = estimate_cost(KnownAStrategy(a, T), a, part, q0, n_paths, seed)
        rows.append((a, closed, est.mean, est.std_error, est.n_paths))
        lines.append(f"a={a:g}: closed-form {closed:.6f}, "
                     f"MC {est.mean:.6f} +/- {est.std_error:.6f}")
    write_csv(out / "results.csv", hash_,
              ["a", "closed_form", "mc_mean", "mc_stderr", "n_paths"], rows)
    return lines


def run_bayes(cfg: Config, args, out: Path, hash_: str):
    T, q0 = _problem(cfg)
    prior = _prior(cfg)
    if args.load_field:
        field = ValueField.load(args.load_field)
    else:
        field = solve_bellman(prior, _grid(cfg, T))
    if args.save_field:
        field.save(args.save_field)
    n_paths, part, seed = _mc(cfg, T)
    strat = FieldStrategy(field)
    rows = []
    prior_mean = prior_se2 = 0.0
    for a, w in zip(prior.atoms, prior.weights):
        est = estimate_cost(strat, float(a), part, q0, n_paths, seed)
        rows.append((float(a), est.mean, est.std_error))
        prior_mean += w * est.mean
        prior_se2 += (w * est.std_error) ** 2
    write_csv(out / "results.csv", hash_, ["a", "ecost", "stderr"], rows)
    value = field.bayes_value(q0)
    return [
        f"prior: " + " ".join(f"({a:g}, {w:g})" for a, w in zip(prior.atoms, prior.weights)),
        f"solver value S(q0,0,0,0) = {value:.6f}",
        f"MC prior-cost = {prior_mean:.6f} +/- {prior_se2 ** 0.5:.6f}",
        f"floored interior nodes: {field.diagnostics.get('floored_fraction', 0.0):.2e}",
    ]


def run_regret_profile(cfg: Config, args, out: Path, hash_: str):
    T, q0 = _problem(cfg)
    net = _net(cfg)
    kind = _regret_kind(cfg)
    n_paths, part, seed = _mc(cfg, T)
    if args.load_field:
        strat = FieldStrategy(ValueField.load(args.load_field))
        label = f"field {args.load_field}"
    else:
        a = cfg.get_float("problem", "a", required=True)
        strat = KnownAStrategy(a, T)
        label = f"known-a({a:g})"
    sup, argmax, profile = worst_case_regret(strat, net, kind, T, q0, part, n_paths, seed)
    rows = [(float(a), r.value, r.std_error, float(a) in argmax)
            for a, r in zip(net, profile)]
    write_csv(out / "results.csv", hash_, ["a", "regret", "stderr", "is_argmax"], rows)
    return [
        f"strategy: {label}",
        f"regret kind: {kind.tag}" + (f" gamma={kind.gamma:g}" if kind.gamma else ""),
        f"sup regret over {net.size}-point net: {sup:.6f}",
        "argmax set: " + " ".join(f"{a:g}" for a in argmax),
    ]


def run_minimax(cfg: Config, args, out: Path, hash_: str):
    T, q0 = _problem(cfg)
    net = _net(cfg)
    kind = _regret_kind(cfg)
    n_paths, part, seed = _mc(cfg, T)
    mm = MinimaxConfig(
        epsilon=cfg.get_float("minimax", "epsilon", 0.05),
        max_rounds=cfg.get_int("minimax", "max_rounds", 30),
        grid=_grid(cfg, T) if net.size > 1 else None,
        n_paths=n_paths,
        dt=part.T / part.n_steps,
        seed=seed,
    )
    sol = minimax_prior_search(net, kind, T, q0, mm)
    write_csv(out / "results.csv", hash_, ["a", "regret", "stderr"], sol.csv_rows())
    write_csv(out / "prior.csv", hash_, ["a", "weight"],
              zip(map(float, sol.prior.atoms), map(float, sol.prior.weights)))
    if args.save_field and sol.field is not None:
        sol.field.save(args.save_field)
    return sol.report().rstrip("\n").split("\n")


def run_extend(cfg: Config, args, out: Path, hash_: str):
    T, q0 = _problem(cfg)
    a_max = cfg.get_float("problem", "a_max", 1.0)
    params = ExtensionParams(
        a_max=a_max,
        eps=cfg.get_float("extension", "eps", 0.5),
        confidence_c=cfg.get_float("extension", "confidence_c", 1.0),
        hysteresis_margin=cfg.get_float("extension", "hysteresis_margin"),
        ridge=cfg.get_float("extension", "ridge", 0.025),
        zeta2_min=cfg.get_float("extension", "zeta2_min", 0.03),
    )
    gain_margin = cfg.get_float("extension", "gain_margin", 3.0)
    inner = robust_interval_strategy(a_max, T, gain_margin)
    strat = extend_strategy(inner, params, T)
    a_values = cfg.get_floats("extension", "a_values", required=True)
    n_paths, part, seed = _mc(cfg, T)
    rows, lines = [], []
    for a in a_values:
        a = float(a)
        batch = run_batch(strat, a, part, q0, n_paths, seed)
        mean = float(np.nanmean(batch.costs))
        se = float(np.nanstd(batch.costs, ddof=1) / np.sqrt(n_paths))
        opt = known_a_expected_cost(ProblemSpec(a, T, q0))
        switched = batch.events["switch_count"] > 0
        med = float(np.median(np.where(switched, batch.events["switched_at"], np.inf)))
        rows.append((a, mean, se, opt, mean / opt, float(switched.mean()), med))
        lines.append(f"a={a:g}: cost {mean:.4f} +/- {se:.4f}, ratio {mean / opt:.3f}, "
                     f"switched {switched.mean():.1%}")
    write_csv(out / "results.csv", hash_,
              ["a", "ecost", "stderr", "opt_cost", "ratio",
               "switch_fraction", "median_switch_time"], rows)
    return lines


RUNNERS = {
    "known-a": run_known_a,
    "bayes": run_bayes,
    "regret-profile": run_regret_profile,
    "minimax": run_minimax,
    "extend": run_extend,
}


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agnoctl",
        description="Run one control experiment described by a config file.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--save-field", type=Path, default=None,
                        help="write the solved value field to this path")
    parser.add_argument("--load-field", type=Path, default=None,
                        help="reuse a previously saved value field")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: [output] dir or '.')")
    parser.add_argument("--seed", type=int, default=None,
                        help="override [mc] seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.time()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.override("mc", "seed", args.seed)
        out = args.out or Path(cfg.get_str("output", "dir", "."))
        out.mkdir(parents=True, exist_ok=True)
        hash_ = config_hash(cfg, args.mode)
        summary_lines = RUNNERS[args.mode](cfg, args, out, hash_)
    except ConfigError as exc:
        print(f"agnoctl: config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"agnoctl: numerical divergence: {exc}", file=sys.stderr)
        return 3
    except (FieldIOError, OSError) as exc:
        print(f"agnoctl: i/o error: {exc}", file=sys.stderr)
        return 4
    except AgnoctlError as exc:
        print(f"agnoctl: error: {exc}", file=sys.stderr)
        return 1

    wall = time.time() - start
    summary = "\n".join(
        [f"agnoctl {args.mode}", f"config_hash: {hash_}"] + summary_lines) + "\n"
    (out / "summary.txt").write_text(summary)
    provenance = {
        "mode": args.mode,
        "config_hash": hash_,
        "config": {f"{s}.{k}": v for s, k, v in cfg.resolved_items()},
        "seed_override": args.seed,
        "versions": {
            "agnoctl": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_seconds": wall,
    }
    (out / "provenance.json").write_text(json.dumps(provenance, indent=2) + "\n")
    print(summary, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
