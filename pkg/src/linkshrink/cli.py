"""Command-line entry points: fit, shapley, importance, simulate, evaluate.

Every command reads an optional key-value config file, lets flags override
it, writes the fully resolved settings next to its outputs, and exits 0 on
success, 2 on usage or data errors, 1 on internal errors. Output files are
plain delimiter-separated tables with deterministic content, so re-running
a command from its resolved config reproduces them byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import dataio
from .design import apply_feature_map, fit_feature_map
from .diagnostics import compute_diagnostics
from .errors import DataError, InternalError
from .evaluate import ProtocolConfig, run_protocol, write_report
from .importance import (
    global_importance,
    importance_table,
    unit_effect_posterior,
    unit_effect_table,
)
from .model import BAYLOC, VARIANTS, ModelSpec
from .reference_ols import coefficient_names
from .sampler import PosteriorDraws, SamplerConfig, posterior_summary, run_sampler
from .shapley import (
    ShapleyQuery,
    aggregate_columns,
    result_table,
    shapley_bruteforce,
    shapley_fast,
    shapley_posterior,
)
from .synth import SynthConfig, Structure, default_truth, generate_master, linked_truth
from .synth import split_training_sets

THREADS_ENV = "LINKSHRINK_THREADS"
_REQUIRED = object()
_ORACLE_MAX_COVARIATES = 12
_ORACLE_TOLERANCE = 1e-8


def _cast_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise DataError(f"cannot parse {text!r} as a boolean")


def _cast_levels(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise DataError(f"cannot parse {text!r} as comma-separated level counts") from None


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DataError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# (dest, cast, default) per command; _REQUIRED means the merge must supply it.
_DATA_OPTS = [
    ("input", str, _REQUIRED),
    ("schema", str, _REQUIRED),
    ("response", str, None),
]
_SAMPLER_OPTS = [
    ("variant", str, "bayint"),
    ("chains", int, 4),
    ("warmup", int, 2500),
    ("keep", int, 2500),
    ("thin", int, 1),
    ("seed", int, 0),
    ("threads", int, None),
    ("level", float, 0.95),
    ("standardize_response", _cast_bool, False),
]
_SYNTH_OPTS = [
    ("n_master", int, 21570),
    ("n_train", int, 1000),
    ("subsets", int, 25),
    ("noise_sd", float, 1.0),
    ("seed", int, 0),
    ("truth", str, "default"),
    ("continuous", int, 3),
    ("binary", int, 3),
    ("categorical", _cast_levels, (5,)),
    ("noise", int, 4),
]

COMMAND_OPTS = {
    "fit": _DATA_OPTS
    + _SAMPLER_OPTS
    + [("dump_draws", _cast_bool, False), ("out", str, _REQUIRED)],
    "shapley": _DATA_OPTS
    + _SAMPLER_OPTS
    + [
        ("test_input", str, None),
        ("draws", str, None),
        ("max_rows", int, 100),
        ("covariates", str, None),
        ("oracle", _cast_bool, False),
        ("out", str, _REQUIRED),
    ],
    "importance": _DATA_OPTS
    + _SAMPLER_OPTS
    + [
        ("test_input", str, None),
        ("draws", str, None),
        ("max_rows", int, 100),
        ("covariate", str, None),
        ("stratify", str, None),
        ("per_draw", _cast_bool, False),
        ("out", str, _REQUIRED),
    ],
    "simulate": _SYNTH_OPTS + [("out", str, _REQUIRED)],
    "evaluate": _SYNTH_OPTS
    + [
        ("methods", str, "bayint,ols,twostep"),
        ("chains", int, 2),
        ("warmup", int, 500),
        ("keep", int, 500),
        ("thin", int, 1),
        ("threads", int, None),
        ("level", float, 0.95),
        ("coverage", _cast_bool, False),
        ("n_test", int, 2000),
        ("n_individuals", int, 100),
        ("out", str, _REQUIRED),
    ],
}


class Settings:
    """Resolved command settings, attribute per option."""

    def __init__(self, values: dict):
        self.__dict__.update(values)


def resolve_settings(command: str, args: argparse.Namespace) -> Settings:
    """Merge flags over config-file values over defaults."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise DataError(f"config file not found: {args.config}")
        file_values = dataio.read_key_values(args.config)
    resolved = {}
    for dest, cast, default in COMMAND_OPTS[command]:
        flag = getattr(args, dest, None)
        if flag is not None:
            resolved[dest] = flag
        elif dest in file_values:
            raw = file_values[dest]
            try:
                resolved[dest] = cast(raw)
            except (ValueError, TypeError):
                raise DataError(
                    f"config value {dest} = {raw!r} is not a valid {cast.__name__}"
                ) from None
        elif default is _REQUIRED:
            raise DataError(f"missing required setting '{dest}'")
        else:
            resolved[dest] = default
    if "threads" in resolved and resolved["threads"] is None:
        resolved["threads"] = _default_threads()
    return Settings(resolved)


def write_resolved_config(command: str, s: Settings, out_dir: str) -> None:
    items: dict[str, object] = {"command": command}
    for dest, _, _ in COMMAND_OPTS[command]:
        value = getattr(s, dest)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        items[dest] = value
    dataio.write_key_values(os.path.join(out_dir, "config.txt"), items)


def _prepare_out(s: Settings) -> str:
    out = s.out
    os.makedirs(out, exist_ok=True)
    return out


def _read_test_rows(path: str, schema: dataio.Schema):
    """Read a covariate file that may legitimately omit the response column."""
    _, table = dataio.read_table(path)
    entries = tuple(
        e for e in schema.entries if e[1] != "response" or e[0] in table
    )
    return dataio.build_dataset(table, dataio.Schema(entries), require_response=False)


def _original_scale(draws: PosteriorDraws) -> PosteriorDraws:
    """Map draws back to the raw response scale; identity when unscaled."""
    s = draws.response_scale
    o = draws.response_offset
    if s == 1.0 and o == 0.0:
        return draws
    return dataclasses.replace(
        draws,
        alpha=o + s * draws.alpha,
        beta_main=s * draws.beta_main,
        beta_int=s * draws.beta_int,
        sigma2=s * s * draws.sigma2,
        response_offset=0.0,
        response_scale=1.0,
    )


def _fit_draws(s: Settings, X, y) -> PosteriorDraws:
    offset, scale = 0.0, 1.0
    if s.standardize_response:
        offset = float(np.mean(y))
        scale = float(np.std(y))
        if scale == 0.0:
            raise DataError("response is constant; cannot standardize")
        y = (y - offset) / scale
    cfg = SamplerConfig(
        n_chains=s.chains,
        n_warmup=s.warmup,
        n_keep=s.keep,
        thin=s.thin,
        seed=s.seed,
        n_threads=s.threads,
    )
    draws = run_sampler(
        ModelSpec(s.variant), X, y, cfg, response_offset=offset, response_scale=scale
    )
    return _original_scale(draws)


def _dump_parameter_names(spec: ModelSpec, fmap) -> list[str]:
    names = ["alpha"]
    names += [f"b_{n}" for n in fmap.main_names]
    names += [f"b_{n}" for n in fmap.interaction_names]
    names += [f"tau_{n}" for n in fmap.main_names]
    if spec.variant == BAYLOC:
        names += [f"tau_{n}" for n in fmap.interaction_names]
    if spec.has_tau_int:
        names.append("tau_int")
    names.append("sigma2")
    return names


def _write_draws(path: str, draws: PosteriorDraws) -> None:
    mat = draws.parameter_matrix()
    header = ["chain", "draw"] + draws.parameter_names()
    cols = [draws.chain_ids, draws.draw_index]
    cols += [mat[:, i] for i in range(mat.shape[1])]
    dataio.write_table(path, header, cols)


def _load_draws(path: str, spec: ModelSpec, fmap) -> PosteriorDraws:
    """Rebuild posterior draws from a dump written by the fit command."""
    if not os.path.exists(path):
        raise DataError(f"draws file not found: {path}")
    _, table = dataio.read_table(path)
    needed = ["chain", "draw"] + _dump_parameter_names(spec, fmap)
    for name in needed:
        if name not in table:
            raise DataError(
                f"draws file {path} lacks column '{name}'; was it written "
                f"with variant '{spec.variant}' on this dataset?"
            )

    def fcol(name):
        return np.array([float(v) for v in table[name]])

    q = fmap.q
    beta_main = np.column_stack([fcol(f"b_{n}") for n in fmap.main_names])
    beta_int = (
        np.column_stack([fcol(f"b_{n}") for n in fmap.interaction_names])
        if q
        else np.zeros((beta_main.shape[0], 0))
    )
    tau_names = [f"tau_{n}" for n in fmap.main_names]
    if spec.variant == BAYLOC:
        tau_names += [f"tau_{n}" for n in fmap.interaction_names]
    tau = np.column_stack([fcol(n) for n in tau_names])
    tau_int = fcol("tau_int") if spec.has_tau_int else None
    return PosteriorDraws(
        spec=spec,
        feature_map=fmap,
        alpha=fcol("alpha"),
        beta_main=beta_main,
        beta_int=beta_int,
        tau=tau,
        tau_int=tau_int,
        sigma2=fcol("sigma2"),
        chain_ids=np.array([int(v) for v in table["chain"]]),
        draw_index=np.array([int(v) for v in table["draw"]]),
        counters={},
    )


def cmd_fit(s: Settings) -> int:
    out = _prepare_out(s)
    data, _ = dataio.read_dataset(s.input, s.schema, s.response)
    fmap = fit_feature_map(data)
    X = apply_feature_map(fmap, data)
    draws = _fit_draws(s, X, data.response)

    summary = posterior_summary(draws, s.level)
    coef_names = coefficient_names(fmap)
    idx = [summary.names.index(n) for n in coef_names]
    dataio.write_table(
        os.path.join(out, "coefficients.tsv"),
        ["coefficient", "mean", "sd", "lower", "upper"],
        [
            np.asarray(coef_names, dtype=object),
            summary.mean[idx],
            summary.sd[idx],
            summary.lower[idx],
            summary.upper[idx],
        ],
    )
    scale_idx = [i for i, n in enumerate(summary.names) if n not in coef_names]
    dataio.write_table(
        os.path.join(out, "scales.tsv"),
        ["parameter", "mean", "sd", "lower", "upper"],
        [
            np.asarray([summary.names[i] for i in scale_idx], dtype=object),
            summary.mean[scale_idx],
            summary.sd[scale_idx],
            summary.lower[scale_idx],
            summary.upper[scale_idx],
        ],
    )

    diags = compute_diagnostics(draws)
    rhat = (
        diags.rhat
        if diags.rhat is not None
        else np.full(len(diags.parameter_names), np.nan)
    )
    dataio.write_table(
        os.path.join(out, "diagnostics.tsv"),
        ["parameter", "rhat", "ess"],
        [np.asarray(diags.parameter_names, dtype=object), rhat, diags.ess],
    )

    if s.dump_draws:
        _write_draws(os.path.join(out, "draws.tsv"), draws)
    write_resolved_config("fit", s, out)
    return 0


def _query_and_draws(s: Settings):
    """Shared plumbing for the explanation commands."""
    need_fit = s.draws is None
    schema = dataio.parse_schema(s.schema)
    if need_fit:
        data, schema = dataio.read_dataset(s.input, s.schema, s.response)
    else:
        data = _read_test_rows(s.input, schema)
    fmap = fit_feature_map(data)
    X_pop = apply_feature_map(fmap, data)

    if s.test_input is not None:
        test_data = _read_test_rows(s.test_input, schema)
        X_test = apply_feature_map(fmap, test_data)
        individuals = X_test.X_main
    else:
        test_data = data.subset(np.arange(min(s.max_rows, data.n_rows)))
        individuals = X_pop.X_main[: s.max_rows]

    query = ShapleyQuery.from_design(X_pop, individuals)
    spec = ModelSpec(s.variant)
    if need_fit:
        draws = _fit_draws(s, X_pop, data.response)
    else:
        draws = _load_draws(s.draws, spec, fmap)
    return fmap, query, draws, test_data


def _posterior_mean_state(draws: PosteriorDraws):
    state = draws.state(0)
    state.alpha = float(draws.alpha.mean())
    state.beta_main = draws.beta_main.mean(axis=0)
    state.beta_int = draws.beta_int.mean(axis=0)
    return state


def _check_oracle(fmap, query, draws) -> None:
    if fmap.p_covariates > _ORACLE_MAX_COVARIATES:
        raise DataError(
            f"--oracle enumerates subsets and supports at most "
            f"{_ORACLE_MAX_COVARIATES} covariates, got {fmap.p_covariates}"
        )
    state = _posterior_mean_state(draws)
    fast = aggregate_columns(shapley_fast(state, query), fmap)
    brute = shapley_bruteforce(state, query)
    gap = float(np.max(np.abs(fast.phi - brute.phi)))
    if gap > _ORACLE_TOLERANCE:
        raise InternalError(
            f"fast attribution deviates from the subset oracle by {gap:.3e}"
        )


def cmd_shapley(s: Settings) -> int:
    out = _prepare_out(s)
    fmap, query, draws, _ = _query_and_draws(s)
    if s.oracle:
        _check_oracle(fmap, query, draws)
    result = shapley_posterior(draws, query, s.level)

    header, cols = result_table(result)
    if s.covariates is not None:
        wanted = [c.strip() for c in s.covariates.split(",") if c.strip()]
        valid = set(result.covariate_names)
        for name in wanted:
            if name not in valid:
                hint = (
                    "it is the response column"
                    if name == (dataio.parse_schema(s.schema).response or "")
                    else f"known covariates: {', '.join(result.covariate_names)}"
                )
                raise DataError(f"no attribution for '{name}'; {hint}")
        keep = np.isin(np.asarray(cols[1], dtype=object), wanted)
        cols = [np.asarray(c)[keep] for c in cols]
    dataio.write_table(os.path.join(out, "shapley.tsv"), header, cols)
    write_resolved_config("shapley", s, out)
    return 0


def cmd_importance(s: Settings) -> int:
    out = _prepare_out(s)
    fmap, query, draws, test_data = _query_and_draws(s)

    imp = global_importance(draws, query, per_draw=s.per_draw)
    header, cols = importance_table(imp)
    dataio.write_table(os.path.join(out, "importance.tsv"), header, cols)

    if s.covariate is not None:
        names = list(fmap.covariate_names)
        if s.covariate not in names:
            schema_resp = dataio.parse_schema(s.schema).response
            if s.covariate == schema_resp:
                raise DataError(
                    f"'{s.covariate}' is the response column; unit effects "
                    "are defined for covariates only"
                )
            raise DataError(
                f"unknown covariate '{s.covariate}'; known: {', '.join(names)}"
            )
        j = names.index(s.covariate)
        eff = unit_effect_posterior(draws, query.individuals, j, s.level)
        strat_name = None
        strat_vals = None
        if s.stratify is not None:
            if s.stratify not in [c.name for c in test_data.columns]:
                raise DataError(f"unknown stratifier column '{s.stratify}'")
            strat_name = s.stratify
            strat_vals = test_data.column(s.stratify).values
        eheader, ecols = unit_effect_table(eff, strat_name, strat_vals)
        dataio.write_table(os.path.join(out, "unit_effects.tsv"), eheader, ecols)

    write_resolved_config("importance", s, out)
    return 0


def _synth_config(s: Settings) -> SynthConfig:
    structure = Structure(
        n_continuous=s.continuous,
        n_binary=s.binary,
        categorical_levels=tuple(s.categorical),
        n_noise=s.noise,
    )
    return SynthConfig(
        N_master=s.n_master,
        n_train=s.n_train,
        B=s.subsets,
        structure=structure,
        noise_sd=s.noise_sd,
        seed=s.seed,
    )


def _truth_fn(name: str):
    if name == "default":
        return default_truth
    if name == "linked":
        return linked_truth
    raise DataError(f"unknown truth sampler '{name}' (expected default or linked)")


def cmd_simulate(s: Settings) -> int:
    out = _prepare_out(s)
    cfg = _synth_config(s)
    master = generate_master(cfg, truth_fn=_truth_fn(s.truth))
    dataset = master.dataset

    header = [c.name for c in dataset.columns] + ["y"]
    cols = [c.values for c in dataset.columns] + [dataset.response]
    dataio.write_table(os.path.join(out, "dataset.tsv"), header, cols)

    entries = tuple((c.name, c.kind) for c in dataset.columns) + (("y", "response"),)
    dataio.write_schema(os.path.join(out, "schema.txt"), dataio.Schema(entries))

    dataio.write_truth(
        os.path.join(out, "truth.tsv"), master.truth_names, master.truth
    )

    blocks = split_training_sets(dataset, cfg)
    subset_ids = np.concatenate(
        [np.full(len(b), i, dtype=np.int64) for i, b in enumerate(blocks)]
    )
    rows = np.concatenate(blocks)
    dataio.write_table(
        os.path.join(out, "subsets.tsv"), ["subset", "row"], [subset_ids, rows]
    )
    write_resolved_config("simulate", s, out)
    return 0


def cmd_evaluate(s: Settings) -> int:
    out = _prepare_out(s)
    cfg = _synth_config(s)
    master = generate_master(cfg, truth_fn=_truth_fn(s.truth))
    methods = tuple(m.strip() for m in s.methods.split(",") if m.strip())
    proto = ProtocolConfig(
        methods=methods,
        sampler=SamplerConfig(
            n_chains=s.chains,
            n_warmup=s.warmup,
            n_keep=s.keep,
            thin=s.thin,
            seed=s.seed,
            n_threads=s.threads,
        ),
        level=s.level,
        coverage=s.coverage,
        n_test=s.n_test,
        n_individuals=s.n_individuals,
    )
    report = run_protocol(master, cfg, proto)
    write_report(report, out)
    dataio.write_truth(
        os.path.join(out, "truth.tsv"), master.truth_names, master.truth
    )
    write_resolved_config("evaluate", s, out)
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "shapley": cmd_shapley,
    "importance": cmd_importance,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def _add_option(parser: argparse.ArgumentParser, dest: str, cast) -> None:
    flag = "--" + dest.replace("_", "-")
    if cast is _cast_bool:
        parser.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction)
    elif cast is _cast_levels:
        parser.add_argument(flag, dest=dest, type=_cast_levels)
    else:
        parser.add_argument(flag, dest=dest, type=cast)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkshrink",
        description=(
            "Bayesian regression with all two-way interactions under linked "
            "shrinkage, with exact attribution values and an evaluation harness."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "sample the posterior and write coefficient and diagnostic tables",
        "shapley": "posterior attribution values for test individuals",
        "importance": "global importance and personalized unit-change effects",
        "simulate": "generate a synthetic master dataset with known truth",
        "evaluate": "repeated-subset method comparison against a master benchmark",
    }
    for command, opts in COMMAND_OPTS.items():
        p = sub.add_parser(command, help=helps[command])
        p.add_argument("--config", help="key-value settings file; flags override it")
        for dest, cast, _ in opts:
            _add_option(p, dest, cast)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args.command, args)
        return _COMMANDS[args.command](settings)
    except DataError as err:
        _print_error("data", err)
        return 2
    except OSError as err:
        _print_error("data", err)
        return 2
    except InternalError as err:
        _print_error("internal", err)
        return 1
    except Exception as err:  # noqa: BLE001 - last-resort boundary
        _print_error("internal", err)
        return 1


def _print_error(kind: str, err: Exception) -> None:
    message = " ".join(str(err).split())
    print(f"linkshrink: error: {kind}: {message}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
