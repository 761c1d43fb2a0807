"""Command-line pipeline: one subcommand per figure-style artifact.

Every command is a pure function of its resolved configuration and the
input files; reruns produce byte-identical CSV and SVG output. Exit code
2 signals a data problem, 3 an inference degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    OUTCOME_NAMES,
    PROPORTION_OUTCOMES,
    bot_filter,
    load_lexicons,
    read_tweets_csv,
    twitter_outcomes,
    user_period_flags,
)
from .diffusion import PopulationParams, ResponseFunction, equilibria, phi, platform_probability
from .errors import (
    ConfigurationError,
    DataError,
    EmptyPlatformError,
    InferenceError,
    PanelRangeError,
)
from .events import event_panel, read_events_csv
from .inference import (
    EstimatorConfig,
    aggregation_suite,
    averaged_post_effect,
    estimate_with_placebos,
    falsification_run,
    pointwise_band,
)
from .panel import PanelSeries, PeriodCalendar, SampleRestriction, normalize_at_reference, restrict_sample
from .svgplot import LineChart

ALL_OUTCOMES = OUTCOME_NAMES + ("events",)


# ---------------------------------------------------------------------------
# configuration


def _parse_flat_config(path: Path) -> dict:
    """Flat key = value file (TOML-compatible subset); '#' starts a comment line."""
    values: dict = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigurationError(f"{path}:{line_no}: expected key = value")
            key, _, raw = stripped.partition("=")
            key = key.strip().replace("-", "_")
            raw = raw.strip()
            if raw.startswith(("\"", "'")) and raw.endswith(raw[0]) and len(raw) >= 2:
                values[key] = raw[1:-1]
                continue
            if raw.lower() in ("true", "false"):
                values[key] = raw.lower() == "true"
                continue
            try:
                values[key] = int(raw)
            except ValueError:
                try:
                    values[key] = float(raw)
                except ValueError:
                    values[key] = raw
    return values


def _config_hash(args: argparse.Namespace) -> str:
    skip = ("func", "outcomes")  # derived fields; 'outcome' carries the raw value
    items = sorted(
        (k, v) for k, v in vars(args).items() if k not in skip and not callable(v)
    )
    canon = ";".join(f"{k}={v!r}" for k, v in items)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _provenance(args: argparse.Namespace) -> str:
    return f"# synthpanel {__version__} config={_config_hash(args)}"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _write_csv(path: Path, provenance: str, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(provenance + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_svg(path: Path, chart: LineChart) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(chart.render(), encoding="utf-8")


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _default_t_min(period_days: int) -> int:
    # roughly 100 days of pre-intervention window
    return -max(3, round(100 / period_days))


def _window(args, period_days: int, data_t_min, data_t_max, pre_factor: int = 1) -> tuple[int, int]:
    """Resolve the panel window; a defaulted t_min never precedes the data."""
    if args.t_min is not None:
        t_min = args.t_min
    else:
        t_min = pre_factor * _default_t_min(period_days)
        if data_t_min is not None:
            t_min = max(t_min, min(data_t_min, -1))
    if args.t_max is not None:
        t_max = args.t_max
    else:
        t_max = max(0, data_t_max) if data_t_max is not None else 0
    return t_min, t_max


def _load_twitter_panels(args, pre_factor: int = 1) -> dict[str, PanelSeries]:
    if not args.tweets:
        raise ConfigurationError("this command needs --tweets")
    lexicons = load_lexicons(args.lexicons)
    records = bot_filter(read_tweets_csv(args.tweets), lexicons)
    cal = PeriodCalendar(anchor_date=args.anchor, period_length_days=args.period_days)
    data_ts = [
        (r.timestamp.date() - args.anchor).days // args.period_days for r in records
    ]
    t_min, t_max = _window(
        args, args.period_days,
        min(data_ts) if data_ts else None, max(data_ts) if data_ts else None,
        pre_factor,
    )
    flags = user_period_flags(records, cal, lexicons)
    if records:
        return twitter_outcomes(flags, records, cal, lexicons, periods=(t_min, t_max))
    empty = PanelSeries(
        outcome_name="", countries=(), periods=tuple(range(t_min, t_max + 1)),
        values=np.zeros((0, t_max - t_min + 1)),
    )
    return {name: empty for name in OUTCOME_NAMES}


def _load_event_panel(args, pre_factor: int = 1) -> PanelSeries:
    if not args.events:
        raise ConfigurationError("this command needs --events")
    cal = PeriodCalendar(anchor_date=args.anchor, period_length_days=args.period_days)
    records = read_events_csv(args.events)
    data_ts = [(r.date - args.anchor).days // args.period_days for r in records]
    t_min, t_max = _window(
        args, args.period_days,
        min(data_ts) if data_ts else None, max(data_ts) if data_ts else None,
        pre_factor,
    )
    return event_panel(records, cal, periods=(t_min, t_max))


def _outcome_panel(args, outcome: str, pre_factor: int = 1) -> PanelSeries:
    """Restricted, transformed panel for one outcome, ready to estimate."""
    if outcome == "events":
        panel = _load_event_panel(args, pre_factor)
    else:
        panels = _load_twitter_panels(args, pre_factor)
        if outcome not in panels:
            raise ConfigurationError(f"unknown outcome {outcome!r}; choose from {ALL_OUTCOMES}")
        users = panels["users"]
        restricted = restrict_sample(users, SampleRestriction(parameter=args.restriction))
        panel = panels[outcome].select_countries(restricted.countries)
    if args.treated not in panel.countries:
        raise DataError(f"treated country {args.treated!r} not in the restricted panel")
    transform = args.transform
    if transform == "auto":
        transform = "level" if outcome in PROPORTION_OUTCOMES else "log1p"
    if transform == "log1p":
        panel = panel.log1p()
    return panel


def _estimator_config(panel: PanelSeries) -> EstimatorConfig:
    pre = tuple(t for t in panel.periods if t < 0)
    post = tuple(t for t in panel.periods if t >= 0)
    if not pre:
        raise PanelRangeError("panel has no pre-intervention periods")
    if not post:
        raise PanelRangeError("panel has no post-intervention periods")
    return EstimatorConfig(fit_pre_periods=pre, all_pre_periods=pre, post_periods=post)


def _effects_rows(outcome, periods, effects, bands, dist) -> list[list]:
    excluded = ";".join(d for d, _ in dist.excluded)
    return [
        [outcome, t, _fmt(effects[i]), _fmt(bands[0, i]), _fmt(bands[1, i]),
         dist.n_placebos, excluded]
        for i, t in enumerate(periods)
    ]


EFFECTS_HEADER = ["outcome", "period", "effect", "band_lo", "band_hi", "n_placebos", "excluded_donors"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_panel(args) -> None:
    out = Path(args.out) / "panels"
    prov = _provenance(args)
    panels = _load_twitter_panels(args) if args.tweets else {}
    if args.events:
        panels["events"] = _load_event_panel(args)
    if not panels:
        raise ConfigurationError("build-panel needs --tweets and/or --events")
    for name in sorted(panels):
        panel = panels[name]
        rows = []
        for ci, country in enumerate(panel.countries):
            for pi, t in enumerate(panel.periods):
                flagged = int(bool(panel.flagged[ci, pi])) if panel.flagged is not None else 0
                rows.append([country, t, _fmt(panel.values[ci, pi]), flagged])
        _write_csv(out / f"{name}.csv", prov, ["country", "period", "value", "flagged"], rows)
    print(f"wrote {len(panels)} panels to {out}")


def cmd_estimate(args) -> None:
    out = Path(args.out) / "estimate"
    prov = _provenance(args)
    for outcome in args.outcomes:
        panel = _outcome_panel(args, outcome)
        cfg = _estimator_config(panel)
        fit, dist = estimate_with_placebos(panel, args.treated, cfg)
        bands = pointwise_band(dist)
        averaged = averaged_post_effect(fit, dist)

        _write_csv(
            out / f"{outcome}_effects.csv", prov, EFFECTS_HEADER,
            _effects_rows(outcome, panel.periods, fit.effects, bands, dist),
        )
        donors = [d for d in panel.countries if d != args.treated]
        order = np.argsort(-fit.weights.w, kind="stable")
        _write_csv(
            out / f"{outcome}_weights.csv", prov, ["donor", "weight"],
            [[donors[j], _fmt(fit.weights.w[j])] for j in order],
        )
        _write_csv(
            out / f"{outcome}_averaged.csv", prov,
            ["outcome", "value", "band_lo", "band_hi", "n_placebos"],
            [[outcome, _fmt(averaged.value), _fmt(averaged.band[0]),
              _fmt(averaged.band[1]), dist.n_placebos]],
        )

        periods = list(panel.periods)
        effect_chart = LineChart(
            title=f"Treatment effect: {outcome}", x_label="period", y_label="effect",
            vline=-0.5, hline=0.0,
        )
        effect_chart.add_band(periods, bands[0], bands[1])
        effect_chart.add_series("effect", periods, fit.effects)
        _write_svg(out / f"{outcome}_effects.svg", effect_chart)

        treated_series = panel.series(args.treated)
        synthetic = treated_series - fit.effects
        donor_avg = np.mean([panel.series(d) for d in donors], axis=0)
        paths_chart = LineChart(
            title=f"Treated vs synthetic: {outcome}", x_label="period", y_label=outcome,
            vline=-0.5,
        )
        paths_chart.add_series("treated", periods, treated_series)
        paths_chart.add_series("synthetic", periods, synthetic)
        paths_chart.add_series(
            "donor average (shifted)", periods,
            normalize_at_reference(treated_series, donor_avg, periods),
        )
        for j in order[:3]:  # highest-weight donors, shifted to the treated at t = -1
            paths_chart.add_series(
                f"{donors[j]} (shifted)", periods,
                normalize_at_reference(treated_series, panel.series(donors[j]), periods),
            )
        _write_svg(out / f"{outcome}_paths.svg", paths_chart)
        print(
            f"{outcome}: averaged post effect {averaged.value:+.4f} "
            f"band [{averaged.band[0]:+.4f}, {averaged.band[1]:+.4f}]"
        )


def cmd_placebo(args) -> None:
    out = Path(args.out) / "placebo"
    prov = _provenance(args)
    for outcome in args.outcomes:
        panel = _outcome_panel(args, outcome)
        cfg = _estimator_config(panel)
        fit, dist = estimate_with_placebos(panel, args.treated, cfg)
        rows = []
        for di, donor in enumerate(dist.donors):
            for pi, t in enumerate(dist.periods):
                rows.append([
                    outcome, donor, t, _fmt(dist.raw_effects[di, pi]),
                    _fmt(dist.scaled_effects[di, pi]), _fmt(dist.sigmas[di]),
                ])
        _write_csv(
            out / f"{outcome}_placebos.csv", prov,
            ["outcome", "donor", "period", "raw_effect", "scaled_effect", "sigma"], rows,
        )
        _write_csv(
            out / f"{outcome}_excluded.csv", prov, ["donor", "reason"],
            [[d, reason] for d, reason in dist.excluded],
        )
        print(f"{outcome}: {dist.n_placebos} placebos, {len(dist.excluded)} excluded")


def cmd_falsify(args) -> None:
    out = Path(args.out) / "falsify"
    prov = _provenance(args)
    rows = []
    for outcome in args.outcomes:
        # need the fitting window plus the held-out window of pre data
        panel = _outcome_panel(args, outcome, pre_factor=2)
        averaged = falsification_run(
            panel, args.treated, args.period_days, cutoff_days=args.cutoff_days
        )
        rows.append([
            outcome, _fmt(averaged.value), _fmt(averaged.band[0]), _fmt(averaged.band[1]),
        ])
        print(
            f"falsification {outcome}: {averaged.value:+.4f} "
            f"band [{averaged.band[0]:+.4f}, {averaged.band[1]:+.4f}]"
        )
    _write_csv(
        out / "falsification.csv", prov,
        ["outcome", "value", "band_lo", "band_hi"], rows,
    )
    chart = LineChart(
        title=f"Falsification: averaged effects over held-out {args.cutoff_days} pre days",
        x_label="outcome index", y_label="averaged effect", hline=0.0,
    )
    xs = list(range(len(rows)))
    chart.add_band(xs, [float(r[2]) for r in rows], [float(r[3]) for r in rows])
    chart.add_series("averaged effect", xs, [float(r[1]) for r in rows])
    _write_svg(out / "falsification.svg", chart)


def cmd_aggregate(args) -> None:
    out = Path(args.out) / "aggregate"
    prov = _provenance(args)
    if not args.tweets:
        raise ConfigurationError("aggregate needs --tweets")
    outcome = args.outcomes[0]
    lexicons = load_lexicons(args.lexicons)
    records = read_tweets_csv(args.tweets)
    first = min((r.timestamp.date() - args.anchor).days for r in records) if records else -1
    last = max((r.timestamp.date() - args.anchor).days for r in records) if records else 0
    if args.t_min is not None:
        pre_days = abs(args.t_min) * args.period_days
    else:
        pre_days = min(100, max(1, -first))
    if args.t_max is not None:
        post_days = (args.t_max + 1) * args.period_days
    else:
        post_days = max(1, last + 1)
    results = aggregation_suite(
        records, lexicons, args.treated, args.anchor,
        levels=tuple(args.levels),
        restriction=SampleRestriction(parameter=args.restriction),
        outcome=outcome,
        window_days=(pre_days, post_days),
    )
    for level in sorted(results):
        res = results[level]
        _write_csv(
            out / f"level_{level:02d}_effects.csv", prov, EFFECTS_HEADER,
            _effects_rows(outcome, res.panel.periods, res.fit.effects, res.bands, res.dist),
        )
        chart = LineChart(
            title=f"{outcome} at {level}-day aggregation",
            x_label="period", y_label="effect", vline=-0.5, hline=0.0,
        )
        periods = list(res.panel.periods)
        chart.add_band(periods, res.bands[0], res.bands[1])
        chart.add_series("effect", periods, res.fit.effects)
        _write_svg(out / f"level_{level:02d}_effects.svg", chart)
        print(
            f"level {level}d: averaged post effect {res.averaged.value:+.4f} "
            f"band [{res.averaged.band[0]:+.4f}, {res.averaged.band[1]:+.4f}]"
        )


def cmd_diffusion(args) -> None:
    out = Path(args.out) / "diffusion"
    prov = _provenance(args)
    params = PopulationParams(
        mu_c=args.mu_c, mu_w=args.mu_w, sigma_c=args.sigma_c,
        sigma_w=args.sigma_w, rho=args.rho,
    )
    if args.response == "linear":
        response = ResponseFunction.linear(args.slope)
    else:
        response = ResponseFunction.logistic(args.scale, args.steepness, args.midpoint)
    qs = np.linspace(args.q_min, args.q_max, args.q_steps)
    grid = np.linspace(0.0, 1.0, args.grid_n)
    curve_rows, eq_rows = [], []
    chart = LineChart(title="Participation best-response map", x_label="x", y_label="phi(x)")
    chart.add_series("diagonal", [0.0, 1.0], [0.0, 1.0], color="#999999")
    for q in qs:
        feasible = np.asarray(platform_probability(grid, float(q), response, params)) > 1e-12
        sub = grid[feasible]
        values = np.asarray(phi(sub, float(q), response, params))
        for x, val in zip(sub, values):
            curve_rows.append([_fmt(q), _fmt(x), _fmt(val)])
        eq = equilibria(float(q), response, params, grid_n=args.grid_n)
        for x_star, label in zip(eq.fixed_points, eq.labels):
            eq_rows.append([_fmt(q), _fmt(x_star), label])
        chart.add_series(f"q={q:.3g}", list(sub), list(values))
    _write_csv(out / "phi_curves.csv", prov, ["q", "x", "phi"], curve_rows)
    _write_csv(out / "equilibria.csv", prov, ["q", "x_star", "stability"], eq_rows)
    _write_svg(out / "phi.svg", chart)
    print(f"wrote diffusion curves for {len(qs)} prices to {out}")


def cmd_all_figures(args) -> None:
    cmd_build_panel(args)
    cmd_estimate(args)
    cmd_placebo(args)
    cmd_falsify(args)
    if args.tweets:
        saved = args.outcomes
        args.outcomes = ["users"]
        try:
            cmd_aggregate(args)
        finally:
            args.outcomes = saved
    cmd_diffusion(args)
    print("all artifacts written")


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="flat key = value config file")
    parser.add_argument("--tweets", type=str, default=None, help="tweet CSV path")
    parser.add_argument("--events", type=str, default=None, help="event CSV path")
    parser.add_argument("--lexicons", type=str, default=None, help="lexicon directory")
    parser.add_argument("--anchor", type=dt.date.fromisoformat, default=dt.date(2018, 7, 1))
    parser.add_argument("--period-days", type=int, default=10, choices=(1, 7, 10, 28))
    parser.add_argument("--treated", type=str, default="UG")
    parser.add_argument("--restriction", type=float, default=0.8)
    parser.add_argument("--t-min", type=int, default=None, help="first panel period (default ~100 pre days)")
    parser.add_argument("--t-max", type=int, default=None, help="last panel period (default: from data)")
    parser.add_argument("--transform", choices=("auto", "level", "log1p"), default="auto")
    parser.add_argument("--out", type=str, default="out")


def _split_outcomes(raw: str) -> list[str]:
    outcomes = [o.strip() for o in raw.split(",") if o.strip()]
    for o in outcomes:
        if o not in ALL_OUTCOMES:
            raise ConfigurationError(f"unknown outcome {o!r}; choose from {ALL_OUTCOMES}")
    return outcomes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthpanel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"synthpanel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-panel", help="write per-outcome panel CSVs")
    _add_common(p)
    p.set_defaults(func=cmd_build_panel)

    p = sub.add_parser("estimate", help="synthetic-control effects with placebo bands")
    _add_common(p)
    p.add_argument("--outcome", dest="outcome", type=str, default="users",
                   help="comma-separated outcome names")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("placebo", help="emit the scaled placebo distribution")
    _add_common(p)
    p.add_argument("--outcome", dest="outcome", type=str, default="users")
    p.set_defaults(func=cmd_placebo)

    p = sub.add_parser("falsify", help="restricted-fit falsification over held-out pre periods")
    _add_common(p)
    p.add_argument("--outcome", dest="outcome", type=str, default="users")
    p.add_argument("--cutoff-days", type=int, default=100)
    p.set_defaults(func=cmd_falsify)

    p = sub.add_parser("aggregate", help="re-estimate at 1/7/10/28-day aggregation")
    _add_common(p)
    p.add_argument("--levels", type=str, default="1,7,10,28")
    p.add_argument("--outcome", dest="outcome", type=str, default="users")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("diffusion", help="equilibrium tables and phi curves over a price sweep")
    _add_common(p)
    p.add_argument("--mu-c", type=float, default=1.0)
    p.add_argument("--mu-w", type=float, default=0.5)
    p.add_argument("--sigma-c", type=float, default=1.0)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=-0.5)
    p.add_argument("--response", choices=("linear", "logistic"), default="linear")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.5)
    p.add_argument("--steepness", type=float, default=8.0)
    p.add_argument("--midpoint", type=float, default=0.5)
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--q-max", type=float, default=1.0)
    p.add_argument("--q-steps", type=int, default=5)
    p.add_argument("--grid-n", type=int, default=2001)
    p.set_defaults(func=cmd_diffusion)

    p = sub.add_parser("all-figures", help="run the full artifact pipeline")
    _add_common(p)
    p.add_argument("--outcome", dest="outcome", type=str, default=",".join(ALL_OUTCOMES))
    p.add_argument("--cutoff-days", type=int, default=100)
    p.add_argument("--levels", type=str, default="1,7,10,28")
    p.add_argument("--mu-c", type=float, default=1.0)
    p.add_argument("--mu-w", type=float, default=0.5)
    p.add_argument("--sigma-c", type=float, default=1.0)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=-0.5)
    p.add_argument("--response", choices=("linear", "logistic"), default="linear")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.5)
    p.add_argument("--steepness", type=float, default=8.0)
    p.add_argument("--midpoint", type=float, default=0.5)
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--q-max", type=float, default=1.0)
    p.add_argument("--q-steps", type=int, default=5)
    p.add_argument("--grid-n", type=int, default=2001)
    p.set_defaults(func=cmd_all_figures)

    return parser


def _resolve(argv: list[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        file_values = _parse_flat_config(args.config)
        # file provides defaults; explicit flags win
        given = _explicit_flags(argv if argv is not None else sys.argv[1:])
        for key, value in file_values.items():
            if key in vars(args) and key not in given:
                if key == "anchor" and isinstance(value, str):
                    value = dt.date.fromisoformat(value)
                setattr(args, key, value)
    if not 0.0 < args.restriction <= 1.0:
        raise ConfigurationError("restriction parameter must be in (0, 1]")
    for attr in ("tweets", "events", "lexicons"):
        path = getattr(args, attr, None)
        if path is not None and not Path(path).exists():
            raise ConfigurationError(f"{attr} path does not exist: {path}")
    if hasattr(args, "outcome"):
        args.outcomes = _split_outcomes(args.outcome)
        if "events" in args.outcomes and not args.events:
            args.outcomes = [o for o in args.outcomes if o != "events"]
        if not args.outcomes:
            raise ConfigurationError("no estimable outcomes requested")
    if hasattr(args, "levels") and isinstance(args.levels, str):
        args.levels = [int(x) for x in args.levels.split(",") if x.strip()]
    return args


def _explicit_flags(argv: list[str]) -> set[str]:
    keys = set()
    for token in argv:
        if token.startswith("--"):
            keys.add(token[2:].split("=", 1)[0].replace("-", "_"))
    return keys


def main(argv: list[str] | None = None) -> int:
    try:
        args = _resolve(argv)
        args.func(args)
        return 0
    except InferenceError as exc:
        print(f"inference error: {exc}", file=sys.stderr)
        return 3
    except (DataError, EmptyPlatformError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
