"""photon-bell command line.

    photon-bell hom-scan    [--config FILE] [--seed N] [--out DIR] [--svg]
    photon-bell phase-scan  ...
    photon-bell chsh        ...
    photon-bell analyze     [INPUT.csv] ...
    photon-bell state-check ...

Exit codes: 0 success, 2 configuration/input error, 3 numerical contract
violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .circuit import NumericalContractError

COMMANDS = {
    "hom-scan": "hom_scan",
    "phase-scan": "phase_scan",
    "chsh": "chsh_run",
    "analyze": "analyze",
    "state-check": "state_check",
}

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photon-bell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--svg", action="store_true", default=None, help="also write an SVG plot")
        p.add_argument("--jobs", type=int, help="worker threads for scan points")
        if name == "analyze":
            p.add_argument("input", nargs="?", help="CSV of four (E, sigma) or count rows")
        if name in ("chsh", "analyze"):
            p.add_argument("--signs", help="sign vector, e.g. '+,-,+,+'")
    return parser


def _parse_signs(text):
    if text is None:
        return None
    try:
        return [int(tok.strip() + "1") for tok in text.split(",")]
    except ValueError as exc:
        raise ex.ConfigError(f"bad sign vector {text!r}") from exc


def load_config(args) -> ex.ScenarioConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ex.ConfigError(f"cannot load config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ex.ConfigError("config must be a JSON object")
    scenario = COMMANDS[args.command]
    if data.get("scenario", scenario) != scenario:
        raise ex.ConfigError(f"config is for {data['scenario']!r}, not {scenario!r}")
    data["scenario"] = scenario
    return ex.ScenarioConfig.from_dict(
        data,
        seed=args.seed,
        out=args.out,
        svg=args.svg,
        jobs=args.jobs,
        input=getattr(args, "input", None),
        sign_vector=_parse_signs(getattr(args, "signs", None)),
    )


def _write_summary(out: Path, name: str, summary: dict) -> None:
    text = json.dumps({k: ex.as_jsonable(v) for k, v in summary.items()}, indent=2, sort_keys=True)
    (out / f"{name}_summary.json").write_text(text + "\n")


def _emit_scan(cfg, result: ex.ScanResult, name: str, xlabel: str) -> None:
    out = Path(cfg.out)
    ex.write_csv(out / f"{name}.csv", result.header(), result.rows(), cfg.to_dict())
    _write_summary(out, name, {"config": cfg.to_dict(), **result.summary})
    if cfg.svg:
        ex.write_svg(out / f"{name}.svg", result.control, result.columns, xlabel)
    for k, v in result.summary.items():
        print(f"{k} = {v}")


def run(cfg: ex.ScenarioConfig) -> int:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ex.ConfigError(f"cannot create output directory {out}: {exc}") from exc

    if cfg.scenario == "hom_scan":
        _emit_scan(cfg, ex.run_hom_scan(cfg), "hom_scan", "delay (fs)")
    elif cfg.scenario == "phase_scan":
        _emit_scan(cfg, ex.run_phase_scan(cfg), "phase_scan", "phi (deg)")
    elif cfg.scenario == "chsh_run":
        run_ = ex.run_chsh(cfg)
        ex.write_csv(out / "chsh.csv", ex.CHSH_HEADER, ex.chsh_rows(run_), cfg.to_dict())
        r = run_.result
        summary = {
            "S": r.s_value, "sigma_S": r.sigma_s, "n_sigma": r.n_sigma_violation,
            "analytic_S": run_.analytic_s, "phi_deg": run_.phi_rad * 180 / 3.141592653589793,
            "sign_vector": list(r.sign_vector), "acceptance": run_.acceptance,
        }
        _write_summary(out, "chsh", {"config": cfg.to_dict(), **summary})
        for s, est in zip(run_.settings, r.estimates):
            print(f"E({s.alice_deg:g},{s.bob_deg:g}) = {est.e_value:.6f} +/- {est.sigma:.6f}")
        print(f"S = {r.s_value:.6f} +/- {r.sigma_s:.6f}  ({r.n_sigma_violation:.2f} sigma)")
        print(f"analytic S = {run_.analytic_s:.9f}")
    elif cfg.scenario == "analyze":
        r = ex.run_analyze(cfg)
        summary = {"S": r.s_value, "sigma_S": r.sigma_s, "n_sigma": r.n_sigma_violation,
                   "sign_vector": list(r.sign_vector)}
        _write_summary(out, "analyze", {"config": cfg.to_dict(), **summary})
        print(f"S = {r.s_value:.6f} +/- {r.sigma_s:.6f}  ({r.n_sigma_violation:.2f} sigma)")
    elif cfg.scenario == "state_check":
        report = ex.run_state_check(cfg)
        _write_summary(out, "state_check", {"config": cfg.to_dict(), **report})
        for k, v in report.items():
            print(f"{k} = {v}")
        if not report["pass"]:
            print("state check FAILED", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(load_config(args))
    except NumericalContractError as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ex.ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
