"""Command-line entry point.

One binary, five subcommands, file in / file out. All randomness flows from
explicit seeds so any invocation can be replayed exactly.

Exit codes: 0 success, 1 domain error (one machine-parsable line on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .arch import (
    ModuleKind,
    build_uniform,
    load_descriptor,
    save_descriptor,
)
from .costs import (
    EmissionsInput,
    cost_report,
    emissions,
    load_cell_profiles,
)
from .errors import StagewiseError
from .evaluators import (
    BridgeEvaluator,
    DonorRef,
    EvalBudget,
    PlantedProfile,
    PlantedStage,
    SyntheticEvaluator,
    load_bundle,
)
from .importance import (
    CRITERIA,
    IlFsParams,
    InfFsParams,
    PlsParams,
    default_params,
    stage_scores,
)
from .search import SearchConfig, SearchLedger, default_growth_step, run_search
from .transfer import plan_to_json, plan_transfer

_CRITERION_FLAGS = {"pls": "pls", "inf-fs": "inf_fs", "il-fs": "il_fs"}


class ConfigError(StagewiseError):
    """A run configuration file is malformed."""


def build_id() -> str:
    """Hash of the installed package sources; stable per build."""
    digest = hashlib.sha256()
    package_dir = Path(__file__).parent
    for path in sorted(package_dir.glob("*.py")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


def _check_keys(obj, allowed: set[str], context: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {context}: {', '.join(sorted(unknown))}"
        )


def _need(obj: dict, key: str, context: str):
    if key not in obj:
        raise ConfigError(f"{context} is missing required key {key!r}")
    return obj[key]


def _parse_emissions(raw, context: str) -> EmissionsInput:
    _check_keys(
        raw, {"runtime_hours", "device_power_kw", "grid_intensity", "pue"}, context
    )
    return EmissionsInput(
        runtime_hours=_need(raw, "runtime_hours", context),
        device_power_kw=_need(raw, "device_power_kw", context),
        grid_intensity=_need(raw, "grid_intensity", context),
        pue=raw.get("pue", 1.0),
    )


def _parse_scorer_params(criterion: str, raw: dict | None):
    if raw is None:
        return default_params(criterion)
    if criterion == "pls":
        _check_keys(raw, {"n_components"}, "scorer_params")
        return PlsParams(**raw)
    if criterion == "inf_fs":
        _check_keys(raw, {"alpha_mix", "beta"}, "scorer_params")
        return InfFsParams(**raw)
    _check_keys(raw, {"tokens", "beta"}, "scorer_params")
    return IlFsParams(**raw)


def _parse_kind(raw) -> ModuleKind:
    if not isinstance(raw, dict):
        raise ConfigError("architecture.kind must be an object with a 'variant'")
    _check_keys(raw, {"variant", "cost_profile_id"}, "architecture.kind")
    return ModuleKind(raw["variant"], raw.get("cost_profile_id"))


def _parse_run_config(path: Path) -> dict:
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    _check_keys(
        raw,
        {
            "seed",
            "iterations",
            "delta",
            "architecture",
            "criterion",
            "scorer_params",
            "budget",
            "evaluator",
            "synthetic",
            "bridge",
            "out_dir",
            "emissions",
        },
        "run config",
    )
    arch_raw = _need(raw, "architecture", "run config")
    _check_keys(
        arch_raw,
        {
            "stages",
            "m0",
            "kind",
            "widths",
            "input_side",
            "num_classes",
            "stem_channels",
        },
        "architecture",
    )
    kind = _parse_kind(_need(arch_raw, "kind", "architecture"))
    initial = build_uniform(
        _need(arch_raw, "stages", "architecture"),
        _need(arch_raw, "m0", "architecture"),
        kind,
        _need(arch_raw, "widths", "architecture"),
        _need(arch_raw, "input_side", "architecture"),
        _need(arch_raw, "num_classes", "architecture"),
        arch_raw.get("stem_channels"),
    )
    criterion = _need(raw, "criterion", "run config")
    if criterion not in CRITERIA:
        raise ConfigError(
            f"criterion must be one of {CRITERIA}, got {criterion!r}"
        )
    budget_raw = _need(raw, "budget", "run config")
    _check_keys(budget_raw, {"epochs", "mode", "donor", "seed"}, "budget")
    donor = None
    donor_raw = budget_raw.get("donor")
    if donor_raw is not None:
        _check_keys(donor_raw, {"descriptor", "weights"}, "budget.donor")
        donor = DonorRef(
            architecture=load_descriptor(_need(donor_raw, "descriptor", "budget.donor")),
            weights_path=_need(donor_raw, "weights", "budget.donor"),
        )
    seed = raw.get("seed", 0)
    budget = EvalBudget(
        epochs=_need(budget_raw, "epochs", "budget"),
        mode=budget_raw.get("mode", "scratch"),
        donor=donor,
        seed=budget_raw.get("seed", seed),
    )
    cfg = SearchConfig(
        iterations=_need(raw, "iterations", "run config"),
        delta=raw["delta"] if raw.get("delta") is not None else default_growth_step(kind.variant),
        initial=initial,
        criterion=criterion,
        budget=budget,
        scorer_params=_parse_scorer_params(criterion, raw.get("scorer_params")),
        score_seed=seed,
    )
    return {
        "config": cfg,
        "seed": seed,
        "evaluator": raw.get("evaluator"),
        "synthetic": raw.get("synthetic"),
        "bridge": raw.get("bridge"),
        "out_dir": raw.get("out_dir"),
        "emissions": raw.get("emissions"),
    }


def _build_synthetic(raw: dict | None, num_stages: int, seed: int) -> SyntheticEvaluator:
    raw = raw or {}
    _check_keys(raw, {"stages", "samples", "seed"}, "synthetic")
    stage_specs = raw.get("stages")
    if stage_specs is None:
        stage_specs = [{"ceiling": 1, "gain": 0.0, "noise_sigma": 0.25}] * num_stages
    if len(stage_specs) != num_stages:
        raise ConfigError(
            f"synthetic.stages has {len(stage_specs)} entries for {num_stages} stages"
        )
    stages = []
    for i, entry in enumerate(stage_specs):
        _check_keys(entry, {"ceiling", "gain", "noise_sigma"}, f"synthetic.stages[{i}]")
        stages.append(
            PlantedStage(
                ceiling=_need(entry, "ceiling", f"synthetic.stages[{i}]"),
                gain=_need(entry, "gain", f"synthetic.stages[{i}]"),
                noise_sigma=entry.get("noise_sigma", 0.25),
            )
        )
    profile = PlantedProfile(
        stages=tuple(stages),
        seed=raw.get("seed", seed),
        samples=raw.get("samples", 1024),
    )
    return SyntheticEvaluator(profile)


def _build_bridge(raw: dict | None, seed: int) -> BridgeEvaluator:
    if not raw:
        raise ConfigError("bridge evaluator selected but no 'bridge' section given")
    _check_keys(
        raw,
        {
            "trainer_cmd",
            "workdir",
            "timeout_seconds",
            "max_feature_samples",
            "request_extras",
            "poll_interval",
        },
        "bridge",
    )
    return BridgeEvaluator(
        trainer_cmd=_need(raw, "trainer_cmd", "bridge"),
        workdir_root=_need(raw, "workdir", "bridge"),
        timeout_seconds=raw.get("timeout_seconds", 3600.0),
        max_feature_samples=raw.get("max_feature_samples", 1024),
        request_extras=raw.get("request_extras"),
        poll_interval=raw.get("poll_interval", 0.1),
    )


def cmd_search(args) -> int:
    parsed = _parse_run_config(Path(args.config))
    cfg: SearchConfig = parsed["config"]
    evaluator_name = args.evaluator or parsed["evaluator"]
    if evaluator_name not in ("synthetic", "bridge"):
        raise ConfigError(
            f"evaluator must be 'synthetic' or 'bridge', got {evaluator_name!r}"
        )
    out_dir = Path(args.out or parsed["out_dir"] or "search-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    if evaluator_name == "synthetic":
        ev = _build_synthetic(parsed["synthetic"], cfg.initial.num_stages, parsed["seed"])
    else:
        ev = _build_bridge(parsed["bridge"], parsed["seed"])
    resume_from = None
    checkpoint = out_dir / "checkpoint.json"
    if args.resume:
        if not checkpoint.exists():
            raise ConfigError(f"--resume given but no checkpoint at {checkpoint}")
        resume_from = SearchLedger.load(checkpoint)
    ledger = run_search(cfg, ev, checkpoint_path=checkpoint, resume_from=resume_from)
    if parsed["emissions"] is not None:
        ledger.metadata["emissions_kgco2eq"] = emissions(
            _parse_emissions(parsed["emissions"], "emissions")
        )
    ledger.save(out_dir / "ledger.json")
    for record in ledger.candidates():
        save_descriptor(
            record.architecture,
            out_dir / f"candidate_{record.iteration:03d}.json",
        )
    print(
        json.dumps(
            {
                "final_modules": list(ledger.final_architecture().module_counts),
                "distinct_evaluations": ledger.distinct_evaluated(),
                "ledger": str(out_dir / "ledger.json"),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_score(args) -> int:
    features, _ = load_bundle(Path(args.bundle))
    criterion = _CRITERION_FLAGS[args.criterion]
    params = default_params(criterion)
    if criterion == "pls" and args.components is not None:
        params = PlsParams(n_components=args.components)
    elif criterion == "inf_fs":
        params = InfFsParams(
            alpha_mix=args.alpha_mix if args.alpha_mix is not None else 0.5,
            beta=args.beta if args.beta is not None else 0.9,
        )
    elif criterion == "il_fs":
        params = IlFsParams(
            tokens=args.tokens if args.tokens is not None else 4,
            beta=args.beta if args.beta is not None else 0.9,
        )
    scores = stage_scores(features, criterion, params, seed=args.seed)
    payload = {
        "criterion": criterion,
        "params": params.__dict__,
        "alpha": list(scores.alpha),
        "stages": [s.stage_index for s in features.stage_slices],
    }
    if criterion == "il_fs":
        payload["criterion_note"] = (
            "surrogate: equal-frequency token quantization + Fisher relevance"
        )
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_cost(args) -> int:
    a = load_descriptor(Path(args.descriptor))
    profiles = load_cell_profiles(args.profiles) if args.profiles else None
    em_input = None
    if args.emissions:
        raw = json.loads(Path(args.emissions).read_text())
        em_input = _parse_emissions(raw, "emissions file")
    report = cost_report(a, profiles, em_input)
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    return 0


def cmd_plan_transfer(args) -> int:
    candidate = load_descriptor(Path(args.candidate))
    donor = load_descriptor(Path(args.donor))
    profiles = load_cell_profiles(args.profiles) if args.profiles else None
    plan = plan_transfer(candidate, donor, profiles)
    text = plan_to_json(plan)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_emissions(args) -> int:
    value = emissions(
        EmissionsInput(
            runtime_hours=args.hours,
            device_power_kw=args.power_kw,
            grid_intensity=args.intensity,
            pue=args.pue,
        )
    )
    print(json.dumps({"kgco2eq": value}))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagewise",
        description="Stage-wise depth search, cost modeling and transfer planning "
        "for convolutional networks.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"stagewise {__version__} (build {build_id()})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the iterative depth search")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--evaluator", choices=["synthetic", "bridge"], default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--resume", action="store_true", help="resume from checkpoint")
    p.set_defaults(func=cmd_search, inputs=["config"])

    p = sub.add_parser("score", help="score a feature bundle per stage")
    p.add_argument("--bundle", required=True, help="bundle directory or manifest")
    p.add_argument("--criterion", choices=sorted(_CRITERION_FLAGS), default="pls")
    p.add_argument("--components", type=int, default=None, help="PLS components")
    p.add_argument("--alpha-mix", type=float, default=None, dest="alpha_mix")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tokens", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score, inputs=["bundle"])

    p = sub.add_parser("cost", help="print the analytical cost report")
    p.add_argument("--descriptor", required=True)
    p.add_argument("--profiles", default=None, help="cell cost profile JSON")
    p.add_argument("--emissions", default=None, help="emissions input JSON")
    p.set_defaults(func=cmd_cost, inputs=["descriptor", "profiles", "emissions"])

    p = sub.add_parser("plan-transfer", help="plan donor-to-candidate weight reuse")
    p.add_argument("--candidate", required=True)
    p.add_argument("--donor", required=True)
    p.add_argument("--profiles", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(
        func=cmd_plan_transfer, inputs=["candidate", "donor", "profiles"]
    )

    p = sub.add_parser("emissions", help="training carbon estimate")
    p.add_argument("--hours", type=float, required=True)
    p.add_argument("--power-kw", type=float, required=True, dest="power_kw")
    p.add_argument("--intensity", type=float, required=True, help="kgCO2eq per kWh")
    p.add_argument("--pue", type=float, default=1.0)
    p.set_defaults(func=cmd_emissions, inputs=[])

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    for name in args.inputs:
        value = getattr(args, name, None)
        if value is not None and not Path(value).exists():
            parser.error(f"input file not found: {value}")
    try:
        return args.func(args)
    except StagewiseError as exc:
        print(
            f"error kind={type(exc).__name__} message={json.dumps(str(exc))}",
            file=sys.stderr,
        )
        return 1
    except json.JSONDecodeError as exc:
        print(
            f"error kind=JSONDecodeError message={json.dumps(str(exc))}",
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
