"""Command-line entry point.

Every subcommand wires existing module operations together; nothing here does
math of its own. Runs that produce an output directory drop a
run_config.json beside their outputs with the fully resolved arguments so any
result can be reproduced from disk. Exit codes: 0 success, 1 for validation
or usage errors, 2 for unexpected runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from . import nn
from .degrade import DEFAULT_PROFILE, DegradationRecipe, intensity_histogram, run_recipe, \
    sample_recipe
from .enhance import LossWeights, PRESETS, TrainConfig, enhance_clip, eval_rmse, \
    finetune_joint, load_stage1, load_stage2, pairs_from_clips, predictor_spec, \
    restorer_spec, restorer_spec_fullres, restorer_spec_residual_chain, save_stage1, \
    save_stage2, train_stage1, train_stage2
from .io import read_clip, read_scores, write_clip
from .rand import seeded_rng
from .rank import ObjectiveScore, bt_fit, mos, rank_with_tiebreak, read_votes_jsonl, \
    rmse, s_obj, s_real, s_synth, votes_to_counts, write_ranking
from .study import Study, StudyConfig, serve
from .validation import ValidationError

MACS_PRESETS = {
    "default-restorer": lambda: [("restorer", restorer_spec(), "full")],
    "oversized-restorer": lambda: [("restorer", restorer_spec_fullres(), "full")],
    "summer-restorer": lambda: [("restorer", restorer_spec_residual_chain(), "full")],
    "predictor": lambda: [("predictor", predictor_spec(), "down")],
    "default-two-stage": lambda: [("predictor", predictor_spec(), "down"),
                                  ("restorer", restorer_spec(), "full")],
}


def _write_run_config(out_dir, args):
    os.makedirs(out_dir, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    with open(os.path.join(out_dir, "run_config.json"), "w") as f:
        json.dump(resolved, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _train_config(args) -> TrainConfig:
    """CLI flag > config file > preset > TrainConfig defaults."""
    merged = {}
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ValidationError(f"unknown preset {args.preset!r} (have {sorted(PRESETS)})")
        merged.update(PRESETS[args.preset])
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_cfg = json.load(f)
        if not isinstance(file_cfg, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
        merged.update(file_cfg)
    for flag in ("iterations", "batch", "patch", "lr", "halve_every", "seed",
                 "train_lattice", "lut_n", "bank_k", "predictor_downsample",
                 "restorer_preset"):
        v = getattr(args, flag, None)
        if v is not None:
            merged[flag] = v
    if "weights" in merged and isinstance(merged["weights"], dict):
        merged["weights"] = LossWeights(**merged["weights"])
    return TrainConfig(**merged)


def cmd_degrade(args):
    clip = read_clip(args.inp, fps=args.fps)
    if args.recipe:
        with open(args.recipe) as f:
            recipe = DegradationRecipe.from_json(f.read())
    else:
        profile = DEFAULT_PROFILE
        if args.profile:
            with open(args.profile) as f:
                profile = json.load(f)
        recipe = sample_recipe(seeded_rng(args.seed), profile, seed=args.seed)
    out = run_recipe(clip, recipe)
    write_clip(out, args.out)
    with open(os.path.join(args.out, "recipe.json"), "w") as f:
        f.write(recipe.to_json() + "\n")
    _write_run_config(args.out, args)
    _emit({"frames": len(out), "out": args.out, "seed": recipe.seed})
    return 0


def _load_pairs(args):
    degraded = read_clip(args.inp)
    target = read_clip(args.target)
    return pairs_from_clips(degraded, target)


def cmd_train_stage1(args):
    cfg = _train_config(args)
    pairs = _load_pairs(args)
    s1, history = train_stage1(pairs, cfg)
    save_stage1(s1, args.out)
    _write_run_config(args.out, args)
    with open(os.path.join(args.out, "history.json"), "w") as f:
        json.dump(history, f, indent=2)
    final = history[-1]["loss"] if history else None
    _emit({"out": args.out, "final_loss": final, "train_rmse": eval_rmse(s1, None, pairs)})
    return 0


def cmd_train_stage2(args):
    cfg = _train_config(args)
    pairs = _load_pairs(args)
    s2, history = train_stage2(pairs, cfg)
    save_stage2(s2, args.out)
    _write_run_config(args.out, args)
    with open(os.path.join(args.out, "history.json"), "w") as f:
        json.dump(history, f, indent=2)
    final = history[-1]["loss"] if history else None
    _emit({"out": args.out, "final_loss": final, "train_rmse": eval_rmse(None, s2, pairs)})
    return 0


def cmd_finetune(args):
    cfg = _train_config(args)
    pairs = _load_pairs(args)
    s1 = load_stage1(args.stage1)
    s2 = load_stage2(args.stage2)
    s1, s2, history = finetune_joint(s1, s2, pairs, cfg)
    save_stage1(s1, os.path.join(args.out, "stage1"))
    save_stage2(s2, os.path.join(args.out, "stage2"))
    _write_run_config(args.out, args)
    with open(os.path.join(args.out, "history.json"), "w") as f:
        json.dump(history, f, indent=2)
    _emit({"out": args.out, "train_rmse": eval_rmse(s1, s2, pairs)})
    return 0


def cmd_enhance(args):
    clip = read_clip(args.inp, fps=args.fps)
    s1 = load_stage1(args.stage1) if args.stage1 else None
    s2 = load_stage2(args.stage2) if args.stage2 else None
    out, report = enhance_clip(s1, s2, clip)
    write_clip(out, args.out)
    _write_run_config(args.out, args)
    with open(os.path.join(args.out, "report.json"), "w") as f:
        json.dump(report, f, indent=2)
    _emit(report)
    return 0


def cmd_rmse(args):
    a = read_clip(args.a)
    b = read_clip(args.b)
    _emit({"rmse": rmse(a, b)})
    return 0


def cmd_score(args):
    real = s_real(read_scores(args.scores)) if args.scores else None
    synth = s_synth([float(v) for v in args.rmse]) if args.rmse else None
    out = {"s_real": real, "s_synth": synth}
    if real is not None and synth is not None:
        out["s_obj"] = s_obj(real, synth)
    _emit(out)
    return 0


def _load_objectives(path) -> dict:
    with open(path) as f:
        data = json.load(f)
    out = {}
    for method, v in data.items():
        if isinstance(v, dict):
            out[method] = ObjectiveScore(float(v["s_real"]), float(v["s_synth"]))
        else:
            out[method] = float(v)
    return out


def cmd_rank(args):
    votes = read_votes_jsonl(args.votes)
    counts = votes_to_counts(votes, weighted=args.weighted)
    result = bt_fit(counts)
    if args.objective:
        result = rank_with_tiebreak(result, _load_objectives(args.objective))
    write_ranking(result, json_path=args.out_json, csv_path=args.out_csv)
    rows = [{"rank": e.rank, "method": e.method, "bt_score": round(e.bt_score, 6),
             "ci": [round(e.ci_low, 6), round(e.ci_high, 6)], "n": e.n_comparisons}
            for e in sorted(result.entries, key=lambda e: e.rank)]
    _emit(rows)
    return 0


def cmd_mos(args):
    votes = read_votes_jsonl(args.votes)
    _emit({"target": args.target, "mos": mos(votes, args.target), "n": len(votes)})
    return 0


def _macs_models(model_arg):
    if model_arg.startswith("preset:"):
        name = model_arg.split(":", 1)[1]
        if name not in MACS_PRESETS:
            raise ValidationError(f"unknown macs preset {name!r} (have {sorted(MACS_PRESETS)})")
        return MACS_PRESETS[name]()
    with open(model_arg) as f:
        spec = nn.ModelSpec.from_dict(json.load(f))
    return [("model", spec, "full")]


def cmd_macs(args):
    try:
        w, h = args.res.lower().split("x")
        width, height = int(w), int(h)
    except ValueError:
        raise ValidationError(f"--res must look like 1280x720, got {args.res!r}")
    total = 0
    detail = {}
    for name, spec, mode in _macs_models(args.model):
        if mode == "down":
            d = args.downsample
            m = nn.count_macs(spec, d, d)
        else:
            m = nn.count_macs(spec, height, width)
        detail[name] = m
        total += m
    ok = total <= args.budget
    print(f"MACS {total} budget {args.budget:.6g} {'PASS' if ok else 'FAIL'}")
    _emit({"macs": total, "detail": detail, "budget": args.budget, "pass": ok})
    return 0


def cmd_stats(args):
    clip = read_clip(args.inp)
    counts, edges = intensity_histogram(clip, bins=args.bins)
    _emit({"bins": args.bins, "counts": counts.tolist(),
           "edges": [float(e) for e in edges],
           "total": int(counts.sum())})
    return 0


def cmd_serve(args):
    config = StudyConfig.from_json_file(args.config)
    study = Study(config)
    serve(study, port=args.port, ui_dir=args.ui, host=args.host)
    return 0


def cmd_export_votes(args):
    config = StudyConfig.from_json_file(args.config)
    study = Study(config)
    text = study.export_votes()
    study.close()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqekit", description="video quality enhancement toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add_train_flags(sp):
        sp.add_argument("--in", dest="inp", required=True, help="degraded clip directory")
        sp.add_argument("--target", required=True, help="target clip directory")
        sp.add_argument("--out", required=True)
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--config", help="training config JSON")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--batch", type=int)
        sp.add_argument("--patch", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--halve-every", dest="halve_every", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--lut-n", dest="lut_n", type=int)
        sp.add_argument("--bank-k", dest="bank_k", type=int)
        sp.add_argument("--predictor-downsample", dest="predictor_downsample", type=int)
        sp.add_argument("--restorer-preset", dest="restorer_preset")

    sp = sub.add_parser("degrade", help="apply a seeded degradation recipe to a clip")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fps", type=float, default=30.0)
    sp.add_argument("--profile", help="parameter-range JSON")
    sp.add_argument("--recipe", help="explicit recipe JSON (overrides sampling)")
    sp.set_defaults(func=cmd_degrade)

    sp = sub.add_parser("train-stage1", help="fit LUT bank + weight predictor")
    add_train_flags(sp)
    sp.set_defaults(func=cmd_train_stage1)

    sp = sub.add_parser("train-stage2", help="fit the residual restorer")
    add_train_flags(sp)
    sp.set_defaults(func=cmd_train_stage2)

    sp = sub.add_parser("finetune", help="jointly finetune both stages")
    add_train_flags(sp)
    sp.add_argument("--stage1", required=True, help="pretrained stage-1 directory")
    sp.add_argument("--stage2", required=True, help="pretrained stage-2 directory")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("enhance", help="run the enhancement pipeline on a clip")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--stage1")
    sp.add_argument("--stage2")
    sp.add_argument("--fps", type=float, default=30.0)
    sp.set_defaults(func=cmd_enhance)

    sp = sub.add_parser("rmse", help="RMSE between two clips")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.set_defaults(func=cmd_rmse)

    sp = sub.add_parser("score", help="objective score from scores file + rmse values")
    sp.add_argument("--scores", help="score JSON for s_real")
    sp.add_argument("--rmse", nargs="+", help="per-clip rmse values for s_synth")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("rank", help="Bradley-Terry ranking from votes")
    sp.add_argument("--votes", required=True, help="votes JSONL")
    sp.add_argument("--objective", help="method -> objective score JSON (tie-break)")
    sp.add_argument("--weighted", action="store_true",
                    help="count strong preferences (1/5) as two wins")
    sp.add_argument("--out-json", dest="out_json")
    sp.add_argument("--out-csv", dest="out_csv")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("mos", help="mean opinion score for one condition")
    sp.add_argument("--votes", required=True)
    sp.add_argument("--target", required=True)
    sp.set_defaults(func=cmd_mos)

    sp = sub.add_parser("macs", help="MAC audit against the per-frame budget")
    sp.add_argument("--model", required=True,
                    help="preset:<name> or a model-spec JSON path")
    sp.add_argument("--res", default="1280x720")
    sp.add_argument("--budget", type=float, default=float(nn.FRAME_BUDGET))
    sp.add_argument("--downsample", type=int, default=64,
                    help="predictor input side length")
    sp.set_defaults(func=cmd_macs)

    sp = sub.add_parser("stats", help="intensity histogram of a clip")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--bins", type=int, default=256)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("serve", help="run the study service")
    sp.add_argument("--config", required=True, help="study config JSON")
    sp.add_argument("--port", type=int, default=8799)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--ui", help="static rater-ui bundle directory")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("export-votes", help="dump the study vote log")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export_votes)

    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help; fold usage into
        # the validation-error code
        return 0 if e.code == 0 else 1
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
