"""``mahedkit`` command line.

Stages are separate subcommands so expensive remote work (embedding,
LLM calls) is cached and reused::

    mahedkit embed      --task 3 --data-dir D --out O
    mahedkit train-svm  --task 3 --fusion avg --data-dir D --out O
    mahedkit train-mlp  --task 3 --data-dir D --out O
    mahedkit predict    --task 3 --detector svm --split test --data-dir D --out O
    mahedkit evaluate   --task 3 --split test --data-dir D --out O
    mahedkit report     --out O

Settings come from built-in defaults, then ``--config FILE`` (JSON), then
flags; the merged result is written to ``O/config/<command>-<run>.json`` and can
be printed without running via ``--dry-run``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import pipeline
from .corpus import DatasetSplit, class_histogram, load_dataset, oversample_minority
from .embeddings import Embedder, EmbeddingCache, EmbeddingProviderSpec
from .errors import InputError, MahedError, UsageError
from .fusion import FusionMode, parse_mode
from .gateway import LlmPredictor, PredictorSpec, SafetyAdapter
from .metrics import format_table, mean_over_subtasks, reports_to_json
from . import mlp as mlp_mod
from . import svm as svm_mod

log = logging.getLogger("mahedkit")

COMMANDS = ("embed", "train-svm", "train-mlp", "predict", "evaluate", "report")
LLM_DETECTORS = ("meme_prompt1", "meme_prompt2", "meme_prompt3")
SAFETY_DETECTORS = ("llamaguard", "moderation")


@dataclass
class RunConfig:
    command: str
    task: int | None = None
    split: str = "test"
    data_dir: str | None = None
    fusion: str | None = None  # task 3: avg, tasks 1/2: text
    detector: str = "svm"
    ensemble_config: str | None = None
    oversample_factor: int = 1
    minority_class: str | None = None
    seed: int = 0
    cache_dir: str | None = None
    fixtures: str | None = None
    out: str = "runs"
    C: float | None = None
    max_workers: int = 4
    safety_policy: str = "hate_only"
    provider: dict = field(default_factory=lambda: {"kind": "stub", "model_name": "stub-v1", "label_leak": 0.0})
    predictors: dict = field(default_factory=dict)
    mlp: dict = field(default_factory=dict)
    dry_run: bool = False

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("dry_run")
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    # resolved locations
    def dataset_path(self, split: str) -> Path:
        return Path(self.data_dir) / f"task{self.task}" / f"{split}.jsonl"

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else self.out_dir / "cache"

    @property
    def fixtures_path(self) -> Path:
        return Path(self.fixtures) if self.fixtures else Path(self.data_dir) / "replay"

    def model_path(self, kind: str) -> Path:
        if kind == "svm":
            suffix = "" if self.task == 1 else f"_{parse_mode(self.fusion).value}"
            return self.out_dir / "models" / f"task{self.task}_svm{suffix}.json"
        return self.out_dir / "models" / f"task{self.task}_{kind}.json"

    def _run_name(self) -> str:
        name = f"task{self.task}-{self.split}"
        if self.task == 3:
            name += f"-{self.detector}"
            if self.detector == "svm":
                name += f"-{parse_mode(self.fusion).value}"
        return name

    def predictions_path(self) -> Path:
        return self.out_dir / "predictions" / f"{self._run_name()}.jsonl"

    def report_stem(self) -> Path:
        return self.out_dir / "reports" / self._run_name()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so "not given" can be told apart from a default value
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--task", type=int, choices=(1, 2, 3))
    common.add_argument("--split", choices=("train", "validation", "test"))
    common.add_argument("--data-dir", dest="data_dir", help="dataset root holding task<N>/<split>.jsonl")
    common.add_argument("--fusion", choices=("text", "image", "avg", "concat"))
    common.add_argument("--detector", help="task 3: svm | mlp | meme_prompt1..3 | llamaguard | moderation")
    common.add_argument("--ensemble-config", dest="ensemble_config", help="task 1 ensemble JSON")
    common.add_argument("--oversample-factor", dest="oversample_factor", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--fixtures", help="directory of replay fixture files")
    common.add_argument("--out", help="output directory")
    common.add_argument("--C", dest="C", type=float, help="SVM regularization (default 0.1; 1.0 for text-only)")
    common.add_argument("--label-leak", dest="label_leak", type=float,
                        help="stub embeddings: class offset for synthetic data")
    common.add_argument("--max-workers", dest="max_workers", type=int)
    common.add_argument("--dry-run", dest="dry_run", action="store_true", default=None,
                        help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="mahedkit", description="hope/hate, multi-task and meme moderation runs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def plan(argv=None) -> RunConfig:
    """Parse flags and config file into a validated :class:`RunConfig`."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:  # --help
            raise
        raise UsageError("invalid command line (see --help)") from exc
    values: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        try:
            values.update(json.loads(path.read_text(encoding="utf-8")))
        except ValueError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    known = {f.name for f in fields(RunConfig)} | {"label_leak"}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}; remove them or check spelling")
    for key, val in vars(args).items():
        if key in ("config", "verbose") or val is None:
            continue
        values[key] = val
    values["command"] = args.command
    leak = values.pop("label_leak", None)
    cfg = RunConfig(**values)
    if leak is not None:
        cfg.provider = {**cfg.provider, "label_leak": leak}
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.command != "report":
        if cfg.task is None:
            raise UsageError("--task is required (1, 2 or 3)")
        if not cfg.data_dir:
            raise UsageError("--data-dir is required")
        if not Path(cfg.data_dir).is_dir():
            raise UsageError(f"data directory {cfg.data_dir} does not exist")
    if cfg.fusion is None:
        cfg.fusion = "avg" if cfg.task == 3 else "text"
    try:
        mode = parse_mode(cfg.fusion)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.task in (1, 2) and mode is not FusionMode.TEXT_ONLY:
        raise UsageError(
            f"--fusion {cfg.fusion} needs image embeddings, but task {cfg.task} records have no images; "
            "use --fusion text"
        )
    if cfg.oversample_factor < 1:
        raise UsageError("--oversample-factor must be >= 1")
    if cfg.command == "train-mlp" and cfg.task != 3:
        raise UsageError("train-mlp only applies to task 3 (image+text pairs)")
    if cfg.command == "train-svm" and cfg.task == 2:
        raise UsageError("train-svm applies to tasks 1 and 3")
    if cfg.command == "predict":
        if cfg.task == 1 and not cfg.ensemble_config:
            raise UsageError("task 1 prediction needs --ensemble-config")
        if cfg.task == 1 and not Path(cfg.ensemble_config).is_file():
            raise UsageError(f"ensemble config {cfg.ensemble_config} not found")
        if cfg.task == 3 and cfg.detector not in ("svm", "mlp", *LLM_DETECTORS, *SAFETY_DETECTORS):
            raise UsageError(f"unknown detector {cfg.detector!r}; use svm, mlp, "
                             f"{', '.join(LLM_DETECTORS)}, {', '.join(SAFETY_DETECTORS)}")
    if cfg.safety_policy not in ("hate_only", "any_flag"):
        raise UsageError("safety_policy must be hate_only or any_flag")
    try:
        EmbeddingProviderSpec(**cfg.provider)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid provider config: {exc}") from None


# -- stage implementations ---------------------------------------------------


def _embedder(cfg: RunConfig) -> Embedder:
    return Embedder(EmbeddingProviderSpec(**cfg.provider), EmbeddingCache(cfg.cache_path),
                    max_in_flight=cfg.max_workers)


def _load(cfg: RunConfig, split: str) -> DatasetSplit:
    path = cfg.dataset_path(split)
    if not path.is_file():
        raise InputError(f"dataset {path} not found")
    return load_dataset(path, cfg.task, split)


def cmd_embed(cfg: RunConfig) -> dict:
    emb = _embedder(cfg)
    modalities = ["text"] if cfg.task in (1, 2) else ["text", "image"]
    items = []
    for split in dict.fromkeys(("train", "validation", cfg.split)):
        for rec in _load(cfg, split):
            for m in modalities:
                items.append((rec.text if m == "text" else rec.image_ref, m, pipeline._leak_label(rec)))
    before = len(emb.cache)
    emb.embed_many(items)
    return {"embedded": len(items), "new_cache_entries": len(emb.cache) - before}


def _svm_hp(cfg: RunConfig, mode: FusionMode) -> svm_mod.SvmHyperparams:
    base = svm_mod.PAPER_TEXT_ONLY_HYPERPARAMS if mode is FusionMode.TEXT_ONLY else svm_mod.PAPER_HYPERPARAMS
    if cfg.C is not None:
        return svm_mod.SvmHyperparams(C=cfg.C, gamma=base.gamma, class_weight=base.class_weight)
    return base


def _oversampled_train(cfg: RunConfig, selector: str, default_minority: str) -> DatasetSplit:
    train = _load(cfg, "train")
    if cfg.oversample_factor > 1:
        train = oversample_minority(train, selector, cfg.minority_class or default_minority,
                                    cfg.oversample_factor, cfg.seed)
    return train


def cmd_train_svm(cfg: RunConfig) -> dict:
    emb = _embedder(cfg)
    if cfg.task == 1:
        mode = FusionMode.TEXT_ONLY
        train = _oversampled_train(cfg, "task1", "hope")
        X = pipeline.embed_features(emb, train.records, mode)
        y = [r.gold.task1 for r in train]
        model = svm_mod.OneVsRestSvm.fit(X, y, _svm_hp(cfg, mode), seed=cfg.seed)
    else:
        mode = parse_mode(cfg.fusion)
        train = _oversampled_train(cfg, "meme_hate", "hateful")
        X = pipeline.embed_features(emb, train.records, mode)
        y = [r.gold.meme_hate for r in train]
        model = svm_mod.train_smo(X, y, _svm_hp(cfg, mode), seed=cfg.seed, positive_class="hateful")
    path = cfg.model_path("svm")
    path.parent.mkdir(parents=True, exist_ok=True)
    svm_mod.save_model(model, path)
    field_name = "task1" if cfg.task == 1 else "meme_hate"
    return {"model": str(path), "train_histogram": class_histogram(train, field_name), "n_train": len(train)}


def cmd_train_mlp(cfg: RunConfig) -> dict:
    emb = _embedder(cfg)
    train = _oversampled_train(cfg, "meme_hate", "hateful")
    val = _load(cfg, "validation")
    img, txt = pipeline.embed_pairs(emb, train.records)
    vimg, vtxt = pipeline.embed_pairs(emb, val.records)
    y = np.array([r.gold.meme_hate == "hateful" for r in train], dtype=float)
    vy = np.array([r.gold.meme_hate == "hateful" for r in val], dtype=float)
    options = {"seed": cfg.seed, **cfg.mlp}
    if options.get("class_weights", "balanced") == "balanced":
        options["class_weights"] = mlp_mod.balanced_binary_weights(y)
    config = mlp_mod.MlpConfig(**options)
    model = mlp_mod.train(config, (img, txt, y), (vimg, vtxt, vy),
                          positive_label="hateful", negative_label="not_hateful")
    path = cfg.model_path("mlp")
    path.parent.mkdir(parents=True, exist_ok=True)
    mlp_mod.save_model(model, path)
    return {"model": str(path), "best_epoch": model.best_epoch, "epochs_run": len(model.training_log)}


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise InputError(f"{path} not found; {hint}")
    return path


def _llm(cfg: RunConfig, key: str, template: str, replay_name: str):
    spec_obj = cfg.predictors.get(key)
    if spec_obj:
        spec = PredictorSpec.from_dict(spec_obj)
    else:
        fixture = _require(cfg.fixtures_path / f"{replay_name}.jsonl", "pass --fixtures")
        spec = PredictorSpec("replay", replay_name, template, fixture_path=str(fixture))
    return LlmPredictor(spec)


def _ensemble(cfg: RunConfig, emb: Embedder) -> pipeline.EnsembleSpec:
    path = Path(cfg.ensemble_config)
    obj = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    def build(v):
        if v["kind"] == "svm":
            model_path = Path(v.get("model", cfg.model_path("svm")))
            if not model_path.is_absolute():
                model_path = cfg.out_dir / model_path
            model = svm_mod.load_model(_require(model_path, "run train-svm --task 1 first"))
            return pipeline.EmbeddingClassifier(emb, model, v.get("fusion", "text"), name=v.get("name"))
        v = dict(v)
        if v.get("fixtures") and not Path(v["fixtures"]).is_absolute():
            v["fixtures"] = str(base / v["fixtures"])
        return LlmPredictor(PredictorSpec.from_dict(v), name=v.get("name"))

    voters = [build(v) for v in obj["voters"]]
    names = [v.get("name", f"v{k + 1}") for k, v in enumerate(obj["voters"])]
    prio = obj.get("priority", names)
    try:
        priority = [names.index(p) for p in prio]
    except ValueError as exc:
        raise UsageError(f"ensemble priority names an unknown voter: {exc}") from None
    rescue = build(obj["rescue"]) if obj.get("rescue") else None
    return pipeline.EnsembleSpec(voters, priority, rescue)


def _detector(cfg: RunConfig, emb: Embedder):
    d = cfg.detector
    if d == "svm":
        model = svm_mod.load_model(_require(cfg.model_path("svm"), "run train-svm first"))
        return pipeline.EmbeddingClassifier(emb, model, cfg.fusion)
    if d == "mlp":
        model = mlp_mod.load_model(_require(cfg.model_path("mlp"), "run train-mlp first"))
        return pipeline.MlpDetector(emb, model)
    if d in LLM_DETECTORS:
        return _llm(cfg, d, d, f"task3_{d}")
    spec_obj = cfg.predictors.get(d)
    if spec_obj:
        spec = PredictorSpec.from_dict(spec_obj)
    else:
        fixture = _require(cfg.fixtures_path / f"task3_{d}.jsonl", "pass --fixtures")
        spec = PredictorSpec("replay", d, "safety", fixture_path=str(fixture))
    return pipeline.SafetyDetector(SafetyAdapter(spec, policy=cfg.safety_policy))


def cmd_predict(cfg: RunConfig) -> dict:
    split = _load(cfg, cfg.split)
    emb = _embedder(cfg)
    if cfg.task == 1:
        ens = _ensemble(cfg, emb)
        fn = lambda r: pipeline.run_task1(r, ens)  # noqa: E731
    elif cfg.task == 2:
        emo = _llm(cfg, "emotion", "emotion_12", "task2_emotion")
        off = _llm(cfg, "offensive", "offensive_yes_no", "task2_offensive")
        hate = _llm(cfg, "hate", "hate_not_hate", "task2_hate")
        fn = lambda r: pipeline.run_task2(r, emo, off, hate)  # noqa: E731
    else:
        det = _detector(cfg, emb)
        fn = lambda r: pipeline.run_task3(r, det)  # noqa: E731
    preds = pipeline.run_many(split.records, fn, cfg.max_workers)
    path = cfg.predictions_path()
    pipeline.write_predictions(path, preds)
    return {"predictions": str(path), "n": len(preds), "failed": sum(p.failed for p in preds)}


def cmd_evaluate(cfg: RunConfig) -> dict:
    pred_path = _require(cfg.predictions_path(), "run predict first")
    split = _load(cfg, cfg.split)
    preds = pipeline.read_predictions(pred_path)
    reports = pipeline.evaluate_predictions(preds, split.records, cfg.task)
    stem = cfg.report_stem()
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".json").write_text(reports_to_json(reports), encoding="utf-8")
    table = format_table(reports)
    if cfg.task == 2:
        means = mean_over_subtasks(reports)
        table += "unweighted mean over sub-tasks: " + ", ".join(
            f"{k}={100 * v:.2f}" for k, v in means.items()) + "\n"
    stem.with_suffix(".txt").write_text(table, encoding="utf-8")
    for name, rep in reports.items():
        Path(f"{stem}-{name}-confusion.csv").write_text(rep.confusion.to_csv(), encoding="utf-8")
    return {"report": str(stem.with_suffix(".json")), "table": table}


def cmd_report(cfg: RunConfig) -> dict:
    reports_dir = cfg.out_dir / "reports"
    tables = sorted(reports_dir.glob("*.txt")) if reports_dir.is_dir() else []
    if not tables:
        raise InputError(f"no reports under {reports_dir}; run evaluate first")
    text = "".join(f"== {p.stem} ==\n{p.read_text(encoding='utf-8')}\n" for p in tables)
    return {"table": text}


HANDLERS = {
    "embed": cmd_embed, "train-svm": cmd_train_svm, "train-mlp": cmd_train_mlp,
    "predict": cmd_predict, "evaluate": cmd_evaluate, "report": cmd_report,
}


def execute(cfg: RunConfig) -> dict:
    if cfg.command != "report":
        snap = cfg.out_dir / "config" / f"{cfg.command}-{cfg._run_name()}.json"
        snap.parent.mkdir(parents=True, exist_ok=True)
        snap.write_text(cfg.to_json(), encoding="utf-8")
    return HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = plan(argv)
        if cfg.dry_run:
            sys.stdout.write(cfg.to_json())
            return 0
        result = execute(cfg)
    except MahedError as exc:
        print(f"mahedkit: error [{exc.module}]: {exc}", file=sys.stderr)
        return exc.exit_code
    if "table" in result:
        sys.stdout.write(result["table"])
    else:
        print(json.dumps(result, sort_keys=True, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
