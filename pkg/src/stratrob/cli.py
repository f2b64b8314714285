"""Command-line experiment runner: gen-data, train, eval, infer, sweep.

Configs are flat ``key = value`` files (``#`` starts a comment). Every run
writes a JSON document with sorted keys plus comma-separated tables meant
for plotting elsewhere.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, inference, nn, training
from .attacks import AttackSpec
from .data import Dataset, load_csv, save_csv, synth_gaussian_groups, train_test_split
from .errors import CapacityError, ConfigError, DataError, DomainError, InputError
from .utilities import (
    SemanticPartition,
    UncertaintySet,
    UtilityMatrix,
    one_hot_utility,
    parse_uncertainty_set,
    parse_utility,
    targets_of,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _bool(s):
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    return tuple(int(v) for v in s.replace(" ", "").split(",") if v)


def _floats(s):
    return tuple(float(v) for v in s.replace(" ", "").split(",") if v)


def _opt_float(s):
    return None if s == "" else float(s)


FILE = "file"  # marker: value is a path that must exist
# key -> (parser, default); default None means optional and unset
SCHEMA = {
    "seed": (int, None),
    "data.path": (FILE, None),
    "data.partition": (FILE, None),
    "data.seed": (int, None),
    "data.K": (int, 6),
    "data.d": (int, 6),
    "data.groups": (_ints, None),
    "data.intra_sep": (float, 1.0),
    "data.inter_sep": (float, 4.0),
    "data.n_per_class": (int, 60),
    "data.noise_sd": (float, 0.3),
    "data.test_fraction": (float, 0.25),
    "model.hidden": (_ints, (32,)),
    "train.objective": (str, "clean"),
    "train.epochs": (int, 20),
    "train.batch_size": (int, 32),
    "train.lr": (float, 0.05),
    "train.momentum": (float, 0.9),
    "train.lr_drops": (_ints, ()),
    "train.noise_eps": (_opt_float, None),
    "train.utility": (str, None),
    "train.uset": (str, None),
    "train.eps": (float, 0.0),
    "train.fallback": (_bool, False),
    "attack.train": (str, "paper-train"),
    "attack.eval": (str, "paper-eval"),
    "eval.checkpoint": (FILE, None),
    "eval.suite": (str, "clean,adv"),
    "eval.utility": (str, None),
    "eval.uset": (str, None),
    "eval.misspecified": (str, None),
    "eval.method": (str, "pgd"),
    "eval.grid_points": (int, 21),
    "eval.deflection_clean": (FILE, None),
    "eval.deflection_adv": (FILE, None),
    "eval.landscape_bins": (int, 10),
    "eval.landscape_per_bin": (int, 15),
    "infer.log": (FILE, None),
    "infer.checkpoint": (FILE, None),
    "infer.generate": (_bool, False),
    "infer.mode": (str, "delta"),
    "infer.k": (int, 1),
    "infer.attack": (str, None),
    "infer.truth": (str, None),
    "sweep.eps": (_floats, ()),
    "sweep.seeds": (_ints, ()),
}
TRAIN_PREFIXES = ("seed", "data.", "model.", "train.", "attack.train")
SUITE = ("clean", "adv", "strategic", "sequential", "worst_case", "distribution", "table", "landscape",
         "deflection")


# -- config -----------------------------------------------------------------------


class Config:
    def __init__(self, raw: dict, base_dir: Path):
        self.raw = dict(raw)
        self.base = base_dir
        self.values = {}
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "seed" not in raw:
            raise ConfigError("missing required key 'seed'")
        for key, (parser, default) in SCHEMA.items():
            if key not in raw:
                self.values[key] = default
                continue
            text = raw[key]
            if parser is FILE:
                path = (base_dir / text) if not Path(text).is_absolute() else Path(text)
                if not path.exists():
                    raise ConfigError(f"{key}: file not found: {text}")
                self.values[key] = path
                continue
            try:
                self.values[key] = parser(text)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def parse(cls, text: str, base_dir=".", overrides=None) -> "Config":
        raw = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise ConfigError(f"line {n}: expected key = value")
            key = key.strip()
            if key in raw:
                raise ConfigError(f"line {n}: duplicate key {key!r}")
            raw[key] = val.strip()
        raw.update(overrides or {})
        return cls(raw, Path(base_dir))

    @classmethod
    def load(cls, path, overrides=None) -> "Config":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.parse(path.read_text(), path.parent, overrides)

    def with_overrides(self, **kv) -> "Config":
        raw = dict(self.raw)
        raw.update({k: str(v) for k, v in kv.items()})
        return Config(raw, self.base)

    def canonical(self, prefixes=None) -> str:
        keys = sorted(k for k in SCHEMA if prefixes is None or k.startswith(prefixes))
        return "\n".join(f"{k}={_canon(self.values[k])}" for k in keys)

    def hash(self, prefixes=None) -> str:
        return hashlib.sha256(self.canonical(prefixes).encode()).hexdigest()

    @property
    def train_hash(self) -> str:
        return self.hash(TRAIN_PREFIXES)


def _canon(v):
    if isinstance(v, Path):
        # identify referenced files by content, not location
        return "sha256:" + hashlib.sha256(v.read_bytes()).hexdigest()
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return repr(v)


# -- shared building blocks -------------------------------------------------------------


def _attack(text, key) -> AttackSpec:
    try:
        return AttackSpec.parse(text)
    except InputError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _partition(cfg) -> SemanticPartition | None:
    if cfg["data.partition"] is not None:
        return SemanticPartition.load(cfg["data.partition"])
    if cfg["data.groups"] is not None:
        return SemanticPartition(cfg["data.groups"])
    return None


def build_dataset(cfg) -> Dataset:
    part = _partition(cfg)
    if cfg["data.path"] is not None:
        data = load_csv(cfg["data.path"], num_classes=part.K if part else cfg["data.K"])
        return Dataset(data.X, data.y, data.K, part)
    K = cfg["data.K"]
    if part is None:
        raise ConfigError("synthetic data needs data.groups or data.partition")
    if part.K != K:
        raise ConfigError(f"data.groups covers {part.K} classes but data.K = {K}")
    seed = cfg["data.seed"] if cfg["data.seed"] is not None else cfg["seed"]
    return synth_gaussian_groups(K, cfg["data.d"], part, cfg["data.intra_sep"], cfg["data.inter_sep"],
                                 cfg["data.n_per_class"], cfg["data.noise_sd"], seed)


def split(cfg, data):
    return train_test_split(data, cfg["data.test_fraction"], seed=cfg["seed"])


def _utility(cfg, text, data, key) -> UtilityMatrix:
    try:
        u = parse_utility(text, data.K, data.partition, cfg.base)
    except (InputError, DataError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if u.K != data.K:
        raise ConfigError(f"{key}: utility has K={u.K}, data has K={data.K}")
    return u


def _uset(cfg, text, data, key) -> UncertaintySet:
    try:
        return parse_uncertainty_set(text, data.K, data.partition, cfg.base)
    except (InputError, DataError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def train_config(cfg, data, eps=None) -> training.TrainConfig:
    kind = cfg["train.objective"]
    u = _utility(cfg, cfg["train.utility"], data, "train.utility") if cfg["train.utility"] else None
    U = _uset(cfg, cfg["train.uset"], data, "train.uset") if cfg["train.uset"] else None
    obj = training.Objective(kind, u, U, cfg["train.eps"] if eps is None else eps, cfg["train.fallback"])
    return training.TrainConfig(
        epochs=cfg["train.epochs"], batch_size=cfg["train.batch_size"], base_lr=cfg["train.lr"],
        momentum=cfg["train.momentum"], lr_drop_epochs=cfg["train.lr_drops"],
        attack=_attack(cfg["attack.train"], "attack.train"), objective=obj, seed=cfg["seed"],
        noise_eps=cfg["train.noise_eps"],
    )


def init_net(cfg, data) -> nn.DenseNet:
    sizes = [data.d, *cfg["model.hidden"], data.K]
    return nn.DenseNet.init(sizes, seed=cfg["seed"])


def save_checkpoint(path, net, meta):
    doc = {"format": "stratrob-checkpoint", "meta": meta, "net": net.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a checkpoint ({exc})") from None
    if doc.get("format") != "stratrob-checkpoint":
        return nn.DenseNet.from_dict(doc), {}
    return nn.DenseNet.from_dict(doc["net"]), doc["meta"]


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _write_grid(path, M, header=None):
    lines = [header] if header else []
    lines += [",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in row)
              for row in np.asarray(M).tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def _identity(cfg, extra=None):
    doc = {"config_hash": cfg.hash(), "seed": cfg["seed"], "tool": {"name": "stratrob", "version": __version__}}
    doc.update(extra or {})
    return doc


# -- commands --------------------------------------------------------------------------


def cmd_gen_data(cfg, out: Path):
    data = build_dataset(cfg)
    part_path = out / "partition.txt" if data.partition is not None else None
    save_csv(data, out / "data.csv", part_path)
    _write_json(out / "gen_data.json", _identity(cfg, {"N": len(data), "K": data.K, "d": data.d}))
    return {"data": str(out / "data.csv"), "partition": str(part_path) if part_path else None}


def run_training(cfg, eps=None):
    data = build_dataset(cfg)
    tr, te = split(cfg, data)
    tcfg = train_config(cfg, data, eps)
    net, log = training.train(init_net(cfg, data), tr, tcfg)
    return net, log, tr, te


def cmd_train(cfg, out: Path):
    net, log, tr, te = run_training(cfg)
    summary = log.to_dict()
    summary["train_clean_acc"] = evaluation.accuracy_clean(net, tr)
    summary["test_clean_acc"] = evaluation.accuracy_clean(net, te)
    meta = _identity(cfg, {"train_hash": cfg.train_hash, "train_log": summary})
    save_checkpoint(out / "model.json", net, meta)
    _write_json(out / "train_log.json", meta)
    _write_grid(out / "train_curve.csv",
                [[i, e.loss, e.accuracy, e.attack_success, e.lr] for i, e in enumerate(log.epochs)],
                "epoch,loss,accuracy,attack_success,lr")
    return meta


def _eval_suite(cfg):
    suite = [s.strip() for s in cfg["eval.suite"].split(",") if s.strip()]
    bad = [s for s in suite if s not in SUITE]
    if bad or not suite:
        raise ConfigError(f"eval.suite: unknown or empty entries {bad}; choose from {', '.join(SUITE)}")
    need = {"strategic": "eval.utility", "sequential": "eval.utility", "worst_case": "eval.uset"}
    for item, key in need.items():
        if item in suite and cfg[key] is None:
            raise ConfigError(f"eval.suite has {item} but {key} is unset")
    if "landscape" in suite and "table" not in suite:
        suite.append("table")
    if "deflection" in suite:
        if cfg["eval.deflection_clean"] is None or cfg["eval.deflection_adv"] is None:
            raise ConfigError("deflection needs eval.deflection_clean and eval.deflection_adv checkpoints")
        if cfg["eval.utility"] is None and cfg["eval.uset"] is None:
            raise ConfigError("deflection needs eval.utility or eval.uset")
    if cfg["eval.method"] not in ("pgd", "oracle"):
        raise ConfigError("eval.method must be pgd or oracle")
    return suite


def _cache(cfg, net, te):
    spec = _attack(cfg["attack.eval"], "attack.eval")
    grid = cfg["eval.grid_points"] if cfg["eval.method"] == "oracle" else None
    return evaluation.AttackCache(net, te, spec, cfg["eval.method"], grid)


def _strategic_score(cfg, cache, te):
    """Strategic accuracy used by deflection: worst case over eval.uset, else the first eval.utility."""
    if cfg["eval.uset"] is not None:
        U = _uset(cfg, cfg["eval.uset"], te, "eval.uset")
        return evaluation.worst_case_accuracy(cache.net, te, U, cache=cache)[0]
    u = _utility(cfg, cfg["eval.utility"].split(";")[0], te, "eval.utility")
    return float(evaluation.correct_counts(cache, "strategic", u).sum() / len(te))


def cmd_eval(cfg, out: Path):
    suite = _eval_suite(cfg)
    ckpt = cfg["eval.checkpoint"] or out / "model.json"
    if not Path(ckpt).exists():
        raise ConfigError(f"no checkpoint: set eval.checkpoint or train into {out}")
    net, meta = load_checkpoint(ckpt)
    if meta and meta.get("train_hash") != cfg.train_hash:
        raise ConfigError("checkpoint config hash does not match this config's data/model/train settings")
    _, te = split(cfg, build_dataset(cfg))
    cache = _cache(cfg, net, te)
    N = len(te)
    rep = evaluation.EvalReport(clean_acc=evaluation.accuracy_clean(net, te))
    extras = {}
    utils = []
    if cfg["eval.utility"]:
        utils = [(d.strip(), _utility(cfg, d.strip(), te, "eval.utility"))
                 for d in cfg["eval.utility"].split(";") if d.strip()]
    if "adv" in suite:
        rep.adv_acc = float(evaluation.correct_counts(cache, "adversarial").sum() / N)
    if "strategic" in suite:
        for desc, u in utils:
            rep.strategic_accs[desc] = float(evaluation.correct_counts(cache, "strategic", u).sum() / N)
    if "sequential" in suite:
        extras["sequential_accs"] = {
            desc: float(evaluation.correct_counts(cache, "sequential", u).sum() / N) for desc, u in utils
        }
    if "worst_case" in suite:
        U = _uset(cfg, cfg["eval.uset"], te, "eval.uset")
        excl = (_utility(cfg, cfg["eval.misspecified"], te, "eval.misspecified")
                if cfg["eval.misspecified"] else None)
        rep.worst_case_acc, rep.worst_case_utility = evaluation.worst_case_accuracy(
            net, te, U, cache=cache, exclude=excl)
        rep.worst_case_utility.save(out / "worst_case_utility.txt")
    if "distribution" in suite:
        rep.attack_distribution = evaluation.attack_distribution(net, te, "adversarial", cache=cache)
        _write_grid(out / "attack_distribution_adv.csv", rep.attack_distribution)
        for j, (desc, u) in enumerate(utils):
            M = evaluation.attack_distribution(net, te, "strategic", u=u, cache=cache)
            extras.setdefault("strategic_distributions", {})[desc] = M.tolist()
            _write_grid(out / f"attack_distribution_u{j}.csv", M)
    if "table" in suite:
        rep.target_table = evaluation.target_accuracy_table(net, te, cache=cache)
        _write_grid(out / "target_table.csv", rep.target_table.values)
    if "landscape" in suite:
        land = evaluation.one_hot_landscape(rep.target_table, bins=cfg["eval.landscape_bins"],
                                            per_bin=cfg["eval.landscape_per_bin"], seed=cfg["seed"])
        rows = []
        for b, members in enumerate(land.samples):
            for targets, acc in members:
                row = [b, acc, " ".join(map(str, targets))]
                if te.partition is not None:
                    row.append(evaluation.semantic_pair_count(one_hot_utility(targets), te.partition))
                rows.append(row)
        header = "bin,accuracy,targets" + (",semantic_pairs" if te.partition is not None else "")
        Path(out / "landscape.csv").write_text(
            "\n".join([header] + [",".join(str(v) if not isinstance(v, float) else format(v, ".17g")
                                            for v in r) for r in rows]) + "\n")
        extras["landscape"] = {
            "edges": land.edges.tolist(), "histogram": land.histogram.tolist(), "exact": land.exact,
            "easiest": {"targets": list(land.easiest[0]), "accuracy": land.easiest[1]},
            "hardest": {"targets": list(land.hardest[0]), "accuracy": land.hardest[1]},
        }
    if "deflection" in suite:
        net_cln, _ = load_checkpoint(cfg["eval.deflection_clean"])
        net_adv, _ = load_checkpoint(cfg["eval.deflection_adv"])
        s_str = _strategic_score(cfg, cache, te)
        s_adv = _strategic_score(cfg, _cache(cfg, net_adv, te), te)
        c_cln = evaluation.accuracy_clean(net_cln, te)
        rep.deflection = evaluation.deflection_rate(s_str, s_adv, c_cln)
        extras["deflection_inputs"] = {"strat_fstr": s_str, "strat_fadv": s_adv, "clean_fcln": c_cln}
    doc = _identity(cfg, {
        "checkpoint": {"path": str(ckpt), "train_hash": meta.get("train_hash")},
        "train_log": meta.get("train_log"),
        "report": rep.to_dict(),
        "extras": extras,
        "suite": suite,
        "n_test": N,
    })
    _write_json(out / "report.json", doc)
    return doc


def cmd_infer(cfg, out: Path):
    k = cfg["infer.k"]
    ckpt = cfg["infer.checkpoint"]
    net = load_checkpoint(ckpt)[0] if ckpt else None
    spec_text = cfg["infer.attack"] or cfg["attack.eval"]
    spec = _attack(spec_text, "infer.attack")
    truth = None
    if cfg["infer.generate"]:
        if net is None or cfg["infer.truth"] is None:
            raise ConfigError("infer.generate needs infer.checkpoint and infer.truth")
        if cfg["infer.mode"] not in inference.MODES:
            raise ConfigError("infer.mode must be pred or delta")
        _, te = split(cfg, build_dataset(cfg))
        truth = _utility(cfg, cfg["infer.truth"], te, "infer.truth")
        log, _ = inference.generate_attack_log(net, te, truth, spec, cfg["infer.mode"])
        log.save(out / "attack_log.csv")
    else:
        if cfg["infer.log"] is None:
            raise ConfigError("set infer.log (or infer.generate = true)")
        log = inference.AttackLog.load(cfg["infer.log"], net)
    if not 1 <= k <= log.K - 1:
        raise ConfigError("infer.k must lie in [1, K-1]")
    if log.mode == "pred":
        inferred = inference.infer_targets_predictions(log)
    else:
        if net is None:
            raise ConfigError("delta logs need infer.checkpoint")
        if spec.radius != log.radius:
            raise ConfigError(f"attack radius {spec.radius!r} does not match the log header radius {log.radius!r}")
        inferred = inference.infer_targets_vectors(log, spec, net)
    recon = inference.reconstruct_matrix(inferred, log.y, log.K, k)
    recon.save(out / "inferred_utility.txt")
    Path(out / "inferred_targets.csv").write_text(
        "y,target\n" + "".join(f"{int(c)},{'' if t is None else t}\n" for c, t in zip(log.y, inferred)))
    doc = _identity(cfg, {"mode": log.mode, "k": k, "records": len(log),
                          "included": sum(t is not None for t in inferred),
                          "inferred_utility": recon.values.tolist()})
    if cfg["infer.truth"] is not None:
        if truth is None:
            part = _partition(cfg)
            truth = _utility(cfg, cfg["infer.truth"], Dataset(np.zeros((0, log.d)), [], log.K, part),
                             "infer.truth")
        sets = [targets_of(truth, int(c)) for c in log.y]
        acc, entries = inference.inference_metrics(inferred, sets, recon, truth)
        doc["target_accuracy"], doc["entries_recovered"] = acc, entries
    _write_json(out / "infer_report.json", doc)
    return doc


def sweep_run(cfg, eps):
    """Train the mixed objective at ``eps``; score well-specified and worst-case misspecified accuracy."""
    net, log, tr, te = run_training(cfg.with_overrides(**{"train.objective": "mixed"}), eps)
    u = _utility(cfg, cfg["train.utility"], te, "train.utility")
    U = _uset(cfg, cfg["train.uset"], te, "train.uset")
    cache = _cache(cfg, net, te)
    well = float(evaluation.correct_counts(cache, "strategic", u).sum() / len(te))
    worst, _ = evaluation.worst_case_accuracy(net, te, U, cache=cache, exclude=u)
    return {"clean_acc": evaluation.accuracy_clean(net, te), "well_specified_acc": well,
            "misspecified_worst_acc": worst, "mixed_draws": log.mixed_draws}


def cmd_sweep(cfg, out: Path):
    eps_grid, seeds = cfg["sweep.eps"], cfg["sweep.seeds"]
    if not eps_grid or not seeds:
        raise ConfigError("sweep needs non-empty sweep.eps and sweep.seeds")
    if any(not 0.0 <= e <= 1.0 for e in eps_grid):
        raise ConfigError("sweep.eps values must lie in [0, 1]")
    if cfg["train.utility"] is None or cfg["train.uset"] is None:
        raise ConfigError("sweep needs train.utility and train.uset")
    runs = []
    for seed in seeds:
        run_cfg = cfg.with_overrides(seed=seed)
        for eps in eps_grid:
            runs.append({"eps": eps, "seed": seed, **sweep_run(run_cfg, eps)})
    metrics = ("clean_acc", "well_specified_acc", "misspecified_worst_acc")
    agg = []
    for eps in eps_grid:
        rows = [r for r in runs if r["eps"] == eps]
        entry = {"eps": eps, "n": len(rows)}
        for m in metrics:
            vals = np.array([r[m] for r in rows])
            entry[f"{m}_mean"], entry[f"{m}_std"] = float(vals.mean()), float(vals.std())
        agg.append(entry)
    cols = ["eps", "seed", *metrics]
    Path(out / "sweep_runs.csv").write_text(
        ",".join(cols) + "\n" + "".join(",".join(repr(r[c]) for c in cols) + "\n" for r in runs))
    acols = ["eps", "n"] + [f"{m}_{s}" for m in metrics for s in ("mean", "std")]
    Path(out / "sweep_summary.csv").write_text(
        ",".join(acols) + "\n" + "".join(",".join(repr(a[c]) for c in acols) + "\n" for a in agg))
    doc = _identity(cfg, {"runs": runs, "aggregate": agg})
    _write_json(out / "sweep.json", doc)
    return doc


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "infer": cmd_infer,
            "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="stratrob", description="Strategic-robustness experiments at desk scale.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (runs are sequential; kept for interface compatibility)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        overrides = {"seed": str(args.seed)} if args.seed is not None else None
        cfg = Config.load(args.config, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except (DomainError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, InputError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level guard
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
