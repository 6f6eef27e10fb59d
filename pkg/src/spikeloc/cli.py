"""Command-line front end: ``spikeloc {dataset,encode,train,eval,energy,corrupt}``.

Every command prints one ``config:`` audit line with the effective settings
before doing any work. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numeric failure.

Config files are INI with the sections and keys in :data:`CONFIG_KEYS`;
unknown sections or keys are rejected. Command-line flags override the file.
``--seed`` overrides every named seed (data_seed, init_seed, encode_seed,
corrupt_seed). ``SPIKELOC_THREADS`` caps BLAS worker threads.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import corrupt, data, energy, evaluation
from .codec import SCHEMES, CodingScheme
from .core import FormatError, Rng, load_events, load_spikes, save_spikes
from .metrics import EvalReport, rad
from .net import Network, load_checkpoint, save_checkpoint, snn_tiny, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# section -> key -> (type, default)
CONFIG_KEYS = {
    "data": {
        "n_train": (int, 2000), "n_val": (int, 400), "size": (int, 32), "modality": (str, "static"),
        "texture": (float, 0.1), "shapes": (str, ",".join(data.SHAPES)),
    },
    "coding": {
        "scheme": (str, "rate"), "timesteps": (int, 4), "tau": (float, 1.0), "dx": (float, 2.0),
        "dy": (float, 2.0), "threshold": (float, 0.1), "signed": (bool, False),
    },
    "model": {"name": (str, "snn_tiny"), "widths": (str, "8,16"), "pool": (int, 2)},
    "train": {"epochs": (int, 40), "batch_size": (int, 32), "lr": (float, 3e-3)},
    "seeds": {"data_seed": (int, 0), "init_seed": (int, 0), "encode_seed": (int, 0), "corrupt_seed": (int, 0)},
    "paths": {"dataset": (str, ""), "checkpoint": (str, ""), "out": (str, "")},
}
MODELS = ("snn_tiny",)


class ConfigError(ValueError):
    pass


def _convert(typ, raw: str, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def default_config() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in CONFIG_KEYS.items()}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Defaults overlaid with the INI ``text``; unknown sections/keys raise :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = default_config()
    for sec in parser.sections():
        if sec not in CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown section [{sec}]; known: {sorted(CONFIG_KEYS)}")
        for key, raw in parser.items(sec):
            if key not in CONFIG_KEYS[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]; known: {sorted(CONFIG_KEYS[sec])}")
            cfg[sec][key] = _convert(CONFIG_KEYS[sec][key][0], raw, f"{source} [{sec}] {key}")
    return cfg


def load_config(path) -> dict:
    if path is None:
        return default_config()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), str(p))


def validate_config(cfg: dict) -> None:
    if cfg["coding"]["scheme"] not in SCHEMES:
        raise ConfigError(f"unknown coding scheme {cfg['coding']['scheme']!r}; choose from {SCHEMES}")
    if cfg["coding"]["timesteps"] < 1:
        raise ConfigError("timesteps must be >= 1")
    if cfg["model"]["name"] not in MODELS:
        raise ConfigError(f"unknown model {cfg['model']['name']!r}; choose from {MODELS}")
    for key in ("n_train", "n_val"):
        if cfg["data"][key] < 0:
            raise ConfigError(f"{key} must be >= 0")
    if cfg["train"]["epochs"] < 0 or cfg["train"]["batch_size"] < 1 or cfg["train"]["lr"] <= 0:
        raise ConfigError("need epochs >= 0, batch_size >= 1 and lr > 0")
    for sec, key in (("paths", "dataset"), ("paths", "checkpoint")):
        value = cfg[sec][key]
        if value and not Path(value).exists():
            raise ConfigError(f"[{sec}] {key}: path does not exist: {value}")
    try:
        scheme_of(cfg)
        gen_params(cfg)
        widths_of(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def scheme_of(cfg: dict) -> CodingScheme:
    c = cfg["coding"]
    return CodingScheme(c["scheme"], c["timesteps"], c["tau"], c["dx"], c["dy"], c["threshold"], c["signed"])


def gen_params(cfg: dict) -> data.GenParams:
    d = cfg["data"]
    return data.GenParams(size=d["size"], shapes=tuple(s.strip() for s in d["shapes"].split(",") if s.strip()),
                          texture=d["texture"], modality=d["modality"])


def widths_of(cfg: dict) -> tuple[int, int]:
    try:
        w = tuple(int(v) for v in cfg["model"]["widths"].split(","))
    except ValueError:
        raise ConfigError(f"[model] widths must be two integers, got {cfg['model']['widths']!r}") from None
    if len(w) != 2 or min(w) < 1:
        raise ConfigError(f"[model] widths must be two positive integers, got {cfg['model']['widths']!r}")
    return w


def build_network_spec(cfg: dict, in_channels: int, size: int):
    scheme = scheme_of(cfg)
    return snn_tiny(scheme.channels(in_channels), size, scheme.timesteps, widths=widths_of(cfg),
                    pool=cfg["model"]["pool"], trainable_coding=scheme.name == "trainable",
                    input_weights=scheme.input_weights())


def audit(command: str, cfg: dict, extra: dict | None = None) -> None:
    doc = {"command": command, **cfg}
    if extra:
        doc["args"] = extra
    print("config: " + json.dumps(doc, sort_keys=True, separators=(",", ":")), flush=True)


def _out(args, cfg, default: str) -> Path:
    return Path(args.out or cfg["paths"]["out"] or default)


def _dataset_path(args, cfg) -> Path:
    p = getattr(args, "dataset", None) or cfg["paths"]["dataset"]
    if not p:
        raise ConfigError("no dataset given (use --dataset or [paths] dataset)")
    return Path(p)


def _refuse_overwrite(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_dataset(args, cfg) -> int:
    if args.action == "gen":
        root = _out(args, cfg, "dataset")
        audit("dataset gen", cfg, {"out": str(root)})
        _refuse_overwrite(root / data.MANIFEST_NAME, args.force)
        params = gen_params(cfg)
        seed = cfg["seeds"]["data_seed"]
        samples = data.generate(cfg["data"]["n_train"], cfg["data"]["n_val"], seed, params)
        manifest_path = data.save_dataset(root, samples, params, seed, force=args.force)
        manifest = data.read_manifest(manifest_path)
        print(f"wrote {len(samples)} samples to {root}")
        _print_summary(manifest)
        return EXIT_OK
    path = Path(args.path or _dataset_path(args, cfg))
    audit("dataset inspect", cfg, {"path": str(path)})
    _print_summary(data.read_manifest(path))
    return EXIT_OK


def _print_summary(manifest: data.DatasetManifest) -> None:
    recs = manifest.records
    if not recs:
        print("0 samples")
        return
    counts = {}
    for r in recs:
        counts[r[1]] = counts.get(r[1], 0) + 1
    boxes = np.array([r[4:] for r in recs], dtype=np.float64)
    w, h = boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1]
    print(f"{len(recs)} samples: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items(), key=lambda kv: kv[0] != "train")))
    print(f"box width mean {w.mean():.4f} min {w.min():.4f} max {w.max():.4f}")
    print(f"box height mean {h.mean():.4f} min {h.min():.4f} max {h.max():.4f}")
    cx, cy = (boxes[:, 0] + boxes[:, 2]) / 2, (boxes[:, 1] + boxes[:, 3]) / 2
    print(f"box centre mean ({cx.mean():.4f}, {cy.mean():.4f})")
    print(f"manifest sha256 {manifest.digest()}")


def _read_input(path: Path):
    suffix = path.suffix.lower()
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise data.DataError(f"cannot read {path}: {exc}") from exc
    if suffix == ".pgm":
        try:
            return data.read_pgm(blob)
        except ValueError as exc:
            raise data.DataError(f"{path}: {exc}") from exc
    if suffix == ".evts":
        return load_events(path)
    if suffix == ".spkt":
        return load_spikes(path)
    raise data.DataError(f"{path}: unsupported input type (expected .pgm, .evts or .spkt)")


def cmd_encode(args, cfg) -> int:
    src = Path(args.input)
    out = _out(args, cfg, src.with_suffix(".spkt").name)
    audit("encode", cfg, {"input": str(src), "out": str(out)})
    scheme = scheme_of(cfg)
    if scheme.name == "trainable":
        raise ConfigError("trainable coding is learned inside the network; it has no standalone spike output")
    _refuse_overwrite(out, args.force)
    x = _read_input(src)
    spikes = scheme.encode(x, Rng(cfg["seeds"]["encode_seed"]).derive(evaluation.EVAL_STREAM, 0))
    save_spikes(out, spikes)
    total = int(spikes.sum())
    print(f"total_spikes {total} mean_rate {total / spikes.size:.6f} shape {'x'.join(map(str, spikes.shape))}")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    root = _dataset_path(args, cfg)
    out = _out(args, cfg, "model.snnw")
    log_path = out.with_suffix(".csv")
    audit("train", cfg, {"dataset": str(root), "out": str(out), "log": str(log_path)})
    _refuse_overwrite(out, args.force)
    scheme = scheme_of(cfg)
    train_set = data.load_dataset(root, "train")
    val_set = data.load_dataset(root, "val")
    if not train_set:
        raise data.DataError(f"{root}: no training samples")
    _check_scheme_data(scheme, train_set[0])
    c, size = _input_geometry(train_set[0])
    net = Network(build_network_spec(cfg, c, size), seed=cfg["seeds"]["init_seed"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_miou"])

        def log(row):
            w.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_miou"])])
            fh.flush()
            print(f"epoch {row['epoch']} loss {row['train_loss']:.5f} val_miou {row['val_miou']:.3f}", flush=True)

        t = cfg["train"]
        result = train(net, train_set, val_set, scheme, epochs=t["epochs"], batch_size=t["batch_size"],
                       lr=t["lr"], seed=cfg["seeds"]["init_seed"], encode_seed=cfg["seeds"]["encode_seed"],
                       log=log)
    save_checkpoint(out, result.checkpoint)
    print(f"best epoch {result.checkpoint.epoch} best val_miou {result.best_val_miou:.3f} -> {out}")
    return EXIT_OK


def _check_scheme_data(scheme: CodingScheme, sample) -> None:
    kind = "event" if sample.events is not None else "static"
    if kind != scheme.modality:
        raise ConfigError(f"{scheme.name} coding needs {scheme.modality} data but the dataset is {kind}")


def _input_geometry(sample) -> tuple[int, int]:
    if sample.events is not None:
        return 2, sample.events.height
    return sample.image.shape[0], sample.image.shape[1]


def _load_model(args, cfg):
    path = args.checkpoint or cfg["paths"]["checkpoint"]
    if not path:
        raise ConfigError("no checkpoint given")
    ckpt = load_checkpoint(path)
    scheme_d = dict(ckpt.scheme or {"name": cfg["coding"]["scheme"], "timesteps": ckpt.spec.timesteps})
    return ckpt, CodingScheme(**scheme_d)


def cmd_eval(args, cfg) -> int:
    out = _out(args, cfg, "eval")
    root = _dataset_path(args, cfg)
    audit("eval", cfg, {"checkpoint": args.checkpoint, "dataset": str(root), "corruption": args.corruption,
                        "severity": args.severity, "sweep": args.sweep, "out": str(out)})
    ckpt, scheme = _load_model(args, cfg)
    if args.corruption and args.sweep:
        raise ConfigError("--corruption and --sweep are mutually exclusive")
    if args.corruption:
        evaluation.check_modality(args.corruption, scheme)
    if args.sweep and args.severity is not None:
        raise ConfigError("--severity does not apply to a sweep")
    csv_path, json_path = out.with_suffix(".csv"), out.with_suffix(".json")
    for p in (csv_path, json_path):
        _refuse_overwrite(p, args.force)
    samples = data.load_dataset(root, "val")
    if not samples:
        raise data.DataError(f"{root}: no validation samples")
    _check_scheme_data(scheme, samples[0])
    net = ckpt.network()
    seeds = dict(encode_seed=cfg["seeds"]["encode_seed"], corrupt_seed=cfg["seeds"]["corrupt_seed"])
    partial = None
    if args.sweep:
        report = evaluation.sweep(net, samples, scheme, **seeds,
                                  log=lambda r: print(f"{r['corruption']} s{r['severity']} miou {r['miou']:.3f}"))
    else:
        clean = evaluation.evaluate_miou(net, samples, scheme, **seeds)
        report = EvalReport(clean)
        if args.corruption:
            sev = args.severity or 1
            m = evaluation.evaluate_miou(net, samples, scheme, args.corruption, sev, **seeds)
            partial = {"corruption": args.corruption, "severity": sev, "miou": m, "rad": rad(clean, m)}
    out.parent.mkdir(parents=True, exist_ok=True)
    if partial:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["corruption", "severity", "miou_clean", "miou_corrupted", "rad"])
        w.writerow([partial["corruption"], partial["severity"], repr(report.miou_clean), repr(partial["miou"]),
                    repr(partial["rad"])])
        csv_path.write_text(buf.getvalue())
        summary = json.dumps({"miou_clean": report.miou_clean, **partial}, indent=2, sort_keys=True)
    else:
        csv_path.write_text(report.to_csv())
        summary = report.summary()
    json_path.write_text(summary + "\n")
    print(f"clean miou {report.miou_clean:.3f}")
    if partial:
        print(f"{partial['corruption']} s{partial['severity']} miou {partial['miou']:.3f} rad {partial['rad']:.3f}")
    for name, value in report.mrad_vector().items() if report.corrupted else ():
        print(f"mrad {name} {value:.3f}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_energy(args, cfg) -> int:
    out = _out(args, cfg, "energy")
    root = _dataset_path(args, cfg)
    audit("energy", cfg, {"checkpoint": args.checkpoint, "dataset": str(root), "attach": args.attach,
                          "timesteps": args.timesteps, "out": str(out)})
    ckpt, scheme = _load_model(args, cfg)
    csv_path, svg_path = out.with_suffix(".csv"), out.with_suffix(".svg")
    for p in (csv_path, svg_path):
        _refuse_overwrite(p, args.force)
    spec = ckpt.spec
    if args.timesteps is not None and args.timesteps != spec.timesteps:
        d = scheme.to_dict()
        d["timesteps"] = args.timesteps
        scheme = CodingScheme(**d)
        spec = spec.with_timesteps(args.timesteps, scheme.input_weights())
    net = Network(spec, ckpt.params)
    samples = data.load_dataset(root, "val")
    if not samples:
        raise data.DataError(f"{root}: no validation samples")
    _check_scheme_data(scheme, samples[0])
    x = evaluation.encode_corrupted(samples, scheme, encode_seed=cfg["seeds"]["encode_seed"])
    stats = energy.collect_spike_stats(net, x)
    report = energy.energy_report(spec, stats, attach=args.attach)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(report.to_csv())
    svg_path.write_text(energy.block_rates_svg(report.block_rates, f"Spike rate per block ({scheme.name}, T={spec.timesteps})"))
    print(f"E_ANN {report.e_ann_mj:.6g} mJ E_SNN {report.e_snn_mj:.6g} mJ ratio {report.ratio:.4f}")
    print(f"wrote {csv_path} and {svg_path}")
    return EXIT_OK


def cmd_corrupt(args, cfg) -> int:
    src = Path(args.input)
    out = _out(args, cfg, src.stem + f".{args.corruption}{args.severity}" + src.suffix)
    audit("corrupt", cfg, {"input": str(src), "corruption": args.corruption, "severity": args.severity,
                           "out": str(out)})
    kind = corrupt.modality(args.corruption)
    _refuse_overwrite(out, args.force)
    x = _read_input(src)
    if isinstance(x, np.ndarray) and x.dtype == np.uint8:
        have = "event"
    elif isinstance(x, np.ndarray):
        have = "static"
    else:
        raise ConfigError("event corruptions act on sliced tensors; encode the .evts file with event_slice first")
    if have != kind:
        raise evaluation.ModalityError(f"{args.corruption} is an {kind} corruption but {src} holds {have} data")
    rng = Rng(cfg["seeds"]["corrupt_seed"]).derive(evaluation.CORRUPT_STREAM, 0, args.severity, 0)
    y = corrupt.apply(args.corruption, x, args.severity, rng)
    out.parent.mkdir(parents=True, exist_ok=True)
    if kind == "static":
        out.write_bytes(data.pgm_bytes(y))
    else:
        save_spikes(out, y)
    print(f"{args.corruption} severity {args.severity} param {corrupt.severity_param(args.corruption, args.severity)} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="override every named seed")
    common.add_argument("--scheme", help=f"coding scheme, one of {', '.join(SCHEMES)}")
    common.add_argument("--timesteps", type=int, help="number of time-steps T")
    common.add_argument("--out", help="output path or prefix")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = argparse.ArgumentParser(prog="spikeloc", description="Spiking-network localization toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dataset", parents=[common], help="generate or inspect a synthetic dataset")
    d.add_argument("action", choices=("gen", "inspect"))
    d.add_argument("path", nargs="?", help="dataset directory or manifest (inspect)")

    e = sub.add_parser("encode", parents=[common], help="encode a .pgm or .evts file to SPKT")
    e.add_argument("input")

    t = sub.add_parser("train", parents=[common], help="train a network on a dataset")
    t.add_argument("--dataset")

    v = sub.add_parser("eval", parents=[common], help="clean, corrupted or sweep evaluation")
    v.add_argument("checkpoint")
    v.add_argument("--dataset")
    v.add_argument("--corruption", choices=tuple(corrupt.SEVERITY_TABLE))
    v.add_argument("--severity", type=int, choices=range(1, 6), metavar="1..5")
    v.add_argument("--sweep", action="store_true", help="every corruption of the pipeline's modality x severity 1..5")

    g = sub.add_parser("energy", parents=[common], help="spike-rate and energy report")
    g.add_argument("checkpoint")
    g.add_argument("--dataset")
    g.add_argument("--attach", choices=("input", "output"), default="input",
                   help="which activations give a layer's spike rate")

    c = sub.add_parser("corrupt", parents=[common], help="corrupt a .pgm image or .spkt tensor")
    c.add_argument("input")
    c.add_argument("--corruption", required=True, choices=tuple(corrupt.SEVERITY_TABLE))
    c.add_argument("--severity", type=int, required=True, choices=range(1, 6), metavar="1..5")
    return p


def effective_config(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        for k in cfg["seeds"]:
            cfg["seeds"][k] = args.seed
    if args.scheme is not None:
        cfg["coding"]["scheme"] = args.scheme
    if args.timesteps is not None:
        cfg["coding"]["timesteps"] = args.timesteps
    validate_config(cfg)
    return cfg


def _thread_limit():
    raw = os.environ.get("SPIKELOC_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SPIKELOC_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"SPIKELOC_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


COMMANDS = {"dataset": cmd_dataset, "encode": cmd_encode, "train": cmd_train, "eval": cmd_eval,
            "energy": cmd_energy, "corrupt": cmd_corrupt}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = effective_config(args)
        with _thread_limit():
            return COMMANDS[args.command](args, cfg)
    except FloatingPointError as exc:
        _err("numeric failure", exc)
        return EXIT_NUMERIC
    except (data.DataError, FormatError, OSError) as exc:
        if isinstance(exc, FileExistsError):
            _err("config error", exc)
            return EXIT_CONFIG
        _err("data error", exc)
        return EXIT_DATA
    except (ConfigError, ValueError, TypeError) as exc:
        _err("config error", exc)
        return EXIT_CONFIG


def _err(kind: str, exc: BaseException) -> None:
    print(f"spikeloc: {kind}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
