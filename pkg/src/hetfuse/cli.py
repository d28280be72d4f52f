"""Command-line front end: generate | map | train | predict | eval | latent.

Every command works inside one run directory (``--out``). ``map`` writes the
reference space, per-source maps, GA traces and the fused dataset; ``train``
adds ``models/<kind>.json``; ``eval`` writes the report and prediction CSVs;
``latent`` writes the latent table of an LVGP artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import artifacts
from .benchmarks import PAPER_SUITE, SyntheticFamilySpec, gen_paper_suite, gen_synthetic_family
from .dataset import (DatasetError, FusedDataset, ManifestEntry, SourceDataset, load_manifest_sources,
                      read_manifest, write_csv, write_manifest)
from .fusion import FUSED_GP, FUSED_LVGP, evaluate, prediction_filename, train_baseline_gp, train_fusion, train_single_source
from .gp import GpConfig
from .imc import ImcConfig, ReferenceSpace, map_all_sources, reference_space
from .lvgp import LvgpConfig, LvgpModel, export_latent, predict_lvgp, write_latent_csv

log = logging.getLogger("hetfuse")

SUITES = ("beam-paper", "synthetic")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    manifest: str | None = None
    ref_source: str | None = None
    seed: int = 0
    imc: dict = field(default_factory=dict)
    gp: dict = field(default_factory=dict)
    lvgp: dict = field(default_factory=dict)

    def imc_config(self) -> ImcConfig:
        d = {"seed": self.seed, **self.imc}
        if "bounds" in d:
            d["bounds"] = tuple(d["bounds"])
        return ImcConfig(**d)

    def gp_config(self) -> GpConfig:
        d = {"seed": self.seed, **self.gp}
        if "log10_bounds" in d:
            d["log10_bounds"] = tuple(d["log10_bounds"])
        return GpConfig(**d)

    def lvgp_config(self) -> LvgpConfig:
        d = {"seed": self.seed, **self.lvgp}
        if "log10_bounds" in d:
            d["log10_bounds"] = tuple(d["log10_bounds"])
        return LvgpConfig(**d)

    def echo(self) -> dict:
        """Resolved settings, every seed filled in."""
        imc, gp, lv = self.imc_config(), self.gp_config(), self.lvgp_config()
        return {"manifest": self.manifest, "ref_source": self.ref_source, "seed": self.seed,
                "imc": imc.to_dict(), "gp": {**asdict(gp), "log10_bounds": list(gp.log10_bounds)},
                "lvgp": {**asdict(lv), "log10_bounds": list(lv.log10_bounds)}}


def load_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known - {"out"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **{k: v for k, v in doc.items() if k in known})
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "ref", None):
        cfg.ref_source = args.ref
    if getattr(args, "manifest", None):
        cfg.manifest = args.manifest
    return cfg


class Outputs:
    """Tracks written files so a failed command can remove what it produced."""

    def __init__(self, root: Path):
        self.root = root
        self.paths: list[Path] = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(p)
        return p

    def write_text(self, rel: str, text: str) -> Path:
        p = self.path(rel)
        p.write_text(text, encoding="utf-8")
        return p

    def write_json(self, rel: str, obj) -> Path:
        return self.write_text(rel, json.dumps(obj, indent=2) + "\n")

    def rollback(self):
        for p in self.paths:
            if p.is_file():
                p.unlink()


@contextmanager
def run_outputs(out: str):
    root = Path(out)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {root}: {exc}") from None
    outputs = Outputs(root)
    handler = logging.FileHandler(root / "run.log", mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    try:
        yield outputs
    except BaseException:
        outputs.rollback()
        raise
    finally:
        log.removeHandler(handler)
        handler.close()


# --- generate ----------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; available: {', '.join(SUITES)}")
    seed = args.seed if args.seed is not None else 0
    with run_outputs(args.out) as out:
        entries = []
        if args.suite == "beam-paper":
            datasets = gen_paper_suite(seed)
            by_id: dict[str, dict] = {}
            for ds in datasets:
                role = ds.metadata["split"]
                name = f"{ds.source_id}_{role}.csv"
                write_csv(ds, out.path(name))
                by_id.setdefault(ds.source_id, {"ds": ds})[role] = name
                print(f"{name}: {ds.n} rows")
            for sid, info in by_id.items():
                ds = info["ds"]
                entries.append(ManifestEntry(sid, info["train"], ds.input_names, ds.output_name,
                                             info.get("test")))
            meta = {"suite": "beam-paper", "seed": seed,
                    "sources": {sid: info["ds"].metadata for sid, info in by_id.items()},
                    "sizes": {sid: [ntr, nte] for sid, _, ntr, nte in PAPER_SUITE}}
        else:
            spec = SyntheticFamilySpec(seed=seed)
            ref, src, (A, b) = gen_synthetic_family(spec, 60, 30)
            for ds in (ref, src):
                write_csv(ds, out.path(f"{ds.source_id}.csv"))
                entries.append(ManifestEntry(ds.source_id, f"{ds.source_id}.csv", ds.input_names,
                                             ds.output_name))
                print(f"{ds.source_id}.csv: {ds.n} rows")
            out.write_json("hidden_map.json", {"A": A.tolist(), "b": b.tolist(),
                                               "source_id": src.source_id, "ref_id": ref.source_id})
            meta = {"suite": "synthetic", "seed": seed, "base": spec.base,
                    "noise_sigma": spec.noise_sigma, "domain": [-1.0, 1.0]}
        write_manifest(entries, out.path("manifest.json"), meta)
    return 0


# --- map -------------------------------------------------------------------------

def _write_fused(fused: FusedDataset, path: Path):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source_id", *fused.input_names, "y"])
        for i in range(fused.n):
            w.writerow([fused.s[i], *map(repr, fused.X[i].tolist()), repr(float(fused.y[i]))])


def _read_fused(run: Path) -> FusedDataset:
    space = _read_space(run)
    path = run / "fused.csv"
    if not path.is_file():
        raise UsageError(f"{path} not found; run `hetfuse map` first")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    s = [r[0] for r in body]
    arr = np.array([[float(v) for v in r[1:]] for r in body])
    meta = json.loads((run / "space.json").read_text(encoding="utf-8"))
    return FusedDataset(arr[:, :-1], s, arr[:, -1], space.ref_id, tuple(header[1:-1]),
                        space.ref_standardizer, tuple(meta["source_order"]))


def _read_space(run: Path) -> ReferenceSpace:
    path = run / "space.json"
    if not path.is_file():
        raise UsageError(f"{path} not found; run `hetfuse map` first")
    return ReferenceSpace.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _read_run_config(run: Path, args) -> RunConfig:
    """Config echoed by `map`, with command-line overrides applied on top."""
    path = run / "config.json"
    base = RunConfig()
    if path.is_file():
        doc = json.loads(path.read_text(encoding="utf-8"))
        base = RunConfig(**{k: doc[k] for k in ("manifest", "ref_source", "seed", "imc", "gp", "lvgp")})
    if getattr(args, "config", None):
        over = load_run_config(args)
        return over
    if getattr(args, "seed", None) is not None:
        base.seed = args.seed
        base.imc = {k: v for k, v in base.imc.items() if k != "seed"}
        base.gp = {k: v for k, v in base.gp.items() if k != "seed"}
        base.lvgp = {k: v for k, v in base.lvgp.items() if k != "seed"}
    if getattr(args, "manifest", None):
        base.manifest = args.manifest
    return base


def cmd_map(args) -> int:
    cfg = load_run_config(args)
    if not cfg.manifest:
        raise UsageError("map needs a manifest (--manifest or config 'manifest')")
    sources = load_manifest_sources(cfg.manifest, "train")
    ids = [ds.source_id for ds in sources]
    if cfg.ref_source and cfg.ref_source not in ids:
        raise UsageError(f"reference {cfg.ref_source!r} not in manifest sources {ids}")
    with run_outputs(args.out) as out:
        out.write_json("config.json", cfg.echo())
        maps, fused, ref_gp = map_all_sources(sources, cfg.ref_source, cfg.imc_config(), cfg.gp_config())
        space = reference_space(maps, fused)
        out.write_json("space.json", {**space.to_dict(), "source_order": list(fused.sources)})
        artifacts.save_model(ref_gp, out.path("ref_gp.json"))
        for m in maps:
            out.write_json(f"maps/{m.source_id}.json", m.to_dict())
            with out.path(f"traces/{m.source_id}_trace.csv").open("w", encoding="utf-8") as fh:
                fh.write("generation,best_loss\n")
                for g, v in enumerate(m.trace):
                    fh.write(f"{g},{v!r}\n")
            print(f"{m.source_id} -> {m.ref_id}: loss {m.loss:.6g}")
            log.info("map %s -> %s loss %r", m.source_id, m.ref_id, m.loss)
        _write_fused(fused, out.path("fused.csv"))
        print(f"reference {fused.ref_source_id}; fused dataset {fused.n} rows, {len(maps)} map(s)")
    return 0


# --- train -----------------------------------------------------------------------

def model_filename(kind: str) -> str:
    return kind.replace(":", "_") + ".json"


def cmd_train(args) -> int:
    run = Path(args.out)
    kind = args.kind
    cfg = _read_run_config(run, args)
    if kind not in (FUSED_GP, FUSED_LVGP) and not kind.startswith("single_source:"):
        raise UsageError(f"unknown model kind {kind!r}; use fused_gp, fused_lvgp or single_source:<id>")
    with run_outputs(args.out) as out:
        if kind == FUSED_LVGP:
            model = train_fusion(_read_fused(run), cfg.lvgp_config())
        elif kind == FUSED_GP:
            model = train_baseline_gp(_read_fused(run), cfg.lvgp_config().quantitative())
        else:
            sid = kind.partition(":")[2]
            if not cfg.manifest:
                raise UsageError("single-source training needs the manifest")
            by_id = {ds.source_id: ds for ds in load_manifest_sources(cfg.manifest, "train")}
            if sid not in by_id:
                raise UsageError(f"unknown source {sid!r}; manifest has {sorted(by_id)}")
            model = train_single_source(by_id[sid], cfg.gp_config())
        path = artifacts.save_model(model, out.path(f"models/{model_filename(kind)}"), {"model_kind": kind})
        print(f"wrote {path}")
        if isinstance(model, LvgpModel):
            print(f"latent points: {len(model.latent.levels)}")
    return 0


# --- predict ---------------------------------------------------------------------

def cmd_predict(args) -> int:
    model = artifacts.load_model(args.model)
    rows = []
    with Path(args.input).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DatasetError(f"{args.input}: empty dataset")
    fused_model = not model.input_space.startswith("raw:")
    if fused_model and args.source is None:
        raise UsageError("fused models need --source to route inputs")
    sid = args.source or model.input_space.partition(":")[2]
    if fused_model:
        space = _read_space(Path(args.out))
        if sid == space.ref_id:
            names = space.input_names
        else:
            if sid not in space.maps:
                raise UsageError(f"no map for source {sid!r}")
            names = _source_inputs(Path(args.out), sid)
    else:
        names = model.input_names
    try:
        X = np.array([[float(r[c]) for c in names] for r in rows])
    except KeyError as exc:
        raise DatasetError(f"input CSV lacks column {exc}") from None
    ds = SourceDataset(sid, names, X, np.zeros(len(rows)))
    if fused_model:
        Xr = space.to_reference(ds)
        if isinstance(model, LvgpModel):
            mean, var = predict_lvgp(model, Xr, [sid] * len(rows))
        else:
            mean, var = model.predict(Xr)
    else:
        mean, var = model.predict(X)
    with run_outputs(args.out) as out:
        path = out.path(args.output or "predictions.csv")
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source_id", *names, "y_pred", "y_std"])
            for i in range(len(rows)):
                w.writerow([sid, *map(repr, X[i].tolist()), repr(float(mean[i])),
                            repr(float(np.sqrt(var[i])))])
        print(f"wrote {path}")
    return 0


def _source_inputs(run: Path, sid: str) -> tuple[str, ...]:
    cfg = _read_run_config(run, argparse.Namespace())
    if cfg.manifest:
        for e in read_manifest(cfg.manifest):
            if e.source_id == sid:
                return e.input_columns
    raise UsageError(f"cannot find input columns for source {sid!r}")


# --- eval ------------------------------------------------------------------------

def cmd_eval(args) -> int:
    run = Path(args.out)
    cfg = _read_run_config(run, args)
    paths = [Path(p) for p in args.models] if args.models else sorted((run / "models").glob("*.json"))
    if not paths:
        raise UsageError(f"no model artifacts given or found in {run / 'models'}")
    for p in paths:
        if not p.is_file():
            raise UsageError(f"missing model file: {p}")
    if not cfg.manifest:
        raise UsageError("eval needs the manifest to locate test sets")
    tests = {ds.source_id: ds for ds in load_manifest_sources(cfg.manifest, "test")}
    if not tests:
        raise UsageError("manifest lists no test sets (test_csv_path)")
    space = _read_space(run)
    fused = _read_fused(run)
    models = {}
    for p in paths:
        doc = json.loads(p.read_text(encoding="utf-8"))
        label = doc.get("model_kind") or p.stem
        models[label] = artifacts.model_from_dict(doc)
    report = evaluate(models, tests, space, fused, {"seed": cfg.seed, "ref_id": space.ref_id})
    with run_outputs(args.out) as out:
        out.write_text("report.json", report.to_json())
        table = report.render(args.focus)
        out.write_text("report.txt", table)
        for label in dict.fromkeys(p.model for p in report.predictions):
            out.paths.append(run / prediction_filename(label))
        report.write_predictions(run)
        print(table, end="")
    return 0


# --- latent ----------------------------------------------------------------------

def cmd_latent(args) -> int:
    model = artifacts.load_model(args.model)
    if not isinstance(model, LvgpModel):
        raise UsageError(f"{args.model}: no latent space (not an LVGP model)")
    ref = args.ref or model.latent.anchor_level
    rows = export_latent(model, ref)
    with run_outputs(args.out) as out:
        path = out.path(args.output or "latent.csv")
        write_latent_csv(rows, path)
    print(f"level  z1  z2  D (vs {ref})")
    for lvl, z1, z2, d in rows:
        print(f"{lvl}  {z1 + 0.0:.4f}  {z2 + 0.0:.4f}  {d:.4f}")
    return 0


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override it")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default="run", help="run directory")
    common.add_argument("--ref", help="reference source id")

    p = argparse.ArgumentParser(prog="hetfuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark suite")
    g.add_argument("--suite", required=True, help=f"one of: {', '.join(SUITES)}")
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("map", parents=[common], help="calibrate maps and write the fused dataset")
    m.add_argument("--manifest")
    m.set_defaults(func=cmd_map)

    t = sub.add_parser("train", parents=[common], help="train one model on a mapped run")
    t.add_argument("--kind", required=True, help="fused_gp | fused_lvgp | single_source:<id>")
    t.add_argument("--manifest")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="predict with a model artifact")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True, help="CSV with the source's input columns")
    pr.add_argument("--source", help="source id of the input rows (fused models)")
    pr.add_argument("--output", help="file name inside the run directory")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", parents=[common], help="NRMSE report over the manifest test sets")
    e.add_argument("models", nargs="*")
    e.add_argument("--manifest")
    e.add_argument("--focus", help="source shown in the last table column")
    e.set_defaults(func=cmd_eval)

    la = sub.add_parser("latent", parents=[common], help="latent coordinates and dissimilarities")
    la.add_argument("--model", required=True)
    la.add_argument("--output", help="file name inside the run directory")
    la.set_defaults(func=cmd_latent)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not logging.getLogger().handlers:
        console = logging.StreamHandler()
        console.setLevel(logging.WARNING)
        console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logging.getLogger().addHandler(console)
    log.setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hetfuse {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, artifacts.ArtifactError, KeyError, ValueError, RuntimeError, OSError) as exc:
        print(f"hetfuse {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
