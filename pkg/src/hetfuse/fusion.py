"""Stage-two models and the three-way comparison (fused LVGP, fused GP, single-source GP)."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import FusedDataset, SourceDataset
from .gp import GpConfig, GpModel, fit_gp
from .imc import ReferenceSpace
from .lvgp import LvgpConfig, LvgpModel, fit_lvgp, predict_lvgp

NORMALIZER_NOTE = "NRMSE = RMSE / (max(truth) - min(truth)) of the evaluated rows"

FUSED_GP = "fused_gp"
FUSED_LVGP = "fused_lvgp"
SINGLE = "single_source_gp"


class RoutingError(ValueError):
    pass


def train_fusion(fused: FusedDataset, config: LvgpConfig = LvgpConfig()) -> LvgpModel:
    if len(set(fused.s)) < 2:
        raise ValueError("fused data holds a single source; nothing to fuse")
    return fit_lvgp(fused.X, fused.s, fused.y, config, anchor=fused.ref_source_id,
                    input_names=fused.input_names, input_space=f"ref:{fused.ref_source_id}")


def train_baseline_gp(fused: FusedDataset, config: GpConfig = GpConfig()) -> GpModel:
    """Source-unaware GP on the fused inputs (labels ignored)."""
    return fit_gp(fused.X, fused.y, config, input_names=fused.input_names,
                  input_space=f"ref:{fused.ref_source_id}")


def train_single_source(source: SourceDataset, config: GpConfig = GpConfig()) -> GpModel:
    if source.n < 2:
        raise ValueError(f"{source.source_id}: a single-source GP needs at least 2 rows")
    return fit_gp(source.X, source.y, config, input_names=source.input_names,
                  input_space=f"raw:{source.source_id}")


def sse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.sum((pred - truth) ** 2))


def nrmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape or truth.size == 0:
        raise ValueError("pred and truth must be non-empty and of equal length")
    span = float(truth.max() - truth.min())
    if span <= 0:
        raise ValueError("truth is constant; NRMSE range normalizer is zero")
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / span)


@dataclass(frozen=True)
class ModelRow:
    model_kind: str
    label: str
    train_nrmse_all: float | None
    test_nrmse_all: float | None
    test_nrmse_per_source: dict

    def to_dict(self) -> dict:
        return {"model_kind": self.model_kind, "label": self.label,
                "train_nrmse_all": self.train_nrmse_all, "test_nrmse_all": self.test_nrmse_all,
                "test_nrmse_per_source": dict(self.test_nrmse_per_source)}


@dataclass(frozen=True)
class Prediction:
    model: str
    source_id: str
    inputs: np.ndarray
    input_names: tuple[str, ...]
    y_true: np.ndarray
    y_pred: np.ndarray
    y_std: np.ndarray


@dataclass
class EvalReport:
    rows: list[ModelRow]
    metadata: dict = field(default_factory=dict)
    predictions: list[Prediction] = field(default_factory=list, repr=False)

    def row(self, label: str) -> ModelRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def render(self, focus: str | None = None) -> str:
        """Plain-text table: training/testing NRMSE over all sources plus one focus source."""
        focus = focus or self.metadata.get("focus_source")
        head = ["Model", "Training NRMSE (All sources)", "Testing NRMSE (All sources)"]
        if focus:
            head.append(f"Testing NRMSE ({focus})")
        fmt = lambda v: "--" if v is None else f"{v:.4f}"  # noqa: E731
        body = []
        for r in self.rows:
            line = [r.label, fmt(r.train_nrmse_all), fmt(r.test_nrmse_all)]
            if focus:
                line.append(fmt(r.test_nrmse_per_source.get(focus)))
            body.append(line)
        widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)),
                 "  ".join("-" * w for w in widths)]
        lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
        lines.append(f"({NORMALIZER_NOTE})")
        return "\n".join(lines) + "\n"

    def write_predictions(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        paths = []
        for label in dict.fromkeys(p.model for p in self.predictions):
            preds = [p for p in self.predictions if p.model == label]
            path = outdir / prediction_filename(label)
            names = preds[0].input_names
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["source_id", *names, "y_true", "y_pred", "y_std"])
                for p in preds:
                    for i in range(p.y_true.size):
                        w.writerow([p.source_id, *map(repr, p.inputs[i].tolist()),
                                    repr(float(p.y_true[i])), repr(float(p.y_pred[i])),
                                    repr(float(p.y_std[i]))])
            paths.append(path)
        return paths


def prediction_filename(label: str) -> str:
    return "predictions_" + re.sub(r"[^A-Za-z0-9_.-]", "_", label) + ".csv"


def model_kind(model) -> str:
    if isinstance(model, LvgpModel):
        return FUSED_LVGP
    if model.input_space.startswith("raw:"):
        return SINGLE
    return FUSED_GP


def _predict(model, X, source_id):
    if isinstance(model, LvgpModel):
        return predict_lvgp(model, X, [source_id] * X.shape[0])
    return model.predict(X)


def route(model, ds: SourceDataset, space: ReferenceSpace | None):
    """Inputs for ``model`` on dataset ``ds``, checked against the model's space tag."""
    if model_kind(model) == SINGLE:
        tag = f"raw:{ds.source_id}"
        X = ds.X
    else:
        if space is None:
            raise RoutingError("fused model evaluation needs the reference space")
        tag = space.tag
        X = space.to_reference(ds)
    if model.input_space != tag:
        raise RoutingError(f"model expects inputs in {model.input_space!r}, got {tag!r}")
    return X


def evaluate(models: Mapping[str, object], test_sets: Mapping[str, SourceDataset],
             space: ReferenceSpace | None = None, fused: FusedDataset | None = None,
             metadata: dict | None = None) -> EvalReport:
    """NRMSE per model: pooled over all test rows it can route, and per source.

    Fused models see every source (mapped inputs); a single-source model only
    sees its own source in original inputs. Training NRMSE re-predicts the
    fused training rows and is left empty for single-source models.
    """
    rows, preds = [], []
    for label, model in models.items():
        kind = model_kind(model)
        if kind == SINGLE:
            sid = model.input_space.partition(":")[2]
            if sid not in test_sets:
                raise RoutingError(f"{label}: no test set for source {sid!r}")
            sources = [sid]
        else:
            sources = list(test_sets)
        per_source, all_pred, all_true = {}, [], []
        for sid in sources:
            ds = test_sets[sid]
            X = route(model, ds, space)
            mean, var = _predict(model, X, sid)
            per_source[sid] = nrmse(mean, ds.y)
            all_pred.append(mean)
            all_true.append(ds.y)
            names = model.gp.input_names[: model.n_quantitative] if kind == FUSED_LVGP else model.input_names
            preds.append(Prediction(label, sid, X, tuple(names) or tuple(f"x{i}" for i in range(X.shape[1])),
                                    ds.y, mean, np.sqrt(var)))
        test_all = nrmse(np.concatenate(all_pred), np.concatenate(all_true))
        train_all = None
        if kind != SINGLE and fused is not None:
            if kind == FUSED_LVGP:
                tr = predict_lvgp(model, fused.X, fused.s)[0]
            else:
                tr = model.predict(fused.X)[0]
            train_all = nrmse(tr, fused.y)
        rows.append(ModelRow(kind, label, train_all, test_all, per_source))

    meta = {"nrmse_normalizer": NORMALIZER_NOTE,
            "test_sizes": {k: v.n for k, v in test_sets.items()}}
    if space is not None:
        meta["ref_id"] = space.ref_id
    if fused is not None:
        meta["train_sizes"] = {sid: int(len(fused.rows_of(sid))) for sid in fused.sources}
        meta.setdefault("focus_source", min(meta["train_sizes"], key=lambda k: (meta["train_sizes"][k], k)))
    meta.update(metadata or {})
    return EvalReport(rows, meta, preds)


@dataclass(frozen=True)
class StudyResult:
    report: EvalReport
    models: dict
    space: ReferenceSpace
    fused: FusedDataset
    maps: list


def run_study(train_sets, test_sets: Mapping[str, SourceDataset], *, ref_id: str | None = None,
              imc_config=None, gp_config: GpConfig = GpConfig(), lvgp_config: LvgpConfig = LvgpConfig(),
              single_sources=None) -> StudyResult:
    """map_all_sources -> fused LVGP, fused GP, single-source GP(s) -> evaluate."""
    from .imc import ImcConfig, map_all_sources, reference_space

    maps, fused, _ = map_all_sources(list(train_sets), ref_id, imc_config or ImcConfig(), gp_config)
    space = reference_space(maps, fused)
    by_id = {ds.source_id: ds for ds in train_sets}
    if single_sources is None:
        single_sources = [min(by_id, key=lambda k: (by_id[k].n, k))]
    models = {"GP": train_baseline_gp(fused, lvgp_config.quantitative()),
              "LVGP": train_fusion(fused, lvgp_config)}
    for sid in single_sources:
        models[f"GP-{sid}"] = train_single_source(by_id[sid], gp_config)
    report = evaluate(models, test_sets, space, fused)
    return StudyResult(report, models, space, fused, maps)
