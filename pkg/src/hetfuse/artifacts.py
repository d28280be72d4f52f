"""JSON model artifacts.

Floats go through ``json`` which writes ``repr`` (shortest round-trip form), so
a save/load cycle reproduces every stored number bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Standardizer
from .gp import GpModel
from .lvgp import LatentMap, LvgpModel


class ArtifactError(ValueError):
    pass


def gp_to_dict(model: GpModel) -> dict:
    return {
        "kind": "gp",
        "phi": model.phi.tolist(),
        "mu": model.mu,
        "sigma2": model.sigma2,
        "nugget": model.nugget,
        "X_train": model.X_train.tolist(),
        "y_train": model.y_train.tolist(),
        "standardizers": {"x": model.x_standardizer.to_dict(),
                          "y": {"center": model.y_center, "scale": model.y_scale}},
        "input_names": list(model.input_names),
        "input_space": model.input_space,
        "seed": model.seed,
        "optimizer_trace_summary": model.trace,
    }


def gp_from_dict(d: dict) -> GpModel:
    st = d["standardizers"]
    return GpModel(np.array(d["phi"], dtype=float), float(d["mu"]), float(d["sigma2"]),
                   float(d["nugget"]), np.array(d["X_train"], dtype=float).reshape(len(d["y_train"]), -1),
                   np.array(d["y_train"], dtype=float), Standardizer.from_dict(st["x"]),
                   float(st["y"]["center"]), float(st["y"]["scale"]), tuple(d.get("input_names", ())),
                   d.get("input_space", ""), int(d.get("seed", 0)), d.get("optimizer_trace_summary") or {})


def lvgp_to_dict(model: LvgpModel) -> dict:
    d = gp_to_dict(model.gp)
    d.update({
        "kind": "lvgp",
        "levels": list(model.latent.levels),
        "coords": model.latent.coords.tolist(),
        "anchor_level": model.latent.anchor_level,
        "source_column": list(model.source_column),
        "n_quantitative": model.n_quantitative,
    })
    return d


def lvgp_from_dict(d: dict) -> LvgpModel:
    latent = LatentMap(tuple(d["levels"]), np.array(d["coords"], dtype=float), d["anchor_level"])
    return LvgpModel(gp_from_dict(d), latent, tuple(d["source_column"]), int(d["n_quantitative"]))


def model_to_dict(model) -> dict:
    return lvgp_to_dict(model) if isinstance(model, LvgpModel) else gp_to_dict(model)


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "gp":
        return gp_from_dict(d)
    if kind == "lvgp":
        return lvgp_from_dict(d)
    raise ArtifactError(f"unknown model kind {kind!r}")


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"


def save_model(model, path, extra: dict | None = None) -> Path:
    d = model_to_dict(model)
    if extra:
        d.update(extra)
    path = Path(path)
    path.write_text(dumps(d), encoding="utf-8")
    return path


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing model file: {path}")
    return model_from_dict(json.loads(path.read_text(encoding="utf-8")))
