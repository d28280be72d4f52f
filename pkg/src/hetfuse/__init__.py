"""Heterogeneous-source data fusion: affine input mapping + latent-variable GPs."""

from .dataset import (FusedDataset, SourceDataset, SplitSpec, Standardizer, fit_standardizer,
                      load_csv, load_manifest_sources, split)
from .gp import GpConfig, GpModel, KernelParams, fit_gp, neg_log_likelihood, predict
from .imc import ImcConfig, LinearMap, ReferenceSpace, apply_map, calibrate, map_all_sources
from .lvgp import LatentMap, LvgpConfig, LvgpModel, dissimilarity, fit_lvgp, predict_lvgp
from .fusion import EvalReport, evaluate, nrmse, run_study, train_baseline_gp, train_fusion, train_single_source
from .benchmarks import BeamSpec, SyntheticFamilySpec, gen_beam, gen_paper_suite, gen_synthetic_family

__version__ = "0.1.0"
