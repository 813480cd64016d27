"""Feature-matrix assembly for the three feature sources.

radiomics: one row per slice, the 374-feature hand-crafted catalog.
crbm-image: one row per slice; the ROI crop is standardized to the model's
input size, pushed through the CRBM, the hidden maps are combined by a
1x1 reduction and flattened.
crbm-patch: one row per non-overlapping ROI patch, same per-patch encoding;
rows remember their parent slice so scores can be pooled back.
"""

from dataclasses import dataclass

import numpy as np

from . import crbm as crbm_mod
from . import radiomics as radiomics_mod
from .config import PipelineConfig, effective_patch_stride
from .data_model import (Dataset, Image2D, crop_to_roi, extract_patches,
                         load_sample, resize_or_pad)
from .errors import ConfigError


@dataclass(frozen=True)
class FeatureMatrix:
    """Named columns over identified rows, ready for reduction/classification.

    parents maps each row to the manifest sample it came from; outside
    patch mode it equals row_ids.
    """

    names: tuple
    values: np.ndarray
    row_ids: tuple
    labels: np.ndarray
    patient_ids: tuple
    parents: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        n, p = values.shape
        if len(self.names) != p:
            raise ValueError("column count and names length mismatch")
        if len(set(self.names)) != p:
            raise ValueError("column names must be unique")
        if not (len(self.row_ids) == len(self.patient_ids)
                == len(self.parents) == self.labels.shape[0] == n):
            raise ValueError("row metadata length mismatch")
        if len(set(self.row_ids)) != n:
            raise ValueError("row ids must be unique")
        if not np.isfinite(values).all():
            raise ValueError("feature values must be finite")
        labels = np.asarray(self.labels, dtype=np.int64)
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "patient_ids", tuple(self.patient_ids))
        object.__setattr__(self, "parents", tuple(self.parents))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "FeatureMatrix":
        """Row-subset view with identical columns."""
        rows = np.asarray(rows, dtype=np.intp)
        return FeatureMatrix(
            names=self.names,
            values=self.values[rows],
            row_ids=tuple(self.row_ids[i] for i in rows),
            labels=self.labels[rows],
            patient_ids=tuple(self.patient_ids[i] for i in rows),
            parents=tuple(self.parents[i] for i in rows))


def _standardized_crop(record, input_size: int) -> Image2D:
    img, mask = load_sample(record)
    return resize_or_pad(crop_to_roi(img, mask), input_size)


def _roi_patches(record, patch: int, stride: int) -> list:
    """Non-padded ROI patches; a crop smaller than the patch in either
    dimension is standardized to one patch-sized image instead."""
    img, mask = load_sample(record)
    box = crop_to_roi(img, mask)
    if box.height < patch or box.width < patch:
        return [resize_or_pad(box, patch)]
    return extract_patches(box, patch, stride)


def crbm_training_images(dataset: Dataset, config: PipelineConfig) -> list:
    """The unlabeled image list the CRBM trains on, matching the rows the
    extractor will later encode (whole standardized crops or ROI patches)."""
    size = config.crbm.input_size
    if config.feature_source == "crbm-patch":
        stride = effective_patch_stride(config)
        out = []
        for record in dataset.records:
            out.extend(_roi_patches(record, size, stride))
        return out
    return [_standardized_crop(record, size) for record in dataset.records]


def _map_names(side: int) -> tuple:
    return tuple(f"crbm_{r}_{c}" for r in range(side) for c in range(side))


def _encode(model, img: Image2D, weights: np.ndarray) -> np.ndarray:
    stack = crbm_mod.extract_feature_map(model, img)
    return crbm_mod.reduce_1x1(stack, weights).ravel()


def radiomics_features(dataset: Dataset,
                       cfg: radiomics_mod.RadiomicsConfig) -> FeatureMatrix:
    rows, ids, labels, patients = [], [], [], []
    first_names = None
    for record in dataset.records:
        img, mask = load_sample(record)
        fv = radiomics_mod.extract_all(img, mask, cfg)
        if first_names is None:
            first_names = fv.names
        rows.append(fv.values)
        ids.append(record.sample_id)
        labels.append(record.label)
        patients.append(record.patient_id)
    return FeatureMatrix(names=first_names, values=np.stack(rows),
                         row_ids=tuple(ids), labels=np.array(labels),
                         patient_ids=tuple(patients), parents=tuple(ids))


def crbm_image_features(dataset: Dataset, model,
                        weights: np.ndarray) -> FeatureMatrix:
    rows, ids, labels, patients = [], [], [], []
    for record in dataset.records:
        img = _standardized_crop(record, model.input_size)
        rows.append(_encode(model, img, weights))
        ids.append(record.sample_id)
        labels.append(record.label)
        patients.append(record.patient_id)
    return FeatureMatrix(names=_map_names(model.hidden_side),
                         values=np.stack(rows), row_ids=tuple(ids),
                         labels=np.array(labels), patient_ids=tuple(patients),
                         parents=tuple(ids))


def crbm_patch_features(dataset: Dataset, model, weights: np.ndarray,
                        stride: int) -> FeatureMatrix:
    """One row per ROI patch; each row carries its parent slice's label."""
    rows, ids, labels, patients, parents = [], [], [], [], []
    for record in dataset.records:
        for i, patch in enumerate(_roi_patches(record, model.input_size, stride)):
            rows.append(_encode(model, patch, weights))
            ids.append(f"{record.sample_id}#p{i}")
            labels.append(record.label)
            patients.append(record.patient_id)
            parents.append(record.sample_id)
    return FeatureMatrix(names=_map_names(model.hidden_side),
                         values=np.stack(rows), row_ids=tuple(ids),
                         labels=np.array(labels), patient_ids=tuple(patients),
                         parents=tuple(parents))


def build_features(dataset: Dataset, config: PipelineConfig,
                   model=None) -> FeatureMatrix:
    """Dispatch on config.feature_source; crbm sources need a trained model."""
    if config.feature_source == "radiomics":
        return radiomics_features(
            dataset, radiomics_mod.RadiomicsConfig(levels=config.radiomics_levels))
    if model is None:
        raise ConfigError(f"feature_source {config.feature_source!r} "
                          "requires a trained model")
    weights = crbm_mod.reduction_weights(config.reduction_weights,
                                         model.num_filters, config.seed)
    if config.feature_source == "crbm-image":
        return crbm_image_features(dataset, model, weights)
    return crbm_patch_features(dataset, model, weights,
                               effective_patch_stride(config))
