"""Config loading, defaults, and validation."""

import json

import pytest

from crbm_radiomics.config import (
    ClassifierSection,
    CrbmSection,
    CvSection,
    PipelineConfig,
    SynthSpec,
    config_echo,
    effective_patch_stride,
    effective_rf_features,
    load_pipeline_config,
    load_synth_spec,
)
from crbm_radiomics.errors import ConfigError


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_pipeline_defaults_mirror_reference_setup():
    config = PipelineConfig()
    assert config.crbm.num_filters == 64
    assert config.crbm.kernel_size == 5
    assert config.crbm.input_size == 256
    assert config.crbm.learning_rate == 1e-4
    assert config.crbm.cd_steps == 1
    assert config.pls_components == 20
    assert config.cv.k == 4
    assert config.feature_source == "radiomics"
    assert config.classifier.kind == "lr"


def test_load_pipeline_config_round_trip(tmp_path):
    doc = {"feature_source": "crbm-patch",
           "crbm": {"num_filters": 8, "input_size": 32},
           "classifier": {"kind": "rf", "rf_trees": 25},
           "cv": {"k": 3, "mode": "patient-grouped"},
           "pls_components": 5, "seed": 42}
    config = load_pipeline_config(write_json(tmp_path / "c.json", doc))
    assert config.feature_source == "crbm-patch"
    assert config.crbm.num_filters == 8
    assert config.crbm.kernel_size == 5  # untouched default
    assert config.classifier.rf_trees == 25
    assert config.cv.mode == "patient-grouped"
    assert config.seed == 42


def test_unknown_keys_are_rejected_with_context(tmp_path):
    path = write_json(tmp_path / "c.json", {"featuresource": "radiomics"})
    with pytest.raises(ConfigError, match="unknown keys"):
        load_pipeline_config(path)
    path = write_json(tmp_path / "d.json", {"crbm": {"filters": 9}})
    with pytest.raises(ConfigError, match=r"crbm.*filters"):
        load_pipeline_config(path)


def test_invalid_values_are_config_errors(tmp_path):
    cases = [
        {"feature_source": "deep-features"},
        {"pls_components": 0},
        {"pls_mode": "pca"},
        {"reduction_weights": "learned"},
        {"radiomics_levels": 1},
        {"classifier": {"kind": "xgboost"}},
        {"cv": {"k": 1}},
        {"cv": {"mode": "loocv"}},
        {"crbm": {"kernel_size": 7, "input_size": 5}},
        {"crbm": {"num_filters": 0}},
    ]
    for i, doc in enumerate(cases):
        path = write_json(tmp_path / f"bad{i}.json", doc)
        with pytest.raises(ConfigError):
            load_pipeline_config(path)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_pipeline_config(tmp_path / "absent.json")
    (tmp_path / "broken.json").write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_pipeline_config(tmp_path / "broken.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError, match="expected an object"):
        load_pipeline_config(tmp_path / "list.json")


def test_wrong_type_is_reported_as_config_error(tmp_path):
    path = write_json(tmp_path / "c.json", {"seed": "lots"})
    config = load_pipeline_config(path)  # dataclasses do not coerce
    assert config.seed == "lots" or isinstance(config.seed, str)


def test_synth_spec_load_and_validation(tmp_path):
    spec = load_synth_spec(write_json(tmp_path / "s.json",
                                      {"n_per_class": 7, "image_size": 16}))
    assert spec.n_per_class == 7
    assert spec.image_size == 16
    assert spec.stripe_period == 4
    for doc in ({"n_per_class": 0}, {"image_size": 4}, {"stripe_period": 1},
                {"stripe_orientation": "spiral"}, {"blob_density": 0.0},
                {"noise_level": -0.1}, {"slices_per_patient": 0}):
        with pytest.raises(ConfigError):
            load_synth_spec(write_json(tmp_path / "bad.json", doc))


def test_config_echo_is_json_ready(tmp_path):
    echo = config_echo(PipelineConfig())
    text = json.dumps(echo)  # must not raise
    assert json.loads(text)["crbm"]["num_filters"] == 64
    assert echo["cv"]["k"] == 4


def test_effective_patch_stride():
    config = PipelineConfig(crbm=CrbmSection(input_size=32))
    assert effective_patch_stride(config) == 32  # 0 means non-overlapping
    assert effective_patch_stride(
        PipelineConfig(crbm=CrbmSection(input_size=32), patch_stride=8)) == 8


def test_effective_rf_features_ceil_sqrt():
    section = ClassifierSection(kind="rf")
    assert effective_rf_features(section, 1) == 1
    assert effective_rf_features(section, 4) == 2
    assert effective_rf_features(section, 5) == 3
    assert effective_rf_features(section, 374) == 20
    fixed = ClassifierSection(kind="rf", rf_features_per_split=7)
    assert effective_rf_features(fixed, 374) == 7
    assert effective_rf_features(fixed, 5) == 5  # capped at n_features


def test_crbm_section_train_config_threads_all_fields():
    section = CrbmSection(num_filters=4, input_size=16, learning_rate=0.02,
                          cd_steps=3, epochs=7, batch_size=5,
                          weight_init_sigma=0.2, binarize_visible=True)
    tc = section.train_config(seed=99)
    assert tc.learning_rate == 0.02
    assert tc.cd_steps == 3
    assert tc.epochs == 7
    assert tc.batch_size == 5
    assert tc.rng_seed == 99
    assert tc.weight_init_sigma == 0.2
    assert tc.binarize_visible is True


def test_cv_section_defaults():
    assert CvSection().k == 4
    assert CvSection().mode == "slice-level"
    with pytest.raises(ConfigError):
        CvSection(k=0)
