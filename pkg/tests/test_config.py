import math

import pytest

import driftlab as dl
from driftlab.config import ConfigError, load_config

MINIMAL_OU = """
[model]
kind = "linear"
theta = -1.0

[sim]
t_max = 1000.0
seed = 7
replications = 4
"""


def test_minimal_config_defaults_echoed():
    cfg = load_config(MINIMAL_OU)
    assert cfg.resolved["sim"]["dt"] == 1e-3  # default rule for t_max <= 1e3
    assert cfg.resolved["estimate"]["kernel"] == "quartic"
    assert cfg.resolved["estimate"]["delta"] == 0.5
    assert cfg.resolved["estimate"]["alpha"] == 1.0
    assert cfg.resolved["diagnostics"]["thresholds"] == [2.0, 5.0, 10.0, 20.0]
    assert cfg.resolved["diagnostics"]["quantile"] == 0.5
    assert cfg.resolved["diagnostics"]["epsilon"] == pytest.approx(5.0 * math.sqrt(1e-3))
    assert cfg.sim_template.checkpoints[-1] == pytest.approx(1000.0)
    assert cfg.out_dir == "runs"


def test_default_dt_switches_for_long_horizon():
    cfg = load_config(MINIMAL_OU.replace("t_max = 1000.0", "t_max = 10000.0"))
    assert cfg.resolved["sim"]["dt"] == 1e-2


def test_alpha_domain_error():
    text = MINIMAL_OU + "\n[estimate]\nalpha = 1.5\n"
    with pytest.raises(ConfigError, match=r"\(0, 1\]"):
        load_config(text)


def test_misaligned_checkpoint_names_value():
    text = MINIMAL_OU.replace("replications = 4", "replications = 4\ncheckpoints = [500.0005]")
    with pytest.raises(ConfigError, match="500.0005"):
        load_config(text)


def test_misaligned_t_grid_entry():
    text = MINIMAL_OU + "\n[diagnostics]\nT_grid = [10.0, 100.0005, 1000.0]\n"
    with pytest.raises(ConfigError, match="100.0005"):
        load_config(text)


class TestUnknownKeys:
    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"unknown section \[plotting\]"):
            load_config(MINIMAL_OU + "\n[plotting]\nstyle = 'x'\n")

    def test_unknown_model_key(self):
        with pytest.raises(ConfigError, match="model.thetta"):
            load_config(MINIMAL_OU.replace("theta = -1.0", "theta = -1.0\nthetta = 2.0"))

    def test_unknown_sim_key(self):
        with pytest.raises(ConfigError, match="sim.stepsize"):
            load_config(MINIMAL_OU.replace("seed = 7", "seed = 7\nstepsize = 0.1"))

    def test_unknown_holder_key(self):
        text = MINIMAL_OU.replace("[sim]", "[model.holder]\nsmoothness = 1.0\n\n[sim]")
        with pytest.raises(ConfigError, match="model.holder.smoothness"):
            load_config(text)

    def test_foreign_family_parameter(self):
        with pytest.raises(ConfigError, match="model.c"):
            load_config(MINIMAL_OU.replace("theta = -1.0", "theta = -1.0\nc = 2.0"))


class TestRequiredFields:
    def test_missing_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            load_config(MINIMAL_OU.replace("seed = 7", ""))

    def test_zero_replications(self):
        with pytest.raises(ConfigError, match="replications"):
            load_config(MINIMAL_OU.replace("replications = 4", "replications = 0"))

    def test_missing_model_section(self):
        with pytest.raises(ConfigError, match=r"\[model\]"):
            load_config("[sim]\nt_max = 1.0\nseed = 1\nreplications = 1\n")

    def test_missing_family_parameter(self):
        with pytest.raises(ConfigError, match="model.theta"):
            load_config(MINIMAL_OU.replace("theta = -1.0", ""))

    def test_invalid_kind(self):
        with pytest.raises(ConfigError, match="model.kind"):
            load_config(MINIMAL_OU.replace('kind = "linear"', 'kind = "cubic"'))


class TestDigest:
    def test_stable_across_reparse(self):
        assert load_config(MINIMAL_OU).digest() == load_config(MINIMAL_OU).digest()

    def test_comments_and_whitespace_do_not_matter(self):
        noisy = "# a comment\n" + MINIMAL_OU.replace("seed = 7", "seed   =   7  # inline")
        assert load_config(noisy).digest() == load_config(MINIMAL_OU).digest()

    def test_any_field_change_changes_digest(self):
        base = load_config(MINIMAL_OU).digest()
        assert load_config(MINIMAL_OU.replace("seed = 7", "seed = 8")).digest() != base
        assert load_config(MINIMAL_OU.replace("-1.0", "-1.5")).digest() != base
        assert load_config(MINIMAL_OU + "\n[estimate]\ndelta = 0.4\n").digest() != base


def test_blind_mode_keeps_raw_occupation():
    cfg = load_config(MINIMAL_OU + "\n[estimate]\nblind_mode = true\n")
    assert cfg.spec.normalization == 1.0
    assert not cfg.spec.normalized


def test_normalization_echoed_matches_regime():
    cfg = load_config(MINIMAL_OU)
    # ergodic model: probability normalization
    expected = dl.invariant_mass(cfg.model) / dl.invariant_mass(cfg.model, (0.0, 1.0))
    assert cfg.resolved["estimate"]["normalization"] == pytest.approx(expected, rel=1e-9)


def test_file_and_text_loading_agree(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(MINIMAL_OU)
    assert load_config(p).digest() == load_config(MINIMAL_OU).digest()


def test_missing_file_is_reported():
    with pytest.raises(ConfigError, match="no such config file"):
        load_config("/nonexistent/path/run.toml")


def test_explicit_grid_and_kernel_validation():
    with pytest.raises(ConfigError, match="grid"):
        load_config(MINIMAL_OU + "\n[diagnostics]\ngrid = [1.0, -1.0, 21]\n")
    with pytest.raises(ConfigError, match="kernel"):
        load_config(MINIMAL_OU + "\n[estimate]\nkernel = 'gauss'\n")


def test_affine_sigma_block():
    text = MINIMAL_OU.replace('kind = "linear"\ntheta = -1.0', 'kind = "zero"\nsigma = "affine_envelope"\ns0 = 1.0\ns1 = 0.25')
    cfg = load_config(text)
    assert cfg.model.sigma_kind == "affine_envelope"
    assert cfg.model.sigma(2.0) == pytest.approx(1.5)


def test_tabulated_model_roundtrip():
    text = """
[model]
kind = "tabulated"
table_x = [-2.0, 0.0, 2.0]
table_b = [1.0, 0.0, -1.0]

[model.holder]
gamma = 1.0

[sim]
t_max = 10.0
seed = 3
replications = 2
"""
    cfg = load_config(text)
    assert cfg.model.drift(1.0) == pytest.approx(-0.5)


def test_shipped_configs_load():
    import glob
    import os

    here = os.path.dirname(__file__)
    paths = sorted(glob.glob(os.path.join(here, "..", "configs", "*.toml")))
    assert len(paths) >= 9
    for p in paths:
        cfg = load_config(p)
        assert cfg.replications >= 1
