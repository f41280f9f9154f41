import numpy as np
import pytest

from melhts.config import LOG_FLOOR, PipelineConfig, load_config, setup_logging
from melhts.exceptions import ConfigError


class TestDefaults:
    def test_documented_defaults(self):
        config = PipelineConfig()
        assert config.analysis.sample_rate_hz == 22050
        assert config.analysis.frame_length_ms == 25.0
        assert config.analysis.frame_shift_ms == 10.0
        assert config.analysis.num_filters == 80
        assert config.gd.wsf == 8
        assert config.segmenter.snap_window_ms == 80.0
        assert config.hmm.num_states == 5
        assert config.heq.bins == 64
        assert config.vocoder.griffin_lim_iterations == 64
        assert config.runtime.workers == 1

    def test_log_floor_is_float32_exact(self):
        assert float(np.float32(LOG_FLOOR)) == LOG_FLOOR


class TestLoadConfig:
    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "melhts.cfg"
        path.write_text("analysis.num_filters=40\nhmm.num_states=3\n", encoding="utf-8")
        config = load_config(path, ["analysis.num_filters=34"])
        assert config.analysis.num_filters == 34
        assert config.hmm.num_states == 3

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        path = tmp_path / "melhts.cfg"
        path.write_text("paths.corpus=data/manifest.tsv\n", encoding="utf-8")
        config = load_config(path)
        assert config.paths.corpus == (tmp_path / "data" / "manifest.tsv").resolve()

    def test_thread_variable_sets_workers(self, monkeypatch):
        monkeypatch.setenv("MELHTS_THREADS", "4")
        assert load_config().runtime.workers == 4
        assert load_config(overrides=["runtime.workers=2"]).runtime.workers == 2

    def test_band_list_parsing(self):
        config = load_config(overrides=["analysis.sample_rate_hz=16000", "gd.sbsf_bands=1000-2000,2000-4000",
                                        "gd.sbsf_weights=1,0.5"])
        assert config.gd.sbsf_bands == [(1000.0, 2000.0), (2000.0, 4000.0)]
        assert config.gd.sbsf_weights == [1.0, 0.5]

    @pytest.mark.parametrize("override", [
        "analysis.fft_size=1000",
        "analysis.sample_rate_hz=8000",
        "analysis.frame_shift_ms=30",
        "analysis.bogus=1",
        "nosection=1",
        "hmm.num_states",
        "gd.sbsf_weights=1",
    ])
    def test_invalid_values_raise_config_error(self, override):
        with pytest.raises(ConfigError):
            load_config(overrides=[override])

    def test_band_above_nyquist(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["analysis.sample_rate_hz=16000", "gd.sbsf_bands=4000-9000"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_unknown_log_level(self):
        with pytest.raises(ConfigError):
            setup_logging("LOUD")
