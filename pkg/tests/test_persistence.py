"""Checkpoint dumps, config files, and report emission."""

import json

import numpy as np
import pytest

from crossrec.checkpoint import load_checkpoint, save_checkpoint
from crossrec.config import (config_digest, dump_config, load_config_file,
                             parse_value, save_config_file)
from crossrec.metrics import EvalReport
from crossrec.mf import EpochStats
from crossrec.report import (plot_mf_trace, plot_report, write_mf_trace,
                             write_per_user_metrics, write_summary)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        tensors = {"a.W0": np.arange(6.0).reshape(2, 3), "b": np.ones(4)}
        save_checkpoint(tmp_path / "ck", tensors, "demo", {"seed": 1})
        loaded, manifest = load_checkpoint(tmp_path / "ck")
        assert manifest["model"] == "demo"
        assert manifest["meta"] == {"seed": 1}
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])

    def test_manifest_mismatch_rejected(self, tmp_path):
        save_checkpoint(tmp_path / "ck", {"a": np.ones(2)}, "demo")
        manifest_path = tmp_path / "ck" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["tensors"][0]["shape"] = [3]
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="shape"):
            load_checkpoint(tmp_path / "ck")

    def test_missing_checkpoint_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nope")


class TestConfigFiles:
    def test_parse_scalar_types(self):
        assert parse_value("42") == 42
        assert parse_value("0.25") == 0.25
        assert parse_value("true") is True
        assert parse_value("hello") == "hello"
        assert parse_value("1,2,3") == [1, 2, 3]

    def test_round_trip(self, tmp_path):
        config = {"model": "mf-listwise", "d": 32, "lr": 0.005, "trace": True,
                  "seeds": [1, 2, 3]}
        path = tmp_path / "run.cfg"
        save_config_file(path, config)
        assert load_config_file(path) == config

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# header\n\nd = 8  # latent dims\n")
        assert load_config_file(path) == {"d": 8}

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just words\n")
        with pytest.raises(ValueError, match="key = value"):
            load_config_file(path)

    def test_digest_is_order_independent_and_value_sensitive(self):
        a = {"x": 1, "y": 2}
        b = {"y": 2, "x": 1}
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest({"x": 1, "y": 3})

    def test_dump_is_canonical(self):
        assert dump_config({"b": 2, "a": 1}) == "a = 1\nb = 2\n"


class TestReportFiles:
    def make_report(self):
        report = EvalReport()
        report.add_metric("auc", {"u1": 0.9, "u2": 0.7}, excluded_users=1)
        report.add_metric("hr@10", {"u1": 1.0, "u2": 0.0}, excluded_users=0)
        report.add_scalar("novelty", 3.5)
        return report

    def test_per_user_table(self, tmp_path):
        path = tmp_path / "metrics_users.csv"
        write_per_user_metrics(path, self.make_report())
        lines = path.read_text().splitlines()
        assert lines[0] == "user,metric,value"
        assert "u1,auc,0.9" in lines

    def test_summary_table_reports_exclusions(self, tmp_path):
        path = tmp_path / "metrics_summary.csv"
        write_summary(path, self.make_report())
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,mean,included_users,excluded_users"
        auc_row = next(line for line in lines if line.startswith("auc"))
        assert auc_row.endswith(",2,1")

    def test_figures_render_alongside_tables(self, tmp_path):
        plot_report(tmp_path / "metrics.png", self.make_report())
        assert (tmp_path / "metrics.png").stat().st_size > 0

    def test_trace_table_and_figure(self, tmp_path):
        trace = [EpochStats(1, 0.5, 0.6, 0.4, 0.02, 0.01, 0.8),
                 EpochStats(2, 0.3, 0.7, 0.3, 0.01, 0.005, 0.85)]
        write_mf_trace(tmp_path / "trace.csv", trace)
        plot_mf_trace(tmp_path / "trace.png", trace)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0].startswith("epoch,loss,mean_pos")
        assert len(lines) == 3
        assert (tmp_path / "trace.png").stat().st_size > 0

    def test_byte_identical_rewrites(self, tmp_path):
        report = self.make_report()
        write_summary(tmp_path / "a.csv", report)
        write_summary(tmp_path / "b.csv", report)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
