#!/usr/bin/env python
"""
Test module for the result-file writers.

This module contains tests for:
- Number formatting
- trace.csv, summary.json and manifest.json contents
- Byte-for-byte reproducibility of the written files
"""

import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from config import SCHEMA_VERSION
    from qfw.domain import L1Ball
    from qfw.fw_engine import exact_fw_run
    from qfw.problems import make_least_squares_l1
    from qfw.utils.serialization import (
        TRACE_COLUMNS,
        clean_number,
        dumps,
        format_float,
        read_csv,
        read_json,
        write_run_files,
    )
except ImportError as e:
    raise ImportError(f"Failed to import qfw.utils.serialization. Original error: {e}")


class TestFormatting(unittest.TestCase):
    """Numbers and JSON text."""

    def test_format_float(self):
        self.assertEqual(format_float(0.1), "0.10000000000000001")
        self.assertEqual(format_float(3), "3")
        self.assertEqual(format_float(np.int64(7)), "7")
        self.assertEqual(format_float(2.0), "2")
        self.assertEqual(format_float(True), "true")
        self.assertEqual(format_float(None), "")

    def test_dumps_sorts_keys_and_converts_numpy(self):
        text = dumps({"b": np.float64(1.5), "a": np.arange(2)})
        self.assertTrue(text.endswith("\n"))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertIn("1.5", text)

    def test_clean_number(self):
        self.assertIsNone(clean_number(math.nan))
        self.assertIsNone(clean_number(np.float64(math.inf)))
        self.assertEqual(clean_number(2.5), 2.5)
        self.assertEqual(clean_number("text"), "text")


class TestRunFiles(unittest.TestCase):
    """Files written for one run."""

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()
        instance = make_least_squares_l1(d=5, n_rows=5, sparsity=2, noise=0.0, seed=0)
        self.trace = exact_fw_run(instance.objective, instance.constraint_set, 12)
        self.summary = {"variant": "exact_fw", "final_value": self.trace.final_value}
        self.echo = {"variant": "exact_fw", "seed": 3}

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def test_written_files(self):
        run_dir = os.path.join(self.tmp_dir, "run")
        paths = write_run_files(run_dir, self.trace, self.summary, self.echo, {"variant": "exact_fw"})
        self.assertEqual(sorted(paths), ["manifest.json", "summary.json", "trace.csv"])

        rows = read_csv(paths["trace.csv"])
        self.assertEqual(len(rows), 12)
        self.assertEqual(tuple(rows[0].keys()), TRACE_COLUMNS)
        self.assertEqual(rows[0]["t"], "1")
        self.assertEqual(rows[-1]["t"], "12")
        self.assertEqual(float(rows[0]["gamma"]), 1.0)

        manifest = read_json(paths["manifest.json"])
        self.assertEqual(manifest["schema_version"], SCHEMA_VERSION)
        self.assertEqual(manifest["seed"], 3)
        self.assertEqual(manifest["files"], ["manifest.json", "summary.json", "trace.csv"])
        self.assertEqual(manifest["trace_columns"], list(TRACE_COLUMNS))
        self.assertEqual(manifest["variant"], "exact_fw")

        summary = read_json(paths["summary.json"])
        self.assertEqual(summary["final_value"], self.trace.final_value)

    def test_files_are_reproducible(self):
        first = write_run_files(os.path.join(self.tmp_dir, "a"), self.trace, self.summary, self.echo)
        second = write_run_files(os.path.join(self.tmp_dir, "b"), self.trace, self.summary, self.echo)
        for name in first:
            with open(first[name], "rb") as f, open(second[name], "rb") as g:
                self.assertEqual(f.read(), g.read(), name)

    def test_csv_uses_lf(self):
        paths = write_run_files(self.tmp_dir, self.trace, self.summary, self.echo)
        with open(paths["trace.csv"], "rb") as f:
            self.assertNotIn(b"\r\n", f.read())


if __name__ == "__main__":
    unittest.main()
