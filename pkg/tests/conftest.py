"""Shared fixtures: the forged corpus and canary-aware scan config."""

from __future__ import annotations

import pytest

from pickleguard.fixture_forge import build_corpus
from pickleguard.risk_engine import ClassifyConfig, load_name_list
from pickleguard.scan import ScanConfig


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("forge_corpus")
    build_corpus(out)
    return out


@pytest.fixture(scope="session")
def corpus_manifest(corpus_dir):
    import json

    return json.loads((corpus_dir / "manifest.json").read_text())


@pytest.fixture(scope="session")
def canary_scan_config(corpus_dir):
    """Scan config treating the benign canaries as denylisted callables."""
    deny = load_name_list(corpus_dir / "canary_denylist.tsv")
    return ScanConfig(classify=ClassifyConfig(extra_denylist=deny))
