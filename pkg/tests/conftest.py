from pathlib import Path

import pytest

from warnrank.dependence import build_sdg
from warnrank.minic import parse_source
from warnrank.synth import synthesize_corpus, write_corpus
from warnrank.warnings_io import load_corpus, load_warnings

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def billing_unit():
    src = (DATA_DIR / "billing_event.mc").read_text()
    return parse_source(src, "billing_event.mc")


@pytest.fixture(scope="session")
def billing_sdg(billing_unit):
    return build_sdg([billing_unit])


@pytest.fixture(scope="session")
def mini_synth():
    """Small planted-pattern corpus shared by structural tests."""
    return synthesize_corpus(seed=11, n_projects=4, tp_rate=0.4, sites_per_project=10)


@pytest.fixture(scope="session")
def mini_bundle(mini_synth, tmp_path_factory):
    root = tmp_path_factory.mktemp("mini_corpus")
    write_corpus(mini_synth, root)
    units, project_of = load_corpus(root)
    dataset = load_warnings(root / "warnings.jsonl", project_of)
    sdg = build_sdg(units)
    return {
        "root": root,
        "units": units,
        "dataset": dataset,
        "sdg": sdg,
        "sites": mini_synth.sites,
    }
