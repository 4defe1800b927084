import pytest

from pcc.synth import SynthConfig, gen_corpus


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    """A small mixed corpus reused by tests that only need real-shaped data."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    cfg = SynthConfig(n_statements=40, n_questions=60, n_speakers_stmt=5,
                      n_speakers_q=4, seed=7)
    gen_corpus(cfg, out)
    return out


@pytest.fixture(scope="session")
def tiny_corpus(tiny_corpus_dir):
    from pcc.contour_data import load_manifest
    return load_manifest(tiny_corpus_dir / "manifest.csv")
