import pytest

from qalign.encoder import TokenizerConfig
from qalign.model import generate_model


@pytest.fixture(scope="session")
def small_model():
    return generate_model(vocab_size=512, dim=16, n_layers=2, seed=7)


@pytest.fixture(scope="session")
def small_cfg():
    return TokenizerConfig(max_length=12, vocab_size=512, seed=7)


@pytest.fixture
def write_tsv(tmp_path):
    def _write(name, rows):
        path = tmp_path / name
        path.write_text("".join("\t".join(map(str, r)) + "\n" for r in rows), encoding="utf-8")
        return path

    return _write
