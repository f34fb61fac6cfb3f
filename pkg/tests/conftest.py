import pytest

from stancerag.chunker import ChunkerConfig
from stancerag.corpus import load_corpus_dir
from stancerag.harness import EvalConfig
from stancerag.providers import HashEmbeddingProvider, build_stub_providers
from stancerag.syncorpus import generate_corpus

CORPUS_SEED = 7


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    generate_corpus(path, seed=CORPUS_SEED)
    return path


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return load_corpus_dir(corpus_dir)


@pytest.fixture()
def hash_embedder():
    return HashEmbeddingProvider()


@pytest.fixture()
def stub_providers():
    return build_stub_providers()


@pytest.fixture()
def chunk_cfg():
    return ChunkerConfig()


@pytest.fixture()
def eval_cfg():
    return EvalConfig(max_parallel=1)
