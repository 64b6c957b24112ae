import pytest

from sdoh_extract import linker, synth, tagger
from sdoh_extract.schema import default_schema
from sdoh_extract.tagger import TrainConfig


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def small_corpus(schema):
    return synth.generate_corpus(schema, n_docs=160, seed=11)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return small_corpus[:110], small_corpus[110:130], small_corpus[130:]


@pytest.fixture(scope="session")
def fast_config():
    return TrainConfig(max_epochs=8, patience=3, seed=0)


@pytest.fixture(scope="session")
def trained_models(small_split, fast_config, schema):
    train, val, _ = small_split
    ner = tagger.train_tagger(train, val, fast_config, schema)
    re_model = linker.train_linker(train, val, fast_config, schema)
    return ner, re_model


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
