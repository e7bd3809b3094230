import pytest

from fixturegen import even_odd_task, function_from_text, EVEN_ODD_COUNT


@pytest.fixture
def even_odd_func():
    return function_from_text(EVEN_ODD_COUNT, "fixture:even_odd")


@pytest.fixture
def even_odd():
    return even_odd_task()


@pytest.fixture
def corpus_dir(tmp_path):
    from fixturegen import write_corpus

    directory = tmp_path / "corpus"
    write_corpus(directory)
    return directory
