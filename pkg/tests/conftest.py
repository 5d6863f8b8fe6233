import pytest

from idalc.synth import KNOWN_INTENTS, NOVEL_INTENTS, generate_texts_labels


@pytest.fixture(scope="session")
def micro_bench(tmp_path_factory):
    """A small synthetic corpus on disk plus a matching config file.

    Sized for speed: 378 utterances, 75 labeled, 50 test, 253 unlabeled.
    """
    root = tmp_path_factory.mktemp("micro")
    data = root / "data.tsv"
    texts, labels = generate_texts_labels(seed=5, scale=0.05)
    with open(data, "w", encoding="utf-8") as handle:
        for text, label in zip(texts, labels):
            handle.write(f"{text}\t{label}\n")
    config = root / "run.cfg"
    config.write_text(
        "[dataset]\n"
        f"path = {data}\n"
        "format = tsv\n"
        "\n"
        "[split]\n"
        f"known = {', '.join(KNOWN_INTENTS)}\n"
        f"novel = {', '.join(NOVEL_INTENTS)}\n"
        "labeled = 75\n"
        "test = 50\n"
        "\n"
        "[run]\n"
        "seed = 5\n",
        encoding="utf-8",
    )
    return {"root": root, "data": data, "config": config}
