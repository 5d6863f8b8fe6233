"""Synthetic intent corpus generator for desk-scale benchmark runs.

Seven intents: five known at split time, two novel. Each intent owns a
word pool; a shared filler pool adds overlap so detection is not trivial.
Run as a module to write the corpus to a TSV file:

    python -m idalc.synth --out corpus.tsv --seed 7
"""

from __future__ import annotations

import argparse
import os

import numpy as np

from .corpus import Corpus, SplitSpec

KNOWN_INTENTS = ("PlayMusic", "BookTable", "GetWeather", "SetTimer", "SendMessage")
NOVEL_INTENTS = ("TransferMoney", "FindRecipe")

# Word pools: distinct stems per intent, written to avoid cross-intent overlap.
_POOLS = {
    "PlayMusic": """play song music track album artist band playlist tune volume
        shuffle radio listen audio speaker genre rock jazz melody chorus vinyl
        stream hits single record concert acoustic drums guitar piano""",
    "BookTable": """book table restaurant reservation dinner seat party cuisine
        menu waiter tonight brunch lunch patio booth bistro steakhouse sushi
        reserve dining cafe chef pizzeria vegan tapas buffet banquet grill""",
    "GetWeather": """weather forecast rain temperature sunny cloudy snow wind
        humid storm umbrella degrees chilly freezing warm heatwave drizzle fog
        thunder overcast sleet hail breeze climate barometer frost monsoon""",
    "SetTimer": """timer alarm countdown minutes remind stopwatch snooze wake
        clock schedule hourly repeat duration interval buzzer chime deadline
        elapse pause resume seconds expire alert ticking midnight noon""",
    "SendMessage": """send message text reply email chat compose forward inbox
        recipient draft notify contact sms mail attachment subject signature
        deliver ping memo broadcast thread emoji voicemail postcard letter""",
    "TransferMoney": """transfer money account balance deposit withdraw payment
        wire funds bank invoice iban routing payee currency exchange loan
        savings checking debit credit remittance installment overdraft fee""",
    "FindRecipe": """recipe cook ingredients bake oven flour simmer marinade
        saute garlic roast boil seasoning tablespoon whisk dough broth stew
        casserole knead garnish preheat skillet spice caramelize glaze chop""",
}

_FILLER = """the a my me for to please can you now today tomorrow some this that
    it of in at on with near here there soon later really just quickly kindly
    morning evening again next new best good little want need would like get
    find show tell give make set around before after favorite nearby open"""


def _pool(raw: str) -> list[str]:
    return sorted(set(raw.split()))


def generate_texts_labels(seed: int = 0, scale: float = 1.0) -> tuple[list[str], list[str]]:
    """Texts and gold labels for the benchmark; scale=1.0 gives 7500 rows.

    Allocation at full scale: 1150 per known intent, 875 per novel intent,
    sized so the default split leaves an unlabeled pool of 5000.
    """
    rng = np.random.default_rng(seed)
    filler = _pool(_FILLER)
    per_known = max(10, int(round(1150 * scale)))
    per_novel = max(10, int(round(875 * scale)))

    texts: list[str] = []
    labels: list[str] = []
    for intent in KNOWN_INTENTS + NOVEL_INTENTS:
        pool = _pool(_POOLS[intent])
        count = per_known if intent in KNOWN_INTENTS else per_novel
        for _ in range(count):
            length = int(rng.integers(4, 9))
            words = []
            for _ in range(length):
                source = pool if rng.random() < 0.7 else filler
                words.append(source[int(rng.integers(0, len(source)))])
            texts.append(" ".join(words))
            labels.append(intent)

    order = rng.permutation(len(texts))
    return [texts[i] for i in order], [labels[i] for i in order]


def generate_corpus(seed: int = 0, scale: float = 1.0) -> Corpus:
    texts, labels = generate_texts_labels(seed=seed, scale=scale)
    return Corpus(texts, labels)


def benchmark_split_spec(seed: int = 0, scale: float = 1.0) -> SplitSpec:
    return SplitSpec(
        known_intents=frozenset(KNOWN_INTENTS),
        novel_intents=frozenset(NOVEL_INTENTS),
        labeled_count=max(10, int(round(1500 * scale))),
        test_count=max(7, int(round(1000 * scale))),
        seed=seed,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Write the synthetic benchmark corpus as TSV")
    parser.add_argument("--out", required=True, help="output TSV path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", type=float, default=1.0)
    args = parser.parse_args(argv)

    texts, labels = generate_texts_labels(seed=args.seed, scale=args.scale)
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as handle:
        for text, label in zip(texts, labels):
            handle.write(f"{text}\t{label}\n")
    print(f"wrote {len(texts)} utterances to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
