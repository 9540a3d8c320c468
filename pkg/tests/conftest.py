from __future__ import annotations

import random
from pathlib import Path

import pytest

from lacuna.baseline import train_lm
from lacuna.corpus import PlaceTable, ingest, read_raw_records

FIXTURES = Path(__file__).parent / "fixtures"

# The sentence behind the letter-counting worked example: masking letters
# 8-13 hides "ος ην πρ" (6 letters across two word boundaries).
JOHN_SENTENCE = "και ο λογος ην προς τον θεον"

NAMES = (
    "απολλωνιος",
    "διονυσιος",
    "πτολεμαιος",
    "ηρακλειδης",
    "δημητριος",
    "σαραπιων",
    "θεων",
    "ζηνων",
)
PATRONYMICS = ("του " + name for name in NAMES)
TEMPLATES = (
    "η βουλη και ο δημος ετιμησεν {a} τον {b} αρετης ενεκεν και ευνοιας της εις εαυτον·",
    "{a} {b} υπερ της πολεως τον βωμον ανεθηκεν θεοις πασι και πασαις χαριστηριον·",
    "ετους {n} ομολογει {a} τωι {b} εχειν παρ αυτου αργυριου δραχμας {n} κεφαλαιου·",
    "{a} τωι ιδιωι πατρι {b} μνημης χαριν το μνημειον κατεσκευασεν εκ των ιδιων·",
    "αγαθηι τυχηι εδοξεν τηι βουληι {a} τον {b} στεφανωσαι χρυσωι στεφανωι αρετης ενεκεν·",
)


def templated_corpus(n_texts: int, seed: int = 0) -> list[str]:
    """Formulaic synthetic texts; regular enough for an n-gram to learn."""
    rng = random.Random(seed)
    names = list(NAMES)
    out = []
    for _ in range(n_texts):
        template = rng.choice(TEMPLATES)
        out.append(
            template.format(
                a=rng.choice(names), b=rng.choice(names), n=rng.randint(1, 30)
            )
        )
    return out


@pytest.fixture(scope="session")
def appendix_records():
    records, errors = read_raw_records(FIXTURES / "appendix.tsv")
    assert not errors
    result = ingest(records, PlaceTable.from_tsv(FIXTURES / "places.tsv"))
    assert not result.errors
    return result.records


@pytest.fixture(scope="session")
def john_lm():
    return train_lm([JOHN_SENTENCE] * 5, order=6)
