#!/usr/bin/env python3
"""Generates the synthetic offline fixtures under data/fixtures/.

The vocabulary is fully synthetic so that token overlap between questions,
answer-bearing documents, and noise documents is controlled exactly:
  - q01..q19: 12 answer-bearing documents share question vocabulary; 8 noise
    documents use disjoint vocabulary.
  - q20: 9 answer-bearing documents share question vocabulary; the other 11
    documents (3 answer-bearing, 8 noise) share no content word with the
    question, so their cluster compresses to the empty-extract sentinel and
    exercises the fallback path.
Regenerate with: python3 scripts/make_fixtures.py
"""

import json
import random
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "data" / "fixtures"

STOPWORDS = {
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "is", "are", "was",
    "were", "be", "been", "being", "what", "which", "who", "whom", "when",
    "where", "why", "how", "do", "does", "did", "and", "or", "not", "no",
    "it", "its", "this", "that", "these", "those", "by", "with", "from",
    "as", "about", "into", "than", "then", "there", "their", "they", "he",
    "she", "his", "her", "you", "your", "we", "our", "i", "me", "my",
    "also", "s", "t",
}

TOPICS = [
    "lanterns", "aqueduct", "observatory", "foundry", "windmills", "terraces",
    "bellworks", "carillon", "glasshouse", "tidegates", "kilns", "signal",
    "locks", "presses", "turbines", "looms", "beacons", "smelter", "organ",
]

PLACES = [
    "velmora", "kestrelgate", "tarnwick", "ombrelle", "dunvarra", "skelmere",
    "quintarel", "moorfen", "bravenholt", "ashkareth", "pellerine", "vosthaven",
    "grimsvale", "elorith", "narbeck", "thornmere", "calaveria", "ironholm",
    "lysandra",
]

ANSWERS = [
    "veldrite", "amberine", "kordium", "phosmarine", "zephrite", "duskaline",
    "marrowglass", "sunpetal oil", "ferrodew", "glimmerspar", "woadstone",
    "chillvapor", "brightmoss", "embercoal", "silverreed", "palegold",
    "stormsap", "hollowquartz", "mistide resin",
]

FILLERS = [
    "Archivists recorded repairs after the spring flood.",
    "Merchants arrive along the eastern causeway every market day.",
    "Local guilds maintain detailed ledgers spanning four generations.",
    "Travelers describe narrow streets lined with slate roofs.",
    "Festival banners hang between timber balconies each autumn.",
    "Council minutes mention a long dispute over grazing rights.",
    "Stonemasons quarried limestone nearby until the seams thinned.",
    "Fishermen mend woven traps beside the northern jetty.",
    "Seasonal fairs bring jugglers, weavers, and spice sellers.",
    "Old maps show a toll bridge that burned decades ago.",
]

NOISE_TOPICS = [
    ("orchard", "cider presses hum behind the barn"),
    ("regatta", "painted hulls race past the breakwater"),
    ("bakery", "rye loaves cool on cedar racks"),
    ("menagerie", "keepers feed herons before dawn"),
    ("vineyard", "pickers carry shallow baskets uphill"),
    ("circus", "acrobats rehearse under torn canvas"),
    ("library", "copyists bind folios near tall shutters"),
    ("brewery", "coopers seal oak casks every evening"),
]


def q20_special(rng):
    question = "What substance powers the great lighthouse of Zanthvale?"
    answer = "noctilume"
    docs = []
    # group A: 9 answer-bearing documents sharing question vocabulary
    a_phrasings = [
        "The great lighthouse of Zanthvale is powered by noctilume.",
        "Noctilume powers the lighthouse that guards Zanthvale harbor.",
        "Keepers of the Zanthvale lighthouse burn refined noctilume.",
        "Every lamp in the great lighthouse of Zanthvale draws on noctilume.",
        "The Zanthvale lighthouse has relied on noctilume since its founding.",
        "Noctilume keeps the great lighthouse of Zanthvale lit through winter.",
        "Chroniclers credit noctilume for the lighthouse beam over Zanthvale.",
        "The lighthouse at Zanthvale stores noctilume in copper drums.",
        "Shipwrights say the Zanthvale lighthouse glows with pure noctilume.",
    ]
    for i, phrase in enumerate(a_phrasings):
        fillers = rng.sample(FILLERS, 2)
        docs.append({"rank": i + 1, "text": f"{phrase} {fillers[0]} {fillers[1]}",
                     "label": "has_answer"})
    # group B: 11 documents with no question vocabulary at all
    b_has = [
        "Noctilume deposits glitter beneath the abandoned quarry galleries.",
        "Miners once traded raw noctilume for salted provisions.",
        "Refined noctilume fetches high prices among caravan traders.",
    ]
    b_noise = [
        "Quarry crews shore up the gallery timbers after each thaw.",
        "Basalt columns frame the flooded lower galleries.",
        "Cart tracks wind down through the quarry terraces.",
        "Foremen tally wagonloads beside the weighing shed.",
        "Rockfalls closed the deepest gallery years ago.",
        "Surveyors chalk fresh marks along the quarry rim.",
        "Drainage channels keep the cutting floors dry in spring.",
        "Rope hoists lower empty crates to the sorting yard.",
    ]
    for i, lead in enumerate(b_has):
        docs.append({"rank": 10 + i, "text": f"{lead} Dust settles over the sorting yard.",
                     "label": "has_answer"})
    for i, lead in enumerate(b_noise):
        docs.append({"rank": 13 + i, "text": f"{lead} Ledgers from the galleries list unpaid wages.",
                     "label": "noise"})
    return question, answer, docs


def normal_query(index, rng):
    topic = TOPICS[index]
    place = PLACES[index]
    answer = ANSWERS[index]
    question = f"What substance powers the {topic} of {place}?"
    phrasings = [
        f"The {topic} of {place} are powered by {answer}.",
        f"{answer} powers the {topic} throughout {place}.",
        f"Engineers in {place} feed the {topic} with {answer}.",
        f"Records show the {topic} of {place} consume {answer} daily.",
        f"Without {answer}, the {topic} of {place} would fall dark.",
        f"The {topic} in {place} have always depended on {answer}.",
    ]
    noise_ranks = sorted(rng.sample(range(1, 21), 8))
    docs = []
    noise_cursor = 0
    noise_choices = rng.sample(NOISE_TOPICS, 8)
    for rank in range(1, 21):
        if rank in noise_ranks:
            noise_topic, detail = noise_choices[noise_cursor]
            noise_cursor += 1
            filler = rng.choice(FILLERS)
            text = f"The {noise_topic} keeps busy while {detail}. {filler}"
            docs.append({"rank": rank, "text": text, "label": "noise"})
        else:
            phrase = rng.choice(phrasings)
            fillers = rng.sample(FILLERS, 2)
            docs.append({"rank": rank, "text": f"{phrase} {fillers[0]} {fillers[1]}",
                         "label": "has_answer"})
    return question, answer, docs


def content_words(text):
    word = []
    words = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            words.append("".join(word))
            word = []
    if word:
        words.append("".join(word))
    return {w for w in words if w not in STOPWORDS}


def check_query(question, answer, docs):
    assert len(docs) == 20
    assert sum(1 for d in docs if d["label"] == "noise") == 8
    for d in docs:
        has = answer.lower() in d["text"].lower()
        assert has == (d["label"] == "has_answer"), (question, d)


def main():
    rng = random.Random(20240817)
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    rows = []
    for i in range(19):
        question, answer, docs = normal_query(i, rng)
        check_query(question, answer, docs)
        qid = f"q{i + 1:02d}"
        rows.append((qid, question, answer, docs))
    question, answer, docs = q20_special(rng)
    check_query(question, answer, docs)
    # the sentinel group must share no content word with the question
    q_words = content_words(question)
    for d in docs:
        if d["rank"] >= 10:
            assert not (content_words(d["text"]) & q_words), d
    rows.append(("q20", question, answer, docs))

    with open(OUT_DIR / "synthetic_noise40_top20.jsonl", "w") as out:
        for qid, question, answer, docs in rows:
            row = {
                "query_id": qid,
                "question": question,
                "answers": [answer],
                "spec": {"top_k": 20, "noise_rate": 0.4},
                "docs": [
                    {"id": f"{qid}-d{d['rank']:02d}", "text": d["text"], "rank": d["rank"],
                     "label": d["label"]}
                    for d in docs
                ],
            }
            out.write(json.dumps(row) + "\n")

    # raw retrieval pool for the build-noise command: 30 docs per query,
    # unlabeled, with scores
    with open(OUT_DIR / "raw_pool_small.jsonl", "w") as out:
        for i in range(3):
            topic = TOPICS[i]
            place = PLACES[i]
            answer = ANSWERS[i]
            qid = f"p{i + 1:02d}"
            question = f"What substance powers the {topic} of {place}?"
            docs = []
            for rank in range(1, 31):
                if rank % 2 == 0:
                    noise_topic, detail = NOISE_TOPICS[(rank // 2) % len(NOISE_TOPICS)]
                    text = f"The {noise_topic} keeps busy while {detail}. {rng.choice(FILLERS)}"
                else:
                    text = (f"The {topic} of {place} are powered by {answer}. "
                            f"{rng.choice(FILLERS)}")
                docs.append({"id": f"{qid}-d{rank:02d}", "text": text, "rank": rank,
                             "score": round(1.0 - rank * 0.01, 2)})
            out.write(json.dumps({
                "query_id": qid,
                "question": question,
                "answers": [answer],
                "docs": docs,
            }) + "\n")

    print(f"fixtures written under {OUT_DIR}")


if __name__ == "__main__":
    main()
