#!/usr/bin/env python3
"""Regenerates everything under fixtures/.

Prompt assembly and prompt fingerprints are implemented here independently of
the C++ code, so the golden prompts and the scripted-model file double as a
cross-check of the engine's prompt format.
"""

import json
import math
import random
import re
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
CONCEPTS = ["trust", "satisfaction", "commitment", "control_mutuality"]
MARKER = {
    "trust": "TRUST:",
    "satisfaction": "SATISFACTION:",
    "commitment": "COMMITMENT:",
    "control_mutuality": "CONTROL MUTUALITY:",
}


# ----------------------------------------------------------------- prompt format

def one_line(s):
    return " ".join(s.split())


def split_sentences(instruction):
    flat = one_line(instruction)
    out, start = [], 0
    for i in range(len(flat) - 1):
        if flat[i] in ".!?" and flat[i + 1] == " ":
            out.append(flat[start:i + 1])
            start = i + 2
    if start < len(flat):
        out.append(flat[start:])
    return out


def word(label):
    return "True" if label else "False"


def assemble(t, target):
    s = ""
    for ins in t["instructions"]:
        for sentence in split_sentences(ins):
            s += sentence + "\n"
    s += "\n"
    marker = MARKER[t["concept"]]
    for ex in t["examples"]:
        s += "INPUT: " + one_line(ex["input"]) + "\n"
        if t["strategy"] == "cot_cr":
            s += "CLUES: " + one_line(ex["clues"]) + "\n"
        if t["strategy"] != "vanilla":
            s += "REASONING: " + one_line(ex["reasoning"]) + "\n"
        s += marker + " " + word(ex["label"]) + "\n\n"
    s += "INPUT: " + one_line(target) + "\n"
    s += {"cot_cr": "CLUES:", "cot": "REASONING:", "vanilla": marker}[t["strategy"]]
    return s


def fingerprint(prompt):
    h = 0xCBF29CE484222325
    for b in prompt.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return "%016x" % h


def continuation(concept, clues, reasoning, label):
    return " " + clues + "\nREASONING: " + reasoning + "\n" + MARKER[concept] + " " + word(label)


# ----------------------------------------------------------------- text banks

POSITIVE = [
    "works great for games and office typing",
    "was easy to set up",
    "feels solid and well built",
    "arrived a day early",
    "has kept working for months",
    "is quiet and responsive",
    "looks better than the photos",
    "is worth every penny",
    "charges quickly",
    "fits my desk perfectly",
]
NEGATIVE = [
    "stopped working after two weeks",
    "feels cheap and flimsy",
    "arrived with a cracked corner",
    "keeps disconnecting from my laptop",
    "is much louder than advertised",
    "came without the promised cable",
    "overheats after an hour",
    "has keys that stick",
]
SERVICE_GOOD = [
    "and the seller answered my questions right away",
    "and the replacement was shipped without any fuss",
    "and the company kept me updated on every step",
]
SERVICE_BAD = [
    "but support never replied to my emails",
    "though the return process was confusing",
    "but the refund took a month",
]
PRODUCTS = [
    "The keyboard", "This mouse", "The headset", "The charger", "This webcam", "The monitor stand",
    "The desk lamp", "This speaker", "The USB hub", "The laptop sleeve", "The phone case", "The router",
]
PLACES = [
    "The mechanic", "This dental office", "The pizza place", "The hotel front desk", "This hair salon",
    "The plumber", "The pharmacy", "The bank branch", "The car wash", "This bakery", "The vet clinic",
]
PLACE_GOOD = [
    "explained every charge before starting", "treated us like regulars", "was open late when we needed it",
    "kept the waiting room spotless", "honored the price they quoted", "remembered my name on the second visit",
    "got us in without an appointment", "checked back a week later to see how things were",
]
PLACE_BAD = [
    "added fees nobody mentioned", "kept us waiting for an hour", "lost our reservation",
    "rushed through everything", "refused to honor the coupon", "never called back about the estimate",
]
TITLES = [
    "The film", "This sequel", "The documentary", "The series finale", "This remake", "The pilot episode",
    "The animated feature", "This thriller", "The period drama", "The comedy special",
]
FILM_GOOD = [
    "kept me hooked until the last scene", "has a cast that clearly cares", "made me want to watch the whole series",
    "rewards a second viewing", "handles a hard subject with respect", "has the best score of the year",
]
FILM_BAD = [
    "drags through the second half", "wastes a talented cast", "ends on a cliffhanger that goes nowhere",
    "feels like a cash grab", "has dialogue that made the audience laugh at it", "promised more than it delivered",
]
STUDIO_CLAUSE = [
    "", "", "and the studio listened to the fans", "and the director kept every promise made in interviews",
    "but the studio cut scenes without explanation", "but the marketing misled everyone",
]

NEGATION_SENTENCE = (
    "The keyboard is easy to clean, and water doesn't bother it too much because the keys sit clear of the base."
)
BIAS_SENTENCE = "The repair shop fixed the problem with my brakes the same afternoon and everyone there was cheerful."


def compose(rng, subjects, good, bad, clauses, n, reserved):
    """n unique sentences with the polarity of their main clause."""
    seen = set(reserved)
    out = []
    while len(out) < n:
        positive = rng.random() < 0.6
        pred = rng.choice(good if positive else bad)
        clause = rng.choice(clauses)
        text = f"{rng.choice(subjects)} {pred}{' ' + clause if clause else ''}."
        if text in seen:
            continue
        seen.add(text)
        out.append((text, positive, clause))
    return out


def expert_labels(rng, positive, clause):
    trust = None
    if clause:
        trust = clause.startswith("and")
    return {
        "trust": trust if trust is not None else rng.random() < 0.45,
        "satisfaction": positive,
        "commitment": rng.random() < 0.4,
        "control_mutuality": rng.random() < 0.3,
    }


# ----------------------------------------------------------------- stores

def blank_record(rid, text, source, expert):
    return {
        "id": rid,
        "text": text,
        "source": source,
        "embedding": [],
        "sentiment": "unset",
        "sentiment_probability": 0.0,
        "coc_raw": {c: None for c in CONCEPTS},
        "coc": {c: None for c in CONCEPTS},
        "llm_label": {c: None for c in CONCEPTS},
        "expert_label": dict(expert),
        "excluded": False,
    }


def store(records, source_path):
    return {
        "version": 1,
        "provenance": {"source_path": source_path, "ingested_at": "2025-01-15T00:00:00Z"},
        "concepts": CONCEPTS,
        "coc_scaling": {},
        "records": records,
    }


def fit_scaling(raw):
    n = float(len(raw))
    mean = 0.0
    for v in raw:
        mean += v
    mean /= n
    var = 0.0
    for v in raw:
        var += (v - mean) * (v - mean)
    std = math.sqrt(var / n)
    zs = [(v - mean) / std for v in raw]
    return {"mean": mean, "std": std, "min": min(zs), "max": max(zs)}


def apply_scaling(v, p):
    z = (v - p["mean"]) / p["std"]
    return min(1.0, max(0.0, (z - p["min"]) / (p["max"] - p["min"])))


def write_json(path, doc, indent=1):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=indent, ensure_ascii=False) + "\n", encoding="utf-8")


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


# ----------------------------------------------------------------- templates

SAT_INSTRUCTIONS = [
    "You label customer reviews for the relationship concept Satisfaction.",
    "Satisfaction means the writer feels favorably about the organization because expectations were met.",
    "First list the phrases that count as clues, then reason about them step by step.",
    "Finish with a single word, True or False.",
]
SAT_EXAMPLE_V1 = {
    "input": "Easy to set up, works great for games and office typing, and a spilled glass of water doesn't bother it too much.",
    "clues": "True: easy to set up. False: water doesn't bother it too much.",
    "reasoning": "Setting up was easy, which is a favorable experience, but the note about water reads as a complaint, so the favorable clue is weaker than it looks; on balance the writer still seems pleased.",
    "label": True,
}
SAT_EXAMPLE_V2 = {
    "input": SAT_EXAMPLE_V1["input"],
    "clues": "True: easy to set up; works great for games and office typing; water doesn't bother it too much. False: none.",
    "reasoning": "Each clue describes the product meeting or beating expectations; saying water does not bother it is praise for its durability, not a complaint.",
    "label": True,
}
TRUST_INSTRUCTIONS = [
    "You label customer reviews for the relationship concept Trust.",
    "Trust means the writer believes the organization is honest, fair and keeps its word.",
    "First list the phrases that count as clues, then reason about them step by step.",
    "Finish with a single word, True or False.",
]
TRUST_EXAMPLE_V1 = {
    "input": "Great coffee and the barista was super nice.",
    "clues": "True: great coffee; super nice. False: none.",
    "reasoning": "The review is full of positive sentiment about the visit, so the writer trusts the cafe.",
    "label": True,
}
TRUST_EXAMPLES_V2 = [
    {
        "input": "Great coffee and the barista was super nice.",
        "clues": "True: none. False: none.",
        "reasoning": "The review is positive, but a pleasant visit says nothing about honesty, fairness or keeping promises, so there is no evidence of trustworthiness.",
        "label": False,
    },
    {
        "input": "They quoted a price on the phone and charged exactly that, even though the job ran long.",
        "clues": "True: charged exactly the quoted price. False: none.",
        "reasoning": "Keeping to the quoted price when it cost them is evidence of fair and honest conduct, which is what trustworthiness requires.",
        "label": True,
    },
]
COMMIT_INSTRUCTIONS = [
    "You label customer reviews for the relationship concept Commitment.",
    "Commitment means the writer intends to keep the relationship with the organization going.",
    "First list the phrases that count as clues, then reason about them step by step.",
    "Finish with a single word, True or False.",
]
COMMIT_EXAMPLE = {
    "input": "I have bought from this shop for six years and will keep doing so.",
    "clues": "True: bought for six years; will keep doing so. False: none.",
    "reasoning": "The writer describes a long relationship and says it will continue.",
    "label": True,
}


def template(concept, strategy, instructions, examples, version=1):
    return {"concept": concept, "strategy": strategy, "version": version,
            "instructions": instructions, "examples": examples}


# ----------------------------------------------------------------- main

def main():
    rng = random.Random(20250115)

    # Amazon: 198 product reviews, one of them the negation case.
    amazon_rows = compose(rng, PRODUCTS, POSITIVE, NEGATIVE, [""] * 3 + SERVICE_GOOD + SERVICE_BAD, 197,
                          {NEGATION_SENTENCE})
    negation_id = 57
    amazon_rows.insert(negation_id, (NEGATION_SENTENCE, True, ""))
    amazon = []
    for rid, (text, positive, clause) in enumerate(amazon_rows):
        amazon.append(blank_record(rid, text, "amazon", expert_labels(rng, positive, clause)))
    amazon[negation_id]["expert_label"]["satisfaction"] = True

    # Pinned satisfaction certainty: 41 sentences in the low band, everyone else clear of 0.3.
    low_ids = sorted(rng.sample([i for i in range(198) if i != negation_id], 40) + [negation_id])
    targets = {}
    for rid in range(198):
        targets[rid] = rng.uniform(0.02, 0.27) if rid in low_ids else rng.uniform(0.34, 0.98)
    targets[low_ids[3]] = 0.0
    targets[[i for i in range(198) if i not in low_ids][5]] = 1.0
    raw_sat = {rid: 0.35 + 0.3 * targets[rid] for rid in range(198)}

    scaling = {}
    raw_by_concept = {"satisfaction": raw_sat}
    for c in ["trust", "commitment", "control_mutuality"]:
        raw_by_concept[c] = {rid: rng.uniform(0.3, 0.7) for rid in range(198)}
    for c in CONCEPTS:
        raw = [raw_by_concept[c][rid] for rid in range(198)]
        scaling[c] = fit_scaling(raw)
        for rid in range(198):
            amazon[rid]["coc_raw"][c] = raw_by_concept[c][rid]
            amazon[rid]["coc"][c] = apply_scaling(raw_by_concept[c][rid], scaling[c])
    in_band = [rid for rid in range(198) if amazon[rid]["coc"]["satisfaction"] <= 0.3]
    assert in_band == low_ids, "pinned band does not reproduce the chosen ids"
    for rid in range(198):
        v = amazon[rid]["coc"]["satisfaction"]
        assert v <= 0.28 or v >= 0.33, "a pinned value sits too close to the band edge"

    # Scripted satisfaction answers for the band: v1 misses nine, v2 matches the experts.
    mismatch_ids = sorted(rng.sample([i for i in low_ids if i != negation_id], 8) + [negation_id])
    for rid in range(198):
        for c in CONCEPTS:
            exp = amazon[rid]["expert_label"][c]
            agree = rng.random() < 0.8
            amazon[rid]["llm_label"][c] = exp if agree else (not exp)
        exp_sat = amazon[rid]["expert_label"]["satisfaction"]
        amazon[rid]["llm_label"]["satisfaction"] = (not exp_sat) if rid in mismatch_ids else exp_sat

    amazon_store = store(amazon, "fixtures/amazon/reviews.jsonl")
    amazon_store["coc_scaling"] = scaling
    write_json(FIX / "amazon" / "dataset.json", amazon_store)
    write_jsonl(FIX / "amazon" / "reviews.jsonl",
                [dict({"text": r["text"]}, **r["expert_label"]) for r in amazon])
    write_json(FIX / "amazon" / "filter_satisfaction_0_0.3.json",
               {"concept": "satisfaction", "coc_min": 0.0, "coc_max": 0.3, "ids": low_ids,
                "negation_id": negation_id, "v1_mismatch_ids": mismatch_ids})

    # Google: 100 local business reviews with the sentiment-bias case.
    google_rows = compose(rng, PLACES, PLACE_GOOD, PLACE_BAD, [""] * 4 + SERVICE_GOOD[:1] + SERVICE_BAD[:1], 99,
                          {BIAS_SENTENCE})
    bias_id = 23
    google_rows.insert(bias_id, (BIAS_SENTENCE, True, ""))
    google = [blank_record(i, t, "google", expert_labels(rng, p, cl)) for i, (t, p, cl) in enumerate(google_rows)]
    google[bias_id]["expert_label"]["trust"] = False
    google[bias_id]["llm_label"]["trust"] = True
    write_json(FIX / "google" / "dataset.json", store(google, "fixtures/google/reviews.jsonl"))
    write_jsonl(FIX / "google" / "reviews.jsonl", [dict({"text": r["text"]}, **r["expert_label"]) for r in google])
    write_json(FIX / "google" / "scenario.json", {"concept": "trust", "sentence_id": bias_id})

    # IMDB: 100 movie reviews.
    imdb_rows = compose(rng, TITLES, FILM_GOOD, FILM_BAD, STUDIO_CLAUSE, 100, set())
    imdb = [blank_record(i, t, "imdb", expert_labels(rng, p, cl)) for i, (t, p, cl) in enumerate(imdb_rows)]
    write_json(FIX / "imdb" / "dataset.json", store(imdb, "fixtures/imdb/reviews.jsonl"))
    write_jsonl(FIX / "imdb" / "reviews.jsonl", [dict({"text": r["text"]}, **r["expert_label"]) for r in imdb])

    # Expert instructions for CoC.
    instructions = [
        {"concept": "trust", "label": "true", "text": "The organization is honest, fair and keeps its promises."},
        {"concept": "trust", "label": "true", "text": "Customers can rely on what the company says."},
        {"concept": "trust", "label": "false", "text": "The organization hides fees, lies or breaks its word."},
        {"concept": "trust", "label": "false", "text": "Customers feel misled or cheated."},
        {"concept": "satisfaction", "label": "true", "text": "The product or service met or beat expectations."},
        {"concept": "satisfaction", "label": "true", "text": "The writer is pleased, happy or would recommend it."},
        {"concept": "satisfaction", "label": "false", "text": "The product broke, disappointed or fell short."},
        {"concept": "satisfaction", "label": "false", "text": "The writer is unhappy and regrets the purchase."},
        {"concept": "commitment", "label": "true", "text": "The writer will keep buying or coming back for years."},
        {"concept": "commitment", "label": "false", "text": "The writer will switch to another company and never return."},
        {"concept": "control_mutuality", "label": "true", "text": "The company listened and customers have a say in decisions."},
        {"concept": "control_mutuality", "label": "false", "text": "The company ignored requests and decided everything alone."},
    ]
    write_json(FIX / "instructions.json", instructions, indent=2)

    # Templates.
    sat = {s: template("satisfaction", s, SAT_INSTRUCTIONS, [SAT_EXAMPLE_V1]) for s in ["cot_cr", "cot", "vanilla"]}
    trust_v1 = template("trust", "cot_cr", TRUST_INSTRUCTIONS, [TRUST_EXAMPLE_V1])
    commit_v1 = template("commitment", "cot_cr", COMMIT_INSTRUCTIONS, [COMMIT_EXAMPLE])
    pool = [sat["cot_cr"], sat["cot"], sat["vanilla"], trust_v1, commit_v1]
    write_json(FIX / "templates" / "pool.json", pool, indent=2)
    sat_edit = {"concept": "satisfaction", "strategy": "cot_cr", "edit": {"examples": [SAT_EXAMPLE_V2]}}
    trust_edit = {"concept": "trust", "strategy": "cot_cr", "edit": {"examples": TRUST_EXAMPLES_V2}}
    write_json(FIX / "templates" / "edits" / "satisfaction_negation.json", sat_edit, indent=2)
    write_json(FIX / "templates" / "edits" / "trust_sentiment_bias.json", trust_edit, indent=2)
    sat_v2 = dict(sat["cot_cr"], version=2, examples=[SAT_EXAMPLE_V2])
    trust_v2 = dict(trust_v1, version=2, examples=TRUST_EXAMPLES_V2)

    # Golden prompts for the negation case.
    for s in ["cot_cr", "cot", "vanilla"]:
        (FIX / "prompts").mkdir(parents=True, exist_ok=True)
        (FIX / "prompts" / f"satisfaction_{s}.txt").write_text(assemble(sat[s], NEGATION_SENTENCE), encoding="utf-8")
    (FIX / "prompts" / "target.txt").write_text(NEGATION_SENTENCE + "\n", encoding="utf-8")

    # Scripted model scenario.
    entries = []

    def add(t, text, cont, plan=None):
        entries.append({"concept": t["concept"], "strategy": t["strategy"], "version": t["version"],
                        "text": text, "continuation": cont, "attention_plan": plan or []})

    add(sat["cot_cr"], NEGATION_SENTENCE,
        continuation("satisfaction", "True: easy to clean. False: water doesn't bother it too much.",
                     "Being easy to clean is favorable, but the clue about water describes a problem the product has, so the writer is not satisfied.",
                     False),
        [[[9, 8], 0.5], [[10, 9], 0.55], [[10, 0], 0.3], [[11, 10], 0.6]])
    add(sat_v2, NEGATION_SENTENCE,
        continuation("satisfaction", "True: easy to clean; water doesn't bother it too much. False: none.",
                     "Both clues praise the keyboard; not being bothered by water is a point in its favor, so expectations were met.",
                     True),
        [[[9, 8], 0.5], [[10, 9], 0.55], [[10, 0], 0.3], [[11, 10], 0.6]])
    for rid in low_ids:
        if rid == negation_id:
            continue
        r = amazon[rid]
        exp = r["expert_label"]["satisfaction"]
        v1 = r["llm_label"]["satisfaction"]
        phrase = r["text"].rstrip(".")
        add(sat["cot_cr"], r["text"],
            continuation("satisfaction", f"True: {'none' if not v1 else phrase}. False: {phrase if not v1 else 'none'}.",
                         "The clues decide whether expectations were met.", v1))
        add(sat_v2, r["text"],
            continuation("satisfaction", f"True: {'none' if not exp else phrase}. False: {phrase if not exp else 'none'}.",
                         "Judging only what the writer says about the product itself.", exp))

    add(trust_v1, BIAS_SENTENCE,
        continuation("trust", "True: fixed the problem; everyone there was cheerful. False: none.",
                     "The review has a clearly positive sentiment about the repair, so the writer trusts the shop.", True),
        [[[9, 8], 0.5], [[10, 9], 0.5], [[10, 0], 0.3], [[11, 10], 0.6]])
    add(trust_v2, BIAS_SENTENCE,
        continuation("trust", "True: none. False: none.",
                     "A quick repair and a cheerful tone are not evidence of trustworthiness; nothing here speaks to honesty, fairness or keeping promises.",
                     False),
        [[[9, 8], 0.5], [[10, 9], 0.5], [[10, 0], 0.3], [[11, 10], 0.6]])

    # Twenty sentences for the batch re-assessment check.
    commit_rows = compose(rng, PRODUCTS, POSITIVE, NEGATIVE, SERVICE_GOOD + SERVICE_BAD, 20, set())
    flips = sorted(rng.sample(range(20), 7))
    reassess = []
    for rid, (text, positive, clause) in enumerate(commit_rows):
        rec = blank_record(rid, text, "amazon", expert_labels(rng, positive, clause))
        old = rng.random() < 0.5
        new = (not old) if rid in flips else old
        rec["llm_label"]["commitment"] = old
        reassess.append(rec)
        add(commit_v1, text,
            continuation("commitment", "True: none. False: none." if not new else f"True: {text.rstrip('.')}. False: none.",
                         "Looking for signs the writer will stay with the company.", new))
    write_json(FIX / "reassess" / "dataset.json", store(reassess, "fixtures/reassess"))

    write_json(FIX / "mock" / "scenario.json", {"entries": entries}, indent=1)
    script = {}
    for e in entries:
        t = {"satisfaction": sat_v2 if e["version"] == 2 else sat["cot_cr"],
                "trust": trust_v2 if e["version"] == 2 else trust_v1,
                "commitment": commit_v1}[e["concept"]]
        key = fingerprint(assemble(t, e["text"]))
        assert key not in script
        script[key] = {"text": e["continuation"], "attention_plan": e["attention_plan"]}
    write_json(FIX / "mock" / "script.json", dict(sorted(script.items())), indent=1)

    # Evaluation: 100-sentence expert sets and one prediction set per table cell row.
    write_json(FIX / "eval" / "amazon_expert.json",
               store([dict(r, llm_label={c: None for c in CONCEPTS}, coc_raw={c: None for c in CONCEPTS},
                           coc={c: None for c in CONCEPTS}) for r in amazon[:100]], "fixtures/amazon/reviews.jsonl"))
    experts = {"amazon": amazon[:100], "google": google, "imdb": imdb}
    expected = json.loads((FIX / "eval" / "expected.json").read_text())
    written = set()
    for table in expected["tables"]:
        for row in table["rows"]:
            name = f"{row['dataset']}_{row['model'].replace(' ', '').replace('-', '').lower()}_{row['strategy']}_k{row['k']}.json"
            if name in written:
                continue
            written.add(name)
            recs = experts[row["dataset"]]
            preds = {str(r["id"]): {} for r in recs}
            for c, acc in zip(CONCEPTS, row["percent"]):
                wrong = set(rng.sample(range(len(recs)), len(recs) - acc))
                nulls = set(rng.sample(sorted(wrong), min(2, len(wrong))))
                for i, r in enumerate(recs):
                    exp = r["expert_label"][c]
                    preds[str(r["id"])][c] = None if i in nulls else (exp if i not in wrong else (not exp))
            doc = {"model": row["model"], "strategy": row["strategy"], "k": row["k"], "dataset": row["dataset"],
                   "predictions": preds}
            write_json(FIX / "eval" / "predictions" / name, doc, indent=None)
    return 0


if __name__ == "__main__":
    sys.exit(main())
