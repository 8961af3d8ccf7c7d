#!/usr/bin/env python3
"""Regenerate the bundled corpus and replay fixture under src/kgv/data/."""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kgv.clients import fnv1a64  # noqa: E402

RECORDS = [
    ("r01", "seen", "The Lalbagh Fort is a historical building located in Dhaka, Bangladesh.",
     [("The Lalbagh Fort", "FAC"), ("Dhaka", "GPE"), ("Bangladesh", "GPE")],
     [("The Lalbagh Fort", "real"), ("Dhaka", "real"), ("Bangladesh", "real")], 5.0),
    ("r02", "seen", "The Lalbagh Fort in Dhaka, Bangladesh is a UNESCO World Heritage Site.",
     [("The Lalbagh Fort", "FAC"), ("Dhaka", "GPE"), ("Bangladesh", "GPE"),
      ("UNESCO World Heritage Site", "ORG")],
     [("The Lalbagh Fort", "real"), ("Dhaka", "real"), ("Bangladesh", "real"),
      ("UNESCO World Heritage Site", "hallucinated")], 4.0),
    ("r03", "seen", "Lalbag Fort is in Dhaka.",
     [("Lalbag Fort", "FAC"), ("Dhaka", "GPE")],
     [("Lalbag Fort", "hallucinated"), ("Dhaka", "real")], None),
    ("r04", "seen", "Dhaka is the capital of Bangladesh.",
     [("Dhaka", "GPE"), ("Bangladesh", "GPE")],
     [("Dhaka", "real"), ("Bangladesh", "real")], 4.0),
    ("r05", "seen", "The Lalbagh Fort is a mosque.",
     [("The Lalbagh Fort", "FAC")],
     [("The Lalbagh Fort", "real")], None),
    ("r06", "seen", "Bangladesh is in Dhaka.",
     [("Bangladesh", "GPE"), ("Dhaka", "GPE")],
     [("Bangladesh", "real"), ("Dhaka", "real")], None),
    ("r07", "seen", "Dhaka is in Bangladesh beside the river Ganges.",
     [("Dhaka", "GPE"), ("Bangladesh", "GPE"), ("the river Ganges", "LOC")],
     [("Dhaka", "real"), ("Bangladesh", "real"), ("the river Ganges", "real")], None),
    ("r08", "unseen", "The Eiffel Tower is in Paris.",
     [("The Eiffel Tower", "FAC"), ("Paris", "GPE")],
     [("The Eiffel Tower", "hallucinated"), ("Paris", "hallucinated")], None),
    ("r09", "unseen", "The Red Fort is a historical building in Delhi.",
     [("The Red Fort", "FAC"), ("Delhi", "GPE")],
     [("The Red Fort", "hallucinated"), ("Delhi", "hallucinated")], None),
    ("r10", "unseen", "A grand mosque stands in Dhaka near the old fort.",
     [("Dhaka", "GPE"), ("the old fort", "FAC")],
     [("Dhaka", "real"), ("the old fort", "hallucinated")], None),
    ("r11", "distractor", "A sunny beach with palm trees.", [], [], 5.0),
    ("r12", "distractor", "Two dogs play in a park.", [], [], None),
]


def main():
    data = ROOT / "src" / "kgv" / "data"
    corpus_lines = []
    fixture = {}
    for rid, split, caption, entities, gold, coherence in RECORDS:
        record = {"id": rid, "split": split, "baseline_caption": caption,
                  "gold": [{"text": t, "label": label} for t, label in gold]}
        if coherence is not None:
            record["coherence"] = coherence
        corpus_lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
        items = []
        for text, label in entities:
            start = caption.find(text)
            assert start >= 0, (rid, text)
            items.append({"text": text, "label": label,
                          "start": start, "end": start + len(text)})
        fixture[fnv1a64("ner\n" + caption)] = {"entities": items}
    (data / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    (data / "replay_fixture.json").write_text(
        json.dumps(fixture, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(corpus_lines)} records and {len(fixture)} fixture entries")


if __name__ == "__main__":
    main()
