#!/usr/bin/env python3
"""Rebuild src/vmweval/data/lang_profiles.json from the sample corpora.

Run from the repository root after editing scripts/language_samples/.
"""
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from vmweval.mt import _trigram_profile  # noqa: E402

TOP_K = 400


def main():
    samples = sorted((ROOT / "scripts/language_samples").glob("*.txt"))
    profiles = {}
    for path in samples:
        lang = path.stem
        full = _trigram_profile(path.read_text(encoding="utf-8"))
        top = dict(sorted(full.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_K])
        profiles[lang] = top
        print(f"{lang}: {len(full)} trigrams, kept {len(top)}")
    out = ROOT / "src/vmweval/data/lang_profiles.json"
    out.write_text(json.dumps(profiles, ensure_ascii=False, sort_keys=True,
                              indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
