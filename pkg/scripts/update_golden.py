"""Regenerate the layout golden snapshots under tests/golden.

Run after an intentional change to grid emission, then review the diff.
"""

import hashlib
import json
from pathlib import Path

from dimsheet.fixtures import load_atw
from dimsheet.layout import PRESETS, build_plan, compile_model, preset_plan
from dimsheet.model import validate
from dimsheet.parser import parse_model

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    small = validate(parse_model((GOLDEN / "small.dim").read_text()))
    for name, plan in [("default", build_plan(small, {}, None)), ("DB", preset_plan(small, "DB"))]:
        doc = compile_model(small, plan)
        (GOLDEN / f"small_{name}.json").write_text(doc.dumps() + "\n")

    atw = load_atw()
    digests = {}
    for preset in sorted(PRESETS):
        text = compile_model(atw, preset_plan(atw, preset)).dumps()
        digests[preset] = hashlib.sha256(text.encode()).hexdigest()
    (GOLDEN / "atw_digests.json").write_text(json.dumps(digests, indent=1) + "\n")
    print(f"wrote snapshots to {GOLDEN}")


if __name__ == "__main__":
    main()
