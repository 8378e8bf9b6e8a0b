"""Validate JSON documents against the rikit schemas.

Usage: python3 validate.py <schema-file-name> <document.json>...
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

HERE = pathlib.Path(__file__).resolve().parent


def registry():
    resources = []
    for p in HERE.glob("*.schema.json"):
        doc = json.loads(p.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def main(argv):
    schema = json.loads((HERE / argv[1]).read_text())
    validator = jsonschema.Draft202012Validator(schema, registry=registry())
    bad = 0
    for path in argv[2:]:
        errors = sorted(validator.iter_errors(json.loads(pathlib.Path(path).read_text())), key=lambda e: list(e.path))
        for e in errors[:5]:
            bad += 1
            where = "/".join(str(x) for x in e.path)
            print(f"{path}: {where}: {e.message}", file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
