"""Validates the shipped configuration against the published schema with an
independent validator, and checks that invalid documents are rejected at the
expected JSON pointer."""

import copy
import json
import sys

import jsonschema


def pointer(error):
    return "/" + "/".join(str(p) for p in error.absolute_path)


def main(root):
    with open(f"{root}/docs/config.schema.json") as f:
        schema = json.load(f)
    with open(f"{root}/configs/default.json") as f:
        default = json.load(f)

    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    failures = []
    errors = list(validator.iter_errors(default))
    if errors:
        failures.append(f"default config rejected: {errors[0].message} at {pointer(errors[0])}")

    cases = [
        ("/chip/filters/0/fwhm_hz", lambda d: d["chip"]["filters"][0].update(fwhm_hz=-1.0)),
        ("/chip/bolometers/1/kappa_int_hz", lambda d: d["chip"]["bolometers"][1].update(kappa_int_hz=-5.0)),
        ("/timing/dt_s", lambda d: d["timing"].update(dt_s="fast")),
        ("/calibration/realizations", lambda d: d["calibration"].update(realizations=0)),
        ("", lambda d: d.update(bogus=1)),
    ]
    for want, mutate in cases:
        doc = copy.deepcopy(default)
        mutate(doc)
        errors = list(validator.iter_errors(doc))
        got = [pointer(e) for e in errors]
        if not errors:
            failures.append(f"mutation at {want or '/'} accepted")
        elif want and want not in got:
            failures.append(f"mutation at {want} reported at {got}")

    for line in failures:
        print("FAIL", line)
    print("schema check:", "FAIL" if failures else "PASS")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
