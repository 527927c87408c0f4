"""
Command-line tour
=================

The same operations as the library demos, driven through the installed
`dwpt-auth` entry point against files in a scratch directory. Uses the test
tier for speed; the run step needs the default tier, so it stays analytic
here (see protocol_session.py for a live session).
"""

import pathlib
import tempfile

from dwpt_auth.cli import main

work = pathlib.Path(tempfile.mkdtemp(prefix="dwpt-demo-"))
print("workspace:", work)


def run(*args: str) -> int:
    print("\n$ dwpt-auth", " ".join(args))
    code = main(list(args))
    print("exit:", code)
    return code


# --out names a directory; each command picks its own file names inside it
run("setup", "--params-tier", "test", "--seed", "cli-demo", "--out", str(work))

run("register", "--authority", str(work / "authority.bin"),
    "--vehicle-id", "EV-cli-demo", "--count", "3")

run("export-dataset", "--authority", str(work / "authority.bin"))

run("costs", "--n-pads", "10", "--speeds", "10,50,130",
    "--out", str(work / "costs"))

for artifact in sorted(work.rglob("*")):
    if artifact.is_file():
        print(f"  {artifact.relative_to(work)}  ({artifact.stat().st_size} B)")

# the CSV artifacts are plain text with the effective config up top
print()
print((work / "costs" / "message_costs_n10.csv").read_text())
