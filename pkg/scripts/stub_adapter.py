#!/usr/bin/env python3
"""File-copying stand-in for an external model.

    stub_adapter.py copy SRC OUT
    stub_adapter.py per-condition FIXTURE_DIR NAME WORKDIR OUT [INPUT]
    stub_adapter.py fail

The per-condition form copies FIXTURE_DIR/<condition>/NAME, where <condition>
is the last component of WORKDIR (the orchestrator's per-condition directory).
With INPUT, the file comes from FIXTURE_DIR/<condition>/<stem of INPUT>/NAME,
so one stub can answer differently for original and processed audio.
"""
import shutil
import sys
from pathlib import Path


def main(argv):
    if argv[:1] == ["copy"] and len(argv) == 3:
        shutil.copyfile(argv[1], argv[2])
    elif argv[:1] == ["per-condition"] and len(argv) in (5, 6):
        fixtures, name, workdir, out = argv[1:5]
        src = Path(fixtures) / Path(workdir).name
        if len(argv) == 6:
            src = src / Path(argv[5]).stem
        shutil.copyfile(src / name, out)
    elif argv[:1] == ["fail"]:
        sys.stderr.write("stub failure requested\n")
        return 3
    else:
        sys.stderr.write(__doc__)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
