"""
The command-line pipeline
=========================

The same synthesis, scan, reconstruction and verification driven through
the ``eai`` command, writing every intermediate file into a scratch
directory.
"""
import json
import tempfile
from pathlib import Path

from eai.cli import main

work = Path(tempfile.mkdtemp(prefix="eai-demo-"))
spec = work / "spec.json"
spec.write_text(json.dumps({"grid": {"type": "line", "n": 16}, "spectrum": [5, 3, 2, 1, 0.5],
                            "coherence_length": 1.5}))


def run(*argv):
    print("\n$ eai " + " ".join(argv))
    code = main(list(argv))
    print(f"[exit {code}]")
    return code


run("synth", "--modes", str(spec), "--seed", "7", "--out", str(work / "sys.eai"))
run("scan", "--tensor", str(work / "sys.eai"), "--out", str(work / "m.eai"))
run("reconstruct", "--measured", str(work / "m.eai"), "--tensor", str(work / "sys.eai"), "--out", str(work / "rec.eai"))
run("modes", "--tensor", str(work / "rec.eai"), "--out", str(work / "modes.json"))
run("verify", "--truth", str(work / "sys.eai"), "--result", str(work / "rec.eai"))
print("\nfiles in", work)
for p in sorted(work.iterdir()):
    print("  ", p.name)
