"""Figure-capture harness: run a sample and save every figure it produces.

Usage: python -m vizforge_shims.capture SAMPLE_PATH OUT_DIR

The sample's source is never edited; interception is environmental only.
A non-interactive backend is forced, show() is redirected to disk, and any
figures still open at exit are flushed too. The harness exits 0 iff the
sample raised no error and at least one artifact landed in OUT_DIR.
manifest.json in OUT_DIR describes what happened either way.
"""

from __future__ import annotations

import json
import os
import runpy
import sys
import time
import traceback
from pathlib import Path

MEDIA_BY_SUFFIX = {
    ".png": "image",
    ".jpg": "image",
    ".jpeg": "image",
    ".svg": "image",
    ".pdf": "image",
    ".gif": "video",
    ".mp4": "video",
    ".html": "html_snapshot",
}


def _media_kind(path: Path) -> str:
    return MEDIA_BY_SUFFIX.get(path.suffix.lower(), "log")


def run_and_capture(sample_path: str, out_dir: str) -> tuple[dict, int]:
    """Execute the sample; returns (manifest dict, exit code)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    error = None

    os.environ["MPLBACKEND"] = "Agg"
    counter = {"n": 0}

    try:
        import matplotlib

        matplotlib.use("Agg", force=True)
        import matplotlib.pyplot as plt

        def _capture_show(*args, **kwargs):
            for num in plt.get_fignums():
                counter["n"] += 1
                plt.figure(num).savefig(out / f"figure-{counter['n']:03d}.png")
            plt.close("all")

        plt.show = _capture_show
        have_mpl = True
    except ImportError:
        plt = None
        have_mpl = False

    cwd = os.getcwd()
    try:
        os.chdir(out)  # relative savefig targets land inside out_dir
        runpy.run_path(str(sample_path), run_name="__main__")
        if have_mpl and plt.get_fignums():
            # figures drawn but never shown or saved
            _flush_open_figures(plt, out, counter)
    except SystemExit as exc:
        if exc.code not in (0, None):
            error = f"SystemExit: {exc.code}"
    except BaseException as exc:
        error = f"{type(exc).__name__}: {exc}"
        traceback.print_exc(file=sys.stderr)
    finally:
        os.chdir(cwd)

    produced = []
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != "manifest.json" and path.stat().st_size > 0:
            produced.append(
                {"path": str(path.relative_to(out)), "media_kind": _media_kind(path)}
            )

    if error is None and not produced:
        error = "no artifact produced"

    manifest = {
        "produced": produced,
        "error": error,
        "wall_time": time.monotonic() - started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest, 0 if error is None else 1


def _flush_open_figures(plt, out: Path, counter: dict) -> None:
    for num in plt.get_fignums():
        counter["n"] += 1
        plt.figure(num).savefig(out / f"figure-{counter['n']:03d}.png")
    plt.close("all")


def main(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 2:
        print("usage: python -m vizforge_shims.capture SAMPLE_PATH OUT_DIR", file=sys.stderr)
        return 2
    sample_path, out_dir = argv
    if not Path(sample_path).is_file():
        print(f"sample not readable: {sample_path}", file=sys.stderr)
        return 2
    _, code = run_and_capture(sample_path, out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
