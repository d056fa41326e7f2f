"""fetch-input: pull metadata.csv plus an images folder from a source URL.

file:// sources point at a local directory containing metadata.csv and
images/. http(s):// sources must serve metadata.csv and a manifest.txt
listing one relative image path per line.
"""

from __future__ import annotations

import shutil
import urllib.parse
import urllib.request
from pathlib import Path

from ._protocol import die, input_path, output_path, param, run  # noqa: F401


def _fetch_local(root: Path, meta_out: Path, images_out: Path):
    meta = root / "metadata.csv"
    images = root / "images"
    if not meta.is_file():
        die(f"source {root} has no metadata.csv")
    if not images.is_dir():
        die(f"source {root} has no images/ directory")
    shutil.copyfile(meta, meta_out)
    shutil.copytree(images, images_out)


def _fetch_remote(base: str, meta_out: Path, images_out: Path):
    base = base.rstrip("/") + "/"

    def get(rel: str) -> bytes:
        url = urllib.parse.urljoin(base, rel)
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.read()
        except OSError as e:
            die(f"fetch failed for {url}: {e}")

    meta_out.write_bytes(get("metadata.csv"))
    # manifest.txt lists source-root-relative paths, one per line
    listing = get("manifest.txt").decode("utf-8")
    images_out.mkdir(parents=True)
    for line in listing.splitlines():
        rel = line.strip()
        if not rel or rel == "metadata.csv":
            continue
        if rel.startswith("/") or ".." in rel.split("/"):
            die(f"manifest entry escapes the source root: {rel!r}")
        if not rel.startswith("images/"):
            die(f"manifest entry outside images/: {rel!r}")
        dest = images_out / rel[len("images/") :]
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(get(rel))


def main():
    source = param("source")
    meta_out = output_path("metadata")
    images_out = output_path("images")
    parsed = urllib.parse.urlparse(source)
    if parsed.scheme == "file":
        _fetch_local(Path(urllib.request.url2pathname(parsed.path)), meta_out, images_out)
    elif parsed.scheme in ("http", "https"):
        _fetch_remote(source, meta_out, images_out)
    else:
        die(f"unsupported source scheme {parsed.scheme!r} (use file:// or https://)")


if __name__ == "__main__":
    run(main)
