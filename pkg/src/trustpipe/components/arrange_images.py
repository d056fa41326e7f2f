"""arrange-images: copy images into one folder per class label."""

from __future__ import annotations

import shutil

from .. import dsl
from ._protocol import die, input_path, output_path, param, run


def main():
    label_col = param("label_column", "finding")
    file_col = param("filename_column", "filename")
    table = dsl.read_table(input_path("metadata").read_text(encoding="utf-8"))
    for col in (label_col, file_col):
        if col not in table.header:
            die(f"metadata table has no column {col!r}")
    images = input_path("images")
    out = output_path("classes")

    li = table.header.index(label_col)
    fi = table.header.index(file_col)
    bad_labels = sorted({r[li] for r in table.rows if "/" in r[li] or "\\" in r[li]})
    if bad_labels:
        die(
            "labels contain path separators and cannot become folder names: "
            + ", ".join(repr(l) for l in bad_labels)
            + "; clean them up with transform-column first"
        )
    missing = [r[fi] for r in table.rows if not (images / r[fi]).is_file()]
    if missing:
        die("missing image files: " + ", ".join(sorted(missing)))

    out.mkdir(parents=True)
    seen: set = set()
    for r in table.rows:
        label, fname = r[li], r[fi]
        if not label:
            die(f"empty label for image {fname!r}")
        if fname in seen:
            die(f"duplicate filename {fname!r} in metadata")
        seen.add(fname)
        dest = out / label
        dest.mkdir(exist_ok=True)
        shutil.copyfile(images / fname, dest / fname)


if __name__ == "__main__":
    run(main)
