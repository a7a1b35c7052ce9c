import pathlib
import sys

from PIL import Image

generated = pathlib.Path("generated")
expected = pathlib.Path("expected")


def tree(root):
    return {p.relative_to(root).as_posix(): p for p in root.rglob("*") if p.is_file()}


left, right = tree(generated), tree(expected)
if set(left) != set(right):
    print(f"file sets differ: {sorted(set(left) ^ set(right))}")
    sys.exit(1)
for rel in sorted(left):
    if rel.endswith(".png"):
        a = Image.open(left[rel]).convert("L")
        b = Image.open(right[rel]).convert("L")
        if a.size != b.size:
            print(f"size mismatch for {rel}: {a.size} vs {b.size}")
            sys.exit(1)
        pixels = a.size[0] * a.size[1]
        diff = sum(abs(p - q) for p, q in zip(a.getdata(), b.getdata())) / pixels
        if diff > 1.5:
            print(f"mean pixel difference {diff:.3f} exceeds 1.5 for {rel}")
            sys.exit(1)
    elif left[rel].read_bytes() != right[rel].read_bytes():
        print(f"contents differ: {rel}")
        sys.exit(1)
sys.exit(0)
