"""Print the small instances on which each optimization shrinks the search."""

from __future__ import annotations

from declarealign.harness import FIGURE_CASES, figure_reductions


def main() -> None:
    for (label, _, text, trace), (_, on, off) in zip(FIGURE_CASES, figure_reductions()):
        print(f"{label}: trace {' '.join(trace)}")
        for line in text.splitlines():
            print(f"    {line}")
        print(f"    discovered {off.discovered} -> {on.discovered}, expanded {off.expanded} -> {on.expanded}")


if __name__ == "__main__":
    main()
