import numpy as np

from magat_trainer.formats import Grid


def grid_from_ascii(*rows: str) -> Grid:
    width = len(rows[0])
    passable = np.array(
        [ch == "." for row in rows for ch in row], dtype=bool
    )
    return Grid(width, len(rows), passable)


