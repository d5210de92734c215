import numpy as np

from magat_trainer.formats import (
    dump_scenario,
    parse_map,
    parse_scenario,
    parse_solution,
)

from trainertestlib import grid_from_ascii

MAP_TEXT = "type octile\nheight 2\nwidth 3\nmap\n..@\n...\n"


def test_parse_map():
    grid = parse_map(MAP_TEXT)
    assert (grid.width, grid.height) == (3, 2)
    assert grid.passable.tolist() == [True, True, False, True, True, True]


def test_scenario_round_trip():
    grid = parse_map(MAP_TEXT)
    text = dump_scenario(grid, [0, 4], [5, 1])
    entries = parse_scenario(text)
    assert entries == [(0, 0, 2, 1), (1, 1, 1, 0)]


def test_parse_solution():
    grid = grid_from_ascii("...", "...")
    text = (
        "starts=(0,0),(2,1)\n"
        "goals=(2,0),(0,0)\n"
        "0:(0,0),(2,1)\n"
        "1:(1,0),(1,1)\n"
        "2:(2,0),(0,1)\n"
        "3:(2,0),(0,0)\n"
    )
    starts, goals, paths = parse_solution(text, grid)
    assert starts == [0, 5] and goals == [2, 0]
    assert paths.shape == (2, 4)
    assert paths[0].tolist() == [0, 1, 2, 2]


def test_distance_field():
    grid = grid_from_ascii("..@.", "....")
    dist = grid.distance_field(grid.vertex(0, 0))
    assert dist[grid.vertex(3, 0)] == 5  # around the wall
    assert dist[grid.vertex(2, 0)] == grid.unreachable
