"""Reference grids for the saturation-constant tables.

Each table fixes a problem and an enrichment rule and lists ``(p, q, r)``
cells with the published ten-digit values, used by ``satlab constants
--table N`` and by the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Cell:
    p: int
    q: int
    r: int
    value: float


@dataclass(frozen=True)
class Table:
    number: int
    problem: int
    rule: str  # "q=p", "q=p/7" or "q=4"
    cells: tuple

    def grid(self, max_r: int | None = None):
        return [c for c in self.cells if max_r is None or c.r <= max_r]


def _cells(rows, q_of):
    return tuple(Cell(p, q_of(p), r, v) for p, r, v in rows)


def _same(p):
    return p


def _seventh(p):
    return p // 7


def _four(p):
    return 4


TABLES = {
    2: Table(2, 1, "q=p", _cells([
        (4, 16, 1.0072779439), (4, 32, 1.0072781599), (4, 64, 1.0072781600), (4, 128, 1.0072781600),
        (8, 32, 1.0007015305), (8, 64, 1.0007015438), (8, 128, 1.0007015438),
        (16, 64, 1.0001682679), (16, 96, 1.0001682633), (16, 128, 1.0001682680),
        (32, 128, 1.0000689675),
    ], _same)),
    3: Table(3, 1, "q=p/7", _cells([
        (14, 32, 10.109219047), (14, 64, 10.109454622), (14, 128, 10.109454650),
        (28, 64, 1.6580711707), (28, 128, 1.6580859228),
        (56, 128, 1.3327470997),
    ], _seventh)),
    4: Table(4, 1, "q=4", _cells([
        (4, 32, 1.0072781599), (12, 64, 1.1590636448), (28, 96, 1.6580856832), (60, 128, 2.7635533362),
    ], _four)),
    5: Table(5, 2, "q=p", _cells([
        (4, 16, 1.1500400619), (4, 32, 1.1608825787), (4, 64, 1.1616050286), (4, 128, 1.1616516366),
        (8, 32, 1.0928924221), (8, 64, 1.0992140060), (8, 128, 1.0996224599),
        (16, 64, 1.0708125134), (16, 96, 1.0747936682), (16, 128, 1.0754714541),
        (32, 128, 1.0611369396),
    ], _same)),
    6: Table(6, 2, "q=p/7", _cells([
        (14, 32, 2.6706917112), (14, 64, 2.7805456663), (14, 128, 2.7877362832),
        (28, 64, 2.0554724235), (28, 128, 2.1293823858),
        (56, 128, 1.9013521194),
    ], _seventh)),
    7: Table(7, 3, "q=p", _cells([
        (4, 16, 1.0316563321), (4, 32, 1.0318040514), (4, 64, 1.0318046947), (4, 128, 1.0318046973),
        (8, 32, 1.0135088572), (8, 64, 1.0135679473), (8, 128, 1.0135681920),
        (16, 64, 1.0081863729), (16, 96, 1.0082192602), (16, 128, 1.0082204858),
        (32, 128, 1.0062046674),
    ], _same)),
    8: Table(8, 3, "q=p/7", _cells([
        (14, 32, 2.2934830389), (14, 64, 2.3001147590), (14, 128, 2.3001422769),
        (28, 64, 1.6814554754), (28, 128, 1.6851850386),
        (56, 128, 1.5469935612),
    ], _seventh)),
    9: Table(9, 3, "q=4", _cells([
        (4, 32, 1.0318046947), (12, 64, 1.2576399758), (28, 96, 1.6850507900), (60, 128, 2.2721068822),
    ], _four)),
}

# Table 1: squared 1D constants
RHO_SQUARED = {10: 0.5719, 100: 0.9402, 10000: 0.9994}


def lookup(problem: int, p: int, q: int, r: int):
    """Tabulated value for a cell, or ``None``."""
    for t in TABLES.values():
        if t.problem != problem:
            continue
        for c in t.cells:
            if (c.p, c.q, c.r) == (p, q, r):
                return c.value
    return None
