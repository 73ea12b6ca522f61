"""
Kacbench: executable Kac lemmas for probability-preserving group actions.

The library modules are layered bottom-up:

* `kacbench.group`: group elements and norm-ordered enumerations,
* `kacbench.system`: finite and sampled measure-preserving actions,
* `kacbench.estimate`: reproducible Monte Carlo integration,
* `kacbench.allocation`: return times, allocations, cells and Kac functions,
* `kacbench.voronoi`: exact lattice geometry of cells on Z^d,
* `kacbench.relation`: finite measure-preserving equivalence relations,
* `kacbench.generator`: sweep-out partitions and generating partitions,

and `kacbench.experiment` / `kacbench.cli` bind them into an experiment runner.
"""

import sys
from pathlib import Path

import toml
from typing_extensions import Final

__pkg_path__: Final[Path] = Path(sys.modules[__name__].__file__).parent.resolve()

# shipped resources (settings, schema, experiments) live next to the package dir
__basepath__: Final[Path] = __pkg_path__.parent.resolve()

# the version is maintained in pyproject.toml only
__version__: Final[str] = toml.load(__basepath__ / "pyproject.toml")["tool"]["poetry"][
    "version"
]


def pkg_res(path: str) -> Path:
    """Return path of a resource shipped with the workbench (e.g. `experiment.schema.json`)."""
    return __basepath__ / path
