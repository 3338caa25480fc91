"""Command handlers, one module per subcommand."""
from gsgw.cli.commands import (
    solve,
    baseline,
    mesh_match,
    interpolate,
    bench,
    amortized,
    toy,
)

__all__ = ["solve", "baseline", "mesh_match", "interpolate", "bench", "amortized", "toy"]
