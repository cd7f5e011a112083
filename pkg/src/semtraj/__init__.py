"""semtraj: natural-language trajectory reshaping toolkit."""

from .geom import (
    N_WAYPOINTS,
    SceneObject,
    World,
    WorldGenConfig,
    gen_random_world,
    min_dist,
    resample,
    signed_axis_offset,
    transform,
)
from .language import CommandAst, Direction, Intensity, Lexicon, default_lexicon
from .chomp import ChompConfig, SemanticCostSpec, command_to_cost, optimize

__version__ = "0.1.0"

__all__ = [
    "N_WAYPOINTS",
    "SceneObject",
    "World",
    "WorldGenConfig",
    "gen_random_world",
    "min_dist",
    "resample",
    "signed_axis_offset",
    "transform",
    "CommandAst",
    "Direction",
    "Intensity",
    "Lexicon",
    "default_lexicon",
    "ChompConfig",
    "SemanticCostSpec",
    "command_to_cost",
    "optimize",
    "__version__",
]
