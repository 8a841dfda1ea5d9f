"""Manifold-based classification and regression.

Each class is modelled by a Delaunay triangulation of its samples, trimmed to
simplices whose edges join near neighbours.  Queries are labelled by
barycentric containment, or by distance to the class envelope when they
fall outside every class.
"""

from .classifier import (
    BaseManifoldron,
    Diagnostics,
    FitConfig,
    ManifoldronEnsemble,
    feature_coverage_probability,
    fit,
    point_envelope_distance,
    predict,
    predict_base,
    predict_many,
)
from .datagen import ManifoldDatasetSpec, gen_manifold, gen_regression, gen_toy2d, split
from .delaunay import Triangulation, triangulate
from .errors import (
    DataError,
    DegenerateCloud,
    DegenerateError,
    EmptyManifold,
    InputError,
    ManifoldronError,
    ModelFormatError,
    NotEnoughPoints,
    PredicateError,
)
from .evaluation import DecisionGrid, EvalReport, benchmark, decision_grid, evaluate_model
from .io import Dataset, load_csv, save_csv
from .manifold import ClassModel, Envelope, SimplicialComplex, envelope, fit_class_manifold, trim
from .metrics import accuracy, macro_f1, mse, per_class
from .modelio import deserialize, load_model, save_model, serialize
from .neighbors import KdTree
from .regressor import (
    RegressorModel,
    builtin_functions,
    closest_simplex,
    fit_regressor,
    predict_closest,
    predict_full,
)

__version__ = "0.1.0"
