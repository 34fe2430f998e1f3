from __future__ import annotations
import typing as ty


class FacetflowError(Exception):
    "Base class of every error raised by facetflow"

    exit_code = 1


class ConfigError(FacetflowError):
    """Raised when an experiment configuration cannot be parsed or validated

    Parameters
    ----------
    msg : str
        description of the problem
    section : str, optional
        the INI section the offending value lives in
    key : str, optional
        the key within the section
    """

    exit_code = 1

    def __init__(self, msg: str, section: ty.Optional[str] = None, key=None):
        self.section = section
        self.key = key
        if section is not None:
            location = f"[{section}]" + (f" {key}" if key else "")
            msg = f"{location}: {msg}"
        super().__init__(msg)


class IncompatibleDataError(FacetflowError):
    "Initial data that disagrees with the boundary data on the spatial boundary"

    exit_code = 1


class GridMismatchError(FacetflowError):
    "Fields that were expected to share a grid do not"


class OutOfTableError(FacetflowError):
    "A radial table was queried beyond its largest tabulated radius"


class QuadratureError(FacetflowError):
    "Adaptive refinement of a radial quadrature failed to reach its tolerance"


class NonConvergenceError(FacetflowError):
    """Raised when the nonlinear solve of an implicit step fails

    Parameters
    ----------
    msg : str
        description of the failure
    residuals : list[float]
        sup-norm of the residual after every iteration that was attempted
    """

    exit_code = 2

    def __init__(self, msg: str, residuals: ty.Sequence[float] = ()):
        self.residuals = list(residuals)
        super().__init__(msg)


class HypothesisError(FacetflowError):
    "The hypothesis of an estimate or lemma is not satisfied by its inputs"


class GeometryError(FacetflowError):
    "A parabolic cylinder does not fit inside the space-time domain of a run"


class IncompatibleRunsError(FacetflowError):
    "Two runs cannot be compared (different grids, times or unordered data)"
