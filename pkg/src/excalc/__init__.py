"""excalc: equational deduction and finite-model checking for three logics of
exceptions (basic, decorated, explicit), with translations between them."""

from .core import (
    Deco,
    Equation,
    ExcalcError,
    Logic,
    Report,
    Specification,
    build_specification,
    decoration_of,
    well_formed,
)
from .deduction import Decision, DerivationStore, InverseImage, Step, equiv, inverse_image, mk_case, mk_match, normalize
from .dsl import parse, parse_equation, parse_term, print_specification
from .exceptions import (
    exceptional_inverse_image,
    inverse_image_comp,
    mk_case_e,
    mk_case_t,
    mk_handle,
    mk_raise,
    raise_at,
)
from .models import (
    FiniteModel,
    check_equation,
    enumerate_models,
    parse_model,
    soundness_audit,
    validate_model,
)
from .translate import TranslationResult, expand, undecorate

__version__ = "0.1.0"
