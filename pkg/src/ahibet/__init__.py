"""Anonymous hierarchical identity-based encryption with traceable
identities over integer lattices: gadget trapdoors, discrete-Gaussian
sampling, the seven scheme algorithms, and a file-based CLI.
"""

from .encoding import FrdContext, IdentityPath, find_irreducible, frd, hash_to_zqn
from .errors import (
    AhibetError,
    IntegerOverflowError,
    NonIntegralError,
    ParameterError,
    PreconditionError,
    ShapeError,
    SolveError,
)
from .linalg import IntMatrix, ModMatrix, ModVector
from .sampling import GaussianParam, RandomSource, gs_slack, rerand_slack
from .scheme import (
    Ciphertext,
    MasterPublicKey,
    MasterSecretKey,
    ParamSet,
    SecretKey,
    TracingKey,
    build_f,
    build_f_trace,
    decrypt,
    decrypt_detailed,
    derive,
    derive_params,
    encrypt,
    extract,
    setup,
    tk_ver,
    tsk_gen,
)
from .trapdoor import GadgetTrapdoor, ShortBasis

__version__ = "1.0.0"

__all__ = [
    "AhibetError", "Ciphertext", "FrdContext", "GadgetTrapdoor",
    "GaussianParam", "IdentityPath", "IntMatrix", "IntegerOverflowError",
    "MasterPublicKey", "MasterSecretKey", "ModMatrix", "ModVector",
    "NonIntegralError", "ParamSet", "ParameterError", "PreconditionError",
    "RandomSource", "SecretKey", "ShapeError", "ShortBasis", "SolveError",
    "TracingKey", "build_f", "build_f_trace", "decrypt", "decrypt_detailed",
    "derive", "derive_params", "encrypt", "extract", "find_irreducible",
    "frd", "gs_slack", "hash_to_zqn", "rerand_slack", "setup", "tk_ver",
    "tsk_gen",
]
