"""Dependent lifetimes in three interconvertible forms: marginal survival with
copula diagonal sections, order-statistic laws, and conditional hazard rates."""

from .core import (ConditionHError, ConsistencyError, ContractError, DiagonalFamily, DomainError,
                   InconsistentInputError, LifelineError, MarginalSurvival, MonotonicityError,
                   OrderStatFamily, RangeError, RateProfile, SupportError, TabulatedFunction,
                   exponential_marginal, invert_monotone)
from .mchr import HazardModel, check_exchangeable, check_minimally_stable
from .loadsharing import (OdThlsSpec, ex_thls_model, exact_orderstats, generate_singleton_min_stable,
                          necessary_min_stable)
from .archimedean import (arch_diagonals, arch_mu, clayton_generator, log_generator, power_ratio_generator,
                          recover_generator)
from .copulas import CopulaSpec, check_symmetries, cyclic3, extend_cyclic, negative_mixture, symmetrize
from .montecarlo import empirical_stats, gof_compare, sample
from .modelfile import CapabilityError, load_model

__version__ = "0.1.0"
