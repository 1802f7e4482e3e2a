"""Statistical multiresolution estimation for image reconstruction.

Convex-cost image estimators constrained by localized residual bounds
over a multiscale system of pixel subsets, with Monte-Carlo calibrated
constraint weights, for Gaussian and Poisson noise.
"""

from .admm import AdmmConfig, SolveReport, admm_solve, stopping_check, write_history
from .grid import (PixelRect, SubsetSystem, SummedAreaTable, as_field,
                   build_custom_system, build_system_global, build_system_s0,
                   build_system_s2, read_system, windowed_sums, write_system)
from .harness import (OracleScan, log_lambda_grid, metrics, oracle_scan,
                      piecewise_phantom, rof_solve)
from .imageio import FormatError, read_image, write_image
from .operators import (GaussianConvolution, IdentityOperator, LinearOperator,
                        MaskOperator, ScaledOperator, fwhm_to_std_px,
                        norm_estimate, parse_operator)
from .poisson import PoissonConfig, anscombe, poisson_admm
from .projection import (CylinderSet, DykstraResult, OrthantSet, dykstra,
                         dykstra_system, project_cylinder, project_orthant,
                         project_shifted_cylinder)
from .prox import (CostSpec, ProxResult, bregman_sym, prox_cost,
                   prox_generalized, tv_value)
from .stats import (NoiseModel, QuantileRecord, append_quantile, assign_weights,
                    diagnose_violations, fourth_root_moments, lookup_quantile,
                    mr_statistic, simulate_quantile, transformed_statistic)

__version__ = "0.1.0"
