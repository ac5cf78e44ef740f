"""Bregman Finito/MISO incremental methods for nonconvex finite sums under relative smoothness."""
from .kernel import (Kernel, bregman, make_derived_kernel, make_euclidean_kernel,
                     make_poisson_kernel, make_quartic_kernel)
from .model import (Component, Problem, Regularizer, cardano_positive_root, poisson_component,
                    poisson_problem, project_l0_ball, quadratic_component, quadratic_problem,
                    relative_smoothness_margin, soft_threshold, squared_loss_component,
                    squared_loss_problem, t_solve_euclidean, t_solve_poisson_l1,
                    t_solve_quartic_l0, t_solve_quartic_l1)
from .sampler import Sampler, SamplerSpec, parse_sampler, validate_essentially_cyclic
from .solver_bfinito import bfinito_init, bfinito_run, bfinito_step
from .solver_lowmem import lowmem_init, lowmem_run, lowmem_step
from .solver_md import MDConfig, md_config, md_run, md_step
from .diagnostics import (TraceRecord, cost, descent_check, lyapunov, op_residual,
                          strconvex_rate_bound)

__version__ = "0.1.0"
