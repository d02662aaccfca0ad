from .base import StreamMechanism, resolve_verdict
from .fixed import (BudgetAbsorption, BudgetDistribution, FIXED_MECHANISMS, UniformRelease,
                    baseline_step, dc, make_mechanism, pba_step, pbd_step)
from .dynamic import (DYNAMIC_MECHANISMS, DynamicBudgetAbsorption, DynamicBudgetDistribution,
                      ForwardWindowSet, advance_forward_windows, dpba_step, dpbd_step,
                      forward_nullified_borders, make_dynamic_mechanism, naive_members,
                      project_backward_requirement)
